//! Numerical evaluation of a plan on a branch, branch identification against
//! a target figure, the driving-parameter pullback, and the boundary
//! distance of a figure under a plan.

use super::{Branch, Instruction, ObjRef, ParamRef, PlanError, Rcp};
use crate::geometry::{
    gamma_cc, gamma_cs, inter_circle_circle, inter_circle_line, inter_circle_sphere,
    inter_sphere_sphere, inter_sphere_sphere_plane, project_point_line, BranchSign, CircleRef,
    GeometryError, LineRef, Point,
};
use crate::model::{Figure, Pdsp};
use nalgebra::Vector3;

/// Resolved parameter values for one evaluation: interpolated model values
/// (indexed by `ParamId`) and the current driving vector (indexed by the
/// position of the driving parameter in the plan).
#[derive(Debug, Clone, Copy)]
pub struct ParamEnv<'a> {
    pub model: &'a [f64],
    pub driving: &'a [f64],
}

impl<'a> ParamEnv<'a> {
    pub fn resolve(&self, rcp: &Rcp, p: ParamRef) -> f64 {
        match p {
            ParamRef::Model(a) => self.model[a],
            ParamRef::Driving(id) => {
                self.driving[rcp.driving_index(id).expect("dangling driving parameter")]
            }
        }
    }
}

/// Result of evaluating a plan: the figure plus the intermediate circles.
#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub figure: Figure,
    pub circles: Vec<Option<CircleRef>>,
}

/// Working state of an evaluation; kept so that a suffix of the plan can be
/// re-run against cached prefix outputs.
#[derive(Debug, Clone)]
pub(crate) struct EvalScratch {
    pub points: Vec<Option<Point>>,
    pub circles: Vec<Option<CircleRef>>,
}

impl EvalScratch {
    pub fn new(n_points: usize, n_circles: usize) -> Self {
        let mut points = vec![None; n_points];
        points[0] = Some(Point::zeros());
        EvalScratch { points, circles: vec![None; n_circles] }
    }

    pub fn into_output(self) -> EvalOutput {
        EvalOutput {
            figure: Figure(self.points.into_iter().map(|p| p.expect("unconstructed point")).collect()),
            circles: self.circles,
        }
    }

    pub fn figure(&self) -> Figure {
        Figure(self.points.iter().map(|p| p.expect("unconstructed point")).collect())
    }
}

fn center_of(rcp: &Rcp, scratch: &EvalScratch, c: ObjRef, i: usize) -> Result<Point, PlanError> {
    match c {
        ObjRef::Point(p) => scratch.points[p].ok_or(PlanError::InvariantViolation(format!(
            "instruction {i} reads unconstructed point {p}"
        ))),
        ObjRef::Ref(r) => Ok(rcp.ref_pos(r)),
    }
}

/// Execute instruction `i` on the given branch sign, writing its output into
/// the scratch state.
pub(crate) fn exec_instruction(
    rcp: &Rcp,
    env: &ParamEnv,
    i: usize,
    sign: BranchSign,
    scratch: &mut EvalScratch,
) -> Result<(), PlanError> {
    let domain = |source: GeometryError| PlanError::OutsideDomain { instruction: i, source };
    match &rcp.instructions[i] {
        Instruction::InterCL { out, site } | Instruction::InterSL { out, site } => {
            let c = center_of(rcp, scratch, site.center, i)?;
            let r = env.resolve(rcp, site.radius);
            let p = inter_circle_line(c, r, &LineRef::x_axis(), sign).map_err(domain)?;
            scratch.points[*out] = Some(p);
        }
        Instruction::InterCC { out, first, second } => {
            let c1 = center_of(rcp, scratch, first.center, i)?;
            let c2 = center_of(rcp, scratch, second.center, i)?;
            let r1 = env.resolve(rcp, first.radius);
            let r2 = env.resolve(rcp, second.radius);
            let p = inter_circle_circle(c1, r1, c2, r2, sign).map_err(domain)?;
            scratch.points[*out] = Some(p);
        }
        Instruction::InterSSP { out, first, second } => {
            let c1 = center_of(rcp, scratch, first.center, i)?;
            let c2 = center_of(rcp, scratch, second.center, i)?;
            let r1 = env.resolve(rcp, first.radius);
            let r2 = env.resolve(rcp, second.radius);
            let p = inter_sphere_sphere_plane(c1, r1, c2, r2, Point::zeros(), Vector3::z(), sign)
                .map_err(domain)?;
            scratch.points[*out] = Some(p);
        }
        Instruction::InterSS { out, first, second } => {
            let c1 = center_of(rcp, scratch, first.center, i)?;
            let c2 = center_of(rcp, scratch, second.center, i)?;
            let r1 = env.resolve(rcp, first.radius);
            let r2 = env.resolve(rcp, second.radius);
            let c = inter_sphere_sphere(c1, r1, c2, r2).map_err(domain)?;
            scratch.circles[*out] = Some(c);
        }
        Instruction::InterCS { out, circle, second } => {
            let c = scratch.circles[*circle].ok_or(PlanError::InvariantViolation(format!(
                "instruction {i} reads unconstructed circle {circle}"
            )))?;
            let c3 = center_of(rcp, scratch, second.center, i)?;
            let r3 = env.resolve(rcp, second.radius);
            let p = inter_circle_sphere(&c, c3, r3, sign).map_err(domain)?;
            scratch.points[*out] = Some(p);
        }
    }
    Ok(())
}

/// Evaluate the instructions `start..` against an existing prefix state.
/// `counter`, when given, accumulates the number of instructions executed.
pub(crate) fn eval_from(
    rcp: &Rcp,
    env: &ParamEnv,
    branch: &Branch,
    start: usize,
    scratch: &mut EvalScratch,
    mut counter: Option<&mut u64>,
) -> Result<(), PlanError> {
    for i in start..rcp.instructions.len() {
        exec_instruction(rcp, env, i, branch.0[i], scratch)?;
        if let Some(c) = counter.as_deref_mut() {
            *c += 1;
        }
    }
    Ok(())
}

/// Evaluate the whole plan on a branch. Fails atomically with the index of
/// the first instruction whose intersection does not exist.
pub fn evaluate(
    rcp: &Rcp,
    pdsp: &Pdsp,
    env: &ParamEnv,
    branch: &Branch,
) -> Result<EvalOutput, PlanError> {
    let mut scratch = EvalScratch::new(pdsp.points.len(), rcp.circle_slots());
    eval_from(rcp, env, branch, 0, &mut scratch, None)?;
    Ok(scratch.into_output())
}

/// Identify the branch on which the plan reproduces a target figure,
/// constructing instruction by instruction and keeping for each step the
/// sign whose intersection lands on the target (ties pick `+1`, which is
/// where both intersections coincide on a boundary configuration).
pub fn identify_branch(
    rcp: &Rcp,
    pdsp: &Pdsp,
    env: &ParamEnv,
    target: &Figure,
    tol: f64,
) -> Result<(Branch, EvalOutput), PlanError> {
    let l = rcp.instructions.len();
    let mut branch = Branch::all_plus(l);
    let mut scratch = EvalScratch::new(pdsp.points.len(), rcp.circle_slots());
    for i in 0..l {
        match rcp.instructions[i].out_point() {
            None => {
                exec_instruction(rcp, env, i, BranchSign::Plus, &mut scratch)?;
            }
            Some(out) => {
                let want = target.0[out];
                let mut best: Option<(BranchSign, f64, EvalScratch)> = None;
                for sign in [BranchSign::Plus, BranchSign::Minus] {
                    let mut trial = scratch.clone();
                    if exec_instruction(rcp, env, i, sign, &mut trial).is_err() {
                        continue;
                    }
                    let dist = (trial.points[out].unwrap() - want).norm();
                    let better = match &best {
                        None => true,
                        Some((_, d, _)) => dist < *d,
                    };
                    if better {
                        best = Some((sign, dist, trial));
                    }
                }
                match best {
                    Some((sign, dist, trial)) if dist <= tol => {
                        branch.0[i] = sign;
                        scratch = trial;
                    }
                    Some((_, dist, _)) => {
                        return Err(PlanError::NoBranchMatches { instruction: i, best: dist })
                    }
                    None => {
                        return Err(PlanError::NoBranchMatches {
                            instruction: i,
                            best: f64::INFINITY,
                        })
                    }
                }
            }
        }
    }
    Ok((branch, scratch.into_output()))
}

/// Pull the driving-parameter values back from a figure: each added
/// constraint is measured between the constructed point and its fixed
/// reference point. Returns the values in driving order together with `t`.
pub fn phi_prime(rcp: &Rcp, fig: &Figure, t: f64) -> (Vec<f64>, f64) {
    let mut vals = vec![0.0; rcp.driving.len()];
    for (i, ins) in rcp.instructions.iter().enumerate() {
        for site in ins.sites() {
            if let (ObjRef::Ref(r), ParamRef::Driving(id)) = (site.center, site.radius) {
                let out = rcp.final_point_of(i).expect("driving site without a point");
                let k = rcp.driving_index(id).expect("dangling driving parameter");
                vals[k] = (fig.0[out] - rcp.ref_pos(r)).norm();
            }
        }
    }
    (vals, t)
}

/// Boundary distance of instruction `i` evaluated on a figure; `None` for
/// the line instruction, which is excluded from the measure.
pub fn gamma_of_instruction(
    rcp: &Rcp,
    fig: &Figure,
    i: usize,
) -> Result<Option<f64>, PlanError> {
    let deg = |_| PlanError::DegenerateGamma { instruction: i };
    match &rcp.instructions[i] {
        Instruction::InterCL { .. } | Instruction::InterSL { .. } => Ok(None),
        Instruction::InterCC { out, first, second }
        | Instruction::InterSSP { out, first, second } => {
            let c1 = rcp.center_value(first.center, fig);
            let c2 = rcp.center_value(second.center, fig);
            Ok(Some(gamma_cc(fig.0[*out], c1, c2).map_err(deg)?))
        }
        Instruction::InterSS { first, second, .. } => {
            let out = rcp
                .final_point_of(i)
                .ok_or(PlanError::InvariantViolation(format!("sphere-sphere step {i} unused")))?;
            let c1 = rcp.center_value(first.center, fig);
            let c2 = rcp.center_value(second.center, fig);
            Ok(Some(gamma_cc(fig.0[out], c1, c2).map_err(deg)?))
        }
        Instruction::InterCS { out, second, .. } => {
            let circle = reconstruct_circle(rcp, fig, i)?;
            let c3 = rcp.center_value(second.center, fig);
            Ok(Some(gamma_cs(fig.0[*out], &circle, c3).map_err(deg)?))
        }
    }
}

/// Rebuild the intermediate circle of the sphere-sphere step paired with the
/// circle-sphere instruction `i`, from figure data alone: its center is the
/// projection of the constructed point onto the line of the two sphere
/// centers.
pub(crate) fn reconstruct_circle(rcp: &Rcp, fig: &Figure, i: usize) -> Result<CircleRef, PlanError> {
    let Instruction::InterCS { out, circle, .. } = &rcp.instructions[i] else {
        return Err(PlanError::InvariantViolation(format!("instruction {i} is not circle-sphere")));
    };
    let producer = rcp
        .instructions
        .iter()
        .find(|ins| ins.out_circle() == Some(*circle))
        .ok_or(PlanError::InvariantViolation(format!("circle {circle} has no producer")))?;
    let (first, second) = match producer {
        Instruction::InterSS { first, second, .. } => (first, second),
        _ => unreachable!(),
    };
    let c1 = rcp.center_value(first.center, fig);
    let c2 = rcp.center_value(second.center, fig);
    let p = fig.0[*out];
    let center =
        project_point_line(p, c1, c2).map_err(|_| PlanError::DegenerateGamma { instruction: i })?;
    let axis = c2 - c1;
    Ok(CircleRef { center, radius: (p - center).norm(), normal: axis / axis.norm() })
}

/// Per-instruction boundary distances on a figure.
pub fn gamma_per_instruction(rcp: &Rcp, fig: &Figure) -> Result<Vec<Option<f64>>, PlanError> {
    (0..rcp.instructions.len()).map(|i| gamma_of_instruction(rcp, fig, i)).collect()
}

/// Distance of a figure to the nearest boundary configuration of the plan:
/// the minimum of the per-instruction measures, the first instruction
/// excluded.
pub fn gamma_plan(rcp: &Rcp, fig: &Figure) -> Result<f64, PlanError> {
    let mut g = f64::INFINITY;
    for i in 1..rcp.instructions.len() {
        if let Some(v) = gamma_of_instruction(rcp, fig, i)? {
            g = g.min(v);
        }
    }
    Ok(g)
}
