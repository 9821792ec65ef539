//! Interpolation of the length parameters between sketch and target values,
//! the homotopy systems posed on the full coordinate space and on the
//! driving-parameter space of a plan, finite-difference Jacobians (naive and
//! suffix-reusing), and the closed-form assumption checks.

use crate::cplan::{evaluate, EvalOutput, Instruction, ParamEnv, ParamRef, PlanError, Rcp};
use crate::cplan::Branch;
use crate::model::{residual_vector, Figure, ParamValues, Pdsp, XLayout};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HomotopyError {
    #[error("interpolation component {param} is not positive at t = {t}")]
    NotPositiveOnUnit { param: usize, t: f64 },
    #[error("positive support is unbounded")]
    Unbounded,
    #[error("quadratic coefficient must be positive")]
    InvalidCoefficient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterpKind {
    Linear,
    /// Concave quadratic `-c t^2 + (so - sk + c) t + sk`; one such component
    /// keeps the positive support compact.
    Quadratic { c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub sk: f64,
    pub so: f64,
    pub kind: InterpKind,
}

impl Component {
    pub fn value(&self, t: f64) -> f64 {
        match self.kind {
            InterpKind::Linear => self.sk + (self.so - self.sk) * t,
            InterpKind::Quadratic { c } => -c * t * t + (self.so - self.sk + c) * t + self.sk,
        }
    }

    /// Zeros of the component, ascending.
    pub fn roots(&self) -> Vec<f64> {
        match self.kind {
            InterpKind::Linear => {
                let s = self.so - self.sk;
                if s == 0.0 {
                    vec![]
                } else {
                    vec![-self.sk / s]
                }
            }
            InterpKind::Quadratic { c } => {
                let b = self.so - self.sk + c;
                let disc = b * b + 4.0 * c * self.sk;
                if disc < 0.0 {
                    vec![]
                } else {
                    let r = disc.sqrt();
                    let mut v = vec![(b - r) / (2.0 * c), (b + r) / (2.0 * c)];
                    v.sort_by(f64::total_cmp);
                    v
                }
            }
        }
    }

    /// The set `{t : value(t) >= 0}` as an interval, `None` bounds meaning
    /// unbounded on that side. Empty sets return a reversed interval.
    pub fn nonneg_interval(&self) -> (Option<f64>, Option<f64>) {
        match self.kind {
            InterpKind::Linear => {
                let s = self.so - self.sk;
                if s == 0.0 {
                    (None, None) // constant, sign checked elsewhere
                } else if s > 0.0 {
                    (Some(-self.sk / s), None)
                } else {
                    (None, Some(-self.sk / s))
                }
            }
            InterpKind::Quadratic { .. } => {
                let r = self.roots();
                if r.len() == 2 {
                    (Some(r[0]), Some(r[1]))
                } else {
                    (Some(0.0), Some(-1.0)) // never nonnegative
                }
            }
        }
    }

    pub fn min_on(&self, lo: f64, hi: f64) -> (f64, f64) {
        // both kinds are concave or affine: the minimum sits at an endpoint
        let (a, b) = (self.value(lo), self.value(hi));
        if a <= b {
            (a, lo)
        } else {
            (b, hi)
        }
    }
}

/// Per-parameter interpolation between `A^sk` and `A^so`.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolation {
    pub comps: Vec<Component>,
}

impl Interpolation {
    /// Build from explicit components, checking positivity on `[0, 1]`.
    pub fn custom(comps: Vec<Component>) -> Result<Self, HomotopyError> {
        for (i, c) in comps.iter().enumerate() {
            for t in [0.0, 1.0] {
                if c.value(t) <= 0.0 {
                    return Err(HomotopyError::NotPositiveOnUnit { param: i, t });
                }
            }
        }
        Ok(Interpolation { comps })
    }

    pub fn len(&self) -> usize {
        self.comps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn value(&self, param: usize, t: f64) -> f64 {
        self.comps[param].value(t)
    }

    pub fn values_at(&self, t: f64) -> Vec<f64> {
        self.comps.iter().map(|c| c.value(t)).collect()
    }

    pub fn params_at(&self, t: f64) -> ParamValues {
        ParamValues(self.values_at(t))
    }
}

/// The default interpolation: linear components, except the last parameter
/// which bends with the concave quadratic of coefficient `c` so that the
/// positive support is compact.
pub fn make_interpolation(
    a_sk: &ParamValues,
    a_so: &ParamValues,
    c: f64,
) -> Result<Interpolation, HomotopyError> {
    if c <= 0.0 {
        return Err(HomotopyError::InvalidCoefficient);
    }
    let n = a_sk.0.len();
    let comps = (0..n)
        .map(|i| Component {
            sk: a_sk.0[i],
            so: a_so.0[i],
            kind: if i + 1 == n { InterpKind::Quadratic { c } } else { InterpKind::Linear },
        })
        .collect();
    Interpolation::custom(comps)
}

/// The compact interval on which every interpolated length is nonnegative.
pub fn positive_support(interp: &Interpolation) -> Result<(f64, f64), HomotopyError> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for c in &interp.comps {
        let (l, h) = c.nonneg_interval();
        if let Some(l) = l {
            lo = lo.max(l);
        }
        if let Some(h) = h {
            hi = hi.min(h);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return Err(HomotopyError::Unbounded);
    }
    Ok((lo, hi))
}

/// The homotopy on the full coordinate space: residuals of all constraints
/// at the interpolated parameter values.
pub fn eval_h(
    pdsp: &Pdsp,
    interp: &Interpolation,
    layout: &XLayout,
    x: &DVector<f64>,
    t: f64,
) -> DVector<f64> {
    let fig = layout.unpack(x);
    residual_vector(pdsp, &fig, &interp.params_at(t)).expect("sized residual vector")
}

/// Finite-difference step for coordinate `x`: `h` relative to the magnitude,
/// with a floor of `h` itself.
pub fn fd_step(x: f64, h: f64) -> f64 {
    h * x.abs().max(1.0)
}

/// Forward-difference Jacobian of a vector function, one column per
/// coordinate; a probe that leaves the domain of `f` falls back to the
/// backward difference.
pub fn jacobian_fd<F, E>(f: F, x: &DVector<f64>, h: f64) -> Result<DMatrix<f64>, E>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>, E>,
{
    let base = f(x)?;
    let m = base.len();
    let n = x.len();
    let mut jac = DMatrix::zeros(m, n);
    for j in 0..n {
        let hj = fd_step(x[j], h);
        let mut probe = x.clone();
        probe[j] = x[j] + hj;
        let col = match f(&probe) {
            Ok(fw) => (fw - &base) / hj,
            Err(_) => {
                probe[j] = x[j] - hj;
                (&base - f(&probe)?) / hj
            }
        };
        jac.set_column(j, &col);
    }
    Ok(jac)
}

/// The homotopy reduced to a plan: unknowns are the driving parameters plus
/// `t`; equations are the removed-constraint residuals of the constructed
/// figure.
pub struct ReducedHomotopy<'a> {
    pub pdsp: &'a Pdsp,
    pub rcp: &'a Rcp,
    pub interp: &'a Interpolation,
    pub branch: Branch,
}

impl<'a> ReducedHomotopy<'a> {
    pub fn new(pdsp: &'a Pdsp, rcp: &'a Rcp, interp: &'a Interpolation, branch: Branch) -> Self {
        ReducedHomotopy { pdsp, rcp, interp, branch }
    }

    pub fn d(&self) -> usize {
        self.rcp.d()
    }

    fn split(&self, y: &DVector<f64>) -> (Vec<f64>, f64) {
        let d = self.d();
        (y.as_slice()[..d].to_vec(), y[d])
    }

    pub fn eval_figure(&self, y: &DVector<f64>) -> Result<EvalOutput, PlanError> {
        let (driving, t) = self.split(y);
        let model = self.interp.values_at(t);
        let env = ParamEnv { model: &model, driving: &driving };
        evaluate(self.rcp, self.pdsp, &env, &self.branch)
    }

    /// Removed-constraint residuals of a figure at time `t`.
    pub fn residuals(&self, fig: &Figure, t: f64) -> DVector<f64> {
        let model = self.interp.values_at(t);
        DVector::from_iterator(
            self.rcp.removed.len(),
            self.rcp.removed.iter().map(|&cid| {
                let c = &self.pdsp.constraints[cid];
                (fig.0[c.a] - fig.0[c.b]).norm() - model[c.param]
            }),
        )
    }

    pub fn eval(&self, y: &DVector<f64>) -> Result<DVector<f64>, PlanError> {
        let out = self.eval_figure(y)?;
        Ok(self.residuals(&out.figure, y[self.d()]))
    }

    /// First instruction in which each driving parameter (by position) is
    /// used.
    fn first_use(&self) -> Vec<usize> {
        let mut first = vec![usize::MAX; self.rcp.d()];
        for (i, ins) in self.rcp.instructions.iter().enumerate() {
            for site in ins.sites() {
                if let ParamRef::Driving(id) = site.radius {
                    let k = self.rcp.driving_index(id).expect("dangling driving parameter");
                    first[k] = first[k].min(i);
                }
            }
        }
        first
    }

    /// Jacobian of the reduced system, `d x (d+1)` with the `t` column last,
    /// computed by forward differences that re-evaluate only the suffix of
    /// the plan affected by each probe. Numerically identical to
    /// `jacobian_fd` over `eval`; `count` reports executed instructions.
    pub fn jacobian_optimized(
        &self,
        y: &DVector<f64>,
        h: f64,
    ) -> Result<(DMatrix<f64>, u64), PlanError> {
        use crate::cplan::eval_internal::{eval_from, EvalScratch};
        let d = self.d();
        let (driving, t) = self.split(y);
        let model = self.interp.values_at(t);
        let mut count: u64 = 0;

        let mut base = EvalScratch::new(self.pdsp.points.len(), self.rcp.circle_slots());
        {
            let env = ParamEnv { model: &model, driving: &driving };
            eval_from(self.rcp, &env, &self.branch, 0, &mut base, Some(&mut count))?;
        }
        let base_fig = base.figure();
        let r_base = self.residuals(&base_fig, t);

        let first = self.first_use();
        let mut jac = DMatrix::zeros(d, d + 1);

        // driving columns: re-run the plan from the first use of the probed
        // parameter against the cached prefix
        for j in 0..d {
            let hj = fd_step(driving[j], h);
            let start = first[j].min(self.rcp.instructions.len());
            let mut col = None;
            for dir in [1.0, -1.0] {
                let mut probe_driving = driving.clone();
                probe_driving[j] = driving[j] + dir * hj;
                let env = ParamEnv { model: &model, driving: &probe_driving };
                let mut scratch = base.clone();
                match eval_from(self.rcp, &env, &self.branch, start, &mut scratch, Some(&mut count))
                {
                    Ok(()) => {
                        let r = self.residuals(&scratch.figure(), t);
                        col = Some(if dir > 0.0 { (r - &r_base) / hj } else { (&r_base - r) / hj });
                        break;
                    }
                    Err(e) => {
                        if dir < 0.0 {
                            return Err(e);
                        }
                    }
                }
            }
            jac.set_column(j, &col.expect("both probes failed"));
        }

        // t column: every interpolated length moves, full re-evaluation
        {
            let ht = fd_step(t, h);
            let mut col = None;
            for dir in [1.0, -1.0] {
                let tp = t + dir * ht;
                let model_p = self.interp.values_at(tp);
                let env = ParamEnv { model: &model_p, driving: &driving };
                let mut scratch = EvalScratch::new(self.pdsp.points.len(), self.rcp.circle_slots());
                match eval_from(self.rcp, &env, &self.branch, 0, &mut scratch, Some(&mut count)) {
                    Ok(()) => {
                        let r = self.residuals(&scratch.figure(), tp);
                        col = Some(if dir > 0.0 { (r - &r_base) / ht } else { (&r_base - r) / ht });
                        break;
                    }
                    Err(e) => {
                        if dir < 0.0 {
                            return Err(e);
                        }
                    }
                }
            }
            jac.set_column(d, &col.expect("both probes failed"));
        }

        Ok((jac, count))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AssumptionStatus {
    Pass,
    Warn(String),
    Fail(String),
    NotCheckable,
}

impl AssumptionStatus {
    pub fn ok(&self) -> bool {
        !matches!(self, AssumptionStatus::Fail(_))
    }
}

/// Closed-form verdicts for the run preconditions (h1)-(h6).
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    /// Full-rank Jacobian along the path: not decidable ahead of the run.
    pub h1: AssumptionStatus,
    /// Compact positive support.
    pub h2: AssumptionStatus,
    /// Finitely many parameter crossings.
    pub h3: AssumptionStatus,
    /// The first instruction's length stays positive.
    pub h4: AssumptionStatus,
    /// No doubly-null radii on plain instructions.
    pub h5: AssumptionStatus,
    /// Kept radii of driving instructions stay positive.
    pub h6: AssumptionStatus,
    pub pos_sup: Option<(f64, f64)>,
}

impl AssumptionReport {
    pub fn all_ok(&self) -> bool {
        self.h2.ok() && self.h3.ok() && self.h4.ok() && self.h5.ok() && self.h6.ok()
    }
}

fn roots_within(comp: &Component, lo: f64, hi: f64) -> Vec<f64> {
    comp.roots().into_iter().filter(|t| (lo - 1e-12..=hi + 1e-12).contains(t)).collect()
}

fn positive_on(comp: &Component, lo: f64, hi: f64) -> Result<(), f64> {
    let (min, at) = comp.min_on(lo, hi);
    if min > 0.0 {
        Ok(())
    } else {
        Err(at)
    }
}

/// Check assumptions (h2)-(h6) for a problem, plan and interpolation; (h1)
/// is reported as not checkable.
pub fn check_assumptions(pdsp: &Pdsp, rcp: &Rcp, interp: &Interpolation) -> AssumptionReport {
    let pos_sup = positive_support(interp).ok();
    let h2 = match pos_sup {
        Some(_) => AssumptionStatus::Pass,
        None => AssumptionStatus::Fail("positive support is unbounded".into()),
    };

    let mut h3 = AssumptionStatus::Pass;
    'outer: for i in 0..interp.comps.len() {
        for j in i + 1..interp.comps.len() {
            if interp.comps[i] == interp.comps[j] {
                h3 = AssumptionStatus::Warn(format!(
                    "parameters {} and {} interpolate identically",
                    pdsp.params[i], pdsp.params[j]
                ));
                break 'outer;
            }
        }
    }

    let (lo, hi) = pos_sup.unwrap_or((0.0, 1.0));

    let first_param = rcp.instructions.first().and_then(|ins| match ins {
        Instruction::InterCL { site, .. } | Instruction::InterSL { site, .. } => match site.radius {
            ParamRef::Model(a) => Some(a),
            ParamRef::Driving(_) => None,
        },
        _ => None,
    });
    let h4 = match first_param {
        Some(a) => match positive_on(&interp.comps[a], lo, hi) {
            Ok(()) => AssumptionStatus::Pass,
            Err(t) => AssumptionStatus::Fail(format!(
                "{} vanishes at t = {t:.6} inside the positive support",
                pdsp.params[a]
            )),
        },
        None => AssumptionStatus::Fail("first instruction has no model radius".into()),
    };

    let mut h5 = AssumptionStatus::Pass;
    let mut h6 = AssumptionStatus::Pass;
    for (i, ins) in rcp.instructions.iter().enumerate().skip(1) {
        let radii: Vec<ParamRef> = ins.sites().iter().map(|s| s.radius).collect();
        let has_driving = radii.iter().any(|r| matches!(r, ParamRef::Driving(_)));
        if has_driving {
            // kept model radii must stay positive
            for r in &radii {
                if let ParamRef::Model(a) = r {
                    if let Err(t) = positive_on(&interp.comps[*a], lo, hi) {
                        h6 = AssumptionStatus::Fail(format!(
                            "instruction {i}: kept {} vanishes at t = {t:.6}",
                            pdsp.params[*a]
                        ));
                    }
                }
            }
        } else if radii.len() == 2 {
            if let (ParamRef::Model(a), ParamRef::Model(b)) = (radii[0], radii[1]) {
                let za = roots_within(&interp.comps[a], lo, hi);
                let zb = roots_within(&interp.comps[b], lo, hi);
                for ta in &za {
                    for tb in &zb {
                        if (ta - tb).abs() < 1e-9 {
                            h5 = AssumptionStatus::Fail(format!(
                                "instruction {i}: {} and {} vanish together at t = {ta:.6}",
                                pdsp.params[a], pdsp.params[b]
                            ));
                        }
                    }
                }
            }
        }
    }

    AssumptionReport { h1: AssumptionStatus::NotCheckable, h2, h3, h4, h5, h6, pos_sup }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cplan::{identify_branch, phi_prime, swap_instruction, ObjRef, Site};
    use crate::model::measure_params;
    use crate::testfix::{k33, k33_rprime, k33_sketch, qk33, qk33_plan};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vals(v: &[f64]) -> ParamValues {
        ParamValues(v.to_vec())
    }

    #[test]
    fn interpolation_endpoints_and_constant() {
        let interp = make_interpolation(&vals(&[1.0, 1.0]), &vals(&[1.0, 1.0]), 2.0).unwrap();
        assert_relative_eq!(interp.value(0, 0.37), 1.0);
        // the quadratic component bulges but meets its endpoints
        assert_relative_eq!(interp.value(1, 0.0), 1.0);
        assert_relative_eq!(interp.value(1, 1.0), 1.0);
        assert!(interp.value(1, 0.5) > 1.0);

        let lin = Component { sk: 1.0, so: 0.001, kind: InterpKind::Linear };
        for k in 0..=10 {
            assert!(lin.value(k as f64 / 10.0) > 0.0);
        }
    }

    #[test]
    fn quadratic_positive_support_roots() {
        // -2t^2 + 3t + 1: roots (3 +- sqrt(17)) / 4
        let quad = Component { sk: 1.0, so: 2.0, kind: InterpKind::Quadratic { c: 2.0 } };
        assert_relative_eq!(quad.value(0.0), 1.0);
        assert_relative_eq!(quad.value(1.0), 2.0);
        let interp = Interpolation::custom(vec![quad]).unwrap();
        let (lo, hi) = positive_support(&interp).unwrap();
        let s17 = 17.0_f64.sqrt();
        assert_relative_eq!(lo, (3.0 - s17) / 4.0, epsilon = 1e-12);
        assert_relative_eq!(hi, (3.0 + s17) / 4.0, epsilon = 1e-12);
        assert!(lo <= 0.0 && hi >= 1.0);
    }

    #[test]
    fn all_linear_increasing_support_is_unbounded() {
        let interp = Interpolation::custom(vec![
            Component { sk: 1.0, so: 2.0, kind: InterpKind::Linear },
            Component { sk: 0.5, so: 0.7, kind: InterpKind::Linear },
        ])
        .unwrap();
        assert_eq!(positive_support(&interp), Err(HomotopyError::Unbounded));
    }

    #[test]
    fn rejects_nonpositive_endpoint() {
        let err = make_interpolation(&vals(&[1.0, -0.5]), &vals(&[1.0, 1.0]), 2.0).unwrap_err();
        assert!(matches!(err, HomotopyError::NotPositiveOnUnit { param: 1, .. }));
        assert_eq!(
            make_interpolation(&vals(&[1.0]), &vals(&[1.0]), 0.0),
            Err(HomotopyError::InvalidCoefficient)
        );
    }

    #[test]
    fn full_homotopy_vanishes_on_the_sketch() {
        let pdsp = k33();
        let sketch = k33_sketch();
        let a_sk = measure_params(&pdsp, &sketch).unwrap();
        let a_so = ParamValues(a_sk.0.iter().map(|v| v * 1.1).collect());
        let interp = make_interpolation(&a_sk, &a_so, 2.0).unwrap();
        let layout = XLayout::new(&pdsp);
        let x = layout.pack(&sketch);
        assert!(eval_h(&pdsp, &interp, &layout, &x, 0.0).amax() < 1e-12);

        // midpoint matches a direct composition
        let h = eval_h(&pdsp, &interp, &layout, &x, 0.5);
        let direct = crate::model::residual_vector(&pdsp, &sketch, &interp.params_at(0.5)).unwrap();
        assert_relative_eq!(h.amax(), direct.amax());
        assert!(h.amax() > 1e-3);
    }

    fn k33_setup() -> (Pdsp, Rcp, Figure, Interpolation) {
        let pdsp = k33();
        let rcp = k33_rprime();
        let sketch = k33_sketch();
        let a_sk = measure_params(&pdsp, &sketch).unwrap();
        let a_so = ParamValues(a_sk.0.iter().map(|v| v * 1.08).collect());
        let interp = make_interpolation(&a_sk, &a_so, 2.0).unwrap();
        (pdsp, rcp, sketch, interp)
    }

    #[test]
    fn reduced_homotopy_pulls_back_the_sketch() {
        let (pdsp, rcp, sketch, interp) = k33_setup();
        let model0 = interp.values_at(0.0);
        let (driving, _) = phi_prime(&rcp, &sketch, 0.0);
        let env = ParamEnv { model: &model0, driving: &driving };
        let (branch, _) = identify_branch(&rcp, &pdsp, &env, &sketch, 1e-6).unwrap();
        let rh = ReducedHomotopy::new(&pdsp, &rcp, &interp, branch);
        let y = DVector::from_vec(vec![driving[0], 0.0]);
        let r = rh.eval(&y).unwrap();
        assert!(r.amax() < 1e-10, "sketch pullback residual {}", r.amax());

        // a reduced zero forces the full residual to vanish as well
        let out = rh.eval_figure(&y).unwrap();
        let full = crate::model::residual_vector(&pdsp, &out.figure, &interp.params_at(0.0))
            .unwrap();
        assert!(full.amax() <= r.amax() + 1e-10);

        // unreachable driving value leaves the evaluation domain
        let bad = DVector::from_vec(vec![100.0, 0.0]);
        assert!(matches!(rh.eval(&bad), Err(PlanError::OutsideDomain { .. })));
    }

    #[test]
    fn jacobian_fd_on_plain_functions() {
        // linear map: exact
        let f = |x: &DVector<f64>| -> Result<DVector<f64>, PlanError> {
            Ok(DVector::from_vec(vec![2.0 * x[0] - 3.0 * x[1], x[0] + 4.0 * x[1]]))
        };
        let j = jacobian_fd(f, &DVector::from_vec(vec![0.3, -0.7]), 1e-7).unwrap();
        assert_relative_eq!(j[(0, 0)], 2.0, epsilon = 1e-7);
        assert_relative_eq!(j[(0, 1)], -3.0, epsilon = 1e-7);
        assert_relative_eq!(j[(1, 0)], 1.0, epsilon = 1e-7);
        assert_relative_eq!(j[(1, 1)], 4.0, epsilon = 1e-7);

        // quadratic scalar at x = 1
        let sq = |x: &DVector<f64>| -> Result<DVector<f64>, PlanError> {
            Ok(DVector::from_vec(vec![x[0] * x[0]]))
        };
        let j = jacobian_fd(sq, &DVector::from_vec(vec![1.0]), 1e-7).unwrap();
        assert_relative_eq!(j[(0, 0)], 2.0, epsilon = 1e-6);
    }

    #[test]
    fn jacobian_fd_matches_central_difference_oracle() {
        let (pdsp, rcp, sketch, interp) = k33_setup();
        let model0 = interp.values_at(0.0);
        let (driving, _) = phi_prime(&rcp, &sketch, 0.0);
        let env = ParamEnv { model: &model0, driving: &driving };
        let (branch, _) = identify_branch(&rcp, &pdsp, &env, &sketch, 1e-6).unwrap();
        let rh = ReducedHomotopy::new(&pdsp, &rcp, &interp, branch);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut tested = 0;
        while tested < 20 {
            let y = DVector::from_vec(vec![
                driving[0] * rng.gen_range(0.85..1.15),
                rng.gen_range(0.0..1.0),
            ]);
            // stay away from boundary configurations where curvature blows up
            match rh.eval_figure(&y) {
                Ok(out) => {
                    if crate::cplan::gamma_plan(&rcp, &out.figure).unwrap_or(0.0) < 0.25 {
                        continue;
                    }
                }
                Err(_) => continue,
            }
            let fwd = jacobian_fd(|p| rh.eval(p), &y, 1e-7).unwrap();
            // central-difference oracle
            let mut central = DMatrix::zeros(1, 2);
            let mut ok = true;
            for j in 0..2 {
                let hj = fd_step(y[j], 1e-6);
                let mut yp = y.clone();
                let mut ym = y.clone();
                yp[j] += hj;
                ym[j] -= hj;
                match (rh.eval(&yp), rh.eval(&ym)) {
                    (Ok(a), Ok(b)) => central.set_column(j, &((a - b) / (2.0 * hj))),
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            for j in 0..2 {
                assert_relative_eq!(fwd[(0, j)], central[(0, j)], epsilon = 1e-4, max_relative = 1e-3);
            }
            tested += 1;
        }
    }

    #[test]
    fn optimized_jacobian_is_bit_identical_and_cheaper() {
        let (pdsp, rcp, sketch, interp) = k33_setup();
        let model0 = interp.values_at(0.0);
        let (driving, _) = phi_prime(&rcp, &sketch, 0.0);
        let env = ParamEnv { model: &model0, driving: &driving };
        let (branch, _) = identify_branch(&rcp, &pdsp, &env, &sketch, 1e-6).unwrap();
        let rh = ReducedHomotopy::new(&pdsp, &rcp, &interp, branch);

        let l = rcp.instructions.len() as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut tested = 0;
        while tested < 100 {
            let y = DVector::from_vec(vec![
                driving[0] * rng.gen_range(0.85..1.15),
                rng.gen_range(-0.1..1.1),
            ]);
            let Ok((opt, count)) = rh.jacobian_optimized(&y, 1e-7) else { continue };
            let naive = jacobian_fd(|p| rh.eval(p), &y, 1e-7).unwrap();
            assert_eq!(opt.nrows(), naive.nrows());
            for r in 0..opt.nrows() {
                for c in 0..opt.ncols() {
                    assert_eq!(
                        opt[(r, c)].to_bits(),
                        naive[(r, c)].to_bits(),
                        "entry ({r},{c}) differs"
                    );
                }
            }
            // naive cost: base + d + 1 full evaluations of all l instructions
            let naive_count = l * (rcp.d() as u64 + 2);
            // k is first used at instruction 1, so each driving probe skips one
            assert!(count < naive_count, "count {count} >= naive {naive_count}");
            assert_eq!(count, naive_count - 1);
            tested += 1;
        }
    }

    #[test]
    fn optimized_jacobian_suffix_only_for_last_instruction_parameter() {
        // swap the last instruction of the direct plan so its driving
        // parameter is first used there
        let pdsp = qk33();
        let mut rcp = qk33_plan();
        let sketch = k33_sketch();
        let a_sk = measure_params(&pdsp, &sketch).unwrap();
        let c = rcp.fresh_counter_peek();
        let rid = rcp.alloc_ref(format!("p1'{c}"), sketch.0[0]);
        let did = rcp.alloc_driving(format!("k{c}"), (sketch.0[5] - sketch.0[0]).norm());
        let mut new_instr = rcp.instructions[4].clone();
        *new_instr.second_site_mut().unwrap() =
            Site::new(crate::cplan::ObjRef::Ref(rid), ParamRef::Driving(did));
        crate::cplan::swap_instruction(&mut rcp, &pdsp, 4, new_instr).unwrap();

        let a_so = ParamValues(a_sk.0.iter().map(|v| v * 1.05).collect());
        let interp = make_interpolation(&a_sk, &a_so, 2.0).unwrap();
        let model0 = interp.values_at(0.0);
        let (driving, _) = phi_prime(&rcp, &sketch, 0.0);
        let env = ParamEnv { model: &model0, driving: &driving };
        let (branch, _) = identify_branch(&rcp, &pdsp, &env, &sketch, 1e-6).unwrap();
        let rh = ReducedHomotopy::new(&pdsp, &rcp, &interp, branch);

        let y = DVector::from_vec(vec![driving[0], 0.2]);
        let (_, count) = rh.jacobian_optimized(&y, 1e-7).unwrap();
        // base (5) + driving probe re-runs only the last instruction (1)
        // + t column (5)
        assert_eq!(count, 11);
    }

    #[test]
    fn assumption_report_for_the_benchmark_setup() {
        let (pdsp, rcp, _, interp) = k33_setup();
        let report = check_assumptions(&pdsp, &rcp, &interp);
        assert!(report.all_ok(), "{report:?}");
        assert_eq!(report.h1, AssumptionStatus::NotCheckable);
        let (lo, hi) = report.pos_sup.unwrap();
        assert!(lo <= 0.0 && hi >= 1.0);
    }

    #[test]
    fn identical_components_are_flagged() {
        let (pdsp, rcp, sketch, _) = k33_setup();
        let a_sk = measure_params(&pdsp, &sketch).unwrap();
        let mut a_so = ParamValues(a_sk.0.iter().map(|v| v * 1.1).collect());
        // make parameters 2 and 3 interpolate identically
        let mut a_sk2 = a_sk.clone();
        a_sk2.0[3] = a_sk2.0[2];
        a_so.0[3] = a_so.0[2];
        let interp = make_interpolation(&a_sk2, &a_so, 2.0).unwrap();
        let report = check_assumptions(&pdsp, &rcp, &interp);
        assert!(matches!(report.h3, AssumptionStatus::Warn(_)));
        assert!(report.all_ok());
    }

    #[test]
    fn vanishing_first_length_fails_h4() {
        let (pdsp, rcp, sketch, _) = k33_setup();
        let a_sk = measure_params(&pdsp, &sketch).unwrap();
        let mut comps: Vec<Component> = a_sk
            .0
            .iter()
            .map(|&v| Component { sk: v, so: 1.1 * v, kind: InterpKind::Linear })
            .collect();
        // a1 declines and crosses zero just past t = 1, inside the wide
        // positive support granted by the flat quadratic tail
        comps[0].so = 0.4 * comps[0].sk;
        let n = comps.len();
        comps[n - 1].kind = InterpKind::Quadratic { c: 0.05 };
        let interp = Interpolation::custom(comps).unwrap();
        let (lo, hi) = positive_support(&interp).unwrap();
        let root = interp.comps[0].roots()[0];
        assert!((lo..=hi).contains(&root), "root {root} outside [{lo}, {hi}]");
        let report = check_assumptions(&pdsp, &rcp, &interp);
        match &report.h4 {
            AssumptionStatus::Fail(msg) => assert!(msg.contains("a1"), "{msg}"),
            other => panic!("expected h4 failure, got {other:?}"),
        }
    }
}
