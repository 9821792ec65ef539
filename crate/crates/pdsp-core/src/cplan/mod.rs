//! Construction plans and their reparameterized form: triangular sequences
//! of intersection instructions that build every point of a figure from the
//! reference, plus the bookkeeping that lets instructions be swapped against
//! driving parameters on the fly.
//!
//! An `Rcp` is the quadruplet (instruction list, removed constraints,
//! driving parameters, reference objects) together with the table of
//! original instructions used to restore swapped ones.

mod evaluate;
mod greedy;
mod mutate;


pub(crate) mod eval_internal {
    pub(crate) use super::evaluate::{eval_from, EvalScratch};
}

pub use evaluate::{
    evaluate, gamma_of_instruction, gamma_per_instruction, gamma_plan, identify_branch, phi_prime,
    EvalOutput, ParamEnv,
};
pub use greedy::derive_rcp_greedy;
pub use mutate::{
    change_rcp, check_sc1, shift_reference, shift_reference_cs, swap_instruction, sync_driving,
    ChangeAction, ChangeKind,
};

use crate::geometry::{BranchSign, GeometryError, Point};
use crate::model::{ConstraintId, Dim, ParamId, Pdsp, PointId};
use thiserror::Error;

/// Stable key of a fresh reference point (never reused).
pub type RefId = u32;
/// Stable key of a driving parameter (never reused).
pub type DrivingId = u32;
/// Slot of an intermediate circle produced by a sphere-sphere instruction.
pub type CircleId = usize;

/// A center argument: either a problem point constructed earlier, or a fixed
/// reference point owned by the plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjRef {
    Point(PointId),
    Ref(RefId),
}

/// A radius argument: an interpolated model parameter or an unknown driving
/// parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRef {
    Model(ParamId),
    Driving(DrivingId),
}

/// One (center, radius) pair of an instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Site {
    pub center: ObjRef,
    pub radius: ParamRef,
}

impl Site {
    pub fn new(center: ObjRef, radius: ParamRef) -> Self {
        Site { center, radius }
    }

    /// A plain pair backed by a model constraint.
    pub fn is_original(&self) -> bool {
        matches!((self.center, self.radius), (ObjRef::Point(_), ParamRef::Model(_)))
    }

    /// A swapped-in pair: fresh reference point with a driving radius.
    pub fn is_driving(&self) -> bool {
        matches!((self.center, self.radius), (ObjRef::Ref(_), ParamRef::Driving(_)))
    }
}

/// A construction instruction. 2D plans use `InterCL` then `InterCC`; 3D
/// plans use `InterSL`, one `InterSSP`, then decomposed three-sphere steps
/// (`InterSS` producing a circle, immediately consumed by `InterCS`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instruction {
    InterCL { out: PointId, site: Site },
    InterSL { out: PointId, site: Site },
    InterCC { out: PointId, first: Site, second: Site },
    InterSSP { out: PointId, first: Site, second: Site },
    InterSS { out: CircleId, first: Site, second: Site },
    InterCS { out: PointId, circle: CircleId, second: Site },
}

impl Instruction {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Instruction::InterCL { .. } => "intercl",
            Instruction::InterSL { .. } => "intersl",
            Instruction::InterCC { .. } => "intercc",
            Instruction::InterSSP { .. } => "interssp",
            Instruction::InterSS { .. } => "interss",
            Instruction::InterCS { .. } => "intercs",
        }
    }

    pub fn out_point(&self) -> Option<PointId> {
        match *self {
            Instruction::InterCL { out, .. }
            | Instruction::InterSL { out, .. }
            | Instruction::InterCC { out, .. }
            | Instruction::InterSSP { out, .. }
            | Instruction::InterCS { out, .. } => Some(out),
            Instruction::InterSS { .. } => None,
        }
    }

    pub fn out_circle(&self) -> Option<CircleId> {
        match *self {
            Instruction::InterSS { out, .. } => Some(out),
            _ => None,
        }
    }

    /// The pair kept fixed by mutation (`a_{i2}` side), when there is one.
    pub fn first_site(&self) -> Option<&Site> {
        match self {
            Instruction::InterCC { first, .. }
            | Instruction::InterSSP { first, .. }
            | Instruction::InterSS { first, .. } => Some(first),
            _ => None,
        }
    }

    /// The pair replaced by mutation (`a_{i4}` / `a_{i6}` side).
    pub fn second_site(&self) -> Option<&Site> {
        match self {
            Instruction::InterCC { second, .. }
            | Instruction::InterSSP { second, .. }
            | Instruction::InterSS { second, .. }
            | Instruction::InterCS { second, .. } => Some(second),
            _ => None,
        }
    }

    pub fn second_site_mut(&mut self) -> Option<&mut Site> {
        match self {
            Instruction::InterCC { second, .. }
            | Instruction::InterSSP { second, .. }
            | Instruction::InterSS { second, .. }
            | Instruction::InterCS { second, .. } => Some(second),
            _ => None,
        }
    }

    /// Whether the two pairs may be exchanged (both are circles/spheres of
    /// the same nature). Circle/sphere instructions cannot swap their circle
    /// against the sphere.
    pub fn swappable(&self) -> bool {
        matches!(
            self,
            Instruction::InterCC { .. } | Instruction::InterSSP { .. } | Instruction::InterSS { .. }
        )
    }

    /// Exchange the two pairs; geometry is unchanged.
    pub fn arg_swap(&mut self) {
        match self {
            Instruction::InterCC { first, second, .. }
            | Instruction::InterSSP { first, second, .. }
            | Instruction::InterSS { first, second, .. } => std::mem::swap(first, second),
            _ => {}
        }
    }

    /// Equality up to the order of the two pairs.
    pub fn geom_eq(&self, other: &Instruction) -> bool {
        if self == other {
            return true;
        }
        if self.swappable() && std::mem::discriminant(self) == std::mem::discriminant(other) {
            let mut sw = other.clone();
            sw.arg_swap();
            return *self == sw;
        }
        false
    }

    pub fn sites(&self) -> Vec<&Site> {
        match self {
            Instruction::InterCL { site, .. } | Instruction::InterSL { site, .. } => vec![site],
            Instruction::InterCC { first, second, .. }
            | Instruction::InterSSP { first, second, .. }
            | Instruction::InterSS { first, second, .. } => vec![first, second],
            Instruction::InterCS { second, .. } => vec![second],
        }
    }
}

/// Decompose a three-sphere intersection into the sphere-sphere instruction
/// producing the intermediate circle and the circle-sphere instruction
/// producing the point.
pub fn decompose_sss(
    out: PointId,
    circle: CircleId,
    s1: Site,
    s2: Site,
    s3: Site,
) -> (Instruction, Instruction) {
    (
        Instruction::InterSS { out: circle, first: s1, second: s2 },
        Instruction::InterCS { out, circle, second: s3 },
    )
}

/// Per-instruction intersection choice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Branch(pub Vec<BranchSign>);

impl Branch {
    pub fn all_plus(len: usize) -> Self {
        Branch(vec![BranchSign::Plus; len])
    }
}

/// A driving parameter (an added dimension searched numerically).
#[derive(Debug, Clone, PartialEq)]
pub struct DrivingParam {
    pub id: DrivingId,
    pub name: String,
    pub value: f64,
}

/// A fresh reference point with its fixed position.
#[derive(Debug, Clone, PartialEq)]
pub struct RefPoint {
    pub id: RefId,
    pub name: String,
    pub pos: Point,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("instruction {instruction} left its domain: {source}")]
    OutsideDomain { instruction: usize, source: GeometryError },
    #[error("no branch reproduces the target figure (instruction {instruction}, best mismatch {best:.3e})")]
    NoBranchMatches { instruction: usize, best: f64 },
    #[error("gamma undefined at instruction {instruction}")]
    DegenerateGamma { instruction: usize },
    #[error("plan invariant violated: {0}")]
    InvariantViolation(String),
    #[error("changing the plan could not escape the boundary (gamma = {gamma:.3e})")]
    CannotEscape { gamma: f64 },
    #[error("no triangular construction order: {0}")]
    CannotTriangularize(String),
    #[error("zero radius at instruction {instruction}")]
    ZeroRadius { instruction: usize },
}

/// A reparameterized construction plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Rcp {
    pub dim: Dim,
    pub instructions: Vec<Instruction>,
    /// Removed constraints, ascending.
    pub removed: Vec<ConstraintId>,
    /// Driving parameters; their order is the order of the reduced unknowns.
    pub driving: Vec<DrivingParam>,
    /// Fresh reference points (beyond the canonical p1 / l1 / pl1).
    pub reference: Vec<RefPoint>,
    /// Original instructions of swapped entries.
    pub table: Vec<Option<Instruction>>,
    fresh_counter: u32,
    circle_slots: usize,
}

impl Rcp {
    pub fn new(
        dim: Dim,
        instructions: Vec<Instruction>,
        removed: Vec<ConstraintId>,
        driving: Vec<DrivingParam>,
        reference: Vec<RefPoint>,
    ) -> Self {
        let n = instructions.len();
        let circle_slots = instructions.iter().filter_map(|i| i.out_circle()).max().map_or(0, |c| c + 1);
        let fresh_counter = driving
            .iter()
            .map(|d| d.id + 1)
            .chain(reference.iter().map(|r| r.id + 1))
            .max()
            .unwrap_or(0);
        Rcp {
            dim,
            instructions,
            removed,
            driving,
            reference,
            table: vec![None; n],
            fresh_counter,
            circle_slots,
        }
    }

    /// Number of driving parameters.
    pub fn d(&self) -> usize {
        self.driving.len()
    }

    pub fn circle_slots(&self) -> usize {
        self.circle_slots
    }

    pub fn driving_index(&self, id: DrivingId) -> Option<usize> {
        self.driving.iter().position(|e| e.id == id)
    }

    pub fn ref_point(&self, id: RefId) -> Option<&RefPoint> {
        self.reference.iter().find(|r| r.id == id)
    }

    pub fn ref_pos(&self, id: RefId) -> Point {
        self.ref_point(id).map(|r| r.pos).expect("dangling reference point")
    }

    pub(crate) fn next_fresh(&mut self) -> u32 {
        let n = self.fresh_counter;
        self.fresh_counter += 1;
        n
    }

    pub(crate) fn fresh_counter_peek(&self) -> u32 {
        self.fresh_counter
    }

    pub(crate) fn alloc_ref(&mut self, name: String, pos: Point) -> RefId {
        let id = self.next_fresh();
        self.reference.push(RefPoint { id, name, pos });
        id
    }

    pub(crate) fn alloc_driving(&mut self, name: String, value: f64) -> DrivingId {
        let id = self.next_fresh();
        self.driving.push(DrivingParam { id, name, value });
        id
    }

    /// The problem point whose construction an instruction serves: the
    /// output point, or for a sphere-sphere step the output of the paired
    /// circle-sphere instruction.
    pub fn final_point_of(&self, i: usize) -> Option<PointId> {
        match &self.instructions[i] {
            Instruction::InterSS { out, .. } => self.instructions.iter().find_map(|ins| match ins {
                Instruction::InterCS { out: p, circle, .. } if circle == out => Some(*p),
                _ => None,
            }),
            other => other.out_point(),
        }
    }

    /// Resolve a center argument against a figure (problem point) or the
    /// plan's own reference table.
    pub fn center_value(&self, c: ObjRef, fig: &crate::model::Figure) -> Point {
        match c {
            ObjRef::Point(p) => fig.0[p],
            ObjRef::Ref(r) => self.ref_pos(r),
        }
    }

    /// Constraint consumed by a plain (point, model-parameter) pair of
    /// instruction `i`, if the pair is plain.
    pub fn site_constraint(&self, pdsp: &Pdsp, i: usize, site: &Site) -> Option<ConstraintId> {
        match (site.center, site.radius, self.final_point_of(i)) {
            (ObjRef::Point(q), ParamRef::Model(a), Some(out)) => {
                pdsp.constraints.iter().position(|c| c.param == a && c.joins(out, q))
            }
            _ => None,
        }
    }
}

/// Structural validation of an RCP against its problem: triangularity,
/// the driving-parameter conditions, and the constraint partition
/// `C = C_I (+) C_-`.
pub fn validate_rcp(rcp: &Rcp, pdsp: &Pdsp) -> Result<(), PlanError> {
    let bad = |msg: String| Err(PlanError::InvariantViolation(msg));
    let n_pts = pdsp.points.len();
    let l = rcp.instructions.len();
    if rcp.table.len() != l {
        return bad("table length differs from instruction count".into());
    }

    let mut built_pts = vec![false; n_pts];
    built_pts[0] = true;
    let mut built_circles = vec![false; rcp.circle_slots()];
    let mut used_refs: Vec<RefId> = Vec::new();
    let mut used_driving: Vec<DrivingId> = Vec::new();
    let mut consumed: Vec<ConstraintId> = Vec::new();

    for (i, ins) in rcp.instructions.iter().enumerate() {
        // kind placement
        match (i, rcp.dim, ins) {
            (0, Dim::Two, Instruction::InterCL { out, site }) => {
                if *out != 1 || site.center != ObjRef::Point(0) {
                    return bad("first instruction must build p2 from p1 on the reference line".into());
                }
            }
            (0, Dim::Three, Instruction::InterSL { out, site }) => {
                if *out != 1 || site.center != ObjRef::Point(0) {
                    return bad("first instruction must build p2 from p1 on the reference line".into());
                }
            }
            (0, _, _) => return bad(format!("first instruction has kind {}", ins.kind_name())),
            (1, Dim::Three, Instruction::InterSSP { out, .. }) => {
                if *out != 2 {
                    return bad("second 3D instruction must build p3 in the reference plane".into());
                }
            }
            (1, Dim::Three, _) => {
                return bad("second 3D instruction must be a sphere-sphere-plane step".into())
            }
            (_, Dim::Two, Instruction::InterCC { .. }) => {}
            (_, Dim::Three, Instruction::InterSS { .. } | Instruction::InterCS { .. }) => {}
            (_, _, _) => return bad(format!("instruction {} has kind {} out of place", i, ins.kind_name())),
        }

        // arguments must already exist
        for site in ins.sites() {
            match site.center {
                ObjRef::Point(p) => {
                    if !built_pts[p] {
                        return bad(format!("instruction {i} uses point {p} before construction"));
                    }
                }
                ObjRef::Ref(r) => {
                    if rcp.ref_point(r).is_none() {
                        return bad(format!("instruction {i} uses unknown reference point"));
                    }
                    used_refs.push(r);
                }
            }
            if let ParamRef::Driving(d) = site.radius {
                if rcp.driving_index(d).is_none() {
                    return bad(format!("instruction {i} uses unknown driving parameter"));
                }
                used_driving.push(d);
            }
            // pairs are plain or driving, never mixed
            if !site.is_original() && !site.is_driving() {
                return bad(format!(
                    "instruction {i} mixes a reference/driving pair with a model object"
                ));
            }
        }
        if let Instruction::InterCS { circle, .. } = ins {
            if !built_circles.get(*circle).copied().unwrap_or(false) {
                return bad(format!("instruction {i} uses circle {circle} before construction"));
            }
            if i == 0 || rcp.instructions[i - 1].out_circle() != Some(*circle) {
                return bad(format!("circle-sphere step {i} must follow its sphere-sphere step"));
            }
        }

        // condition (i): the first pair of a two-circle step keeps a model
        // parameter
        if let Some(first) = ins.first_site() {
            if matches!(first.radius, ParamRef::Driving(_)) {
                return bad(format!("instruction {i}: first radius is a driving parameter"));
            }
        }

        // outputs
        if let Some(p) = ins.out_point() {
            if built_pts[p] {
                return bad(format!("point {p} constructed twice"));
            }
            built_pts[p] = true;
        }
        if let Some(c) = ins.out_circle() {
            if built_circles[c] {
                return bad(format!("circle {c} constructed twice"));
            }
            built_circles[c] = true;
        }

        // consumed constraints
        for site in ins.sites() {
            if site.is_original() {
                match rcp.site_constraint(pdsp, i, site) {
                    Some(cid) => {
                        if consumed.contains(&cid) {
                            return bad(format!("constraint {cid} consumed twice"));
                        }
                        consumed.push(cid);
                    }
                    None => {
                        return bad(format!(
                            "instruction {i} pair does not match any constraint"
                        ))
                    }
                }
            }
        }
    }

    if let Some(p) = built_pts.iter().position(|b| !b) {
        return bad(format!("point {p} never constructed"));
    }

    // condition (ii): each fresh reference point serves exactly one
    // instruction, paired with exactly one driving parameter
    used_refs.sort_unstable();
    if used_refs.windows(2).any(|w| w[0] == w[1]) {
        return bad("a reference point is shared between instructions".into());
    }
    if used_refs.len() != rcp.reference.len() {
        return bad("unused reference points".into());
    }
    used_driving.sort_unstable();
    if used_driving.windows(2).any(|w| w[0] == w[1]) {
        return bad("a driving parameter is shared between instructions".into());
    }
    if used_driving.len() != rcp.driving.len() {
        return bad("unused driving parameters".into());
    }

    // C- is exactly the complement of the consumed constraints
    let mut expected_removed: Vec<ConstraintId> =
        (0..pdsp.constraints.len()).filter(|c| !consumed.contains(c)).collect();
    expected_removed.sort_unstable();
    let mut removed = rcp.removed.clone();
    removed.sort_unstable();
    if removed != expected_removed {
        return bad(format!(
            "removed constraints {removed:?} differ from complement {expected_removed:?}"
        ));
    }
    if rcp.removed.len() != rcp.driving.len() {
        return bad("d = |A+| = |C-| violated".into());
    }

    // table entries must differ from the live instruction and agree on output
    for (i, t) in rcp.table.iter().enumerate() {
        if let Some(orig) = t {
            if orig.geom_eq(&rcp.instructions[i]) {
                return bad(format!("table entry {i} equals the live instruction"));
            }
            if orig.out_point() != rcp.instructions[i].out_point()
                || orig.out_circle() != rcp.instructions[i].out_circle()
            {
                return bad(format!("table entry {i} builds a different object"));
            }
        }
    }
    Ok(())
}
