//! The point distance satisfaction problem itself: constraint graph,
//! figures, residual functions, parameter measurement from the sketch,
//! reference fixing and structural sanity checks.

use crate::geometry::Point;
use nalgebra::{DVector, Vector3};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    pub fn coords(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }

    /// Coordinates fixed by the reference (rigid motions of the ambient
    /// space): 3 in 2D, 6 in 3D.
    pub fn reference_dof(self) -> usize {
        match self {
            Dim::Two => 3,
            Dim::Three => 6,
        }
    }
}

pub type PointId = usize;
pub type ParamId = usize;
pub type ConstraintId = usize;

/// A distance constraint `|p_a - p_b| = param`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Constraint {
    pub param: ParamId,
    pub a: PointId,
    pub b: PointId,
}

impl Constraint {
    pub fn joins(&self, p: PointId, q: PointId) -> bool {
        (self.a == p && self.b == q) || (self.a == q && self.b == p)
    }

    pub fn other(&self, p: PointId) -> Option<PointId> {
        if self.a == p {
            Some(self.b)
        } else if self.b == p {
            Some(self.a)
        } else {
            None
        }
    }
}

/// A point distance satisfaction problem: unknown points, length parameters
/// and one distance constraint per parameter.
#[derive(Debug, Clone)]
pub struct Pdsp {
    pub dim: Dim,
    pub points: Vec<String>,
    pub params: Vec<String>,
    pub constraints: Vec<Constraint>,
}

/// An assignment of coordinates to every point of the problem. 2D figures
/// keep `z = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Figure(pub Vec<Point>);

impl Figure {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn diameter(&self) -> f64 {
        let mut d = 0.0_f64;
        for i in 0..self.0.len() {
            for j in i + 1..self.0.len() {
                d = d.max((self.0[i] - self.0[j]).norm());
            }
        }
        d
    }

    /// Largest coordinate-wise deviation between two figures.
    pub fn max_deviation(&self, other: &Figure) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|p| p.iter().all(|c| c.is_finite()))
    }
}

/// Values for the length parameters, indexed by `ParamId`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamValues(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("figure has no value for point {0}")]
    MissingPoint(String),
    #[error("no value for parameter {0}")]
    MissingParam(String),
    #[error("degenerate sketch: {0}")]
    DegenerateSketch(String),
    #[error("constraint {0} repeats a point")]
    SelfLoop(usize),
}

impl Pdsp {
    pub fn new(
        dim: Dim,
        points: Vec<String>,
        params: Vec<String>,
        constraints: Vec<Constraint>,
    ) -> Result<Self, ModelError> {
        for (i, c) in constraints.iter().enumerate() {
            if c.a == c.b {
                return Err(ModelError::SelfLoop(i));
            }
        }
        Ok(Pdsp { dim, points, params, constraints })
    }

    pub fn point_id(&self, name: &str) -> Option<PointId> {
        self.points.iter().position(|p| p == name)
    }

    pub fn param_id(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p == name)
    }

    /// Number of equations of the associated system, `|C|`.
    pub fn constraint_count(&self) -> usize {
        self.constraints.len()
    }

    /// Number of free coordinates once the reference is fixed.
    pub fn free_coordinate_count(&self) -> usize {
        self.points.len() * self.dim.coords() - self.dim.reference_dof()
    }

    /// Constraints incident to `p`, in declaration order.
    pub fn constraints_of(&self, p: PointId) -> impl Iterator<Item = (ConstraintId, &Constraint)> {
        self.constraints
            .iter()
            .enumerate()
            .filter(move |(_, c)| c.a == p || c.b == p)
    }

    pub fn find_constraint(&self, p: PointId, q: PointId) -> Option<ConstraintId> {
        self.constraints.iter().position(|c| c.joins(p, q))
    }
}

/// Signed residual of one constraint on a figure: Euclidean distance minus
/// the parameter value.
pub fn residual(c: &Constraint, fig: &Figure, vals: &ParamValues) -> Result<f64, ModelError> {
    let pa = fig.0.get(c.a).ok_or_else(|| ModelError::MissingPoint(format!("#{}", c.a)))?;
    let pb = fig.0.get(c.b).ok_or_else(|| ModelError::MissingPoint(format!("#{}", c.b)))?;
    let a = vals.0.get(c.param).ok_or_else(|| ModelError::MissingParam(format!("#{}", c.param)))?;
    Ok((pa - pb).norm() - a)
}

/// Residual vector of the full system, one component per constraint in
/// declaration order.
pub fn residual_vector(
    pdsp: &Pdsp,
    fig: &Figure,
    vals: &ParamValues,
) -> Result<DVector<f64>, ModelError> {
    let mut r = DVector::zeros(pdsp.constraints.len());
    for (i, c) in pdsp.constraints.iter().enumerate() {
        r[i] = residual(c, fig, vals)?;
    }
    Ok(r)
}

/// Read parameter values off a sketch, so that the sketch satisfies the
/// system exactly.
pub fn measure_params(pdsp: &Pdsp, sketch: &Figure) -> Result<ParamValues, ModelError> {
    let mut vals = vec![0.0; pdsp.params.len()];
    for c in &pdsp.constraints {
        let pa = sketch.0.get(c.a).ok_or_else(|| ModelError::MissingPoint(pdsp.points[c.a].clone()))?;
        let pb = sketch.0.get(c.b).ok_or_else(|| ModelError::MissingPoint(pdsp.points[c.b].clone()))?;
        let d = (pa - pb).norm();
        if d == 0.0 {
            return Err(ModelError::DegenerateSketch(format!(
                "constrained points {} and {} coincide",
                pdsp.points[c.a], pdsp.points[c.b]
            )));
        }
        vals[c.param] = d;
    }
    Ok(ParamValues(vals))
}

/// Outcome of the structural well-constrainedness check: the cardinality
/// count `|X| = |A| = |C|` plus a perfect bipartite matching between
/// constraints and free coordinates.
#[derive(Debug, Clone)]
pub struct StructuralReport {
    pub free_coordinates: usize,
    pub constraint_count: usize,
    pub param_count: usize,
    pub matched: usize,
    pub pass: bool,
}

impl StructuralReport {
    pub fn deficit(&self) -> i64 {
        self.constraint_count as i64 - self.free_coordinates as i64
    }
}

/// Check the counting condition and search a perfect matching between
/// constraints and the free coordinates of their endpoints (augmenting
/// paths).
pub fn check_structural(pdsp: &Pdsp) -> StructuralReport {
    let m = pdsp.free_coordinate_count();
    let nc = pdsp.constraints.len();

    // Free-coordinate slots per point: p1 has none, p2 one, p3 two (3D),
    // later points all of them.
    let coords = pdsp.dim.coords();
    let mut slot_of_point: Vec<Vec<usize>> = Vec::with_capacity(pdsp.points.len());
    let mut next = 0usize;
    for i in 0..pdsp.points.len() {
        let k = match (pdsp.dim, i) {
            (_, 0) => 0,
            (_, 1) => 1,
            (Dim::Three, 2) => 2,
            _ => coords,
        };
        slot_of_point.push((next..next + k).collect());
        next += k;
    }

    let adj: Vec<Vec<usize>> = pdsp
        .constraints
        .iter()
        .map(|c| {
            let mut v = slot_of_point[c.a].clone();
            v.extend_from_slice(&slot_of_point[c.b]);
            v
        })
        .collect();

    let mut slot_owner: Vec<Option<usize>> = vec![None; next];

    fn try_augment(
        c: usize,
        adj: &[Vec<usize>],
        slot_owner: &mut [Option<usize>],
        seen: &mut [bool],
    ) -> bool {
        for &s in &adj[c] {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            if slot_owner[s].is_none()
                || try_augment(slot_owner[s].unwrap(), adj, slot_owner, seen)
            {
                slot_owner[s] = Some(c);
                return true;
            }
        }
        false
    }

    let mut matched = 0;
    for c in 0..nc {
        let mut seen = vec![false; next];
        if try_augment(c, &adj, &mut slot_owner, &mut seen) {
            matched += 1;
        }
    }

    StructuralReport {
        free_coordinates: m,
        constraint_count: nc,
        param_count: pdsp.params.len(),
        matched,
        pass: m == nc && pdsp.params.len() == nc && matched == nc,
    }
}

/// A figure is in reference position when the first point sits at the
/// origin, the second on the positive x-axis, and (in 3D) the third in the
/// `z = 0` plane with positive y. The free coordinates of the reduced system
/// are everything else.
pub fn is_canonical(dim: Dim, fig: &Figure) -> bool {
    let tol = 1e-9 * fig.diameter().max(1.0);
    let ok2 = fig.0[0].norm() <= tol && fig.0[1].y.abs() <= tol && fig.0[1].x > 0.0;
    match dim {
        Dim::Two => ok2 && fig.0.iter().all(|p| p.z == 0.0),
        Dim::Three => {
            ok2 && fig.0[1].z.abs() <= tol && fig.0[2].z.abs() <= tol && fig.0[2].y > 0.0
        }
    }
}

/// The rigid motion taking a sketch into reference position, as an
/// orthonormal frame anchored at the first point.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceFrame {
    pub origin: Point,
    pub ex: Point,
    pub ey: Point,
    pub ez: Point,
}

impl ReferenceFrame {
    pub fn to_canonical(&self, p: Point) -> Point {
        let v = p - self.origin;
        Vector3::new(v.dot(&self.ex), v.dot(&self.ey), v.dot(&self.ez))
    }
}

/// Frame of the reference objects (p1, the line toward p2, and in 3D the
/// plane of the first three points). Fails when those objects are not in
/// general position.
pub fn reference_frame(pdsp: &Pdsp, sketch: &Figure) -> Result<ReferenceFrame, ModelError> {
    if sketch.len() != pdsp.points.len() {
        return Err(ModelError::MissingPoint("sketch is incomplete".into()));
    }
    if !sketch.all_finite() {
        return Err(ModelError::DegenerateSketch("non-finite coordinates".into()));
    }
    let p1 = sketch.0[0];
    let u = sketch.0[1] - p1;
    let lu = u.norm();
    if lu == 0.0 {
        return Err(ModelError::DegenerateSketch("p1 and p2 coincide".into()));
    }
    let ex = u / lu;
    let (ey, ez) = match pdsp.dim {
        Dim::Two => {
            for p in &sketch.0 {
                if p.z != 0.0 {
                    return Err(ModelError::DegenerateSketch("2D sketch with nonzero z".into()));
                }
            }
            let ez = Vector3::z();
            (ez.cross(&ex), ez)
        }
        Dim::Three => {
            let w = sketch.0[2] - p1;
            let ez = ex.cross(&w);
            let lz = ez.norm();
            if lz <= 1e-12 * lu.max(w.norm()) {
                return Err(ModelError::DegenerateSketch(
                    "p1, p2, p3 are collinear".into(),
                ));
            }
            let ez = ez / lz;
            (ez.cross(&ex), ez)
        }
    };
    Ok(ReferenceFrame { origin: p1, ex, ey, ez })
}

/// Rigid motion bringing a figure into reference position. Fails when the
/// chosen reference objects are not in general position.
pub fn fix_reference(pdsp: &Pdsp, sketch: &Figure) -> Result<Figure, ModelError> {
    let frame = reference_frame(pdsp, sketch)?;
    let fig = Figure(sketch.0.iter().map(|&p| frame.to_canonical(p)).collect());
    debug_assert!(is_canonical(pdsp.dim, &fig));
    Ok(fig)
}

/// Packing of the free coordinates into the vector `X` of the full system,
/// in deterministic order: `x2`, then `(x3, y3)` (3D), then full coordinates
/// of the remaining points.
#[derive(Debug, Clone)]
pub struct XLayout {
    pub dim: Dim,
    pub n_points: usize,
}

impl XLayout {
    pub fn new(pdsp: &Pdsp) -> Self {
        XLayout { dim: pdsp.dim, n_points: pdsp.points.len() }
    }

    pub fn m(&self) -> usize {
        self.n_points * self.dim.coords()
            - self.dim.reference_dof()
    }

    pub fn pack(&self, fig: &Figure) -> DVector<f64> {
        let mut x = DVector::zeros(self.m());
        let mut k = 0;
        for (i, p) in fig.0.iter().enumerate() {
            match (self.dim, i) {
                (_, 0) => {}
                (_, 1) => {
                    x[k] = p.x;
                    k += 1;
                }
                (Dim::Three, 2) => {
                    x[k] = p.x;
                    x[k + 1] = p.y;
                    k += 2;
                }
                (Dim::Two, _) => {
                    x[k] = p.x;
                    x[k + 1] = p.y;
                    k += 2;
                }
                (Dim::Three, _) => {
                    x[k] = p.x;
                    x[k + 1] = p.y;
                    x[k + 2] = p.z;
                    k += 3;
                }
            }
        }
        debug_assert_eq!(k, self.m());
        x
    }

    pub fn unpack(&self, x: &DVector<f64>) -> Figure {
        let mut pts = Vec::with_capacity(self.n_points);
        let mut k = 0;
        for i in 0..self.n_points {
            let p = match (self.dim, i) {
                (_, 0) => Point::zeros(),
                (_, 1) => {
                    let p = Vector3::new(x[k], 0.0, 0.0);
                    k += 1;
                    p
                }
                (Dim::Three, 2) => {
                    let p = Vector3::new(x[k], x[k + 1], 0.0);
                    k += 2;
                    p
                }
                (Dim::Two, _) => {
                    let p = Vector3::new(x[k], x[k + 1], 0.0);
                    k += 2;
                    p
                }
                (Dim::Three, _) => {
                    let p = Vector3::new(x[k], x[k + 1], x[k + 2]);
                    k += 3;
                    p
                }
            };
            pts.push(p);
        }
        Figure(pts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(x: f64, y: f64) -> Point {
        Vector3::new(x, y, 0.0)
    }

    /// K33: 6 points, 9 distances, the bipartite benchmark of the method.
    pub fn k33() -> Pdsp {
        let points = (1..=6).map(|i| format!("p{i}")).collect();
        let params = (1..=9).map(|i| format!("a{i}")).collect();
        let edges = [
            (0, 1), // a1
            (1, 2), // a2
            (2, 3), // a3
            (3, 4), // a4
            (4, 5), // a5
            (0, 5), // a6
            (0, 3), // a7
            (1, 4), // a8
            (2, 5), // a9
        ];
        let constraints = edges
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| Constraint { param: i, a, b })
            .collect();
        Pdsp::new(Dim::Two, points, params, constraints).unwrap()
    }

    #[test]
    fn residual_pythagoras() {
        let pdsp = Pdsp::new(
            Dim::Two,
            vec!["p1".into(), "p2".into()],
            vec!["a1".into()],
            vec![Constraint { param: 0, a: 0, b: 1 }],
        )
        .unwrap();
        let fig = Figure(vec![pt(0.0, 0.0), pt(3.0, 4.0)]);
        let r5 = residual(&pdsp.constraints[0], &fig, &ParamValues(vec![5.0])).unwrap();
        assert_relative_eq!(r5, 0.0);
        let r4 = residual(&pdsp.constraints[0], &fig, &ParamValues(vec![4.0])).unwrap();
        assert_relative_eq!(r4, 1.0);
        let fig2 = Figure(vec![pt(0.0, 0.0), pt(1.0, 1.0)]);
        let r = residual(&pdsp.constraints[0], &fig2, &ParamValues(vec![1.0])).unwrap();
        assert_relative_eq!(r, 2.0_f64.sqrt() - 1.0);
    }

    #[test]
    fn measured_sketch_has_zero_residual() {
        let pdsp = k33();
        let sketch = Figure(vec![
            pt(0.0, 0.0),
            pt(3.1, 0.0),
            pt(4.2, 2.3),
            pt(2.0, 4.1),
            pt(-0.8, 2.9),
            pt(1.6, 1.4),
        ]);
        let vals = measure_params(&pdsp, &sketch).unwrap();
        let r = residual_vector(&pdsp, &sketch, &vals).unwrap();
        assert!(r.amax() == 0.0);
        let mut perturbed = sketch.clone();
        perturbed.0[3].x += 0.01;
        let r2 = residual_vector(&pdsp, &perturbed, &vals).unwrap();
        assert!(r2.amax() > 1e-4);
    }

    #[test]
    fn residual_invariant_under_rigid_motion() {
        let pdsp = k33();
        let sketch = Figure(vec![
            pt(0.0, 0.0),
            pt(3.1, 0.0),
            pt(4.2, 2.3),
            pt(2.0, 4.1),
            pt(-0.8, 2.9),
            pt(1.6, 1.4),
        ]);
        let vals = measure_params(&pdsp, &sketch).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let th: f64 = rng.gen_range(0.0..6.28);
            let shift = pt(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let moved = Figure(
                sketch
                    .0
                    .iter()
                    .map(|p| {
                        pt(
                            p.x * th.cos() - p.y * th.sin(),
                            p.x * th.sin() + p.y * th.cos(),
                        ) + shift
                    })
                    .collect(),
            );
            let r = residual_vector(&pdsp, &moved, &vals).unwrap();
            assert!(r.amax() < 1e-12);
        }
    }

    #[test]
    fn degenerate_sketch_rejected() {
        let pdsp = Pdsp::new(
            Dim::Two,
            vec!["p1".into(), "p2".into()],
            vec!["a1".into()],
            vec![Constraint { param: 0, a: 0, b: 1 }],
        )
        .unwrap();
        let fig = Figure(vec![pt(1.0, 1.0), pt(1.0, 1.0)]);
        assert!(matches!(
            measure_params(&pdsp, &fig),
            Err(ModelError::DegenerateSketch(_))
        ));
    }

    #[test]
    fn structural_counts() {
        let pdsp = k33();
        let rep = check_structural(&pdsp);
        assert!(rep.pass);
        assert_eq!(rep.free_coordinates, 9);

        // triangle with a missing constraint is under-constrained
        let tri = Pdsp::new(
            Dim::Two,
            vec!["p1".into(), "p2".into(), "p3".into()],
            vec!["a1".into(), "a2".into()],
            vec![
                Constraint { param: 0, a: 0, b: 1 },
                Constraint { param: 1, a: 1, b: 2 },
            ],
        )
        .unwrap();
        assert!(!check_structural(&tri).pass);
    }

    #[test]
    fn fix_reference_canonicalizes() {
        let pdsp = k33();
        let sketch = Figure(vec![
            pt(1.0, 2.0),
            pt(4.0, 2.5),
            pt(5.0, 4.0),
            pt(3.0, 6.0),
            pt(0.0, 5.0),
            pt(2.5, 3.5),
        ]);
        let canon = fix_reference(&pdsp, &sketch).unwrap();
        assert!(is_canonical(Dim::Two, &canon));
        // distances preserved
        let before = measure_params(&pdsp, &sketch).unwrap();
        let after = measure_params(&pdsp, &canon).unwrap();
        for (a, b) in before.0.iter().zip(after.0.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        assert_eq!(XLayout::new(&pdsp).m(), 9);
    }

    #[test]
    fn layout_roundtrip() {
        let pdsp = k33();
        let layout = XLayout::new(&pdsp);
        let fig = Figure(vec![
            pt(0.0, 0.0),
            pt(3.0, 0.0),
            pt(4.0, 2.0),
            pt(2.0, 4.0),
            pt(-1.0, 3.0),
            pt(1.5, 1.5),
        ]);
        let x = layout.pack(&fig);
        assert_eq!(x.len(), 9);
        let back = layout.unpack(&x);
        assert_eq!(fig, back);
    }
}
