//! Exact-formula intersection primitives for ruler-and-compass style
//! constructions: circle/line, circle/circle, sphere/sphere, circle/sphere,
//! together with the normalized boundary-distance measures `gamma_*` that
//! vanish exactly on tangent configurations.
//!
//! All intersections are computed through the radical line (resp. radical
//! plane) and Pythagoras rather than by solving coordinate quadratics; this
//! keeps the computation well conditioned near tangency. Branch indexing is
//! continuous away from tangency: the `+1` branch is the intersection on the
//! positive side of the oriented center line (2D: sign of the cross product
//! `(c2-c1) x (p-c1)`; 3D: orientation in the carrying plane).

use nalgebra::Vector3;
use thiserror::Error;

/// Coordinates of a point. 2D figures live in the `z = 0` plane.
pub type Point = Vector3<f64>;

/// Relative tolerance on the intersection discriminant below which two
/// circles (or spheres) are declared tangent. Below this the square root
/// carries no significant digits.
pub const TANGENCY_EPS: f64 = 1e-12;

/// A line given by origin and unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineRef {
    pub origin: Point,
    pub direction: Point,
}

impl LineRef {
    pub fn new(origin: Point, direction: Point) -> Result<Self, GeometryError> {
        if (direction.norm() - 1.0).abs() > 1e-12 {
            return Err(GeometryError::DegenerateLine);
        }
        Ok(LineRef { origin, direction })
    }

    /// The x-axis, used as the reference line `l1` of canonical figures.
    pub fn x_axis() -> Self {
        LineRef { origin: Point::zeros(), direction: Vector3::x() }
    }
}

/// A circle embedded in 3D: center, radius and unit plane normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleRef {
    pub center: Point,
    pub radius: f64,
    pub normal: Point,
}

impl CircleRef {
    pub fn new(center: Point, radius: f64, normal: Point) -> Result<Self, GeometryError> {
        if radius < 0.0 {
            return Err(GeometryError::NonPositiveRadius);
        }
        if (normal.norm() - 1.0).abs() > 1e-12 {
            return Err(GeometryError::DegenerateLine);
        }
        Ok(CircleRef { center, radius, normal })
    }
}

/// Intersection choice: every point-producing instruction picks one of two
/// intersections.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchSign {
    Plus,
    Minus,
}

impl BranchSign {
    pub fn factor(self) -> f64 {
        match self {
            BranchSign::Plus => 1.0,
            BranchSign::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            BranchSign::Plus => BranchSign::Minus,
            BranchSign::Minus => BranchSign::Plus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("radius must be strictly positive")]
    NonPositiveRadius,
    #[error("circle center does not lie on the line")]
    CenterOffLine,
    #[error("circles/spheres are disjoint (centers too far apart)")]
    Disjoint,
    #[error("one circle/sphere is contained in the other")]
    Contained,
    #[error("coincident circles/spheres: infinitely many intersections")]
    Coincident,
    #[error("concentric with both radii zero")]
    DoublyDegenerate,
    #[error("gamma undefined: coincident input points")]
    DegenerateGamma,
    #[error("line through coincident points is undefined")]
    DegenerateLine,
}

/// One of the two intersections of a line with a circle centered on it.
///
/// The `+1` branch is `center + radius * direction`.
pub fn inter_circle_line(
    center: Point,
    radius: f64,
    line: &LineRef,
    b: BranchSign,
) -> Result<Point, GeometryError> {
    if radius <= 0.0 {
        return Err(GeometryError::NonPositiveRadius);
    }
    let off = center - line.origin;
    let along = off.dot(&line.direction);
    let perp = off - along * line.direction;
    if perp.norm() > 1e-9 * radius.max(1e-300) {
        return Err(GeometryError::CenterOffLine);
    }
    Ok(center + b.factor() * radius * line.direction)
}

/// Classification shared by all two-circle / two-sphere intersections:
/// position of the radical line along the center axis and the squared
/// half-chord. Tangency is snapped to a zero half-chord.
fn radical_split(
    c1: Point,
    r1: f64,
    c2: Point,
    r2: f64,
) -> Result<(Point, f64, f64), GeometryError> {
    let axis = c2 - c1;
    let dist = axis.norm();
    let scale = r1 + r2;
    if dist <= TANGENCY_EPS * scale.max(1e-300) || (dist == 0.0 && scale == 0.0) {
        return Err(if r1 == 0.0 && r2 == 0.0 {
            GeometryError::DoublyDegenerate
        } else if (r1 - r2).abs() <= TANGENCY_EPS * scale {
            GeometryError::Coincident
        } else {
            GeometryError::Contained
        });
    }
    let u = axis / dist;
    // Distance from c1 to the radical line along u, then Pythagoras.
    let x = (dist * dist + r1 * r1 - r2 * r2) / (2.0 * dist);
    let h2 = r1 * r1 - x * x;
    let tol = TANGENCY_EPS * scale * scale;
    if h2 < -tol {
        return Err(if dist > r1 + r2 {
            GeometryError::Disjoint
        } else {
            GeometryError::Contained
        });
    }
    let h = if h2 <= tol { 0.0 } else { h2.sqrt() };
    Ok((c1 + x * u, h, dist))
}

/// Intersection of two coplanar circles in the `z = 0` plane.
///
/// The `+1` branch satisfies `(c2-c1) x (p-c1) >= 0` (z-component of the
/// cross product); in the tangent case both branches return the unique point.
pub fn inter_circle_circle(
    c1: Point,
    r1: f64,
    c2: Point,
    r2: f64,
    b: BranchSign,
) -> Result<Point, GeometryError> {
    inter_circle_circle_in_plane(c1, r1, c2, r2, Vector3::z(), b)
}

/// Two-circle intersection inside the plane of unit normal `n` containing
/// both centers. The `+1` branch lies on the `n x (c2-c1)` side.
pub fn inter_circle_circle_in_plane(
    c1: Point,
    r1: f64,
    c2: Point,
    r2: f64,
    n: Point,
    b: BranchSign,
) -> Result<Point, GeometryError> {
    let (foot, h, dist) = radical_split(c1, r1, c2, r2)?;
    let u = (c2 - c1) / dist;
    let side = n.cross(&u);
    Ok(foot + b.factor() * h * side)
}

/// Intersection circle of two spheres, on the radical plane.
///
/// Tangent spheres yield a zero-radius circle.
pub fn inter_sphere_sphere(
    c1: Point,
    r1: f64,
    c2: Point,
    r2: f64,
) -> Result<CircleRef, GeometryError> {
    let (foot, h, dist) = radical_split(c1, r1, c2, r2)?;
    let u = (c2 - c1) / dist;
    Ok(CircleRef { center: foot, radius: h, normal: u })
}

/// Intersection of two spheres with the plane of unit normal `plane_n`
/// through the origin offset `plane_origin`. Both sphere centers may sit off
/// the plane; each sphere is first cut down to its in-plane circle.
pub fn inter_sphere_sphere_plane(
    c1: Point,
    r1: f64,
    c2: Point,
    r2: f64,
    plane_origin: Point,
    plane_n: Point,
    b: BranchSign,
) -> Result<Point, GeometryError> {
    let cut = |c: Point, r: f64| -> Result<(Point, f64), GeometryError> {
        let d = (c - plane_origin).dot(&plane_n);
        let rr = r * r - d * d;
        let tol = TANGENCY_EPS * r * r;
        if rr < -tol {
            return Err(GeometryError::Disjoint);
        }
        Ok((c - d * plane_n, if rr <= tol { 0.0 } else { rr.sqrt() }))
    };
    let (p1, q1) = cut(c1, r1)?;
    let (p2, q2) = cut(c2, r2)?;
    inter_circle_circle_in_plane(p1, q1, p2, q2, plane_n, b)
}

/// Intersection of a circle with a sphere.
///
/// The sphere is cut by the circle plane, reducing to a two-circle
/// intersection inside that plane. The `+1` branch is oriented by the axis
/// from the circle center toward the projected sphere center and the circle
/// normal.
pub fn inter_circle_sphere(
    c: &CircleRef,
    center: Point,
    r: f64,
    b: BranchSign,
) -> Result<Point, GeometryError> {
    if c.radius <= 0.0 {
        return Err(GeometryError::NonPositiveRadius);
    }
    let d = (center - c.center).dot(&c.normal);
    let rr = r * r - d * d;
    let tol = TANGENCY_EPS * r * r;
    if rr < -tol {
        return Err(GeometryError::Disjoint);
    }
    let r_eff = if rr <= tol { 0.0 } else { rr.sqrt() };
    let proj = center - d * c.normal;
    inter_circle_circle_in_plane(c.center, c.radius, proj, r_eff, c.normal, b)
}

/// Orthogonal projection of `p` onto the line through `a` and `b`.
pub fn project_point_line(p: Point, a: Point, b: Point) -> Result<Point, GeometryError> {
    let dir = b - a;
    let len2 = dir.norm_squared();
    if len2 == 0.0 {
        return Err(GeometryError::DegenerateLine);
    }
    Ok(a + (p - a).dot(&dir) / len2 * dir)
}

/// Normalized distance of `p_new` to the boundary configuration of a
/// two-circle (or two-sphere) intersection with centers `c1`, `c2`:
/// the distance from `p_new` to the center line over the larger of the two
/// radii. Zero exactly when the three points are collinear, i.e. the circles
/// are tangent at `p_new`; always in `[0, 1]`.
pub fn gamma_cc(p_new: Point, c1: Point, c2: Point) -> Result<f64, GeometryError> {
    let scale = (p_new - c1).norm().max((p_new - c2).norm()).max((c1 - c2).norm());
    if (p_new - c1).norm() <= TANGENCY_EPS * scale
        || (p_new - c2).norm() <= TANGENCY_EPS * scale
        || (c1 - c2).norm() <= TANGENCY_EPS * scale
        || scale == 0.0
    {
        return Err(GeometryError::DegenerateGamma);
    }
    let foot = project_point_line(p_new, c1, c2)?;
    let v = (p_new - foot).norm();
    Ok(v / (p_new - c1).norm().max((p_new - c2).norm()))
}

/// Boundary-distance measure of a circle/sphere intersection.
///
/// `p'` is the projection of the sphere center onto the circle plane and the
/// axis is the in-plane line through the circle center and `p'`; the measure
/// is the distance from `p_new` to that axis over the larger of the
/// circle-center and sphere-center distances. Zero exactly at tangency.
pub fn gamma_cs(p_new: Point, c: &CircleRef, s_center: Point) -> Result<f64, GeometryError> {
    let proj = s_center - (s_center - c.center).dot(&c.normal) * c.normal;
    let scale = c.radius.max((p_new - s_center).norm());
    if (proj - c.center).norm() <= TANGENCY_EPS * scale.max(1e-300) {
        return Err(GeometryError::DegenerateGamma);
    }
    let foot = project_point_line(p_new, c.center, proj)?;
    let v = (p_new - foot).norm();
    let denom = (p_new - c.center).norm().max((p_new - s_center).norm());
    if denom == 0.0 {
        return Err(GeometryError::DegenerateGamma);
    }
    Ok(v / denom)
}

/// A deterministic unit vector perpendicular to `dir` inside the plane of
/// unit normal `n` (left normal: `n x dir`).
pub fn left_normal_in_plane(dir: Point, n: Point) -> Point {
    let v = n.cross(&dir);
    let len = v.norm();
    if len == 0.0 {
        // dir parallel to n; fall back to any perpendicular of n.
        let pick = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        return n.cross(&pick).normalize();
    }
    v / len
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

    #[test]
    fn circle_line_axis_aligned() {
        let l = LineRef::x_axis();
        let p = inter_circle_line(pt(0.0, 0.0), 1.0, &l, BranchSign::Plus).unwrap();
        assert_relative_eq!(p, pt(1.0, 0.0));
        let q = inter_circle_line(pt(0.0, 0.0), 1.0, &l, BranchSign::Minus).unwrap();
        assert_relative_eq!(q, pt(-1.0, 0.0));
    }

    #[test]
    fn circle_line_rejects_zero_radius() {
        let l = LineRef::x_axis();
        assert_eq!(
            inter_circle_line(pt(0.0, 0.0), 0.0, &l, BranchSign::Plus),
            Err(GeometryError::NonPositiveRadius)
        );
    }

    #[test]
    fn circle_line_rejects_center_off_line() {
        let l = LineRef::x_axis();
        assert_eq!(
            inter_circle_line(pt(0.0, 0.5), 1.0, &l, BranchSign::Plus),
            Err(GeometryError::CenterOffLine)
        );
    }

    #[test]
    fn circle_circle_symmetric() {
        let s2 = 2.0_f64.sqrt();
        let p = inter_circle_circle(pt(0.0, 0.0), s2, pt(2.0, 0.0), s2, BranchSign::Plus).unwrap();
        assert_relative_eq!(p, pt(1.0, 1.0), epsilon = 1e-12);
        let q =
            inter_circle_circle(pt(0.0, 0.0), s2, pt(2.0, 0.0), s2, BranchSign::Minus).unwrap();
        assert_relative_eq!(q, pt(1.0, -1.0), epsilon = 1e-12);
    }

    #[test]
    fn circle_circle_tangent_unique_point() {
        for b in [BranchSign::Plus, BranchSign::Minus] {
            let p = inter_circle_circle(pt(0.0, 0.0), 1.0, pt(2.0, 0.0), 1.0, b).unwrap();
            assert_relative_eq!(p, pt(1.0, 0.0), epsilon = 1e-12);
        }
    }

    // Residual oracle for the radical-line formula: the returned point must
    // be on both circles. The +1 branch sits on the positive cross-product
    // side of the oriented center line.
    #[test]
    fn circle_circle_radical_line_case() {
        let c1 = pt(0.0, 0.0);
        let c2 = pt(0.0, 2.0);
        let (r1, r2) = (1.0, 5.0_f64.sqrt());
        let p = inter_circle_circle(c1, r1, c2, r2, BranchSign::Plus).unwrap();
        assert_relative_eq!((p - c1).norm(), r1, max_relative = 1e-12);
        assert_relative_eq!((p - c2).norm(), r2, max_relative = 1e-12);
        let cross = (c2 - c1).cross(&(p - c1)).z;
        assert!(cross > 0.0, "plus branch must be on the positive side");
        let m = inter_circle_circle(c1, r1, c2, r2, BranchSign::Minus).unwrap();
        assert_relative_eq!(m, pt(1.0, 0.0), epsilon = 1e-12);
        assert_relative_eq!(p, pt(-1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn circle_circle_error_taxonomy() {
        assert_eq!(
            inter_circle_circle(pt(0.0, 0.0), 1.0, pt(3.0, 0.0), 1.0, BranchSign::Plus),
            Err(GeometryError::Disjoint)
        );
        assert_eq!(
            inter_circle_circle(pt(0.0, 0.0), 3.0, pt(0.5, 0.0), 1.0, BranchSign::Plus),
            Err(GeometryError::Contained)
        );
        assert_eq!(
            inter_circle_circle(pt(0.0, 0.0), 1.0, pt(0.0, 0.0), 1.0, BranchSign::Plus),
            Err(GeometryError::Coincident)
        );
        assert_eq!(
            inter_circle_circle(pt(0.0, 0.0), 0.0, pt(0.0, 0.0), 0.0, BranchSign::Plus),
            Err(GeometryError::DoublyDegenerate)
        );
        assert_eq!(
            inter_circle_circle(pt(0.0, 0.0), 2.0, pt(0.0, 0.0), 1.0, BranchSign::Plus),
            Err(GeometryError::Contained)
        );
    }

    #[test]
    fn circle_circle_mirror_branches() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let c1 = pt(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let c2 = pt(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let d = (c2 - c1).norm();
            if d < 0.3 {
                continue;
            }
            let r1 = rng.gen_range(0.4 * d..1.5 * d);
            let lo = (d - r1).abs() + 0.05 * d;
            let hi = (d + r1) - 0.05 * d;
            if lo >= hi {
                continue;
            }
            let r2 = rng.gen_range(lo..hi);
            let p = inter_circle_circle(c1, r1, c2, r2, BranchSign::Plus).unwrap();
            let m = inter_circle_circle(c1, r1, c2, r2, BranchSign::Minus).unwrap();
            // mirror image across the center line
            let mid = project_point_line(p, c1, c2).unwrap();
            assert_relative_eq!(2.0 * mid - p, m, epsilon = 1e-9);
            // both residuals tight
            for q in [p, m] {
                assert_relative_eq!((q - c1).norm(), r1, max_relative = 1e-10);
                assert_relative_eq!((q - c2).norm(), r2, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn gamma_cc_examples() {
        let g = gamma_cc(pt(1.0, 1.0), pt(0.0, 0.0), pt(2.0, 0.0)).unwrap();
        assert_relative_eq!(g, 1.0 / 2.0_f64.sqrt(), epsilon = 1e-14);
        let g0 = gamma_cc(pt(1.0, 0.0), pt(0.0, 0.0), pt(2.0, 0.0)).unwrap();
        assert_relative_eq!(g0, 0.0);
        let g5 = gamma_cc(pt(1.0, 0.0), pt(0.0, 0.0), pt(0.0, 2.0)).unwrap();
        assert_relative_eq!(g5, 1.0 / 5.0_f64.sqrt(), epsilon = 1e-14);
        assert_eq!(
            gamma_cc(pt(0.0, 0.0), pt(0.0, 0.0), pt(2.0, 0.0)),
            Err(GeometryError::DegenerateGamma)
        );
    }

    #[test]
    fn gamma_invariant_under_rigid_motion_and_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a = pt(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let b = pt(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let c = pt(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            if let Ok(g) = gamma_cc(a, b, c) {
                assert!((0.0..=1.0 + 1e-12).contains(&g));
                let th: f64 = rng.gen_range(0.0..6.28);
                let s: f64 = rng.gen_range(0.1..10.0);
                let shift = pt(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
                let rot = |p: Point| {
                    pt(p.x * th.cos() - p.y * th.sin(), p.x * th.sin() + p.y * th.cos()) * s + shift
                };
                let g2 = gamma_cc(rot(a), rot(b), rot(c)).unwrap();
                assert_relative_eq!(g, g2, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn sphere_sphere_symmetric() {
        let s2 = 2.0_f64.sqrt();
        let c = inter_sphere_sphere(Point::zeros(), s2, Vector3::new(2.0, 0.0, 0.0), s2).unwrap();
        assert_relative_eq!(c.center, Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-12);
        assert_relative_eq!(c.radius, 1.0, epsilon = 1e-12);
        assert_relative_eq!(c.normal, Vector3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn sphere_sphere_disjoint() {
        assert_eq!(
            inter_sphere_sphere(Point::zeros(), 1.0, Vector3::new(3.0, 0.0, 0.0), 1.0),
            Err(GeometryError::Disjoint)
        );
    }

    // Oracle: substitute points of the returned circle into both sphere
    // equations.
    #[test]
    fn sphere_sphere_radical_plane_case() {
        let c1 = Point::zeros();
        let c2 = Vector3::new(1.0, 0.0, 0.0);
        let (r1, r2) = (2.0, 3.0_f64.sqrt());
        let c = inter_sphere_sphere(c1, r1, c2, r2).unwrap();
        assert_relative_eq!(c.center, Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-12);
        let e1 = left_normal_in_plane(Vector3::new(0.0, 1.0, 0.0), c.normal);
        let e2 = c.normal.cross(&e1);
        for k in 0..8 {
            let th = k as f64 * std::f64::consts::PI / 4.0;
            let p = c.center + c.radius * (th.cos() * e1 + th.sin() * e2);
            assert_relative_eq!((p - c1).norm(), r1, max_relative = 1e-12);
            assert_relative_eq!((p - c2).norm(), r2, max_relative = 1e-12);
        }
    }

    // The 2D examples embedded in the z = 0 plane, driven through a circle
    // whose carrying plane is z = 0.
    #[test]
    fn circle_sphere_embedded_2d_cases() {
        let circle = CircleRef::new(Point::zeros(), 2.0_f64.sqrt(), Vector3::z()).unwrap();
        let p = inter_circle_sphere(
            &circle,
            Vector3::new(2.0, 0.0, 0.0),
            2.0_f64.sqrt(),
            BranchSign::Plus,
        )
        .unwrap();
        assert_relative_eq!(p, Vector3::new(1.0, 1.0, 0.0), epsilon = 1e-12);

        let unit = CircleRef::new(Point::zeros(), 1.0, Vector3::z()).unwrap();
        for b in [BranchSign::Plus, BranchSign::Minus] {
            let q = inter_circle_sphere(&unit, Vector3::new(2.0, 0.0, 0.0), 1.0, b).unwrap();
            assert_relative_eq!(q, Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-12);
        }

        let c1 = Point::zeros();
        let c2 = Vector3::new(0.0, 2.0, 0.0);
        let q = inter_circle_sphere(&unit, c2, 5.0_f64.sqrt(), BranchSign::Minus).unwrap();
        assert_relative_eq!((q - c1).norm(), 1.0, max_relative = 1e-12);
        assert_relative_eq!((q - c2).norm(), 5.0_f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn circle_sphere_off_plane_residuals() {
        let circle =
            CircleRef::new(Vector3::new(0.3, -0.2, 0.7), 1.4, Vector3::z()).unwrap();
        let s_center = Vector3::new(1.0, 0.5, 1.6);
        let r = 1.7;
        for b in [BranchSign::Plus, BranchSign::Minus] {
            let p = inter_circle_sphere(&circle, s_center, r, b).unwrap();
            assert_relative_eq!((p - circle.center).norm(), circle.radius, max_relative = 1e-10);
            assert_relative_eq!((p - s_center).norm(), r, max_relative = 1e-10);
            assert_relative_eq!((p - circle.center).dot(&circle.normal), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn gamma_cs_embedded_2d_cases() {
        let unit = CircleRef::new(Point::zeros(), 2.0_f64.sqrt(), Vector3::z()).unwrap();
        // same data as the gamma_cc examples, sphere center standing in for c2
        let g = gamma_cs(Vector3::new(1.0, 1.0, 0.0), &unit, Vector3::new(2.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(g, 1.0 / 2.0_f64.sqrt(), epsilon = 1e-12);
        let tangent =
            gamma_cs(Vector3::new(1.0, 0.0, 0.0), &unit, Vector3::new(2.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(tangent, 0.0, epsilon = 1e-12);
        let one = CircleRef::new(Point::zeros(), 1.0, Vector3::z()).unwrap();
        let g5 = gamma_cs(Vector3::new(1.0, 0.0, 0.0), &one, Vector3::new(0.0, 2.0, 0.0)).unwrap();
        assert_relative_eq!(g5, 1.0 / 5.0_f64.sqrt(), epsilon = 1e-12);
        // sphere center on the circle axis: no well-defined in-plane axis
        assert_eq!(
            gamma_cs(Vector3::new(1.0, 0.0, 0.0), &one, Vector3::new(0.0, 0.0, 2.0)),
            Err(GeometryError::DegenerateGamma)
        );
    }

    #[test]
    fn project_point_line_cases() {
        assert_relative_eq!(
            project_point_line(pt(1.0, 1.0), pt(0.0, 0.0), pt(2.0, 0.0)).unwrap(),
            pt(1.0, 0.0)
        );
        assert_relative_eq!(
            project_point_line(pt(0.0, 5.0), pt(0.0, 0.0), pt(0.0, 1.0)).unwrap(),
            pt(0.0, 5.0)
        );
        assert_relative_eq!(
            project_point_line(pt(3.0, 4.0), pt(0.0, 0.0), pt(1.0, 1.0)).unwrap(),
            pt(3.5, 3.5)
        );
        assert_eq!(
            project_point_line(pt(1.0, 1.0), pt(2.0, 2.0), pt(2.0, 2.0)),
            Err(GeometryError::DegenerateLine)
        );
    }

    // Branch continuity along a one-parameter family staying clear of
    // tangency: output steps stay bounded by an estimated Lipschitz constant
    // times the input step.
    #[test]
    fn branch_continuity_sweep() {
        let c1 = pt(0.0, 0.0);
        let r1 = 2.0;
        let n = 2000;
        let mut prev: Option<Point> = None;
        let mut max_step = 0.0_f64;
        for k in 0..=n {
            let s = k as f64 / n as f64;
            let c2 = pt(1.5 + s, 0.5 * s);
            let r2 = 1.5 + 0.5 * s;
            let p = inter_circle_circle(c1, r1, c2, r2, BranchSign::Plus).unwrap();
            if let Some(q) = prev {
                max_step = max_step.max((p - q).norm());
            }
            prev = Some(p);
        }
        // inputs move by ~1.6/n per step; allow a generous Lipschitz factor
        assert!(max_step < 50.0 / n as f64, "max step {max_step}");
    }
}
