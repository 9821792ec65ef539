//! Shared fixtures: the bipartite six-point problem, its quasi variant that
//! admits a direct construction, and the reparameterized plan with one
//! driving parameter.

use crate::cplan::{Instruction, ObjRef, ParamRef, Rcp, RefPoint, Site};
use crate::geometry::Point;
use crate::model::{Constraint, Dim, Figure, Pdsp};
use nalgebra::Vector3;

pub fn pt(x: f64, y: f64) -> Point {
    Vector3::new(x, y, 0.0)
}

/// K33: 6 points, 9 distances. Param order a1..a9 over the edges
/// (1,2),(2,3),(3,4),(4,5),(5,6),(1,6),(1,4),(2,5),(3,6).
pub fn k33() -> Pdsp {
    let points = (1..=6).map(|i| format!("p{i}")).collect();
    let params = (1..=9).map(|i| format!("a{i}")).collect();
    let edges =
        [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (0, 3), (1, 4), (2, 5)];
    let constraints = edges
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| Constraint { param: i, a, b })
        .collect();
    Pdsp::new(Dim::Two, points, params, constraints).unwrap()
}

/// A generic sketch of K33 in reference position.
pub fn k33_sketch() -> Figure {
    Figure(vec![
        pt(0.0, 0.0),
        pt(3.1, 0.0),
        pt(4.2, 2.3),
        pt(2.0, 4.1),
        pt(-0.8, 2.9),
        pt(1.6, 1.4),
    ])
}

/// The quasi variant: the (3,6) constraint replaced by (1,3) with parameter
/// k, which makes the problem directly constructible.
pub fn qk33() -> Pdsp {
    let points = (1..=6).map(|i| format!("p{i}")).collect();
    let params = vec![
        "a1".into(),
        "a2".into(),
        "k".into(),
        "a3".into(),
        "a4".into(),
        "a5".into(),
        "a6".into(),
        "a7".into(),
        "a8".into(),
    ];
    let edges =
        [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (0, 5), (0, 3), (1, 4)];
    let constraints = edges
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| Constraint { param: i, a, b })
        .collect();
    Pdsp::new(Dim::Two, points, params, constraints).unwrap()
}

/// The direct construction plan of the quasi problem (no driving
/// parameters).
pub fn qk33_plan() -> Rcp {
    let p = ObjRef::Point;
    let m = ParamRef::Model;
    let instructions = vec![
        Instruction::InterCL { out: 1, site: Site::new(p(0), m(0)) },
        Instruction::InterCC { out: 2, first: Site::new(p(0), m(2)), second: Site::new(p(1), m(1)) },
        Instruction::InterCC { out: 3, first: Site::new(p(0), m(7)), second: Site::new(p(2), m(3)) },
        Instruction::InterCC { out: 4, first: Site::new(p(1), m(8)), second: Site::new(p(3), m(4)) },
        Instruction::InterCC { out: 5, first: Site::new(p(4), m(5)), second: Site::new(p(0), m(6)) },
    ];
    Rcp::new(Dim::Two, instructions, vec![], vec![], vec![])
}

/// The reparameterized plan for K33: the (3,6) constraint is removed, p3 is
/// built against the fresh reference point p1' with driving radius k.
pub fn k33_rprime() -> Rcp {
    let p = ObjRef::Point;
    let m = ParamRef::Model;
    let reference = vec![RefPoint { id: 0, name: "p1'".into(), pos: pt(0.0, 0.0) }];
    let driving = vec![crate::cplan::DrivingParam { id: 1, name: "k".into(), value: 0.0 }];
    let instructions = vec![
        Instruction::InterCL { out: 1, site: Site::new(p(0), m(0)) },
        Instruction::InterCC {
            out: 2,
            first: Site::new(p(1), m(1)),
            second: Site::new(ObjRef::Ref(0), ParamRef::Driving(1)),
        },
        Instruction::InterCC { out: 3, first: Site::new(p(0), m(6)), second: Site::new(p(2), m(2)) },
        Instruction::InterCC { out: 4, first: Site::new(p(1), m(7)), second: Site::new(p(3), m(3)) },
        Instruction::InterCC { out: 5, first: Site::new(p(4), m(4)), second: Site::new(p(0), m(5)) },
    ];
    Rcp::new(Dim::Two, instructions, vec![8], driving, reference)
}

/// A 3D four-point problem: a tetrahedron given all six edge lengths.
pub fn tetrahedron() -> Pdsp {
    let points = (1..=4).map(|i| format!("p{i}")).collect();
    let params = (1..=6).map(|i| format!("a{i}")).collect();
    let edges = [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3)];
    let constraints = edges
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| Constraint { param: i, a, b })
        .collect();
    Pdsp::new(Dim::Three, points, params, constraints).unwrap()
}

pub fn regular_tetrahedron_sketch() -> Figure {
    Figure(vec![
        Vector3::new(0.0, 0.0, 0.0),
        Vector3::new(1.0, 0.0, 0.0),
        Vector3::new(0.5, 3.0_f64.sqrt() / 2.0, 0.0),
        Vector3::new(0.5, 3.0_f64.sqrt() / 6.0, (2.0_f64 / 3.0).sqrt()),
    ])
}
