//! Naive derivation of an initial plan from a problem and its sketch:
//! points are ordered greedily by the number of already-constructed
//! neighbors, and every missing support distance becomes a driving parameter
//! against a fresh reference point read off the sketch.

use super::{validate_rcp, Instruction, ObjRef, ParamRef, PlanError, Rcp, Site};
use crate::geometry::{gamma_cc, gamma_cs, project_point_line, CircleRef};
use crate::model::{ConstraintId, Dim, Figure, Pdsp, PointId};

/// Pick the sketch point whose position, used as a fresh reference center,
/// keeps the new instruction farthest from a boundary configuration.
fn best_donor<F>(pdsp: &Pdsp, exclude: &[PointId], score: F) -> Option<PointId>
where
    F: Fn(PointId) -> Option<f64>,
{
    let mut best: Option<(PointId, f64)> = None;
    for p in 0..pdsp.points.len() {
        if exclude.contains(&p) {
            continue;
        }
        if let Some(g) = score(p) {
            if best.map_or(true, |(_, b)| g > b) {
                best = Some((p, g));
            }
        }
    }
    best.map(|(p, _)| p)
}

/// Derive a valid plan greedily. The result satisfies the driving-parameter
/// conditions and minimizes the number of driving parameters greedily, not
/// optimally.
pub fn derive_rcp_greedy(pdsp: &Pdsp, sketch: &Figure) -> Result<Rcp, PlanError> {
    let n = pdsp.points.len();
    let err = |msg: &str| PlanError::CannotTriangularize(msg.to_string());
    if sketch.len() != n {
        return Err(err("sketch incomplete"));
    }
    let needed = match pdsp.dim {
        Dim::Two => 2,
        Dim::Three => 3,
    };

    let mut built = vec![false; n];
    built[0] = true;
    let mut consumed: Vec<ConstraintId> = Vec::new();
    let mut instructions: Vec<Instruction> = Vec::new();
    let mut rcp = Rcp::new(pdsp.dim, Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut circles = 0usize;

    // first instruction: p2 on the reference line
    let c01 = pdsp.find_constraint(0, 1).ok_or(err("p1 and p2 are not constrained"))?;
    let site = Site::new(ObjRef::Point(0), ParamRef::Model(pdsp.constraints[c01].param));
    instructions.push(match pdsp.dim {
        Dim::Two => Instruction::InterCL { out: 1, site },
        Dim::Three => Instruction::InterSL { out: 1, site },
    });
    consumed.push(c01);
    built[1] = true;

    // 3D: p3 in the reference plane
    if pdsp.dim == Dim::Three {
        let c02 = pdsp.find_constraint(0, 2).ok_or(err("p1 and p3 are not constrained"))?;
        let c12 = pdsp.find_constraint(1, 2).ok_or(err("p2 and p3 are not constrained"))?;
        instructions.push(Instruction::InterSSP {
            out: 2,
            first: Site::new(ObjRef::Point(0), ParamRef::Model(pdsp.constraints[c02].param)),
            second: Site::new(ObjRef::Point(1), ParamRef::Model(pdsp.constraints[c12].param)),
        });
        consumed.extend([c02, c12]);
        built[2] = true;
    }

    while built.iter().any(|b| !b) {
        // candidate with the most constructed neighbors, lowest index first
        let mut pick: Option<(PointId, Vec<ConstraintId>)> = None;
        for p in 0..n {
            if built[p] {
                continue;
            }
            let supports: Vec<ConstraintId> = pdsp
                .constraints_of(p)
                .filter(|(cid, c)| !consumed.contains(cid) && built[c.other(p).unwrap()])
                .map(|(cid, _)| cid)
                .collect();
            if pick.as_ref().map_or(true, |(_, s)| supports.len() > s.len()) {
                pick = Some((p, supports));
            }
        }
        let (p, mut supports) = pick.ok_or(err("no candidate point"))?;
        supports.truncate(needed);
        if supports.len() + 1 < needed {
            return Err(err(&format!(
                "point {} has {} supports; plans with more than one driving parameter per instruction are not derived",
                pdsp.points[p],
                supports.len()
            )));
        }

        let site_of = |cid: ConstraintId| {
            let c = &pdsp.constraints[cid];
            Site::new(ObjRef::Point(c.other(p).unwrap()), ParamRef::Model(c.param))
        };
        let support_pts: Vec<PointId> =
            supports.iter().map(|&cid| pdsp.constraints[cid].other(p).unwrap()).collect();

        let fresh_pair = if supports.len() < needed {
            // complete with a fresh reference point and driving parameter
            let mut exclude = support_pts.clone();
            exclude.push(p);
            let donor = match pdsp.dim {
                Dim::Two => best_donor(pdsp, &exclude, |q| {
                    gamma_cc(sketch.0[p], sketch.0[support_pts[0]], sketch.0[q]).ok()
                }),
                Dim::Three => best_donor(pdsp, &exclude, |q| {
                    let c1 = sketch.0[support_pts[0]];
                    let c2 = sketch.0[support_pts[1]];
                    let center = project_point_line(sketch.0[p], c1, c2).ok()?;
                    let axis = c2 - c1;
                    let circle = CircleRef {
                        center,
                        radius: (sketch.0[p] - center).norm(),
                        normal: axis / axis.norm(),
                    };
                    gamma_cs(sketch.0[p], &circle, sketch.0[q]).ok()
                }),
            }
            .ok_or(err(&format!("no usable reference position for {}", pdsp.points[p])))?;
            let c = rcp.fresh_counter_peek();
            let rid = rcp.alloc_ref(format!("{}'{c}", pdsp.points[donor]), sketch.0[donor]);
            let k = (sketch.0[p] - sketch.0[donor]).norm();
            let did = rcp.alloc_driving(format!("k{c}"), k);
            Some(Site::new(ObjRef::Ref(rid), ParamRef::Driving(did)))
        } else {
            None
        };

        match pdsp.dim {
            Dim::Two => {
                let first = site_of(supports[0]);
                let second = fresh_pair.unwrap_or_else(|| site_of(supports[1]));
                instructions.push(Instruction::InterCC { out: p, first, second });
            }
            Dim::Three => {
                let first = site_of(supports[0]);
                let second = site_of(supports[1]);
                let third = fresh_pair.unwrap_or_else(|| site_of(supports[2]));
                let (ss, cs) = super::decompose_sss(p, circles, first, second, third);
                circles += 1;
                instructions.push(ss);
                instructions.push(cs);
            }
        }
        consumed.extend(&supports);
        built[p] = true;
    }

    let removed: Vec<ConstraintId> =
        (0..pdsp.constraints.len()).filter(|c| !consumed.contains(c)).collect();
    let out = Rcp::new(pdsp.dim, instructions, removed, rcp.driving, rcp.reference);
    validate_rcp(&out, pdsp)?;
    Ok(out)
}
