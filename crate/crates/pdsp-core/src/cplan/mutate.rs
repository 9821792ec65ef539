//! On-the-fly mutation of a plan: shifting reference points away from
//! boundary configurations, swapping instructions against fresh driving
//! parameters, restoring originals, and the stopping predicate that guards
//! the positivity of kept radii.

use super::evaluate::{gamma_of_instruction, reconstruct_circle};
use super::{Instruction, ObjRef, ParamRef, PlanError, Rcp, Site};
use crate::geometry::{left_normal_in_plane, project_point_line, CircleRef, Point};
use crate::model::{Figure, Pdsp};
use nalgebra::Vector3;

/// What a single mutation did to instruction `instr`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangeKind {
    /// A fresh reference point and driving parameter replaced a model pair.
    Swap,
    /// An existing reference point was moved (values only).
    MovePoint,
    /// The original instruction was restored.
    Restore,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChangeAction {
    pub instr: usize,
    pub kind: ChangeKind,
}

/// New placement for the second center of a two-circle style instruction:
/// at distance `a_kept` from the constructed point, toward its projection on
/// the old center line. When the point already sits on that line the
/// perpendicular within the carrying plane is used. Returns the new center
/// and the new driving value (`a_kept`).
pub fn shift_reference(
    p_new: Point,
    c1: Point,
    a_kept: f64,
    c2_old: Point,
    plane_normal: Point,
) -> Result<(Point, f64), PlanError> {
    if a_kept <= 0.0 {
        return Err(PlanError::ZeroRadius { instruction: usize::MAX });
    }
    let foot = project_point_line(p_new, c1, c2_old)
        .map_err(|_| PlanError::DegenerateGamma { instruction: usize::MAX })?;
    let v = foot - p_new;
    let vn = v.norm();
    let dir = if vn > 1e-12 * a_kept {
        v / vn
    } else {
        let line = c2_old - c1;
        left_normal_in_plane(line / line.norm(), plane_normal)
    };
    Ok((p_new + a_kept * dir, a_kept))
}

/// Shift for a circle-sphere instruction: the fresh sphere center is placed
/// in the circle plane at distance `m = max(circle radius, old radius)` from
/// the constructed point, toward its projection on the in-plane axis through
/// the circle center and the projected old sphere center.
///
/// The boundary measure of a circle-sphere step never exceeds the ratio of
/// the circle radius to the placement distance, so when the old radius
/// dwarfs the circle that placement cannot clear `alpha`; the distance then
/// falls back to the circle radius itself, which guarantees a measure of at
/// least `sqrt(1/2)`.
pub fn shift_reference_cs(
    p_new: Point,
    circle: &CircleRef,
    s_center_old: Point,
    a_old: f64,
    alpha: f64,
) -> Result<(Point, f64), PlanError> {
    let m = circle.radius.max(a_old);
    if m <= 0.0 {
        return Err(PlanError::ZeroRadius { instruction: usize::MAX });
    }
    let proj = s_center_old - (s_center_old - circle.center).dot(&circle.normal) * circle.normal;
    let axis = proj - circle.center;
    if axis.norm() <= 1e-12 * m {
        return Err(PlanError::DegenerateGamma { instruction: usize::MAX });
    }
    let foot = project_point_line(p_new, circle.center, proj)
        .map_err(|_| PlanError::DegenerateGamma { instruction: usize::MAX })?;
    let v = foot - p_new;
    let vn = v.norm();
    let dir = if vn > 1e-12 * m {
        v / vn
    } else {
        left_normal_in_plane(axis / axis.norm(), circle.normal)
    };
    let place = |dist: f64| (p_new + dist * dir, dist);
    let (pos, value) = place(m);
    let escaped = crate::geometry::gamma_cs(p_new, circle, pos).map(|g| g > alpha).unwrap_or(false);
    if escaped || m <= circle.radius {
        Ok((pos, value))
    } else {
        Ok(place(circle.radius))
    }
}

/// Exchange instruction `i` against `new_instr`, maintaining the plan
/// quadruplet: introducing a driving pair removes the displaced constraint
/// into `C-` and records the original in the table; reinstating a model pair
/// consumes the constraint back and clears the table entry.
pub fn swap_instruction(rcp: &mut Rcp, pdsp: &Pdsp, i: usize, new_instr: Instruction) -> Result<(), PlanError> {
    let bad = |msg: String| Err(PlanError::InvariantViolation(msg));
    if i == 0 {
        return bad("the first instruction of the plan is never changed".into());
    }
    let cur = rcp.instructions[i].clone();
    if cur.out_point() != new_instr.out_point()
        || cur.out_circle() != new_instr.out_circle()
        || std::mem::discriminant(&cur) != std::mem::discriminant(&new_instr)
    {
        return bad(format!("instruction {i} replacement changes kind or output"));
    }
    match (cur.first_site(), new_instr.first_site()) {
        (Some(a), Some(b)) if a != b => {
            return bad(format!("instruction {i} replacement changes the kept pair"))
        }
        _ => {}
    }
    let (Some(cur_second), Some(new_second)) = (cur.second_site(), new_instr.second_site()) else {
        return bad(format!("instruction {i} has no swappable pair"));
    };
    let cur_second = *cur_second;
    let new_second = *new_second;

    if new_second.is_driving() && cur_second.is_original() {
        // introduce: displace the constraint of the current pair
        let cid = rcp
            .site_constraint(pdsp, i, &cur_second)
            .ok_or(PlanError::InvariantViolation(format!(
                "instruction {i} pair matches no constraint"
            )))?;
        if rcp.removed.contains(&cid) {
            return bad(format!("constraint {cid} already removed"));
        }
        let (ObjRef::Ref(r), ParamRef::Driving(d)) = (new_second.center, new_second.radius) else {
            unreachable!()
        };
        if rcp.ref_point(r).is_none() || rcp.driving_index(d).is_none() {
            return bad(format!("instruction {i} swap uses unregistered fresh objects"));
        }
        if rcp.table[i].is_some() {
            return bad(format!("instruction {i} swapped while already modified"));
        }
        rcp.removed.push(cid);
        rcp.removed.sort_unstable();
        rcp.table[i] = Some(cur);
        rcp.instructions[i] = new_instr;
    } else if new_second.is_original() && cur_second.is_driving() {
        // restore: reinstate the displaced constraint, drop the fresh pair
        let cid = rcp
            .site_constraint(pdsp, i, &new_second)
            .ok_or(PlanError::InvariantViolation(format!(
                "instruction {i} restored pair matches no constraint"
            )))?;
        let Some(pos) = rcp.removed.iter().position(|c| *c == cid) else {
            return bad(format!("constraint {cid} is not removed"));
        };
        let (ObjRef::Ref(r), ParamRef::Driving(d)) = (cur_second.center, cur_second.radius) else {
            unreachable!()
        };
        rcp.removed.remove(pos);
        rcp.reference.retain(|e| e.id != r);
        rcp.driving.retain(|e| e.id != d);
        rcp.table[i] = None;
        rcp.instructions[i] = new_instr;
    } else {
        return bad(format!("instruction {i} swap is neither introduce nor restore"));
    }
    debug_assert_eq!(rcp.removed.len(), rcp.driving.len());
    Ok(())
}

/// Stopping condition over the table of original instructions: satisfied as
/// soon as, for some swapped instruction, the interpolated value of the
/// displaced original parameter exceeds the kept one.
pub fn check_sc1(rcp: &Rcp, model_vals: &[f64]) -> bool {
    for (i, t) in rcp.table.iter().enumerate() {
        let Some(orig) = t else { continue };
        if !orig.swappable() {
            continue; // circle-sphere swaps have no interpolated kept radius
        }
        let (Some(first), Some(second)) = (orig.first_site(), orig.second_site()) else {
            continue;
        };
        let (ParamRef::Model(kept), ParamRef::Model(removed)) = (first.radius, second.radius)
        else {
            continue;
        };
        let _ = i;
        if model_vals[removed] > model_vals[kept] {
            return true;
        }
    }
    false
}

/// Overwrite the stored driving values with the exact measurements on a
/// figure.
pub fn sync_driving(rcp: &mut Rcp, fig: &Figure) {
    let (vals, _) = super::phi_prime(rcp, fig, 0.0);
    for (entry, v) in rcp.driving.iter_mut().zip(vals) {
        entry.value = v;
    }
}

fn fresh_names(rcp: &Rcp, pdsp: &Pdsp, displaced: ObjRef) -> (String, String) {
    let base = match displaced {
        ObjRef::Point(p) => pdsp.points[p].clone(),
        ObjRef::Ref(r) => rcp.ref_point(r).map(|e| e.name.clone()).unwrap_or_default(),
    };
    let c = rcp.fresh_counter_peek();
    (format!("{base}'{c}"), format!("k{c}"))
}

/// The carrying plane normal used for the degenerate (point on line) shift
/// direction.
fn shift_plane_normal(instr: &Instruction, line_dir: Point) -> Point {
    match instr {
        Instruction::InterCC { .. } | Instruction::InterSSP { .. } => Vector3::z(),
        _ => {
            if line_dir.z.abs() < 0.9 * line_dir.norm() {
                Vector3::z()
            } else {
                Vector3::x()
            }
        }
    }
}

/// Apply the shift to the (already driving) second pair of instruction `i`,
/// storing the new reference position and driving value.
fn move_reference(rcp: &mut Rcp, fig: &Figure, i: usize, alpha: f64) -> Result<(), PlanError> {
    let instr = rcp.instructions[i].clone();
    let second = *instr.second_site().expect("move on a pairless instruction");
    let (ObjRef::Ref(rid), ParamRef::Driving(did)) = (second.center, second.radius) else {
        return Err(PlanError::InvariantViolation(format!(
            "instruction {i} move without a driving pair"
        )));
    };
    let out = rcp.final_point_of(i).expect("driving instruction without a point");
    let p_new = fig.0[out];
    let old_center = rcp.ref_pos(rid);
    let driving_idx = rcp.driving_index(did).unwrap();
    let old_value = rcp.driving[driving_idx].value;

    let (pos, value) = match &instr {
        Instruction::InterCS { .. } => {
            let circle = reconstruct_circle(rcp, fig, i)?;
            shift_reference_cs(p_new, &circle, old_center, old_value, alpha)
        }
        _ => {
            let first = instr.first_site().expect("two-circle instruction");
            let c1 = rcp.center_value(first.center, fig);
            let a_kept = (p_new - c1).norm();
            let nrm = shift_plane_normal(&instr, old_center - c1);
            shift_reference(p_new, c1, a_kept, old_center, nrm)
        }
    }
    .map_err(|e| match e {
        PlanError::ZeroRadius { .. } => PlanError::ZeroRadius { instruction: i },
        PlanError::DegenerateGamma { .. } => PlanError::DegenerateGamma { instruction: i },
        other => other,
    })?;

    rcp.reference.iter_mut().find(|e| e.id == rid).unwrap().pos = pos;
    rcp.driving[driving_idx].value = value;
    Ok(())
}

/// Boundary distance instruction `i` would have if its second pair were
/// `candidate` (used to decide restoration).
fn gamma_with_second(
    rcp: &Rcp,
    fig: &Figure,
    i: usize,
    candidate: &Site,
) -> Result<f64, PlanError> {
    let mut probe = rcp.clone();
    if let Some(s) = probe.instructions[i].second_site_mut() {
        *s = *candidate;
    }
    gamma_of_instruction(&probe, fig, i)?
        .ok_or(PlanError::InvariantViolation(format!("instruction {i} has no gamma")))
}

/// Change the plan in place so that the figure's boundary distance exceeds
/// `alpha` and the stopping condition is cleared, while the figure itself is
/// unchanged. `model_vals` are the interpolated parameter values at the
/// current homotopy time.
pub fn change_rcp(
    rcp: &mut Rcp,
    pdsp: &Pdsp,
    fig: &Figure,
    model_vals: &[f64],
    alpha: f64,
    events: &mut Vec<ChangeAction>,
) -> Result<(), PlanError> {
    sync_driving(rcp, fig);
    let l = rcp.instructions.len();
    for i in 1..l {
        // an instruction may be reprocessed once after a restoration
        // exchanged the roles of its parameters
        loop {
            let Some(gamma) = gamma_of_instruction(rcp, fig, i)? else { break };
            match rcp.table[i].clone() {
                None => {
                    if gamma > alpha {
                        break;
                    }
                    let instr = rcp.instructions[i].clone();
                    let second = *instr.second_site().expect("gamma without a pair");
                    if second.is_driving() {
                        move_reference(rcp, fig, i, alpha)?;
                        events.push(ChangeAction { instr: i, kind: ChangeKind::MovePoint });
                        break;
                    }
                    // keep the larger radius on the first pair
                    if instr.swappable() {
                        let (Some(f), Some(s)) = (instr.first_site(), instr.second_site()) else {
                            unreachable!()
                        };
                        if let (ParamRef::Model(a2), ParamRef::Model(a4)) = (f.radius, s.radius) {
                            if model_vals[a2] < model_vals[a4] {
                                rcp.instructions[i].arg_swap();
                            }
                        }
                    }
                    let instr = rcp.instructions[i].clone();
                    let second = *instr.second_site().unwrap();
                    let (ObjRef::Point(q), ParamRef::Model(a)) = (second.center, second.radius)
                    else {
                        return Err(PlanError::InvariantViolation(format!(
                            "instruction {i} has no displaceable pair"
                        )));
                    };
                    let (ref_name, drv_name) = fresh_names(rcp, pdsp, ObjRef::Point(q));
                    let rid = rcp.alloc_ref(ref_name, fig.0[q]);
                    let did = rcp.alloc_driving(drv_name, model_vals[a]);
                    let mut new_instr = instr.clone();
                    *new_instr.second_site_mut().unwrap() =
                        Site::new(ObjRef::Ref(rid), ParamRef::Driving(did));
                    swap_instruction(rcp, pdsp, i, new_instr)?;
                    move_reference(rcp, fig, i, alpha)?;
                    events.push(ChangeAction { instr: i, kind: ChangeKind::Swap });
                    break;
                }
                Some(orig) => {
                    let orig_second = *orig.second_site().expect("table entry without a pair");
                    let gamma_orig = gamma_with_second(rcp, fig, i, &orig_second)?;
                    if gamma_orig > alpha {
                        swap_instruction(rcp, pdsp, i, orig)?;
                        events.push(ChangeAction { instr: i, kind: ChangeKind::Restore });
                        break;
                    }
                    // displaced original parameter overtaking the kept one
                    let overtaken = if orig.swappable() {
                        match (orig.first_site().unwrap().radius, orig_second.radius) {
                            (ParamRef::Model(kept), ParamRef::Model(removed)) => {
                                model_vals[kept] < model_vals[removed]
                            }
                            _ => false,
                        }
                    } else {
                        false
                    };
                    if overtaken {
                        swap_instruction(rcp, pdsp, i, orig)?;
                        events.push(ChangeAction { instr: i, kind: ChangeKind::Restore });
                        continue; // reprocess with exchanged roles
                    }
                    if gamma <= alpha {
                        move_reference(rcp, fig, i, alpha)?;
                        events.push(ChangeAction { instr: i, kind: ChangeKind::MovePoint });
                    }
                    break;
                }
            }
        }
    }

    sync_driving(rcp, fig);
    let g = super::gamma_plan(rcp, fig)?;
    if g <= alpha {
        return Err(PlanError::CannotEscape { gamma: g });
    }
    debug_assert!(!check_sc1(rcp, model_vals));
    Ok(())
}
