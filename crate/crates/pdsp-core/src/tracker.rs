//! Predictor-corrector tracking of the homotopy path through the sketch:
//! Euler prediction along the tangent, Newton correction orthogonal to it,
//! adaptive step size, hyperplane-crossing refinement, and the main loop
//! that mutates the plan whenever the figure comes too close to a boundary
//! configuration or the stopping condition fires.

use crate::cplan::{
    change_rcp, check_sc1, gamma_plan, identify_branch, phi_prime, sync_driving, validate_rcp,
    ChangeAction, ParamEnv, PlanError, Rcp,
};
use crate::homotopy::{
    check_assumptions, eval_h, jacobian_fd, positive_support, Interpolation, ReducedHomotopy,
};
use crate::model::{residual_vector, Figure, Pdsp, XLayout};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone)]
pub struct TrackerConfig {
    /// Boundary-distance threshold triggering a plan change; in (0, 1/2).
    pub alpha: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    /// Corrector tolerance on the residual, infinity norm.
    pub eps_newton: f64,
    pub max_newton: usize,
    pub max_iterations: u64,
    /// Relative finite-difference step.
    pub fd_step: f64,
    /// Smallest admissible cosine between consecutive unit tangents; a
    /// sharper turn rejects the step and halves the prediction, which keeps
    /// the corrector from sliding onto a neighboring sheet at hairpins.
    pub min_tangent_cos: f64,
    /// Sketch-return tolerance, relative to the figure diameter.
    pub loop_tol_rel: f64,
    /// Branch-identification tolerance, relative to the figure diameter.
    pub identify_tol_rel: f64,
    /// Solution deduplication tolerance, relative to max(1, diameter).
    pub dedup_tol: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            alpha: 0.1,
            delta_min: 1e-10,
            delta_max: 0.05,
            eps_newton: 1e-10,
            max_newton: 20,
            max_iterations: 1_000_000,
            fd_step: 1e-7,
            min_tangent_cos: 0.5,
            loop_tol_rel: 1e-6,
            identify_tol_rel: 1e-6,
            dedup_tol: 1e-6,
        }
    }
}

impl TrackerConfig {
    /// Defaults for tracking in the driving-parameter space.
    pub fn reduced() -> Self {
        TrackerConfig { delta_max: 0.05, ..Default::default() }
    }

    /// Defaults for tracking in the full coordinate space.
    pub fn full_space() -> Self {
        TrackerConfig { delta_max: 0.1, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackError {
    #[error("step size underflow at t = {t:.6} (delta = {delta:.3e})")]
    Stuck { t: f64, delta: f64 },
    #[error("singular tangent at t = {t:.6}: the path Jacobian lost rank")]
    SingularTangent { t: f64 },
    #[error("iteration budget exceeded")]
    IterationBudgetExceeded,
    #[error("hyperplane refinement diverged near t = {t:.6}")]
    RefinementDiverged { t: f64 },
    #[error("orientation transfer produced a null direction")]
    ZeroImage,
    #[error("assumption check failed: {0}")]
    Assumptions(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// A system of `k` equations in `k + 1` unknowns whose solution set is
/// tracked; the last unknown is the homotopy time `t`.
pub trait PathSystem {
    fn equations(&self) -> usize;
    fn eval(&self, y: &DVector<f64>) -> Result<DVector<f64>, PlanError>;
    fn jacobian(&self, y: &DVector<f64>) -> Result<DMatrix<f64>, PlanError>;
}

/// The reduced homotopy as a tracked system.
pub struct ReducedSystem<'a> {
    pub rh: ReducedHomotopy<'a>,
    pub fd_step: f64,
}

impl PathSystem for ReducedSystem<'_> {
    fn equations(&self) -> usize {
        self.rh.d()
    }

    fn eval(&self, y: &DVector<f64>) -> Result<DVector<f64>, PlanError> {
        self.rh.eval(y)
    }

    fn jacobian(&self, y: &DVector<f64>) -> Result<DMatrix<f64>, PlanError> {
        Ok(self.rh.jacobian_optimized(y, self.fd_step)?.0)
    }
}

/// The full-space homotopy as a tracked system.
pub struct FullSystem<'a> {
    pub pdsp: &'a Pdsp,
    pub interp: &'a Interpolation,
    pub layout: XLayout,
    pub fd_step: f64,
}

impl PathSystem for FullSystem<'_> {
    fn equations(&self) -> usize {
        self.layout.m()
    }

    fn eval(&self, y: &DVector<f64>) -> Result<DVector<f64>, PlanError> {
        let m = self.layout.m();
        let x = DVector::from_column_slice(&y.as_slice()[..m]);
        Ok(eval_h(self.pdsp, self.interp, &self.layout, &x, y[m]))
    }

    fn jacobian(&self, y: &DVector<f64>) -> Result<DMatrix<f64>, PlanError> {
        jacobian_fd(|p| self.eval(p), y, self.fd_step)
    }
}

/// Unit kernel vector of a `k x (k+1)` path Jacobian, oriented along
/// `prev` when given. Fails when the Jacobian itself is rank-deficient.
pub fn tangent(j: &DMatrix<f64>, prev: Option<&DVector<f64>>) -> Result<DVector<f64>, TrackError> {
    let k = j.nrows();
    debug_assert_eq!(j.ncols(), k + 1);
    // embed in a square matrix: its kernel is the kernel of j
    let mut a = DMatrix::zeros(k + 1, k + 1);
    a.view_mut((0, 0), (k, k + 1)).copy_from(j);
    let svd = a.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("svd with v requested");
    let sv = &svd.singular_values;
    let mut idx: Vec<usize> = (0..k + 1).collect();
    idx.sort_by(|&p, &q| sv[p].total_cmp(&sv[q]));
    let smax = sv[idx[k]];
    if k > 0 && sv[idx[1]] <= 1e-10 * smax.max(f64::MIN_POSITIVE) {
        return Err(TrackError::SingularTangent { t: f64::NAN });
    }
    let mut v: DVector<f64> = v_t.row(idx[0]).transpose();
    v /= v.norm();
    let flip = match prev {
        Some(p) => v.dot(p) < 0.0,
        None => {
            let vt = v[k];
            vt.abs() > 1e-14 && vt < 0.0
        }
    };
    if flip {
        v = -v;
    }
    Ok(v)
}

/// Newton iteration on `sys` restricted to the affine hyperplane described
/// by `normal` and `offset` (`normal . delta = offset` on the first step,
/// then 0). Returns the corrected point or `None`.
fn newton_constrained<S: PathSystem>(
    sys: &S,
    start: &DVector<f64>,
    normal: &DVector<f64>,
    mut offset: f64,
    eps: f64,
    max_iter: usize,
    move_cap: f64,
    exact_offset: bool,
) -> Option<DVector<f64>> {
    let k = sys.equations();
    let mut y = start.clone();
    let mut moved = 0.0;
    for _ in 0..max_iter {
        let r = sys.eval(&y).ok()?;
        let on_plane = !exact_offset || offset.abs() <= 1e-12;
        if r.amax() <= eps && on_plane {
            return Some(y);
        }
        let j = sys.jacobian(&y).ok()?;
        let mut a = DMatrix::zeros(k + 1, k + 1);
        a.view_mut((0, 0), (k, k + 1)).copy_from(&j);
        a.row_mut(k).copy_from(&normal.transpose());
        let mut rhs = DVector::zeros(k + 1);
        for i in 0..k {
            rhs[i] = -r[i];
        }
        rhs[k] = offset;
        let lu = a.lu();
        let delta = lu.solve(&rhs)?;
        if !delta.iter().all(|v| v.is_finite()) {
            return None;
        }
        moved += delta.norm();
        if moved > move_cap {
            return None;
        }
        y += &delta;
        if exact_offset {
            offset = 0.0;
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    /// A point was accepted; the previous point is kept for crossing checks.
    Accepted,
    /// The corrector failed and the step was halved.
    Reduced,
}

/// One predictor-corrector unit driving a path system.
pub struct Tracker<'s, S: PathSystem> {
    pub sys: &'s S,
    pub cfg: &'s TrackerConfig,
    pub y: DVector<f64>,
    pub orientation: DVector<f64>,
    pub delta: f64,
    pub smallest_delta: f64,
}

impl<'s, S: PathSystem> Tracker<'s, S> {
    /// Start a tracker at `y`; the first orientation is the kernel vector
    /// with positive `t` component.
    pub fn new(sys: &'s S, cfg: &'s TrackerConfig, y: DVector<f64>) -> Result<Self, TrackError> {
        let j = sys.jacobian(&y).map_err(TrackError::Plan)?;
        let v = tangent(&j, None).map_err(|_| TrackError::SingularTangent { t: y[sys.equations()] })?;
        Ok(Tracker {
            sys,
            cfg,
            y,
            orientation: v,
            delta: cfg.delta_max,
            smallest_delta: cfg.delta_max,
        })
    }

    pub fn with_state(
        sys: &'s S,
        cfg: &'s TrackerConfig,
        y: DVector<f64>,
        orientation: DVector<f64>,
        delta: f64,
    ) -> Self {
        Tracker { sys, cfg, y, orientation, delta, smallest_delta: delta }
    }

    pub fn t(&self) -> f64 {
        self.y[self.sys.equations()]
    }

    /// Euler prediction, orthogonal Newton correction, and the doubling /
    /// halving step policy.
    pub fn step(&mut self) -> Result<(StepOutcome, DVector<f64>), TrackError> {
        let predicted = &self.y + self.delta * &self.orientation;
        let cap = (4.0 * self.delta).max(1e-8);
        let corrected = newton_constrained(
            self.sys,
            &predicted,
            &self.orientation,
            0.0,
            self.cfg.eps_newton,
            self.cfg.max_newton,
            cap,
            false,
        );
        match corrected {
            Some(y_new) => {
                let j = self.sys.jacobian(&y_new).map_err(TrackError::Plan)?;
                let v = tangent(&j, Some(&self.orientation)).map_err(|_| {
                    TrackError::SingularTangent { t: y_new[self.sys.equations()] }
                })?;
                // a sharp turn between consecutive tangents means the
                // corrector slid around (or across) a fold: resolve it with
                // a smaller step instead of accepting
                if v.dot(&self.orientation) < self.cfg.min_tangent_cos {
                    if std::env::var("PDSP_DBG_STEP").is_ok() && self.delta < 1e-7 {
                        eprintln!("ANGLE-REJECT t {:.6} delta {:.2e} cos {:.4}", self.t(), self.delta, v.dot(&self.orientation));
                    }
                    return if self.delta >= 2.0 * self.cfg.delta_min {
                        self.delta /= 2.0;
                        self.smallest_delta = self.smallest_delta.min(self.delta);
                        Ok((StepOutcome::Reduced, self.y.clone()))
                    } else {
                        Err(TrackError::Stuck { t: self.t(), delta: self.delta })
                    };
                }
                let prev = std::mem::replace(&mut self.y, y_new);
                self.orientation = v;
                if 2.0 * self.delta <= self.cfg.delta_max {
                    self.delta *= 2.0;
                }
                Ok((StepOutcome::Accepted, prev))
            }
            None => {
                if std::env::var("PDSP_DBG_STEP").is_ok() && self.delta < 1e-7 {
                    let rp = self.sys.eval(&predicted).map(|r| r.amax());
                    let rc = self.sys.eval(&self.y).map(|r| r.amax());
                    eprintln!("CORRECT-FAIL t {:.6} delta {:.2e} res_pred {rp:?} res_cur {rc:?}", self.t(), self.delta);
                }
                if self.delta >= 2.0 * self.cfg.delta_min {
                    self.delta /= 2.0;
                    self.smallest_delta = self.smallest_delta.min(self.delta);
                    Ok((StepOutcome::Reduced, self.y.clone()))
                } else {
                    Err(TrackError::Stuck { t: self.t(), delta: self.delta })
                }
            }
        }
    }

    /// Newton-refine a point near the hyperplane `t = target` onto it.
    pub fn refine_to_hyperplane(
        &self,
        from: &DVector<f64>,
        target: f64,
    ) -> Result<DVector<f64>, TrackError> {
        let k = self.sys.equations();
        let mut normal = DVector::zeros(k + 1);
        normal[k] = 1.0;
        let offset = target - from[k];
        let cap = 10.0 * (offset.abs() + self.delta) + 1e-6;
        newton_constrained(
            self.sys,
            from,
            &normal,
            offset,
            self.cfg.eps_newton,
            2 * self.cfg.max_newton,
            cap,
            true,
        )
        .ok_or(TrackError::RefinementDiverged { t: from[k] })
    }
}

/// Whether the segment from `prev_t` to `new_t` reaches or crosses
/// `target`. Departing exactly from the hyperplane does not count.
pub fn crossed(prev_t: f64, new_t: f64, target: f64) -> bool {
    if prev_t == target {
        return false;
    }
    (prev_t - target) * (new_t - target) < 0.0 || new_t == target
}

/// Refined hyperplane point for a detected crossing, starting from the
/// closer bracket end; `None` when the segment does not cross.
pub fn detect_crossing<S: PathSystem>(
    tracker: &Tracker<S>,
    prev: &DVector<f64>,
    new: &DVector<f64>,
    target: f64,
) -> Result<Option<DVector<f64>>, TrackError> {
    let k = tracker.sys.equations();
    if !crossed(prev[k], new[k], target) {
        return Ok(None);
    }
    let from = if (prev[k] - target).abs() < (new[k] - target).abs() { prev } else { new };
    tracker.refine_to_hyperplane(from, target).map(Some)
}

/// Map an orientation across a change of parameterization: the old tangent
/// is pushed through "evaluate under the old plan, then measure the new
/// driving parameters" by a finite difference, and renormalized.
pub fn transfer_orientation(
    pdsp: &Pdsp,
    old_rh: &ReducedHomotopy,
    new_rcp: &Rcp,
    y_old: &DVector<f64>,
    v_old: &DVector<f64>,
    y_new: &DVector<f64>,
) -> Result<DVector<f64>, TrackError> {
    let _ = pdsp;
    let d_old = old_rh.d();
    let eps = 1e-6 * y_old.amax().max(1.0);
    for dir in [1.0, -1.0] {
        let probe = y_old + dir * eps * v_old;
        let out = match old_rh.eval_figure(&probe) {
            Ok(out) => out,
            Err(_) => continue,
        };
        let (vals, tp) = phi_prime(new_rcp, &out.figure, probe[d_old]);
        let mut w = DVector::zeros(vals.len() + 1);
        for (i, v) in vals.iter().enumerate() {
            w[i] = *v;
        }
        w[vals.len()] = tp;
        let diff = (w - y_new) * (dir / eps);
        let n = diff.norm();
        if n <= 1e-12 {
            return Err(TrackError::ZeroImage);
        }
        return Ok(diff / n);
    }
    Err(TrackError::ZeroImage)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangeReason {
    Gamma,
    Sc1,
}

/// One plan-change event, with the invariants measured right after it.
#[derive(Debug, Clone)]
pub struct ChangeEvent {
    pub t: f64,
    pub reason: ChangeReason,
    pub actions: Vec<ChangeAction>,
    pub d_before: usize,
    pub d_after: usize,
    pub gamma_after: f64,
    pub sc1_after: bool,
    pub plan_valid_after: bool,
    /// How far the re-identified figure sits from the figure at the change.
    pub figure_deviation: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub iter: u64,
    pub t: f64,
    pub delta: f64,
    pub gamma: f64,
    pub d: usize,
}

/// Result of one tracked loop.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub solutions: Vec<Figure>,
    /// Infinity norm of the full residual at the target values, per solution.
    pub residuals: Vec<f64>,
    pub iterations: u64,
    pub smallest_delta: f64,
    pub events: Vec<ChangeEvent>,
    pub trace: Vec<TraceRow>,
    pub duplicates: u64,
    /// Figure-space distance to the sketch at loop closure.
    pub closure_error: f64,
}

impl RunOutcome {
    pub fn rcp_change_count(&self) -> usize {
        self.events.len()
    }

    pub fn average_d(&self) -> f64 {
        if self.trace.is_empty() {
            return 0.0;
        }
        self.trace.iter().map(|r| r.d as f64).sum::<f64>() / self.trace.len() as f64
    }

    pub fn max_d(&self) -> usize {
        self.trace.iter().map(|r| r.d).max().unwrap_or(0)
    }
}

fn push_solution(
    solutions: &mut Vec<Figure>,
    residuals: &mut Vec<f64>,
    duplicates: &mut u64,
    fig: Figure,
    res: f64,
    tol: f64,
) {
    if solutions.iter().any(|s| s.max_deviation(&fig) <= tol) {
        *duplicates += 1;
        return;
    }
    solutions.push(fig);
    residuals.push(res);
}

fn verify_start(
    pdsp: &Pdsp,
    sketch: &Figure,
    interp: &Interpolation,
) -> Result<(), TrackError> {
    let r = residual_vector(pdsp, sketch, &interp.params_at(0.0))
        .map_err(|e| TrackError::Assumptions(e.to_string()))?;
    let tol = 1e-9 * sketch.diameter().max(1.0);
    if r.amax() > tol {
        return Err(TrackError::Assumptions(format!(
            "sketch does not satisfy the system at t = 0 (residual {:.3e})",
            r.amax()
        )));
    }
    Ok(())
}

/// Track the homotopy path through the sketch in the driving-parameter
/// space of `rcp`, changing the plan on the fly, until the loop closes on
/// the sketch. Returns every solution encountered at `t = 1`.
pub fn solve(
    pdsp: &Pdsp,
    rcp_in: &Rcp,
    sketch: &Figure,
    interp: &Interpolation,
    cfg: &TrackerConfig,
) -> Result<RunOutcome, TrackError> {
    verify_start(pdsp, sketch, interp)?;
    validate_rcp(rcp_in, pdsp)?;
    let report = check_assumptions(pdsp, rcp_in, interp);
    if !report.all_ok() {
        return Err(TrackError::Assumptions(format!("{report:?}")));
    }

    let diam = sketch.diameter().max(1e-12);
    let tau_id = cfg.identify_tol_rel * diam;
    let eps_loop = cfg.loop_tol_rel * diam;
    let dedup = cfg.dedup_tol * diam.max(1.0);

    let mut rcp = rcp_in.clone();
    let mut fig = sketch.clone();
    sync_driving(&mut rcp, &fig);

    let mut events: Vec<ChangeEvent> = Vec::new();
    let mut trace: Vec<TraceRow> = Vec::new();
    let mut solutions: Vec<Figure> = Vec::new();
    let mut residuals: Vec<f64> = Vec::new();
    let mut duplicates = 0u64;

    // apply a change immediately if the sketch itself is near a boundary
    {
        let model0 = interp.values_at(0.0);
        let g = gamma_plan(&rcp, &fig)?;
        let sc = check_sc1(&rcp, &model0);
        if g <= cfg.alpha || sc {
            let reason = if g <= cfg.alpha { ChangeReason::Gamma } else { ChangeReason::Sc1 };
            apply_change(pdsp, &mut rcp, &fig, interp, 0.0, cfg, reason, tau_id, &mut events)?;
        }
    }

    let mut branch = {
        let model0 = interp.values_at(0.0);
        let (vals, _) = phi_prime(&rcp, &fig, 0.0);
        let env = ParamEnv { model: &model0, driving: &vals };
        identify_branch(&rcp, pdsp, &env, &fig, tau_id)?.0
    };

    let (vals, _) = phi_prime(&rcp, &fig, 0.0);
    let mut y = DVector::zeros(rcp.d() + 1);
    for (i, v) in vals.iter().enumerate() {
        y[i] = *v;
    }

    let mut orientation: Option<DVector<f64>> = None;
    let mut delta = cfg.delta_max;
    let mut smallest_delta = delta;
    let mut iter: u64 = 0;

    loop {
        // one tracking segment under a frozen plan
        let rcp_frozen = rcp.clone();
        let rh = ReducedHomotopy::new(pdsp, &rcp_frozen, interp, branch.clone());
        let sys = ReducedSystem { rh, fd_step: cfg.fd_step };
        let mut tracker = match orientation.take() {
            None => Tracker::new(&sys, cfg, y.clone())?,
            Some(v) => Tracker::with_state(&sys, cfg, y.clone(), v, delta),
        };
        tracker.smallest_delta = smallest_delta;

        let segment_end = loop {
            iter += 1;
            if iter > cfg.max_iterations {
                return Err(TrackError::IterationBudgetExceeded);
            }
            let (outcome, prev) = tracker.step()?;
            if outcome == StepOutcome::Reduced {
                continue;
            }
            let cur = tracker.y.clone();

            // solutions at t = 1
            if let Some(hit) = detect_crossing(&tracker, &prev, &cur, 1.0)? {
                let out = sys.rh.eval_figure(&hit).map_err(TrackError::Plan)?;
                let res = residual_vector(pdsp, &out.figure, &interp.params_at(1.0))
                    .expect("sized residual")
                    .amax();
                push_solution(
                    &mut solutions,
                    &mut residuals,
                    &mut duplicates,
                    out.figure,
                    res,
                    dedup,
                );
            }
            // loop closure at t = 0
            if let Some(hit) = detect_crossing(&tracker, &prev, &cur, 0.0)? {
                let out = sys.rh.eval_figure(&hit).map_err(TrackError::Plan)?;
                let dev = out.figure.max_deviation(sketch);
                if dev <= eps_loop {
                    return Ok(RunOutcome {
                        solutions,
                        residuals,
                        iterations: iter,
                        smallest_delta: tracker.smallest_delta,
                        events,
                        trace,
                        duplicates,
                        closure_error: dev,
                    });
                }
            }

            let t_cur = tracker.t();
            let out = sys.rh.eval_figure(&cur).map_err(TrackError::Plan)?;
            let g = gamma_plan(&rcp_frozen, &out.figure)?;
            let model = interp.values_at(t_cur);
            let sc = check_sc1(&rcp_frozen, &model);
            trace.push(TraceRow { iter, t: t_cur, delta: tracker.delta, gamma: g, d: rcp_frozen.d() });

            if g <= cfg.alpha || sc {
                let reason = if g <= cfg.alpha { ChangeReason::Gamma } else { ChangeReason::Sc1 };
                break (cur, tracker.orientation.clone(), tracker.delta, out.figure, reason);
            }
        };
        smallest_delta = tracker.smallest_delta;
        drop(tracker);

        let (y_old, v_old, delta_old, fig_cur, reason) = segment_end;
        let t_cur = y_old[rcp_frozen.d()];
        fig = fig_cur;
        let old_branch = branch.clone();

        apply_change(pdsp, &mut rcp, &fig, interp, t_cur, cfg, reason, tau_id, &mut events)?;

        // rebuild the reduced state under the new plan
        let model = interp.values_at(t_cur);
        let (vals, _) = phi_prime(&rcp, &fig, t_cur);
        let env = ParamEnv { model: &model, driving: &vals };
        let (new_branch, _) = identify_branch(&rcp, pdsp, &env, &fig, tau_id)?;
        branch = new_branch;
        let mut y_new = DVector::zeros(rcp.d() + 1);
        for (i, v) in vals.iter().enumerate() {
            y_new[i] = *v;
        }
        y_new[rcp.d()] = t_cur;

        // the old tangent pushed through the composition of the old
        // evaluation and the new measurement determines which way to run
        // along the new path; the direction itself is the exact kernel of
        // the new Jacobian
        let old_rh = ReducedHomotopy::new(pdsp, &rcp_frozen, interp, old_branch);
        let image = transfer_orientation(pdsp, &old_rh, &rcp, &y_old, &v_old, &y_new)?;

        // polish the restarted point back to corrector tolerance
        let rh_new = ReducedHomotopy::new(pdsp, &rcp, interp, branch.clone());
        let sys_new = ReducedSystem { rh: rh_new, fd_step: cfg.fd_step };
        let y_start = match sys_new.eval(&y_new) {
            Ok(r) if r.amax() > cfg.eps_newton => newton_constrained(
                &sys_new,
                &y_new,
                &image,
                0.0,
                cfg.eps_newton,
                cfg.max_newton,
                (1e-6 * diam).max(1e-8),
                false,
            )
            .unwrap_or(y_new),
            _ => y_new,
        };
        let j_start = sys_new.jacobian(&y_start).map_err(TrackError::Plan)?;
        let v_new = tangent(&j_start, Some(&image))
            .map_err(|_| TrackError::SingularTangent { t: t_cur })?;

        y = y_start;
        orientation = Some(v_new);
        delta = delta_old;
    }
}

#[allow(clippy::too_many_arguments)]
fn apply_change(
    pdsp: &Pdsp,
    rcp: &mut Rcp,
    fig: &Figure,
    interp: &Interpolation,
    t: f64,
    cfg: &TrackerConfig,
    reason: ChangeReason,
    tau_id: f64,
    events: &mut Vec<ChangeEvent>,
) -> Result<(), TrackError> {
    let model = interp.values_at(t);
    let d_before = rcp.d();
    let mut actions: Vec<ChangeAction> = Vec::new();
    change_rcp(rcp, pdsp, fig, &model, cfg.alpha, &mut actions)?;

    let gamma_after = gamma_plan(rcp, fig)?;
    let sc1_after = check_sc1(rcp, &model);
    let plan_valid_after = validate_rcp(rcp, pdsp).is_ok();
    // measure how exactly the new plan reproduces the figure
    let (vals, _) = phi_prime(rcp, fig, t);
    let env = ParamEnv { model: &model, driving: &vals };
    let figure_deviation = match identify_branch(rcp, pdsp, &env, fig, tau_id) {
        Ok((_, out)) => out.figure.max_deviation(fig),
        Err(_) => f64::INFINITY,
    };

    events.push(ChangeEvent {
        t,
        reason,
        actions,
        d_before,
        d_after: rcp.d(),
        gamma_after,
        sc1_after,
        plan_valid_after,
        figure_deviation,
    });
    Ok(())
}

/// Track the homotopy path in the full coordinate space, without a plan.
pub fn track_full_space(
    pdsp: &Pdsp,
    sketch: &Figure,
    interp: &Interpolation,
    cfg: &TrackerConfig,
) -> Result<RunOutcome, TrackError> {
    verify_start(pdsp, sketch, interp)?;
    positive_support(interp).map_err(|e| TrackError::Assumptions(e.to_string()))?;

    let diam = sketch.diameter().max(1e-12);
    let eps_loop = cfg.loop_tol_rel * diam;
    let dedup = cfg.dedup_tol * diam.max(1.0);

    let layout = XLayout::new(pdsp);
    let m = layout.m();
    let sys = FullSystem { pdsp, interp, layout, fd_step: cfg.fd_step };

    let mut y = DVector::zeros(m + 1);
    let packed = sys.layout.pack(sketch);
    for i in 0..m {
        y[i] = packed[i];
    }

    let mut tracker = Tracker::new(&sys, cfg, y)?;
    let mut solutions = Vec::new();
    let mut residuals = Vec::new();
    let mut duplicates = 0u64;
    let mut trace = Vec::new();
    let mut iter: u64 = 0;

    loop {
        iter += 1;
        if iter > cfg.max_iterations {
            return Err(TrackError::IterationBudgetExceeded);
        }
        let (outcome, prev) = tracker.step()?;
        if outcome == StepOutcome::Reduced {
            continue;
        }
        if let Some(hit) = detect_crossing(&tracker, &prev, &tracker.y.clone(), 1.0)? {
            let fig = sys.layout.unpack(&DVector::from_column_slice(&hit.as_slice()[..m]));
            let res = residual_vector(pdsp, &fig, &interp.params_at(1.0))
                .expect("sized residual")
                .amax();
            push_solution(&mut solutions, &mut residuals, &mut duplicates, fig, res, dedup);
        }
        if let Some(hit) = detect_crossing(&tracker, &prev, &tracker.y.clone(), 0.0)? {
            let fig = sys.layout.unpack(&DVector::from_column_slice(&hit.as_slice()[..m]));
            let dev = fig.max_deviation(sketch);
            if dev <= eps_loop {
                return Ok(RunOutcome {
                    solutions,
                    residuals,
                    iterations: iter,
                    smallest_delta: tracker.smallest_delta,
                    events: Vec::new(),
                    trace,
                    duplicates,
                    closure_error: dev,
                });
            }
        }
        trace.push(TraceRow {
            iter,
            t: tracker.t(),
            delta: tracker.delta,
            gamma: f64::NAN,
            d: m,
        });
    }
}
