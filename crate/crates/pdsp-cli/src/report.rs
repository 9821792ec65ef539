//! Run reports: the per-run statistics table, its machine-readable variant,
//! the per-iteration trace and the solution listing.

use pdsp_core::model::{Figure, Pdsp};
use pdsp_core::tracker::RunOutcome;

/// Statistics of one tracked run, one row of the report table.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub problem: String,
    pub mode: String,
    pub m: usize,
    pub solutions: usize,
    pub residual_max: f64,
    pub time_s: f64,
    pub iterations: u64,
    pub ms_per_iter: f64,
    pub smallest_delta: f64,
    pub rcp_changes: usize,
    pub avg_d: f64,
    pub max_d: usize,
    pub duplicates: u64,
    pub closure_error: f64,
}

impl RunReport {
    pub fn from_outcome(
        problem: &str,
        mode: &str,
        m: usize,
        outcome: &RunOutcome,
        time_s: f64,
    ) -> Self {
        RunReport {
            problem: problem.to_string(),
            mode: mode.to_string(),
            m,
            solutions: outcome.solutions.len(),
            residual_max: outcome.residuals.iter().copied().fold(0.0, f64::max),
            time_s,
            iterations: outcome.iterations,
            ms_per_iter: if outcome.iterations > 0 {
                1000.0 * time_s / outcome.iterations as f64
            } else {
                0.0
            },
            smallest_delta: outcome.smallest_delta,
            rcp_changes: outcome.rcp_change_count(),
            avg_d: outcome.average_d(),
            max_d: outcome.max_d(),
            duplicates: outcome.duplicates,
            closure_error: outcome.closure_error,
        }
    }
}

pub fn text_table(rows: &[RunReport]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:<9} {:>3} {:>5} {:>10} {:>9} {:>8} {:>9} {:>10} {:>8} {:>6} {:>5}\n",
        "problem",
        "mode",
        "m",
        "sols",
        "residual",
        "time s",
        "iters",
        "t/i ms",
        "min delta",
        "changes",
        "avg d",
        "max d"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<12} {:<9} {:>3} {:>5} {:>10.2e} {:>9.3} {:>8} {:>9.3} {:>10.1e} {:>8} {:>6.2} {:>5}\n",
            r.problem,
            r.mode,
            r.m,
            r.solutions,
            r.residual_max,
            r.time_s,
            r.iterations,
            r.ms_per_iter,
            r.smallest_delta,
            r.rcp_changes,
            r.avg_d,
            r.max_d
        ));
    }
    out
}

pub fn machine_readable(rows: &[RunReport]) -> String {
    let mut out = String::from("[\n");
    for (i, r) in rows.iter().enumerate() {
        out.push_str(&format!(
            "  {{\"problem\": \"{}\", \"mode\": \"{}\", \"m\": {}, \"solutions\": {}, \
             \"residual_max\": {:e}, \"time_s\": {:e}, \"iterations\": {}, \
             \"ms_per_iter\": {:e}, \"smallest_delta\": {:e}, \"rcp_changes\": {}, \
             \"avg_d\": {:e}, \"max_d\": {}, \"duplicates\": {}, \"closure_error\": {:e}}}{}\n",
            r.problem,
            r.mode,
            r.m,
            r.solutions,
            r.residual_max,
            r.time_s,
            r.iterations,
            r.ms_per_iter,
            r.smallest_delta,
            r.rcp_changes,
            r.avg_d,
            r.max_d,
            r.duplicates,
            r.closure_error,
            if i + 1 == rows.len() { "" } else { "," }
        ));
    }
    out.push_str("]\n");
    out
}

/// Per-iteration trace, one row per accepted point.
pub fn trace_csv(outcome: &RunOutcome) -> String {
    let mut out = String::from("iter,t,delta,gamma,d\n");
    for row in &outcome.trace {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.iter, row.t, row.delta, row.gamma, row.d
        ));
    }
    out
}

pub fn solutions_text(pdsp: &Pdsp, solutions: &[Figure], residuals: &[f64]) -> String {
    let mut out = String::new();
    for (i, fig) in solutions.iter().enumerate() {
        out.push_str(&format!("solution {} residual {:e}\n", i + 1, residuals[i]));
        for (name, p) in pdsp.points.iter().zip(fig.0.iter()) {
            match pdsp.dim {
                pdsp_core::model::Dim::Two => {
                    out.push_str(&format!("  {name} {:.12} {:.12}\n", p.x, p.y))
                }
                pdsp_core::model::Dim::Three => {
                    out.push_str(&format!("  {name} {:.12} {:.12} {:.12}\n", p.x, p.y, p.z))
                }
            }
        }
    }
    out
}

/// Plan-change events in a diff-friendly form.
pub fn events_text(outcome: &RunOutcome) -> String {
    let mut out = String::new();
    for e in &outcome.events {
        let reason = match e.reason {
            pdsp_core::tracker::ChangeReason::Gamma => "gamma",
            pdsp_core::tracker::ChangeReason::Sc1 => "sc1",
        };
        let actions: Vec<String> = e
            .actions
            .iter()
            .map(|a| {
                let k = match a.kind {
                    pdsp_core::cplan::ChangeKind::Swap => "swap",
                    pdsp_core::cplan::ChangeKind::MovePoint => "move",
                    pdsp_core::cplan::ChangeKind::Restore => "restore",
                };
                format!("{k}@{}", a.instr)
            })
            .collect();
        out.push_str(&format!(
            "t={:.6} reason={} d {}->{} [{}]\n",
            e.t,
            reason,
            e.d_before,
            e.d_after,
            actions.join(" ")
        ));
    }
    out
}
