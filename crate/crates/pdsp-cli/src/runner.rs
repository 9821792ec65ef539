//! Orchestration: run a built problem in either tracking mode, optionally
//! repeatedly for median timing, and benchmark the built-in corpus.

use crate::problem::BuiltProblem;
use crate::report::RunReport;
use pdsp_core::model::XLayout;
use pdsp_core::tracker::{solve, track_full_space, RunOutcome, TrackError, TrackerConfig};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Reduced tracking in driving-parameter space with plan changes.
    Reduced,
    /// Full-space tracking without a plan.
    Baseline,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Reduced => "rcp",
            Mode::Baseline => "baseline",
        }
    }
}

/// Tracking configuration for a mode: the file's settings, with the
/// full-space default step bound in baseline mode.
pub fn config_for(built: &BuiltProblem, mode: Mode) -> TrackerConfig {
    match mode {
        Mode::Reduced => built.config.clone(),
        Mode::Baseline => TrackerConfig {
            delta_max: TrackerConfig::full_space().delta_max,
            ..built.config.clone()
        },
    }
}

pub fn run_once(
    built: &BuiltProblem,
    mode: Mode,
    cfg: &TrackerConfig,
) -> Result<(RunOutcome, f64), TrackError> {
    let start = Instant::now();
    let outcome = match mode {
        Mode::Reduced => solve(&built.pdsp, &built.rcp, &built.sketch, &built.interp, cfg)?,
        Mode::Baseline => track_full_space(&built.pdsp, &built.sketch, &built.interp, cfg)?,
    };
    Ok((outcome, start.elapsed().as_secs_f64()))
}

/// Run `runs` times and report the median wall time with the outcome of the
/// median run.
pub fn run_median(
    built: &BuiltProblem,
    mode: Mode,
    cfg: &TrackerConfig,
    runs: usize,
    name: &str,
) -> Result<(RunOutcome, RunReport), TrackError> {
    assert!(runs >= 1);
    let mut timed: Vec<(f64, RunOutcome)> = Vec::with_capacity(runs);
    for _ in 0..runs {
        let (outcome, secs) = run_once(built, mode, cfg)?;
        timed.push((secs, outcome));
    }
    timed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (secs, outcome) = timed.swap_remove(timed.len() / 2);
    let m = XLayout::new(&built.pdsp).m();
    let report = RunReport::from_outcome(name, mode.name(), m, &outcome, secs);
    Ok((outcome, report))
}

/// Benchmark a set of named problem files in both modes. Per-problem
/// failures become rows with an error note and the suite continues.
pub fn bench(
    problems: &[(String, String)],
    runs: usize,
) -> (Vec<RunReport>, Vec<(String, String)>) {
    let threads: usize = std::env::var("PDSP_BENCH_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1)
        .max(1);

    let work = |name: &str, text: &str| -> Result<Vec<RunReport>, String> {
        let parsed = crate::problem::parse_problem(text).map_err(|e| e.to_string())?;
        let built = parsed.build().map_err(|e| e.to_string())?;
        let mut rows = Vec::new();
        for mode in [Mode::Reduced, Mode::Baseline] {
            let cfg = config_for(&built, mode);
            let (_, report) =
                run_median(&built, mode, &cfg, runs, name).map_err(|e| e.to_string())?;
            rows.push(report);
        }
        Ok(rows)
    };

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    if threads <= 1 {
        for (name, text) in problems {
            match work(name, text) {
                Ok(mut r) => rows.append(&mut r),
                Err(e) => failures.push((name.clone(), e)),
            }
        }
    } else {
        let results: Vec<(String, Result<Vec<RunReport>, String>)> = std::thread::scope(|s| {
            let handles: Vec<_> = problems
                .iter()
                .map(|(name, text)| {
                    let name = name.clone();
                    s.spawn(move || {
                        let r = work(&name, text);
                        (name, r)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("bench worker")).collect()
        });
        for (name, r) in results {
            match r {
                Ok(mut v) => rows.append(&mut v),
                Err(e) => failures.push((name, e)),
            }
        }
    }
    (rows, failures)
}
