use clap::{Parser, Subcommand};
use pdsp_cli::problem::{parse_problem, BuiltProblem};
use pdsp_cli::report::{
    events_text, machine_readable, solutions_text, text_table, trace_csv, RunReport,
};
use pdsp_cli::runner::{bench, config_for, run_once, Mode};
use pdsp_cli::corpus;
use pdsp_core::homotopy::{check_assumptions, AssumptionStatus};
use pdsp_core::model::XLayout;
use pdsp_core::tracker::TrackError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "pdsp", about = "Sketch-guided homotopy solver for point distance problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file and print a run report.
    Run {
        /// Problem file path, or the name of a built-in problem.
        file: String,
        /// Track in the full coordinate space instead of the reduced one.
        #[arg(long)]
        baseline: bool,
        /// Boundary-distance threshold for plan changes.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        delta_max: Option<f64>,
        #[arg(long)]
        delta_min: Option<f64>,
        /// Write the per-iteration trace (iter,t,delta,gamma,d) here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the solution figures here.
        #[arg(long)]
        solutions: Option<PathBuf>,
        /// Only check the run assumptions and report.
        #[arg(long)]
        check_assumptions: bool,
        /// Machine-readable report.
        #[arg(long)]
        json: bool,
    },
    /// Run the built-in benchmark corpus in both modes.
    Bench {
        /// Comma-separated subset of problems (default: all).
        #[arg(long)]
        problems: Option<String>,
        /// Wall times are medians over this many runs.
        #[arg(long, default_value_t = 5)]
        runs: usize,
        /// Machine-readable report.
        #[arg(long)]
        json: bool,
    },
    /// Print a built-in problem file.
    Show { name: String },
}

fn load(file: &str) -> Result<String, String> {
    if let Some(text) = corpus::by_name(file) {
        return Ok(text.to_string());
    }
    std::fs::read_to_string(file).map_err(|e| format!("cannot read {file}: {e}"))
}

fn exit_code_for(err: &TrackError) -> u8 {
    match err {
        TrackError::Stuck { .. } => 2,
        TrackError::SingularTangent { .. } => 3,
        TrackError::IterationBudgetExceeded => 4,
        TrackError::RefinementDiverged { .. } => 5,
        TrackError::Assumptions(_) => 6,
        TrackError::ZeroImage => 7,
        TrackError::Plan(_) => 8,
    }
}

fn status_str(s: &AssumptionStatus) -> String {
    match s {
        AssumptionStatus::Pass => "pass".into(),
        AssumptionStatus::Warn(msg) => format!("warn ({msg})"),
        AssumptionStatus::Fail(msg) => format!("FAIL ({msg})"),
        AssumptionStatus::NotCheckable => "not checkable".into(),
    }
}

fn cmd_run(
    file: String,
    baseline: bool,
    alpha: Option<f64>,
    delta_max: Option<f64>,
    delta_min: Option<f64>,
    trace: Option<PathBuf>,
    solutions: Option<PathBuf>,
    check_only: bool,
    json: bool,
) -> ExitCode {
    let text = match load(&file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let built: BuiltProblem = match parse_problem(&text).and_then(|p| p.build()) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    if check_only {
        let report = check_assumptions(&built.pdsp, &built.rcp, &built.interp);
        println!("h1 (full-rank Jacobian on the path): {}", status_str(&report.h1));
        println!("h2 (compact positive support):       {}", status_str(&report.h2));
        println!("h3 (finitely many crossings):        {}", status_str(&report.h3));
        println!("h4 (first length stays positive):    {}", status_str(&report.h4));
        println!("h5 (no doubly-null radii):           {}", status_str(&report.h5));
        println!("h6 (kept radii stay positive):       {}", status_str(&report.h6));
        if let Some((lo, hi)) = report.pos_sup {
            println!("positive support: [{lo:.6}, {hi:.6}]");
        }
        return if report.all_ok() { ExitCode::SUCCESS } else { ExitCode::from(6) };
    }

    let mode = if baseline { Mode::Baseline } else { Mode::Reduced };
    let mut cfg = config_for(&built, mode);
    if let Some(a) = alpha {
        cfg.alpha = a;
    }
    if let Some(d) = delta_max {
        cfg.delta_max = d;
    }
    if let Some(d) = delta_min {
        cfg.delta_min = d;
    }

    match run_once(&built, mode, &cfg) {
        Ok((outcome, secs)) => {
            let m = XLayout::new(&built.pdsp).m();
            let report = RunReport::from_outcome(&file, mode.name(), m, &outcome, secs);
            if json {
                print!("{}", machine_readable(std::slice::from_ref(&report)));
            } else {
                print!("{}", text_table(std::slice::from_ref(&report)));
                if !outcome.events.is_empty() {
                    println!("plan changes:");
                    print!("{}", events_text(&outcome));
                }
            }
            if let Some(path) = trace {
                if let Err(e) = std::fs::write(&path, trace_csv(&outcome)) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::from(1);
                }
            }
            if let Some(path) = solutions {
                let text = solutions_text(&built.pdsp, &outcome.solutions, &outcome.residuals);
                if let Err(e) = std::fs::write(&path, text) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::from(1);
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("tracking failed: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn cmd_bench(problems: Option<String>, runs: usize, json: bool) -> ExitCode {
    let selected: Vec<(String, String)> = match problems {
        None => corpus::all().iter().map(|(n, t)| (n.to_string(), t.to_string())).collect(),
        Some(list) => {
            let mut v = Vec::new();
            for name in list.split(',') {
                let name = name.trim();
                match corpus::by_name(name) {
                    Some(t) => v.push((name.to_string(), t.to_string())),
                    None => {
                        eprintln!("error: unknown problem {name}");
                        return ExitCode::from(1);
                    }
                }
            }
            v
        }
    };
    let (rows, failures) = bench(&selected, runs);
    if json {
        print!("{}", machine_readable(&rows));
    } else {
        print!("{}", text_table(&rows));
    }
    for (name, err) in &failures {
        eprintln!("{name}: FAILED: {err}");
    }
    if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            file,
            baseline,
            alpha,
            delta_max,
            delta_min,
            trace,
            solutions,
            check_assumptions,
            json,
        } => cmd_run(
            file,
            baseline,
            alpha,
            delta_max,
            delta_min,
            trace,
            solutions,
            check_assumptions,
            json,
        ),
        Command::Bench { problems, runs, json } => cmd_bench(problems, runs, json),
        Command::Show { name } => match corpus::by_name(&name) {
            Some(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            None => {
                eprintln!(
                    "error: unknown problem {name}; built-ins: {}",
                    corpus::all().iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
                );
                ExitCode::from(1)
            }
        },
    }
}
