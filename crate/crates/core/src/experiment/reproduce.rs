//! Canned experiments behind `arp reproduce`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::analysis::{detect_cycle, error_sequence, estimate_sigma_star, ErrorMetric, OrderMode};
use crate::driver::SolverConfig;
use crate::exec::Execution;
use crate::objective::builtin_example_a;
use crate::precision::{PrecisionConfig, Real};

use super::{execute, write_atomic, ExperimentConfig, ExperimentError, RunOutcome};
use super::report::order_estimates;

pub const FIG_TOP_NEWTON: &str = r#"name = "top_newton"
objective = "exampleA"
solver = "newton"
x0 = "1.1"
dist_tol = "1e-100"
max_iterations = 200
outputs = ["trace_csv", "order_report", "audit_report", "plotdata"]
"#;

pub const FIG_TOP_LOCAL: &str = r#"name = "top_ar3_component"
objective = "exampleA", p = 3
policy = "component"
eta = "1/2", gamma1 = "1/2", gamma2 = "2", theta = "0", sigma0 = "1/2"
x0 = "1.1"
dist_tol = "1e-100"
outputs = ["trace_csv", "order_report", "cycle_report", "audit_report", "plotdata"]
"#;

pub const FIG_TOP_GLOBAL: &str = r#"name = "top_ar3_global"
objective = "exampleA", p = 3
policy = "global"
eta = "1/2", gamma1 = "1/2", gamma2 = "2", theta = "0", sigma0 = "1/2"
x0 = "1.1"
dist_tol = "1e-100"
outputs = ["trace_csv", "order_report", "cycle_report", "audit_report", "plotdata"]
"#;

pub const FIG_BOTTOM_NEWTON: &str = r#"name = "bottom_newton"
objective = "exampleB", p = 4, q = 4
solver = "newton"
x0 = "0.1"
dist_tol = "1e-100"
max_iterations = 1000
outputs = ["trace_csv", "order_report", "audit_report", "plotdata"]
"#;

// sigma0 below 1/5 keeps every iteration very successful from the start
pub const FIG_BOTTOM_AR4: &str = r#"name = "bottom_ar4"
objective = "exampleB", p = 4, q = 4
policy = "closed_form_b"
eta = "1/2", gamma1 = "1/2", gamma2 = "2", theta = "3", sigma0 = "1/8"
x0 = "0.1"
dist_tol = "1e-100"
outputs = ["trace_csv", "order_report", "cycle_report", "audit_report", "plotdata"]
"#;

pub const OSCILLATION: &str = r#"name = "oscillation"
objective = "exampleA", p = 3
policy = "global"
eta = "1/2", gamma1 = "1/3", gamma2 = "3", theta = "0", sigma0 = "6"
x0 = "1.05"
dist_tol = "1e-100"
outputs = ["trace_csv", "order_report", "cycle_report", "audit_report", "plotdata"]
"#;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Figure {
    FigTop,
    FigBottom,
    Oscillation,
    SigmaStar,
}

impl Figure {
    pub const ALL: [Figure; 4] = [Figure::FigTop, Figure::FigBottom, Figure::Oscillation, Figure::SigmaStar];

    pub fn name(self) -> &'static str {
        match self {
            Figure::FigTop => "fig-top",
            Figure::FigBottom => "fig-bottom",
            Figure::Oscillation => "example-2-1",
            Figure::SigmaStar => "sigma-star",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }

    pub fn configs(self) -> &'static [&'static str] {
        match self {
            Figure::FigTop => &[FIG_TOP_NEWTON, FIG_TOP_LOCAL, FIG_TOP_GLOBAL],
            Figure::FigBottom => &[FIG_BOTTOM_NEWTON, FIG_BOTTOM_AR4],
            Figure::Oscillation => &[OSCILLATION],
            Figure::SigmaStar => &[],
        }
    }
}

#[derive(Debug)]
pub struct Reproduction {
    pub figure: Figure,
    pub runs: Vec<(ExperimentConfig, RunOutcome)>,
    pub files: Vec<PathBuf>,
    pub audits_ok: bool,
}

fn summary_row(cfg: &ExperimentConfig, out: &RunOutcome) -> Result<String, ExperimentError> {
    let f = &cfg.objective;
    let [(_, succ), (_, all)] = order_estimates(&out.trace, f, ErrorMetric::Distance);
    let fmt = |v: Option<&Real>| v.map_or_else(|| "n/a".to_string(), |r| r.to_decimal(6));
    let q = fmt(succ.as_ref().ok().map(|e| &e.tail_q_order));
    let r = fmt(all.as_ref().ok().map(|e| &e.r_order));
    let errs = error_sequence(&out.trace, f, ErrorMetric::Distance, OrderMode::SuccessfulOnly)?;
    let nz: Vec<&Real> = errs.iter().map(|(_, e)| e).filter(|e| !e.is_zero()).collect();
    let ratio = match nz.as_slice() {
        [.., a, b] => fmt(Some(&(*b / *a))),
        _ => "n/a".to_string(),
    };
    let cycle = match &cfg.solver {
        SolverConfig::Arp(_) => match detect_cycle(&out.trace).ok().and_then(|c| c.ratio()) {
            Some((u, s)) => format!("{u}:{s}"),
            None => "none".to_string(),
        },
        SolverConfig::Newton(_) => "n/a".to_string(),
    };
    Ok(format!("{},{},{q},{r},{ratio},{cycle}", cfg.name, out.trace.records.len()))
}

fn sigma_star(out_dir: &Path) -> Result<PathBuf, ExperimentError> {
    let prec = PrecisionConfig::default();
    let f = builtin_example_a(prec);
    let tol = prec.parse("1e-8").expect("literal");
    let s = estimate_sigma_star(&f, 3, (&prec.int(2), &prec.int(6)), &tol)?;
    let mut text = String::new();
    writeln!(text, "objective: exampleA").unwrap();
    writeln!(text, "p: 3").unwrap();
    writeln!(text, "bracket: 2;6").unwrap();
    writeln!(text, "tol: 1e-8").unwrap();
    writeln!(text, "sigma_star: {}", s.to_decimal(12)).unwrap();
    writeln!(text, "closed_form: {}", prec.ratio(8, 3).to_decimal(12)).unwrap();
    let path = out_dir.join("sigma_star.txt");
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

/// Runs every sub-experiment of `figure` (in parallel under
/// [`Execution::Parallel`]) and writes their outputs plus `summary.csv`.
pub fn reproduce(figure: Figure, out_dir: &Path, exec: Execution) -> Result<Reproduction, ExperimentError> {
    std::fs::create_dir_all(out_dir)?;
    if figure == Figure::SigmaStar {
        let path = sigma_star(out_dir)?;
        return Ok(Reproduction { figure, runs: Vec::new(), files: vec![path], audits_ok: true });
    }
    let configs = figure
        .configs()
        .iter()
        .map(|t| ExperimentConfig::parse(t))
        .collect::<Result<Vec<_>, _>>()?;
    let results = exec.map(&configs, |c| execute(c, out_dir));
    let mut runs = Vec::new();
    for (c, r) in configs.into_iter().zip(results) {
        runs.push((c, r?));
    }
    let mut summary = String::from("method,iterations,q_order_successful,r_order_all,last_ratio,cycle_ratio\n");
    for (c, o) in &runs {
        summary.push_str(&summary_row(c, o)?);
        summary.push('\n');
    }
    let path = out_dir.join("summary.csv");
    write_atomic(&path, summary.as_bytes())?;
    let mut files: Vec<PathBuf> = runs.iter().flat_map(|(_, o)| o.written.iter().cloned()).collect();
    files.push(path);
    let audits_ok = runs.iter().all(|(_, o)| o.audit_ok());
    Ok(Reproduction { figure, runs, files, audits_ok })
}
