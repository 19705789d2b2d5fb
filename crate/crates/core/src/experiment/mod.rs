//! Config-driven runs that write traces and reports to disk.

mod config;
mod report;
mod reproduce;
mod trace_io;

pub use config::{ExperimentConfig, Output};
pub use report::{audit_report, cycle_report, order_estimates, order_report};
pub use reproduce::{reproduce, Figure, Reproduction, OSCILLATION, FIG_BOTTOM_AR4, FIG_BOTTOM_NEWTON, FIG_TOP_GLOBAL, FIG_TOP_LOCAL, FIG_TOP_NEWTON};
pub use trace_io::{read_trace_csv, write_plotdata, write_trace_csv, TRACE_HEADER};

use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::analysis::{audit_trace, AnalysisError, TraceAudit};
use crate::baseline::newton_run;
use crate::driver::{run, DriverError, SolverConfig, Trace};
use crate::objective::ObjectiveError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{}{field}: {msg}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Config { line: Option<usize>, field: String, msg: String },
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error("trace file line {line}: {msg}")]
    Trace { line: u64, msg: String },
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl ExperimentError {
    /// 2 for config problems, 3 for numerical contract violations, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config { .. } => 2,
            ExperimentError::Driver(DriverError::InvalidConfig(_)) => 2,
            ExperimentError::Driver(_) | ExperimentError::Analysis(_) | ExperimentError::Objective(_) => 3,
            _ => 1,
        }
    }
}

/// Result of [`execute`].
#[derive(Debug)]
pub struct RunOutcome {
    pub trace: Trace,
    pub audit: Option<TraceAudit>,
    pub written: Vec<PathBuf>,
}

impl RunOutcome {
    /// False when an audit ran and found a violation.
    pub fn audit_ok(&self) -> bool {
        self.audit.as_ref().is_none_or(TraceAudit::ok)
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn solve(cfg: &ExperimentConfig) -> Result<Trace, ExperimentError> {
    Ok(match &cfg.solver {
        SolverConfig::Arp(a) => run(a, &cfg.objective, &cfg.x0)?,
        SolverConfig::Newton(n) => newton_run(&cfg.objective, &cfg.x0, n)?,
    })
}

/// Runs `cfg` and writes each requested output as `<name>.<suffix>` under
/// `out_dir`.
pub fn execute(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, ExperimentError> {
    let trace = solve(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let f = &cfg.objective;
    let mut written = Vec::new();
    let mut audit = None;
    for &o in &cfg.outputs {
        let bytes = match o {
            Output::TraceCsv => {
                let mut b = Vec::new();
                write_trace_csv(&trace, &mut b)?;
                b
            }
            Output::Plotdata => {
                let mut b = Vec::new();
                write_plotdata(&trace, f, &mut b)?;
                b
            }
            Output::OrderReport => order_report(&trace, f, cfg.error_metric).into_bytes(),
            Output::CycleReport => cycle_report(&trace).into_bytes(),
            Output::AuditReport => {
                let a = audit_trace(&trace, f)?;
                let text = audit_report(&a);
                audit = Some(a);
                text.into_bytes()
            }
        };
        let path = out_dir.join(format!("{}.{}", cfg.name, o.suffix()));
        write_atomic(&path, &bytes)?;
        written.push(path);
    }
    Ok(RunOutcome { trace, audit, written })
}
