//! Convergence-order estimates, sigma-cycle detection, the sigma* threshold
//! and trace audits.

mod audit;
mod cycle;
mod order;
mod sigma_star;

pub use audit::{audit_trace, TraceAudit};
pub use cycle::{detect_cycle, rational_exponent, CycleReport};
pub use order::{error_sequence, estimate_order, estimate_order_at, ErrorMetric, OrderEstimate, OrderMode};
pub use sigma_star::{estimate_sigma_star, global_model_drop};

use thiserror::Error;

use crate::objective::ObjectiveError;
use crate::subsolver::SubsolverError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("need at least {needed} usable errors, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("error sequence increases at position {0}")]
    NonMonotone(usize),
    #[error("trace too short for cycle detection ({0} states, need 8)")]
    TraceTooShort(usize),
    #[error("no eventually periodic pattern in the observed window")]
    NoCycle,
    #[error("sigma values do not lie on the gamma grid: {0}")]
    OffGrid(String),
    #[error("bracket does not straddle the threshold: {0}")]
    BracketDoesNotStraddle(String),
    #[error("analysis needs an AR(p) trace")]
    NotArp,
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Subsolver(#[from] SubsolverError),
}
