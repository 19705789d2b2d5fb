//! Trace CSV: one row per iteration, then a terminal row with `k = T`, the
//! termination reason in the status column and the final state.

use std::io::{Read, Write};

use crate::driver::{FinalState, IterationRecord, IterationStatus, SolverConfig, Termination, Trace};
use crate::objective::ObjectiveSpec;
use crate::point::Point;
use crate::precision::{PrecisionConfig, Real};

use super::ExperimentError;

pub const TRACE_HEADER: [&str; 8] = ["k", "status", "sigma", "x", "f_gap", "grad_norm", "step_norm", "rho"];

fn opt(v: &Option<Real>) -> String {
    v.as_ref().map(Real::to_decimal_string).unwrap_or_default()
}

pub fn write_trace_csv<W: Write>(trace: &Trace, w: W) -> Result<(), ExperimentError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_HEADER)?;
    for r in &trace.records {
        out.write_record([
            r.k.to_string(),
            r.status.code().to_string(),
            r.sigma.to_decimal_string(),
            r.x.to_decimal_string(),
            opt(&r.f_gap),
            r.grad_norm.to_decimal_string(),
            r.step_norm.to_decimal_string(),
            r.rho.to_decimal_string(),
        ])?;
    }
    let fin = &trace.final_state;
    out.write_record([
        "T".to_string(),
        trace.termination.name().to_string(),
        fin.sigma.to_decimal_string(),
        fin.x.to_decimal_string(),
        opt(&fin.f_gap),
        fin.grad_norm.to_decimal_string(),
        String::new(),
        String::new(),
    ])?;
    out.flush()?;
    Ok(())
}

fn bad(line: u64, msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Trace { line, msg: msg.into() }
}

/// Rebuilds a trace written by [`write_trace_csv`]. Values not stored in the
/// file (`f_value`) are recomputed from `f`; trial points and Taylor
/// decreases stay absent.
pub fn read_trace_csv<R: Read>(
    r: R,
    f: &ObjectiveSpec,
    config: SolverConfig,
    prec: PrecisionConfig,
) -> Result<Trace, ExperimentError> {
    let mut rdr = csv::Reader::from_reader(r);
    if rdr.headers()?.iter().ne(TRACE_HEADER) {
        return Err(bad(1, "unexpected header"));
    }
    let mut records = Vec::new();
    let mut terminal = None;
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if terminal.is_some() {
            return Err(bad(line, "rows after the terminal row"));
        }
        let real = |i: usize| prec.parse(&row[i]).map_err(|e| bad(line, format!("{}: {e}", TRACE_HEADER[i])));
        let opt_real = |i: usize| if row[i].is_empty() { Ok(None) } else { real(i).map(Some) };
        let x = Point::parse(&row[3], prec).map_err(|e| bad(line, format!("x: {e}")))?;
        if &row[0] == "T" {
            let t = Termination::from_name(&row[1]).ok_or_else(|| bad(line, "unknown termination"))?;
            let fin = FinalState {
                k: records.len(),
                f_value: f.value(&x),
                f_gap: opt_real(4)?,
                grad_norm: real(5)?,
                sigma: real(2)?,
                x,
            };
            terminal = Some((t, fin));
            continue;
        }
        let k: usize = row[0].parse().map_err(|_| bad(line, "k is not an integer"))?;
        if k != records.len() {
            return Err(bad(line, format!("expected k = {}", records.len())));
        }
        let mut code = row[1].chars();
        let status = match (code.next(), code.next()) {
            (Some(c), None) => IterationStatus::from_code(c),
            _ => None,
        }
        .ok_or_else(|| bad(line, "status must be V, S or U"))?;
        records.push(IterationRecord {
            k,
            f_value: f.value(&x),
            x,
            f_gap: opt_real(4)?,
            grad_norm: real(5)?,
            sigma: real(2)?,
            y: None,
            step_norm: real(6)?,
            rho: real(7)?,
            status,
            taylor_decrease: None,
        });
    }
    let (termination, final_state) = terminal.ok_or_else(|| bad(0, "missing terminal row"))?;
    Ok(Trace { config, objective_id: f.id.clone(), records, final_state, termination })
}

/// `k,log10_inv_dist` for every iterate (final point included) that differs
/// from `x*`.
pub fn write_plotdata<W: Write>(trace: &Trace, f: &ObjectiveSpec, w: W) -> Result<(), ExperimentError> {
    let x_star = &f.meta()?.x_star;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k", "log10_inv_dist"])?;
    let points = trace.records.iter().map(|r| (r.k, &r.x)).chain([(trace.final_state.k, &trace.final_state.x)]);
    for (k, x) in points {
        let d = x.distance(x_star);
        if d.is_zero() {
            continue;
        }
        out.write_record([k.to_string(), (-d.log10()).to_decimal(12)])?;
    }
    out.flush()?;
    Ok(())
}
