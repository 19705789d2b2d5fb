//! Flat `key = value` experiment configs.
//!
//! ```text
//! # comment
//! objective = "exampleB", p = 4, q = 4
//! sigma0 = "1/8"
//! x0 = "0.1"
//! outputs = ["trace_csv", "plotdata"]
//! ```
//!
//! Values are quoted strings, bare tokens or lists of either. Numerics are
//! decimal or `a/b` rational literals, parsed at `precision_bits`.

use std::collections::BTreeMap;

use crate::analysis::ErrorMetric;
use crate::driver::{ArpConfig, NewtonConfig, SolverConfig, StopRule};
use crate::objective::{builtin_example_a, builtin_example_b, ObjectiveSpec};
use crate::point::Point;
use crate::precision::{PrecisionConfig, Real};
use crate::subsolver::SelectionPolicy;

use super::ExperimentError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Output {
    TraceCsv,
    OrderReport,
    CycleReport,
    AuditReport,
    Plotdata,
}

impl Output {
    pub fn name(self) -> &'static str {
        match self {
            Output::TraceCsv => "trace_csv",
            Output::OrderReport => "order_report",
            Output::CycleReport => "cycle_report",
            Output::AuditReport => "audit_report",
            Output::Plotdata => "plotdata",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Output::TraceCsv, Output::OrderReport, Output::CycleReport, Output::AuditReport, Output::Plotdata]
            .into_iter()
            .find(|o| o.name() == s)
    }

    /// File name suffix under the output directory.
    pub fn suffix(self) -> &'static str {
        match self {
            Output::TraceCsv => "trace.csv",
            Output::OrderReport => "order.txt",
            Output::CycleReport => "cycle.txt",
            Output::AuditReport => "audit.txt",
            Output::Plotdata => "plot.csv",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub name: String,
    pub precision: PrecisionConfig,
    pub objective: ObjectiveSpec,
    pub solver: SolverConfig,
    pub x0: Point,
    pub outputs: Vec<Output>,
    pub error_metric: ErrorMetric,
}

#[derive(Clone, Debug)]
enum Value {
    Scalar(String),
    List(Vec<String>),
}

#[derive(Clone, Debug)]
struct Entry {
    line: usize,
    value: Value,
}

const KEYS: &[&str] = &[
    "name",
    "objective",
    "p",
    "q",
    "coeffs",
    "solver",
    "policy",
    "reference",
    "eta",
    "eta1",
    "eta2",
    "gamma1",
    "gamma2",
    "theta",
    "sigma0",
    "sigma_min",
    "inner_tol",
    "max_iterations",
    "grad_tol",
    "dist_tol",
    "precision_bits",
    "x0",
    "outputs",
    "error_metric",
];

const ARP_ONLY: &[&str] =
    &["policy", "reference", "eta", "eta1", "eta2", "gamma1", "gamma2", "theta", "sigma0", "sigma_min", "inner_tol"];

fn err(line: Option<usize>, field: &str, msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config { line, field: field.to_string(), msg: msg.into() }
}

/// Splits on `sep` outside quotes and brackets.
fn split_top(s: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut quoted, mut start) = (0i32, false, 0);
    for (i, c) in s.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '[' if !quoted => depth += 1,
            ']' if !quoted => depth -= 1,
            c if c == sep && !quoted && depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn atom(s: &str, line: usize, key: &str) -> Result<String, ExperimentError> {
    let s = s.trim();
    if let Some(inner) = s.strip_prefix('"') {
        let inner = inner.strip_suffix('"').ok_or_else(|| err(Some(line), key, "unterminated string"))?;
        if inner.contains('"') {
            return Err(err(Some(line), key, "stray quote"));
        }
        return Ok(inner.to_string());
    }
    if s.is_empty() || s.contains(['"', '[', ']', ' ', '\t']) {
        return Err(err(Some(line), key, format!("malformed value {s:?}")));
    }
    Ok(s.to_string())
}

fn parse_value(s: &str, line: usize, key: &str) -> Result<Value, ExperimentError> {
    let s = s.trim();
    if let Some(inner) = s.strip_prefix('[') {
        let inner = inner.strip_suffix(']').ok_or_else(|| err(Some(line), key, "unterminated list"))?;
        if inner.trim().is_empty() {
            return Ok(Value::List(Vec::new()));
        }
        let items = split_top(inner, ',').into_iter().map(|a| atom(a, line, key)).collect::<Result<_, _>>()?;
        return Ok(Value::List(items));
    }
    Ok(Value::Scalar(atom(s, line, key)?))
}

fn parse_entries(text: &str) -> Result<BTreeMap<String, Entry>, ExperimentError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = strip_comment(raw).trim();
        if body.is_empty() {
            continue;
        }
        for part in split_top(body, ',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| err(Some(line), part.trim(), "expected `key = value`"))?;
            let key = k.trim();
            if !KEYS.contains(&key) {
                return Err(err(Some(line), key, "unknown key"));
            }
            let value = parse_value(v, line, key)?;
            if map.insert(key.to_string(), Entry { line, value }).is_some() {
                return Err(err(Some(line), key, "duplicate key"));
            }
        }
    }
    Ok(map)
}

struct Fields {
    map: BTreeMap<String, Entry>,
}

impl Fields {
    fn take(&mut self, key: &str) -> Option<Entry> {
        self.map.remove(key)
    }

    fn scalar(&mut self, key: &str) -> Result<Option<(usize, String)>, ExperimentError> {
        match self.take(key) {
            None => Ok(None),
            Some(Entry { line, value: Value::Scalar(s) }) => Ok(Some((line, s))),
            Some(Entry { line, .. }) => Err(err(Some(line), key, "expected a single value, found a list")),
        }
    }

    fn list(&mut self, key: &str) -> Result<Option<(usize, Vec<String>)>, ExperimentError> {
        match self.take(key) {
            None => Ok(None),
            Some(Entry { line, value: Value::List(v) }) => Ok(Some((line, v))),
            Some(Entry { line, value: Value::Scalar(s) }) => Ok(Some((line, vec![s]))),
        }
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>, ExperimentError> {
        self.scalar(key)?
            .map(|(line, s)| s.parse().map_err(|_| err(Some(line), key, format!("not a nonnegative integer: {s:?}"))))
            .transpose()
    }

    fn real(&mut self, key: &str, prec: PrecisionConfig) -> Result<Option<Real>, ExperimentError> {
        self.scalar(key)?
            .map(|(line, s)| prec.parse_rational(&s).map_err(|e| err(Some(line), key, e.to_string())))
            .transpose()
    }

    fn point(&mut self, key: &str, prec: PrecisionConfig) -> Result<Option<Point>, ExperimentError> {
        self.scalar(key)?
            .map(|(line, s)| Point::parse(&s, prec).map_err(|e| err(Some(line), key, e.to_string())))
            .transpose()
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let mut f = Fields { map: parse_entries(text)? };

        let precision = match f.usize("precision_bits")? {
            Some(b) => PrecisionConfig::new(b).map_err(|e| err(None, "precision_bits", e.to_string()))?,
            None => PrecisionConfig::default(),
        };
        let prec = precision;
        let name = f.scalar("name")?.map_or_else(|| "run".to_string(), |(_, s)| s);
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return Err(err(None, "name", "use letters, digits, '-', '_' or '.'"));
        }

        let p = f.usize("p")?;
        let q = f.usize("q")?;
        let coeffs = f.list("coeffs")?;
        let (obj_line, obj) = f.scalar("objective")?.ok_or_else(|| err(None, "objective", "missing"))?;
        let objective = match obj.as_str() {
            "exampleA" => builtin_example_a(prec),
            "exampleB" => {
                let (p, q) = p.zip(q).ok_or_else(|| err(Some(obj_line), "objective", "exampleB needs p and q"))?;
                builtin_example_b(p, q, prec).map_err(|e| err(Some(obj_line), "objective", e.to_string()))?
            }
            "poly1d" => {
                let (line, cs) = coeffs.clone().ok_or_else(|| err(Some(obj_line), "coeffs", "poly1d needs coeffs"))?;
                let cs = cs
                    .iter()
                    .map(|c| prec.parse_rational(c).map_err(|e| err(Some(line), "coeffs", e.to_string())))
                    .collect::<Result<Vec<_>, _>>()?;
                ObjectiveSpec::poly1d(cs, prec)
            }
            other => return Err(err(Some(obj_line), "objective", format!("unknown objective {other:?}"))),
        };
        if obj != "poly1d" && coeffs.is_some() {
            return Err(err(None, "coeffs", "only used with poly1d"));
        }
        if obj != "exampleB" && q.is_some() {
            return Err(err(None, "q", "only used with exampleB"));
        }

        let max_iterations = f.usize("max_iterations")?.unwrap_or(500);
        let stop = StopRule { grad_tol: f.real("grad_tol", prec)?, dist_tol: f.real("dist_tol", prec)? };
        if stop.dist_tol.is_some() && objective.meta.is_none() {
            return Err(err(None, "dist_tol", "objective has no known minimizer"));
        }
        let solver_name = f.scalar("solver")?.map_or_else(|| "arp".to_string(), |(_, s)| s);
        let solver = match solver_name.as_str() {
            "arp" => SolverConfig::Arp(Self::arp(&mut f, prec, p, max_iterations, stop)?),
            "newton" => {
                if let Some(k) = ARP_ONLY.iter().find(|k| f.map.contains_key(**k)) {
                    return Err(err(Some(f.map[*k].line), k, "not used by the newton solver"));
                }
                SolverConfig::Newton(NewtonConfig { max_iterations, stop })
            }
            other => return Err(err(None, "solver", format!("unknown solver {other:?}"))),
        };

        let x0 = f.point("x0", prec)?.ok_or_else(|| err(None, "x0", "missing"))?;
        if x0.dim() != objective.dimension() {
            return Err(err(None, "x0", format!("dimension {} does not match the objective", x0.dim())));
        }
        let outputs = match f.list("outputs")? {
            None => vec![Output::TraceCsv],
            Some((line, v)) => {
                let mut out = v
                    .iter()
                    .map(|s| Output::from_name(s).ok_or_else(|| err(Some(line), "outputs", format!("unknown output {s:?}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                out.sort();
                out.dedup();
                out
            }
        };
        let error_metric = match f.scalar("error_metric")? {
            None => ErrorMetric::default(),
            Some((line, s)) => {
                ErrorMetric::from_name(&s).ok_or_else(|| err(Some(line), "error_metric", format!("unknown metric {s:?}")))?
            }
        };
        let needs_meta = outputs.iter().any(|o| matches!(o, Output::AuditReport | Output::Plotdata))
            || (error_metric != ErrorMetric::GradNorm && outputs.contains(&Output::OrderReport));
        if needs_meta && objective.meta.is_none() {
            return Err(err(None, "outputs", "requested outputs need a known minimizer"));
        }
        debug_assert!(f.map.is_empty(), "unconsumed keys {:?}", f.map.keys());
        Ok(ExperimentConfig { name, precision, objective, solver, x0, outputs, error_metric })
    }

    fn arp(
        f: &mut Fields,
        prec: PrecisionConfig,
        p: Option<usize>,
        max_iterations: usize,
        stop: StopRule,
    ) -> Result<ArpConfig, ExperimentError> {
        let p = p.ok_or_else(|| err(None, "p", "missing"))?;
        let reference = f.point("reference", prec)?;
        let policy = match f.scalar("policy")? {
            None => SelectionPolicy::LocalComponent,
            Some((line, s)) => match s.as_str() {
                "global" => SelectionPolicy::GlobalMin,
                "component" => SelectionPolicy::LocalComponent,
                "closed_form_b" => SelectionPolicy::ClosedFormExampleB,
                "nearest_ref" => SelectionPolicy::NearestToRef(
                    reference.clone().ok_or_else(|| err(Some(line), "reference", "nearest_ref needs a reference point"))?,
                ),
                other => return Err(err(Some(line), "policy", format!("unknown policy {other:?}"))),
            },
        };
        if reference.is_some() && !matches!(policy, SelectionPolicy::NearestToRef(_)) {
            return Err(err(None, "reference", "only used with the nearest_ref policy"));
        }
        let mut cfg = ArpConfig::standard(p, policy, prec);
        let eta = f.real("eta", prec)?;
        let (eta1, eta2) = (f.real("eta1", prec)?, f.real("eta2", prec)?);
        if eta.is_some() && (eta1.is_some() || eta2.is_some()) {
            return Err(err(None, "eta", "give either eta or eta1/eta2"));
        }
        if let Some(e) = eta {
            cfg.eta1 = e.clone();
            cfg.eta2 = e;
        }
        if let Some(e) = eta1 {
            cfg.eta1 = e;
        }
        if let Some(e) = eta2 {
            cfg.eta2 = e;
        }
        for (key, slot) in [
            ("gamma1", &mut cfg.gamma1),
            ("gamma2", &mut cfg.gamma2),
            ("theta", &mut cfg.theta),
            ("sigma0", &mut cfg.sigma0),
        ] {
            if let Some(v) = f.real(key, prec)? {
                *slot = v;
            }
        }
        cfg.sigma_min = f.real("sigma_min", prec)?;
        cfg.inner_tol = f.real("inner_tol", prec)?;
        cfg.max_iterations = max_iterations;
        cfg.stop = stop;
        cfg.validate().map_err(|e| err(None, "solver", e.to_string()))?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comma_separated_assignments() {
        let c = ExperimentConfig::parse(
            "objective = \"exampleB\", p = 4, q = 4 # trailing\npolicy = \"closed_form_b\"\ntheta = 3\nsigma0 = \"1/8\"\nx0 = \"0.1\"\n",
        )
        .unwrap();
        let a = c.solver.arp().unwrap();
        assert_eq!(a.p, 4);
        assert_eq!(a.sigma0, c.precision.ratio(1, 8));
        assert_eq!(c.outputs, vec![Output::TraceCsv]);
    }

    #[test]
    fn rejects_bad_input_with_location() {
        let e = ExperimentConfig::parse("objective = \"exampleA\"\np = 3\nx0 = \"1.1\"\nsigma0 = \"0.5.1\"\n").unwrap_err();
        match e {
            ExperimentError::Config { line, field, .. } => {
                assert_eq!(line, Some(4));
                assert_eq!(field, "sigma0");
            }
            other => panic!("{other:?}"),
        }
        assert!(ExperimentConfig::parse("objective = \"exampleA\"\nbogus = 1\n").is_err());
        assert!(ExperimentConfig::parse("objective = \"exampleA\", p = 3, x0 = 1, p = 4").is_err());
        let e = ExperimentConfig::parse("objective = \"exampleA\"\nsolver = \"newton\"\nx0 = 1\ntheta = 0\n").unwrap_err();
        assert!(e.to_string().contains("theta"), "{e}");
    }

    #[test]
    fn poly_objective_and_lists() {
        let c = ExperimentConfig::parse(
            "objective = \"poly1d\", coeffs = [\"0\", \"0\", \"1\"]\nsolver = \"newton\"\nx0 = \"1/3\"\noutputs = []\n",
        )
        .unwrap();
        assert!(c.outputs.is_empty());
        assert_eq!(c.x0.as_scalar(), &c.precision.ratio(1, 3));
        assert!(ExperimentConfig::parse("objective = \"poly1d\", coeffs = [\"0\", \"0\", \"1\"]\np = 2\nx0 = 1\noutputs = [\"plotdata\"]").is_err());
    }
}
