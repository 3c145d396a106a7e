use serde::Serialize;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, Serialize)]
#[serde(tag = "error", content = "detail", rename_all = "snake_case")]
pub enum Error {
    #[error("non-finite value in {context}")]
    NonFinite { context: String },
    #[error("zero velocity where a nonzero vector is required")]
    ZeroVelocity,
    #[error("degenerate metric: F = {value} at x = {x:?}")]
    DegenerateMetric { value: f64, x: [f64; 2] },
    #[error("step rejected: relative energy drift {drift:e} at t = {t}")]
    StepRejected { drift: f64, t: f64 },
    #[error("chart mismatch: {0}")]
    ChartMismatch(String),
    #[error("zero speed at sample {index}")]
    ZeroSpeed { index: usize },
    #[error("graph too large: {edges} edges")]
    OutOfMemory { edges: u64 },
    #[error("energy {k} is below the critical value (negative cycle)")]
    SubcriticalEnergy { k: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("sample too short: length {length} < {required}")]
    TooShort { length: f64, required: f64 },
    #[error("bad asymptotics: endpoint distance {distance:e}")]
    BadAsymptotics { distance: f64 },
    #[error("no gap: the bounding periodic minimizers coincide")]
    NoGap,
    #[error("constraint set is empty: {0}")]
    ConstraintInfeasible(String),
    #[error("multivalued field at {x:?}: angle spread {spread}")]
    MultiValued { x: [f64; 2], spread: f64 },
    #[error("step budget exceeded: {steps} > {cap}")]
    BudgetExceeded { steps: f64, cap: f64 },
    #[error("profile ODE left its domain at t = {t}")]
    BlowUp { t: f64 },
    #[error("strict convexity lost: min eigenvalue {min_eig:e}")]
    ConvexityLost { min_eig: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoConvergence { .. } | Error::StepRejected { .. } => 3,
            _ => 2,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).unwrap_or(serde_json::Value::Null);
        if let serde_json::Value::Object(m) = &mut v {
            m.insert("message".into(), serde_json::Value::String(self.to_string()));
            m.insert("exit_code".into(), self.exit_code().into());
        }
        v
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn finite(x: f64, context: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite { context: context.to_string() })
    }
}
