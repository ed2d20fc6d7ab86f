use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("tail exponent alpha = {0} must exceed 1 (the Pareto tail is not normalizable otherwise)")]
    NonNormalizableTail(f64),

    #[error("firm {firm} asks for {degree} distinct suppliers but only {available} other firms exist")]
    TooManySuppliers {
        firm: usize,
        degree: usize,
        available: usize,
    },

    #[error("edge list row {row}: {reason}")]
    Ingest { row: usize, reason: String },

    #[error("firm {firm} has no suppliers; its column cannot be rescaled to 1 - beta")]
    ZeroColumn { firm: usize },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("network is not primitive: Perron vector has entry {entry:e} at firm {firm}")]
    NotPrimitive { firm: usize, entry: f64 },

    #[error("network splits into {classes} closed supplier groups (firm {firm} is outside the first); the Perron root is not simple")]
    Reducible { classes: usize, firm: usize },

    #[error("no spectral gap: deflated eigenvalue {lambda2} coincides with the Perron root {lambda1}")]
    NoSpectralGap { lambda1: f64, lambda2: f64 },

    #[error("dominant transient eigenvalue is a complex pair (modulus {modulus}); two-mode reductions need a real lambda2, use a network-level simulation instead")]
    ComplexTransient { modulus: f64 },

    #[error("left/right transient pair is defective (u2'v2 = {0:e})")]
    DefectivePair(f64),

    #[error("degree proxy is degenerate: degrees have zero variance")]
    DegenerateProxy,

    #[error("log-derivative undefined: aggregate loading b(alpha) is zero")]
    ZeroLoading,

    #[error("`{name}` = {value} outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("non-positive {what} at firm {firm}, date {date}")]
    NonPositiveState {
        what: &'static str,
        firm: usize,
        date: usize,
    },

    #[error("trace identity violated: {identity} (expected {expected}, got {observed})")]
    TraceIdentity {
        identity: &'static str,
        expected: f64,
        observed: f64,
    },

    #[error("eigenvalue ordering changes inside the differencing step even after {halvings} halvings (last step {step:e})")]
    EigenvalueCrossing { halvings: usize, step: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
