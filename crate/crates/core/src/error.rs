use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("density must be finite and nonnegative, got {value} at s = {at}")]
    InvalidDensity { at: f64, value: f64 },

    #[error("time step {dt:e} exceeds stability limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("invariant `{name}` breached at x = {x}, t = {t}: value {value:e}, bound {bound:e}")]
    InvariantBreach {
        name: &'static str,
        x: f64,
        t: f64,
        value: f64,
        bound: f64,
    },

    #[error("singular evaluation at X = {0:e}")]
    Singular(f64),

    #[error("characteristics cross at t = {0}; no classical solution to reconstruct")]
    Crossing(f64),

    #[error("query x = {x} outside swept range [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },

    #[error("representation fit failed: residual {residual:e} above {threshold:e}")]
    RepresentationFailure { residual: f64, threshold: f64 },

    #[error("input is not completely monotone at order {order} (worst violation {worst:e})")]
    NotCompletelyMonotone { order: usize, worst: f64 },

    #[error("need at least {needed} samples, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("initial data differ by {sup:e} (tolerance {tol:e})")]
    IncompatibleInitialData { sup: f64, tol: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
