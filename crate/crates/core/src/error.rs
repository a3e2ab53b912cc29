use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("root finder did not converge: {0}")]
    NonConvergence(String),
    #[error("multi-stable potential: beta = {beta} >= 1/M = {limit}")]
    MultiStableRegime { beta: f64, limit: f64 },
    #[error("unstable potential: renormalized c2 = {0} <= 0")]
    UnstablePotential(f64),
    #[error("fit diverged: {0}")]
    FitDiverged(String),
    #[error("dispersive approximation violated: |g/Δ| = {ratio:.3} for {mode}")]
    DispersiveViolation { mode: String, ratio: f64 },
    #[error("resonant denominator {value_mhz:.4} MHz below guard {guard_mhz} MHz ({context})")]
    ResonantDenominator { context: String, value_mhz: f64, guard_mhz: f64 },
    #[error("pump amplitude |xi| = {xi} at or above critical {xi_crit}")]
    AmplitudeAboveCritical { xi: f64, xi_crit: f64 },
    #[error("truncation error: {0}")]
    TruncationError(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("integrator step size underflow at t = {t} (h = {h})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("calibration ambiguity: residual branch rotation {0} rad")]
    CalibrationAmbiguity(f64),
    #[error("singular confusion matrix (t = f = {0})")]
    SingularConfusion(f64),
    #[error("inconsistent channels: {0}")]
    InconsistentChannels(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
