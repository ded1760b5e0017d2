use thiserror::Error;

use crate::regime::CriticalParamSelector;

/// Failures raised by the model, regime and risk computations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("parameter `{name}` must be finite and strictly positive, got {value}")]
    InvalidParam { name: &'static str, value: f64 },

    #[error("{quantity} leaves the floating-point range (natural log of magnitude = {log_magnitude:.6})")]
    DomainOverflow {
        quantity: &'static str,
        log_magnitude: f64,
    },

    #[error("interest rate fell below the underflow guard {guard:e} (ln i = {log_rate:.6})")]
    RateUnderflow { log_rate: f64, guard: f64 },

    #[error("composite exponent a = {a} is within {tolerance:e} of the bifurcation point a = 1")]
    AtBifurcation { a: f64, tolerance: f64 },

    #[error("closed-form deviation a^t * |ln(i0 / i_fix)| = {magnitude:e} exceeds the log-domain guard {guard}")]
    ExponentOverflow { magnitude: f64, guard: f64 },

    #[error("critical direction for {selector:?} is singular at i_t = {rate:e}")]
    SingularDenominator {
        selector: CriticalParamSelector,
        rate: f64,
    },

    #[error("critical direction Delta has negative radicand {radicand:e} at i_t = {rate:e}")]
    NegativeRadicand { radicand: f64, rate: f64 },
}

pub type Result<T> = std::result::Result<T, ModelError>;
