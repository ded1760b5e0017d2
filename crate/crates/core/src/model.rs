//! Credit-market dynamics: loans, defaults and the interest-rate recurrence.
//!
//! The unified model couples three quantities at every step:
//!
//! ```text
//! N(t)   = (i(t) / k)^(-mu)
//! D(t)   = (i(t) / l)^(nu)
//! i(t+1) = D(t)^beta / N(t)^alpha
//! ```
//!
//! Substituting the first two equations into the third gives a one-dimensional
//! power-law recurrence `ln i(t+1) = a ln i(t) + ln c` with composite exponent
//! `a = alpha*mu + beta*nu` and constant `c = l^(-beta*nu) k^(-alpha*mu)`.
//! Everything here works on logarithms and only exponentiates at the output
//! boundary: `a^t` overflows doubles quickly once `a > 1`.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{ModelError, Result};

/// Numerical tolerances and guards shared by every operation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Guards {
    /// `|a - 1| <= eps_a` is treated as the bifurcation point.
    pub eps_a: f64,
    /// `|ln i0 - ln i_fix| <= eps_pos` is treated as sitting on the fixed point.
    pub eps_pos: f64,
    /// `|ln c| <= eps_c` is treated as `c = 1` at the bifurcation point.
    pub eps_c: f64,
    /// Rates below this raise [`ModelError::RateUnderflow`].
    pub min_rate: f64,
    /// Largest natural-log magnitude allowed before exponentiation.
    pub log_guard: f64,
}

impl Default for Guards {
    fn default() -> Self {
        Guards {
            eps_a: 1e-12,
            eps_pos: 1e-12,
            eps_c: 1e-12,
            min_rate: 1e-300,
            log_guard: 700.0,
        }
    }
}

/// Names of the six model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamName {
    Alpha,
    Beta,
    Mu,
    Nu,
    K,
    L,
}

impl ParamName {
    pub const ALL: [ParamName; 6] = [
        ParamName::Alpha,
        ParamName::Beta,
        ParamName::Mu,
        ParamName::Nu,
        ParamName::K,
        ParamName::L,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ParamName::Alpha => "alpha",
            ParamName::Beta => "beta",
            ParamName::Mu => "mu",
            ParamName::Nu => "nu",
            ParamName::K => "k",
            ParamName::L => "l",
        }
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ParamName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown parameter `{s}`"))
    }
}

/// The six strictly positive model parameters.
///
/// `alpha`/`beta` are the interest-rate sensitivities to loans and defaults,
/// `mu`/`nu` the elasticities of credit demand and defaults, `k`/`l` scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct Params {
    alpha: f64,
    beta: f64,
    mu: f64,
    nu: f64,
    k: f64,
    l: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    alpha: f64,
    beta: f64,
    mu: f64,
    nu: f64,
    k: f64,
    l: f64,
}

impl TryFrom<RawParams> for Params {
    type Error = ModelError;

    fn try_from(r: RawParams) -> Result<Self> {
        Params::new(r.alpha, r.beta, r.mu, r.nu, r.k, r.l)
    }
}

impl From<Params> for RawParams {
    fn from(p: Params) -> Self {
        RawParams {
            alpha: p.alpha,
            beta: p.beta,
            mu: p.mu,
            nu: p.nu,
            k: p.k,
            l: p.l,
        }
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ModelError::InvalidParam { name, value })
    }
}

impl Params {
    pub fn new(alpha: f64, beta: f64, mu: f64, nu: f64, k: f64, l: f64) -> Result<Self> {
        let p = Params {
            alpha: check_positive("alpha", alpha)?,
            beta: check_positive("beta", beta)?,
            mu: check_positive("mu", mu)?,
            nu: check_positive("nu", nu)?,
            k: check_positive("k", k)?,
            l: check_positive("l", l)?,
        };
        let a = p.composite_exponent();
        if !a.is_finite() {
            return Err(ModelError::DomainOverflow {
                quantity: "composite exponent",
                log_magnitude: f64::INFINITY,
            });
        }
        Ok(p)
    }

    /// Parameters with `k = l` chosen so that the fixed point equals `i_fix`.
    ///
    /// Handy for reproducing fixtures quoted as `(a, i_fix)` pairs.
    pub fn with_fixed_point(alpha: f64, beta: f64, mu: f64, nu: f64, i_fix: f64) -> Result<Self> {
        check_positive("i_fix", i_fix)?;
        let a = alpha * mu + beta * nu;
        if (a - 1.0).abs() <= Guards::default().eps_a {
            return Err(ModelError::AtBifurcation {
                a,
                tolerance: Guards::default().eps_a,
            });
        }
        // ln i_fix = -a ln s / (1 - a) for a common scale s
        let scale = (i_fix.ln() * (a - 1.0) / a).exp();
        Params::new(alpha, beta, mu, nu, scale, scale)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn get(&self, name: ParamName) -> f64 {
        match name {
            ParamName::Alpha => self.alpha,
            ParamName::Beta => self.beta,
            ParamName::Mu => self.mu,
            ParamName::Nu => self.nu,
            ParamName::K => self.k,
            ParamName::L => self.l,
        }
    }

    /// Returns a copy with one parameter replaced, re-validating positivity.
    pub fn with(&self, name: ParamName, value: f64) -> Result<Self> {
        let mut p = *self;
        match name {
            ParamName::Alpha => p.alpha = value,
            ParamName::Beta => p.beta = value,
            ParamName::Mu => p.mu = value,
            ParamName::Nu => p.nu = value,
            ParamName::K => p.k = value,
            ParamName::L => p.l = value,
        }
        Params::new(p.alpha, p.beta, p.mu, p.nu, p.k, p.l)
    }

    /// `a = alpha*mu + beta*nu`.
    pub fn composite_exponent(&self) -> f64 {
        self.alpha * self.mu + self.beta * self.nu
    }
}

/// A snapshot `(t, i, N, D)` that is consistent with the parameters it was built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarketState {
    t: u64,
    i: f64,
    n_loans: f64,
    d_defaults: f64,
}

impl MarketState {
    /// Builds the state at rate `i`, deriving loans and defaults from `p`.
    pub fn at_rate(t: u64, i: f64, p: &Params) -> Result<Self> {
        check_positive("i", i)?;
        Ok(MarketState {
            t,
            i,
            n_loans: loans_from_rate(i, p)?,
            d_defaults: defaults_from_rate(i, p)?,
        })
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn rate(&self) -> f64 {
        self.i
    }

    pub fn loans(&self) -> f64 {
        self.n_loans
    }

    pub fn defaults(&self) -> f64 {
        self.d_defaults
    }
}

fn exp_checked(quantity: &'static str, log_value: f64) -> Result<f64> {
    let v = log_value.exp();
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ModelError::DomainOverflow {
            quantity,
            log_magnitude: log_value,
        })
    }
}

/// `N = (i / k)^(-mu)`.
pub fn loans_from_rate(i: f64, p: &Params) -> Result<f64> {
    check_positive("i", i)?;
    exp_checked("loan volume N", -p.mu * (i.ln() - p.k.ln()))
}

/// `D = (i / l)^nu`.
pub fn defaults_from_rate(i: f64, p: &Params) -> Result<f64> {
    check_positive("i", i)?;
    exp_checked("default volume D", p.nu * (i.ln() - p.l.ln()))
}

/// `i' = D^beta / N^alpha`.
pub fn next_rate(n: f64, d: f64, p: &Params) -> Result<f64> {
    check_positive("n", n)?;
    check_positive("d", d)?;
    exp_checked("interest rate", p.beta * d.ln() - p.alpha * n.ln())
}

/// `a = alpha*mu + beta*nu`.
pub fn composite_exponent(p: &Params) -> f64 {
    p.composite_exponent()
}

/// Per-step log growth `ln i(t+1) - ln i(t)` at `ln i = log_rate`.
///
/// This is `alpha*mu*(ln i - ln k) + beta*nu*(ln i - ln l) - ln i`, the bracket
/// of the position inequality. Its sign says whether the rate moves up or down.
pub fn position_expression(log_rate: f64, p: &Params) -> f64 {
    p.alpha * p.mu * (log_rate - p.k.ln()) + p.beta * p.nu * (log_rate - p.l.ln()) - log_rate
}

/// Advances one step. Depends only on `s.rate()` and `p`, never on `s.t()`.
pub fn step(s: &MarketState, p: &Params) -> Result<MarketState> {
    step_with(s, p, &Guards::default())
}

pub fn step_with(s: &MarketState, p: &Params, guards: &Guards) -> Result<MarketState> {
    let log_i = s.i.ln();
    let growth = position_expression(log_i, p);
    let log_next = log_i + growth;
    if log_next.is_nan() || log_next > guards.log_guard {
        return Err(ModelError::DomainOverflow {
            quantity: "interest rate",
            log_magnitude: log_next,
        });
    }
    if log_next < guards.min_rate.ln() {
        return Err(ModelError::RateUnderflow {
            log_rate: log_next,
            guard: guards.min_rate,
        });
    }
    // multiplicative update keeps i exactly constant when the growth is exactly 0
    let i_next = if growth.abs() < guards.log_guard {
        s.i * growth.exp()
    } else {
        log_next.exp()
    };
    if i_next < guards.min_rate {
        return Err(ModelError::RateUnderflow {
            log_rate: log_next,
            guard: guards.min_rate,
        });
    }
    MarketState::at_rate(s.t + 1, i_next, p)
}

/// `ln c = -beta*nu ln l - alpha*mu ln k`.
pub fn log_bifurcation_constant(p: &Params) -> f64 {
    -p.beta * p.nu * p.l.ln() - p.alpha * p.mu * p.k.ln()
}

/// `c = l^(-beta*nu) k^(-alpha*mu)`; at `a = 1` the rate evolves as `c^t i0`.
pub fn bifurcation_constant(p: &Params) -> f64 {
    log_bifurcation_constant(p).exp()
}

/// Natural log of the fixed point, `ln c / (1 - a)`.
pub fn log_fixed_point(p: &Params, guards: &Guards) -> Result<f64> {
    let a = p.composite_exponent();
    if (a - 1.0).abs() <= guards.eps_a {
        return Err(ModelError::AtBifurcation {
            a,
            tolerance: guards.eps_a,
        });
    }
    Ok((-p.alpha * p.mu * p.k.ln() - p.beta * p.nu * p.l.ln()) / (1.0 - a))
}

/// `i_fix = (k^(-alpha*mu) l^(-beta*nu))^(1 / (1 - a))`.
pub fn fixed_point(p: &Params) -> Result<f64> {
    fixed_point_with(p, &Guards::default())
}

pub fn fixed_point_with(p: &Params, guards: &Guards) -> Result<f64> {
    exp_checked("fixed point", log_fixed_point(p, guards)?)
}

/// Closed-form rate `i(t) = i_fix (i0 / i_fix)^(a^t)`, evaluated in log domain.
pub fn rate_at(t: u64, i0: f64, p: &Params) -> Result<f64> {
    rate_at_with(t, i0, p, &Guards::default())
}

pub fn rate_at_with(t: u64, i0: f64, p: &Params, guards: &Guards) -> Result<f64> {
    check_positive("i0", i0)?;
    let log_fix = log_fixed_point(p, guards)?;
    if t == 0 {
        return Ok(i0);
    }
    let deviation = i0.ln() - log_fix;
    if deviation == 0.0 {
        return exp_checked("interest rate", log_fix);
    }
    let a = p.composite_exponent();
    let scale = match i32::try_from(t) {
        Ok(n) => a.powi(n),
        Err(_) => a.powf(t as f64),
    };
    let magnitude = scale * deviation.abs();
    if magnitude.is_nan() || magnitude > guards.log_guard {
        return Err(ModelError::ExponentOverflow {
            magnitude,
            guard: guards.log_guard,
        });
    }
    exp_checked("interest rate", log_fix + scale * deviation)
}

/// Rate at the bifurcation point `a = 1`: `i(t) = c^t i0`.
pub fn bifurcation_rate_at(t: u64, i0: f64, p: &Params) -> Result<f64> {
    check_positive("i0", i0)?;
    let log_growth = t as f64 * log_bifurcation_constant(p);
    if log_growth == 0.0 {
        return Ok(i0);
    }
    exp_checked("interest rate", i0.ln() + log_growth)
}

/// Expected return of a zero-recovery loan priced at rate `i`: `r = -i`.
pub fn expected_return(i: f64) -> Result<f64> {
    check_positive("i", i)?;
    Ok(-i)
}

/// Which of the two original single-accelerator systems to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LegacyVariant {
    /// `N = (i/k)^(-mu)`, `i' = i0 N^(-alpha)`.
    LoanAccelerator,
    /// `D = (i/k)^beta`, `i' = i0 D^alpha`.
    CrisisAccelerator,
}

/// Parameters of the original i0-anchored models.
///
/// `exponent` is `mu` for the loan accelerator and `beta` for the crisis
/// accelerator. Exponents may be zero here, which the unified model forbids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegacyMweParams {
    pub variant: LegacyVariant,
    pub i0: f64,
    pub alpha: f64,
    pub exponent: f64,
    pub k: f64,
}

impl LegacyMweParams {
    pub fn new(variant: LegacyVariant, i0: f64, alpha: f64, exponent: f64, k: f64) -> Result<Self> {
        check_positive("i0", i0)?;
        check_positive("k", k)?;
        for (name, v) in [("alpha", alpha), ("exponent", exponent)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ModelError::InvalidParam { name, value: v });
            }
        }
        Ok(LegacyMweParams {
            variant,
            i0,
            alpha,
            exponent,
            k,
        })
    }

    /// Power of `i` in the one-step map `i' = i0 (i/k)^e`.
    pub fn rate_exponent(&self) -> f64 {
        self.alpha * self.exponent
    }
}

/// One step of the legacy model.
pub fn legacy_mwe_step(i: f64, lp: &LegacyMweParams) -> Result<f64> {
    check_positive("i", i)?;
    let log_ratio = i.ln() - lp.k.ln();
    let log_next = match lp.variant {
        LegacyVariant::LoanAccelerator => {
            let log_n = -lp.exponent * log_ratio;
            lp.i0.ln() - lp.alpha * log_n
        }
        LegacyVariant::CrisisAccelerator => {
            let log_d = lp.exponent * log_ratio;
            lp.i0.ln() + lp.alpha * log_d
        }
    };
    if log_next == lp.i0.ln() {
        return Ok(lp.i0);
    }
    exp_checked("interest rate", log_next)
}

/// `(i0 k^(-e))^(1 / (1 - e))` with `e = alpha*mu` (loan) or `alpha*beta` (crisis).
pub fn legacy_mwe_fixed_point(lp: &LegacyMweParams) -> Result<f64> {
    let e = lp.rate_exponent();
    let eps = Guards::default().eps_a;
    if (e - 1.0).abs() <= eps {
        return Err(ModelError::AtBifurcation {
            a: e,
            tolerance: eps,
        });
    }
    exp_checked("fixed point", (lp.i0.ln() - e * lp.k.ln()) / (1.0 - e))
}
