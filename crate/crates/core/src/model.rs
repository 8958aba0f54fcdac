//! Problem data: diffusion coefficients, payoffs, and the combined gain rate.
//!
//! A [`Problem`] bundles a one-dimensional diffusion
//! `dX = mu(t,X) dt + sigma(t,X) dW` with a flow payoff `f(t,x)` collected
//! while waiting and a terminal payoff `g(t,x)` collected on stopping.
//! The central derived quantity is the gain rate
//!
//! ```text
//! h(t,x) = f(t,x) + g_t(t,x) + mu(t,x) g_x(t,x) + 0.5 sigma(t,x)^2 g_xx(t,x)
//! ```
//!
//! which is the expected instantaneous benefit of waiting one more instant
//! before stopping. All downstream machinery (transfers, residuals, the
//! dynamic-programming cross-check) integrates `h` along paths, so the
//! partials of `g` are part of the problem statement rather than being
//! auto-differentiated; [`verify_partials`] offers a finite-difference
//! consistency diagnostic.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Evaluation failure of a user-supplied coefficient or payoff.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    /// A coefficient or partial returned a NaN or infinity.
    #[error("non-finite value {value} from {name} at (t={t}, x={x})")]
    NonFinite {
        name: &'static str,
        t: f64,
        x: f64,
        value: f64,
    },
}

/// Construction failure of a problem specification.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("lipschitz bound must be positive and finite, got {0}")]
    BadLipschitz(f64),
    #[error("diffusion horizon {diffusion} differs from payoff horizon {payoff}")]
    HorizonMismatch { diffusion: f64, payoff: f64 },
    #[error("monomial payoff needs power >= 1, got {0}")]
    BadMonomialPower(u32),
}

/// Coefficient function of time and state.
///
/// The named variants are the built-in families selectable from config
/// files; arbitrary coefficients are available through [`Coef::Custom`].
#[derive(Clone)]
pub enum Coef {
    /// Constant value.
    Constant(f64),
    /// `a + b * x`.
    Affine { a: f64, b: f64 },
    /// Mean-reverting drift `kappa * (theta - x)`.
    MeanReverting { kappa: f64, theta: f64 },
    /// `max(0, a + b * x)`; used for volatilities, which must stay nonnegative.
    AffineNonneg { a: f64, b: f64 },
    /// Arbitrary coefficient supplied programmatically.
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl Coef {
    pub fn zero() -> Self {
        Coef::Constant(0.0)
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            Coef::Constant(c) => *c,
            Coef::Affine { a, b } => a + b * x,
            Coef::MeanReverting { kappa, theta } => kappa * (theta - x),
            Coef::AffineNonneg { a, b } => (a + b * x).max(0.0),
            Coef::Custom(f) => f(t, x),
        }
    }

    /// Lipschitz constant in `x` for the built-in families; `None` for custom
    /// coefficients, which must declare their own bound.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            Coef::Constant(_) => Some(0.0),
            Coef::Affine { b, .. } | Coef::AffineNonneg { b, .. } => Some(b.abs()),
            Coef::MeanReverting { kappa, .. } => Some(kappa.abs()),
            Coef::Custom(_) => None,
        }
    }
}

impl fmt::Debug for Coef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coef::Constant(c) => write!(f, "Constant({c})"),
            Coef::Affine { a, b } => write!(f, "Affine({a} + {b}*x)"),
            Coef::MeanReverting { kappa, theta } => {
                write!(f, "MeanReverting({kappa}*({theta} - x))")
            }
            Coef::AffineNonneg { a, b } => write!(f, "AffineNonneg(max(0, {a} + {b}*x))"),
            Coef::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Terminal payoff `g` together with the partials `g_t`, `g_x`, `g_xx`.
#[derive(Clone)]
pub enum TerminalPayoff {
    /// `g = 0`.
    Zero,
    /// `g = scale * x^power`, `power >= 1`.
    Monomial { scale: f64, power: u32 },
    /// `g = x * (T - t)` with `T` the problem horizon.
    ProductTimeLeft,
    /// User-supplied payoff and partials.
    Custom {
        g: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
        g_t: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
        g_x: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
        g_xx: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    },
}

impl TerminalPayoff {
    #[inline]
    pub fn g(&self, t: f64, x: f64, horizon: f64) -> f64 {
        match self {
            TerminalPayoff::Zero => 0.0,
            TerminalPayoff::Monomial { scale, power } => scale * x.powi(*power as i32),
            TerminalPayoff::ProductTimeLeft => x * (horizon - t),
            TerminalPayoff::Custom { g, .. } => g(t, x),
        }
    }

    #[inline]
    pub fn g_t(&self, t: f64, x: f64, _horizon: f64) -> f64 {
        match self {
            TerminalPayoff::Zero | TerminalPayoff::Monomial { .. } => 0.0,
            TerminalPayoff::ProductTimeLeft => -x,
            TerminalPayoff::Custom { g_t, .. } => g_t(t, x),
        }
    }

    #[inline]
    pub fn g_x(&self, t: f64, x: f64, horizon: f64) -> f64 {
        match self {
            TerminalPayoff::Zero => 0.0,
            TerminalPayoff::Monomial { scale, power } => {
                scale * (*power as f64) * x.powi(*power as i32 - 1)
            }
            TerminalPayoff::ProductTimeLeft => horizon - t,
            TerminalPayoff::Custom { g_x, .. } => g_x(t, x),
        }
    }

    #[inline]
    pub fn g_xx(&self, t: f64, x: f64, _horizon: f64) -> f64 {
        match self {
            TerminalPayoff::Zero | TerminalPayoff::ProductTimeLeft => 0.0,
            TerminalPayoff::Monomial { scale, power } => {
                if *power < 2 {
                    0.0
                } else {
                    scale * (*power as f64) * (*power as f64 - 1.0) * x.powi(*power as i32 - 2)
                }
            }
            TerminalPayoff::Custom { g_xx, .. } => g_xx(t, x),
        }
    }
}

impl fmt::Debug for TerminalPayoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TerminalPayoff::Zero => write!(f, "Zero"),
            TerminalPayoff::Monomial { scale, power } => write!(f, "Monomial({scale}*x^{power})"),
            TerminalPayoff::ProductTimeLeft => write!(f, "ProductTimeLeft(x*(T-t))"),
            TerminalPayoff::Custom { .. } => write!(f, "Custom(..)"),
        }
    }
}

/// Diffusion coefficients with a declared Lipschitz bound and horizon.
#[derive(Debug, Clone)]
pub struct DiffusionSpec {
    pub mu: Coef,
    pub sigma: Coef,
    /// Declared joint Lipschitz constant of `(mu, sigma)` in `x`.
    pub lipschitz_bound: f64,
    /// Terminal time `T`.
    pub horizon: f64,
}

impl DiffusionSpec {
    pub fn new(mu: Coef, sigma: Coef, lipschitz_bound: f64, horizon: f64) -> Result<Self, ModelError> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(ModelError::BadHorizon(horizon));
        }
        if !(lipschitz_bound.is_finite() && lipschitz_bound > 0.0) {
            return Err(ModelError::BadLipschitz(lipschitz_bound));
        }
        Ok(Self { mu, sigma, lipschitz_bound, horizon })
    }
}

/// Flow payoff `f` and terminal payoff `g` with partials.
#[derive(Debug, Clone)]
pub struct PayoffSpec {
    pub flow: Coef,
    pub terminal: TerminalPayoff,
    pub horizon: f64,
}

impl PayoffSpec {
    pub fn new(flow: Coef, terminal: TerminalPayoff, horizon: f64) -> Result<Self, ModelError> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(ModelError::BadHorizon(horizon));
        }
        if let TerminalPayoff::Monomial { power, .. } = terminal {
            if power == 0 {
                return Err(ModelError::BadMonomialPower(power));
            }
        }
        Ok(Self { flow, terminal, horizon })
    }
}

/// Full problem data: diffusion plus payoffs on a shared horizon.
#[derive(Debug, Clone)]
pub struct Problem {
    pub diffusion: DiffusionSpec,
    pub payoff: PayoffSpec,
}

impl Problem {
    pub fn new(diffusion: DiffusionSpec, payoff: PayoffSpec) -> Result<Self, ModelError> {
        if diffusion.horizon != payoff.horizon {
            return Err(ModelError::HorizonMismatch {
                diffusion: diffusion.horizon,
                payoff: payoff.horizon,
            });
        }
        Ok(Self { diffusion, payoff })
    }

    #[inline]
    pub fn horizon(&self) -> f64 {
        self.diffusion.horizon
    }

    #[inline]
    pub fn mu(&self, t: f64, x: f64) -> f64 {
        self.diffusion.mu.eval(t, x)
    }

    #[inline]
    pub fn sigma(&self, t: f64, x: f64) -> f64 {
        self.diffusion.sigma.eval(t, x)
    }

    #[inline]
    pub fn flow(&self, t: f64, x: f64) -> f64 {
        self.payoff.flow.eval(t, x)
    }

    #[inline]
    pub fn g(&self, t: f64, x: f64) -> f64 {
        self.payoff.terminal.g(t, x, self.payoff.horizon)
    }

    /// Gain rate `h(t,x)` without finiteness checks; hot loops use this and
    /// fall back to [`Problem::gain_rate`] to name the offending function
    /// when the result is non-finite.
    #[inline]
    pub fn gain_rate_unchecked(&self, t: f64, x: f64) -> f64 {
        let horizon = self.payoff.horizon;
        self.payoff.flow.eval(t, x)
            + self.payoff.terminal.g_t(t, x, horizon)
            + self.diffusion.mu.eval(t, x) * self.payoff.terminal.g_x(t, x, horizon)
            + 0.5
                * self.diffusion.sigma.eval(t, x).powi(2)
                * self.payoff.terminal.g_xx(t, x, horizon)
    }

    /// Gain rate `h(t,x) = f + g_t + mu g_x + 0.5 sigma^2 g_xx`.
    ///
    /// Deterministic and pure; fails with the offending function name and
    /// point if any piece evaluates non-finite.
    pub fn gain_rate(&self, t: f64, x: f64) -> Result<f64, EvalError> {
        let horizon = self.payoff.horizon;
        let f = checked("flow payoff f", t, x, self.payoff.flow.eval(t, x))?;
        let g_t = checked("partial g_t", t, x, self.payoff.terminal.g_t(t, x, horizon))?;
        let g_x = checked("partial g_x", t, x, self.payoff.terminal.g_x(t, x, horizon))?;
        let g_xx = checked("partial g_xx", t, x, self.payoff.terminal.g_xx(t, x, horizon))?;
        let mu = checked("drift mu", t, x, self.diffusion.mu.eval(t, x))?;
        let sigma = checked("volatility sigma", t, x, self.diffusion.sigma.eval(t, x))?;
        let h = f + g_t + mu * g_x + 0.5 * sigma * sigma * g_xx;
        checked("gain rate h", t, x, h)
    }
}

#[inline]
fn checked(name: &'static str, t: f64, x: f64, value: f64) -> Result<f64, EvalError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(EvalError::NonFinite { name, t, x, value })
    }
}

/// One adjacent state pair on which `x -> h(t,x)` increases.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingViolation {
    pub t: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub h_lo: f64,
    pub h_hi: f64,
}

/// Outcome of the single-crossing grid check.
#[derive(Debug, Clone)]
pub struct SingleCrossingReport {
    /// `x -> h(t,x)` non-increasing on every sampled time slice.
    pub holds: bool,
    /// Strictly decreasing on every sampled time slice.
    pub holds_strictly: bool,
    /// Every adjacent pair violating monotonicity.
    pub violations: Vec<CrossingViolation>,
}

/// Checks that `x -> h(t,x)` is non-increasing on the given grid.
///
/// The condition is a hypothesis of everything downstream, not a theorem this
/// toolkit can prove, so violations are reported pair by pair instead of
/// failing silently. States must be sorted ascending.
pub fn check_single_crossing(
    problem: &Problem,
    times: &[f64],
    states: &[f64],
) -> Result<SingleCrossingReport, EvalError> {
    let mut violations = Vec::new();
    let mut holds_strictly = true;
    for &t in times {
        for pair in states.windows(2) {
            let (x_lo, x_hi) = (pair[0], pair[1]);
            let h_lo = problem.gain_rate(t, x_lo)?;
            let h_hi = problem.gain_rate(t, x_hi)?;
            if h_hi > h_lo {
                violations.push(CrossingViolation { t, x_lo, x_hi, h_lo, h_hi });
            }
            if h_hi >= h_lo {
                holds_strictly = false;
            }
        }
    }
    Ok(SingleCrossingReport { holds: violations.is_empty(), holds_strictly, violations })
}

/// Worst absolute deviations between supplied partials of `g` and central
/// finite differences, over the given sample points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialsCheck {
    pub max_err_g_t: f64,
    pub max_err_g_x: f64,
    pub max_err_g_xx: f64,
}

/// Finite-difference consistency diagnostic for the partials of `g`.
pub fn verify_partials(payoff: &PayoffSpec, points: &[(f64, f64)], delta: f64) -> PartialsCheck {
    let horizon = payoff.horizon;
    let g = |t: f64, x: f64| payoff.terminal.g(t, x, horizon);
    let mut check = PartialsCheck { max_err_g_t: 0.0, max_err_g_x: 0.0, max_err_g_xx: 0.0 };
    for &(t, x) in points {
        let fd_t = (g(t + delta, x) - g(t - delta, x)) / (2.0 * delta);
        let fd_x = (g(t, x + delta) - g(t, x - delta)) / (2.0 * delta);
        let fd_xx = (g(t, x + delta) - 2.0 * g(t, x) + g(t, x - delta)) / (delta * delta);
        check.max_err_g_t = check.max_err_g_t.max((fd_t - payoff.terminal.g_t(t, x, horizon)).abs());
        check.max_err_g_x = check.max_err_g_x.max((fd_x - payoff.terminal.g_x(t, x, horizon)).abs());
        check.max_err_g_xx =
            check.max_err_g_xx.max((fd_xx - payoff.terminal.g_xx(t, x, horizon)).abs());
    }
    check
}

// ---------------------------------------------------------------------------
// Config-file schema for the built-in families.
// ---------------------------------------------------------------------------

/// Declarative problem description loadable from a TOML config file.
///
/// ```toml
/// horizon = 1.0
/// # lipschitz_bound = 2.0   # optional; derived from the families if absent
///
/// [drift]
/// family = "constant"       # constant | affine | mean_reverting
/// value = 0.0
///
/// [volatility]
/// family = "constant"       # constant | affine  (affine is clipped at zero)
/// value = 1.0
///
/// [flow]
/// family = "affine"         # zero | constant | affine
/// a = 0.0
/// b = -1.0
///
/// [terminal]
/// family = "monomial"       # zero | monomial | product
/// scale = 1.0
/// power = 2
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub horizon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lipschitz_bound: Option<f64>,
    pub drift: CoefConfig,
    pub volatility: CoefConfig,
    pub flow: CoefConfig,
    pub terminal: TerminalConfig,
}

/// One coefficient family in a config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefConfig {
    Zero,
    Constant { value: f64 },
    Affine { a: f64, b: f64 },
    MeanReverting { kappa: f64, theta: f64 },
}

impl CoefConfig {
    fn to_coef(&self, nonneg: bool) -> Coef {
        match *self {
            CoefConfig::Zero => Coef::Constant(0.0),
            CoefConfig::Constant { value } => Coef::Constant(value),
            CoefConfig::Affine { a, b } => {
                if nonneg {
                    Coef::AffineNonneg { a, b }
                } else {
                    Coef::Affine { a, b }
                }
            }
            CoefConfig::MeanReverting { kappa, theta } => Coef::MeanReverting { kappa, theta },
        }
    }
}

/// Terminal payoff family in a config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum TerminalConfig {
    Zero,
    Monomial { scale: f64, power: u32 },
    /// `g = x * (T - t)`.
    Product,
}

impl TerminalConfig {
    fn to_terminal(&self) -> TerminalPayoff {
        match *self {
            TerminalConfig::Zero => TerminalPayoff::Zero,
            TerminalConfig::Monomial { scale, power } => TerminalPayoff::Monomial { scale, power },
            TerminalConfig::Product => TerminalPayoff::ProductTimeLeft,
        }
    }
}

#[derive(Debug, Error)]
pub enum ProblemConfigError {
    #[error("failed to parse problem config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl ProblemConfig {
    pub fn from_toml(text: &str) -> Result<Self, ProblemConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Builds the problem; the Lipschitz bound defaults to the sum of the
    /// family bounds (with a small positivity floor) when not declared.
    pub fn build(&self) -> Result<Problem, ProblemConfigError> {
        let mu = self.drift.to_coef(false);
        let sigma = self.volatility.to_coef(true);
        let lipschitz = self.lipschitz_bound.unwrap_or_else(|| {
            let l = mu.lipschitz().unwrap_or(0.0) + sigma.lipschitz().unwrap_or(0.0);
            l.max(1e-9)
        });
        let diffusion = DiffusionSpec::new(mu, sigma, lipschitz, self.horizon)?;
        let payoff =
            PayoffSpec::new(self.flow.to_coef(false), self.terminal.to_terminal(), self.horizon)?;
        Ok(Problem::new(diffusion, payoff)?)
    }
}

// ---------------------------------------------------------------------------
// Ready-made problems used across tests and benchmarks.
// ---------------------------------------------------------------------------

/// Driftless Brownian motion with volatility `sigma` and payoff `g = x^2`.
pub fn bm_squared_payoff(sigma: f64, horizon: f64) -> Problem {
    let diffusion =
        DiffusionSpec::new(Coef::zero(), Coef::Constant(sigma), 1.0, horizon).expect("valid");
    let payoff =
        PayoffSpec::new(Coef::zero(), TerminalPayoff::Monomial { scale: 1.0, power: 2 }, horizon)
            .expect("valid");
    Problem::new(diffusion, payoff).expect("valid")
}

/// Driftless Brownian motion with volatility `sigma`, flow payoff `f = -x`.
pub fn bm_linear_flow(sigma: f64, horizon: f64) -> Problem {
    let diffusion =
        DiffusionSpec::new(Coef::zero(), Coef::Constant(sigma), 1.0, horizon).expect("valid");
    let payoff =
        PayoffSpec::new(Coef::Affine { a: 0.0, b: -1.0 }, TerminalPayoff::Zero, horizon)
            .expect("valid");
    Problem::new(diffusion, payoff).expect("valid")
}

/// Static problem (`mu = sigma = 0`) with flow payoff `f = -x`.
pub fn static_linear_flow(horizon: f64) -> Problem {
    let diffusion = DiffusionSpec::new(Coef::zero(), Coef::zero(), 1.0, horizon).expect("valid");
    let payoff =
        PayoffSpec::new(Coef::Affine { a: 0.0, b: -1.0 }, TerminalPayoff::Zero, horizon)
            .expect("valid");
    Problem::new(diffusion, payoff).expect("valid")
}

/// Driftless unit-volatility Brownian motion with payoff `g = x (T - t)`.
pub fn bm_product_payoff(horizon: f64) -> Problem {
    let diffusion =
        DiffusionSpec::new(Coef::zero(), Coef::Constant(1.0), 1.0, horizon).expect("valid");
    let payoff =
        PayoffSpec::new(Coef::zero(), TerminalPayoff::ProductTimeLeft, horizon).expect("valid");
    Problem::new(diffusion, payoff).expect("valid")
}
