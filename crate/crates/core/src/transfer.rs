//! The transfer that makes a given cut-off barrier optimal.
//!
//! For a regular barrier `b` the implementing transfer is
//!
//! ```text
//! pi(t) = E[ int_t^T h(s, Xr_s) ds ],    Xr started on the barrier: Xr_t = b(t),
//! ```
//!
//! with `h` the gain rate and `Xr` the diffusion reflected below `b`. The
//! Monte Carlo estimator averages the trapezoidal time integral of `h` along
//! reflected paths; the integrand is evaluated at reflected states. `pi` is
//! anchored by `pi(T) = 0`, which pins the transfer uniquely.
//!
//! In the driftless Brownian case with a constant barrier the reflected
//! process has the explicit law `Xr_s ~ b - sigma |W_{s-t}|`, giving the
//! quadrature representation
//!
//! ```text
//! pi(t) = int_t^T int_0^inf sqrt(2 / (pi (s-t))) exp(-y^2 / (2 (s-t)))
//!         h(s, b - sigma y) dy ds
//! ```
//!
//! implemented in [`bm_closed_form`] as a cross-check on the simulation.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::barrier::{Barrier, BarrierError};
use crate::model::{Coef, Problem};
use crate::paths::{subseed, NoiseStream, PathIntegrator, SimError, TimeGrid};

#[derive(Debug, Clone, Error)]
pub enum TransferError {
    #[error("evaluation time {t} outside [0, {horizon}]")]
    BadTime { t: f64, horizon: f64 },
    #[error("need at least 2 paths for a standard error, got {0}")]
    TooFewPaths(usize),
    #[error("max step must be positive and finite, got {0}")]
    BadMaxStep(f64),
    #[error("closed form requires a driftless constant-volatility problem: {0}")]
    NotBrownian(String),
    #[error("curve file parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("curve arrays inconsistent: {0}")]
    BadCurve(String),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Monte Carlo configuration: path count, base seed, and the largest
/// simulation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub max_step: f64,
}

impl McConfig {
    pub fn new(n_paths: usize, seed: u64, max_step: f64) -> Result<Self, TransferError> {
        if n_paths < 2 {
            return Err(TransferError::TooFewPaths(n_paths));
        }
        if !(max_step.is_finite() && max_step > 0.0) {
            return Err(TransferError::BadMaxStep(max_step));
        }
        Ok(Self { n_paths, seed, max_step })
    }

    pub(crate) fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Sample mean and standard error, reduced in index order so results are
/// independent of worker scheduling.
pub(crate) fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs one path functional over `cfg.n_paths` independent noise streams in
/// parallel and reduces sequentially.
pub(crate) fn monte_carlo<F>(cfg: &McConfig, per_path: F) -> Result<(f64, f64), SimError>
where
    F: Fn(&mut ChaCha8Rng) -> Result<f64, SimError> + Sync,
{
    let values: Result<Vec<f64>, SimError> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = NoiseStream::new(cfg.seed, i).rng();
            per_path(&mut rng)
        })
        .collect();
    Ok(mean_stderr(&values?))
}

/// Estimates `pi(t)` for the barrier `b`: the expected integral of the gain
/// rate along a reflected path started at `b(t)`.
///
/// Returns `(mean, stderr)`; `t = T` returns `(0, 0)` exactly (empty
/// integral, the anchoring convention).
pub fn transfer_at(
    problem: &Problem,
    barrier: &Barrier,
    t: f64,
    cfg: &McConfig,
) -> Result<(f64, f64), TransferError> {
    let horizon = problem.horizon();
    if !(0.0..=horizon).contains(&t) {
        return Err(TransferError::BadTime { t, horizon });
    }
    if t == horizon {
        return Ok((0.0, 0.0));
    }
    let grid = TimeGrid::with_anchors(
        t,
        horizon,
        cfg.max_step,
        &barrier.knot_times_within(t, horizon),
    )
    .map_err(SimError::from)?;
    let integrator = PathIntegrator::new(barrier, &grid)?;
    let xi = barrier.eval(t)?;
    Ok(monte_carlo(cfg, |rng| integrator.reflected_gain(problem, xi, rng))?)
}

/// Estimated transfer on a time grid with per-point standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferCurve {
    pub times: Vec<f64>,
    pub pi: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl TransferCurve {
    pub fn new(times: Vec<f64>, pi: Vec<f64>, stderr: Vec<f64>) -> Result<Self, TransferError> {
        if times.len() != pi.len() || times.len() != stderr.len() {
            return Err(TransferError::BadCurve("length mismatch".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(TransferError::BadCurve("times must be strictly increasing".into()));
        }
        if stderr.iter().any(|&s| s.is_nan() || s < 0.0) {
            return Err(TransferError::BadCurve("stderr must be nonnegative".into()));
        }
        Ok(Self { times, pi, stderr })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Right-continuous step value at `t`: the entry of the latest node at or
    /// before `t` (the first node's value before that).
    pub fn value_at(&self, t: f64) -> f64 {
        match self.times.binary_search_by(|p| p.partial_cmp(&t).expect("finite")) {
            Ok(i) => self.pi[i],
            Err(0) => self.pi[0],
            Err(i) => self.pi[i - 1],
        }
    }

    /// Serializes as CSV with a `t,pi,stderr` header.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("t,pi,stderr\n");
        for i in 0..self.times.len() {
            out.push_str(&format!("{},{},{}\n", self.times[i], self.pi[i], self.stderr[i]));
        }
        out
    }

    /// Parses the CSV format of [`TransferCurve::to_csv_string`]; extra
    /// columns after the first three are ignored.
    pub fn from_csv_str(text: &str) -> Result<Self, TransferError> {
        let mut times = Vec::new();
        let mut pi = Vec::new();
        let mut stderr = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || (idx == 0 && line.starts_with('t')) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() < 3 {
                return Err(TransferError::Parse {
                    line: idx + 1,
                    message: format!("expected at least 3 columns, got `{line}`"),
                });
            }
            let parse = |s: &str| -> Result<f64, TransferError> {
                s.parse::<f64>().map_err(|e| TransferError::Parse {
                    line: idx + 1,
                    message: format!("bad number `{s}`: {e}"),
                })
            };
            times.push(parse(fields[0])?);
            pi.push(parse(fields[1])?);
            stderr.push(parse(fields[2])?);
        }
        Self::new(times, pi, stderr)
    }
}

/// Estimates the transfer at each time in `times` (sorted ascending).
///
/// Each evaluation time uses an independent sub-seed derived by hashing
/// `(cfg.seed, time index)`, so curve points are statistically independent
/// and the whole curve is reproducible from `cfg.seed`.
pub fn transfer_curve(
    problem: &Problem,
    barrier: &Barrier,
    times: &[f64],
    cfg: &McConfig,
) -> Result<TransferCurve, TransferError> {
    let mut pi = Vec::with_capacity(times.len());
    let mut stderr = Vec::with_capacity(times.len());
    for (j, &t) in times.iter().enumerate() {
        let sub = cfg.with_seed(subseed(cfg.seed, j as u64));
        let (mean, se) = transfer_at(problem, barrier, t, &sub)?;
        pi.push(mean);
        stderr.push(se);
    }
    TransferCurve::new(times.to_vec(), pi, stderr)
}

// ---------------------------------------------------------------------------
// Brownian closed form by nested adaptive quadrature.
// ---------------------------------------------------------------------------

/// Quadrature controls for [`bm_closed_form`].
#[derive(Debug, Clone, Copy)]
pub struct QuadratureConfig {
    /// Absolute tolerance for each one-dimensional integral.
    pub tol: f64,
    pub max_depth: u32,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { tol: 1e-9, max_depth: 40 }
    }
}

/// Quadrature value with an error estimate.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
}

/// Adaptive Simpson with Richardson acceptance; returns the value and an
/// accumulated error bound.
fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
) -> (f64, f64) {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> (f64, f64) {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return (left + right + delta / 15.0, delta.abs() / 15.0);
        }
        let (lv, le) = recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1);
        let (rv, re) = recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1);
        (lv + rv, le + re)
    }
    if a == b {
        return (0.0, 0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, max_depth)
}

/// Gaussian tail mass beyond the half-normal truncation point.
const HALF_NORMAL_CUTOFF: f64 = 8.0;
const HALF_NORMAL_TAIL: f64 = 1.3e-15;

/// Transfer for a driftless Brownian problem with a constant barrier, by
/// deterministic two-dimensional quadrature of the half-normal
/// representation of the reflected law.
///
/// Requires `mu = 0` and constant `sigma` matching the `sigma` argument; the
/// inner half-infinite integral is truncated at eight standard deviations
/// (tail below `1.3e-15`, included in the error estimate).
pub fn bm_closed_form(
    sigma: f64,
    b_const: f64,
    problem: &Problem,
    t: f64,
    quad: &QuadratureConfig,
) -> Result<QuadratureResult, TransferError> {
    let drift_is_zero =
        matches!(problem.diffusion.mu, Coef::Constant(c) if c == 0.0 || c == -0.0);
    if !drift_is_zero {
        return Err(TransferError::NotBrownian(format!(
            "drift must be zero, got {:?}",
            problem.diffusion.mu
        )));
    }
    match problem.diffusion.sigma {
        Coef::Constant(s) if s == sigma && s > 0.0 => {}
        ref other => {
            return Err(TransferError::NotBrownian(format!(
                "volatility must be the constant {sigma}, got {other:?}"
            )))
        }
    }
    let horizon = problem.horizon();
    if !(0.0..=horizon).contains(&t) {
        return Err(TransferError::BadTime { t, horizon });
    }
    if t == horizon {
        return Ok(QuadratureResult { value: 0.0, error_estimate: 0.0 });
    }

    let norm = (2.0 / std::f64::consts::PI).sqrt();
    let inner_tol = quad.tol;
    let inner = |s: f64| {
        let scale = sigma * (s - t).max(0.0).sqrt();
        let integrand = |y: f64| {
            norm * (-0.5 * y * y).exp()
                * problem.gain_rate(s, b_const - scale * y).unwrap_or(f64::NAN)
        };
        adaptive_simpson(&integrand, 0.0, HALF_NORMAL_CUTOFF, inner_tol, quad.max_depth).0
    };
    let (value, outer_err) = adaptive_simpson(&inner, t, horizon, quad.tol, quad.max_depth);
    let error_estimate = outer_err + (horizon - t) * inner_tol + HALF_NORMAL_TAIL;
    if !value.is_finite() {
        return Err(TransferError::NotBrownian(
            "quadrature produced a non-finite value (gain rate failed?)".into(),
        ));
    }
    Ok(QuadratureResult { value, error_estimate })
}

// ---------------------------------------------------------------------------
// Structural property checks on an estimated curve.
// ---------------------------------------------------------------------------

/// One examined barrier knot: the straddling curve difference and its noise.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotCheck {
    pub t: f64,
    /// `b(t) - b(t-)` at this knot (0 when the barrier is continuous here).
    pub barrier_jump: f64,
    /// `pi(at) - pi(before)` across the knot.
    pub pi_diff: f64,
    /// Three-sigma threshold `3 sqrt(se_at^2 + se_before^2)`.
    pub threshold: f64,
}

/// Report of [`check_transfer_properties`].
///
/// The transfer can jump only where the barrier jumps, so discontinuity
/// checks are anchored at barrier knot times; the curve must carry nodes
/// tightly straddling each knot for the differences to be meaningful.
#[derive(Debug, Clone)]
pub struct TransferPropertiesReport {
    /// Knots where the curve rises by more than the noise threshold; the
    /// transfer must never jump upward, so any entry is a failure.
    pub upward_jumps: Vec<KnotCheck>,
    /// Knots where the barrier is continuous or jumps down but the curve
    /// moves by more than the noise threshold in either direction.
    pub continuity_violations: Vec<KnotCheck>,
    /// Downward curve jumps beyond noise at upward barrier jumps; these are
    /// expected and informational.
    pub downward_jumps_observed: Vec<KnotCheck>,
    /// Last curve node strictly before the horizon.
    pub terminal_time: f64,
    pub terminal_value: f64,
    pub terminal_threshold: f64,
    /// `|pi| <= 3 stderr` at the last node before `T` (the transfer must
    /// vanish at the horizon).
    pub terminal_ok: bool,
}

impl TransferPropertiesReport {
    pub fn pass(&self) -> bool {
        self.upward_jumps.is_empty() && self.continuity_violations.is_empty() && self.terminal_ok
    }
}

/// Checks the estimated curve against the structural properties of the
/// transfer: no upward jumps, continuity wherever the barrier is continuous
/// or jumps down, and a vanishing left limit at the horizon.
pub fn check_transfer_properties(
    curve: &TransferCurve,
    barrier: &Barrier,
) -> Result<TransferPropertiesReport, TransferError> {
    if curve.is_empty() {
        return Err(TransferError::BadCurve("empty curve".into()));
    }
    let horizon = barrier.horizon();
    let jumps = barrier.validate_regular().jumps;
    let jump_at = |t: f64| jumps.iter().find(|j| j.t == t).map_or(0.0, |j| j.size);

    let mut report = TransferPropertiesReport {
        upward_jumps: Vec::new(),
        continuity_violations: Vec::new(),
        downward_jumps_observed: Vec::new(),
        terminal_time: f64::NAN,
        terminal_value: f64::NAN,
        terminal_threshold: f64::NAN,
        terminal_ok: false,
    };

    for knot in &barrier.knots()[1..barrier.knots().len().saturating_sub(1)] {
        let t = knot.t;
        let at = match curve.times.iter().position(|&u| u >= t) {
            Some(i) => i,
            None => continue,
        };
        let before = match curve.times[..at].iter().rposition(|&u| u < t) {
            Some(i) => i,
            None => continue,
        };
        let diff = curve.pi[at] - curve.pi[before];
        let threshold =
            3.0 * (curve.stderr[at].powi(2) + curve.stderr[before].powi(2)).sqrt();
        let check = KnotCheck { t, barrier_jump: jump_at(t), pi_diff: diff, threshold };
        if diff > threshold {
            report.upward_jumps.push(check.clone());
        }
        if check.barrier_jump > 0.0 {
            if diff < -threshold {
                report.downward_jumps_observed.push(check);
            }
        } else if diff.abs() > threshold {
            report.continuity_violations.push(check);
        }
    }

    match curve.times.iter().rposition(|&u| u < horizon) {
        Some(i) => {
            report.terminal_time = curve.times[i];
            report.terminal_value = curve.pi[i];
            report.terminal_threshold = 3.0 * curve.stderr[i];
            report.terminal_ok = curve.pi[i].abs() <= report.terminal_threshold;
        }
        None => {
            return Err(TransferError::BadCurve(
                "curve has no node strictly before the horizon".into(),
            ))
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::{Interpolation, Knot};
    use crate::model::{bm_linear_flow, bm_squared_payoff, Coef, DiffusionSpec, PayoffSpec,
        Problem, TerminalPayoff};

    fn jumpy_barrier() -> Barrier {
        Barrier::new(
            Interpolation::Constant,
            vec![Knot::new(0.0, 0.8), Knot::new(0.5, 1.6), Knot::new(1.0, 1.6)],
        )
        .unwrap()
    }

    #[test]
    fn squared_payoff_transfer_is_exact_and_barrier_free() {
        // h = sigma^2 along every path, so the estimate equals
        // sigma^2 (T - t) with zero variance, whatever the barrier.
        let cfg = McConfig::new(64, 9, 1e-2).unwrap();
        for sigma in [0.5, 2.0] {
            let p = bm_squared_payoff(sigma, 1.0);
            for barrier in [Barrier::constant(1.0, 1.0).unwrap(), jumpy_barrier()] {
                let (mean, se) = transfer_at(&p, &barrier, 0.3, &cfg).unwrap();
                assert!((mean - sigma * sigma * 0.7).abs() < 1e-10, "mean {mean}");
                assert!(se < 1e-12, "se {se}");
            }
        }
    }

    #[test]
    fn horizon_returns_zero_exactly() {
        let p = bm_squared_payoff(1.0, 1.0);
        let b = Barrier::constant(1.0, 1.0).unwrap();
        let cfg = McConfig::new(16, 0, 1e-2).unwrap();
        assert_eq!(transfer_at(&p, &b, 1.0, &cfg).unwrap(), (0.0, 0.0));
        assert!(matches!(
            transfer_at(&p, &b, 1.5, &cfg),
            Err(TransferError::BadTime { .. })
        ));
    }

    #[test]
    fn martingale_payoff_gives_zero_transfer() {
        let diffusion = DiffusionSpec::new(Coef::zero(), Coef::Constant(1.0), 1.0, 1.0).unwrap();
        let payoff = PayoffSpec::new(
            Coef::zero(),
            TerminalPayoff::Monomial { scale: 1.0, power: 1 },
            1.0,
        )
        .unwrap();
        let p = Problem::new(diffusion, payoff).unwrap();
        let b = Barrier::constant(0.5, 1.0).unwrap();
        let cfg = McConfig::new(32, 4, 1e-2).unwrap();
        let (mean, se) = transfer_at(&p, &b, 0.2, &cfg).unwrap();
        assert_eq!(mean, 0.0);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn adding_constant_flow_shifts_transfer_linearly() {
        let b = Barrier::constant(0.4, 1.0).unwrap();
        let cfg = McConfig::new(200, 17, 1e-2).unwrap();
        let c = 0.9;
        let base = bm_linear_flow(1.0, 1.0);
        let shifted = {
            let diffusion =
                DiffusionSpec::new(Coef::zero(), Coef::Constant(1.0), 1.0, 1.0).unwrap();
            let payoff =
                PayoffSpec::new(Coef::Affine { a: c, b: -1.0 }, TerminalPayoff::Zero, 1.0)
                    .unwrap();
            Problem::new(diffusion, payoff).unwrap()
        };
        for t in [0.0, 0.45, 0.8] {
            let (m0, _) = transfer_at(&base, &b, t, &cfg).unwrap();
            let (m1, _) = transfer_at(&shifted, &b, t, &cfg).unwrap();
            assert!(
                (m1 - m0 - c * (1.0 - t)).abs() < 1e-12,
                "shift at t={t}: {} vs {}",
                m1 - m0,
                c * (1.0 - t)
            );
        }
    }

    #[test]
    fn curve_is_deterministic_and_serializable() {
        let p = bm_linear_flow(1.0, 1.0);
        let b = jumpy_barrier();
        let cfg = McConfig::new(50, 123, 5e-3).unwrap();
        let times: Vec<f64> = (0..=5).map(|i| 0.2 * i as f64).collect();
        let c1 = transfer_curve(&p, &b, &times, &cfg).unwrap();
        let c2 = transfer_curve(&p, &b, &times, &cfg).unwrap();
        assert_eq!(c1, c2);
        // Last node is the horizon: anchored at exactly zero.
        assert_eq!(*c1.pi.last().unwrap(), 0.0);
        let parsed = TransferCurve::from_csv_str(&c1.to_csv_string()).unwrap();
        for i in 0..c1.len() {
            assert!((parsed.pi[i] - c1.pi[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn closed_form_matches_analytic_examples() {
        // g = x^2: h = sigma^2, the inner half-normal density integrates to
        // one, so pi(t) = sigma^2 (T - t).
        let quad = QuadratureConfig::default();
        for sigma in [0.5, 1.3] {
            let p = bm_squared_payoff(sigma, 1.0);
            for t in [0.0, 0.6] {
                let r = bm_closed_form(sigma, 0.7, &p, t, &quad).unwrap();
                let exact = sigma * sigma * (1.0 - t);
                assert!((r.value - exact).abs() <= r.error_estimate.max(1e-7), "{}", r.value);
            }
        }

        // h(s, y) = y via f = x, g = 0:
        // pi(t) = b (T-t) - sigma sqrt(2/pi) (2/3) (T-t)^{3/2}.
        let diffusion = DiffusionSpec::new(Coef::zero(), Coef::Constant(0.8), 1.0, 1.0).unwrap();
        let payoff = PayoffSpec::new(
            Coef::Affine { a: 0.0, b: 1.0 },
            TerminalPayoff::Zero,
            1.0,
        )
        .unwrap();
        let p = Problem::new(diffusion, payoff).unwrap();
        let (sigma, b_const, t) = (0.8, 0.25, 0.36);
        let r = bm_closed_form(sigma, b_const, &p, t, &quad).unwrap();
        let ttm: f64 = 1.0 - t;
        let exact = b_const * ttm
            - sigma * (2.0 / std::f64::consts::PI).sqrt() * (2.0 / 3.0) * ttm.powf(1.5);
        assert!((r.value - exact).abs() <= 1e-6, "quad {} vs exact {exact}", r.value);

        // t = T collapses to zero.
        let r = bm_closed_form(0.8, 0.25, &p, 1.0, &quad).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn closed_form_rejects_non_brownian() {
        let diffusion = DiffusionSpec::new(
            Coef::MeanReverting { kappa: 1.0, theta: 0.0 },
            Coef::Constant(1.0),
            2.0,
            1.0,
        )
        .unwrap();
        let payoff = PayoffSpec::new(Coef::zero(), TerminalPayoff::Zero, 1.0).unwrap();
        let p = Problem::new(diffusion, payoff).unwrap();
        assert!(matches!(
            bm_closed_form(1.0, 0.0, &p, 0.0, &QuadratureConfig::default()),
            Err(TransferError::NotBrownian(_))
        ));
    }

    #[test]
    fn monte_carlo_agrees_with_quadrature() {
        // Constant-barrier driftless BM with h = -x. The projection scheme
        // carries an O(sqrt(dt)) reflection bias, so the step must be fine
        // enough for the bias to sit inside the Monte Carlo band.
        let p = bm_linear_flow(1.0, 1.0);
        let b_const = 0.3;
        let b = Barrier::constant(b_const, 1.0).unwrap();
        let cfg = McConfig::new(5_000, 31, 2.5e-5).unwrap();
        let quad = QuadratureConfig::default();
        for t in [0.35, 0.7] {
            let (mc, se) = transfer_at(&p, &b, t, &cfg).unwrap();
            let q = bm_closed_form(1.0, b_const, &p, t, &quad).unwrap();
            let tol = 3.0 * se + q.error_estimate;
            assert!(
                (mc - q.value).abs() <= tol,
                "t={t}: mc {mc} vs quad {} (3se {})",
                q.value,
                3.0 * se
            );
        }
    }

    #[test]
    fn property_check_flags_injected_upward_jump() {
        let b = jumpy_barrier(); // upward jump at t = 0.5
        // Synthetic curve: flat at 0 with se 0.01, except an injected +10 se
        // rise across the knot.
        let times = vec![0.0, 0.3, 0.499, 0.5, 0.8, 0.999];
        let pi = vec![0.0, 0.0, 0.0, 0.1, 0.1, 0.0];
        let se = vec![0.01; 6];
        let curve = TransferCurve::new(times, pi, se).unwrap();
        let report = check_transfer_properties(&curve, &b).unwrap();
        assert_eq!(report.upward_jumps.len(), 1);
        assert_eq!(report.upward_jumps[0].t, 0.5);
        assert!(!report.pass());
        assert!(report.terminal_ok);
    }

    #[test]
    fn property_check_accepts_downward_jump_at_upward_knot() {
        let b = jumpy_barrier();
        let times = vec![0.0, 0.499, 0.5, 0.999];
        let pi = vec![0.2, 0.2, 0.05, 0.0];
        let se = vec![0.01; 4];
        let curve = TransferCurve::new(times, pi, se).unwrap();
        let report = check_transfer_properties(&curve, &b).unwrap();
        assert!(report.pass(), "{report:?}");
        assert_eq!(report.downward_jumps_observed.len(), 1);
    }

    #[test]
    fn property_check_flags_discontinuity_at_downward_knot() {
        let b = Barrier::new(
            Interpolation::Constant,
            vec![Knot::new(0.0, 1.5), Knot::new(0.4, 0.6), Knot::new(1.0, 0.6)],
        )
        .unwrap();
        let times = vec![0.0, 0.399, 0.4, 0.999];
        let pi = vec![0.0, 0.0, -0.2, 0.0];
        let se = vec![0.01; 4];
        let curve = TransferCurve::new(times, pi, se).unwrap();
        let report = check_transfer_properties(&curve, &b).unwrap();
        assert_eq!(report.continuity_violations.len(), 1);
        assert!(!report.pass());
    }
}
