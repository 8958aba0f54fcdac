//! Independent dynamic-programming oracle on an explicit trinomial lattice.
//!
//! The oracle prices the stopping problem with transfer directly,
//!
//! ```text
//! v(t_k, x) = max( g(t_k, x) + pi(t_k),
//!                  f(t_k, x) dt + E[ v(t_{k+1}, X_{t_{k+1}}) ] ),
//! ```
//!
//! with the conditional expectation taken over one-step trinomial moves
//! whose probabilities match the drift `mu dt` and variance `sigma^2 dt`
//! locally. It shares nothing with the Monte Carlo machinery — no paths, no
//! reflection, no common random numbers — which is what makes it a genuine
//! cross-check: a barrier solved from the integral equation must be
//! implementable here, and the lattice's own stopping region must reproduce
//! the solved boundary.
//!
//! State space is truncated to `[x_min, x_max]` with the outermost rows
//! clamped to the immediate-stop value; pick bounds several diffusion
//! standard deviations beyond every node you intend to read, and keep
//! reported quantities away from the clamped edges (the `scan_margin` of
//! [`check_implementability`] and the interior convention of
//! [`extract_boundary`] exist for exactly that reason).

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::barrier::{Barrier, BarrierError, Knot};
use crate::model::{EvalError, Problem};
use crate::paths::NoiseStream;
use crate::transfer::{McConfig, TransferCurve};

#[derive(Debug, Clone, Error)]
pub enum LatticeError {
    #[error("bad lattice geometry: {0}")]
    BadGeometry(String),
    #[error("explicit scheme unstable at (t={t}, x={x}): sigma^2 dt / dx^2 = {ratio}; refine dx or dt")]
    Unstable { t: f64, x: f64, ratio: f64 },
    #[error("trinomial weight out of range at (t={t}, x={x}): p_down={p_down}, p_mid={p_mid}, p_up={p_up}")]
    BadWeight { t: f64, x: f64, p_down: f64, p_mid: f64, p_up: f64 },
    #[error("stop region has a hole at t={t}: continuation at x={x_hole} above a stopped state; not a cut-off structure")]
    NonIntervalStopRegion { t: f64, x_hole: f64 },
    #[error("lattice horizon {lattice} does not match problem horizon {problem}")]
    HorizonMismatch { lattice: f64, problem: f64 },
    #[error("precondition: {0}")]
    Precondition(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
}

/// Uniform time-state lattice on `[0, T] x [x_min, x_max]`.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub horizon: f64,
    pub n_steps: usize,
    pub x_min: f64,
    pub dx: f64,
    pub n_states: usize,
}

impl Lattice {
    /// Builds a lattice with time step ~`dt` (rounded so it divides the
    /// horizon exactly) and state step `dx` spanning `[x_min, x_max]`.
    pub fn new(
        horizon: f64,
        dt: f64,
        x_min: f64,
        x_max: f64,
        dx: f64,
    ) -> Result<Self, LatticeError> {
        if !(horizon.is_finite() && horizon > 0.0 && dt.is_finite() && dt > 0.0 && dt <= horizon) {
            return Err(LatticeError::BadGeometry(format!("horizon {horizon}, dt {dt}")));
        }
        if !(dx.is_finite() && dx > 0.0 && x_min.is_finite() && x_max.is_finite() && x_min < x_max)
        {
            return Err(LatticeError::BadGeometry(format!(
                "state range [{x_min}, {x_max}] with dx {dx}"
            )));
        }
        let n_steps = (horizon / dt).round().max(1.0) as usize;
        let n_states = ((x_max - x_min) / dx).round() as usize + 1;
        if n_states < 3 {
            return Err(LatticeError::BadGeometry("need at least 3 state nodes".into()));
        }
        Ok(Self { horizon, n_steps, x_min, dx, n_states })
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.horizon * (k as f64) / (self.n_steps as f64)
    }

    #[inline]
    pub fn state(&self, j: usize) -> f64 {
        self.x_min + self.dx * (j as f64)
    }

    pub fn x_max(&self) -> f64 {
        self.state(self.n_states - 1)
    }

    pub fn dt(&self) -> f64 {
        self.horizon / (self.n_steps as f64)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }

    /// One-step trinomial probabilities (down, mid, up) matching the first
    /// two moments of the increment at `(t, x)`.
    #[inline]
    fn weights(&self, problem: &Problem, t: f64, x: f64) -> (f64, f64, f64) {
        let dt = self.dt();
        let m1 = problem.mu(t, x) * dt;
        let sigma = problem.sigma(t, x);
        let m2 = sigma * sigma * dt + m1 * m1;
        let a = m2 / (self.dx * self.dx);
        let b = m1 / self.dx;
        let p_up = 0.5 * (a + b);
        let p_down = 0.5 * (a - b);
        (p_down, 1.0 - p_up - p_down, p_up)
    }

    /// Validates the explicit-scheme weights at every lattice node; reports
    /// the worst offender on failure.
    fn check_stability(&self, problem: &Problem) -> Result<(), LatticeError> {
        let dt = self.dt();
        let mut worst_ratio = 0.0_f64;
        let mut worst = (0.0, 0.0);
        let mut bad_weight: Option<LatticeError> = None;
        for k in 0..self.n_steps {
            let t = self.time(k);
            for j in 0..self.n_states {
                let x = self.state(j);
                let sigma = problem.sigma(t, x);
                let ratio = sigma * sigma * dt / (self.dx * self.dx);
                if ratio > worst_ratio {
                    worst_ratio = ratio;
                    worst = (t, x);
                }
                let (p_down, p_mid, p_up) = self.weights(problem, t, x);
                let in_range =
                    |p: f64| p.is_finite() && (-1e-12..=1.0 + 1e-12).contains(&p);
                if bad_weight.is_none()
                    && (!in_range(p_down) || !in_range(p_mid) || !in_range(p_up))
                {
                    bad_weight = Some(LatticeError::BadWeight { t, x, p_down, p_mid, p_up });
                }
            }
        }
        if worst_ratio > 1.0 {
            return Err(LatticeError::Unstable { t: worst.0, x: worst.1, ratio: worst_ratio });
        }
        if let Some(err) = bad_weight {
            return Err(err);
        }
        Ok(())
    }
}

/// Transfer values at the lattice times; right-continuous step interpolation
/// between curve nodes (a transfer is cadlag, so the node value rules its
/// right neighborhood).
fn pi_on_lattice(lattice: &Lattice, pi: Option<&TransferCurve>) -> Vec<f64> {
    match pi {
        None => vec![0.0; lattice.n_steps + 1],
        Some(curve) => (0..=lattice.n_steps).map(|k| curve.value_at(lattice.time(k))).collect(),
    }
}

const STOP_REL_TOL: f64 = 1e-9;

/// Value function and stopping region on a lattice.
#[derive(Debug, Clone)]
pub struct ValueSurface {
    pub lattice: Lattice,
    /// Transfer at each lattice time.
    pub pi_at: Vec<f64>,
    /// Row-major `(n_steps + 1) x n_states` values.
    pub v: Vec<f64>,
    /// Stop mask: `v <= g + pi` within relative tolerance `1e-9`.
    pub stop: Vec<bool>,
}

impl ValueSurface {
    #[inline]
    pub fn value(&self, k: usize, j: usize) -> f64 {
        self.v[k * self.lattice.n_states + j]
    }

    #[inline]
    pub fn is_stop(&self, k: usize, j: usize) -> bool {
        self.stop[k * self.lattice.n_states + j]
    }

    /// Low-level constructor for tests and tooling; arrays are row-major
    /// with `(n_steps + 1) * n_states` entries.
    pub fn from_raw(lattice: Lattice, pi_at: Vec<f64>, v: Vec<f64>, stop: Vec<bool>) -> Self {
        assert_eq!(v.len(), (lattice.n_steps + 1) * lattice.n_states);
        assert_eq!(stop.len(), v.len());
        assert_eq!(pi_at.len(), lattice.n_steps + 1);
        Self { lattice, pi_at, v, stop }
    }

    /// CSV export with a `t,x,v,stop` header.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("t,x,v,stop\n");
        for k in 0..=self.lattice.n_steps {
            let t = self.lattice.time(k);
            for j in 0..self.lattice.n_states {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    t,
                    self.lattice.state(j),
                    self.value(k, j),
                    u8::from(self.is_stop(k, j))
                ));
            }
        }
        out
    }
}

/// Backward-induction value of the stopping problem with transfer `pi`
/// (`None` means the zero transfer). Boundary rows are clamped to the
/// immediate-stop value.
pub fn dp_value(
    problem: &Problem,
    pi: Option<&TransferCurve>,
    lattice: &Lattice,
) -> Result<ValueSurface, LatticeError> {
    if lattice.horizon != problem.horizon() {
        return Err(LatticeError::HorizonMismatch {
            lattice: lattice.horizon,
            problem: problem.horizon(),
        });
    }
    lattice.check_stability(problem)?;
    let pi_at = pi_on_lattice(lattice, pi);
    let (n_t, n_x) = (lattice.n_steps, lattice.n_states);
    let dt = lattice.dt();
    let mut v = vec![0.0; (n_t + 1) * n_x];
    let mut stop = vec![false; (n_t + 1) * n_x];

    for j in 0..n_x {
        v[n_t * n_x + j] = problem.g(lattice.horizon, lattice.state(j)) + pi_at[n_t];
        stop[n_t * n_x + j] = true;
    }

    for k in (0..n_t).rev() {
        let t = lattice.time(k);
        for j in 0..n_x {
            let x = lattice.state(j);
            let s = problem.g(t, x) + pi_at[k];
            let value = if j == 0 || j == n_x - 1 {
                s
            } else {
                let (p_down, p_mid, p_up) = lattice.weights(problem, t, x);
                let base = (k + 1) * n_x + j;
                let expected = p_down * v[base - 1] + p_mid * v[base] + p_up * v[base + 1];
                (problem.flow(t, x) * dt + expected).max(s)
            };
            v[k * n_x + j] = value;
            stop[k * n_x + j] = value <= s + STOP_REL_TOL * (1.0 + s.abs());
        }
    }

    Ok(ValueSurface { lattice: lattice.clone(), pi_at, v, stop })
}

/// How one time row's stopping set looked during boundary extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    /// Proper interior boundary.
    Interior,
    /// The whole interior is stopping; the reported value collapses to the
    /// truncation edge.
    Degenerate,
    /// No interior state stops; the reported value is the upper truncation
    /// edge.
    NoStop,
}

/// Smallest stopping state per time row, as a barrier on the lattice times.
///
/// Truncation rows are clamped to the stop value by the scheme and are
/// excluded from the structure analysis; within the interior the stopping
/// set must be an up-set in the state, otherwise the cut-off structure is
/// violated and the extraction fails (single-crossing violation evidence).
pub fn extract_boundary(
    surface: &ValueSurface,
) -> Result<(Barrier, Vec<RowStatus>), LatticeError> {
    let lat = &surface.lattice;
    let n_x = lat.n_states;
    let mut statuses = Vec::with_capacity(lat.n_steps + 1);
    let mut knots = Vec::with_capacity(lat.n_steps + 1);
    for k in 0..=lat.n_steps {
        let first_stop = (1..n_x - 1).find(|&j| surface.is_stop(k, j));
        let (value, status) = match first_stop {
            None => (lat.x_max(), RowStatus::NoStop),
            Some(j_star) => {
                for j in j_star + 1..n_x - 1 {
                    if !surface.is_stop(k, j) {
                        return Err(LatticeError::NonIntervalStopRegion {
                            t: lat.time(k),
                            x_hole: lat.state(j),
                        });
                    }
                }
                if j_star == 1 {
                    (lat.x_min, RowStatus::Degenerate)
                } else {
                    (lat.state(j_star), RowStatus::Interior)
                }
            }
        };
        statuses.push(status);
        knots.push(Knot::new(lat.time(k), value));
    }
    let barrier = Barrier::new(crate::barrier::Interpolation::Linear, knots)?;
    Ok((barrier, statuses))
}

/// Memory-lean variant of [`dp_value`] + [`extract_boundary`] that keeps two
/// value rows and returns only the per-time boundary (`None` where no
/// interior state stops). Intended for fine calibration lattices whose full
/// surface would not fit in memory.
pub fn dp_stop_boundary(
    problem: &Problem,
    pi: Option<&TransferCurve>,
    lattice: &Lattice,
) -> Result<Vec<Option<f64>>, LatticeError> {
    if lattice.horizon != problem.horizon() {
        return Err(LatticeError::HorizonMismatch {
            lattice: lattice.horizon,
            problem: problem.horizon(),
        });
    }
    lattice.check_stability(problem)?;
    let pi_at = pi_on_lattice(lattice, pi);
    let (n_t, n_x) = (lattice.n_steps, lattice.n_states);
    let dt = lattice.dt();
    let mut next: Vec<f64> = (0..n_x)
        .map(|j| problem.g(lattice.horizon, lattice.state(j)) + pi_at[n_t])
        .collect();
    let mut boundaries = vec![None; n_t + 1];
    boundaries[n_t] = Some(lattice.x_min);
    let mut row = vec![0.0; n_x];
    for k in (0..n_t).rev() {
        let t = lattice.time(k);
        let mut first_stop: Option<usize> = None;
        for j in 0..n_x {
            let x = lattice.state(j);
            let s = problem.g(t, x) + pi_at[k];
            let value = if j == 0 || j == n_x - 1 {
                s
            } else {
                let (p_down, p_mid, p_up) = lattice.weights(problem, t, x);
                let expected = p_down * next[j - 1] + p_mid * next[j] + p_up * next[j + 1];
                (problem.flow(t, x) * dt + expected).max(s)
            };
            row[j] = value;
            if first_stop.is_none()
                && j > 0
                && j < n_x - 1
                && value <= s + STOP_REL_TOL * (1.0 + s.abs())
            {
                first_stop = Some(j);
            }
        }
        boundaries[k] = first_stop.map(|j| lattice.state(j));
        std::mem::swap(&mut next, &mut row);
    }
    Ok(boundaries)
}

/// Optional strictness request for [`check_implementability`].
#[derive(Debug, Clone, Copy)]
pub struct StrictCheck {
    /// Distance below the barrier from which strictness is demanded (the
    /// value gap vanishes continuously at the barrier itself).
    pub margin_below: f64,
    /// Required gap `v - (g + pi)` on that region.
    pub min_gap: f64,
}

/// Result of the strictness leg.
#[derive(Debug, Clone, Copy)]
pub struct StrictReport {
    pub pass: bool,
    pub worst_gap: f64,
    pub worst_t: f64,
    pub worst_x: f64,
}

/// Implementability verdict: does forced stopping at the barrier attain the
/// optimal value everywhere?
#[derive(Debug, Clone)]
pub struct ImplementabilityReport {
    pub pass: bool,
    pub tol: f64,
    /// Largest `v - u` over the scanned nodes, `u` the forced-stopping value.
    pub worst_gap: f64,
    pub worst_t: f64,
    pub worst_x: f64,
    /// States within this margin of the truncation edges were excluded from
    /// the scan (their rows are clamped by the scheme).
    pub scan_margin: f64,
    pub strict: Option<StrictReport>,
}

/// Verifies that stopping at `barrier` is optimal for the problem with
/// transfer `pi`: computes the unconstrained value `v` and the value `u` of
/// the forced rule (continue strictly below the barrier, stop at or above)
/// and compares them at all lattice nodes at least `scan_margin` away from
/// the truncation edges.
pub fn check_implementability(
    problem: &Problem,
    barrier: &Barrier,
    pi: Option<&TransferCurve>,
    lattice: &Lattice,
    tol: f64,
    scan_margin: f64,
    strict: Option<StrictCheck>,
) -> Result<ImplementabilityReport, LatticeError> {
    let surface = dp_value(problem, pi, lattice)?;
    let (n_t, n_x) = (lattice.n_steps, lattice.n_states);
    let dt = lattice.dt();
    let pi_at = &surface.pi_at;

    // Forced-stopping value: same scheme, stopping decided by the barrier.
    let mut u = vec![0.0; (n_t + 1) * n_x];
    for j in 0..n_x {
        u[n_t * n_x + j] = problem.g(lattice.horizon, lattice.state(j)) + pi_at[n_t];
    }
    for k in (0..n_t).rev() {
        let t = lattice.time(k);
        let b_t = barrier.eval(t)?;
        for j in 0..n_x {
            let x = lattice.state(j);
            let s = problem.g(t, x) + pi_at[k];
            u[k * n_x + j] = if j == 0 || j == n_x - 1 || x >= b_t {
                s
            } else {
                let (p_down, p_mid, p_up) = lattice.weights(problem, t, x);
                let base = (k + 1) * n_x + j;
                p_down * u[base - 1] + p_mid * u[base] + p_up * u[base + 1]
                    + problem.flow(t, x) * dt
            };
        }
    }

    let j_lo = ((scan_margin / lattice.dx).ceil() as usize).min(n_x - 1);
    let j_hi = n_x - 1 - j_lo;
    let mut worst_gap = f64::NEG_INFINITY;
    let (mut worst_t, mut worst_x) = (f64::NAN, f64::NAN);
    for k in 0..=n_t {
        for j in j_lo..=j_hi {
            let gap = surface.value(k, j) - u[k * n_x + j];
            if gap > worst_gap {
                worst_gap = gap;
                worst_t = lattice.time(k);
                worst_x = lattice.state(j);
            }
        }
    }

    let strict_report = match strict {
        None => None,
        Some(req) => {
            let mut worst = f64::INFINITY;
            let (mut wt, mut wx) = (f64::NAN, f64::NAN);
            // Truncation rows are clamped to the stop value, so strictness
            // can only be judged on the interior.
            let (s_lo, s_hi) = (j_lo.max(1), j_hi.min(n_x - 2));
            for k in 0..n_t {
                let t = lattice.time(k);
                let b_t = barrier.eval(t)?;
                for j in s_lo..=s_hi {
                    let x = lattice.state(j);
                    if x <= b_t - req.margin_below {
                        let gap =
                            surface.value(k, j) - (problem.g(t, x) + pi_at[k]);
                        if gap < worst {
                            worst = gap;
                            wt = t;
                            wx = x;
                        }
                    }
                }
            }
            Some(StrictReport { pass: worst > req.min_gap, worst_gap: worst, worst_t: wt, worst_x: wx })
        }
    };

    Ok(ImplementabilityReport {
        pass: worst_gap <= tol,
        tol,
        worst_gap,
        worst_t,
        worst_x,
        scan_margin,
        strict: strict_report,
    })
}

// ---------------------------------------------------------------------------
// Reflection-principle distribution check.
// ---------------------------------------------------------------------------

/// Result of [`reflection_cdf_check`].
#[derive(Debug, Clone, Copy)]
pub struct CdfCheckReport {
    pub sup_distance: f64,
    /// Kolmogorov-Smirnov critical value at the 1% level, `1.6276 / sqrt(n)`.
    pub threshold: f64,
    pub n_samples: usize,
    pub pass: bool,
}

/// KS critical value at significance 0.01.
const KS_CRITICAL_1PCT: f64 = 1.6276;

/// Samples the driftless Brownian motion reflected below a constant barrier
/// exactly at one horizon: starting on the barrier, `Xr = b + sigma (w - m)`
/// where `w` is the endpoint of a standard Brownian motion over `s - t` and
/// `m` its running maximum, drawn from the exact conditional law
/// `P(m <= y | w) = 1 - exp(-2 y (y - w) / (s - t))`.
fn sample_reflected_bm(
    sigma: f64,
    b_const: f64,
    span: f64,
    n: usize,
    seed: u64,
) -> Vec<f64> {
    let mut rng = NoiseStream::new(seed, 0).rng();
    let sqrt_span = span.sqrt();
    (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            let w = z * sqrt_span;
            let v: f64 = rng.gen_range(0.0..1.0);
            let m = 0.5 * (w + (w * w - 2.0 * span * (1.0 - v).ln()).sqrt());
            b_const + sigma * (w - m)
        })
        .collect()
}

/// One-sample KS statistic of `samples` against `cdf`.
fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = samples.len() as f64;
    let mut sup = 0.0_f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        sup = sup.max(((i + 1) as f64 / n - f).abs());
        sup = sup.max((f - i as f64 / n).abs());
    }
    sup
}

fn reflected_cdf_distance(
    sigma: f64,
    b_const: f64,
    t: f64,
    s: f64,
    cfg: &McConfig,
    factor: f64,
) -> Result<(f64, usize), LatticeError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(LatticeError::Precondition(format!("sigma must be positive, got {sigma}")));
    }
    let ordered = t.is_finite() && s.is_finite() && s > t;
    if !ordered {
        return Err(LatticeError::Precondition(format!("need s > t, got t={t}, s={s}")));
    }
    let span = s - t;
    let mut samples = sample_reflected_bm(sigma, b_const, span, cfg.n_paths, cfg.seed);
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let scale = sigma * span.sqrt();
    let cdf = move |x: f64| (factor * normal.cdf((x - b_const) / scale)).min(1.0);
    Ok((ks_statistic(&mut samples, cdf), cfg.n_paths))
}

/// Kolmogorov-Smirnov check of the factor-two reflection identity
/// `P[Xr_s <= x] = 2 P[X_s <= x]` for `x <= b`, for the driftless Brownian
/// motion below a constant barrier, at the 1% level.
///
/// The reflected samples are drawn exactly (endpoint plus conditional
/// running maximum of the Brownian path), so the statistic measures the
/// distributional identity itself rather than time-discretization error.
pub fn reflection_cdf_check(
    sigma: f64,
    b_const: f64,
    t: f64,
    s: f64,
    cfg: &McConfig,
) -> Result<CdfCheckReport, LatticeError> {
    let (sup_distance, n) = reflected_cdf_distance(sigma, b_const, t, s, cfg, 2.0)?;
    let threshold = KS_CRITICAL_1PCT / (n as f64).sqrt();
    Ok(CdfCheckReport { sup_distance, threshold, n_samples: n, pass: sup_distance <= threshold })
}
