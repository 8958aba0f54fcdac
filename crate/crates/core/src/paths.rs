//! Path simulation: the free diffusion, its version reflected below a
//! barrier, hitting times, and pathwise property checks.
//!
//! The free process follows the Euler scheme
//! `X_{k+1} = X_k + mu(t_k, X_k) dt_k + sigma(t_k, X_k) dW_k`. The reflected
//! process applies the same step to its own state and then projects below the
//! barrier:
//!
//! ```text
//! prop    = Xr_k + mu(t_k, Xr_k) dt_k + sigma(t_k, Xr_k) dW_k
//! Xr_{k+1} = min(prop, b(t_{k+1}))
//! l_{k+1}  = l_k + max(0, prop - b(t_{k+1}))
//! ```
//!
//! For coefficients frozen within a step this coincides at grid points with
//! the running-max construction `l_s = sup_{r<=s} (xi + Y_r - b(r))^+` of the
//! one-sided Skorokhod map. Barrier knots are forced into every grid so that
//! a downward barrier jump absorbs the path exactly at the jump time instead
//! of being smeared across a step.
//!
//! Both trajectories of a [`ReflectedPath`] share one noise realization,
//! which makes the comparison and minimality properties hold pathwise and
//! bit-exactly; [`check_pathwise_properties`] asserts them at every grid
//! point.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::barrier::{Barrier, BarrierError};
use crate::model::{EvalError, Problem};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GridError {
    #[error("grid range [{t_start}, {t_end}] is empty or non-finite")]
    BadRange { t_start: f64, t_end: f64 },
    #[error("max step must be positive and finite, got {0}")]
    BadMaxStep(f64),
    #[error("grid points collapsed near t={0}; range too small for f64 resolution")]
    DegenerateStep(f64),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimError {
    #[error("non-finite state at step {step} (t={t})")]
    NonFiniteState { step: usize, t: f64 },
    #[error("start value {x} above barrier {barrier} at t={t}")]
    StartAboveBarrier { x: f64, barrier: f64, t: f64 },
    #[error("grid is missing barrier knot time {0}; build the grid with the barrier's knots")]
    GridMissingKnot(f64),
    #[error("increment count {got} does not match grid steps {expected}")]
    IncrementMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Strictly increasing simulation times from `t_start` to `t_end`.
///
/// Every requested anchor (barrier knot) inside the range becomes a grid
/// point and no step exceeds `max_step`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    /// Uniform-within-segments grid anchored at `anchors` (typically the
    /// barrier's knot times). Anchors outside `(t_start, t_end)` are ignored.
    pub fn with_anchors(
        t_start: f64,
        t_end: f64,
        max_step: f64,
        anchors: &[f64],
    ) -> Result<Self, GridError> {
        if !(t_start.is_finite() && t_end.is_finite() && t_start < t_end) {
            return Err(GridError::BadRange { t_start, t_end });
        }
        if !(max_step.is_finite() && max_step > 0.0) {
            return Err(GridError::BadMaxStep(max_step));
        }
        let mut segment_ends: Vec<f64> =
            anchors.iter().copied().filter(|&a| a > t_start && a < t_end).collect();
        segment_ends.sort_by(|a, b| a.partial_cmp(b).expect("finite anchors"));
        segment_ends.dedup();
        segment_ends.push(t_end);

        let mut points = vec![t_start];
        let mut seg_start = t_start;
        for &seg_end in &segment_ends {
            let n = ((seg_end - seg_start) / max_step).ceil().max(1.0) as usize;
            for j in 1..=n {
                let t = if j == n {
                    seg_end
                } else {
                    seg_start + (seg_end - seg_start) * (j as f64) / (n as f64)
                };
                if t <= *points.last().expect("nonempty") {
                    return Err(GridError::DegenerateStep(t));
                }
                points.push(t);
            }
            seg_start = seg_end;
        }
        Ok(Self { points })
    }

    /// Uniform grid with no interior anchors.
    pub fn uniform(t_start: f64, t_end: f64, max_step: f64) -> Result<Self, GridError> {
        Self::with_anchors(t_start, t_end, max_step, &[])
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t_start(&self) -> f64 {
        self.points[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.points.last().expect("nonempty")
    }

    pub fn n_steps(&self) -> usize {
        self.points.len() - 1
    }

    /// Grid restricted to `points[from..]`; used to restart a path mid-way.
    pub fn suffix(&self, from: usize) -> TimeGrid {
        assert!(from + 1 < self.points.len(), "suffix needs at least one step");
        TimeGrid { points: self.points[from..].to_vec() }
    }

    fn contains(&self, t: f64) -> bool {
        self.points
            .binary_search_by(|p| p.partial_cmp(&t).expect("finite"))
            .is_ok()
    }
}

const MIX_CONST_A: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_CONST_B: u64 = 0xA076_1D64_78BD_642F;

/// SplitMix64 finalizer; the workhorse for seed derivation.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(MIX_CONST_A);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed from a base seed and an index
/// (per evaluation time, per solver node, ...). Pure and documented so runs
/// are reproducible from the manifest alone.
pub fn subseed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index ^ MIX_CONST_B))
}

/// Deterministic Gaussian increment stream for one path.
///
/// `(seed, path_index, grid)` fully determines the increments: two streams
/// built from equal triples produce bit-identical output, independent of
/// thread scheduling. Different path indices give independent ChaCha8 keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseStream {
    pub seed: u64,
    pub path_index: u64,
}

impl NoiseStream {
    pub fn new(seed: u64, path_index: u64) -> Self {
        Self { seed, path_index }
    }

    /// ChaCha8 generator keyed by `(seed, path_index)`.
    pub fn rng(&self) -> ChaCha8Rng {
        let w0 = mix64(self.seed);
        let w1 = mix64(w0 ^ mix64(self.path_index));
        let w2 = mix64(w1 ^ MIX_CONST_B);
        let w3 = mix64(w2 ^ self.path_index.rotate_left(32));
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&w0.to_le_bytes());
        key[8..16].copy_from_slice(&w1.to_le_bytes());
        key[16..24].copy_from_slice(&w2.to_le_bytes());
        key[24..32].copy_from_slice(&w3.to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }

    /// Brownian increments `dW_k ~ N(0, dt_k)` along the grid.
    pub fn increments(&self, grid: &TimeGrid) -> Vec<f64> {
        let mut rng = self.rng();
        let pts = grid.points();
        (0..grid.n_steps())
            .map(|k| {
                let z: f64 = rng.sample(StandardNormal);
                z * (pts[k + 1] - pts[k]).sqrt()
            })
            .collect()
    }
}

/// Discrete trajectory triple sharing one noise realization: the free path
/// `x`, the reflected path `x_refl`, and the nondecreasing regulator `l`.
#[derive(Debug, Clone)]
pub struct ReflectedPath {
    pub grid: TimeGrid,
    /// Free (unreflected) states.
    pub x: Vec<f64>,
    /// Reflected states; `x_refl[k] <= b(t_k)` for all k.
    pub x_refl: Vec<f64>,
    /// Regulator; `l[0] = 0`, nondecreasing, increases only on the barrier.
    pub l: Vec<f64>,
    /// First grid time with `x >= b`, capped at the grid end.
    pub tau_b: f64,
}

/// Barrier values along a grid, checked to cover every knot.
pub(crate) fn barrier_on_grid(barrier: &Barrier, grid: &TimeGrid) -> Result<Vec<f64>, SimError> {
    for t in barrier.knot_times_within(grid.t_start(), grid.t_end()) {
        if !grid.contains(t) {
            return Err(SimError::GridMissingKnot(t));
        }
    }
    grid.points()
        .iter()
        .map(|&t| barrier.eval(t).map_err(SimError::from))
        .collect()
}

/// Euler path of the free diffusion started at `x0` at the grid start.
pub fn simulate_unreflected(
    problem: &Problem,
    x0: f64,
    grid: &TimeGrid,
    stream: NoiseStream,
) -> Result<Vec<f64>, SimError> {
    let increments = stream.increments(grid);
    let pts = grid.points();
    let mut states = Vec::with_capacity(pts.len());
    let mut x = x0;
    states.push(x);
    for (k, &dw) in increments.iter().enumerate() {
        let t = pts[k];
        let dt = pts[k + 1] - t;
        x = x + problem.mu(t, x) * dt + problem.sigma(t, x) * dw;
        if !x.is_finite() {
            return Err(SimError::NonFiniteState { step: k + 1, t: pts[k + 1] });
        }
        states.push(x);
    }
    Ok(states)
}

/// Simulates the diffusion reflected below `barrier`, starting at
/// `xi <= b(t_start)`, together with the free path from the same noise.
pub fn reflect(
    problem: &Problem,
    barrier: &Barrier,
    xi: f64,
    grid: &TimeGrid,
    stream: NoiseStream,
) -> Result<ReflectedPath, SimError> {
    let increments = stream.increments(grid);
    reflect_with_increments(problem, barrier, xi, grid, &increments)
}

/// [`reflect`] with externally supplied Brownian increments; the flow and
/// restart tests feed increment slices through this entry point.
pub fn reflect_with_increments(
    problem: &Problem,
    barrier: &Barrier,
    xi: f64,
    grid: &TimeGrid,
    increments: &[f64],
) -> Result<ReflectedPath, SimError> {
    if increments.len() != grid.n_steps() {
        return Err(SimError::IncrementMismatch {
            got: increments.len(),
            expected: grid.n_steps(),
        });
    }
    let bvals = barrier_on_grid(barrier, grid)?;
    if xi > bvals[0] {
        return Err(SimError::StartAboveBarrier { x: xi, barrier: bvals[0], t: grid.t_start() });
    }
    let pts = grid.points();
    let n = pts.len();
    let mut x = Vec::with_capacity(n);
    let mut x_refl = Vec::with_capacity(n);
    let mut l = Vec::with_capacity(n);
    x.push(xi);
    x_refl.push(xi);
    l.push(0.0);

    let (mut free, mut refl, mut reg) = (xi, xi, 0.0_f64);
    for (k, &dw) in increments.iter().enumerate() {
        let t = pts[k];
        let dt = pts[k + 1] - t;
        free = free + problem.mu(t, free) * dt + problem.sigma(t, free) * dw;
        let prop = refl + problem.mu(t, refl) * dt + problem.sigma(t, refl) * dw;
        if !free.is_finite() || !prop.is_finite() {
            return Err(SimError::NonFiniteState { step: k + 1, t: pts[k + 1] });
        }
        let b_next = bvals[k + 1];
        if prop > b_next {
            reg += prop - b_next;
            refl = b_next;
        } else {
            refl = prop;
        }
        x.push(free);
        x_refl.push(refl);
        l.push(reg);
    }

    let tau_b = hitting_index(&x, &bvals).map_or(grid.t_end(), |k| pts[k]);
    Ok(ReflectedPath { grid: grid.clone(), x, x_refl, l, tau_b })
}

fn hitting_index(states: &[f64], bvals: &[f64]) -> Option<usize> {
    states.iter().zip(bvals).position(|(&x, &b)| x >= b)
}

/// First grid time at which the path reaches the barrier (`x >= b`), capped
/// at the grid end.
pub fn hitting_time(states: &[f64], barrier: &Barrier, grid: &TimeGrid) -> Result<f64, SimError> {
    let bvals = barrier_on_grid(barrier, grid)?;
    Ok(hitting_index(states, &bvals).map_or(grid.t_end(), |k| grid.points()[k]))
}

// ---------------------------------------------------------------------------
// Fused path functionals for the Monte Carlo estimators.
// ---------------------------------------------------------------------------

/// Per-(grid, barrier) context for integrating the gain rate along paths
/// without materializing trajectories.
pub(crate) struct PathIntegrator {
    pts: Vec<f64>,
    sqrt_dts: Vec<f64>,
    bvals: Vec<f64>,
}

impl PathIntegrator {
    pub(crate) fn new(barrier: &Barrier, grid: &TimeGrid) -> Result<Self, SimError> {
        let bvals = barrier_on_grid(barrier, grid)?;
        let pts = grid.points().to_vec();
        let sqrt_dts = (0..grid.n_steps()).map(|k| (pts[k + 1] - pts[k]).sqrt()).collect();
        Ok(Self { pts, sqrt_dts, bvals })
    }

    pub(crate) fn start_barrier(&self) -> f64 {
        self.bvals[0]
    }

    /// Trapezoidal integral of `h` along the reflected path from `xi`.
    pub(crate) fn reflected_gain(
        &self,
        problem: &Problem,
        xi: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<f64, SimError> {
        let n_steps = self.sqrt_dts.len();
        let mut x = xi;
        let mut h_prev = problem.gain_rate(self.pts[0], x)?;
        let mut acc = 0.0;
        for k in 0..n_steps {
            let t = self.pts[k];
            let t_next = self.pts[k + 1];
            let dt = t_next - t;
            let z: f64 = rng.sample(StandardNormal);
            let dw = z * self.sqrt_dts[k];
            let prop = x + problem.mu(t, x) * dt + problem.sigma(t, x) * dw;
            if !prop.is_finite() {
                return Err(SimError::NonFiniteState { step: k + 1, t: t_next });
            }
            x = prop.min(self.bvals[k + 1]);
            let h_next = problem.gain_rate_unchecked(t_next, x);
            if !h_next.is_finite() {
                // Re-evaluate with the checked path to name the culprit.
                problem.gain_rate(t_next, x)?;
                return Err(SimError::NonFiniteState { step: k + 1, t: t_next });
            }
            acc += 0.5 * dt * (h_prev + h_next);
            h_prev = h_next;
        }
        Ok(acc)
    }

    /// Trapezoidal integral of `h * 1{x <= b}` along the free path from `x0`.
    ///
    /// The left endpoint tests the indicator against the *next* grid point's
    /// barrier value (the right limit along the grid), so a start exactly on
    /// a falling barrier contributes nothing, matching the continuous-time
    /// integral which ignores the single initial instant.
    pub(crate) fn indicator_gain(
        &self,
        problem: &Problem,
        x0: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<f64, SimError> {
        let n_steps = self.sqrt_dts.len();
        let mut x = x0;
        let mut phi_prev = if x0 <= self.bvals[1.min(n_steps)] {
            problem.gain_rate(self.pts[0], x0)?
        } else {
            0.0
        };
        let mut acc = 0.0;
        for k in 0..n_steps {
            let t = self.pts[k];
            let t_next = self.pts[k + 1];
            let dt = t_next - t;
            let z: f64 = rng.sample(StandardNormal);
            let dw = z * self.sqrt_dts[k];
            x = x + problem.mu(t, x) * dt + problem.sigma(t, x) * dw;
            if !x.is_finite() {
                return Err(SimError::NonFiniteState { step: k + 1, t: t_next });
            }
            let phi_next = if x <= self.bvals[k + 1] {
                let h = problem.gain_rate_unchecked(t_next, x);
                if !h.is_finite() {
                    problem.gain_rate(t_next, x)?;
                    return Err(SimError::NonFiniteState { step: k + 1, t: t_next });
                }
                h
            } else {
                0.0
            };
            acc += 0.5 * dt * (phi_prev + phi_next);
            phi_prev = phi_next;
        }
        Ok(acc)
    }
}

// ---------------------------------------------------------------------------
// Pathwise property checks.
// ---------------------------------------------------------------------------

/// Configuration for [`check_pathwise_properties`].
#[derive(Debug, Clone)]
pub struct PathwiseCheckConfig {
    pub n_paths: usize,
    pub seeds: Vec<u64>,
    pub max_step: f64,
    /// Start offsets below the barrier: the two compared starts are
    /// `b(0) - offset_low` and `b(0) - offset_high` with `offset_low >=
    /// offset_high` so the first start is the lower one.
    pub offset_low: f64,
    pub offset_high: f64,
}

impl Default for PathwiseCheckConfig {
    fn default() -> Self {
        Self { n_paths: 100, seeds: vec![0], max_step: 5e-3, offset_low: 1.5, offset_high: 0.5 }
    }
}

/// One violated pathwise property.
#[derive(Debug, Clone)]
pub struct PropertyViolation {
    pub property: &'static str,
    pub seed: u64,
    pub path: u64,
    pub step: usize,
    pub detail: String,
}

/// Outcome of the pathwise property suite.
#[derive(Debug, Clone)]
pub struct PathwiseReport {
    pub paths_checked: usize,
    pub violations: Vec<PropertyViolation>,
}

impl PathwiseReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

const MAX_RECORDED_VIOLATIONS: usize = 64;

/// Asserts, exactly at grid points and on shared noise, the structural
/// properties of the reflection scheme: domination below the barrier,
/// regulator monotonicity and complementarity, minimality before the hitting
/// time, both comparison principles, the restart (flow) property, and
/// absorption at downward barrier jumps.
pub fn check_pathwise_properties(
    problem: &Problem,
    barrier: &Barrier,
    cfg: &PathwiseCheckConfig,
) -> Result<PathwiseReport, SimError> {
    let horizon = problem.horizon();
    let grid = TimeGrid::with_anchors(
        0.0,
        horizon,
        cfg.max_step,
        &barrier.knot_times_within(0.0, horizon),
    )?;
    let bvals = barrier_on_grid(barrier, &grid)?;
    let b0 = bvals[0];
    let xi_low = b0 - cfg.offset_low;
    let xi_high = b0 - cfg.offset_high;
    let pts = grid.points().to_vec();
    let restart_at = grid.n_steps() / 2;

    let mut report = PathwiseReport { paths_checked: 0, violations: Vec::new() };
    let record = |violations: &mut Vec<PropertyViolation>, v: PropertyViolation| {
        if violations.len() < MAX_RECORDED_VIOLATIONS {
            violations.push(v);
        }
    };

    for &seed in &cfg.seeds {
        for path in 0..cfg.n_paths as u64 {
            let stream = NoiseStream::new(seed, path);
            let increments = stream.increments(&grid);
            let low = reflect_with_increments(problem, barrier, xi_low, &grid, &increments)?;
            let high = reflect_with_increments(problem, barrier, xi_high, &grid, &increments)?;
            report.paths_checked += 1;

            for (which, p) in [("low", &low), ("high", &high)] {
                if p.l[0] != 0.0 {
                    record(&mut report.violations, PropertyViolation {
                        property: "regulator-start",
                        seed,
                        path,
                        step: 0,
                        detail: format!("l[0] = {} on {which} path", p.l[0]),
                    });
                }
                for k in 0..pts.len() {
                    if p.x_refl[k] > bvals[k] {
                        record(&mut report.violations, PropertyViolation {
                            property: "domination",
                            seed,
                            path,
                            step: k,
                            detail: format!("x_refl {} > b {} ({which})", p.x_refl[k], bvals[k]),
                        });
                    }
                    if p.x_refl[k] > p.x[k] {
                        record(&mut report.violations, PropertyViolation {
                            property: "comparison-vs-free",
                            seed,
                            path,
                            step: k,
                            detail: format!("x_refl {} > x {} ({which})", p.x_refl[k], p.x[k]),
                        });
                    }
                    if k > 0 {
                        if p.l[k] < p.l[k - 1] {
                            record(&mut report.violations, PropertyViolation {
                                property: "regulator-monotone",
                                seed,
                                path,
                                step: k,
                                detail: format!("l decreased {} -> {} ({which})", p.l[k - 1], p.l[k]),
                            });
                        }
                        if p.l[k] > p.l[k - 1] && p.x_refl[k] != bvals[k] {
                            record(&mut report.violations, PropertyViolation {
                                property: "regulator-complementarity",
                                seed,
                                path,
                                step: k,
                                detail: format!(
                                    "l increased off the barrier: x_refl {} vs b {} ({which})",
                                    p.x_refl[k], bvals[k]
                                ),
                            });
                        }
                    }
                    if pts[k] < p.tau_b && p.x_refl[k] != p.x[k] {
                        record(&mut report.violations, PropertyViolation {
                            property: "minimality",
                            seed,
                            path,
                            step: k,
                            detail: format!(
                                "x_refl {} != x {} before tau_b ({which})",
                                p.x_refl[k], p.x[k]
                            ),
                        });
                    }
                }
            }

            for k in 0..pts.len() {
                if low.x_refl[k] > high.x_refl[k] {
                    record(&mut report.violations, PropertyViolation {
                        property: "comparison-reflected",
                        seed,
                        path,
                        step: k,
                        detail: format!("{} > {}", low.x_refl[k], high.x_refl[k]),
                    });
                }
                if low.x[k] > high.x[k] {
                    record(&mut report.violations, PropertyViolation {
                        property: "comparison-free",
                        seed,
                        path,
                        step: k,
                        detail: format!("{} > {}", low.x[k], high.x[k]),
                    });
                }
            }

            // Restart from the reflected state mid-path with the residual
            // noise; the tail must reproduce bit-for-bit.
            let tail_grid = grid.suffix(restart_at);
            let restarted = reflect_with_increments(
                problem,
                barrier,
                low.x_refl[restart_at],
                &tail_grid,
                &increments[restart_at..],
            )?;
            for (j, k) in (restart_at..pts.len()).enumerate() {
                if restarted.x_refl[j] != low.x_refl[k] {
                    record(&mut report.violations, PropertyViolation {
                        property: "flow",
                        seed,
                        path,
                        step: k,
                        detail: format!(
                            "restarted {} != original {}",
                            restarted.x_refl[j], low.x_refl[k]
                        ),
                    });
                }
            }

            // Absorption: whenever the unprojected proposal exceeds the next
            // barrier value (in particular across downward jumps), the
            // reflected state must land exactly on the barrier.
            for (which, p) in [("low", &low), ("high", &high)] {
                for k in 0..grid.n_steps() {
                    let t = pts[k];
                    let dt = pts[k + 1] - t;
                    let xr = p.x_refl[k];
                    let prop = xr + problem.mu(t, xr) * dt + problem.sigma(t, xr) * increments[k];
                    if prop > bvals[k + 1] && p.x_refl[k + 1] != bvals[k + 1] {
                        record(&mut report.violations, PropertyViolation {
                            property: "absorption",
                            seed,
                            path,
                            step: k + 1,
                            detail: format!(
                                "proposal {} above b {} but x_refl {} ({which})",
                                prop,
                                bvals[k + 1],
                                p.x_refl[k + 1]
                            ),
                        });
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Fraction of paths whose free trajectory reaches the barrier before the
/// horizon, starting from `x0` at time zero.
pub fn hit_fraction(
    problem: &Problem,
    barrier: &Barrier,
    x0: f64,
    n_paths: usize,
    seed: u64,
    max_step: f64,
) -> Result<f64, SimError> {
    let horizon = problem.horizon();
    let grid = TimeGrid::with_anchors(
        0.0,
        horizon,
        max_step,
        &barrier.knot_times_within(0.0, horizon),
    )?;
    let bvals = barrier_on_grid(barrier, &grid)?;
    let mut hits = 0usize;
    for path in 0..n_paths as u64 {
        let states = simulate_unreflected(problem, x0, &grid, NoiseStream::new(seed, path))?;
        if hitting_index(&states, &bvals).is_some() {
            hits += 1;
        }
    }
    Ok(hits as f64 / n_paths as f64)
}
