//! Optimal stopping boundaries from the nonlinear integral equation.
//!
//! A regular cut-off `b` makes its hitting rule optimal exactly when
//!
//! ```text
//! Phi(t, b(t)) = E[ int_t^T h(s, Xr_s^{t, b(t)}) ds ] = 0   for all t,
//! ```
//!
//! where `Xr` is reflected below `b` on `(t, T]`. The condition is both
//! necessary and sufficient under single crossing, which is what makes the
//! backward solve here well posed. For cross-checks the module also
//! evaluates the classical early-exercise-premium form
//!
//! ```text
//! Psi(t) = E[ int_t^T h(s, X_s^{t, b(t)}) 1{X_s <= b(s)} ds ]
//! ```
//!
//! along *unreflected* paths, which is necessary but not sufficient: in the
//! static case every strictly decreasing barrier zeroes `Psi` while only the
//! true boundary zeroes `Phi`.
//!
//! # Solver
//!
//! [`solve_boundary`] walks the solver grid backward. The terminal value
//! comes from the localized condition `h(T, b(T)) = 0` (the equation's
//! leading behaviour as `t -> T`), overridable by the caller. At each
//! earlier node the trial value `x` is joined to the already-solved tail by
//! the output interpolation rule, and `x` is bisected on the Monte Carlo
//! residual under common random numbers: one frozen noise bank per node
//! makes the residual pathwise non-increasing in `x` (comparison principle
//! plus single crossing), so bisection is valid despite the noise, and the
//! monotonicity is asserted on every trace. Nodes whose residual does not
//! change sign on the bracket are flagged with the bracket edge rather than
//! inventing a root.

use rayon::prelude::*;
use thiserror::Error;

use crate::barrier::{Barrier, BarrierError, Interpolation, Knot};
use crate::model::{check_single_crossing, EvalError, Problem, SingleCrossingReport};
use crate::paths::{subseed, PathIntegrator, SimError, TimeGrid};
use crate::transfer::{mean_stderr, monte_carlo, McConfig, TransferError};

#[derive(Debug, Clone, Error)]
pub enum SolveError {
    #[error("evaluation time {t} outside [0, {horizon}]")]
    BadTime { t: f64, horizon: f64 },
    #[error("bracket must satisfy lo < hi, got ({lo}, {hi})")]
    BadBracket { lo: f64, hi: f64 },
    #[error("solver grid must be sorted, start at 0 and end at the horizon: {0}")]
    BadSolverGrid(String),
    #[error("terminal condition h(T, x) = 0 has no sign change on the bracket: h({lo}) = {h_lo}, h({hi}) = {h_hi}; supply the terminal value explicitly")]
    TerminalNoRoot { lo: f64, hi: f64, h_lo: f64, h_hi: f64 },
    #[error("terminal condition h(T, x) vanishes across the whole bracket; every value is a root")]
    TerminalDegenerate,
    #[error("residual not monotone in the trial value at node t={t}: r({x_lo}) = {r_lo} < r({x_hi}) = {r_hi}; single crossing or the comparison principle is violated")]
    NonMonotoneResidual { t: f64, x_lo: f64, x_hi: f64, r_lo: f64, r_hi: f64 },
    #[error("bisection budget exhausted at node t={t}, bracket width {width}")]
    BisectionBudget { t: f64, width: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
    #[error(transparent)]
    Mc(#[from] TransferError),
}

/// Monte Carlo residual of the integral equation at one `(t, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub t: f64,
    pub x: f64,
    pub residual: f64,
    pub stderr: f64,
    pub n_paths: usize,
    /// The start value exceeded the barrier at `t` and was clipped down.
    pub start_clipped: bool,
}

/// Residual `Phi(t, x)` of the reflected-form equation: expected gain-rate
/// integral along the path reflected below `barrier` on `(t, T]`, started at
/// `x` (clipped to the barrier when infeasible at `t` itself).
pub fn reflected_residual(
    problem: &Problem,
    barrier: &Barrier,
    t: f64,
    x: f64,
    cfg: &McConfig,
) -> Result<ResidualReport, SolveError> {
    let horizon = problem.horizon();
    if !(0.0..horizon).contains(&t) {
        return Err(SolveError::BadTime { t, horizon });
    }
    let grid = TimeGrid::with_anchors(
        t,
        horizon,
        cfg.max_step,
        &barrier.knot_times_within(t, horizon),
    )
    .map_err(SimError::from)?;
    let integrator = PathIntegrator::new(barrier, &grid)?;
    let b_at = integrator.start_barrier();
    let (xi, start_clipped) = if x > b_at { (b_at, true) } else { (x, false) };
    let (residual, stderr) = monte_carlo(cfg, |rng| integrator.reflected_gain(problem, xi, rng))?;
    Ok(ResidualReport { t, x, residual, stderr, n_paths: cfg.n_paths, start_clipped })
}

/// Residual `Psi(t)` of the indicator-form equation: expected gain-rate
/// integral along the *unreflected* path from `b(t)`, counting only states
/// at or below the barrier.
pub fn indicator_residual(
    problem: &Problem,
    barrier: &Barrier,
    t: f64,
    cfg: &McConfig,
) -> Result<ResidualReport, SolveError> {
    let horizon = problem.horizon();
    if !(0.0..horizon).contains(&t) {
        return Err(SolveError::BadTime { t, horizon });
    }
    let grid = TimeGrid::with_anchors(
        t,
        horizon,
        cfg.max_step,
        &barrier.knot_times_within(t, horizon),
    )
    .map_err(SimError::from)?;
    let integrator = PathIntegrator::new(barrier, &grid)?;
    let x0 = integrator.start_barrier();
    let (residual, stderr) = monte_carlo(cfg, |rng| integrator.indicator_gain(problem, x0, rng))?;
    Ok(ResidualReport { t, x: x0, residual, stderr, n_paths: cfg.n_paths, start_clipped: false })
}

/// Root of `x -> h(T, x)` by bisection, using that `h` is non-increasing in
/// `x`. Needs `h(T, lo) >= 0 >= h(T, hi)`.
pub fn terminal_boundary(
    problem: &Problem,
    bracket: (f64, f64),
    tol_x: f64,
) -> Result<f64, SolveError> {
    let (value, degenerate) = terminal_root(problem, bracket, tol_x)?;
    if degenerate {
        return Err(SolveError::TerminalDegenerate);
    }
    Ok(value)
}

fn terminal_root(
    problem: &Problem,
    bracket: (f64, f64),
    tol_x: f64,
) -> Result<(f64, bool), SolveError> {
    let horizon = problem.horizon();
    let (mut lo, mut hi) = bracket;
    let bracket_ok = lo.is_finite() && hi.is_finite() && lo < hi;
    if !bracket_ok {
        return Err(SolveError::BadBracket { lo, hi });
    }
    let h = |x: f64| problem.gain_rate(horizon, x);
    let h_lo = h(lo)?;
    let h_hi = h(hi)?;
    if h_lo == 0.0 && h_hi == 0.0 {
        return Ok((0.5 * (lo + hi), true));
    }
    if h_lo < 0.0 || h_hi > 0.0 {
        return Err(SolveError::TerminalNoRoot { lo, hi, h_lo, h_hi });
    }
    while hi - lo > tol_x {
        let mid = 0.5 * (lo + hi);
        let h_mid = h(mid)?;
        if h_mid == 0.0 {
            return Ok((mid, false));
        }
        if h_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi), false))
}

/// Solver configuration for [`solve_boundary`].
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Node times, sorted, starting at 0 and ending at the horizon. May be
    /// coarser than the simulation grid.
    pub time_grid: Vec<f64>,
    /// Initial root bracket `(x_lo, x_hi)` used at every node.
    pub bracket: (f64, f64),
    /// Bisection tolerance on the boundary value.
    pub tol_x: f64,
    pub mc: McConfig,
    pub max_bisections: usize,
    /// Freeze one noise bank per node so the residual is pathwise monotone
    /// in the trial value and bisection is exact conditional on the bank.
    pub crn: bool,
    /// `|residual|` accepted at a solved node beyond its own three-sigma band.
    pub residual_tol: f64,
    /// Caller-supplied terminal value, bypassing the localized root.
    pub terminal_override: Option<f64>,
    /// Interpolation rule of the output barrier (and of the candidate tails
    /// during the solve).
    pub interpolation: Interpolation,
}

impl SolverConfig {
    pub fn new(time_grid: Vec<f64>, bracket: (f64, f64), mc: McConfig) -> Self {
        Self {
            time_grid,
            bracket,
            tol_x: 1e-3,
            mc,
            max_bisections: 80,
            crn: true,
            residual_tol: 1e-6,
            terminal_override: None,
            interpolation: Interpolation::Linear,
        }
    }
}

/// How a solver node was resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeFlag {
    /// Bisection converged to `tol_x`.
    Converged,
    /// Residual positive across the bracket: the root lies above; the value
    /// records the upper bracket edge.
    AboveBracket,
    /// Residual negative across the bracket: the root lies below; the value
    /// records the lower bracket edge.
    BelowBracket,
    /// Residual statistically zero across the bracket: every value is a root.
    Degenerate,
    /// Residual at the solved value exceeds `max(3 stderr, residual_tol)`.
    ResidualAboveTolerance,
    /// Terminal node solved from `h(T, x) = 0`.
    TerminalRoot,
    /// Terminal node fixed by the caller override.
    TerminalOverride,
    /// Terminal condition degenerate (`h(T, .) = 0` on the bracket).
    TerminalDegenerate,
}

impl NodeFlag {
    /// Flags that leave the node's value meaningful.
    pub fn is_resolved(self) -> bool {
        matches!(self, NodeFlag::Converged | NodeFlag::TerminalRoot | NodeFlag::TerminalOverride)
    }
}

/// One bisection iterate in a node's audit trail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Iterate {
    pub x: f64,
    pub residual: f64,
    pub stderr: f64,
}

/// Outcome at one solver node.
#[derive(Debug, Clone)]
pub struct NodeReport {
    pub t: f64,
    pub value: f64,
    pub flag: NodeFlag,
    /// Residual re-evaluated at the solved value (NaN for the terminal node,
    /// whose condition is deterministic).
    pub residual: f64,
    pub stderr: f64,
    pub trace: Vec<Iterate>,
}

/// Solved boundary with per-node audit data.
#[derive(Debug, Clone)]
pub struct BoundarySolution {
    pub barrier: Barrier,
    /// Node reports in ascending time order (terminal node last).
    pub nodes: Vec<NodeReport>,
    /// Single-crossing probe over the solver grid and bracket; when violated
    /// the equation's sufficiency hypothesis fails and outputs carry this
    /// marker.
    pub single_crossing: SingleCrossingReport,
}

impl BoundarySolution {
    /// All nodes resolved cleanly.
    pub fn fully_resolved(&self) -> bool {
        self.nodes.iter().all(|n| n.flag.is_resolved())
    }
}

/// Solves the integral equation for the stopping boundary on the solver
/// grid, backward from the terminal condition.
pub fn solve_boundary(problem: &Problem, cfg: &SolverConfig) -> Result<BoundarySolution, SolveError> {
    let horizon = problem.horizon();
    let grid = &cfg.time_grid;
    if grid.len() < 2
        || grid[0] != 0.0
        || *grid.last().expect("nonempty") != horizon
        || grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(SolveError::BadSolverGrid(format!(
            "got {} nodes on [{:?}, {:?}]",
            grid.len(),
            grid.first(),
            grid.last()
        )));
    }
    let (lo, hi) = cfg.bracket;
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(SolveError::BadBracket { lo, hi });
    }

    let probe_states: Vec<f64> =
        (0..=20).map(|i| lo + (hi - lo) * (i as f64) / 20.0).collect();
    let single_crossing = check_single_crossing(problem, grid, &probe_states)?;

    // Terminal node.
    let n = grid.len();
    let mut values = vec![f64::NAN; n];
    let mut reports: Vec<Option<NodeReport>> = (0..n).map(|_| None).collect();
    let terminal_flag;
    match cfg.terminal_override {
        Some(v) => {
            values[n - 1] = v;
            terminal_flag = NodeFlag::TerminalOverride;
        }
        None => {
            let (v, degenerate) = terminal_root(problem, cfg.bracket, cfg.tol_x)?;
            values[n - 1] = v;
            terminal_flag =
                if degenerate { NodeFlag::TerminalDegenerate } else { NodeFlag::TerminalRoot };
        }
    }
    reports[n - 1] = Some(NodeReport {
        t: horizon,
        value: values[n - 1],
        flag: terminal_flag,
        residual: f64::NAN,
        stderr: f64::NAN,
        trace: Vec::new(),
    });

    // Backward sweep.
    for k in (0..n - 1).rev() {
        let t_k = grid[k];
        let node_seed = subseed(cfg.mc.seed, k as u64);
        let sim_grid =
            TimeGrid::with_anchors(t_k, horizon, cfg.mc.max_step, &grid[k + 1..])
                .map_err(SimError::from)?;

        // Candidate barrier: trial value at this node joined to the solved
        // tail by the output interpolation rule (extended flat back to 0 so
        // the barrier covers its full domain; only [t_k, T] is simulated).
        let tail: Vec<(f64, f64)> =
            (k + 1..n).map(|j| (grid[j], values[j])).collect();
        let make_candidate = |x: f64| -> Result<Barrier, BarrierError> {
            let mut knots = Vec::with_capacity(tail.len() + 2);
            if t_k > 0.0 {
                knots.push(Knot::new(0.0, x));
            }
            knots.push(Knot::new(t_k, x));
            knots.extend(tail.iter().map(|&(t, v)| Knot::new(t, v)));
            Barrier::new(cfg.interpolation, knots)
        };

        let mut eval_count = 0u64;
        let mut trace: Vec<Iterate> = Vec::new();
        let mut eval = |x: f64, trace: &mut Vec<Iterate>| -> Result<(f64, f64), SolveError> {
            let candidate = make_candidate(x)?;
            let integrator = PathIntegrator::new(&candidate, &sim_grid)?;
            let seed = if cfg.crn { node_seed } else { subseed(node_seed, eval_count) };
            eval_count += 1;
            let mc = crate::transfer::McConfig { seed, ..cfg.mc };
            let (mean, se) =
                monte_carlo(&mc, |rng| integrator.reflected_gain(problem, x, rng))?;
            trace.push(Iterate { x, residual: mean, stderr: se });
            if cfg.crn {
                // Pathwise monotonicity of the residual in the trial value;
                // the margin only absorbs summation rounding.
                let scale = 1e-9 * (1.0 + mean.abs());
                for it in trace.iter() {
                    let bad = (it.x < x && it.residual < mean - scale)
                        || (it.x > x && it.residual > mean + scale);
                    if bad {
                        let (m1, m2) = if it.x < x { (it.x, x) } else { (x, it.x) };
                        let (r1, r2) = if it.x < x { (it.residual, mean) } else { (mean, it.residual) };
                        return Err(SolveError::NonMonotoneResidual {
                            t: t_k,
                            x_lo: m1,
                            x_hi: m2,
                            r_lo: r1,
                            r_hi: r2,
                        });
                    }
                }
            }
            Ok((mean, se))
        };

        let (r_lo, se_lo) = eval(lo, &mut trace)?;
        let (r_hi, se_hi) = eval(hi, &mut trace)?;
        let zero_band = |r: f64, se: f64| r.abs() <= (3.0 * se).max(1e-12);

        let (value, flag, residual, stderr) = if zero_band(r_lo, se_lo) && zero_band(r_hi, se_hi) {
            (0.5 * (lo + hi), NodeFlag::Degenerate, r_lo, se_lo)
        } else if r_lo < 0.0 && r_hi < 0.0 {
            (lo, NodeFlag::BelowBracket, r_lo, se_lo)
        } else if r_lo > 0.0 && r_hi > 0.0 {
            (hi, NodeFlag::AboveBracket, r_hi, se_hi)
        } else if r_lo < 0.0 && r_hi > 0.0 {
            return Err(SolveError::NonMonotoneResidual {
                t: t_k,
                x_lo: lo,
                x_hi: hi,
                r_lo,
                r_hi,
            });
        } else {
            let (mut xl, mut xh) = (lo, hi);
            let mut iters = 0usize;
            while xh - xl > cfg.tol_x {
                if iters >= cfg.max_bisections {
                    return Err(SolveError::BisectionBudget { t: t_k, width: xh - xl });
                }
                iters += 1;
                let mid = 0.5 * (xl + xh);
                let (r_mid, _) = eval(mid, &mut trace)?;
                if r_mid >= 0.0 {
                    xl = mid;
                } else {
                    xh = mid;
                }
            }
            let root = 0.5 * (xl + xh);
            let (r, se) = eval(root, &mut trace)?;
            let flag = if r.abs() <= (3.0 * se).max(cfg.residual_tol) {
                NodeFlag::Converged
            } else {
                NodeFlag::ResidualAboveTolerance
            };
            (root, flag, r, se)
        };

        values[k] = value;
        reports[k] = Some(NodeReport { t: t_k, value, flag, residual, stderr, trace });
    }

    let knots: Vec<Knot> =
        grid.iter().zip(&values).map(|(&t, &v)| Knot::new(t, v)).collect();
    let barrier = Barrier::new(cfg.interpolation, knots)?;
    let nodes: Vec<NodeReport> = reports.into_iter().map(|r| r.expect("filled")).collect();
    Ok(BoundarySolution { barrier, nodes, single_crossing })
}

/// Residuals of a *given* barrier at the solver nodes (diagnostic; used to
/// audit external barrier files against the equation).
pub fn residuals_on_grid(
    problem: &Problem,
    barrier: &Barrier,
    times: &[f64],
    cfg: &McConfig,
) -> Result<Vec<ResidualReport>, SolveError> {
    times
        .par_iter()
        .enumerate()
        .map(|(j, &t)| {
            let sub = McConfig { seed: subseed(cfg.seed, j as u64), ..*cfg };
            let x = barrier.eval(t)?;
            reflected_residual(problem, barrier, t, x, &sub)
        })
        .collect()
}

/// Mean and standard error helper re-exported for report assembly.
pub fn summarize(values: &[f64]) -> (f64, f64) {
    mean_stderr(values)
}
