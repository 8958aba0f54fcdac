//! Numerical toolkit for inverse optimal stopping of one-dimensional
//! diffusions.
//!
//! Given a diffusion `dX = mu dt + sigma dW`, a flow payoff `f` and a
//! terminal payoff `g`, a *cut-off rule* stops the first time `X` rises to a
//! time-dependent barrier `b`. This crate provides, end to end:
//!
//! - simulation of `X` and of its version reflected below `b` through the
//!   one-sided Skorokhod map, with jump-absorbing barriers ([`paths`]);
//! - the time-dependent transfer `pi(t)` that makes the rule for a *given*
//!   barrier optimal, computed by Monte Carlo as the expected integral of the
//!   gain rate `h = f + g_t + mu g_x + sigma^2 g_xx / 2` along reflected
//!   paths started on the barrier, plus a quadrature closed form in the
//!   Brownian case ([`transfer`]);
//! - a solver for the nonlinear integral equation `E[int_t^T h(s,
//!   X~_s^{t,b(t)}) ds] = 0` characterizing *optimal* stopping boundaries,
//!   via backward bisection on common random numbers, together with the
//!   classical indicator-form residual for cross-checks ([`boundary`]);
//! - an independent trinomial-lattice dynamic-programming oracle that prices
//!   the stopping problem directly and verifies implementability of a
//!   (barrier, transfer) pair without touching the Monte Carlo machinery
//!   ([`oracle`]).
//!
//! Everything is deterministic given the seeds recorded in run manifests:
//! path-level noise comes from per-path ChaCha8 streams and results are
//! reduced in index order, so outputs are bit-identical across re-runs and
//! worker counts.

pub mod barrier;
pub mod boundary;
pub mod model;
pub mod oracle;
pub mod paths;
pub mod transfer;

pub use barrier::{Barrier, BarrierError, Interpolation, JumpInfo, Knot, RegularityReport};
pub use boundary::{
    indicator_residual, reflected_residual, residuals_on_grid, solve_boundary, terminal_boundary,
    BoundarySolution, Iterate, NodeFlag, NodeReport, ResidualReport, SolveError, SolverConfig,
};
pub use model::{
    check_single_crossing, verify_partials, Coef, CoefConfig, DiffusionSpec, EvalError,
    ModelError, PartialsCheck, PayoffSpec, Problem, ProblemConfig, ProblemConfigError,
    SingleCrossingReport, TerminalConfig, TerminalPayoff,
};
pub use oracle::{
    check_implementability, dp_stop_boundary, dp_value, extract_boundary, reflection_cdf_check,
    CdfCheckReport, ImplementabilityReport, Lattice, LatticeError, RowStatus, StrictCheck,
    StrictReport, ValueSurface,
};
pub use paths::{
    check_pathwise_properties, hit_fraction, hitting_time, reflect, reflect_with_increments,
    simulate_unreflected, subseed, GridError, NoiseStream, PathwiseCheckConfig, PathwiseReport,
    ReflectedPath, SimError, TimeGrid,
};
pub use transfer::{
    bm_closed_form, check_transfer_properties, transfer_at, transfer_curve, KnotCheck, McConfig,
    QuadratureConfig, QuadratureResult, TransferCurve, TransferError, TransferPropertiesReport,
};
