//! Run configuration: one TOML file drives every subcommand.
//!
//! Common sections: `[problem]` (built-in coefficient and payoff families),
//! `[barrier]` (a barrier file path or inline knots) and `[mc]`. Each
//! subcommand reads its own section on top of those. Every run writes a
//! `manifest.toml` echoing the fully resolved configuration and seed before
//! any computation starts.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use invstop_core::{
    Barrier, Interpolation, Knot, McConfig, ProblemConfig, SolverConfig,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Base seed; overridden by `--seed` or `INVSTOP_SEED`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub problem: ProblemConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub barrier: Option<BarrierConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<McSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transfer: Option<TransferSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check_properties: Option<CheckPropertiesSection>,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text)
            .with_context(|| format!("cannot parse config file {}", path.display()))?;
        Ok(cfg)
    }

    /// Loads the barrier named by `[barrier]`, resolving a relative file
    /// path against the config file's directory.
    pub fn load_barrier(&self, config_dir: &Path) -> Result<Barrier> {
        let section = self
            .barrier
            .as_ref()
            .context("config is missing the [barrier] section")?;
        match (&section.file, &section.knots) {
            (Some(file), None) => {
                let path = if file.is_relative() { config_dir.join(file) } else { file.clone() };
                let text = std::fs::read_to_string(&path).with_context(|| {
                    format!("cannot read barrier file {}", path.display())
                })?;
                Barrier::from_file_str(&text)
                    .with_context(|| format!("bad barrier file {}", path.display()))
            }
            (None, Some(_)) => section.build_inline(),
            (Some(_), Some(_)) => bail!("[barrier] must set either `file` or inline knots, not both"),
            (None, None) => bail!("[barrier] must set either `file` or inline knots"),
        }
    }

    pub fn mc_config(&self, seed: u64) -> Result<McConfig> {
        let mc = self.mc.as_ref().context("config is missing the [mc] section")?;
        McConfig::new(mc.n_paths, seed, mc.max_step).map_err(Into::into)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierConfig {
    /// Barrier file in the plain-text knot format.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// Inline alternative: `constant` or `linear` ...
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interpolation: Option<String>,
    /// ... with knots as `[t, value]` or `[t, value, left_value]` rows.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<Vec<f64>>>,
}

impl BarrierConfig {
    fn build_inline(&self) -> Result<Barrier> {
        let interp_name = self
            .interpolation
            .as_deref()
            .context("[barrier] inline form needs `interpolation`")?;
        let interpolation = match interp_name {
            "constant" => Interpolation::Constant,
            "linear" => Interpolation::Linear,
            other => bail!("unknown interpolation `{other}` (use constant|linear)"),
        };
        let rows = self.knots.as_ref().context("[barrier] inline form needs `knots`")?;
        let mut knots = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            match row.as_slice() {
                [t, v] => knots.push(Knot::new(*t, *v)),
                [t, v, left] => knots.push(Knot::with_left(*t, *v, *left)),
                _ => bail!("barrier knot {i} must have 2 or 3 entries, got {}", row.len()),
            }
        }
        Barrier::new(interpolation, knots).map_err(Into::into)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub n_paths: usize,
    pub max_step: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// Number of paths written as CSV files (and summarized).
    pub n_paths: usize,
    pub x0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferSection {
    pub times: TimesSpec,
    /// Also evaluate the Brownian quadrature closed form per time (requires
    /// a driftless constant-volatility problem and a constant barrier).
    #[serde(default)]
    pub closed_form: bool,
}

/// Evaluation times: an equispaced count over `[0, T]` or an explicit list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimesSpec {
    Count { count: usize },
    List { list: Vec<f64> },
}

impl TimesSpec {
    pub fn materialize(&self, horizon: f64) -> Result<Vec<f64>> {
        match self {
            TimesSpec::Count { count } => {
                if *count < 1 {
                    bail!("times.count must be at least 1");
                }
                if *count == 1 {
                    return Ok(vec![horizon]);
                }
                Ok((0..*count)
                    .map(|i| horizon * i as f64 / (*count as f64 - 1.0))
                    .collect())
            }
            TimesSpec::List { list } => {
                if list.is_empty() {
                    bail!("times.list must not be empty");
                }
                Ok(list.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    /// Number of equispaced solver nodes on `[0, T]` (alternative: `times`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    pub bracket: [f64; 2],
    #[serde(default = "default_tol_x")]
    pub tol_x: f64,
    #[serde(default = "default_max_bisections")]
    pub max_bisections: usize,
    #[serde(default = "default_true")]
    pub crn: bool,
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminal_override: Option<f64>,
}

fn default_tol_x() -> f64 {
    1e-3
}
fn default_max_bisections() -> usize {
    80
}
fn default_true() -> bool {
    true
}
fn default_residual_tol() -> f64 {
    1e-6
}

impl SolverSection {
    pub fn build(&self, horizon: f64, mc: McConfig) -> Result<SolverConfig> {
        let times = match (&self.nodes, &self.times) {
            (Some(n), None) => {
                if *n < 2 {
                    bail!("solver.nodes must be at least 2");
                }
                (0..*n).map(|i| horizon * i as f64 / (*n as f64 - 1.0)).collect()
            }
            (None, Some(list)) => list.clone(),
            _ => bail!("[solver] must set exactly one of `nodes` or `times`"),
        };
        let mut cfg = SolverConfig::new(times, (self.bracket[0], self.bracket[1]), mc);
        cfg.tol_x = self.tol_x;
        cfg.max_bisections = self.max_bisections;
        cfg.crn = self.crn;
        cfg.residual_tol = self.residual_tol;
        cfg.terminal_override = self.terminal_override;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub dt: f64,
    pub dx: f64,
    pub x_min: f64,
    pub x_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Transfer source: `zero`, `estimate` (Monte Carlo at the lattice
    /// times) or `file`.
    pub transfer: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve_file: Option<PathBuf>,
    #[serde(default = "default_verify_tol")]
    pub tol: f64,
    #[serde(default)]
    pub scan_margin: f64,
}

fn default_verify_tol() -> f64 {
    0.01
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckPropertiesSection {
    pub times: TimesSpec,
    /// Distance of the extra curve nodes planted just before each barrier
    /// knot and before the horizon.
    #[serde(default = "default_straddle")]
    pub straddle: f64,
}

fn default_straddle() -> f64 {
    1e-3
}
