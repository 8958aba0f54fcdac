//! Subcommand implementations and the error-to-exit-code mapping.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use invstop_core::{
    barrier::Barrier,
    boundary::{solve_boundary as solve, SolveError, SolverConfig},
    model::{Coef, Problem},
    oracle::{check_implementability, Lattice, LatticeError},
    paths::{reflect, NoiseStream, TimeGrid},
    transfer::{
        bm_closed_form, check_transfer_properties, transfer_curve, McConfig, QuadratureConfig,
        TransferCurve, TransferError,
    },
};

use crate::config::RunConfig;

/// Error with an exit-code class.
#[derive(Debug)]
pub struct CliError {
    code: u8,
    source: anyhow::Error,
}

impl CliError {
    pub fn config(source: anyhow::Error) -> Self {
        Self { code: 2, source }
    }
    pub fn precondition(source: anyhow::Error) -> Self {
        Self { code: 3, source }
    }
    pub fn solver_no_root(source: anyhow::Error) -> Self {
        Self { code: 4, source }
    }
    pub fn verification(source: anyhow::Error) -> Self {
        Self { code: 5, source }
    }
    pub fn internal(source: anyhow::Error) -> Self {
        Self { code: 1, source }
    }
    pub fn exit_code(&self) -> u8 {
        self.code
    }
    pub fn source(&self) -> &anyhow::Error {
        &self.source
    }
}

fn classify_solve(err: SolveError) -> CliError {
    match &err {
        SolveError::TerminalNoRoot { .. } | SolveError::TerminalDegenerate => {
            CliError::solver_no_root(anyhow!(err))
        }
        SolveError::BadTime { .. } | SolveError::BadBracket { .. } => {
            CliError::precondition(anyhow!(err))
        }
        SolveError::BadSolverGrid(_) => CliError::config(anyhow!(err)),
        _ => CliError::internal(anyhow!(err)),
    }
}

fn classify_transfer(err: TransferError) -> CliError {
    match &err {
        TransferError::NotBrownian(_) | TransferError::BadTime { .. } => {
            CliError::precondition(anyhow!(err))
        }
        TransferError::Parse { .. } | TransferError::BadCurve(_)
        | TransferError::TooFewPaths(_) | TransferError::BadMaxStep(_) => {
            CliError::config(anyhow!(err))
        }
        _ => CliError::internal(anyhow!(err)),
    }
}

fn classify_lattice(err: LatticeError) -> CliError {
    match &err {
        LatticeError::Unstable { .. }
        | LatticeError::BadWeight { .. }
        | LatticeError::Precondition(_)
        | LatticeError::HorizonMismatch { .. } => CliError::precondition(anyhow!(err)),
        LatticeError::BadGeometry(_) => CliError::config(anyhow!(err)),
        _ => CliError::internal(anyhow!(err)),
    }
}

/// Resolved run context; preparing it writes the manifest.
pub struct Ctx {
    pub cfg: RunConfig,
    pub config_dir: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Ctx {
    pub fn prepare(
        cfg: RunConfig,
        config_dir: PathBuf,
        out_dir: PathBuf,
        seed: u64,
        command: &str,
    ) -> Result<Self> {
        std::fs::create_dir_all(&out_dir)
            .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
        let manifest = Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config: cfg.clone(),
        };
        let text = toml::to_string_pretty(&manifest).context("cannot serialize manifest")?;
        std::fs::write(out_dir.join("manifest.toml"), text)
            .with_context(|| format!("cannot write manifest into {}", out_dir.display()))?;
        Ok(Self { cfg, config_dir, out_dir, seed })
    }

    fn problem(&self) -> Result<Problem, CliError> {
        self.cfg.problem.build().map_err(|e| CliError::config(anyhow!(e)))
    }

    fn barrier(&self) -> Result<Barrier, CliError> {
        self.cfg.load_barrier(&self.config_dir).map_err(CliError::config)
    }

    fn mc(&self) -> Result<McConfig, CliError> {
        self.cfg.mc_config(self.seed).map_err(CliError::config)
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        std::fs::write(self.out_dir.join(name), contents)
            .with_context(|| format!("cannot write {name}"))
            .map_err(CliError::internal)
    }
}

#[derive(serde::Serialize)]
struct Manifest {
    command: String,
    version: String,
    seed: u64,
    config: RunConfig,
}

pub fn simulate(ctx: &Ctx) -> Result<(), CliError> {
    let problem = ctx.problem()?;
    let barrier = ctx.barrier()?;
    let mc = ctx.mc()?;
    let section = ctx
        .cfg
        .simulate
        .as_ref()
        .ok_or_else(|| CliError::config(anyhow!("config is missing the [simulate] section")))?;
    let horizon = problem.horizon();
    let grid = TimeGrid::with_anchors(
        0.0,
        horizon,
        mc.max_step,
        &barrier.knot_times_within(0.0, horizon),
    )
    .map_err(|e| CliError::config(anyhow!(e)))?;

    let b0 = barrier.eval(0.0).map_err(|e| CliError::internal(anyhow!(e)))?;
    if section.x0 > b0 {
        return Err(CliError::precondition(anyhow!(
            "start value {} above the barrier {b0} at t=0",
            section.x0
        )));
    }

    let mut hits = 0usize;
    let mut tau_sum = 0.0;
    for i in 0..section.n_paths {
        let path = reflect(&problem, &barrier, section.x0, &grid, NoiseStream::new(ctx.seed, i as u64))
            .map_err(|e| CliError::internal(anyhow!(e)))?;
        let mut csv = String::from("t,x,x_refl,l\n");
        for (k, &t) in grid.points().iter().enumerate() {
            let _ = writeln!(csv, "{},{},{},{}", t, path.x[k], path.x_refl[k], path.l[k]);
        }
        ctx.write(&format!("path_{i:04}.csv"), &csv)?;
        let b_end = barrier.eval(horizon).map_err(|e| CliError::internal(anyhow!(e)))?;
        if path.tau_b < horizon || *path.x.last().expect("nonempty") >= b_end {
            hits += 1;
        }
        tau_sum += path.tau_b;
    }
    let summary = format!(
        "paths: {}\nfraction_hit: {}\nmean_tau_b: {}\n",
        section.n_paths,
        hits as f64 / section.n_paths as f64,
        tau_sum / section.n_paths as f64,
    );
    ctx.write("summary.txt", &summary)?;
    print!("{summary}");
    Ok(())
}

/// Constant value of a barrier, when it is constant.
fn constant_barrier_value(barrier: &Barrier) -> Option<f64> {
    let v0 = barrier.knots()[0].value;
    let constant = barrier.knots().iter().all(|k| k.value == v0 && k.left.is_none());
    constant.then_some(v0)
}

pub fn transfer(ctx: &Ctx) -> Result<(), CliError> {
    let problem = ctx.problem()?;
    let barrier = ctx.barrier()?;
    let mc = ctx.mc()?;
    let section = ctx
        .cfg
        .transfer
        .as_ref()
        .ok_or_else(|| CliError::config(anyhow!("config is missing the [transfer] section")))?;
    let times = section
        .times
        .materialize(problem.horizon())
        .map_err(CliError::config)?;
    let curve = transfer_curve(&problem, &barrier, &times, &mc).map_err(classify_transfer)?;

    let csv = if section.closed_form {
        let b_const = constant_barrier_value(&barrier).ok_or_else(|| {
            CliError::precondition(anyhow!("closed_form needs a constant barrier"))
        })?;
        let sigma = match problem.diffusion.sigma {
            Coef::Constant(s) => s,
            _ => {
                return Err(CliError::precondition(anyhow!(
                    "closed_form needs a constant volatility"
                )))
            }
        };
        let quad = QuadratureConfig::default();
        let mut out = String::from("t,pi,stderr,closed_form,quad_err\n");
        for (i, &t) in curve.times.iter().enumerate() {
            let q = bm_closed_form(sigma, b_const, &problem, t, &quad).map_err(classify_transfer)?;
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                t, curve.pi[i], curve.stderr[i], q.value, q.error_estimate
            );
        }
        out
    } else {
        curve.to_csv_string()
    };
    ctx.write("transfer.csv", &csv)?;
    println!("wrote transfer curve with {} nodes", curve.len());
    Ok(())
}

pub fn solve_boundary(ctx: &Ctx) -> Result<(), CliError> {
    let problem = ctx.problem()?;
    let mc = ctx.mc()?;
    let section = ctx
        .cfg
        .solver
        .as_ref()
        .ok_or_else(|| CliError::config(anyhow!("config is missing the [solver] section")))?;
    let cfg: SolverConfig = section.build(problem.horizon(), mc).map_err(CliError::config)?;

    let solution = solve(&problem, &cfg).map_err(classify_solve)?;

    let mut audit = String::from("node_t,iterate,x,residual,stderr\n");
    for node in &solution.nodes {
        for (i, it) in node.trace.iter().enumerate() {
            let _ = writeln!(audit, "{},{},{},{},{}", node.t, i, it.x, it.residual, it.stderr);
        }
    }
    ctx.write("residuals.csv", &audit)?;
    ctx.write("boundary.txt", &solution.barrier.to_file_string())?;

    if !solution.single_crossing.holds {
        println!(
            "warning: single crossing violated on the probe grid ({} pairs); hypotheses of the integral equation fail",
            solution.single_crossing.violations.len()
        );
    }
    let mut flagged = Vec::new();
    for node in &solution.nodes {
        println!(
            "node t={:.6}: b={:.6} [{:?}] residual {:.3e} (stderr {:.3e})",
            node.t, node.value, node.flag, node.residual, node.stderr
        );
        if !node.flag.is_resolved() {
            flagged.push(format!("t={}: {:?} at value {}", node.t, node.flag, node.value));
        }
    }
    if !flagged.is_empty() {
        return Err(CliError::solver_no_root(anyhow!(
            "{} node(s) without a bracketed root:\n{}",
            flagged.len(),
            flagged.join("\n")
        )));
    }
    Ok(())
}

pub fn verify(ctx: &Ctx) -> Result<(), CliError> {
    let problem = ctx.problem()?;
    let barrier = ctx.barrier()?;
    let section = ctx
        .cfg
        .verify
        .as_ref()
        .ok_or_else(|| CliError::config(anyhow!("config is missing the [verify] section")))?;
    let lat_cfg = ctx
        .cfg
        .lattice
        .as_ref()
        .ok_or_else(|| CliError::config(anyhow!("config is missing the [lattice] section")))?;
    let lattice = Lattice::new(
        problem.horizon(),
        lat_cfg.dt,
        lat_cfg.x_min,
        lat_cfg.x_max,
        lat_cfg.dx,
    )
    .map_err(classify_lattice)?;

    let curve: Option<TransferCurve> = match section.transfer.as_str() {
        "zero" => None,
        "estimate" => {
            let mc = ctx.mc()?;
            Some(
                transfer_curve(&problem, &barrier, &lattice.times(), &mc)
                    .map_err(classify_transfer)?,
            )
        }
        "file" => {
            let path = section
                .curve_file
                .as_ref()
                .ok_or_else(|| CliError::config(anyhow!("verify.transfer = \"file\" needs curve_file")))?;
            let path =
                if path.is_relative() { ctx.config_dir.join(path) } else { path.clone() };
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("cannot read curve file {}", path.display()))
                .map_err(CliError::config)?;
            Some(TransferCurve::from_csv_str(&text).map_err(classify_transfer)?)
        }
        other => {
            return Err(CliError::config(anyhow!(
                "verify.transfer must be zero|estimate|file, got `{other}`"
            )))
        }
    };

    let report = check_implementability(
        &problem,
        &barrier,
        curve.as_ref(),
        &lattice,
        section.tol,
        section.scan_margin,
        None,
    )
    .map_err(classify_lattice)?;

    let machine = format!(
        "pass = {}\nworst_gap = {}\nworst_t = {}\nworst_x = {}\ntol = {}\nscan_margin = {}\n",
        report.pass, report.worst_gap, report.worst_t, report.worst_x, report.tol,
        report.scan_margin
    );
    ctx.write("verify.toml", &machine)?;
    let human = format!(
        "implementability: {}\nworst gap {:.6e} at (t={:.6}, x={:.6}), tolerance {:.6e}\nlattice: dt={} dx={} on [{}, {}] (truncation rows clamped; scan margin {})\ntransfer source: {}\n",
        if report.pass { "PASS" } else { "FAIL" },
        report.worst_gap,
        report.worst_t,
        report.worst_x,
        report.tol,
        lat_cfg.dt,
        lat_cfg.dx,
        lat_cfg.x_min,
        lat_cfg.x_max,
        report.scan_margin,
        section.transfer,
    );
    ctx.write("verify.txt", &human)?;
    print!("{human}");
    if !report.pass {
        return Err(CliError::verification(anyhow!(
            "implementability gap {:.6e} exceeds tolerance {:.6e}",
            report.worst_gap,
            report.tol
        )));
    }
    Ok(())
}

pub fn check_properties(ctx: &Ctx) -> Result<(), CliError> {
    let problem = ctx.problem()?;
    let barrier = ctx.barrier()?;
    let mc = ctx.mc()?;
    let section = ctx
        .cfg
        .check_properties
        .as_ref()
        .ok_or_else(|| CliError::config(anyhow!("config is missing the [check_properties] section")))?;
    let horizon = problem.horizon();
    let mut times = section
        .times
        .materialize(horizon)
        .map_err(CliError::config)?;
    // Plant nodes tightly before each interior knot and before the horizon
    // so jump classification and the terminal limit are sharp.
    for knot in &barrier.knots()[1..barrier.knots().len() - 1] {
        times.push(knot.t - section.straddle);
        times.push(knot.t);
    }
    times.push(horizon - section.straddle);
    times.retain(|&t| (0.0..=horizon).contains(&t));
    times.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    times.dedup();

    let curve = transfer_curve(&problem, &barrier, &times, &mc).map_err(classify_transfer)?;
    ctx.write("transfer.csv", &curve.to_csv_string())?;
    let report = check_transfer_properties(&curve, &barrier).map_err(classify_transfer)?;

    let mut text = String::new();
    let _ = writeln!(text, "upward jumps: {}", report.upward_jumps.len());
    for j in &report.upward_jumps {
        let _ = writeln!(text, "  t={} diff={} threshold={}", j.t, j.pi_diff, j.threshold);
    }
    let _ = writeln!(text, "continuity violations: {}", report.continuity_violations.len());
    for j in &report.continuity_violations {
        let _ = writeln!(text, "  t={} diff={} threshold={}", j.t, j.pi_diff, j.threshold);
    }
    let _ = writeln!(
        text,
        "downward jumps observed at upward barrier jumps: {}",
        report.downward_jumps_observed.len()
    );
    let _ = writeln!(
        text,
        "terminal: pi({}) = {} (threshold {}) -> {}",
        report.terminal_time,
        report.terminal_value,
        report.terminal_threshold,
        if report.terminal_ok { "ok" } else { "VIOLATION" }
    );
    let _ = writeln!(text, "pass: {}", report.pass());
    ctx.write("transfer_properties.txt", &text)?;
    print!("{text}");
    if !report.pass() {
        return Err(CliError::verification(anyhow!("transfer property check failed")));
    }
    Ok(())
}
