//! Command-line entry point.
//!
//! Exit codes: 0 on success, 2 on validation failure (flags, config files,
//! initial-data specs), 3 on numerical failure (integrator breakdown, CFL
//! violations, bench cross-check).

mod config;
mod verify;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use coagfrag::bench::bench_rhs;
use coagfrag::bernstein::transform_g;
use coagfrag::dist::{ConvolutionMode, SimulationConfig};
use coagfrag::export;
use coagfrag::hj::{advance_f, advance_g, HjState};
use coagfrag::integrator::{detect_gelation, integrate};
use coagfrag::equilibrium;

use config::{
    parse_init, BenchConfig, EquilibriumConfig, HjConfig, HjForm, RunConfig, SimulateConfig,
    VerifyConfig,
};

#[derive(Parser)]
#[command(
    name = "coagfrag",
    version,
    about = "Numerical laboratory for the critical discrete coagulation-fragmentation equation"
)]
struct Cli {
    /// JSON config document carrying the same fields as the subcommand
    /// flags; mutually exclusive with passing a subcommand.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Output directory for CSV/JSON artifacts.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Worker threads; recorded in run metadata. The solvers are
    /// single-threaded and deterministic, so this does not change results.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the kinetic system and export the trajectory.
    Simulate(SimulateArgs),
    /// Compute the stationary recursion table and existence verdict.
    Equilibrium(EquilibriumArgs),
    /// Evolve one of the Hamilton-Jacobi forms and export the final grid.
    Hj(HjArgs),
    /// Run the invariant suite; nonzero exit iff any check fails.
    Verify(VerifyArgs),
    /// Time the right-hand-side convolution paths.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Total mass m = m1(0).
    #[arg(long)]
    mass: f64,
    /// Initial data: monodisperse:<size> | geometric:<ratio> | explicit:<d1,d2,..>
    #[arg(long, default_value = "monodisperse:1")]
    init: String,
    /// Truncation size N.
    #[arg(long, default_value_t = 512)]
    n: usize,
    #[arg(long)]
    t_end: f64,
    #[arg(long, default_value_t = 1e-9)]
    rtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    atol: f64,
    /// Convolution path for the coagulation gain.
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    mode: ModeArg,
    #[arg(long, default_value_t = 16)]
    output_stride: usize,
    /// How many densities rho_1..rho_K to include in the trajectory CSV.
    #[arg(long, default_value_t = 32)]
    density_columns: usize,
    /// Gel-mass fraction that counts as gelation onset in the metadata.
    #[arg(long, default_value_t = 0.01)]
    gel_threshold: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum ModeArg {
    Direct,
    Fft,
    Auto,
}

impl From<ModeArg> for ConvolutionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Direct => ConvolutionMode::Direct,
            ModeArg::Fft => ConvolutionMode::Fft,
            ModeArg::Auto => ConvolutionMode::Auto,
        }
    }
}

#[derive(Args)]
struct EquilibriumArgs {
    #[arg(long)]
    mass: f64,
    /// Table length L.
    #[arg(long, default_value_t = 2048)]
    length: usize,
}

#[derive(Args)]
struct HjArgs {
    #[arg(long)]
    mass: f64,
    /// Which equation form to evolve.
    #[arg(long, value_enum, default_value_t = HjForm::G)]
    form: HjForm,
    #[arg(long)]
    t_end: f64,
    /// Grid spacing (z-form: dz in (0, 1); x-form: dx).
    #[arg(long, default_value_t = 1e-3)]
    grid_dz: f64,
    /// Right edge of the x grid (x-form only).
    #[arg(long, default_value_t = 15.0)]
    x_max: f64,
    /// Singularity cutoff level n in theta_n (x-form only).
    #[arg(long, default_value_t = 10_000)]
    cutoff_n: u32,
    /// Viscosity coefficient eps (x-form only; 0 disables).
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, default_value_t = 0.9)]
    cfl: f64,
    /// Initial data whose transform seeds the grid.
    #[arg(long, default_value = "monodisperse:1")]
    init: String,
    /// Truncation used to realize the initial data.
    #[arg(long, default_value_t = 512)]
    init_n: usize,
}

#[derive(Args)]
struct VerifyArgs {
    /// all, fast, or a single check name.
    #[arg(long, default_value = "all")]
    suite: String,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated truncation sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    /// Repetitions per size (>= 5).
    #[arg(long, default_value_t = 9)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Failures carrying the process exit code.
enum RunError {
    Validation(anyhow::Error),
    Numerical(anyhow::Error),
}

impl RunError {
    fn code(&self) -> u8 {
        match self {
            RunError::Validation(_) => 2,
            RunError::Numerical(_) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            RunError::Validation(e) | RunError::Numerical(e) => format!("{e:#}"),
        }
    }
}

fn validation<E: Into<anyhow::Error>>(e: E) -> RunError {
    RunError::Validation(e.into())
}

fn numerical<E: Into<anyhow::Error>>(e: E) -> RunError {
    RunError::Numerical(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), RunError> {
    let run_config = resolve_config(&cli)?;
    fs::create_dir_all(&cli.out_dir)
        .with_context(|| format!("creating {}", cli.out_dir.display()))
        .map_err(validation)?;

    match &run_config {
        RunConfig::Simulate(cfg) => simulate(cfg, &cli, &run_config),
        RunConfig::Equilibrium(cfg) => equilibrium_cmd(cfg, &cli, &run_config),
        RunConfig::Hj(cfg) => hj_cmd(cfg, &cli, &run_config),
        RunConfig::Verify(cfg) => verify_cmd(cfg, &cli, &run_config),
        RunConfig::Bench(cfg) => bench_cmd(cfg, &cli, &run_config),
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig, RunError> {
    if cli.threads == 0 {
        return Err(validation(anyhow::anyhow!("--threads must be >= 1")));
    }
    match (&cli.config, &cli.command) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(validation)?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))
                .map_err(validation)
        }
        (Some(_), Some(_)) => Err(validation(anyhow::anyhow!(
            "--config and a subcommand are mutually exclusive"
        ))),
        (None, Some(command)) => Ok(match command {
            Command::Simulate(a) => RunConfig::Simulate(SimulateConfig {
                mass: a.mass,
                init: a.init.clone(),
                n: a.n,
                t_end: a.t_end,
                rtol: a.rtol,
                atol: a.atol,
                mode: a.mode.into(),
                output_stride: a.output_stride,
                density_columns: a.density_columns,
                gel_threshold: a.gel_threshold,
            }),
            Command::Equilibrium(a) => RunConfig::Equilibrium(EquilibriumConfig {
                mass: a.mass,
                length: a.length,
            }),
            Command::Hj(a) => RunConfig::Hj(HjConfig {
                mass: a.mass,
                form: a.form,
                t_end: a.t_end,
                grid_dz: a.grid_dz,
                x_max: a.x_max,
                cutoff_n: a.cutoff_n,
                eps: a.eps,
                cfl: a.cfl,
                init: a.init.clone(),
                init_n: a.init_n,
            }),
            Command::Verify(a) => RunConfig::Verify(VerifyConfig {
                suite: a.suite.clone(),
            }),
            Command::Bench(a) => RunConfig::Bench(BenchConfig {
                sizes: a.sizes.clone(),
                reps: a.reps,
                seed: a.seed,
                direct_only: false,
            }),
        }),
        (None, None) => Err(validation(anyhow::anyhow!(
            "pass a subcommand or --config FILE (see --help)"
        ))),
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    artifact: &'static str,
    version: &'static str,
    threads: usize,
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    gelation_onset_time: Option<f64>,
    outputs: Vec<String>,
}

fn write_metadata(
    cli: &Cli,
    config: &RunConfig,
    outputs: Vec<String>,
    gelation_onset_time: Option<f64>,
) -> Result<()> {
    let meta = Metadata {
        artifact: "coagfrag",
        version: env!("CARGO_PKG_VERSION"),
        threads: cli.threads,
        config,
        gelation_onset_time,
        outputs,
    };
    let path = cli.out_dir.join("metadata.json");
    fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn simulate(cfg: &SimulateConfig, cli: &Cli, rc: &RunConfig) -> Result<(), RunError> {
    let init = parse_init(&cfg.init, cfg.mass).map_err(validation)?;
    let rho0 = init.build(cfg.n).map_err(validation)?;
    let sim = SimulationConfig {
        truncation_n: cfg.n,
        t_end: cfg.t_end,
        output_stride: cfg.output_stride,
        abs_tol: cfg.atol,
        rel_tol: cfg.rtol,
        convolution_mode: cfg.mode,
    };
    sim.validate().map_err(validation)?;
    if !(cfg.gel_threshold > 0.0 && cfg.gel_threshold < 1.0) {
        return Err(validation(anyhow::anyhow!(
            "gel threshold must lie in (0,1)"
        )));
    }

    let traj = integrate(&rho0, &sim).map_err(numerical)?;
    let onset = detect_gelation(&traj, cfg.gel_threshold);

    let mut buf = Vec::new();
    export::write_trajectory_csv(&traj, cfg.density_columns.min(cfg.n), &mut buf)
        .map_err(numerical)?;
    let traj_path = cli.out_dir.join("trajectory.csv");
    write_file(&traj_path, &buf).map_err(validation)?;

    write_metadata(cli, rc, vec![display(&traj_path)], onset).map_err(validation)?;
    println!(
        "simulate: {} outputs to t={}, conservation defect {:.3e}{}",
        traj.len(),
        cfg.t_end,
        traj.conservation_defect(),
        match onset {
            Some(t) => format!(", gelation onset at t={t}"),
            None => String::new(),
        }
    );
    Ok(())
}

fn equilibrium_cmd(cfg: &EquilibriumConfig, cli: &Cli, rc: &RunConfig) -> Result<(), RunError> {
    if !(cfg.mass > 0.0) || cfg.length == 0 {
        return Err(validation(anyhow::anyhow!(
            "equilibrium needs mass > 0 and length >= 1"
        )));
    }
    let verdict = equilibrium::existence_verdict(cfg.mass, cfg.length);

    let mut outputs = Vec::new();
    let verdict_path = cli.out_dir.join("verdict.json");
    let verdict_json = serde_json::to_string_pretty(&verdict).map_err(validation)?;
    write_file(&verdict_path, (verdict_json + "\n").as_bytes()).map_err(validation)?;
    outputs.push(display(&verdict_path));

    let table = match &verdict {
        equilibrium::ExistenceVerdict::ExistsUnique { table, .. } => Some(table),
        equilibrium::ExistenceVerdict::Conjectural { table, .. } => Some(table),
        equilibrium::ExistenceVerdict::Nonexistent { .. } => None,
    };
    if let Some(table) = table {
        let mut buf = Vec::new();
        export::write_table_csv(table, &mut buf).map_err(numerical)?;
        let table_path = cli.out_dir.join("equilibrium.csv");
        write_file(&table_path, &buf).map_err(validation)?;
        outputs.push(display(&table_path));
    }

    write_metadata(cli, rc, outputs, None).map_err(validation)?;
    match &verdict {
        equilibrium::ExistenceVerdict::ExistsUnique { min_value, table } => println!(
            "equilibrium: exists_unique, min value {min_value:.3e}, m0 gap {:.3e}, m1 gap {:.3e}",
            table.m0_gap(),
            table.m1_gap()
        ),
        equilibrium::ExistenceVerdict::Nonexistent { witness_rho1 } => {
            println!("equilibrium: nonexistent, witness rho~(1) = {witness_rho1}")
        }
        equilibrium::ExistenceVerdict::Conjectural { scan, .. } => println!(
            "equilibrium: conjectural (m in (1/2,1)); min value {:.3e} at l={}, {} negatives in first {}",
            scan.min_value, scan.min_at_l, scan.negative_count, scan.scanned_len
        ),
    }
    Ok(())
}

fn hj_cmd(cfg: &HjConfig, cli: &Cli, rc: &RunConfig) -> Result<(), RunError> {
    if !(cfg.mass > 0.0 && cfg.t_end > 0.0) {
        return Err(validation(anyhow::anyhow!("hj needs mass > 0 and t_end > 0")));
    }
    if !(cfg.cfl > 0.0 && cfg.cfl < 1.0) {
        return Err(validation(anyhow::anyhow!("cfl must lie in (0,1)")));
    }
    let init = parse_init(&cfg.init, cfg.mass).map_err(validation)?;
    let rho0 = init.build(cfg.init_n).map_err(validation)?;

    let mut state = match cfg.form {
        HjForm::G => {
            let mut s = HjState::new_g(cfg.mass, cfg.grid_dz, |_| 0.0, cfg.cfl);
            let nodes = s.grid.nodes().to_vec();
            let sampled = transform_g(&rho0, &nodes);
            s.grid.values_mut().copy_from_slice(sampled.values());
            s
        }
        HjForm::F => {
            let f0 = coagfrag::bernstein::transform_f(&rho0, &x_nodes(cfg.grid_dz, cfg.x_max));
            let values = f0.values().to_vec();
            let mut s = HjState::new_f(cfg.mass, cfg.grid_dz, cfg.x_max, |_| 0.0, cfg.cfl);
            s.grid.values_mut().copy_from_slice(&values);
            s
        }
    };
    state.cutoff_n = cfg.cutoff_n;
    state.viscosity_eps = cfg.eps;

    let steps = match cfg.form {
        HjForm::G => advance_g(&mut state, cfg.t_end),
        HjForm::F => advance_f(&mut state, cfg.t_end),
    }
    .map_err(numerical)?;

    let mut buf = Vec::new();
    export::write_grid_csv(&state.grid, Some(state.time), &mut buf).map_err(numerical)?;
    let path = cli.out_dir.join("hj_final.csv");
    write_file(&path, &buf).map_err(validation)?;
    write_metadata(cli, rc, vec![display(&path)], None).map_err(validation)?;
    println!(
        "hj: {steps} steps to t={}, band excursion {:.3e}",
        state.time, state.max_band_violation
    );
    Ok(())
}

fn x_nodes(dx: f64, x_max: f64) -> Vec<f64> {
    let steps = (x_max / dx).round() as usize;
    (0..=steps).map(|i| i as f64 * dx).collect()
}

fn verify_cmd(cfg: &VerifyConfig, cli: &Cli, rc: &RunConfig) -> Result<(), RunError> {
    let failures = verify::run_suite(&cfg.suite)
        .map_err(|e| validation(anyhow::anyhow!(e)))?;
    write_metadata(cli, rc, Vec::new(), None).map_err(validation)?;
    if failures > 0 {
        return Err(numerical(anyhow::anyhow!("{failures} check(s) failed")));
    }
    Ok(())
}

fn bench_cmd(cfg: &BenchConfig, cli: &Cli, rc: &RunConfig) -> Result<(), RunError> {
    if cfg.sizes.is_empty() {
        return Err(validation(anyhow::anyhow!("bench needs at least one size")));
    }
    let report = bench_rhs(&cfg.sizes, cfg.reps, cfg.seed).map_err(numerical)?;
    for row in &report.rows {
        println!(
            "n={:>6}: direct {:>12} ns (spread {}), fft {:>12} ns (spread {})",
            row.n,
            row.direct_median_ns,
            row.direct_spread_ns,
            row.fft_median_ns,
            row.fft_spread_ns
        );
    }
    match report.fft_crossover_n {
        Some(n) => println!("fft crossover at n={n}"),
        None => println!("no fft crossover within the measured sizes"),
    }
    let path = cli.out_dir.join("bench.json");
    let json = serde_json::to_string_pretty(&report).map_err(validation)?;
    write_file(&path, (json + "\n").as_bytes()).map_err(validation)?;
    write_metadata(cli, rc, vec![display(&path)], None).map_err(validation)?;
    Ok(())
}

fn display(p: &Path) -> String {
    p.display().to_string()
}
