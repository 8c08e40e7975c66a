//! `wsk`: experiment driver for weak-form identification and POD reduction.
//!
//! Each subcommand runs one experiment, writes deterministic CSV artifacts
//! plus a run.json manifest into the output directory, and with `--check`
//! exits nonzero if any acceptance band fails. `WSK_THREADS` caps the worker
//! pool.

mod config;
mod experiments;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use config::RawParams;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "wsk", version, about = "Weak-form surrogate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default, Clone)]
struct CommonArgs {
    /// Output directory for CSV artifacts and run.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluate the experiment's acceptance bands; exit nonzero on failure.
    #[arg(long)]
    check: bool,
    /// Config file: flat `key = value` lines, or a run.json manifest.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    j_min: Option<u32>,
    #[arg(long)]
    j_max: Option<u32>,
    /// Comma-separated test-basis degrees.
    #[arg(long, value_delimiter = ',')]
    k_list: Option<Vec<usize>>,
    /// Comma-separated regularity parameters.
    #[arg(long, value_delimiter = ',')]
    alpha_list: Option<Vec<f64>>,
    /// Keep the integration-by-parts boundary terms (on) or drop them (off).
    #[arg(long, value_parser = parse_switch)]
    ibp_boundary: Option<bool>,
    /// Relative singular-value cutoff of the least-squares solve.
    #[arg(long)]
    svd_cutoff: Option<f64>,
    #[arg(long)]
    fit_j_lo: Option<u32>,
    #[arg(long)]
    fit_j_hi: Option<u32>,
    #[arg(long)]
    train_samples: Option<usize>,
    #[arg(long)]
    eval_samples: Option<usize>,
    #[arg(long)]
    bound_samples: Option<usize>,
    /// Evaluation horizon for the solution bound.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    surrogate_j: Option<u32>,
    #[arg(long)]
    fourier_k: Option<usize>,
    /// Target contraction value tau * L.
    #[arg(long)]
    contraction: Option<f64>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    beta_cutoff: Option<f64>,
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    substeps: Option<usize>,
    /// Comma-separated dictionary degrees for the discontinuous run.
    #[arg(long, value_delimiter = ',')]
    j_list: Option<Vec<u32>>,
    /// Recorded in run.json; the pipeline itself is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_switch(s: &str) -> Result<bool, String> {
    match s {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        other => Err(format!("expected on/off, got `{other}`")),
    }
}

impl CommonArgs {
    fn raw_params(&self) -> RawParams {
        RawParams {
            n_samples: self.n_samples,
            j_min: self.j_min,
            j_max: self.j_max,
            k_list: self.k_list.clone(),
            alpha_list: self.alpha_list.clone(),
            ibp_boundary: self.ibp_boundary,
            svd_cutoff: self.svd_cutoff,
            fit_j_lo: self.fit_j_lo,
            fit_j_hi: self.fit_j_hi,
            train_samples: self.train_samples,
            eval_samples: self.eval_samples,
            bound_samples: self.bound_samples,
            horizon: self.horizon,
            surrogate_j: self.surrogate_j,
            fourier_k: self.fourier_k,
            contraction: self.contraction,
            nx: self.nx,
            nt: self.nt,
            t_end: self.t_end,
            beta: self.beta,
            beta_cutoff: self.beta_cutoff,
            modes: self.modes,
            substeps: self.substeps,
            j_list: self.j_list.clone(),
            seed: self.seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Spectral-convergence sweep of the smooth problem (Legendre tests).
    #[command(name = "smooth_sweep")]
    SmoothSweep(CommonArgs),
    /// Same sweep with the trigonometric test family.
    #[command(name = "fourier_sweep")]
    FourierSweep(CommonArgs),
    /// Contraction-based solution bound for the smooth problem.
    #[command(name = "lipschitz_check")]
    LipschitzCheck(CommonArgs),
    /// Regularity-driven convergence rates for the tunable family.
    #[command(name = "sobolev_sweep")]
    SobolevSweep(CommonArgs),
    /// Reduced model fitted on exact temporal modes (constant diffusivity).
    #[command(name = "pod_exact")]
    PodExact(CommonArgs),
    /// Reduced model fitted on Galerkin proxy modes (constant diffusivity).
    #[command(name = "pod_proxy")]
    PodProxy(CommonArgs),
    /// Reduced models of the discontinuous-diffusivity field.
    #[command(name = "pod_discontinuous")]
    PodDiscontinuous(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::SmoothSweep(_) => "smooth_sweep",
            Command::FourierSweep(_) => "fourier_sweep",
            Command::LipschitzCheck(_) => "lipschitz_check",
            Command::SobolevSweep(_) => "sobolev_sweep",
            Command::PodExact(_) => "pod_exact",
            Command::PodProxy(_) => "pod_proxy",
            Command::PodDiscontinuous(_) => "pod_discontinuous",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::SmoothSweep(a)
            | Command::FourierSweep(a)
            | Command::LipschitzCheck(a)
            | Command::SobolevSweep(a)
            | Command::PodExact(a)
            | Command::PodProxy(a)
            | Command::PodDiscontinuous(a) => a,
        }
    }
}

fn init_thread_pool() -> Result<()> {
    if let Ok(value) = std::env::var("WSK_THREADS") {
        let threads: usize = value
            .parse()
            .with_context(|| format!("WSK_THREADS must be a positive integer, got `{value}`"))?;
        anyhow::ensure!(threads > 0, "WSK_THREADS must be positive");
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("initializing the worker pool")?;
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(0) => {}
        Ok(failures) => {
            eprintln!("{failures} acceptance check(s) failed");
            std::process::exit(1);
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(2);
        }
    }
}

fn run(command: &Command) -> Result<usize> {
    init_thread_pool()?;
    let args = command.args();
    let name = command.name();

    let mut params = RawParams::default();
    if let Some(path) = &args.config {
        params.merge(config::load_config(path, name)?);
    }
    params.merge(args.raw_params());

    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(name));
    let check = args.check;

    let checks = match command {
        Command::SmoothSweep(_) => experiments::sweeps::smooth_sweep(&params, &out, check)?,
        Command::FourierSweep(_) => experiments::sweeps::fourier_sweep(&params, &out, check)?,
        Command::LipschitzCheck(_) => experiments::sweeps::lipschitz_check(&params, &out, check)?,
        Command::SobolevSweep(_) => experiments::sweeps::sobolev_sweep(&params, &out, check)?,
        Command::PodExact(_) => experiments::pod::pod_exact(&params, &out, check)?,
        Command::PodProxy(_) => experiments::pod::pod_proxy(&params, &out, check)?,
        Command::PodDiscontinuous(_) => {
            experiments::pod::pod_discontinuous(&params, &out, check)?
        }
    };
    println!("wrote artifacts to {}", out.display());
    if check {
        checks.report(name);
    }
    Ok(checks.failures.len())
}
