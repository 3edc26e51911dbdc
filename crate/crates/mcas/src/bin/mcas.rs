use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mcas::config::ExperimentConfig;
use mcas::error::{McasError, Result};
use mcas::harness::{self, fmt_f64};
use mcas::integrator::{self, SimState};
use mcas::kinetics::System;
use mcas::report;

#[derive(Parser)]
#[command(name = "mcas", version, about = "Mass-conserved activator-substrate simulation harness")]
struct Cli {
    /// Number of worker threads for sweeps (default: MCAS_THREADS or all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Suppress the informational log output
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment configuration (TOML); defaults apply for omitted keys
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override a config key, e.g. --override kinetics.alpha=3
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Relax the pheromone-free system to its steady profile and save it
    Equilibrate(ConfigArgs),
    /// Full pipeline: equilibrate, switch the pheromone on, trace the motion
    Run(ConfigArgs),
    /// One run per alpha in kinetics.alpha_list, plus a speed-vs-alpha fit
    Sweep(ConfigArgs),
    /// Track Sobolev norms of the evolving profile from the initial bump
    Regularity {
        #[command(flatten)]
        common: ConfigArgs,
        /// Disable the diffusion term
        #[arg(long)]
        no_diffusion: bool,
    },
    /// Spatial/temporal refinement against the analytic diffusion decay
    Converge(ConfigArgs),
    /// Render SVG plots and a summary JSON from run/sweep directories
    Report {
        /// Completed run or sweep directories
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig> {
    match &args.config {
        Some(path) => ExperimentConfig::load(path, &args.overrides),
        None => ExperimentConfig::from_toml_str("", &args.overrides),
    }
}

fn equilibrate_only(args: &ConfigArgs) -> Result<String> {
    let cfg = load_config(args)?;
    let out = &args.out;
    std::fs::create_dir_all(out)?;
    harness::write_atomic(&out.join("config.toml"), &cfg.to_toml())?;

    let grid = cfg.grid_spec()?;
    let spec = cfg.kinetics_spec();
    let system = System::new(grid, spec.clone(), cfg.pheromone_profile()?)?;
    let u0 = harness::initial_bump(
        grid,
        cfg.initial.bump_center,
        cfg.initial.bump_width,
        cfg.initial.bump_mass_fraction * spec.total_mass,
    );
    let eq = integrator::equilibrate(
        SimState::new(u0, 0.0),
        &system,
        cfg.stepper_config()?,
        cfg.equilibration.tol,
        cfg.equilibration.t_cap,
    )
    .map_err(|e| {
        if let McasError::NonConvergence { ref history, .. } = e {
            let path = out.join("equilibration_residuals.csv");
            let _ = harness::write_residual_history(&path, history);
            eprintln!("residual history written to {}", path.display());
        }
        e
    })?;
    harness::write_residual_history(&out.join("equilibration_residuals.csv"), &eq.history)?;
    let mut state = eq.state;
    let t_eq = state.time;
    state.time = 0.0;
    harness::write_atomic(&out.join("initial_state.dat"), &harness::state_to_text(&state))?;
    Ok(format!(
        "equilibrate ok residual={} t={} out={}",
        fmt_f64(eq.residual),
        fmt_f64(t_eq),
        out.display()
    ))
}

fn execute(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Equilibrate(args) => equilibrate_only(args),
        Command::Run(args) => {
            let cfg = load_config(args)?;
            let outcome = harness::run_experiment(&cfg, &args.out)?;
            Ok(format!(
                "run ok alpha={} cm_final={} time_to_peak={} out={}",
                cfg.kinetics.alpha,
                fmt_f64(outcome.summary.cm_final),
                outcome
                    .summary
                    .time_to_peak
                    .map(fmt_f64)
                    .unwrap_or_else(|| "none".to_string()),
                args.out.display()
            ))
        }
        Command::Sweep(args) => {
            let cfg = load_config(args)?;
            let alphas = cfg.kinetics.alpha_list.clone();
            let result = harness::sweep_alpha(&cfg, &alphas, &args.out)?;
            let fit = result
                .fit
                .as_ref()
                .map(|f| format!("slope={} r2={}", fmt_f64(f.slope), fmt_f64(f.r2)))
                .unwrap_or_else(|| "fit=none".to_string());
            Ok(format!("sweep ok n={} {} out={}", result.rows.len(), fit, args.out.display()))
        }
        Command::Regularity { common, no_diffusion } => {
            let cfg = load_config(common)?;
            let outcome = harness::regularity_probe(
                &cfg,
                !no_diffusion,
                &cfg.diagnostics.s_list,
                &common.out,
            )?;
            let ratios: Vec<String> =
                outcome.no_growth_ratios.iter().map(|r| fmt_f64(*r)).collect();
            Ok(format!(
                "regularity ok finite={} ratios=[{}] out={}",
                outcome.all_finite,
                ratios.join(" "),
                common.out.display()
            ))
        }
        Command::Converge(args) => {
            let cfg = load_config(args)?;
            let rep = harness::convergence_study(
                &cfg,
                &cfg.convergence.resolutions,
                &cfg.convergence.dts,
                &args.out,
            )?;
            Ok(format!(
                "converge ok spatial_order={} temporal_order={} out={}",
                fmt_f64(rep.observed_spatial_order),
                fmt_f64(rep.observed_temporal_order),
                args.out.display()
            ))
        }
        Command::Report { inputs, out } => {
            let files = report::emit_report(inputs, out)?;
            Ok(format!("report ok files={} out={}", files.len(), out.display()))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if !cli.quiet {
        env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
            .init();
    }
    let threads = cli
        .threads
        .or_else(|| std::env::var("MCAS_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(&cli) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
