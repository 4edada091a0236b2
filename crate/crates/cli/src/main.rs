//! Command-line front end for the closed-loop PMSM simulator.
//!
//! Exit codes: 0 on success, 1 on configuration or I/O errors, 2 when a
//! simulation aborts numerically.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gpmotor::{
    compare, compute_metrics, fit_bank, generate_region_datasets, run_closed_loop,
    ultimate_bound, ClosedLoopMatrices, Error, ScenarioConfig, Strategy,
};

#[derive(Parser)]
#[command(name = "gpmotor", version, about = "GP-based PMSM tracking control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the RNG seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one strategy and write the trajectory CSV.
    Run {
        #[command(flatten)]
        common: Common,
        /// Aggregation strategy: none, moe, gpoe, coaoe-mean or coaoe-eta.
        /// Defaults to the strategy named in the config.
        #[arg(long, value_parser = parse_strategy)]
        strategy: Option<Strategy>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate every strategy on the same scenario and print a summary.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Directory receiving one trajectory CSV per strategy.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Generate the per-expert training datasets as CSV files.
    Datagen {
        #[command(flatten)]
        common: Common,
        /// Directory receiving `expert_1.csv`, `expert_2.csv`, ...
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Fit the experts and report the error-bound constants and the
    /// ultimate tracking-error bound.
    BoundCheck {
        #[command(flatten)]
        common: Common,
    },
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse::<Strategy>().map_err(|e| e.to_string())
}

fn load_config(common: &Common) -> Result<ScenarioConfig, Error> {
    let mut cfg = ScenarioConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.sim.seed = seed;
    }
    Ok(cfg)
}

fn cmd_run(common: Common, strategy: Option<Strategy>, out: PathBuf) -> Result<(), Error> {
    let cfg = load_config(&common)?;
    let strategy = strategy.unwrap_or(cfg.sim.strategy);
    let bank = fit_bank(&cfg)?;
    let log = run_closed_loop(&cfg, &bank, strategy)?;
    log.save_csv(&out)?;
    let m = compute_metrics(&log, 0.2);
    println!(
        "strategy={} rmse_e={:.6e} max_e={:.6e} steady_e={:.6e} bound_violations={}",
        strategy.name(),
        m.rmse_e,
        m.max_e,
        m.steady_e,
        m.bound_violations
    );
    Ok(())
}

fn cmd_compare(common: Common, out_dir: PathBuf) -> Result<(), Error> {
    let cfg = load_config(&common)?;
    let bank = fit_bank(&cfg)?;
    std::fs::create_dir_all(&out_dir)?;
    let report = compare(&cfg, &bank, &Strategy::COMPARISON);
    let mut failed = None;
    for entry in report {
        match entry.outcome {
            Ok((log, m)) => {
                let path = out_dir.join(format!("{}.csv", entry.strategy.name()));
                log.save_csv(&path)?;
                println!(
                    "strategy={} rmse_e={:.6e} max_e={:.6e} steady_e={:.6e} bound_violations={}",
                    entry.strategy.name(),
                    m.rmse_e,
                    m.max_e,
                    m.steady_e,
                    m.bound_violations
                );
            }
            Err(e) => {
                println!("strategy={} error: {}", entry.strategy.name(), e);
                failed = Some(e);
            }
        }
    }
    match failed {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn cmd_datagen(common: Common, out_dir: PathBuf) -> Result<(), Error> {
    let cfg = load_config(&common)?;
    std::fs::create_dir_all(&out_dir)?;
    let datasets = generate_region_datasets(&cfg.experts, cfg.sim.seed)?;
    for (i, ds) in datasets.iter().enumerate() {
        let path = out_dir.join(format!("expert_{}.csv", i + 1));
        ds.save_csv(&path)?;
        println!(
            "expert_{}: {} samples, noise_std={}",
            i + 1,
            ds.len(),
            ds.noise_std
        );
    }
    Ok(())
}

fn cmd_bound_check(common: Common) -> Result<(), Error> {
    let cfg = load_config(&common)?;
    let bank = fit_bank(&cfg)?;
    let matrices = ClosedLoopMatrices::new(&cfg.gains, cfg.q_matrix(), &cfg.motor)?;
    println!(
        "P = [[{:.6e}, {:.6e}], [{:.6e}, {:.6e}]]",
        matrices.p[(0, 0)],
        matrices.p[(0, 1)],
        matrices.p[(1, 0)],
        matrices.p[(1, 1)]
    );
    for (i, bp) in bank.bounds().iter().enumerate() {
        println!(
            "expert_{}: beta={:.6} gamma={:.6} l_mu={:.6} l_sigma={:.6}",
            i + 1,
            bp.beta,
            bp.gamma,
            bp.l_mu,
            bp.l_sigma
        );
    }
    let eta_max = bank.eta_min_sup(200);
    let radius = ultimate_bound(&matrices.p, &matrices.q, cfg.motor.inertia, eta_max);
    println!("eta_max={eta_max:.6e}");
    println!("ultimate_bound={radius:.6e}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { common, strategy, out } => cmd_run(common, strategy, out),
        Command::Compare { common, out_dir } => cmd_compare(common, out_dir),
        Command::Datagen { common, out_dir } => cmd_datagen(common, out_dir),
        Command::BoundCheck { common } => cmd_bound_check(common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::NumericalBlowUp { t }) => {
            eprintln!("error: simulation diverged at t = {t}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
