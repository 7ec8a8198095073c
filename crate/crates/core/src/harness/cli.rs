//! Command-line front end over the pipeline functions.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use super::config::ExperimentConfig;
use super::pipeline;
use super::HarnessError;

#[derive(Parser)]
#[command(name = "stairnav", version, about = "Evidential waypoint prediction with calibrated uncertainty in a simulated stair-traversal loop")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Trial count override.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Toggle a pipeline stage: augment|recal|fusion=on|off. Repeatable.
    #[arg(long = "ablate", global = true, value_parser = parse_ablation)]
    ablate: Vec<(AblationKind, bool)>,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum AblationKind {
    Augment,
    Recal,
    Fusion,
}

fn parse_ablation(s: &str) -> Result<(AblationKind, bool), String> {
    let (key, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=on|off, got {s:?}"))?;
    let kind = match key {
        "augment" => AblationKind::Augment,
        "recal" => AblationKind::Recal,
        "fusion" => AblationKind::Fusion,
        other => return Err(format!("unknown ablation {other:?} (augment|recal|fusion)")),
    };
    let on = match value {
        "on" => true,
        "off" => false,
        other => return Err(format!("expected on or off, got {other:?}")),
    };
    Ok((kind, on))
}

#[derive(Subcommand)]
enum Command {
    /// Render expert demonstrations and the calibration split.
    GenData,
    /// Train the evidential waypoint regressor.
    Train,
    /// Fit the isotonic recalibration maps.
    Calibrate,
    /// Grade empirical coverage on held-out worlds.
    EvalCoverage,
    /// Run closed-loop stair-climbing trials.
    EvalSuccess,
    /// Run one trial and dump its trajectory.
    PlanDemo,
}

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.to_string_lossy().into_owned();
    }
    if let Some(trials) = cli.trials {
        cfg.trials = trials;
    }
    for (kind, on) in &cli.ablate {
        match kind {
            AblationKind::Augment => cfg.augmentation = *on,
            AblationKind::Recal => cfg.recalibration = *on,
            AblationKind::Fusion => cfg.fusion = *on,
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> Result<(), HarnessError> {
    let cfg = resolve_config(cli)?;
    let out_dir = PathBuf::from(&cfg.out_dir);
    match cli.command {
        Command::GenData => {
            pipeline::gen_data(&cfg, &out_dir)?;
            println!("wrote {} and {}", pipeline::DATASET_TRAIN, pipeline::DATASET_CALIB);
        }
        Command::Train => {
            pipeline::train_cmd(&cfg, &out_dir)?;
            println!("wrote {}", pipeline::MODEL);
        }
        Command::Calibrate => {
            pipeline::calibrate_cmd(&cfg, &out_dir)?;
            println!("wrote {}", pipeline::CALIBRATION);
        }
        Command::EvalCoverage => {
            let (report, _) = pipeline::eval_coverage(&cfg, &out_dir)?;
            if let Some(cov) = &report.coverage_uncalibrated {
                for row in &cov.rows {
                    println!("level {:.2}: uncalibrated coverage {:.4}", row.level, row.coverage);
                }
            }
            if let Some(cov) = &report.coverage_calibrated {
                for row in &cov.rows {
                    println!("level {:.2}: calibrated coverage {:.4}", row.level, row.coverage);
                }
            }
        }
        Command::EvalSuccess => {
            let (report, _) = pipeline::eval_success(&cfg, &out_dir)?;
            if let Some(s) = &report.success {
                println!(
                    "success rate {:.3} [{:.3}, {:.3}] over {} trials, mean path cost {:.4}",
                    s.rate,
                    s.ci_low,
                    s.ci_high,
                    s.trials,
                    report.mean_path_cost.unwrap_or(f64::NAN)
                );
            }
        }
        Command::PlanDemo => {
            let (outcome, _) = pipeline::plan_demo(&cfg, &out_dir)?;
            println!(
                "trial finished: success {} after {} ticks (path cost {:.4}); wrote {}",
                outcome.success,
                outcome.ticks,
                outcome.mean_path_cost,
                pipeline::TRAJECTORY_CSV
            );
        }
    }
    Ok(())
}

/// Entry point for the binary; returns the process exit code.
pub fn run_cli() -> i32 {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}
