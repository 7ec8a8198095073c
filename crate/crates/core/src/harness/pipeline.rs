//! The dataset/model/calibration lifecycle and the simulated experiments,
//! one function per CLI subcommand. Every function reads its upstream
//! artifacts from the output directory, writes its own, and records a run
//! manifest.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::augment::{
    augment, expert_trajectory, featurize, read_dataset, render_cloud, sample_perturbation,
    write_dataset, DatasetHeader, DatasetRecord, Demonstration, StairWorld,
    DATASET_SCHEMA_VERSION,
};
use crate::calibrate::{coverage_report, fit_pav, CalibrationArtifact, CoverageReport, CoverageRow};
use crate::evidential::StudentTPredictive;
use crate::net::{raw_len, train, Checkpoint, Mlp, TrainSample};
use crate::planner::TrajectoryLog;

use super::config::ExperimentConfig;
use super::manifest::RunManifest;
use super::metrics::{MetricsReport, SuccessStats, TrialOutcome};
use super::seeds::derive_seed;
use super::sim::{predict_from_features, run_trial, TrialSetup, WaypointPredictor};
use super::HarnessError;

pub const DATASET_TRAIN: &str = "dataset_train.jsonl";
pub const DATASET_CALIB: &str = "dataset_calib.jsonl";
pub const MODEL: &str = "model.json";
pub const TRAIN_LOSS: &str = "train_loss.csv";
pub const CALIBRATION: &str = "calibration.json";
pub const COVERAGE_CSV: &str = "coverage.csv";
pub const COVERAGE_JSON: &str = "coverage_report.json";
pub const SUCCESS_JSON: &str = "success_report.json";
pub const TRIALS_CSV: &str = "trials.csv";
pub const TRAJECTORY_CSV: &str = "trajectory.csv";

const AUGMENT_RETRIES: usize = 20;

fn require(path: PathBuf) -> Result<PathBuf, HarnessError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(HarnessError::MissingArtifact(path))
    }
}

fn dataset_header(cfg: &ExperimentConfig) -> DatasetHeader {
    DatasetHeader {
        schema_version: DATASET_SCHEMA_VERSION,
        sensor: cfg.sensor.clone(),
        grid: cfg.grid.clone(),
        horizon: cfg.expert.horizon,
        waypoint_dim: 2,
    }
}

fn sample_world(cfg: &ExperimentConfig, stream: &str, index: u64, eval: bool) -> StairWorld {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, stream, index));
    let ranges = if eval {
        &cfg.eval_worlds
    } else {
        &cfg.train_worlds
    };
    ranges.sample(&mut rng)
}

/// Render expert demonstrations (plus augmented variants when enabled) for
/// the training worlds and split them world-wise into train and calibration
/// files.
pub fn gen_data(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest, HarnessError> {
    fs::create_dir_all(out_dir)?;
    let n_calib_worlds = ((cfg.n_train_worlds as f64 * cfg.calib_world_fraction).round() as usize)
        .clamp(1, cfg.n_train_worlds - 1);

    let mut train_records = Vec::new();
    let mut calib_records = Vec::new();
    for w_idx in 0..cfg.n_train_worlds {
        let world = sample_world(cfg, "train-world", w_idx as u64, false);
        let mut rng_aug =
            ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "augment", w_idx as u64));
        let sink = if w_idx < n_calib_worlds {
            &mut calib_records
        } else {
            &mut train_records
        };
        for frame in expert_trajectory(&world, &cfg.expert) {
            let demo = Demonstration {
                pose: frame.pose,
                cloud: render_cloud(&world, &frame.pose, &cfg.sensor),
                waypoints: frame.waypoints.clone(),
            };
            sink.push(DatasetRecord::from_demo(&demo, false));
            if cfg.augmentation {
                for _ in 0..cfg.aug_multiplicity {
                    for attempt in 0..AUGMENT_RETRIES {
                        let delta = sample_perturbation(&mut rng_aug, &cfg.perturb);
                        match augment(&world, &demo, &delta, &cfg.sensor) {
                            Ok(variant) => {
                                sink.push(DatasetRecord::from_demo(&variant, true));
                                break;
                            }
                            Err(_) if attempt + 1 < AUGMENT_RETRIES => continue,
                            Err(_) => break,
                        }
                    }
                }
            }
        }
    }

    let header = dataset_header(cfg);
    write_dataset(&out_dir.join(DATASET_TRAIN), &header, &train_records)?;
    write_dataset(&out_dir.join(DATASET_CALIB), &header, &calib_records)?;

    let manifest = RunManifest::new(
        "gen-data",
        cfg,
        vec![DATASET_TRAIN.into(), DATASET_CALIB.into()],
    );
    manifest.save(out_dir)?;
    Ok(manifest)
}

fn record_to_sample(rec: &DatasetRecord, cfg: &ExperimentConfig) -> Result<TrainSample, HarnessError> {
    let demo = rec.to_demo()?;
    let features = featurize(&demo.cloud, &cfg.grid);
    let mut targets = Vec::with_capacity(demo.waypoints.len() * 2);
    for wp in &demo.waypoints {
        targets.push(wp[0]);
        targets.push(wp[1]);
    }
    Ok(TrainSample { features, targets })
}

/// Train the evidential regressor on the training split.
pub fn train_cmd(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest, HarnessError> {
    let (header, records) = read_dataset(&require(out_dir.join(DATASET_TRAIN))?)?;
    let horizon = header.horizon;

    // With augmentation on, originals are repeated to match the variant
    // count so batches mix roughly 50/50.
    let mut samples = Vec::new();
    for rec in &records {
        if rec.augmented && !cfg.augmentation {
            continue;
        }
        let sample = record_to_sample(rec, cfg)?;
        if cfg.augmentation && !rec.augmented {
            for _ in 0..cfg.aug_multiplicity.max(1) {
                samples.push(sample.clone());
            }
        } else {
            samples.push(sample);
        }
    }
    if samples.is_empty() {
        return Err(HarnessError::InvalidConfig(
            "training dataset is empty".into(),
        ));
    }

    let feature_len = cfg.grid.feature_len();
    let mut dims = vec![feature_len];
    dims.extend_from_slice(&cfg.hidden_layers);
    dims.push(raw_len(horizon, 2));
    let net = Mlp::new(&dims, derive_seed(cfg.seed, "net-init", 0));
    let train_cfg = crate::net::TrainConfig {
        seed: derive_seed(cfg.seed, "train-shuffle", 0),
        ..cfg.train.clone()
    };
    let (trained, history) = train(net, &samples, &train_cfg, horizon, 2)?;

    Checkpoint::from_model(&trained, horizon, 2).save(&out_dir.join(MODEL))?;
    let mut loss_csv = String::from("epoch,mean_loss\n");
    for (epoch, loss) in history.iter().enumerate() {
        loss_csv.push_str(&format!("{epoch},{loss}\n"));
    }
    fs::write(out_dir.join(TRAIN_LOSS), loss_csv)?;

    let manifest = RunManifest::new("train", cfg, vec![MODEL.into(), TRAIN_LOSS.into()]);
    manifest.save(out_dir)?;
    Ok(manifest)
}

fn load_model(out_dir: &Path) -> Result<(Mlp, usize), HarnessError> {
    let (net, horizon, _dim) = Checkpoint::load(&require(out_dir.join(MODEL))?)?.into_model()?;
    Ok((net, horizon))
}

/// Per-slot PITs of the model on a dataset split.
fn split_pits(
    records: &[DatasetRecord],
    net: &Mlp,
    horizon: usize,
    cfg: &ExperimentConfig,
) -> Result<Vec<Vec<f64>>, HarnessError> {
    let mut per_slot: Vec<Vec<f64>> = vec![Vec::new(); horizon];
    for rec in records {
        let demo = rec.to_demo()?;
        let features = featurize(&demo.cloud, &cfg.grid);
        let preds = predict_from_features(net, &features, horizon)?;
        for (k, t) in preds.iter().enumerate() {
            let truth = [demo.waypoints[k][0], demo.waypoints[k][1]];
            per_slot[k].push(t.pit(&truth)?);
        }
    }
    Ok(per_slot)
}

/// Fit the isotonic recalibration maps on the held-out calibration split.
pub fn calibrate_cmd(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest, HarnessError> {
    let calib_path = require(out_dir.join(DATASET_CALIB))?;
    let (net, horizon) = load_model(out_dir)?;
    let (_, records) = read_dataset(&calib_path)?;
    if records.is_empty() {
        return Err(HarnessError::InvalidConfig(
            "calibration split is empty".into(),
        ));
    }

    let per_slot_pits = split_pits(&records, &net, horizon, cfg)?;
    let pooled_pits: Vec<f64> = per_slot_pits.iter().flatten().copied().collect();
    let pooled = fit_pav(&pooled_pits)?;
    let per_slot = if cfg.per_slot_maps {
        let maps = per_slot_pits
            .iter()
            .map(|pits| fit_pav(pits))
            .collect::<Result<Vec<_>, _>>()?;
        Some(maps)
    } else {
        None
    };

    let digest = Sha256::digest(fs::read(&calib_path)?);
    let split_hash: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    let artifact = CalibrationArtifact::new(
        pooled,
        per_slot,
        &cfg.levels,
        split_hash,
        pooled_pits.len(),
    );
    artifact.save(&out_dir.join(CALIBRATION))?;

    let manifest = RunManifest::new("calibrate", cfg, vec![CALIBRATION.into()]);
    manifest.save(out_dir)?;
    Ok(manifest)
}

/// Evaluation demonstrations: expert frames on held-out worlds plus
/// off-trajectory perturbed variants.
fn eval_demos(cfg: &ExperimentConfig) -> Result<Vec<Demonstration>, HarnessError> {
    let mut demos = Vec::new();
    for w_idx in 0..cfg.n_eval_worlds {
        let world = sample_world(cfg, "eval-world", w_idx as u64, true);
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "eval-perturb", w_idx as u64));
        for frame in expert_trajectory(&world, &cfg.expert) {
            let demo = Demonstration {
                pose: frame.pose,
                cloud: render_cloud(&world, &frame.pose, &cfg.sensor),
                waypoints: frame.waypoints.clone(),
            };
            for _ in 0..2 {
                for attempt in 0..AUGMENT_RETRIES {
                    let delta = sample_perturbation(&mut rng, &cfg.perturb);
                    match augment(&world, &demo, &delta, &cfg.sensor) {
                        Ok(variant) => {
                            demos.push(variant);
                            break;
                        }
                        Err(_) if attempt + 1 < AUGMENT_RETRIES => continue,
                        Err(_) => break,
                    }
                }
            }
            demos.push(demo);
        }
    }
    Ok(demos)
}

/// Coverage of the per-slot prediction sets over a set of demonstrations,
/// honoring per-slot maps when the artifact carries them.
fn coverage_over_demos(
    preds: &[Vec<StudentTPredictive>],
    truths: &[Vec<Vec<f64>>],
    artifact: Option<&CalibrationArtifact>,
    cfg: &ExperimentConfig,
) -> Result<CoverageReport, HarnessError> {
    let horizon = preds[0].len();
    let mut rows = Vec::with_capacity(cfg.levels.len());
    let mut err = 0.0;
    for &level in &cfg.levels {
        let mut report_rows = Vec::new();
        for slot in 0..horizon {
            let slot_preds: Vec<StudentTPredictive> =
                preds.iter().map(|p| p[slot].clone()).collect();
            let slot_truths: Vec<Vec<f64>> = truths.iter().map(|t| t[slot].clone()).collect();
            let map = artifact.map(|a| a.map_for_slot(slot));
            let report = coverage_report(&slot_preds, &slot_truths, map, &[level])?;
            report_rows.push(report.rows[0].coverage);
        }
        let coverage = report_rows.iter().sum::<f64>() / report_rows.len() as f64;
        err += (coverage - level).abs();
        rows.push(CoverageRow { level, coverage });
    }
    Ok(CoverageReport {
        rows,
        mean_abs_calibration_error: err / cfg.levels.len().max(1) as f64,
    })
}

/// Empirical coverage on held-out worlds, with and without recalibration.
pub fn eval_coverage(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<(MetricsReport, RunManifest), HarnessError> {
    let (net, horizon) = load_model(out_dir)?;
    let artifact = if cfg.recalibration {
        Some(CalibrationArtifact::load(&require(
            out_dir.join(CALIBRATION),
        )?)?)
    } else {
        None
    };

    let demos = eval_demos(cfg)?;
    let mut preds = Vec::with_capacity(demos.len());
    let mut truths = Vec::with_capacity(demos.len());
    for demo in &demos {
        let features = featurize(&demo.cloud, &cfg.grid);
        preds.push(predict_from_features(&net, &features, horizon)?);
        truths.push(
            demo.waypoints
                .iter()
                .map(|wp| vec![wp[0], wp[1]])
                .collect::<Vec<_>>(),
        );
    }

    let uncal = coverage_over_demos(&preds, &truths, None, cfg)?;
    let cal = match &artifact {
        Some(a) => Some(coverage_over_demos(&preds, &truths, Some(a), cfg)?),
        None => None,
    };

    let mut csv = String::from("level,coverage_uncalibrated,coverage_calibrated\n");
    for (i, row) in uncal.rows.iter().enumerate() {
        let cal_val = cal
            .as_ref()
            .map(|c| c.rows[i].coverage.to_string())
            .unwrap_or_default();
        csv.push_str(&format!("{},{},{}\n", row.level, row.coverage, cal_val));
    }
    fs::write(out_dir.join(COVERAGE_CSV), csv)?;

    let report = MetricsReport {
        coverage_uncalibrated: Some(uncal),
        coverage_calibrated: cal,
        ..MetricsReport::default()
    };
    fs::write(
        out_dir.join(COVERAGE_JSON),
        serde_json::to_string_pretty(&report)?,
    )?;

    let manifest = RunManifest::new(
        "eval-coverage",
        cfg,
        vec![COVERAGE_CSV.into(), COVERAGE_JSON.into()],
    );
    manifest.save(out_dir)?;
    Ok((report, manifest))
}

fn load_calibration_if_enabled(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<Option<CalibrationArtifact>, HarnessError> {
    if cfg.recalibration && !cfg.sim.oracle_waypoints {
        Ok(Some(CalibrationArtifact::load(&require(
            out_dir.join(CALIBRATION),
        )?)?))
    } else {
        Ok(None)
    }
}

/// Closed-loop stair climbing over seeded held-out worlds.
pub fn eval_success(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<(MetricsReport, RunManifest), HarnessError> {
    fs::create_dir_all(out_dir)?;
    let model = if cfg.sim.oracle_waypoints {
        None
    } else {
        Some(load_model(out_dir)?)
    };
    let calibration = load_calibration_if_enabled(cfg, out_dir)?;

    let mut outcomes = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let world = sample_world(cfg, "eval-world", trial as u64, true);
        let predictor = match &model {
            Some((net, horizon)) => WaypointPredictor::Model {
                net,
                horizon: *horizon,
            },
            None => WaypointPredictor::Oracle,
        };
        let setup = TrialSetup {
            world: &world,
            predictor,
            calibration: calibration.as_ref(),
            trial,
        };
        let mut outcome = run_trial(&setup, cfg, None)?;
        outcome.trial = trial;
        outcomes.push(outcome);
    }

    let successes = outcomes.iter().filter(|o| o.success).count();
    let mean_path_cost =
        outcomes.iter().map(|o| o.mean_path_cost).sum::<f64>() / outcomes.len() as f64;
    let report = MetricsReport {
        success: Some(SuccessStats::from_counts(successes, outcomes.len())),
        mean_path_cost: Some(mean_path_cost),
        outcomes,
        ..MetricsReport::default()
    };

    let mut csv = String::from(
        "trial,success,ticks,mean_path_cost,reached_goal,corridor_violation,planner_degenerate\n",
    );
    for o in &report.outcomes {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            o.trial,
            o.success,
            o.ticks,
            o.mean_path_cost,
            o.reached_goal,
            o.corridor_violation,
            o.planner_degenerate
        ));
    }
    fs::write(out_dir.join(TRIALS_CSV), csv)?;
    fs::write(
        out_dir.join(SUCCESS_JSON),
        serde_json::to_string_pretty(&report)?,
    )?;

    let manifest = RunManifest::new(
        "eval-success",
        cfg,
        vec![SUCCESS_JSON.into(), TRIALS_CSV.into()],
    );
    manifest.save(out_dir)?;
    Ok((report, manifest))
}

/// One closed-loop trial with a full per-tick trajectory dump.
pub fn plan_demo(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<(TrialOutcome, RunManifest), HarnessError> {
    fs::create_dir_all(out_dir)?;
    let model = if cfg.sim.oracle_waypoints {
        None
    } else {
        Some(load_model(out_dir)?)
    };
    let calibration = load_calibration_if_enabled(cfg, out_dir)?;
    let world = sample_world(cfg, "eval-world", 0, true);
    let predictor = match &model {
        Some((net, horizon)) => WaypointPredictor::Model {
            net,
            horizon: *horizon,
        },
        None => WaypointPredictor::Oracle,
    };
    let setup = TrialSetup {
        world: &world,
        predictor,
        calibration: calibration.as_ref(),
        trial: 0,
    };
    let mut log = TrajectoryLog::default();
    let outcome = run_trial(&setup, cfg, Some(&mut log))?;
    fs::write(
        out_dir.join(TRAJECTORY_CSV),
        log.to_csv(cfg.expert.horizon),
    )?;

    let manifest = RunManifest::new("plan-demo", cfg, vec![TRAJECTORY_CSV.into()]);
    manifest.save(out_dir)?;
    Ok((outcome, manifest))
}
