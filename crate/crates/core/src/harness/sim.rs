//! Closed-loop stair traversal: render → featurize → predict → recalibrate
//! → fuse → MPPI → advance, with seeded start perturbations and optional
//! prediction corruption for the fusion ablation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::augment::{featurize, render_cloud, Pose, StairWorld};
use crate::calibrate::CalibrationArtifact;
use crate::evidential::{predictive, StudentTPredictive};
use crate::net::{link, Mlp};
use crate::numerics::{f_quantile, SpdMatrix};
use crate::planner::{
    fuse, mppi_step, rollout, Control, Corridor, RobotState, TrajectoryLog, TrajectoryRow,
    WaypointBelief,
};

use super::config::ExperimentConfig;
use super::metrics::TrialOutcome;
use super::seeds::derive_seed;
use super::HarnessError;

/// Source of per-tick waypoint predictions.
pub enum WaypointPredictor<'a> {
    /// Trained evidential regressor over the rendered cloud.
    Model { net: &'a Mlp, horizon: usize },
    /// Ground-truth centerline with a fixed small uncertainty.
    Oracle,
}

/// One waypoint prediction in the body frame.
pub struct PredictedWaypoint {
    pub mean_body: [f64; 2],
    pub scale_body: SpdMatrix,
    pub dof: f64,
}

impl WaypointPredictor<'_> {
    pub fn predict(
        &self,
        world: &StairWorld,
        pose: &Pose,
        cfg: &ExperimentConfig,
    ) -> Result<Vec<PredictedWaypoint>, HarnessError> {
        match self {
            WaypointPredictor::Model { net, horizon } => {
                let cloud = render_cloud(world, pose, &cfg.sensor);
                let features = featurize(&cloud, &cfg.grid);
                let raw = net.forward(&features)?;
                let niws = link(&raw, *horizon, 2)?;
                let mut out = Vec::with_capacity(niws.len());
                for niw in &niws {
                    let t = predictive(niw)?;
                    out.push(PredictedWaypoint {
                        mean_body: [t.loc()[0], t.loc()[1]],
                        scale_body: t.scale().clone(),
                        dof: t.dof(),
                    });
                }
                Ok(out)
            }
            WaypointPredictor::Oracle => {
                let std = cfg.sim.oracle_std;
                let var = std * std;
                let scale = SpdMatrix::diagonal(&[var, var])
                    .expect("positive oracle variance");
                // Waypoints continue past the goal line so the pull stays
                // forward-directed; the trial ends at the goal check.
                let out = (1..=cfg.expert.horizon)
                    .map(|k| {
                        let wx = pose.x + k as f64 * cfg.expert.spacing;
                        PredictedWaypoint {
                            mean_body: pose.world_to_body_2d([wx, 0.0]),
                            scale_body: scale.clone(),
                            dof: 50.0,
                        }
                    })
                    .collect();
                Ok(out)
            }
        }
    }
}

/// Scale factor aligning the predictive's reference-level set with its
/// recalibrated counterpart: f_q(d, dof, u*) / f_q(d, dof, p_ref).
fn recalibration_ratio(
    artifact: &CalibrationArtifact,
    slot: usize,
    dof: f64,
    p_ref: f64,
) -> Result<f64, HarnessError> {
    let level = artifact.map_for_slot(slot).recalibrated_level(p_ref);
    let u = level.u_star.min(1.0 - 1e-9);
    let q_ref = f_quantile(2, dof, p_ref)?;
    let q_cal = f_quantile(2, dof, u)?;
    Ok((q_cal / q_ref).clamp(0.01, 100.0))
}

fn rotate_cov(scale: &SpdMatrix, yaw: f64) -> Result<SpdMatrix, HarnessError> {
    let m = scale.reconstruct();
    let (s, c) = yaw.sin_cos();
    // R·M·Rᵀ for the 2-D rotation R(yaw).
    let a = m[0];
    let b = m[1];
    let d = m[3];
    let out = [
        c * c * a - 2.0 * s * c * b + s * s * d,
        s * c * (a - d) + (c * c - s * s) * b,
        s * c * (a - d) + (c * c - s * s) * b,
        s * s * a + 2.0 * s * c * b + c * c * d,
    ];
    Ok(SpdMatrix::cholesky(&out, 2)?)
}

pub struct TrialSetup<'a> {
    pub world: &'a StairWorld,
    pub predictor: WaypointPredictor<'a>,
    pub calibration: Option<&'a CalibrationArtifact>,
    pub trial: usize,
}

/// Run one seeded closed-loop trial. Success means reaching the top
/// landing inside the tick budget without ever leaving the corridor.
pub fn run_trial(
    setup: &TrialSetup,
    cfg: &ExperimentConfig,
    mut log: Option<&mut TrajectoryLog>,
) -> Result<TrialOutcome, HarnessError> {
    let world = setup.world;
    let corridor = Corridor {
        half_width: world.half_width(),
    };
    let start_x = world.start_x() + cfg.expert.margin;
    let goal_x = world.stair_end_x() + cfg.sim.goal_margin;
    let expert_steps = ((goal_x - start_x) / cfg.expert.spacing).ceil() as usize;
    let budget = (cfg.sim.step_budget_factor * expert_steps as f64).ceil() as usize;

    let trial_idx = setup.trial as u64;
    let mut rng_start = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "start", trial_idx));
    let mut rng_mppi = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "mppi", trial_idx));
    let mut rng_corrupt = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "corrupt", trial_idx));

    let y0 = (rng_start.random::<f64>() * 2.0 - 1.0) * cfg.sim.start_offset_y;
    let theta0 = (rng_start.random::<f64>() * 2.0 - 1.0) * cfg.sim.start_offset_yaw;
    let mut state = RobotState::at(start_x, y0, theta0);

    let mut nominal = vec![
        Control {
            v: 0.5 * cfg.mppi.v_max,
            omega: 0.0,
        };
        cfg.mppi.horizon
    ];
    let mut belief = WaypointBelief::empty();

    let mut path_cost_sum = 0.0;
    let mut ticks = 0usize;
    let mut reached_goal = false;
    let mut corridor_violation = false;
    let mut planner_degenerate = false;
    let mut corrupting = false;

    for tick in 0..budget {
        let body_z = world
            .height_at(state.x, state.y)
            .map(|h| h + cfg.expert.body_height)
            .unwrap_or(cfg.expert.body_height);
        let pose = Pose::level(state.x, state.y, body_z, state.theta);

        let preds_body = setup.predictor.predict(world, &pose, cfg)?;
        let mut preds_world: Vec<([f64; 2], SpdMatrix)> = Vec::with_capacity(preds_body.len());
        for (k, p) in preds_body.iter().enumerate() {
            let mut cov = p.scale_body.clone();
            if cfg.recalibration {
                if let Some(artifact) = setup.calibration {
                    let ratio = recalibration_ratio(
                        artifact,
                        k,
                        p.dof,
                        cfg.sim.recal_reference_level,
                    )?;
                    cov = cov.scale_by(ratio)?;
                }
            }
            let mean_w = pose.body_to_world_2d(p.mean_body);
            preds_world.push((mean_w, rotate_cov(&cov, pose.yaw)?));
        }

        if cfg.sim.corrupt_rate > 0.0 {
            // Two-state Markov process: bursts of mean length corrupt_burst_len,
            // stationary corrupted fraction corrupt_rate.
            let len = cfg.sim.corrupt_burst_len.max(1.0);
            let rate = cfg.sim.corrupt_rate.min(0.99);
            let p_start = rate / (len * (1.0 - rate));
            let p_continue = 1.0 - 1.0 / len;
            let u = rng_corrupt.random::<f64>();
            corrupting = if cfg.sim.corrupt_periodic {
                let period = (1.0 / rate).round().max(1.0) as usize;
                (tick + 1) % period == 0
            } else if corrupting {
                u < p_continue
            } else {
                u < p_start
            };
            let side = if rng_corrupt.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
            if corrupting {
                for (mean, cov) in &mut preds_world {
                    mean[1] += side * cfg.sim.corrupt_offset;
                    *cov = cov.scale_by(cfg.sim.corrupt_cov_scale)?;
                }
            }
        }

        if cfg.fusion {
            belief.tick();
            belief = fuse(&belief, &preds_world, cfg.mppi.fusion_decay)?;
        } else {
            belief = fuse(&WaypointBelief::empty(), &preds_world, cfg.mppi.fusion_decay)?;
        }

        let step = match mppi_step(&state, &nominal, &belief, &corridor, &cfg.mppi, &mut rng_mppi)
        {
            Ok(s) => s,
            Err(crate::planner::PlannerError::Degenerate) => {
                planner_degenerate = true;
                break;
            }
            Err(e) => return Err(e.into()),
        };

        state = rollout(&state, &[step.applied], cfg.mppi.dt, cfg.mppi.v_max, cfg.mppi.omega_max)[0];
        // Receding horizon: consume the applied control, duplicate the tail.
        nominal = step.nominal.clone();
        nominal.rotate_left(1);
        let n = nominal.len();
        if n >= 2 {
            nominal[n - 1] = nominal[n - 2];
        }

        ticks = tick + 1;
        let outside = state.y.abs() > corridor.half_width;
        path_cost_sum += cfg.sim.path_tracking_weight * state.y * state.y
            + if outside {
                cfg.sim.path_corridor_weight
            } else {
                0.0
            };

        if let Some(log) = log.as_deref_mut() {
            log.push(TrajectoryRow {
                tick,
                state,
                applied: step.applied,
                slot_means: belief.slots.iter().map(|s| s.mean).collect(),
                slot_traces: belief.slots.iter().map(|s| s.cov.trace()).collect(),
                min_cost: step.diagnostics.min_cost,
                mean_cost: step.diagnostics.mean_cost,
            });
        }

        if outside {
            corridor_violation = true;
            break;
        }
        if state.x >= goal_x {
            reached_goal = true;
            break;
        }
    }

    Ok(TrialOutcome {
        trial: setup.trial,
        success: reached_goal && !corridor_violation && !planner_degenerate,
        ticks,
        mean_path_cost: path_cost_sum / ticks.max(1) as f64,
        reached_goal,
        corridor_violation,
        planner_degenerate,
    })
}

/// Per-slot Student-t predictions for a rendered cloud; shared by the
/// calibration and coverage paths.
pub fn predict_from_features(
    net: &Mlp,
    features: &[f64],
    horizon: usize,
) -> Result<Vec<StudentTPredictive>, HarnessError> {
    let raw = net.forward(features)?;
    let niws = link(&raw, horizon, 2)?;
    let mut out = Vec::with_capacity(niws.len());
    for niw in &niws {
        out.push(predictive(niw)?);
    }
    Ok(out)
}
