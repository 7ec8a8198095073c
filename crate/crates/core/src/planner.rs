//! MPPI planner tracking predicted waypoints, weighting them by confidence
//! and fusing each new prediction into a decaying precision-weighted buffer
//! so that occasional poor predictions are suppressed.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::wrap_angle;
use crate::numerics::{NumericsError, SpdMatrix};

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("belief has {0} slots but {1} predictions were supplied")]
    SlotMismatch(usize, usize),
    #[error("every rollout cost was non-finite")]
    Degenerate,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Unicycle state standing in for the legged platform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
}

impl RobotState {
    pub fn at(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
            v: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Control {
    pub v: f64,
    pub omega: f64,
}

/// One buffered waypoint estimate: world-frame mean, covariance, and the
/// number of ticks since it was last fused.
#[derive(Debug, Clone)]
pub struct BeliefSlot {
    pub mean: [f64; 2],
    pub cov: SpdMatrix,
    pub age: u32,
}

/// Time-stamped fused waypoint estimates, one slot per horizon index.
#[derive(Debug, Clone, Default)]
pub struct WaypointBelief {
    pub slots: Vec<BeliefSlot>,
}

impl WaypointBelief {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Advance one planner tick without fusing.
    pub fn tick(&mut self) {
        for slot in &mut self.slots {
            slot.age += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostWeights {
    pub tracking: f64,
    pub effort: f64,
    pub corridor: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            tracking: 1.0,
            effort: 0.01,
            corridor: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MppiConfig {
    pub rollouts: usize,
    pub horizon: usize,
    pub dt: f64,
    pub lambda: f64,
    pub noise_std_v: f64,
    pub noise_std_omega: f64,
    pub weights: CostWeights,
    /// Per-tick decay of buffered precision.
    pub fusion_decay: f64,
    /// Added to covariance traces before inverting into confidence weights.
    pub confidence_floor: f64,
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for MppiConfig {
    fn default() -> Self {
        Self {
            rollouts: 256,
            horizon: 15,
            dt: 0.15,
            lambda: 0.3,
            noise_std_v: 0.3,
            noise_std_omega: 0.15,
            weights: CostWeights::default(),
            fusion_decay: 0.5,
            confidence_floor: 1e-3,
            v_max: 0.8,
            omega_max: 1.0,
        }
    }
}

impl MppiConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.rollouts < 1 || self.horizon < 1 {
            return Err("rollouts and horizon must be at least 1".into());
        }
        if !(self.lambda > 0.0) {
            return Err("lambda must be positive".into());
        }
        if !(self.fusion_decay > 0.0 && self.fusion_decay < 1.0) {
            return Err("fusion decay must lie in (0, 1)".into());
        }
        Ok(())
    }
}

/// Corridor the robot must stay inside: |y| ≤ half_width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corridor {
    pub half_width: f64,
}

/// Precision-weighted fusion of new predictions into the belief, with the
/// buffered precision decayed by `gamma^age`:
/// `Λ = γ^age·Λ_old + Λ_new`, `mean = Λ⁻¹(γ^age·Λ_old·m_old + Λ_new·m_new)`.
/// Ages reset to zero on fusion.
pub fn fuse(
    belief: &WaypointBelief,
    new_preds: &[([f64; 2], SpdMatrix)],
    gamma: f64,
) -> Result<WaypointBelief, PlannerError> {
    if belief.is_empty() {
        return Ok(WaypointBelief {
            slots: new_preds
                .iter()
                .map(|(mean, cov)| BeliefSlot {
                    mean: *mean,
                    cov: cov.clone(),
                    age: 0,
                })
                .collect(),
        });
    }
    if belief.slots.len() != new_preds.len() {
        return Err(PlannerError::SlotMismatch(
            belief.slots.len(),
            new_preds.len(),
        ));
    }
    let mut slots = Vec::with_capacity(new_preds.len());
    for (old, (m_new, cov_new)) in belief.slots.iter().zip(new_preds.iter()) {
        let decay = gamma.powi(old.age as i32);
        let lam_old = scale_mat(&old.cov.inverse(), decay);
        let lam_new = cov_new.inverse();
        let lam = add_mat(&lam_old, &lam_new);
        let rhs = [
            lam_old[0] * old.mean[0] + lam_old[1] * old.mean[1]
                + lam_new[0] * m_new[0] + lam_new[1] * m_new[1],
            lam_old[2] * old.mean[0] + lam_old[3] * old.mean[1]
                + lam_new[2] * m_new[0] + lam_new[3] * m_new[1],
        ];
        let lam_spd = SpdMatrix::cholesky(&lam, 2)?;
        let mean = lam_spd.solve(&rhs)?;
        let cov = SpdMatrix::cholesky(&lam_spd.inverse(), 2)?;
        slots.push(BeliefSlot {
            mean: [mean[0], mean[1]],
            cov,
            age: 0,
        });
    }
    Ok(WaypointBelief { slots })
}

fn scale_mat(m: &[f64], s: f64) -> Vec<f64> {
    m.iter().map(|v| v * s).collect()
}

fn add_mat(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b.iter()).map(|(x, y)| x + y).collect()
}

/// Integrate unicycle kinematics under the given controls; commanded speed
/// and turn rate are clamped to the actuator bounds before each step.
pub fn rollout(
    state: &RobotState,
    controls: &[Control],
    dt: f64,
    v_max: f64,
    omega_max: f64,
) -> Vec<RobotState> {
    let mut out = Vec::with_capacity(controls.len());
    let mut s = *state;
    for c in controls {
        let v = c.v.clamp(-v_max, v_max);
        let omega = c.omega.clamp(-omega_max, omega_max);
        s.x += v * s.theta.cos() * dt;
        s.y += v * s.theta.sin() * dt;
        s.theta = wrap_angle(s.theta + omega * dt);
        s.v = v;
        out.push(s);
    }
    out
}

/// Waypoint-tracking cost of one rollout:
/// `Σ_k c_k·‖nearest point − mean_k‖² + effort·Σ‖u‖² + corridor penalty per
/// violating step`, with confidence weight `c_k = 1/(tr cov_k + floor)`.
pub fn trajectory_cost(
    traj: &[RobotState],
    controls: &[Control],
    belief: &WaypointBelief,
    corridor: &Corridor,
    weights: &CostWeights,
    confidence_floor: f64,
) -> f64 {
    let mut cost = 0.0;
    for slot in &belief.slots {
        let c_k = 1.0 / (slot.cov.trace() + confidence_floor);
        let mut nearest = f64::INFINITY;
        for s in traj {
            let d2 = (s.x - slot.mean[0]).powi(2) + (s.y - slot.mean[1]).powi(2);
            if d2 < nearest {
                nearest = d2;
            }
        }
        cost += weights.tracking * c_k * nearest;
    }
    for c in controls {
        cost += weights.effort * (c.v * c.v + c.omega * c.omega);
    }
    for s in traj {
        if s.y.abs() > corridor.half_width {
            cost += weights.corridor;
        }
    }
    cost
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MppiDiagnostics {
    pub min_cost: f64,
    pub mean_cost: f64,
    pub weight_sum_error: f64,
}

#[derive(Debug, Clone)]
pub struct MppiStep {
    pub nominal: Vec<Control>,
    pub applied: Control,
    pub diagnostics: MppiDiagnostics,
}

/// One MPPI update against an arbitrary rollout cost. Samples `rollouts`
/// Gaussian control perturbations, scores them, and moves the nominal by
/// the exponentially weighted average of the perturbations.
pub fn mppi_step_with<F>(
    state: &RobotState,
    nominal: &[Control],
    config: &MppiConfig,
    rng: &mut impl Rng,
    cost_fn: F,
) -> Result<MppiStep, PlannerError>
where
    F: Fn(&[RobotState], &[Control]) -> f64,
{
    let t_len = nominal.len();
    let noise_v = Normal::new(0.0, config.noise_std_v).expect("finite std");
    let noise_w = Normal::new(0.0, config.noise_std_omega).expect("finite std");

    let k = config.rollouts;
    let mut perturbations: Vec<Vec<Control>> = Vec::with_capacity(k);
    let mut costs: Vec<f64> = Vec::with_capacity(k);
    let mut perturbed: Vec<Control> = vec![Control::default(); t_len];
    for _ in 0..k {
        let eps: Vec<Control> = (0..t_len)
            .map(|_| Control {
                v: if config.noise_std_v > 0.0 {
                    noise_v.sample(rng)
                } else {
                    0.0
                },
                omega: if config.noise_std_omega > 0.0 {
                    noise_w.sample(rng)
                } else {
                    0.0
                },
            })
            .collect();
        for (p, (n, e)) in perturbed.iter_mut().zip(nominal.iter().zip(eps.iter())) {
            p.v = n.v + e.v;
            p.omega = n.omega + e.omega;
        }
        let traj = rollout(state, &perturbed, config.dt, config.v_max, config.omega_max);
        let s = cost_fn(&traj, &perturbed);
        costs.push(s);
        perturbations.push(eps);
    }

    let min_cost = costs
        .iter()
        .copied()
        .filter(|c| c.is_finite())
        .fold(f64::INFINITY, f64::min);
    if !min_cost.is_finite() {
        return Err(PlannerError::Degenerate);
    }
    // Non-finite costs get weight zero.
    let mut weights: Vec<f64> = costs
        .iter()
        .map(|&s| {
            if s.is_finite() {
                (-(s - min_cost) / config.lambda).exp()
            } else {
                0.0
            }
        })
        .collect();
    let z: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= z;
    }
    let weight_sum_error = (weights.iter().sum::<f64>() - 1.0).abs();

    let mut updated = nominal.to_vec();
    for (w, eps) in weights.iter().zip(perturbations.iter()) {
        if *w == 0.0 {
            continue;
        }
        for (u, e) in updated.iter_mut().zip(eps.iter()) {
            u.v += w * e.v;
            u.omega += w * e.omega;
        }
    }
    // Keep the plan inside the actuator bounds; past them the dynamics
    // saturate and the cost no longer argues against drift.
    for u in &mut updated {
        u.v = u.v.clamp(-config.v_max, config.v_max);
        u.omega = u.omega.clamp(-config.omega_max, config.omega_max);
    }

    let finite: Vec<f64> = costs.into_iter().filter(|c| c.is_finite()).collect();
    let mean_cost = finite.iter().sum::<f64>() / finite.len() as f64;
    let applied = updated[0];
    Ok(MppiStep {
        nominal: updated,
        applied,
        diagnostics: MppiDiagnostics {
            min_cost,
            mean_cost,
            weight_sum_error,
        },
    })
}

/// The production cost binding: track the fused belief inside the corridor.
pub fn mppi_step(
    state: &RobotState,
    nominal: &[Control],
    belief: &WaypointBelief,
    corridor: &Corridor,
    config: &MppiConfig,
    rng: &mut impl Rng,
) -> Result<MppiStep, PlannerError> {
    mppi_step_with(state, nominal, config, rng, |traj, controls| {
        trajectory_cost(
            traj,
            controls,
            belief,
            corridor,
            &config.weights,
            config.confidence_floor,
        )
    })
}

/// One row of the planner trajectory dump.
#[derive(Debug, Clone)]
pub struct TrajectoryRow {
    pub tick: usize,
    pub state: RobotState,
    pub applied: Control,
    pub slot_means: Vec<[f64; 2]>,
    pub slot_traces: Vec<f64>,
    pub min_cost: f64,
    pub mean_cost: f64,
}

/// Accumulated per-tick log, dumped as CSV for the harness and plotting.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryLog {
    pub rows: Vec<TrajectoryRow>,
}

impl TrajectoryLog {
    pub fn push(&mut self, row: TrajectoryRow) {
        self.rows.push(row);
    }

    pub fn to_csv(&self, slots: usize) -> String {
        let mut out = String::from("tick,x,y,theta,v,cmd_v,cmd_omega,min_cost,mean_cost");
        for k in 0..slots {
            out.push_str(&format!(",slot{k}_x,slot{k}_y,slot{k}_trace"));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}",
                row.tick,
                row.state.x,
                row.state.y,
                row.state.theta,
                row.state.v,
                row.applied.v,
                row.applied.omega,
                row.min_cost,
                row.mean_cost
            ));
            for k in 0..slots {
                match (row.slot_means.get(k), row.slot_traces.get(k)) {
                    (Some(m), Some(t)) => out.push_str(&format!(",{},{},{}", m[0], m[1], t)),
                    _ => out.push_str(",,,"),
                }
            }
            out.push('\n');
        }
        out
    }
}
