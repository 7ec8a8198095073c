//! Experiment configuration: world generator ranges, toggles for the three
//! ablations, and every module config, loadable from JSON with defaults.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{ExpertConfig, FeatureGrid, PerturbRanges, SensorConfig, StairWorld};
use crate::net::TrainConfig;
use crate::planner::MppiConfig;

use super::HarnessError;

/// Inclusive sampling interval.
pub type Range = (f64, f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldRanges {
    pub step_rise: Range,
    pub step_run: Range,
    pub num_steps: (usize, usize),
    pub stair_width: Range,
    pub lower_landing: Range,
    pub upper_landing: Range,
    pub side_walls: bool,
}

impl Default for WorldRanges {
    fn default() -> Self {
        Self {
            step_rise: (0.12, 0.17),
            step_run: (0.27, 0.33),
            num_steps: (6, 9),
            stair_width: (0.9, 1.2),
            lower_landing: (1.4, 1.8),
            upper_landing: (1.2, 1.6),
            side_walls: true,
        }
    }
}

impl WorldRanges {
    /// Held-out "unseen stairs": steeper rises, disjoint from the training
    /// range.
    pub fn default_eval() -> Self {
        Self {
            step_rise: (0.18, 0.23),
            ..Self::default()
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> StairWorld {
        let mut draw = |r: Range| r.0 + (r.1 - r.0) * rng.random::<f64>();
        let steps_span = self.num_steps.1 - self.num_steps.0 + 1;
        StairWorld {
            step_rise: draw(self.step_rise),
            step_run: draw(self.step_run),
            stair_width: draw(self.stair_width),
            lower_landing: draw(self.lower_landing),
            upper_landing: draw(self.upper_landing),
            num_steps: self.num_steps.0 + (rng.random::<f64>() * steps_span as f64) as usize,
            side_walls: self.side_walls,
        }
    }

    /// True when at least one parameter interval is strictly disjoint.
    pub fn disjoint_from(&self, other: &WorldRanges) -> bool {
        fn apart(a: Range, b: Range) -> bool {
            a.1 < b.0 || b.1 < a.0
        }
        apart(self.step_rise, other.step_rise)
            || apart(self.step_run, other.step_run)
            || apart(self.stair_width, other.stair_width)
            || self.num_steps.1 < other.num_steps.0
            || other.num_steps.1 < self.num_steps.0
    }
}

/// Closed-loop simulation knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Tick budget = factor × expert step count for the world.
    pub step_budget_factor: f64,
    /// Deployment-time start perturbations (uniform, symmetric).
    pub start_offset_y: f64,
    pub start_offset_yaw: f64,
    /// Fraction of ticks whose predictions are corrupted.
    pub corrupt_rate: f64,
    /// Mean length of corruption bursts, in ticks.
    pub corrupt_burst_len: f64,
    /// Inject corruption on a fixed tick period instead of at random.
    pub corrupt_periodic: bool,
    /// Lateral displacement of corrupted means (m).
    pub corrupt_offset: f64,
    /// Covariance inflation of corrupted predictions.
    pub corrupt_cov_scale: f64,
    /// Track the true centerline instead of the model (sanity ablation).
    pub oracle_waypoints: bool,
    /// Std of the oracle's per-axis waypoint uncertainty (m).
    pub oracle_std: f64,
    /// Realized-path cost weights (squared centerline deviation, corridor
    /// violations per tick).
    pub path_tracking_weight: f64,
    pub path_corridor_weight: f64,
    /// Reference mass level at which calibrated sets resize covariances.
    pub recal_reference_level: f64,
    /// Goal margin past the top of the stairs (m).
    pub goal_margin: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            step_budget_factor: 3.0,
            start_offset_y: 0.15,
            start_offset_yaw: 0.15,
            corrupt_rate: 0.0,
            corrupt_burst_len: 3.0,
            corrupt_periodic: false,
            corrupt_offset: 3.0,
            corrupt_cov_scale: 25.0,
            oracle_waypoints: false,
            oracle_std: 0.05,
            path_tracking_weight: 1.0,
            path_corridor_weight: 5.0,
            recal_reference_level: 0.9,
            goal_margin: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    pub out_dir: String,
    pub n_train_worlds: usize,
    pub n_eval_worlds: usize,
    pub train_worlds: WorldRanges,
    pub eval_worlds: WorldRanges,
    pub augmentation: bool,
    pub recalibration: bool,
    pub fusion: bool,
    /// Synthetic variants rendered per expert frame.
    pub aug_multiplicity: usize,
    /// Fraction of worlds reserved for the calibration split.
    pub calib_world_fraction: f64,
    pub expert: ExpertConfig,
    pub sensor: SensorConfig,
    pub grid: FeatureGrid,
    pub perturb: PerturbRanges,
    pub hidden_layers: Vec<usize>,
    pub train: TrainConfig,
    /// Fit one isotonic map per waypoint slot instead of a pooled one.
    pub per_slot_maps: bool,
    pub levels: Vec<f64>,
    pub mppi: MppiConfig,
    pub sim: SimConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 100,
            out_dir: "out".into(),
            n_train_worlds: 20,
            n_eval_worlds: 20,
            train_worlds: WorldRanges::default(),
            eval_worlds: WorldRanges::default_eval(),
            augmentation: true,
            recalibration: true,
            fusion: true,
            aug_multiplicity: 4,
            calib_world_fraction: 0.2,
            expert: ExpertConfig::default(),
            sensor: SensorConfig::default(),
            grid: FeatureGrid::default(),
            perturb: PerturbRanges::default(),
            hidden_layers: vec![64, 64],
            train: TrainConfig::default(),
            per_slot_maps: false,
            levels: vec![0.5, 0.8, 0.9, 0.95],
            mppi: MppiConfig::default(),
            sim: SimConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|_| HarnessError::MissingArtifact(path.to_path_buf()))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| HarnessError::InvalidConfig(format!("{path:?}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !self.train_worlds.disjoint_from(&self.eval_worlds) {
            return Err(HarnessError::InvalidConfig(
                "train and eval world ranges must be disjoint in at least one parameter".into(),
            ));
        }
        if self.trials == 0 || self.n_train_worlds == 0 || self.n_eval_worlds == 0 {
            return Err(HarnessError::InvalidConfig(
                "trials and world counts must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.calib_world_fraction) {
            return Err(HarnessError::InvalidConfig(
                "calib_world_fraction must lie in [0, 1)".into(),
            ));
        }
        self.mppi
            .validate()
            .map_err(HarnessError::InvalidConfig)?;
        for &p in &self.levels {
            if !(0.0 < p && p < 1.0) {
                return Err(HarnessError::InvalidConfig(format!(
                    "coverage level {p} outside (0, 1)"
                )));
            }
        }
        Ok(())
    }

    /// Canonical JSON used for hashing and manifests.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_disjoint() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert!(cfg.train_worlds.disjoint_from(&cfg.eval_worlds));
    }

    #[test]
    fn overlapping_world_ranges_rejected() {
        let cfg = ExperimentConfig {
            eval_worlds: WorldRanges::default(),
            ..ExperimentConfig::default()
        };
        assert!(matches!(
            cfg.validate(),
            Err(HarnessError::InvalidConfig(_))
        ));
    }

    #[test]
    fn sampled_worlds_satisfy_invariants() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for ranges in [WorldRanges::default(), WorldRanges::default_eval()] {
            for _ in 0..200 {
                ranges.sample(&mut rng).validate().unwrap();
            }
        }
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str("{\"seed\": 9}").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.trials, 100);
        cfg.validate().unwrap();
    }
}
