//! Aggregated experiment metrics.

use serde::{Deserialize, Serialize};

use crate::calibrate::CoverageReport;

/// Success fraction with a Wilson 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessStats {
    pub successes: usize,
    pub trials: usize,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl SuccessStats {
    pub fn from_counts(successes: usize, trials: usize) -> Self {
        assert!(trials > 0);
        let n = trials as f64;
        let p = successes as f64 / n;
        let z = 1.959963984540054f64;
        let z2 = z * z;
        let denom = 1.0 + z2 / n;
        let center = (p + z2 / (2.0 * n)) / denom;
        let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        // Snap against rounding so the interval always contains p.
        Self {
            successes,
            trials,
            rate: p,
            ci_low: (center - half).max(0.0).min(p),
            ci_high: (center + half).min(1.0).max(p),
        }
    }
}

/// Outcome of one closed-loop trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub success: bool,
    pub ticks: usize,
    pub mean_path_cost: f64,
    pub reached_goal: bool,
    pub corridor_violation: bool,
    pub planner_degenerate: bool,
}

/// Report emitted by the evaluation subcommands; sections not produced by
/// a given experiment stay empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MetricsReport {
    pub success: Option<SuccessStats>,
    pub coverage_uncalibrated: Option<CoverageReport>,
    pub coverage_calibrated: Option<CoverageReport>,
    pub mean_path_cost: Option<f64>,
    pub outcomes: Vec<TrialOutcome>,
}
