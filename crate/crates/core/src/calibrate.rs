//! Post-hoc recalibration: fit an isotonic map on PIT values from a
//! calibration split, invert it to pick recalibrated set levels, and grade
//! empirical coverage.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evidential::{EvidentialError, StudentTPredictive};
use crate::numerics::{f_quantile, NumericsError, SpdMatrix};

pub const CALIBRATION_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CalibrateError {
    #[error("need at least two PIT values to fit a map")]
    InsufficientData,
    #[error("empty input")]
    EmptyInput,
    #[error("paired lists differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("prediction set at level 1 is unbounded")]
    DegenerateLevel,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Evidential(#[from] EvidentialError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("artifact format: {0}")]
    Format(String),
}

/// Monotone piecewise-linear map on [0, 1] fitted to (PIT, empirical CDF)
/// pairs. Evaluation interpolates linearly between knots and clamps to the
/// end values outside them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotonicMap {
    pub knots_u: Vec<f64>,
    pub values_v: Vec<f64>,
}

impl IsotonicMap {
    pub fn identity() -> Self {
        Self {
            knots_u: vec![0.0, 1.0],
            values_v: vec![0.0, 1.0],
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        let n = self.knots_u.len();
        if u <= self.knots_u[0] {
            return self.values_v[0];
        }
        if u >= self.knots_u[n - 1] {
            return self.values_v[n - 1];
        }
        let idx = match self
            .knots_u
            .binary_search_by(|k| k.partial_cmp(&u).unwrap())
        {
            Ok(i) => return self.values_v[i],
            Err(i) => i,
        };
        let (u0, u1) = (self.knots_u[idx - 1], self.knots_u[idx]);
        let (v0, v1) = (self.values_v[idx - 1], self.values_v[idx]);
        v0 + (v1 - v0) * (u - u0) / (u1 - u0)
    }

    /// Smallest u with map(u) ≥ p (generalized inverse). Returns u* = 1
    /// flagged unattainable when even map(1) < p.
    pub fn recalibrated_level(&self, p: f64) -> RecalibratedLevel {
        let n = self.knots_u.len();
        if self.values_v[n - 1] < p {
            return RecalibratedLevel {
                u_star: 1.0,
                attainable: false,
            };
        }
        if self.values_v[0] >= p {
            // Everything below the first knot maps to values_v[0] as well,
            // but the map is only anchored from the first knot on; the
            // smallest *represented* u achieving p is that knot.
            return RecalibratedLevel {
                u_star: self.knots_u[0].min(1.0).max(0.0),
                attainable: true,
            };
        }
        // First index with value >= p.
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.values_v[mid] >= p {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let (u0, u1) = (self.knots_u[lo], self.knots_u[hi]);
        let (v0, v1) = (self.values_v[lo], self.values_v[hi]);
        let u_star = if v1 > v0 {
            u0 + (u1 - u0) * (p - v0) / (v1 - v0)
        } else {
            u1
        };
        RecalibratedLevel {
            u_star: u_star.clamp(0.0, 1.0),
            attainable: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecalibratedLevel {
    pub u_star: f64,
    pub attainable: bool,
}

/// Pool-adjacent-violators: the L2-optimal nondecreasing fit to `targets`
/// under `weights`.
pub fn pav(targets: &[f64], weights: &[f64]) -> Vec<f64> {
    debug_assert_eq!(targets.len(), weights.len());
    // Blocks of (mean, weight, count), pooled while out of order.
    let mut means: Vec<f64> = Vec::with_capacity(targets.len());
    let mut wsum: Vec<f64> = Vec::with_capacity(targets.len());
    let mut count: Vec<usize> = Vec::with_capacity(targets.len());
    for (&t, &w) in targets.iter().zip(weights.iter()) {
        means.push(t);
        wsum.push(w);
        count.push(1);
        while means.len() > 1 && means[means.len() - 2] > means[means.len() - 1] {
            let (m1, w1, c1) = (means.pop().unwrap(), wsum.pop().unwrap(), count.pop().unwrap());
            let k = means.len() - 1;
            let merged_w = wsum[k] + w1;
            means[k] = (means[k] * wsum[k] + m1 * w1) / merged_w;
            wsum[k] = merged_w;
            count[k] += c1;
        }
    }
    let mut out = Vec::with_capacity(targets.len());
    for (m, c) in means.iter().zip(count.iter()) {
        out.extend(std::iter::repeat_n(*m, *c));
    }
    out
}

/// Fit the recalibration map: knots are the sorted unique PITs, targets the
/// empirical CDF ranks i/n (averaged over ties), made monotone by PAV.
pub fn fit_pav(pits: &[f64]) -> Result<IsotonicMap, CalibrateError> {
    if pits.len() < 2 {
        return Err(CalibrateError::InsufficientData);
    }
    let n = pits.len();
    let mut sorted = pits.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut knots = Vec::new();
    let mut targets = Vec::new();
    let mut weights = Vec::new();
    let mut i = 0usize;
    while i < n {
        let mut j = i;
        let mut rank_sum = 0.0;
        while j < n && sorted[j] == sorted[i] {
            rank_sum += (j + 1) as f64 / n as f64;
            j += 1;
        }
        knots.push(sorted[i]);
        targets.push(rank_sum / (j - i) as f64);
        weights.push((j - i) as f64);
        i = j;
    }

    let values: Vec<f64> = pav(&targets, &weights)
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect();
    Ok(IsotonicMap {
        knots_u: knots,
        values_v: values,
    })
}

/// Ellipsoid `{y : (y-center)ᵀ shape⁻¹ (y-center) ≤ radius_sq}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub center: Vec<f64>,
    pub shape: SpdMatrix,
    pub radius_sq: f64,
}

impl PredictionSet {
    pub fn contains(&self, y: &[f64]) -> Result<bool, CalibrateError> {
        let resid: Vec<f64> = y.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let x = self.shape.solve(&resid)?;
        let m2: f64 = resid.iter().zip(&x).map(|(r, s)| r * s).sum();
        Ok(m2 <= self.radius_sq)
    }
}

/// The Mahalanobis ball holding nominal predictive mass `u_star`:
/// `radius² = d · F_quantile(d, dof, u_star)` inverts the PIT transform.
pub fn prediction_set(
    t: &StudentTPredictive,
    u_star: f64,
) -> Result<PredictionSet, CalibrateError> {
    if !(0.0..1.0).contains(&u_star) {
        return Err(CalibrateError::DegenerateLevel);
    }
    let d = t.dim();
    let radius_sq = d as f64 * f_quantile(d as u32, t.dof(), u_star)?;
    Ok(PredictionSet {
        center: t.loc().to_vec(),
        shape: t.scale().clone(),
        radius_sq,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub level: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub rows: Vec<CoverageRow>,
    pub mean_abs_calibration_error: f64,
}

/// Empirical coverage of level-p prediction sets over paired
/// (predictive, truth) lists, optionally recalibrated through `map`.
pub fn coverage_report(
    predictives: &[StudentTPredictive],
    truths: &[Vec<f64>],
    map: Option<&IsotonicMap>,
    levels: &[f64],
) -> Result<CoverageReport, CalibrateError> {
    if predictives.is_empty() {
        return Err(CalibrateError::EmptyInput);
    }
    if predictives.len() != truths.len() {
        return Err(CalibrateError::LengthMismatch(
            predictives.len(),
            truths.len(),
        ));
    }
    let mut rows = Vec::with_capacity(levels.len());
    let mut err_sum = 0.0;
    for &p in levels {
        let u = match map {
            Some(m) => m.recalibrated_level(p).u_star,
            None => p,
        };
        let mut hits = 0usize;
        for (t, y) in predictives.iter().zip(truths.iter()) {
            let inside = if u >= 1.0 {
                true
            } else {
                prediction_set(t, u)?.contains(y)?
            };
            if inside {
                hits += 1;
            }
        }
        let coverage = hits as f64 / predictives.len() as f64;
        err_sum += (coverage - p).abs();
        rows.push(CoverageRow { level: p, coverage });
    }
    let mean_abs_calibration_error = if levels.is_empty() {
        0.0
    } else {
        err_sum / levels.len() as f64
    };
    Ok(CoverageReport {
        rows,
        mean_abs_calibration_error,
    })
}

/// On-disk calibration artifact: the pooled map, optional per-slot maps,
/// a table of recalibrated levels, and fit metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationArtifact {
    pub schema_version: u32,
    pub pooled: IsotonicMap,
    pub per_slot: Option<Vec<IsotonicMap>>,
    pub level_table: Vec<LevelEntry>,
    pub split_hash: String,
    pub n_pits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelEntry {
    pub level: f64,
    pub u_star: f64,
    pub attainable: bool,
}

impl CalibrationArtifact {
    pub fn new(
        pooled: IsotonicMap,
        per_slot: Option<Vec<IsotonicMap>>,
        levels: &[f64],
        split_hash: String,
        n_pits: usize,
    ) -> Self {
        let level_table = levels
            .iter()
            .map(|&p| {
                let r = pooled.recalibrated_level(p);
                LevelEntry {
                    level: p,
                    u_star: r.u_star,
                    attainable: r.attainable,
                }
            })
            .collect();
        Self {
            schema_version: CALIBRATION_SCHEMA_VERSION,
            pooled,
            per_slot,
            level_table,
            split_hash,
            n_pits,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CalibrateError> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CalibrateError> {
        let artifact: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        if artifact.schema_version != CALIBRATION_SCHEMA_VERSION {
            return Err(CalibrateError::Format(format!(
                "calibration schema {} unsupported (expected {})",
                artifact.schema_version, CALIBRATION_SCHEMA_VERSION
            )));
        }
        Ok(artifact)
    }

    /// Map for a given waypoint slot: the per-slot fit when present, the
    /// pooled fallback otherwise.
    pub fn map_for_slot(&self, slot: usize) -> &IsotonicMap {
        match &self.per_slot {
            Some(maps) if slot < maps.len() => &maps[slot],
            _ => &self.pooled,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidential::{predictive, NIWParams};
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pav_pools_violating_pair() {
        assert_eq!(pav(&[0.8, 0.2], &[1.0, 1.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn pav_keeps_monotone_targets() {
        let t = [0.1, 0.3, 0.3, 0.9];
        assert_eq!(pav(&t, &[1.0; 4]), t.to_vec());
    }

    /// Brute-force optimal monotone fit: enumerate contiguous-block
    /// partitions, candidate values are block means, keep monotone ones.
    fn brute_force_monotone(targets: &[f64], weights: &[f64]) -> Vec<f64> {
        let n = targets.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 0..(1u32 << (n - 1)) {
            let mut fit = Vec::with_capacity(n);
            let mut start = 0usize;
            for end in 0..n {
                let boundary = end == n - 1 || (mask >> end) & 1 == 1;
                if boundary {
                    let wsum: f64 = weights[start..=end].iter().sum();
                    let mean: f64 = targets[start..=end]
                        .iter()
                        .zip(&weights[start..=end])
                        .map(|(t, w)| t * w)
                        .sum::<f64>()
                        / wsum;
                    fit.extend(std::iter::repeat_n(mean, end - start + 1));
                    start = end + 1;
                }
            }
            if fit.windows(2).any(|w| w[1] < w[0] - 1e-12) {
                continue;
            }
            let sse: f64 = fit
                .iter()
                .zip(targets)
                .zip(weights)
                .map(|((f, t), w)| w * (f - t) * (f - t))
                .sum();
            if best.as_ref().is_none_or(|(b, _)| sse < *b - 1e-15) {
                best = Some((sse, fit));
            }
        }
        best.unwrap().1
    }

    #[test]
    fn pav_matches_brute_force_on_grid_instances() {
        // Exhaustive over lengths 1..=4 on a coarse grid (full 0.1-grid
        // sweep up to length 6 lives in the acceptance suite).
        for len in 1..=4usize {
            let levels = 5usize;
            let total = levels.pow(len as u32);
            for code in 0..total {
                let mut c = code;
                let targets: Vec<f64> = (0..len)
                    .map(|_| {
                        let t = (c % levels) as f64 * 0.25;
                        c /= levels;
                        t
                    })
                    .collect();
                let weights = vec![1.0; len];
                let got = pav(&targets, &weights);
                let want = brute_force_monotone(&targets, &weights);
                for (g, w) in got.iter().zip(want.iter()) {
                    assert!(
                        (g - w).abs() <= 1e-10,
                        "targets {targets:?}: {got:?} vs {want:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn fit_rejects_tiny_input() {
        assert!(matches!(fit_pav(&[0.5]), Err(CalibrateError::InsufficientData)));
    }

    #[test]
    fn fit_on_uniform_pits_is_near_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let pits: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let map = fit_pav(&pits).unwrap();
        let mut max_dev = 0.0f64;
        for i in 0..=100 {
            let u = i as f64 / 100.0;
            max_dev = max_dev.max((map.eval(u) - u).abs());
        }
        assert!(max_dev <= 0.03, "max deviation {max_dev}");
    }

    #[test]
    fn fit_averages_tied_knots() {
        let map = fit_pav(&[0.4, 0.4, 0.9]).unwrap();
        assert_eq!(map.knots_u, vec![0.4, 0.9]);
        // Ranks 1/3 and 2/3 average to 1/2 on the tied knot.
        assert_abs_diff_eq!(map.values_v[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(map.values_v[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn recalibrated_level_identity_map() {
        let map = IsotonicMap::identity();
        let r = map.recalibrated_level(0.9);
        assert!(r.attainable);
        assert_abs_diff_eq!(r.u_star, 0.9, epsilon = 1e-12);
    }

    #[test]
    fn recalibrated_level_is_monotone_in_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pits: Vec<f64> = (0..500).map(|_| rng.random::<f64>().powf(0.5)).collect();
        let map = fit_pav(&pits).unwrap();
        let mut prev = 0.0;
        for i in 1..100 {
            let p = i as f64 / 100.0;
            let u = map.recalibrated_level(p).u_star;
            assert!(u >= prev - 1e-12);
            prev = u;
        }
    }

    #[test]
    fn overconfident_model_inflates_sets() {
        // PITs piled near 1 (overconfident predictive): Beta(5,1) samples.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pits: Vec<f64> = (0..4000)
            .map(|_| rng.random::<f64>().powf(1.0 / 5.0))
            .collect();
        let map = fit_pav(&pits).unwrap();
        let r = map.recalibrated_level(0.9);
        assert!(r.attainable);
        assert!(r.u_star > 0.9, "u* {}", r.u_star);
    }

    #[test]
    fn level_below_first_value_returns_first_knot() {
        let map = IsotonicMap {
            knots_u: vec![0.3, 0.8],
            values_v: vec![0.5, 1.0],
        };
        let r = map.recalibrated_level(0.2);
        assert!(r.attainable);
        assert_abs_diff_eq!(r.u_star, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn unattainable_level_is_flagged() {
        let map = IsotonicMap {
            knots_u: vec![0.0, 1.0],
            values_v: vec![0.0, 0.7],
        };
        let r = map.recalibrated_level(0.9);
        assert!(!r.attainable);
        assert_eq!(r.u_star, 1.0);
    }

    fn example_predictive() -> StudentTPredictive {
        let psi = SpdMatrix::cholesky(&[0.8, 0.2, 0.2, 0.6], 2).unwrap();
        let niw = NIWParams::new(vec![0.5, -0.3], 2.0, psi, 5.0).unwrap();
        predictive(&niw).unwrap()
    }

    #[test]
    fn prediction_set_zero_level_is_singleton() {
        let t = example_predictive();
        let set = prediction_set(&t, 0.0).unwrap();
        assert_eq!(set.radius_sq, 0.0);
        assert!(set.contains(t.loc()).unwrap());
        assert!(!set.contains(&[0.6, -0.3]).unwrap());
    }

    #[test]
    fn prediction_set_level_one_is_degenerate() {
        let t = example_predictive();
        assert!(matches!(
            prediction_set(&t, 1.0),
            Err(CalibrateError::DegenerateLevel)
        ));
    }

    #[test]
    fn prediction_sets_are_nested() {
        let t = example_predictive();
        let mut prev = -1.0;
        for i in 0..20 {
            let u = i as f64 / 20.0;
            let s = prediction_set(&t, u).unwrap();
            assert!(s.radius_sq >= prev);
            prev = s.radius_sq;
        }
    }

    #[test]
    fn prediction_set_mass_matches_level() {
        let t = example_predictive();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u_star = 0.8;
        let set = prediction_set(&t, u_star).unwrap();
        let n = 20_000;
        let mut hits = 0;
        for _ in 0..n {
            if set.contains(&t.sample(&mut rng)).unwrap() {
                hits += 1;
            }
        }
        let frac = hits as f64 / n as f64;
        assert!((frac - u_star).abs() <= 0.01, "mass {frac}");
    }

    #[test]
    fn coverage_self_consistency() {
        // Truths drawn from the predictives themselves: coverage(p) ≈ p.
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let mut preds = Vec::new();
        let mut truths = Vec::new();
        for _ in 0..5000 {
            let t = example_predictive();
            truths.push(t.sample(&mut rng));
            preds.push(t);
        }
        let report = coverage_report(&preds, &truths, None, &[0.5, 0.9]).unwrap();
        for row in &report.rows {
            assert!(
                (row.coverage - row.level).abs() <= 0.02,
                "level {} coverage {}",
                row.level,
                row.coverage
            );
        }
    }

    #[test]
    fn identity_map_changes_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut preds = Vec::new();
        let mut truths = Vec::new();
        for _ in 0..200 {
            let t = example_predictive();
            truths.push(t.sample(&mut rng));
            preds.push(t);
        }
        let without = coverage_report(&preds, &truths, None, &[0.5, 0.8, 0.9]).unwrap();
        let with = coverage_report(
            &preds,
            &truths,
            Some(&IsotonicMap::identity()),
            &[0.5, 0.8, 0.9],
        )
        .unwrap();
        assert_eq!(without, with);
    }

    #[test]
    fn empty_levels_give_empty_report() {
        let t = example_predictive();
        let report = coverage_report(&[t], &[vec![0.0, 0.0]], None, &[]).unwrap();
        assert!(report.rows.is_empty());
        assert_eq!(report.mean_abs_calibration_error, 0.0);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            coverage_report(&[], &[], None, &[0.5]),
            Err(CalibrateError::EmptyInput)
        ));
    }

    #[test]
    fn shrunk_scales_recalibrate_to_nominal() {
        // Miscalibration oracle: predictive scale shrunk ×0.25 while truths
        // come from the unshrunk distribution. Uncalibrated coverage at 0.9
        // collapses; a map fitted on a held-out split restores it.
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let make = |shrink: bool| {
            let psi = SpdMatrix::cholesky(&[0.8, 0.2, 0.2, 0.6], 2).unwrap();
            let niw = NIWParams::new(vec![0.5, -0.3], 2.0, psi, 5.0).unwrap();
            let t = predictive(&niw).unwrap();
            if shrink {
                StudentTPredictive::new(
                    t.loc().to_vec(),
                    t.scale().scale_by(0.25).unwrap(),
                    t.dof(),
                )
                .unwrap()
            } else {
                t
            }
        };
        let n_cal = 3000;
        let n_eval = 5000;
        let mut cal_pits = Vec::new();
        for _ in 0..n_cal {
            let truth = make(false).sample(&mut rng);
            cal_pits.push(make(true).pit(&truth).unwrap());
        }
        let map = fit_pav(&cal_pits).unwrap();

        let mut preds = Vec::new();
        let mut truths = Vec::new();
        for _ in 0..n_eval {
            truths.push(make(false).sample(&mut rng));
            preds.push(make(true));
        }
        let uncal = coverage_report(&preds, &truths, None, &[0.9]).unwrap();
        assert!(uncal.rows[0].coverage <= 0.6, "uncal {}", uncal.rows[0].coverage);
        let cal = coverage_report(&preds, &truths, Some(&map), &[0.9]).unwrap();
        assert!(
            (cal.rows[0].coverage - 0.9).abs() <= 0.03,
            "calibrated {}",
            cal.rows[0].coverage
        );
    }

    #[test]
    fn map_applied_to_own_pits_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        // Skewed PITs (underconfident model).
        let pits: Vec<f64> = (0..3000).map(|_| rng.random::<f64>().powf(2.0)).collect();
        let map = fit_pav(&pits).unwrap();
        let mut transformed: Vec<f64> = pits.iter().map(|&u| map.eval(u)).collect();
        transformed.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = transformed.len();
        let mut ks = 0.0f64;
        for (i, v) in transformed.iter().enumerate() {
            ks = ks.max(((i + 1) as f64 / n as f64 - v).abs());
            ks = ks.max((v - i as f64 / n as f64).abs());
        }
        assert!(ks < 0.05, "KS {ks}");
    }

    #[test]
    fn end_to_end_radius_monotone_in_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let pits: Vec<f64> = (0..2000).map(|_| rng.random::<f64>().powf(0.7)).collect();
        let map = fit_pav(&pits).unwrap();
        let t = example_predictive();
        let mut prev = -1.0;
        for i in 1..20 {
            let p = i as f64 / 20.0;
            let r = map.recalibrated_level(p);
            let radius = if r.u_star >= 1.0 {
                f64::INFINITY
            } else {
                prediction_set(&t, r.u_star).unwrap().radius_sq
            };
            assert!(radius >= prev);
            prev = radius;
        }
    }

    #[test]
    fn artifact_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("calibration.json");
        let pits: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let artifact = CalibrationArtifact::new(
            fit_pav(&pits).unwrap(),
            None,
            &[0.5, 0.8, 0.9, 0.95],
            "abc123".into(),
            pits.len(),
        );
        artifact.save(&path).unwrap();
        let loaded = CalibrationArtifact::load(&path).unwrap();
        assert_eq!(loaded, artifact);
        assert_eq!(loaded.level_table.len(), 4);
    }
}
