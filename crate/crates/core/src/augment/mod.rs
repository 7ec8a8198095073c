//! Synthetic stair worlds, LiDAR-like rendering, and viewpoint/pose domain
//! augmentation with corrective waypoint relabeling.

mod dataset;
mod pose;
mod render;
mod world;

pub use dataset::{read_dataset, write_dataset, DatasetHeader, DatasetRecord, DATASET_SCHEMA_VERSION};
pub use pose::{wrap_angle, Pose, PoseDelta};
pub use render::{render_cloud, PointCloud, SensorConfig};
pub use world::StairWorld;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum clearance between a sensor pose and the terrain under it.
pub const MIN_POSE_CLEARANCE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("invalid world: {0}")]
    InvalidWorld(String),
    #[error("perturbed pose penetrates or leaves the terrain at ({x:.3}, {y:.3}, {z:.3})")]
    InvalidPose { x: f64, y: f64, z: f64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset format: {0}")]
    Format(String),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

/// One training record: sensor pose, rendered cloud, and the H×2 waypoint
/// labels (x forward, y lateral) in the body frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub pose: Pose,
    pub cloud: PointCloud,
    pub waypoints: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpertConfig {
    /// Arclength spacing between consecutive expert poses and waypoints.
    pub spacing: f64,
    /// Number of waypoints per label.
    pub horizon: usize,
    /// Body height above the terrain.
    pub body_height: f64,
    /// Margin kept clear of the landing ends.
    pub margin: f64,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self {
            spacing: 0.15,
            horizon: 8,
            body_height: 0.45,
            margin: 0.2,
        }
    }
}

/// An expert pose with its waypoint labels, before rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertFrame {
    pub pose: Pose,
    pub waypoints: Vec<[f64; 2]>,
}

/// March up the stair centerline at fixed arclength spacing; each frame is
/// labeled with the next `horizon` centerline points in its body frame.
pub fn expert_trajectory(world: &StairWorld, cfg: &ExpertConfig) -> Vec<ExpertFrame> {
    let x_first = world.start_x() + cfg.margin;
    let x_last = world.end_x() - cfg.margin;
    let reach = cfg.horizon as f64 * cfg.spacing;
    let mut frames = Vec::new();
    let mut i = 0usize;
    loop {
        let x = x_first + i as f64 * cfg.spacing;
        if x + reach > x_last {
            break;
        }
        let z = world.height_at(x, 0.0).expect("centerline inside footprint") + cfg.body_height;
        let pose = Pose::level(x, 0.0, z, 0.0);
        let waypoints = (1..=cfg.horizon)
            .map(|k| pose.world_to_body_2d([x + k as f64 * cfg.spacing, 0.0]))
            .collect();
        frames.push(ExpertFrame { pose, waypoints });
        i += 1;
    }
    frames
}

/// Symmetric per-axis bounds for pose perturbations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbRanges {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub dyaw: f64,
    pub dpitch: f64,
    pub droll: f64,
}

impl Default for PerturbRanges {
    fn default() -> Self {
        Self {
            dx: 0.15,
            dy: 0.15,
            dz: 0.05,
            dyaw: 0.15,
            dpitch: 0.05,
            droll: 0.05,
        }
    }
}

/// Uniform draw on each symmetric range; deterministic given the rng state.
pub fn sample_perturbation<R: Rng + ?Sized>(rng: &mut R, ranges: &PerturbRanges) -> PoseDelta {
    let mut draw = |bound: f64| (rng.random::<f64>() * 2.0 - 1.0) * bound;
    PoseDelta {
        dx: draw(ranges.dx),
        dy: draw(ranges.dy),
        dz: draw(ranges.dz),
        dyaw: draw(ranges.dyaw),
        dpitch: draw(ranges.dpitch),
        droll: draw(ranges.droll),
    }
}

/// Re-render a demonstration from a perturbed viewpoint and relabel its
/// waypoints correctively: the new labels are the original world-frame
/// waypoints expressed in the perturbed body frame, pulling back to the
/// demonstrated path. The cloud is a true re-render, not a point-set
/// transform, so occlusion changes are reflected.
pub fn augment(
    world: &StairWorld,
    demo: &Demonstration,
    delta: &PoseDelta,
    sensor: &SensorConfig,
) -> Result<Demonstration, AugmentError> {
    if delta.is_zero() {
        return Ok(demo.clone());
    }
    let world_wps: Vec<[f64; 2]> = demo
        .waypoints
        .iter()
        .map(|&p| demo.pose.body_to_world_2d(p))
        .collect();
    let new_pose = demo.pose.compose(delta);
    match world.height_at(new_pose.x, new_pose.y) {
        Some(h) if new_pose.z >= h + MIN_POSE_CLEARANCE => {}
        _ => {
            return Err(AugmentError::InvalidPose {
                x: new_pose.x,
                y: new_pose.y,
                z: new_pose.z,
            })
        }
    }
    let cloud = render_cloud(world, &new_pose, sensor);
    let waypoints = world_wps
        .iter()
        .map(|&p| new_pose.world_to_body_2d(p))
        .collect();
    Ok(Demonstration {
        pose: new_pose,
        cloud,
        waypoints,
    })
}

/// Body-frame elevation grid, centered on the sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureGrid {
    pub cells_x: usize,
    pub cells_y: usize,
    pub extent_x: f64,
    pub extent_y: f64,
}

impl Default for FeatureGrid {
    fn default() -> Self {
        Self {
            cells_x: 16,
            cells_y: 10,
            extent_x: 6.4,
            extent_y: 3.0,
        }
    }
}

impl FeatureGrid {
    pub fn feature_len(&self) -> usize {
        2 * self.cells_x * self.cells_y
    }
}

/// Per cell (max point height, occupancy flag), row-major over x then y,
/// the two channels interleaved. Empty cells encode (0, 0); points outside
/// the grid extent are dropped.
pub fn featurize(cloud: &PointCloud, grid: &FeatureGrid) -> Vec<f64> {
    let mut features = vec![0.0; grid.feature_len()];
    let x_min = -0.5 * grid.extent_x;
    let y_min = -0.5 * grid.extent_y;
    for p in &cloud.points {
        let fx = (p[0] - x_min) / grid.extent_x * grid.cells_x as f64;
        let fy = (p[1] - y_min) / grid.extent_y * grid.cells_y as f64;
        if fx < 0.0 || fy < 0.0 {
            continue;
        }
        let (ix, iy) = (fx as usize, fy as usize);
        if ix >= grid.cells_x || iy >= grid.cells_y {
            continue;
        }
        let base = (ix * grid.cells_y + iy) * 2;
        if features[base + 1] == 0.0 {
            features[base] = p[2];
            features[base + 1] = 1.0;
        } else if p[2] > features[base] {
            features[base] = p[2];
        }
    }
    features
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn test_world() -> StairWorld {
        StairWorld {
            step_rise: 0.15,
            step_run: 0.3,
            num_steps: 8,
            stair_width: 1.0,
            lower_landing: 1.5,
            upper_landing: 1.5,
            side_walls: true,
        }
    }

    fn small_sensor() -> SensorConfig {
        SensorConfig {
            azimuth_bins: 24,
            elevation_bins: 8,
            ..SensorConfig::default()
        }
    }

    #[test]
    fn expert_labels_are_forward_spaced_on_centerline() {
        let world = test_world();
        let cfg = ExpertConfig::default();
        let frames = expert_trajectory(&world, &cfg);
        assert!(frames.len() > 10);
        for f in &frames {
            assert_eq!(f.waypoints.len(), cfg.horizon);
            for (k, wp) in f.waypoints.iter().enumerate() {
                assert_abs_diff_eq!(wp[0], (k + 1) as f64 * cfg.spacing, epsilon = 1e-12);
                assert_abs_diff_eq!(wp[1], 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn expert_labels_round_trip_to_world_centerline() {
        let world = test_world();
        let cfg = ExpertConfig::default();
        for f in expert_trajectory(&world, &cfg) {
            for (k, wp) in f.waypoints.iter().enumerate() {
                let w = f.pose.body_to_world_2d(*wp);
                let want_x = f.pose.x + (k + 1) as f64 * cfg.spacing;
                assert_abs_diff_eq!(w[0], want_x, epsilon = 1e-9);
                assert_abs_diff_eq!(w[1], 0.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn perturbations_respect_bounds_and_moments() {
        let ranges = PerturbRanges {
            dyaw: 0.3,
            ..PerturbRanges::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let mut mean_abs_yaw = 0.0;
        for _ in 0..n {
            let d = sample_perturbation(&mut rng, &ranges);
            assert!(d.dx.abs() <= ranges.dx);
            assert!(d.dy.abs() <= ranges.dy);
            assert!(d.dz.abs() <= ranges.dz);
            assert!(d.dyaw.abs() <= ranges.dyaw);
            assert!(d.dpitch.abs() <= ranges.dpitch);
            assert!(d.droll.abs() <= ranges.droll);
            mean_abs_yaw += d.dyaw.abs();
        }
        mean_abs_yaw /= n as f64;
        assert!((mean_abs_yaw - 0.15).abs() < 0.01, "mean |yaw| {mean_abs_yaw}");
    }

    #[test]
    fn zero_bounds_give_identity_delta() {
        let ranges = PerturbRanges {
            dx: 0.0,
            dy: 0.0,
            dz: 0.0,
            dyaw: 0.0,
            dpitch: 0.0,
            droll: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(sample_perturbation(&mut rng, &ranges).is_zero());
    }

    fn demo_at(world: &StairWorld, frame_idx: usize) -> Demonstration {
        let cfg = ExpertConfig::default();
        let frames = expert_trajectory(world, &cfg);
        let f = &frames[frame_idx];
        Demonstration {
            pose: f.pose,
            cloud: render_cloud(world, &f.pose, &small_sensor()),
            waypoints: f.waypoints.clone(),
        }
    }

    #[test]
    fn augment_identity_is_bit_exact() {
        let world = test_world();
        let demo = demo_at(&world, 3);
        let out = augment(&world, &demo, &PoseDelta::ZERO, &small_sensor()).unwrap();
        assert_eq!(out, demo);
    }

    #[test]
    fn augment_pure_yaw_rotates_labels_back() {
        let world = test_world();
        let demo = demo_at(&world, 2);
        let theta = 0.2;
        let delta = PoseDelta {
            dyaw: theta,
            ..PoseDelta::ZERO
        };
        let out = augment(&world, &demo, &delta, &small_sensor()).unwrap();
        let (s, c) = (-theta as f64).sin_cos();
        for (old, new) in demo.waypoints.iter().zip(out.waypoints.iter()) {
            let want = [c * old[0] - s * old[1], s * old[0] + c * old[1]];
            assert_abs_diff_eq!(new[0], want[0], epsilon = 1e-9);
            assert_abs_diff_eq!(new[1], want[1], epsilon = 1e-9);
        }
    }

    #[test]
    fn augment_pure_lateral_shifts_labels_back() {
        let world = test_world();
        let demo = demo_at(&world, 2);
        let delta = PoseDelta {
            dy: 0.1,
            ..PoseDelta::ZERO
        };
        let out = augment(&world, &demo, &delta, &small_sensor()).unwrap();
        for (old, new) in demo.waypoints.iter().zip(out.waypoints.iter()) {
            assert_abs_diff_eq!(new[0], old[0], epsilon = 1e-9);
            assert_abs_diff_eq!(new[1], old[1] - 0.1, epsilon = 1e-9);
        }
    }

    #[test]
    fn augment_labels_reproduce_world_waypoints_for_any_delta() {
        let world = test_world();
        let demo = demo_at(&world, 5);
        let world_wps: Vec<[f64; 2]> = demo
            .waypoints
            .iter()
            .map(|&p| demo.pose.body_to_world_2d(p))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ranges = PerturbRanges::default();
        let mut tested = 0;
        for _ in 0..50 {
            let delta = sample_perturbation(&mut rng, &ranges);
            let Ok(out) = augment(&world, &demo, &delta, &small_sensor()) else {
                continue;
            };
            tested += 1;
            for (wp, want) in out.waypoints.iter().zip(world_wps.iter()) {
                let got = out.pose.body_to_world_2d(*wp);
                assert_abs_diff_eq!(got[0], want[0], epsilon = 1e-9);
                assert_abs_diff_eq!(got[1], want[1], epsilon = 1e-9);
            }
        }
        assert!(tested > 30);
    }

    #[test]
    fn augment_rejects_pose_below_terrain() {
        let world = test_world();
        let demo = demo_at(&world, 2);
        let delta = PoseDelta {
            dz: -0.44,
            ..PoseDelta::ZERO
        };
        assert!(matches!(
            augment(&world, &demo, &delta, &small_sensor()),
            Err(AugmentError::InvalidPose { .. })
        ));
    }

    #[test]
    fn rerendered_cloud_differs_from_rigid_transform_under_occlusion() {
        // A tall-step world where shifting the viewpoint up-stair reveals
        // treads that were occluded: the re-rendered cloud cannot be a
        // rigid transform of the original (hit counts differ).
        let world = StairWorld {
            step_rise: 0.25,
            step_run: 0.26,
            num_steps: 10,
            stair_width: 1.0,
            lower_landing: 2.0,
            upper_landing: 1.0,
            side_walls: false,
        };
        let cfg = ExpertConfig::default();
        let frames = expert_trajectory(&world, &cfg);
        let f = &frames[0];
        let sensor = small_sensor();
        let demo = Demonstration {
            pose: f.pose,
            cloud: render_cloud(&world, &f.pose, &sensor),
            waypoints: f.waypoints.clone(),
        };
        let delta = PoseDelta {
            dz: 0.05,
            dx: 0.15,
            ..PoseDelta::ZERO
        };
        let out = augment(&world, &demo, &delta, &sensor).unwrap();

        // A rigid transform of the original point set would land on exactly
        // the same world-frame surface points. Moving up-stair reveals tread
        // area that was occluded, so some re-rendered point must be far from
        // every original one.
        let old_world: Vec<[f64; 3]> = demo
            .cloud
            .points
            .iter()
            .map(|&p| demo.pose.body_to_world(p))
            .collect();
        let mut max_gap = 0.0f64;
        for p in &out.cloud.points {
            let w = out.pose.body_to_world(*p);
            let nearest = old_world
                .iter()
                .map(|q| {
                    ((w[0] - q[0]).powi(2) + (w[1] - q[1]).powi(2) + (w[2] - q[2]).powi(2)).sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            max_gap = max_gap.max(nearest);
        }
        assert!(
            max_gap > 0.05,
            "re-render matched a rigid transform too closely (max gap {max_gap})"
        );
    }

    #[test]
    fn featurize_empty_and_single_point() {
        let grid = FeatureGrid {
            cells_x: 4,
            cells_y: 4,
            extent_x: 4.0,
            extent_y: 4.0,
        };
        let empty = featurize(&PointCloud { points: vec![] }, &grid);
        assert!(empty.iter().all(|&v| v == 0.0));
        assert_eq!(empty.len(), 32);

        // Point at the center of cell (ix=2, iy=2): body (0.5, 0.5).
        let one = featurize(
            &PointCloud {
                points: vec![[0.5, 0.5, 0.3]],
            },
            &grid,
        );
        let base = (2 * 4 + 2) * 2;
        assert_eq!(one[base], 0.3);
        assert_eq!(one[base + 1], 1.0);
        assert_eq!(one.iter().filter(|&&v| v != 0.0).count(), 2);
    }

    #[test]
    fn featurize_is_permutation_invariant() {
        let world = test_world();
        let demo = demo_at(&world, 4);
        let grid = FeatureGrid::default();
        let a = featurize(&demo.cloud, &grid);
        let mut shuffled = demo.cloud.clone();
        shuffled.points.reverse();
        let mid = shuffled.points.len() / 2;
        shuffled.points.rotate_left(mid);
        let b = featurize(&shuffled, &grid);
        assert_eq!(a, b);
    }

    #[test]
    fn featurize_keeps_max_height_per_cell() {
        let grid = FeatureGrid {
            cells_x: 2,
            cells_y: 2,
            extent_x: 2.0,
            extent_y: 2.0,
        };
        let cloud = PointCloud {
            points: vec![[0.5, 0.5, 0.1], [0.5, 0.5, -0.4], [0.5, 0.5, 0.05]],
        };
        let f = featurize(&cloud, &grid);
        let base = (1 * 2 + 1) * 2;
        assert_eq!(f[base], 0.1);
        assert_eq!(f[base + 1], 1.0);
    }

    #[test]
    fn featurize_is_translation_equivariant_at_grid_resolution() {
        let grid = FeatureGrid {
            cells_x: 8,
            cells_y: 8,
            extent_x: 4.0,
            extent_y: 4.0,
        };
        let pitch_x = grid.extent_x / grid.cells_x as f64;
        let cloud = PointCloud {
            points: vec![[0.55, -0.3, 0.2], [-1.2, 0.9, 0.45], [0.1, 0.1, -0.1]],
        };
        let shifted = PointCloud {
            points: cloud.points.iter().map(|p| [p[0] + pitch_x, p[1], p[2]]).collect(),
        };
        let a = featurize(&cloud, &grid);
        let b = featurize(&shifted, &grid);
        // Shifting every point by one cell pitch moves each occupied cell
        // one x-index up.
        for ix in 0..grid.cells_x - 1 {
            for iy in 0..grid.cells_y {
                let src = (ix * grid.cells_y + iy) * 2;
                let dst = ((ix + 1) * grid.cells_y + iy) * 2;
                assert_eq!(a[src], b[dst]);
                assert_eq!(a[src + 1], b[dst + 1]);
            }
        }
    }
}
