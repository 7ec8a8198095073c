//! LiDAR-like point-cloud rendering by ray casting against the stair
//! surfaces. One ray per (azimuth, elevation) bin; misses are dropped.

use serde::{Deserialize, Serialize};

use super::pose::Pose;
use super::world::{cast_ray_against, StairWorld};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    pub azimuth_bins: usize,
    pub elevation_bins: usize,
    pub max_range: f64,
    /// Vertical field of view in radians, symmetric scan lines inside it.
    pub elevation_min: f64,
    pub elevation_max: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            azimuth_bins: 64,
            elevation_bins: 16,
            max_range: 12.0,
            elevation_min: -std::f64::consts::FRAC_PI_4,
            elevation_max: std::f64::consts::FRAC_PI_4,
        }
    }
}

/// Points in the sensor (body) frame, meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn render_cloud(world: &StairWorld, pose: &Pose, sensor: &SensorConfig) -> PointCloud {
    let surfaces = world.surfaces();
    let rot = pose.rotation();
    let origin = pose.position();
    let mut points = Vec::with_capacity(sensor.azimuth_bins * sensor.elevation_bins);
    let el_span = sensor.elevation_max - sensor.elevation_min;
    for ai in 0..sensor.azimuth_bins {
        let az = -std::f64::consts::PI
            + (ai as f64 + 0.5) * (2.0 * std::f64::consts::PI) / sensor.azimuth_bins as f64;
        let (saz, caz) = az.sin_cos();
        for ei in 0..sensor.elevation_bins {
            let el = sensor.elevation_min
                + (ei as f64 + 0.5) * el_span / sensor.elevation_bins as f64;
            let (sel, cel) = el.sin_cos();
            let dir_body = [cel * caz, cel * saz, sel];
            let dir_world = [
                rot[0][0] * dir_body[0] + rot[0][1] * dir_body[1] + rot[0][2] * dir_body[2],
                rot[1][0] * dir_body[0] + rot[1][1] * dir_body[1] + rot[1][2] * dir_body[2],
                rot[2][0] * dir_body[0] + rot[2][1] * dir_body[1] + rot[2][2] * dir_body[2],
            ];
            if let Some(t) = cast_ray_against(&surfaces, origin, dir_world, sensor.max_range) {
                // The sensor-frame hit is just t along the body direction.
                points.push([t * dir_body[0], t * dir_body[1], t * dir_body[2]]);
            }
        }
    }
    PointCloud { points }
}
