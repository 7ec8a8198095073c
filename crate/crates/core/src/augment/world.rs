//! Synthetic stair geometry: a lower landing, a straight flight of steps,
//! an upper landing, and optional side walls.

use serde::{Deserialize, Serialize};

use super::AugmentError;

/// Height added above the top landing for the side walls.
const WALL_HEIGHT: f64 = 2.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StairWorld {
    pub step_rise: f64,
    pub step_run: f64,
    pub num_steps: usize,
    pub stair_width: f64,
    pub lower_landing: f64,
    pub upper_landing: f64,
    pub side_walls: bool,
}

impl StairWorld {
    pub fn validate(&self) -> Result<(), AugmentError> {
        let ok = (0.1..=0.25).contains(&self.step_rise)
            && (0.24..=0.4).contains(&self.step_run)
            && (4..=20).contains(&self.num_steps)
            && self.stair_width >= 0.6
            && self.lower_landing > 0.0
            && self.upper_landing > 0.0;
        if ok {
            Ok(())
        } else {
            Err(AugmentError::InvalidWorld(format!(
                "implausible staircase: rise {} run {} steps {} width {}",
                self.step_rise, self.step_run, self.num_steps, self.stair_width
            )))
        }
    }

    /// x of the first riser.
    pub fn stair_start_x(&self) -> f64 {
        0.0
    }

    /// x where the top tread meets the upper landing.
    pub fn stair_end_x(&self) -> f64 {
        self.num_steps as f64 * self.step_run
    }

    pub fn start_x(&self) -> f64 {
        -self.lower_landing
    }

    pub fn end_x(&self) -> f64 {
        self.stair_end_x() + self.upper_landing
    }

    pub fn total_rise(&self) -> f64 {
        self.num_steps as f64 * self.step_rise
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.stair_width
    }

    /// Terrain height under (x, y), or None outside the footprint.
    pub fn height_at(&self, x: f64, y: f64) -> Option<f64> {
        if y.abs() > self.half_width() {
            return None;
        }
        if x < self.start_x() || x > self.end_x() {
            return None;
        }
        if x <= 0.0 {
            Some(0.0)
        } else if x >= self.stair_end_x() {
            Some(self.total_rise())
        } else {
            let tread = (x / self.step_run).ceil() as usize;
            Some(tread.min(self.num_steps) as f64 * self.step_rise)
        }
    }

    pub(crate) fn surfaces(&self) -> Vec<Surface> {
        let hw = self.half_width();
        let mut out = Vec::with_capacity(2 * self.num_steps + 4);
        out.push(Surface::Horizontal {
            z: 0.0,
            x0: self.start_x(),
            x1: 0.0,
            y0: -hw,
            y1: hw,
        });
        for i in 1..=self.num_steps {
            let z_lo = (i - 1) as f64 * self.step_rise;
            let z_hi = i as f64 * self.step_rise;
            let x_lo = (i - 1) as f64 * self.step_run;
            out.push(Surface::VerticalX {
                x: x_lo,
                z0: z_lo,
                z1: z_hi,
                y0: -hw,
                y1: hw,
            });
            out.push(Surface::Horizontal {
                z: z_hi,
                x0: x_lo,
                x1: x_lo + self.step_run,
                y0: -hw,
                y1: hw,
            });
        }
        out.push(Surface::Horizontal {
            z: self.total_rise(),
            x0: self.stair_end_x(),
            x1: self.end_x(),
            y0: -hw,
            y1: hw,
        });
        if self.side_walls {
            for y in [-hw, hw] {
                out.push(Surface::VerticalY {
                    y,
                    x0: self.start_x(),
                    x1: self.end_x(),
                    z0: 0.0,
                    z1: self.total_rise() + WALL_HEIGHT,
                });
            }
        }
        out
    }

    /// First surface hit along `origin + t·dir`, as the ray parameter t.
    pub fn cast_ray(&self, origin: [f64; 3], dir: [f64; 3], max_range: f64) -> Option<f64> {
        cast_ray_against(&self.surfaces(), origin, dir, max_range)
    }
}

pub(crate) fn cast_ray_against(
    surfaces: &[Surface],
    origin: [f64; 3],
    dir: [f64; 3],
    max_range: f64,
) -> Option<f64> {
    let mut best: Option<f64> = None;
    for s in surfaces {
        if let Some(t) = s.intersect(origin, dir) {
            if t <= max_range && best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        }
    }
    best
}

/// Axis-aligned rectangular patch.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Surface {
    Horizontal { z: f64, x0: f64, x1: f64, y0: f64, y1: f64 },
    VerticalX { x: f64, z0: f64, z1: f64, y0: f64, y1: f64 },
    VerticalY { y: f64, x0: f64, x1: f64, z0: f64, z1: f64 },
}

const RAY_EPS: f64 = 1e-9;

impl Surface {
    fn intersect(&self, o: [f64; 3], d: [f64; 3]) -> Option<f64> {
        let (plane, o_axis, d_axis) = match self {
            Surface::Horizontal { z, .. } => (*z, o[2], d[2]),
            Surface::VerticalX { x, .. } => (*x, o[0], d[0]),
            Surface::VerticalY { y, .. } => (*y, o[1], d[1]),
        };
        if d_axis.abs() < 1e-12 {
            return None;
        }
        let t = (plane - o_axis) / d_axis;
        if t <= RAY_EPS {
            return None;
        }
        let p = [o[0] + t * d[0], o[1] + t * d[1], o[2] + t * d[2]];
        let inside = match self {
            Surface::Horizontal { x0, x1, y0, y1, .. } => {
                p[0] >= *x0 && p[0] <= *x1 && p[1] >= *y0 && p[1] <= *y1
            }
            Surface::VerticalX { z0, z1, y0, y1, .. } => {
                p[2] >= *z0 && p[2] <= *z1 && p[1] >= *y0 && p[1] <= *y1
            }
            Surface::VerticalY { x0, x1, z0, z1, .. } => {
                p[0] >= *x0 && p[0] <= *x1 && p[2] >= *z0 && p[2] <= *z1
            }
        };
        inside.then_some(t)
    }
}
