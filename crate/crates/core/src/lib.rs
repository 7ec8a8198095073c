//! Uncertainty-aware waypoint prediction for simulated stair traversal.
//!
//! The crate learns waypoint sequences with multivariate Student-t
//! predictive uncertainty from synthetic expert demonstrations, hardens the
//! regressor with viewpoint/pose augmentation, recalibrates the uncertainty
//! post hoc with isotonic regression on PIT values, and tracks the
//! calibrated predictions with an MPPI planner in a closed 2.5-D stair
//! loop.

pub mod augment;
pub mod calibrate;
pub mod evidential;
pub mod harness;
pub mod net;
pub mod numerics;
pub mod planner;
