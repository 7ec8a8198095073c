//! Link from unconstrained regressor outputs to valid NIW evidence.
//!
//! Per-waypoint slot layout: `[μ (d) | κ (1) | lower Cholesky of Ψ in
//! row-major order (d(d+1)/2) | ν (1)]`. Softplus floors keep every
//! emitted parameter inside the NIW invariants for any finite input.

use crate::evidential::{NIWParams, NU_MARGIN};
use crate::numerics::SpdMatrix;

use super::NetError;

pub const KAPPA_FLOOR: f64 = 1e-3;
pub const CHOL_DIAG_FLOOR: f64 = 1e-3;

pub fn slots_per_waypoint(dim: usize) -> usize {
    dim + 1 + dim * (dim + 1) / 2 + 1
}

pub fn raw_len(horizon: usize, dim: usize) -> usize {
    horizon * slots_per_waypoint(dim)
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Map a raw output vector onto `horizon` NIW parameter sets.
pub fn link(raw: &[f64], horizon: usize, dim: usize) -> Result<Vec<NIWParams>, NetError> {
    let expected = raw_len(horizon, dim);
    if raw.len() != expected {
        return Err(NetError::SlotMismatch {
            expected,
            got: raw.len(),
        });
    }
    let stride = slots_per_waypoint(dim);
    let mut out = Vec::with_capacity(horizon);
    for w in 0..horizon {
        let slots = &raw[w * stride..(w + 1) * stride];
        let mu = slots[..dim].to_vec();
        let kappa = softplus(slots[dim]) + KAPPA_FLOOR;
        let mut chol = vec![0.0; dim * dim];
        let mut k = dim + 1;
        for i in 0..dim {
            for j in 0..=i {
                chol[i * dim + j] = if i == j {
                    softplus(slots[k]) + CHOL_DIAG_FLOOR
                } else {
                    slots[k]
                };
                k += 1;
            }
        }
        let nu = (dim as f64 - 1.0 + NU_MARGIN) + softplus(slots[stride - 1]);
        let psi = SpdMatrix::from_lower_chol(dim, chol)
            .expect("softplus floor keeps the diagonal positive");
        out.push(NIWParams::new(mu, kappa, psi, nu)?);
    }
    Ok(out)
}
