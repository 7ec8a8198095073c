//! Evidential loss head on the gradient tape, and the batched
//! loss-and-gradient entry point used by training.

use crate::evidential::NU_MARGIN;

use super::link::{slots_per_waypoint, CHOL_DIAG_FLOOR, KAPPA_FLOOR};
use super::mlp::{Mlp, MlpGrads};
use super::tape::{GradientTape, Var};
use super::NetError;

/// One training record: observation features and the `horizon × dim`
/// waypoint targets, flattened waypoint-major.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub features: Vec<f64>,
    pub targets: Vec<f64>,
}

/// Evidential loss of one waypoint, built on the tape from its raw slots.
///
/// Mirrors `link` → `predictive` → `log_pdf` exactly; the agreement is
/// pinned by a unit test against the plain-value implementation.
pub(crate) fn waypoint_loss<'t>(
    slots: &[Var<'t>],
    target: &[f64],
    dim: usize,
    lambda_reg: f64,
) -> Var<'t> {
    let d = dim as f64;
    let stride = slots_per_waypoint(dim);
    debug_assert_eq!(slots.len(), stride);
    debug_assert_eq!(target.len(), dim);

    let mu = &slots[..dim];
    let kappa = slots[dim].softplus() + KAPPA_FLOOR;
    let mut chol: Vec<Option<Var<'t>>> = vec![None; dim * dim];
    let mut k = dim + 1;
    for i in 0..dim {
        for j in 0..=i {
            chol[i * dim + j] = Some(if i == j {
                slots[k].softplus() + CHOL_DIAG_FLOOR
            } else {
                slots[k]
            });
            k += 1;
        }
    }
    let nu = slots[stride - 1].softplus() + (d - 1.0 + NU_MARGIN);
    let dof = nu - (d - 1.0);

    // Predictive scale is s·C·Cᵀ with s = (κ+1)/(κ·dof).
    let s = (kappa + 1.0) / (kappa * dof);

    // Forward-substitute C·z = y - μ, then m² = ‖z‖²/s.
    let resid: Vec<Var<'t>> = (0..dim).map(|i| target[i] - mu[i]).collect();
    let mut z: Vec<Var<'t>> = Vec::with_capacity(dim);
    for i in 0..dim {
        let mut acc = resid[i];
        for (j, zj) in z.iter().enumerate().take(i) {
            acc = acc - chol[i * dim + j].unwrap() * *zj;
        }
        z.push(acc / chol[i * dim + i].unwrap());
    }
    let mut zsq = z[0].square();
    for zi in z.iter().skip(1) {
        zsq = zsq + zi.square();
    }
    let m2 = zsq / s;

    let mut ln_det = s.ln() * d;
    for i in 0..dim {
        ln_det = ln_det + chol[i * dim + i].unwrap().ln() * 2.0;
    }

    let half_dpd = (dof + d) * 0.5;
    let log_pdf = half_dpd.ln_gamma() - (dof * 0.5).ln_gamma()
        - (dof.ln() + std::f64::consts::PI.ln()) * (0.5 * d)
        - ln_det * 0.5
        - half_dpd * (m2 / dof + 1.0).ln();

    let mut loss = -log_pdf;
    if lambda_reg != 0.0 {
        let mut l1 = (target[0] - mu[0]).abs();
        for i in 1..dim {
            l1 = l1 + (target[i] - mu[i]).abs();
        }
        loss = loss + l1 * (kappa + nu) * lambda_reg;
    }
    loss
}

/// Mean evidential loss over a batch and its exact reverse-mode gradient
/// with respect to every network weight.
pub fn loss_and_grad(
    net: &Mlp,
    batch: &[TrainSample],
    lambda_reg: f64,
    horizon: usize,
    dim: usize,
) -> Result<(f64, MlpGrads), NetError> {
    if batch.is_empty() {
        return Err(NetError::EmptyBatch);
    }
    let stride = slots_per_waypoint(dim);
    let raw_dim = horizon * stride;
    if net.output_dim() != raw_dim {
        return Err(NetError::SlotMismatch {
            expected: raw_dim,
            got: net.output_dim(),
        });
    }
    let norm = 1.0 / (batch.len() * horizon) as f64;
    let mut grads = MlpGrads::zeros_like(net);
    let mut total = 0.0;
    for sample in batch {
        if sample.targets.len() != horizon * dim {
            return Err(NetError::DimensionMismatch {
                expected: horizon * dim,
                got: sample.targets.len(),
            });
        }
        let acts = net.forward_cached(&sample.features)?;
        let raw = acts.last().unwrap();
        let mut d_raw = vec![0.0; raw_dim];
        for w in 0..horizon {
            let tape = GradientTape::new();
            let vars: Vec<Var> = raw[w * stride..(w + 1) * stride]
                .iter()
                .map(|&v| tape.var(v))
                .collect();
            let loss = waypoint_loss(
                &vars,
                &sample.targets[w * dim..(w + 1) * dim],
                dim,
                lambda_reg,
            );
            total += loss.value();
            let g = loss.grad();
            for (k, var) in vars.iter().enumerate() {
                d_raw[w * stride + k] = g.wrt(*var) * norm;
            }
        }
        net.backward(&acts, &d_raw, &mut grads);
    }
    let loss = total * norm;
    if !loss.is_finite() || !grads.is_finite() {
        return Err(NetError::NonFiniteLoss { epoch: None });
    }
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidential::evidential_loss;
    use crate::net::link::{link, raw_len};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tape_loss_matches_plain_evidential_loss() {
        // Two independent routes to the same scalar.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let raw: Vec<f64> = (0..slots_per_waypoint(2))
                .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * 3.0)
                .collect();
            let y = [rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0];
            let lambda = if rng.random::<f64>() < 0.5 { 0.0 } else { 0.05 };

            let tape = GradientTape::new();
            let vars: Vec<Var> = raw.iter().map(|&v| tape.var(v)).collect();
            let tape_val = waypoint_loss(&vars, &y, 2, lambda).value();

            let niw = &link(&raw, 1, 2).unwrap()[0];
            let plain = evidential_loss(niw, &y, lambda).unwrap();
            assert!(
                (tape_val - plain).abs() <= 1e-12 * plain.abs().max(1.0),
                "{tape_val} vs {plain}"
            );
        }
    }

    #[test]
    fn duplicated_batch_entries_do_not_change_loss() {
        let net = Mlp::new(&[3, 8, raw_len(2, 2)], 4);
        let sample = TrainSample {
            features: vec![0.2, -0.1, 0.4],
            targets: vec![0.5, 0.0, 1.0, 0.1],
        };
        let batch1 = vec![sample.clone()];
        let batch2 = vec![sample.clone(), sample];
        let (l1, _) = loss_and_grad(&net, &batch1, 0.01, 2, 2).unwrap();
        let (l2, _) = loss_and_grad(&net, &batch2, 0.01, 2, 2).unwrap();
        assert!((l1 - l2).abs() <= 1e-12);
    }

    #[test]
    fn grad_matches_finite_differences() {
        let horizon = 2;
        let dim = 2;
        let net = Mlp::new(&[4, 6, raw_len(horizon, dim)], 17);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let batch: Vec<TrainSample> = (0..4)
            .map(|_| TrainSample {
                features: (0..4).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect(),
                targets: (0..horizon * dim)
                    .map(|_| rng.random::<f64>() * 2.0 - 1.0)
                    .collect(),
            })
            .collect();
        let lambda = 0.01;
        let (_, grads) = loss_and_grad(&net, &batch, lambda, horizon, dim).unwrap();

        let h = 1e-5;
        let mut checked = 0;
        for l in 0..net.layers().len() {
            for k in (0..net.layers()[l].weights.len()).step_by(2) {
                let mut plus = net.clone();
                plus.layers_mut()[l].weights[k] += h;
                let mut minus = net.clone();
                minus.layers_mut()[l].weights[k] -= h;
                let (lp, _) = loss_and_grad(&plus, &batch, lambda, horizon, dim).unwrap();
                let (lm, _) = loss_and_grad(&minus, &batch, lambda, horizon, dim).unwrap();
                let fd = (lp - lm) / (2.0 * h);
                let got = grads.layers[l].weights[k];
                assert!(
                    (got - fd).abs() <= 1e-4 * (got.abs() + fd.abs()).max(1e-4),
                    "layer {l} weight {k}: {got} vs {fd}"
                );
                checked += 1;
            }
        }
        assert!(checked >= 50);
    }

    #[test]
    fn regularizer_gradient_absent_when_targets_at_mu() {
        // With λ=0 and targets exactly at μ the L1 term contributes nothing,
        // so losses with and without λ share the same value at that point.
        let horizon = 1;
        let dim = 2;
        let net = Mlp::zeros(&[2, raw_len(horizon, dim)]);
        // Zero net → μ = 0; pick targets at μ.
        let batch = vec![TrainSample {
            features: vec![0.3, 0.3],
            targets: vec![0.0, 0.0],
        }];
        let (l0, g0) = loss_and_grad(&net, &batch, 0.0, horizon, dim).unwrap();
        let (l1, g1) = loss_and_grad(&net, &batch, 1.0, horizon, dim).unwrap();
        assert!((l0 - l1).abs() <= 1e-12);
        // μ-slot gradients may differ only through the |·| subgradient at 0,
        // which is pinned to 0; the κ/ν slot gradients pick up no L1 term.
        for (a, b) in g0.layers[0].bias.iter().zip(g1.layers[0].bias.iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn empty_batch_is_an_error() {
        let net = Mlp::zeros(&[2, raw_len(1, 2)]);
        assert!(matches!(
            loss_and_grad(&net, &[], 0.0, 1, 2),
            Err(NetError::EmptyBatch)
        ));
    }
}
