//! Seeded Adam training loop over the evidential loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{loss_and_grad, TrainSample};
use super::mlp::{Mlp, MlpGrads};
use super::NetError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub lambda_reg: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            lambda_reg: 0.01,
            seed: 0,
        }
    }
}

struct AdamState {
    m: MlpGrads,
    v: MlpGrads,
    step: u64,
}

impl AdamState {
    fn new(net: &Mlp) -> Self {
        Self {
            m: MlpGrads::zeros_like(net),
            v: MlpGrads::zeros_like(net),
            step: 0,
        }
    }

    fn update(&mut self, net: &mut Mlp, grads: &MlpGrads, cfg: &TrainConfig) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for (l, layer) in net.layers_mut().iter_mut().enumerate() {
            let gl = &grads.layers[l];
            let ml = &mut self.m.layers[l];
            let vl = &mut self.v.layers[l];
            for k in 0..layer.weights.len() {
                let g = gl.weights[k];
                ml.weights[k] = cfg.beta1 * ml.weights[k] + (1.0 - cfg.beta1) * g;
                vl.weights[k] = cfg.beta2 * vl.weights[k] + (1.0 - cfg.beta2) * g * g;
                layer.weights[k] -= cfg.learning_rate * (ml.weights[k] / bc1)
                    / ((vl.weights[k] / bc2).sqrt() + cfg.adam_eps);
            }
            for k in 0..layer.bias.len() {
                let g = gl.bias[k];
                ml.bias[k] = cfg.beta1 * ml.bias[k] + (1.0 - cfg.beta1) * g;
                vl.bias[k] = cfg.beta2 * vl.bias[k] + (1.0 - cfg.beta2) * g * g;
                layer.bias[k] -= cfg.learning_rate * (ml.bias[k] / bc1)
                    / ((vl.bias[k] / bc2).sqrt() + cfg.adam_eps);
            }
        }
    }
}

/// Train with Adam over seeded epoch shuffles; returns the trained network
/// and the per-epoch mean loss history. Deterministic in `cfg.seed`.
pub fn train(
    net: Mlp,
    data: &[TrainSample],
    cfg: &TrainConfig,
    horizon: usize,
    dim: usize,
) -> Result<(Mlp, Vec<f64>), NetError> {
    if data.is_empty() {
        return Err(NetError::EmptyBatch);
    }
    let mut net = net;
    let mut adam = AdamState::new(&net);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = Vec::with_capacity(cfg.epochs);
    let batch_size = cfg.batch_size.max(1);
    let mut indices: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.epochs {
        indices.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in indices.chunks(batch_size) {
            let batch: Vec<TrainSample> = chunk.iter().map(|&i| data[i].clone()).collect();
            let (loss, grads) =
                loss_and_grad(&net, &batch, cfg.lambda_reg, horizon, dim).map_err(|e| match e {
                    NetError::NonFiniteLoss { .. } => NetError::NonFiniteLoss {
                        epoch: Some(epoch),
                    },
                    other => other,
                })?;
            adam.update(&mut net, &grads, cfg);
            epoch_loss += loss;
            batches += 1;
        }
        history.push(epoch_loss / batches as f64);
    }
    Ok((net, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidential::{nll, predictive};
    use crate::net::link::{link, raw_len};

    fn single_sample() -> Vec<TrainSample> {
        vec![TrainSample {
            features: vec![0.5, -0.3],
            targets: vec![0.8, -0.2],
        }]
    }

    #[test]
    fn zero_epochs_leaves_net_unchanged() {
        let net = Mlp::new(&[2, 4, raw_len(1, 2)], 1);
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let (trained, history) = train(net.clone(), &single_sample(), &cfg, 1, 2).unwrap();
        assert_eq!(trained, net);
        assert!(history.is_empty());
    }

    #[test]
    fn same_seed_reproduces_weights() {
        let data = single_sample();
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 1,
            ..TrainConfig::default()
        };
        let (a, _) = train(Mlp::new(&[2, 4, raw_len(1, 2)], 1), &data, &cfg, 1, 2).unwrap();
        let (b, _) = train(Mlp::new(&[2, 4, raw_len(1, 2)], 1), &data, &cfg, 1, 2).unwrap();
        assert_eq!(a, b);
    }

    /// Direct Adam on one waypoint's raw slots, bypassing the network: the
    /// loss reachable by evidence optimization alone at the same budget.
    fn head_only_adam(target: &[f64], lambda: f64, steps: usize, lr: f64) -> f64 {
        use crate::net::loss::waypoint_loss;
        use crate::net::tape::{GradientTape, Var};
        let n = raw_len(1, 2);
        let mut x = vec![0.0f64; n];
        let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
        let mut last = f64::INFINITY;
        for t in 1..=steps {
            let tape = GradientTape::new();
            let vars: Vec<Var> = x.iter().map(|&val| tape.var(val)).collect();
            let loss = waypoint_loss(&vars, target, 2, lambda);
            last = loss.value();
            let g = loss.grad();
            for (k, var) in vars.iter().enumerate() {
                let gk = g.wrt(*var);
                m[k] = 0.9 * m[k] + 0.1 * gk;
                v[k] = 0.999 * v[k] + 0.001 * gk * gk;
                let mh = m[k] / (1.0 - 0.9f64.powi(t as i32));
                let vh = v[k] / (1.0 - 0.999f64.powi(t as i32));
                x[k] -= lr * mh / (vh.sqrt() + 1e-8);
            }
        }
        last
    }

    #[test]
    fn overfits_single_sample() {
        // The single-sample objective has no finite infimum (evidence can
        // concentrate without bound once mu hits the target), so the budget
        // is chosen inside the smooth descent phase and the final loss is
        // checked against a same-budget head-only optimization oracle.
        let data = single_sample();
        let cfg = TrainConfig {
            epochs: 500,
            batch_size: 1,
            learning_rate: 5e-4,
            lambda_reg: 0.01,
            ..TrainConfig::default()
        };
        let net = Mlp::new(&[2, 16, raw_len(1, 2)], 2);
        let (trained, history) = train(net, &data, &cfg, 1, 2).unwrap();

        let raw = trained.forward(&data[0].features).unwrap();
        let niw = &link(&raw, 1, 2).unwrap()[0];
        let t = predictive(niw).unwrap();
        assert!((t.loc()[0] - 0.8).abs() < 0.05);
        assert!((t.loc()[1] + 0.2).abs() < 0.05);

        let final_nll = nll(niw, &data[0].targets).unwrap();
        let oracle = head_only_adam(&data[0].targets, cfg.lambda_reg, 500, 5e-4);
        assert!(
            final_nll <= oracle + 1e-6,
            "net nll {final_nll} worse than head-only oracle {oracle}"
        );

        // Monotone descent after warmup, jitter bounded by 5% of the range.
        let min = history.iter().cloned().fold(f64::INFINITY, f64::min);
        let range = history[0] - min;
        for w in history.windows(2).skip(10) {
            assert!(
                w[1] <= w[0] + 0.05 * range,
                "loss jumped: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn recovers_known_gaussian_moments() {
        use crate::net::link::link;
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;
        use rand_distr::{Distribution, StandardNormal};

        // Fixed features, targets y ~ N(mu*, Sigma*): the trained head
        // should recover the location and match the covariance within a
        // factor 1.5 eigenvalue-wise.
        let mu_star = [0.6, -0.4];
        // Sigma* = L L^T with L = [[0.3, 0], [0.1, 0.2]].
        let l = [[0.3, 0.0], [0.1, 0.2]];
        let sigma_star = [
            l[0][0] * l[0][0],
            l[0][0] * l[1][0],
            l[0][0] * l[1][0],
            l[1][0] * l[1][0] + l[1][1] * l[1][1],
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data: Vec<TrainSample> = (0..2000)
            .map(|_| {
                let z0: f64 = StandardNormal.sample(&mut rng);
                let z1: f64 = StandardNormal.sample(&mut rng);
                TrainSample {
                    features: vec![1.0, -0.5, 0.25],
                    targets: vec![
                        mu_star[0] + l[0][0] * z0,
                        mu_star[1] + l[1][0] * z0 + l[1][1] * z1,
                    ],
                }
            })
            .collect();
        let cfg = TrainConfig {
            epochs: 40,
            batch_size: 64,
            learning_rate: 2e-3,
            lambda_reg: 0.01,
            ..TrainConfig::default()
        };
        let net = Mlp::new(&[3, 16, raw_len(1, 2)], 5);
        let (trained, _) = train(net, &data, &cfg, 1, 2).unwrap();

        let raw = trained.forward(&data[0].features).unwrap();
        let niw = &link(&raw, 1, 2).unwrap()[0];
        let t = predictive(niw).unwrap();
        assert!((t.loc()[0] - mu_star[0]).abs() < 0.05, "loc {:?}", t.loc());
        assert!((t.loc()[1] - mu_star[1]).abs() < 0.05, "loc {:?}", t.loc());

        // Predictive covariance = scale * dof / (dof - 2).
        assert!(t.dof() > 2.0, "dof {}", t.dof());
        let f = t.dof() / (t.dof() - 2.0);
        let cov: Vec<f64> = t.scale().reconstruct().iter().map(|v| v * f).collect();
        let eig = |m: &[f64]| -> (f64, f64) {
            let tr = m[0] + m[3];
            let det = m[0] * m[3] - m[1] * m[2];
            let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
            (tr / 2.0 - disc, tr / 2.0 + disc)
        };
        let (got_lo, got_hi) = eig(&cov);
        let (want_lo, want_hi) = eig(&sigma_star);
        for (got, want) in [(got_lo, want_lo), (got_hi, want_hi)] {
            let ratio = got / want;
            assert!(
                (1.0 / 1.5..=1.5).contains(&ratio),
                "eigenvalue ratio {ratio} (got {got}, want {want})"
            );
        }
    }
}
