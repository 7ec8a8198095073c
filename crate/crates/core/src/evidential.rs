//! Normal-Inverse-Wishart evidence, the induced multivariate Student-t
//! predictive, the evidential training loss, and the PIT transform.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use thiserror::Error;

use crate::numerics::{f_cdf, log_gamma, NumericsError, SpdMatrix};

/// Margin enforced on ν beyond the Wishart lower bound d - 1.
pub const NU_MARGIN: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum EvidentialError {
    #[error("kappa must be positive, got {0}")]
    NonPositiveKappa(f64),
    #[error("nu must exceed d - 1 + {NU_MARGIN}, got {nu} at dim {dim}")]
    NuBelowFloor { nu: f64, dim: usize },
    #[error("degrees of freedom must be positive, got {0}")]
    DegenerateEvidence(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Normal-Inverse-Wishart evidence emitted per waypoint by the regressor:
/// location `mu`, pseudo-observation count `kappa`, inverse-Wishart scale
/// `psi`, and inverse-Wishart degrees of freedom `nu`.
#[derive(Debug, Clone)]
pub struct NIWParams {
    mu: Vec<f64>,
    kappa: f64,
    psi: SpdMatrix,
    nu: f64,
}

impl NIWParams {
    pub fn new(mu: Vec<f64>, kappa: f64, psi: SpdMatrix, nu: f64) -> Result<Self, EvidentialError> {
        let dim = mu.len();
        if psi.dim() != dim {
            return Err(EvidentialError::DimensionMismatch {
                expected: dim,
                got: psi.dim(),
            });
        }
        if !(kappa > 0.0) {
            return Err(EvidentialError::NonPositiveKappa(kappa));
        }
        // Equality is the rounded closure of the softplus floor in the link;
        // dof stays >= NU_MARGIN there, so the predictive is still defined.
        if !(nu >= dim as f64 - 1.0 + NU_MARGIN) {
            return Err(EvidentialError::NuBelowFloor { nu, dim });
        }
        Ok(Self { mu, kappa, psi, nu })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn psi(&self) -> &SpdMatrix {
        &self.psi
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }
}

/// Multivariate Student-t over a waypoint: location, scale matrix, and
/// degrees of freedom.
#[derive(Debug, Clone)]
pub struct StudentTPredictive {
    loc: Vec<f64>,
    scale: SpdMatrix,
    dof: f64,
}

impl StudentTPredictive {
    pub fn new(loc: Vec<f64>, scale: SpdMatrix, dof: f64) -> Result<Self, EvidentialError> {
        if scale.dim() != loc.len() {
            return Err(EvidentialError::DimensionMismatch {
                expected: loc.len(),
                got: scale.dim(),
            });
        }
        if !(dof > 0.0) {
            return Err(EvidentialError::DegenerateEvidence(dof));
        }
        Ok(Self { loc, scale, dof })
    }

    pub fn dim(&self) -> usize {
        self.loc.len()
    }

    pub fn loc(&self) -> &[f64] {
        &self.loc
    }

    pub fn scale(&self) -> &SpdMatrix {
        &self.scale
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    /// Squared Mahalanobis distance `(y - loc)ᵀ·scale⁻¹·(y - loc)`.
    pub fn mahalanobis_sq(&self, y: &[f64]) -> Result<f64, EvidentialError> {
        let d = self.dim();
        if y.len() != d {
            return Err(EvidentialError::DimensionMismatch {
                expected: d,
                got: y.len(),
            });
        }
        let resid: Vec<f64> = y.iter().zip(&self.loc).map(|(a, b)| a - b).collect();
        let x = self.scale.solve(&resid)?;
        let m2: f64 = resid.iter().zip(&x).map(|(r, s)| r * s).sum();
        Ok(m2.max(0.0))
    }

    /// Log density of the multivariate Student-t at `y`.
    pub fn log_pdf(&self, y: &[f64]) -> Result<f64, EvidentialError> {
        let d = self.dim() as f64;
        let m2 = self.mahalanobis_sq(y)?;
        let dof = self.dof;
        let val = log_gamma(0.5 * (dof + d))?
            - log_gamma(0.5 * dof)?
            - 0.5 * d * (dof * std::f64::consts::PI).ln()
            - 0.5 * self.scale.log_det()
            - 0.5 * (dof + d) * (1.0 + m2 / dof).ln();
        Ok(val)
    }

    /// Probability integral transform of `y` through the Mahalanobis radius:
    /// `m²/d` follows an F(d, dof) law, so the result is uniform on [0, 1]
    /// under a perfectly calibrated predictive.
    pub fn pit(&self, y: &[f64]) -> Result<f64, EvidentialError> {
        let d = self.dim();
        let m2 = self.mahalanobis_sq(y)?;
        Ok(f_cdf(d as u32, self.dof, m2 / d as f64)?)
    }

    /// Draw one sample: `loc + sqrt(dof/χ²_dof) · L·z` with z standard normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let chi = ChiSquared::new(self.dof).expect("dof > 0 by construction");
        let w = (self.dof / chi.sample(rng)).sqrt();
        let z: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        let lz = self
            .scale
            .chol_matvec(&z)
            .expect("dimensions match by construction");
        self.loc
            .iter()
            .zip(&lz)
            .map(|(m, v)| m + w * v)
            .collect()
    }
}

/// Posterior predictive of NIW evidence: a Student-t with
/// `dof = ν - d + 1`, `loc = μ`, `scale = Ψ·(κ+1)/(κ·(ν-d+1))`.
pub fn predictive(niw: &NIWParams) -> Result<StudentTPredictive, EvidentialError> {
    let d = niw.dim() as f64;
    let dof = niw.nu - d + 1.0;
    if !(dof > 0.0) {
        return Err(EvidentialError::DegenerateEvidence(dof));
    }
    let factor = (niw.kappa + 1.0) / (niw.kappa * dof);
    let scale = niw.psi.scale_by(factor)?;
    StudentTPredictive::new(niw.mu.clone(), scale, dof)
}

/// Negative log likelihood of `y` under the NIW posterior predictive.
pub fn nll(niw: &NIWParams, y: &[f64]) -> Result<f64, EvidentialError> {
    Ok(-predictive(niw)?.log_pdf(y)?)
}

/// Evidential training loss: NLL plus an evidence-scaled L1 error term,
/// `λ·‖y - μ‖₁·(κ + ν)`, penalizing confident-but-wrong evidence.
pub fn evidential_loss(niw: &NIWParams, y: &[f64], lambda_reg: f64) -> Result<f64, EvidentialError> {
    let base = nll(niw, y)?;
    if lambda_reg == 0.0 {
        return Ok(base);
    }
    let l1: f64 = y
        .iter()
        .zip(niw.mu())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(base + lambda_reg * l1 * (niw.kappa() + niw.nu()))
}
