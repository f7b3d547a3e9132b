use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::par::{map_indexed, Execution};
use crate::rng::derive_rng;

use super::TheoryError;

/// Largest `K` the dense oracle accepts.
pub const ORACLE_MAX_K: usize = 4096;

/// `Z_i = Y + U + V_i` with `Y ~ N(0,1)`, shared `U ~ N(0, sigma_c2)` and
/// per-branch `V_i ~ N(0, sigma_u2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianRedundancyModel {
    pub k: usize,
    pub sigma_u2: f64,
    pub sigma_c2: f64,
}

impl GaussianRedundancyModel {
    pub fn new(k: usize, sigma_u2: f64, sigma_c2: f64) -> Result<Self, TheoryError> {
        let m = Self { k, sigma_u2, sigma_c2 };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), TheoryError> {
        if self.k == 0 {
            return Err(TheoryError::InvalidModel("K must be positive".into()));
        }
        if !(self.sigma_u2.is_finite() && self.sigma_u2 > 0.0) {
            return Err(TheoryError::InvalidModel("sigma_u2 must be positive".into()));
        }
        if !(self.sigma_c2.is_finite() && self.sigma_c2 >= 0.0) {
            return Err(TheoryError::InvalidModel("sigma_c2 must be nonnegative".into()));
        }
        Ok(())
    }

    /// Marginal noise variance of one branch.
    pub fn sigma2(&self) -> f64 {
        self.sigma_u2 + self.sigma_c2
    }

    /// Pairwise noise correlation.
    pub fn rho(&self) -> f64 {
        self.sigma_c2 / self.sigma2()
    }

    /// Noise covariance `sigma_u2 I + sigma_c2 11^T`.
    pub fn covariance(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.k, self.k, |i, j| {
            self.sigma_c2 + if i == j { self.sigma_u2 } else { 0.0 }
        })
    }

    /// `Sigma^{-1} 1` by Cholesky solve.
    pub fn precision_ones(&self) -> Result<DVector<f64>, TheoryError> {
        if self.k > ORACLE_MAX_K {
            return Err(TheoryError::InvalidModel(format!(
                "dense oracle limited to K <= {ORACLE_MAX_K}"
            )));
        }
        let chol = self
            .covariance()
            .cholesky()
            .ok_or_else(|| TheoryError::InvalidModel("covariance not positive definite".into()))?;
        Ok(chol.solve(&DVector::from_element(self.k, 1.0)))
    }
}

/// `I(Y; Z_{1:K}) = 1/2 ln(1 + K / (sigma_u2 + K sigma_c2))`.
pub fn gaussian_mi_closed_form(m: &GaussianRedundancyModel) -> f64 {
    let k = m.k as f64;
    0.5 * (k / (m.sigma_u2 + k * m.sigma_c2)).ln_1p()
}

/// Same quantity through `K_eff`: `1/2 ln(1 + K_eff / sigma^2)`.
pub fn gaussian_mi_via_effective_width(m: &GaussianRedundancyModel) -> f64 {
    let keff = effective_width(m.k as f64, m.rho()).expect("rho of a valid model is in [0,1]");
    0.5 * (keff / m.sigma2()).ln_1p()
}

/// Oracle: build the covariance, solve numerically, `1/2 ln(1 + 1^T Sigma^{-1} 1)`.
pub fn gaussian_mi_oracle(m: &GaussianRedundancyModel) -> Result<f64, TheoryError> {
    m.validate()?;
    let w = m.precision_ones()?;
    Ok(0.5 * w.sum().ln_1p())
}

/// `K / (1 + (K-1) rho)`.
pub fn effective_width(k: f64, rho: f64) -> Result<f64, TheoryError> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(TheoryError::RhoOutOfRange(rho));
    }
    if k.is_nan() || k < 1.0 {
        return Err(TheoryError::InvalidModel("K must be at least 1".into()));
    }
    Ok(k / (1.0 + (k - 1.0) * rho))
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

pub const MC_CHUNK: usize = 4096;

/// Sample-average of `ln p(y|z) - ln p(y)` using the exact Gaussian posterior
/// `y | z ~ N(w^T z / (1+s), 1/(1+s))`, `w = Sigma^{-1} 1`, `s = 1^T w`.
///
/// Samples are drawn in fixed-size chunks, each from its own derived stream,
/// and summed in chunk order, so the result does not depend on `exec`.
pub fn gaussian_mi_monte_carlo(
    m: &GaussianRedundancyModel,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<McEstimate, TheoryError> {
    m.validate()?;
    if samples < 2 {
        return Err(TheoryError::InvalidModel("need at least two samples".into()));
    }
    let w = m.precision_ones()?;
    let s = w.sum();
    let half_log = 0.5 * s.ln_1p();
    let chunks = samples.div_ceil(MC_CHUNK);
    let noise_c = Normal::new(0.0, m.sigma_c2.sqrt()).expect("finite std");
    let noise_u = Normal::new(0.0, m.sigma_u2.sqrt()).expect("finite std");
    let partial = map_indexed(exec, chunks, |c| {
        let mut rng = derive_rng(seed, &format!("gaussian-mc/{c}"));
        let n = MC_CHUNK.min(samples - c * MC_CHUNK);
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..n {
            let y: f64 = rand_distr::StandardNormal.sample(&mut rng);
            let u = noise_c.sample(&mut rng);
            let wz: f64 = w.iter().map(|wi| wi * (y + u + noise_u.sample(&mut rng))).sum();
            let mu = wz / (1.0 + s);
            let v = half_log - 0.5 * (1.0 + s) * (y - mu).powi(2) + 0.5 * y * y;
            sum += v;
            sum_sq += v * v;
        }
        (sum, sum_sq)
    });
    let (sum, sum_sq) = partial.into_iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(McEstimate {
        mean,
        std_error: (var / n).sqrt(),
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeffPoint {
    pub k: usize,
    pub rho: f64,
    pub k_eff: f64,
}

pub fn keff_curve(k_max: usize, rho_grid: &[f64]) -> Result<Vec<KeffPoint>, TheoryError> {
    let mut out = Vec::with_capacity(k_max * rho_grid.len());
    for &rho in rho_grid {
        for k in 1..=k_max {
            out.push(KeffPoint {
                k,
                rho,
                k_eff: effective_width(k as f64, rho)?,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiPoint {
    pub k: usize,
    pub sigma_u2: f64,
    pub sigma_c2: f64,
    pub mi: f64,
}

pub fn mi_curve(k_max: usize, sigma_u2: f64, sigma_c2: f64) -> Result<Vec<MiPoint>, TheoryError> {
    (1..=k_max)
        .map(|k| {
            let m = GaussianRedundancyModel::new(k, sigma_u2, sigma_c2)?;
            Ok(MiPoint {
                k,
                sigma_u2,
                sigma_c2,
                mi: gaussian_mi_closed_form(&m),
            })
        })
        .collect()
}
