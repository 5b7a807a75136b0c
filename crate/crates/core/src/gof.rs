//! Goodness of fit of simulated fluctuations against a bivariate normal law.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::NumericalError;
use crate::linalg::{det2, inverse2, Mat2};

pub const MIN_SAMPLES: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub m: usize,
    pub mean: [f64; 2],
    /// Standard errors of the mean, `sqrt(S_ii / m)`.
    pub std_err: [f64; 2],
    /// Sample covariance (divisor `m - 1`).
    pub sample_cov: Mat2,
    /// `(S_ij - sigma_ij) / sigma_ij`; `None` where `sigma_ij == 0`.
    pub cov_rel_err: [[Option<f64>; 2]; 2],
    /// Sum of squared Mahalanobis distances under `N(0, sigma)`.
    pub chi2_stat: f64,
    /// Degrees of freedom of `chi2_stat`, `2 m`.
    pub chi2_dof: usize,
    /// Two-sided p-value of `chi2_stat` against the chi-square law.
    pub p_value: f64,
}

/// Tests `fluctuations` against `N(0, sigma)`.
///
/// Each squared Mahalanobis distance `z^T sigma^-1 z` is chi-square with two
/// degrees of freedom, so their sum over `m` independent draws is chi-square
/// with `2m`. Both tails count as evidence against the model: too large
/// means excess spread, too small means the draws are tighter than `sigma`.
pub fn gof_test(fluctuations: &[[f64; 2]], sigma: Mat2) -> Result<GofReport, NumericalError> {
    let m = fluctuations.len();
    if m < MIN_SAMPLES {
        return Err(NumericalError::TooFewSamples {
            needed: MIN_SAMPLES,
            got: m,
        });
    }
    let det = det2(&sigma);
    if !(det > 1e-14 * sigma[0][0].abs() * sigma[1][1].abs()) || !(det > 0.0) {
        return Err(NumericalError::SingularCovariance(det));
    }
    let inv = inverse2(&sigma).ok_or(NumericalError::SingularCovariance(det))?;

    let mf = m as f64;
    let mut mean = [0.0; 2];
    for z in fluctuations {
        mean[0] += z[0];
        mean[1] += z[1];
    }
    mean = mean.map(|v| v / mf);
    let mut s = [[0.0; 2]; 2];
    for z in fluctuations {
        let d = [z[0] - mean[0], z[1] - mean[1]];
        for i in 0..2 {
            for j in 0..2 {
                s[i][j] += d[i] * d[j];
            }
        }
    }
    let sample_cov = s.map(|row| row.map(|v| v / (mf - 1.0)));
    let std_err = [
        (sample_cov[0][0] / mf).sqrt(),
        (sample_cov[1][1] / mf).sqrt(),
    ];
    let cov_rel_err = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            (sigma[i][j] != 0.0).then(|| (sample_cov[i][j] - sigma[i][j]) / sigma[i][j])
        })
    });

    let chi2_stat: f64 = fluctuations
        .iter()
        .map(|z| inv[0][0] * z[0] * z[0] + 2.0 * inv[0][1] * z[0] * z[1] + inv[1][1] * z[1] * z[1])
        .sum();
    let chi2_dof = 2 * m;
    let law = ChiSquared::new(chi2_dof as f64).expect("positive degrees of freedom");
    let lower = law.cdf(chi2_stat);
    let upper = law.sf(chi2_stat);
    let p_value = (2.0 * lower.min(upper)).min(1.0);

    Ok(GofReport {
        m,
        mean,
        std_err,
        sample_cov,
        cov_rel_err,
        chi2_stat,
        chi2_dof,
        p_value,
    })
}
