//! Gaussian fluctuations of the final ignorant fractions.
//!
//! The time-changed chain is density dependent with drift `F` and diffusion
//! `G`. Linearising around the fluid limit, the scaled deviations converge to
//! a Gaussian process `U` with
//!
//! ```text
//! Cov(U(t)) = int_0^t phi(t,s) G(v(s)) phi(t,s)^T ds,
//! ```
//!
//! where `phi` solves `d/dt phi(t,s) = dF phi(t,s)`, `phi(s,s) = I`. Stopping
//! at the first zero of `y1` projects `U(tau_inf)` onto the ignorant
//! coordinates: `(U_x1 + k1 U_y1, U_x2 + k2 U_y1)` with
//! `k1 = lambda x1_inf / y1'(tau_inf)` and `k2 = alpha x2_inf / y1'(tau_inf)`.

use serde::{Deserialize, Serialize};

use crate::error::{NumericalError, Result};
use crate::limit::{AsymptoticSolution, DeterministicPath};
use crate::linalg::{sandwich3, sym_eigenvalues2, Mat2, Mat3};
use crate::model::{self, beta, Density, InitialFractions, ModelParams, TransitionKind};
use crate::quadrature::{integrate, QuadOptions};

/// Drift `F(v) = sum_l l beta_l(v)`.
pub fn drift(params: ModelParams, v: Density) -> [f64; 3] {
    let ModelParams {
        theta,
        lambda,
        alpha,
        p,
    } = params;
    let [x1, x2, _] = v;
    [
        -lambda * x1,
        -alpha * x2,
        lambda * ((1.0 + p) * x1 - theta) - alpha * (1.0 - theta - x2),
    ]
}

/// Jacobian of the drift; constant in the state.
pub fn drift_jacobian(params: ModelParams) -> Mat3 {
    let ModelParams {
        lambda, alpha, p, ..
    } = params;
    [
        [-lambda, 0.0, 0.0],
        [0.0, -alpha, 0.0],
        [lambda * (1.0 + p), alpha, 0.0],
    ]
}

/// Diffusion matrix `G(v) = sum_l l l^T beta_l(v)`.
pub fn diffusion(params: ModelParams, v: Density) -> Mat3 {
    let b = beta(params, v);
    let mut g = [[0.0; 3]; 3];
    for kind in TransitionKind::ALL {
        let l = kind.increment().map(|c| c as f64);
        let w = b[kind.index()];
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] += l[i] * l[j] * w;
            }
        }
    }
    g
}

/// Reference closed form of `G33`,
/// `lambda (p-1) x1 - alpha x2 + (lambda - alpha) theta - alpha`. Differs
/// from the defining sum by `-2 alpha`; kept for the discrepancy report.
pub fn reference_g33(params: ModelParams, v: Density) -> f64 {
    let ModelParams {
        theta,
        lambda,
        alpha,
        p,
    } = params;
    lambda * (p - 1.0) * v[0] - alpha * v[1] + (lambda - alpha) * theta - alpha
}

/// Fundamental matrix `phi(t, s)` of the linearised flow, `t >= s`.
pub fn fundamental_matrix(params: ModelParams, t: f64, s: f64) -> Result<Mat3, NumericalError> {
    if !(t >= s) {
        return Err(NumericalError::TimeOrder { t, s });
    }
    let e1 = (-params.lambda * (t - s)).exp();
    let e2 = (-params.alpha * (t - s)).exp();
    Ok([
        [e1, 0.0, 0.0],
        [0.0, e2, 0.0],
        [(1.0 + params.p) * (1.0 - e1), 1.0 - e2, 1.0],
    ])
}

const UPPER: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

fn from_upper(u: [f64; 6]) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for (k, &(i, j)) in UPPER.iter().enumerate() {
        c[i][j] = u[k];
        c[j][i] = u[k];
    }
    c
}

/// `Cov(U(t), U(t))` by adaptive quadrature of `phi G phi^T` along the fluid
/// limit, absolute tolerance 1e-10 per entry.
pub fn covariance_quadrature(
    params: ModelParams,
    init: InitialFractions,
    t: f64,
) -> Result<Mat3, NumericalError> {
    if !(t >= 0.0) {
        return Err(NumericalError::TimeOrder { t, s: 0.0 });
    }
    let path = DeterministicPath::new(params, init);
    let integrand = |s: f64| -> [f64; 6] {
        // s in [0, t], so the ordering check cannot fail
        let phi = fundamental_matrix(params, t, s.min(t)).expect("s <= t");
        let m = sandwich3(&phi, &diffusion(params, path.eval(s)));
        UPPER.map(|(i, j)| m[i][j])
    };
    let q = integrate(integrand, 0.0, t, QuadOptions::default())?;
    Ok(from_upper(q.value))
}

/// Reference closed forms for the entries of `Cov(U(t), U(t))`:
///
/// ```text
/// c11 = (x1/x10)(x10 - x1)
/// c13 = x1 [lambda t + (1+p)(1 - x1/x10)]
/// c22 = (x2/x20)(x20 - x2)
/// c23 = x2 (alpha t - 1 + e^{-alpha t})
/// c33 = x2 (1 + 2 alpha - e^{-alpha t}) - p(1+p) x1 (e^{lambda t} - lambda t - 1)
///       + (p-1)(x10 - x1) + t [(lambda - alpha) theta + alpha]
/// ```
///
/// with `c12 = 0`. `c13` and `c33` do not match the integral; see
/// [`ClosedFormDeviation`] for how they compare with the integral.
pub fn covariance_closed_form(params: ModelParams, init: InitialFractions, t: f64) -> Mat3 {
    let ModelParams {
        theta,
        lambda,
        alpha,
        p,
    } = params;
    let path = DeterministicPath::new(params, init);
    let (x1, x2) = (path.x1(t), path.x2(t));
    let (x10, x20) = (init.x10, init.x20);
    let c11 = (x1 / x10) * (x10 - x1);
    let c13 = x1 * (lambda * t + (1.0 + p) * (1.0 - x1 / x10));
    let c22 = (x2 / x20) * (x20 - x2);
    let c23 = x2 * (alpha * t - 1.0 + (-alpha * t).exp());
    let c33 = x2 * (1.0 + 2.0 * alpha - (-alpha * t).exp())
        - p * (1.0 + p) * x1 * ((lambda * t).exp() - lambda * t - 1.0)
        + (p - 1.0) * (x10 - x1)
        + t * ((lambda - alpha) * theta + alpha);
    from_upper([c11, 0.0, c13, c22, c23, c33])
}

/// Entrywise `closed_form - quadrature`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormDeviation {
    pub c11: f64,
    pub c13: f64,
    pub c22: f64,
    pub c23: f64,
    pub c33: f64,
}

/// Tolerance for an entry of the closed form to count as agreeing.
pub const CLOSED_FORM_TOL: f64 = 1e-8;

impl ClosedFormDeviation {
    pub fn between(closed: &Mat3, quad: &Mat3) -> Self {
        let d = |i: usize, j: usize| closed[i][j] - quad[i][j];
        Self {
            c11: d(0, 0),
            c13: d(0, 2),
            c22: d(1, 1),
            c23: d(1, 2),
            c33: d(2, 2),
        }
    }

    pub fn entries(&self) -> [(&'static str, f64); 5] {
        [
            ("c11", self.c11),
            ("c13", self.c13),
            ("c22", self.c22),
            ("c23", self.c23),
            ("c33", self.c33),
        ]
    }

    /// Names of the entries off by more than [`CLOSED_FORM_TOL`].
    pub fn mismatches(&self) -> Vec<&'static str> {
        self.entries()
            .into_iter()
            .filter(|(_, d)| !(d.abs() <= CLOSED_FORM_TOL))
            .map(|(n, _)| n)
            .collect()
    }
}

/// Quadrature and reference closed form at `t`, with their deviation.
pub fn closed_form_report(
    params: ModelParams,
    init: InitialFractions,
    t: f64,
) -> Result<(Mat3, Mat3, ClosedFormDeviation), NumericalError> {
    let quad = covariance_quadrature(params, init, t)?;
    let closed = covariance_closed_form(params, init, t);
    let dev = ClosedFormDeviation::between(&closed, &quad);
    Ok((quad, closed, dev))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceMethod {
    Quadrature,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluctuationResult {
    pub tau_inf: f64,
    pub c: Mat3,
    pub k1: f64,
    pub k2: f64,
    pub sigma: Mat2,
    pub method: CovarianceMethod,
    pub degenerate: bool,
    pub closed_form_deviation: Option<ClosedFormDeviation>,
    /// `reference G33 - G33` along the limit path at `tau_inf`.
    pub g33_discrepancy: f64,
}

/// Covariance of `(U_x1 + k1 U_y1, U_x2 + k2 U_y1)` given `Cov(U) = c`.
pub fn project_covariance(c: &Mat3, k1: f64, k2: f64) -> Mat2 {
    let s11 = c[0][0] + k1 * k1 * c[2][2] + 2.0 * k1 * c[0][2];
    let s22 = c[1][1] + k2 * k2 * c[2][2] + 2.0 * k2 * c[1][2];
    let s12 = c[0][1] + k2 * c[0][2] + k1 * c[1][2] + k1 * k2 * c[2][2];
    [[s11, s12], [s12, s22]]
}

/// Limiting covariance of the scaled final ignorant fractions, with
/// `Cov(U(tau_inf))` from quadrature.
pub fn sigma(
    params: ModelParams,
    init: InitialFractions,
    asym: &AsymptoticSolution,
) -> Result<FluctuationResult> {
    fluctuations(params, init, asym, CovarianceMethod::Quadrature)
}

/// As [`sigma`], choosing where `Cov(U(tau_inf))` comes from. The closed-form
/// deviation report is attached in both cases.
pub fn fluctuations(
    params: ModelParams,
    init: InitialFractions,
    asym: &AsymptoticSolution,
    method: CovarianceMethod,
) -> Result<FluctuationResult> {
    let (params, init) = model::validate(params, init)?;
    let tau = asym.tau_inf;
    let v_tau = DeterministicPath::new(params, init).eval(tau);
    let g33_discrepancy = reference_g33(params, v_tau) - diffusion(params, v_tau)[2][2];
    if asym.degenerate || !(asym.y1_prime_at_tau < 0.0) {
        return Ok(FluctuationResult {
            tau_inf: tau,
            c: [[0.0; 3]; 3],
            k1: 0.0,
            k2: 0.0,
            sigma: [[0.0; 2]; 2],
            method,
            degenerate: true,
            closed_form_deviation: None,
            g33_discrepancy,
        });
    }
    let (quad, closed, dev) = closed_form_report(params, init, tau)?;
    let c = match method {
        CovarianceMethod::Quadrature => quad,
        CovarianceMethod::ClosedForm => closed,
    };
    let k1 = params.lambda * asym.x1_inf / asym.y1_prime_at_tau;
    let k2 = params.alpha * asym.x2_inf / asym.y1_prime_at_tau;
    Ok(FluctuationResult {
        tau_inf: tau,
        c,
        k1,
        k2,
        sigma: project_covariance(&c, k1, k2),
        method,
        degenerate: false,
        closed_form_deviation: Some(dev),
        g33_discrepancy,
    })
}

/// Smallest eigenvalue of `sigma`.
pub fn min_eigenvalue(sigma: &Mat2) -> f64 {
    sym_eigenvalues2(sigma)[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit::solve_asymptotics;
    use crate::linalg::{max_abs_diff3, mul3, sym_eigenvalues3, IDENTITY3};

    fn reference() -> (ModelParams, InitialFractions) {
        (
            ModelParams::new(0.5, 1.0, 0.5, 0.8),
            InitialFractions::with_z0(0.45, 0.5, 0.05, 0.0),
        )
    }

    #[test]
    fn drift_examples() {
        let params = ModelParams::new(0.5, 1.0, 1.0, 1.0);
        assert_eq!(drift(params, [0.25, 0.25, 0.1]), [-0.25, -0.25, -0.25]);
        let params = ModelParams::new(0.3, 2.0, 0.7, 0.4);
        let d = drift(params, [0.0, 0.0, 0.2]);
        assert_eq!(d[0], 0.0);
        assert_eq!(d[1], 0.0);
        assert!((d[2] - (-2.0 * 0.3 - 0.7 * 0.7)).abs() < 1e-15);
    }

    #[test]
    fn drift_is_sum_of_increments_times_beta() {
        let (params, _) = reference();
        for k in 0..100 {
            let v = [
                0.5 * (k as f64 / 100.0),
                0.5 * ((k * 37 % 100) as f64 / 100.0),
                0.1,
            ];
            let b = beta(params, v);
            let mut sum = [0.0; 3];
            for kind in TransitionKind::ALL {
                let l = kind.increment();
                for i in 0..3 {
                    sum[i] += l[i] as f64 * b[kind.index()];
                }
            }
            let d = drift(params, v);
            for i in 0..3 {
                assert!((sum[i] - d[i]).abs() < 1e-15, "{v:?}: {sum:?} vs {d:?}");
            }
        }
    }

    #[test]
    fn jacobian_matches_known_matrix_and_finite_differences() {
        let params = ModelParams::new(0.5, 1.0, 1.0, 1.0);
        assert_eq!(
            drift_jacobian(params),
            [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [2.0, 1.0, 0.0]]
        );
        let (params, _) = reference();
        let j = drift_jacobian(params);
        let v = [0.2, 0.3, 0.05];
        let h = 1e-6;
        for col in 0..3 {
            let mut vp = v;
            let mut vm = v;
            vp[col] += h;
            vm[col] -= h;
            let (fp, fm) = (drift(params, vp), drift(params, vm));
            for row in 0..3 {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                assert!((fd - j[row][col]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn diffusion_examples() {
        let params = ModelParams::new(0.5, 1.0, 1.0, 1.0);
        let g = diffusion(params, [0.25, 0.25, 0.1]);
        assert_eq!(g[0][0], 0.25);
        assert_eq!(g[1][1], 0.25);
        assert_eq!(g[0][2], -0.25);
        assert_eq!(g[2][0], -0.25);
        assert_eq!(g[0][1], 0.0);
        assert_eq!(g[1][2], 0.0);
        assert_eq!(g[2][2], 0.75);
        let params = ModelParams::new(0.3, 2.0, 0.7, 0.4);
        let g = diffusion(params, [0.0, 0.0, 0.1]);
        assert_eq!(g[0][0], 0.0);
        assert_eq!(g[1][1], 0.0);
        assert!((g[2][2] - (2.0 * 0.3 + 0.7 * 0.7)).abs() < 1e-15);
    }

    #[test]
    fn reference_g33_is_off_by_two_alpha() {
        let (params, _) = reference();
        let v = [0.2, 0.3, 0.0];
        let gap = reference_g33(params, v) - diffusion(params, v)[2][2];
        assert!((gap + 2.0 * params.alpha).abs() < 1e-15);
    }

    #[test]
    fn fundamental_matrix_properties() {
        let (params, _) = reference();
        assert_eq!(fundamental_matrix(params, 1.3, 1.3).unwrap(), IDENTITY3);
        let a = fundamental_matrix(params, 2.0, 1.2).unwrap();
        let b = fundamental_matrix(params, 1.2, 0.3).unwrap();
        let c = fundamental_matrix(params, 2.0, 0.3).unwrap();
        assert!(max_abs_diff3(&mul3(&a, &b), &c) < 1e-12);
        assert!(fundamental_matrix(params, 0.2, 0.3).is_err());

        // d/dt phi = dF phi
        let h = 1e-6;
        let (t, s) = (1.1, 0.4);
        let jp = fundamental_matrix(params, t + h, s).unwrap();
        let jm = fundamental_matrix(params, t - h, s).unwrap();
        let rhs = mul3(
            &drift_jacobian(params),
            &fundamental_matrix(params, t, s).unwrap(),
        );
        for i in 0..3 {
            for j in 0..3 {
                let fd = (jp[i][j] - jm[i][j]) / (2.0 * h);
                assert!((fd - rhs[i][j]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn covariance_vanishes_at_zero() {
        let (params, init) = reference();
        assert_eq!(
            covariance_quadrature(params, init, 0.0).unwrap(),
            [[0.0; 3]; 3]
        );
        let c = covariance_closed_form(params, init, 0.0);
        for (i, j) in [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2)] {
            assert!(c[i][j].abs() < 1e-15, "({i},{j})");
        }
        // the reference c33 starts at 2 alpha x20 instead of zero
        assert!((c[2][2] - 2.0 * params.alpha * init.x20).abs() < 1e-15);
    }

    #[test]
    fn quadrature_matches_verified_closed_forms() {
        let (params, init) = reference();
        let t = 0.8;
        let q = covariance_quadrature(params, init, t).unwrap();
        let closed = covariance_closed_form(params, init, t);
        for (i, j) in [(0, 0), (1, 1), (1, 2)] {
            assert!((q[i][j] - closed[i][j]).abs() < 1e-8, "({i},{j})");
        }
        assert_eq!(q[0][1], 0.0);
        assert_eq!(q[1][0], 0.0);
    }

    #[test]
    fn covariance_is_psd_with_psd_increments() {
        // Cov(U(t2)) = phi(t2,t1) Cov(U(t1)) phi(t2,t1)^T + int_{t1}^{t2} phi G phi^T,
        // and the second term is PSD. Cov(U(t)) itself is not monotone: c11 peaks.
        let (params, init) = reference();
        let dt = 0.15;
        let mut prev = [[0.0; 3]; 3];
        for k in 1..=20 {
            let t = dt * k as f64;
            let c = covariance_quadrature(params, init, t).unwrap();
            assert!(sym_eigenvalues3(&c)[0] >= -1e-10);
            let carried = sandwich3(&fundamental_matrix(params, t, t - dt).unwrap(), &prev);
            let mut inc = c;
            for i in 0..3 {
                for j in 0..3 {
                    inc[i][j] -= carried[i][j];
                }
            }
            assert!(sym_eigenvalues3(&inc)[0] >= -1e-9, "step {k}: {inc:?}");
            prev = c;
        }
    }

    #[test]
    fn sigma_reference_case() {
        let (params, init) = reference();
        let asym = solve_asymptotics(params, init).unwrap();
        let r = sigma(params, init, &asym).unwrap();
        assert!(!r.degenerate);
        assert_eq!(r.method, CovarianceMethod::Quadrature);
        assert!(r.sigma[0][0] > 0.0);
        assert_eq!(r.sigma[0][1], r.sigma[1][0]);
        assert!(min_eigenvalue(&r.sigma) >= -1e-10);
        assert!(r.k1 < 0.0 && r.k2 < 0.0);
        assert!((r.g33_discrepancy + 2.0 * params.alpha).abs() < 1e-12);
    }

    #[test]
    fn sigma_degenerate_is_zero() {
        let params = ModelParams::new(0.5, 1.0, 1.0, 0.0);
        let init = InitialFractions::new(0.4, 0.5, 0.0);
        let asym = solve_asymptotics(params, init).unwrap();
        let r = sigma(params, init, &asym).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.sigma, [[0.0; 2]; 2]);
    }
}
