//! Damped Gauss–Newton (Levenberg–Marquardt) least squares with a
//! central-difference Jacobian. Shared by the circuit, coupling and
//! estimator fits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Convergence threshold on the relative change of the residual sum of squares.
    pub tol: f64,
    pub lambda0: f64,
    /// When true the residuals are already divided by their standard
    /// deviations and the covariance is not rescaled by the reduced χ².
    pub absolute_sigma: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_iter: 500, tol: 1e-10, lambda0: 1e-3, absolute_sigma: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Vec<f64>,
    pub sigma: Vec<f64>,
    #[serde(skip)]
    pub covariance: Option<DMatrix<f64>>,
    pub ssr: f64,
    pub iterations: usize,
}

fn jacobian<F>(f: &F, p: &[f64], r0: &DVector<f64>) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let m = r0.len();
    let n = p.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut q = p.to_vec();
    for j in 0..n {
        let h = 1e-6 * p[j].abs().max(1e-6);
        q[j] = p[j] + h;
        let rp = f(&q);
        q[j] = p[j] - h;
        let rm = f(&q);
        q[j] = p[j];
        for i in 0..m {
            jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
    jac
}

fn ssr_of(r: &DVector<f64>) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Minimizes Σ rᵢ(p)² starting from `p0`.
pub fn levenberg_marquardt<F>(f: F, p0: &[f64], opts: FitOptions) -> Result<FitResult>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = p0.len();
    let mut p = p0.to_vec();
    let mut r = DVector::from_vec(f(&p));
    let m = r.len();
    if m < n {
        return Err(Error::FitDiverged(format!("{m} residuals for {n} parameters")));
    }
    let mut ssr = ssr_of(&r);
    if !ssr.is_finite() {
        return Err(Error::FitDiverged("non-finite residual at the initial guess".into()));
    }
    let mut lambda = opts.lambda0;
    let mut iterations = 0;
    let mut converged = false;
    let mut jac = jacobian(&f, &p, &r);
    while iterations < opts.max_iter {
        iterations += 1;
        if ssr < 1e-300 {
            converged = true;
            break;
        }
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        let mut accepted = false;
        while lambda < 1e18 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let step = match a.clone().cholesky() {
                Some(c) => c.solve(&(-&grad)),
                None => match a.lu().solve(&(-&grad)) {
                    Some(s) => s,
                    None => {
                        lambda *= 10.0;
                        continue;
                    }
                },
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rt = DVector::from_vec(f(&trial));
            let st = ssr_of(&rt);
            if st.is_finite() && st <= ssr {
                let rel = (ssr - st) / ssr.max(1e-300);
                let small_step = step
                    .iter()
                    .zip(trial.iter())
                    .all(|(d, x)| d.abs() <= 1e-13 * x.abs().max(1e-12));
                p = trial;
                r = rt;
                ssr = st;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if rel < opts.tol || small_step {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // No downhill step exists: we are at a (numerical) minimum if the
            // gradient is negligible relative to the residual scale.
            let gnorm = grad.norm();
            let scale = (ssr.sqrt() * jac.norm()).max(1e-300);
            if gnorm <= 1e-6 * scale {
                converged = true;
            }
            break;
        }
        if converged {
            break;
        }
        jac = jacobian(&f, &p, &r);
    }
    if !converged {
        return Err(Error::FitDiverged(format!(
            "residual did not settle after {iterations} iterations (ssr = {ssr:e})"
        )));
    }
    let jac = jacobian(&f, &p, &r);
    let jtj = jac.transpose() * &jac;
    let dof = (m as f64 - n as f64).max(1.0);
    let s2 = if opts.absolute_sigma { 1.0 } else { ssr / dof };
    let covariance = jtj.clone().try_inverse().map(|c| c * s2);
    let sigma = match &covariance {
        Some(c) => (0..n).map(|i| c[(i, i)].abs().sqrt()).collect(),
        None => vec![f64::NAN; n],
    };
    Ok(FitResult { params: p, sigma, covariance, ssr, iterations })
}

/// Ordinary least-squares line y = a + b·x; returns ((a, b), (σa, σb)).
pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<((f64, f64), (f64, f64))> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::InvalidInput("linear regression needs ≥ 2 paired samples".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("degenerate abscissa".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let res: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - a - b * xi).powi(2)).sum();
    let s2 = if n > 2 { res / (nf - 2.0) } else { 0.0 };
    let sb = (s2 / sxx).sqrt();
    let sa = (s2 * (1.0 / nf + mx * mx / sxx)).sqrt();
    Ok(((a, b), (sa, sb)))
}
