//! Levenberg–Marquardt least squares with a central-difference Jacobian.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmConfig {
    pub max_iterations: usize,
    /// Stop when an accepted step changes the cost by less than this
    /// fraction.
    pub rel_tolerance: f64,
    /// Relative finite-difference step (absolute floor of the same size).
    pub jacobian_step: f64,
    pub initial_lambda: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            max_iterations: 200,
            rel_tolerance: 1e-9,
            jacobian_step: 1e-5,
            initial_lambda: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// `Σ r²` at `params`.
    pub cost: f64,
    pub residuals: Vec<f64>,
    /// Jacobian at the solution (rows = residuals).
    pub jacobian: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LmOutcome {
    /// `(JᵀJ)⁻¹ · Σr²/(N − k)`: covariance scaled by the reduced χ².
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        let n = self.residuals.len();
        let k = self.params.len();
        if n <= k {
            return Err(Error::InsufficientData(format!("{n} residuals for {k} parameters")));
        }
        let jtj = self.jacobian.transpose() * &self.jacobian;
        let inv = jtj
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular JᵀJ at the optimum".into()))?;
        Ok(inv * (self.cost / (n - k) as f64))
    }
}

fn cost_of(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Central-difference Jacobian; a failing evaluation makes the derivative
/// one-sided, and both sides failing is an error.
pub fn numerical_jacobian<F>(f: &F, x: &[f64], r0: &[f64], step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = r0.len();
    let mut jac = DMatrix::zeros(n, x.len());
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let h = step * x[j].abs().max(1.0);
        probe[j] = x[j] + h;
        let plus = f(&probe).ok().filter(|r| r.len() == n);
        probe[j] = x[j] - h;
        let minus = f(&probe).ok().filter(|r| r.len() == n);
        probe[j] = x[j];
        for i in 0..n {
            jac[(i, j)] = match (&plus, &minus) {
                (Some(p), Some(m)) => (p[i] - m[i]) / (2.0 * h),
                (Some(p), None) => (p[i] - r0[i]) / h,
                (None, Some(m)) => (r0[i] - m[i]) / h,
                (None, None) => {
                    return Err(Error::Numerical(format!("residuals undefined around parameter {j}")))
                }
            };
        }
    }
    Ok(jac)
}

/// Minimizes `Σ f(x)²` from `x0`. Steps solve
/// `(JᵀJ + λ·diag(JᵀJ)) δ = −Jᵀr`; λ shrinks ×10 on success and grows ×10
/// on rejection. Trial points where `f` errors count as rejections.
pub fn levenberg_marquardt<F>(f: F, x0: &[f64], cfg: &LmConfig) -> Result<LmOutcome>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut x = x0.to_vec();
    let mut r = f(&x)?;
    let mut cost = cost_of(&r);
    if !cost.is_finite() {
        return Err(Error::Numerical("non-finite cost at the starting point".into()));
    }
    let mut lambda = cfg.initial_lambda;
    let mut converged = false;
    let mut iterations = 0;
    let k = x.len();
    while iterations < cfg.max_iterations {
        iterations += 1;
        let jac = numerical_jacobian(&f, &x, &r, cfg.jacobian_step)?;
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * DVector::from_column_slice(&r);
        if g.amax() == 0.0 {
            converged = true;
            break;
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for d in 0..k {
                let diag = jtj[(d, d)];
                a[(d, d)] += lambda * if diag > 0.0 { diag } else { 1.0 };
            }
            let Some(delta) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
            match f(&trial) {
                Ok(rt) if cost_of(&rt).is_finite() && cost_of(&rt) < cost => {
                    let new_cost = cost_of(&rt);
                    let rel = (cost - new_cost) / cost.max(f64::MIN_POSITIVE);
                    x = trial;
                    r = rt;
                    cost = new_cost;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    if rel < cfg.rel_tolerance {
                        converged = true;
                    }
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !accepted {
            // no descent direction at any damping: a (local) minimum
            converged = true;
        }
        if converged {
            break;
        }
    }
    let jacobian = numerical_jacobian(&f, &x, &r, cfg.jacobian_step)?;
    Ok(LmOutcome {
        params: x,
        cost,
        residuals: r,
        jacobian,
        iterations,
        converged,
    })
}
