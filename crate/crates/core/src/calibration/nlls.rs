//! Levenberg–Marquardt least squares with a central-difference Jacobian.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Solver settings. The defaults are the ones every fit in this crate uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NllsOptions {
    pub max_iter: usize,
    /// Relative cost decrease below which an accepted step ends the fit.
    pub ftol: f64,
    /// Step norm below which an accepted step ends the fit.
    pub xtol: f64,
    pub lambda0: f64,
    pub lambda_max: f64,
}

impl Default for NllsOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            ftol: 1e-10,
            xtol: 1e-12,
            lambda0: 1e-3,
            lambda_max: 1e16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Vec<f64>,
    pub residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
    pub initial_cost: f64,
    /// Sum of squared residuals at `params`.
    pub cost: f64,
}

/// Inclusive box constraint for one parameter.
pub type Bound = (f64, f64);

fn project(p: &mut [f64], bounds: Option<&[Bound]>) {
    if let Some(b) = bounds {
        for (v, &(lo, hi)) in p.iter_mut().zip(b) {
            *v = v.clamp(lo, hi);
        }
    }
}

fn residuals<X, F>(f: &F, p: &[f64], x: &[X], y: &[f64], out: &mut DVector<f64>)
where
    F: Fn(&[f64], &X) -> f64,
{
    for (i, (xi, yi)) in x.iter().zip(y).enumerate() {
        out[i] = f(p, xi) - yi;
    }
}

fn sse(r: &DVector<f64>) -> f64 {
    let c = r.norm_squared();
    if c.is_finite() {
        c
    } else {
        f64::INFINITY
    }
}

/// Fits `model_fn(params, x)` to `y_data` by damped Gauss–Newton steps.
///
/// Parameters are kept inside `bounds` by projection. The returned cost
/// never exceeds the cost at the (projected) initial point.
pub fn nlls_fit<X, F>(
    model_fn: F,
    x_data: &[X],
    y_data: &[f64],
    initial: &[f64],
    bounds: Option<&[Bound]>,
) -> Result<FitResult>
where
    F: Fn(&[f64], &X) -> f64,
{
    nlls_fit_with(model_fn, x_data, y_data, initial, bounds, &NllsOptions::default())
}

pub fn nlls_fit_with<X, F>(
    model_fn: F,
    x_data: &[X],
    y_data: &[f64],
    initial: &[f64],
    bounds: Option<&[Bound]>,
    opts: &NllsOptions,
) -> Result<FitResult>
where
    F: Fn(&[f64], &X) -> f64,
{
    let m = x_data.len();
    let n = initial.len();
    if y_data.len() != m {
        return Err(Error::DimensionMismatch(format!("{m} x values but {} y values", y_data.len())));
    }
    if n == 0 || m < n {
        return Err(Error::DimensionMismatch(format!("{m} data points for {n} parameters")));
    }
    if let Some(b) = bounds {
        if b.len() != n {
            return Err(Error::DimensionMismatch(format!("{} bounds for {n} parameters", b.len())));
        }
        if b.iter().any(|(lo, hi)| !(lo <= hi)) {
            return Err(Error::InvalidParams("lower bound exceeds upper bound".into()));
        }
    }
    if y_data.iter().any(|v| !v.is_finite()) || initial.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParams("non-finite data or initial parameters".into()));
    }

    let mut p = initial.to_vec();
    project(&mut p, bounds);
    let mut r = DVector::zeros(m);
    residuals(&model_fn, &p, x_data, y_data, &mut r);
    let mut cost = sse(&r);
    if !cost.is_finite() {
        return Err(Error::InvalidParams("model is not finite at the initial parameters".into()));
    }
    let initial_cost = cost;

    let mut lambda = opts.lambda0;
    let mut jac = DMatrix::zeros(m, n);
    let mut r_plus = DVector::zeros(m);
    let mut r_minus = DVector::zeros(m);
    let mut r_trial = DVector::zeros(m);
    let mut trial = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = cost == 0.0;

    while !converged && iterations < opts.max_iter {
        iterations += 1;

        for j in 0..n {
            let h = (1e-6 * p[j].abs()).max(1e-6);
            let mut q = p.clone();
            q[j] = p[j] + h;
            residuals(&model_fn, &q, x_data, y_data, &mut r_plus);
            q[j] = p[j] - h;
            residuals(&model_fn, &q, x_data, y_data, &mut r_minus);
            let col = (&r_plus - &r_minus) / (2.0 * h);
            jac.set_column(j, &col);
        }
        if jac.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularJacobian);
        }
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        let diag_max = jtj.diagonal().max();
        if diag_max <= 0.0 {
            return Err(Error::SingularJacobian);
        }

        let mut accepted = false;
        while lambda <= opts.lambda_max {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12 * diag_max);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&grad));
            for k in 0..n {
                trial[k] = p[k] + step[k];
            }
            project(&mut trial, bounds);
            residuals(&model_fn, &trial, x_data, y_data, &mut r_trial);
            let trial_cost = sse(&r_trial);
            if trial_cost < cost {
                let moved: f64 = trial.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                let decrease = (cost - trial_cost) / cost;
                p.copy_from_slice(&trial);
                std::mem::swap(&mut r, &mut r_trial);
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-15);
                accepted = true;
                if decrease < opts.ftol || moved < opts.xtol || cost == 0.0 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no descent direction left at any damping: a stationary point
            converged = true;
        }
    }

    debug_assert!(cost <= initial_cost);
    Ok(FitResult {
        residual_rms: (cost / m as f64).sqrt(),
        params: p,
        iterations,
        converged,
        initial_cost,
        cost,
    })
}
