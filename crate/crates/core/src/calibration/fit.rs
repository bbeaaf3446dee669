use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::centering::BinnedProfile;
use super::nlls::{nlls_fit, Bound, FitResult};
use crate::response::pseudo_voigt::{pseudo_voigt_unchecked, shape};
use crate::response::{design_families, CurveFamily, PVParams, ParamCurve, ResponseModel, THETA0_DEG};
use crate::{Design, Error, Result};

pub const MIN_FILLED_BINS: usize = 8;
pub const MIN_DISTANCES: usize = 6;

/// What a bin's mean is compared against during the per-distance fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinModel {
    /// The model at the bin centre.
    Center,
    /// The model averaged over the bin's member sample angles. Removes the
    /// peak flattening that 9° bins otherwise introduce.
    #[default]
    SampleAverage,
}

/// Fits the pseudo-Voigt shape, centred on 180°, to one binned profile.
pub fn fit_pv_at_distance(profile: &BinnedProfile, mode: BinModel) -> Result<(PVParams, FitResult)> {
    let bins: Vec<_> = profile.filled().collect();
    if bins.len() < MIN_FILLED_BINS {
        return Err(Error::Precondition(format!(
            "d = {} mm: {} non-empty bins, need {MIN_FILLED_BINS}",
            profile.d_mm,
            bins.len()
        )));
    }
    let y: Vec<f64> = bins.iter().map(|b| b.mean.unwrap_or_default()).collect();
    let width = 360.0 / profile.n_bins() as f64;

    let base = y.iter().copied().fold(f64::INFINITY, f64::min);
    let peak = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let half = base + 0.5 * (peak - base);
    let w0 = (y.iter().filter(|&&v| v >= half).count() as f64 * width).max(width);
    let a0 = (peak - base) / shape(0.0, 0.5, w0);
    let init = [base, a0.max(0.0), 0.5, w0];
    let bounds: [Bound; 4] = [
        (f64::NEG_INFINITY, f64::INFINITY),
        (0.0, f64::INFINITY),
        (f64::NEG_INFINITY, f64::INFINITY),
        (1e-9, f64::INFINITY),
    ];

    let fit = match mode {
        BinModel::Center => {
            let x: Vec<f64> = bins.iter().map(|b| b.center()).collect();
            nlls_fit(
                |p, t: &f64| pseudo_voigt_unchecked(*t, THETA0_DEG, &PVParams::from_array([p[0], p[1], p[2], p[3]])),
                &x,
                &y,
                &init,
                Some(&bounds),
            )
        }
        BinModel::SampleAverage => {
            let x: Vec<&[f64]> = bins.iter().map(|b| b.angles.as_slice()).collect();
            nlls_fit(
                |p, angles: &&[f64]| {
                    let pv = PVParams::from_array([p[0], p[1], p[2], p[3]]);
                    angles.iter().map(|t| pseudo_voigt_unchecked(*t, THETA0_DEG, &pv)).sum::<f64>()
                        / angles.len() as f64
                },
                &x,
                &y,
                &init,
                Some(&bounds),
            )
        }
    }
    .map_err(|e| Error::FitFailed {
        target: format!("pseudo-Voigt at d = {} mm", profile.d_mm),
        reason: e.to_string(),
    })?;
    let p = PVParams::from_array([fit.params[0], fit.params[1], fit.params[2], fit.params[3]]);
    p.validate().map_err(|e| Error::FitFailed {
        target: format!("pseudo-Voigt at d = {} mm", profile.d_mm),
        reason: e.to_string(),
    })?;
    Ok((p, fit))
}

/// Outcome of one distance-curve fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFit {
    pub target: String,
    pub family: CurveFamily,
    pub fit: FitResult,
}

pub const CURVE_TARGETS: [&str; 4] = ["y0", "A", "m_u", "w"];

/// Fits the design's four distance curves to per-distance parameters and
/// assembles a model over `domain`.
pub fn fit_param_curves(
    series: &[(f64, PVParams)],
    design: Design,
    domain: [f64; 2],
) -> Result<(ResponseModel, Vec<CurveFit>)> {
    let mut d: Vec<f64> = series.iter().map(|s| s.0).collect();
    d.sort_by(f64::total_cmp);
    d.dedup();
    if d.len() < MIN_DISTANCES {
        return Err(Error::Precondition(format!(
            "{} distinct distances, need at least {MIN_DISTANCES}",
            d.len()
        )));
    }
    let xs: Vec<f64> = series.iter().map(|s| s.0).collect();
    let families = design_families(design);
    let mut curves = Vec::with_capacity(4);
    let mut fits = Vec::with_capacity(4);
    for (k, (family, target)) in families.into_iter().zip(CURVE_TARGETS).enumerate() {
        let ys: Vec<f64> = series.iter().map(|s| s.1.as_array()[k]).collect();
        let failed = |reason: String| Error::FitFailed {
            target: format!("{target} curve ({family})"),
            reason,
        };
        let fit = fit_curve(family, &xs, &ys, domain).map_err(|e| match e {
            Error::FitFailed { reason, .. } => failed(reason),
            other => failed(other.to_string()),
        })?;
        let curve = ParamCurve::new(family, fit.params.clone(), domain).map_err(|e| failed(e.to_string()))?;
        curves.push(curve);
        fits.push(CurveFit {
            target: target.to_string(),
            family,
            fit,
        });
    }
    let mut it = curves.into_iter();
    let (y0, a, mu, w) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
    Ok((ResponseModel::new(design, domain, y0, a, mu, w)?, fits))
}

/// Fits one family: a grid over the nonlinear coefficients with the linear
/// ones solved exactly gives the start point, then all coefficients are
/// refined together.
pub fn fit_curve(family: CurveFamily, d: &[f64], y: &[f64], domain: [f64; 2]) -> Result<FitResult> {
    let init = separable_start(family, d, y, domain).ok_or_else(|| Error::FitFailed {
        target: family.to_string(),
        reason: "no admissible starting point".into(),
    })?;
    let bounds = bounds_for(family, domain);
    let fit = nlls_fit(|c, x: &f64| family.eval_raw(c, *x), d, y, &init, Some(&bounds)).map_err(|e| {
        Error::FitFailed {
            target: family.to_string(),
            reason: e.to_string(),
        }
    })?;
    if !fit.cost.is_finite() {
        return Err(Error::FitFailed {
            target: family.to_string(),
            reason: "non-finite residual".into(),
        });
    }
    Ok(fit)
}

fn bounds_for(family: CurveFamily, domain: [f64; 2]) -> Vec<Bound> {
    let free = (f64::NEG_INFINITY, f64::INFINITY);
    let pos = (1e-12, f64::INFINITY);
    let mut b = vec![free; family.arity()];
    for &i in family.positive_indices() {
        b[i] = pos;
    }
    match family {
        CurveFamily::Chapman => b[1] = pos,
        // keep the pole outside the domain
        CurveFamily::Rational => b[0] = (-(1.0 - 1e-6) / domain[1], f64::INFINITY),
        _ => {}
    }
    b
}

fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Least-squares coefficients and SSE for `y ≈ Σ c_j basis_j(d)`.
fn linear_solve(cols: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, f64)> {
    let m = y.len();
    let a = DMatrix::from_fn(m, cols.len(), |i, j| cols[j][i]);
    if a.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let b = DVector::from_column_slice(y);
    let c = a.clone().svd(true, true).solve(&b, 1e-12).ok()?;
    let sse = (a * &c - b).norm_squared();
    sse.is_finite().then(|| (c.iter().copied().collect(), sse))
}

fn separable_start(family: CurveFamily, d: &[f64], y: &[f64], domain: [f64; 2]) -> Option<Vec<f64>> {
    let dmin = d.iter().copied().fold(f64::INFINITY, f64::min).min(domain[0]);
    let dmax = d.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(domain[1]);
    let span = dmax - dmin;
    let ones = vec![1.0; d.len()];
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |sse: f64, c: Vec<f64>| {
        if family.positive_indices().iter().all(|&i| c[i] > 0.0)
            && best.as_ref().is_none_or(|(b, _)| sse < *b)
        {
            best = Some((sse, c));
        }
    };
    match family {
        CurveFamily::Logistic => {
            for d0 in geomspace(dmin / 4.0, dmax * 4.0, 48) {
                for p in geomspace(0.25, 16.0, 32) {
                    let g: Vec<f64> = d.iter().map(|x| 1.0 / (1.0 + (x / d0).powf(p))).collect();
                    let h: Vec<f64> = g.iter().map(|v| 1.0 - v).collect();
                    if let Some((c, sse)) = linear_solve(&[g, h], y) {
                        consider(sse, vec![c[0], c[1], d0, p]);
                    }
                }
            }
        }
        CurveFamily::ExpDecay2 => {
            let taus = geomspace(span / 100.0, span * 20.0, 36);
            for (i, &t1) in taus.iter().enumerate() {
                for &t2 in &taus[i + 1..] {
                    let e1: Vec<f64> = d.iter().map(|x| (-x / t1).exp()).collect();
                    let e2: Vec<f64> = d.iter().map(|x| (-x / t2).exp()).collect();
                    if let Some((c, sse)) = linear_solve(&[ones.clone(), e1, e2], y) {
                        consider(sse, vec![c[0], c[1], t1, c[2], t2]);
                    }
                }
            }
        }
        CurveFamily::Lorentz => {
            for w1 in geomspace(span / 50.0, span * 20.0, 40) {
                for d0 in linspace(dmin - span, dmax + span, 61) {
                    let l: Vec<f64> = d
                        .iter()
                        .map(|x| 2.0 * w1 / (std::f64::consts::PI * (4.0 * (x - d0).powi(2) + w1 * w1)))
                        .collect();
                    if let Some((c, sse)) = linear_solve(&[ones.clone(), l], y) {
                        consider(sse, vec![c[0], c[1], w1, d0]);
                    }
                }
            }
        }
        CurveFamily::LogNormal => {
            for d0 in geomspace(dmin / 8.0, dmax * 8.0, 48) {
                for w1 in geomspace(0.05, 5.0, 36) {
                    let g: Vec<f64> = d
                        .iter()
                        .map(|x| {
                            let l = (x / d0).ln();
                            (-(l * l) / (2.0 * w1 * w1)).exp()
                                / (2.0 * std::f64::consts::PI * w1 * w1 * x * x).sqrt()
                        })
                        .collect();
                    if let Some((c, sse)) = linear_solve(&[ones.clone(), g], y) {
                        consider(sse, vec![c[0], c[1], d0, w1]);
                    }
                }
            }
        }
        CurveFamily::ExpDecay1 => {
            for t1 in geomspace(span / 100.0, span * 50.0, 200) {
                let e: Vec<f64> = d.iter().map(|x| (-x / t1).exp()).collect();
                if let Some((c, sse)) = linear_solve(&[ones.clone(), e], y) {
                    consider(sse, vec![c[0], c[1], t1]);
                }
            }
        }
        CurveFamily::Chapman => {
            for b in geomspace(1e-2 / dmax, 1e2 / dmin, 60) {
                for c in geomspace(0.05, 20.0, 40) {
                    let g: Vec<f64> = d.iter().map(|x| (1.0 - (-b * x).exp()).powf(c)).collect();
                    if let Some((a, sse)) = linear_solve(&[g], y) {
                        consider(sse, vec![a[0], b, c]);
                    }
                }
            }
        }
        CurveFamily::Rational => {
            let mut grid: Vec<f64> = linspace(-0.95, 0.0, 20).into_iter().map(|s| s / dmax).collect();
            grid.extend(geomspace(1e-4, 1e3, 60).into_iter().map(|s| s / dmax));
            for a in grid {
                let g: Vec<f64> = d.iter().map(|x| 1.0 / (1.0 + a * x)).collect();
                let h: Vec<f64> = d.iter().map(|x| x / (1.0 + a * x)).collect();
                if let Some((c, sse)) = linear_solve(&[g, h], y) {
                    consider(sse, vec![a, c[0], c[1]]);
                }
            }
        }
    }
    best.map(|b| b.1)
}
