use serde::{Deserialize, Serialize};

use super::centering::{bin_average, center_signals, estimate_offset, DEFAULT_BINS};
use super::dataset::SweepDataset;
use super::fit::{fit_param_curves, fit_pv_at_distance, BinModel, CurveFit};
use crate::response::{PVParams, ResponseModel, Warning, DEFAULT_DOMAIN_MM};
use crate::{Design, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrateOptions {
    pub n_bins: usize,
    pub bin_model: BinModel,
    pub domain: [f64; 2],
}

impl Default for CalibrateOptions {
    fn default() -> Self {
        Self {
            n_bins: DEFAULT_BINS,
            bin_model: BinModel::default(),
            domain: DEFAULT_DOMAIN_MM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceFit {
    pub d_mm: f64,
    pub params: PVParams,
    pub residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
    pub empty_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub design: Design,
    pub theta_off_deg: f64,
    pub n_records: usize,
    pub used_post_path: bool,
    pub options: CalibrateOptions,
    pub distances: Vec<DistanceFit>,
    pub curves: Vec<CurveFit>,
    pub warnings: Vec<Warning>,
}

impl CalibrationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Builds a response model from a free-path sweep and an optional post-path
/// sweep. Errors carry the name of the stage that failed.
pub fn calibrate(
    free: &SweepDataset,
    post: Option<&SweepDataset>,
    opts: &CalibrateOptions,
) -> Result<(ResponseModel, CalibrationReport)> {
    let design = free.design();
    let mut warnings = Vec::new();
    let post = post.filter(|p| !p.is_empty());
    match post {
        Some(p) => {
            if p.design() != design {
                return Err(Error::Precondition(format!(
                    "free sweep is {design} but post sweep is {}",
                    p.design()
                )));
            }
            if p.distances() != free.distances() {
                return Err(Error::Precondition("free and post sweeps use different distance grids".into()));
            }
        }
        None => warnings.push(Warning::PostPathMissing),
    }

    let theta_off = estimate_offset(free).map_err(|e| e.at_stage("estimate_offset"))?;
    let series = center_signals(free, post, theta_off).map_err(|e| e.at_stage("center_signals"))?;

    let mut distances = Vec::with_capacity(series.distances.len());
    for dist in &series.distances {
        let binned = bin_average(dist, opts.n_bins).map_err(|e| e.at_stage("bin_average"))?;
        let empty = binned.empty_bins();
        if empty > 0 {
            warnings.push(Warning::EmptyBins {
                d_mm: dist.d_mm,
                count: empty,
            });
        }
        let (params, fit) =
            fit_pv_at_distance(&binned, opts.bin_model).map_err(|e| e.at_stage("fit_pv_at_distance"))?;
        if !fit.converged {
            warnings.push(Warning::NotConverged {
                target: format!("pseudo-Voigt at d = {} mm", dist.d_mm),
            });
        }
        distances.push(DistanceFit {
            d_mm: dist.d_mm,
            params,
            residual_rms: fit.residual_rms,
            iterations: fit.iterations,
            converged: fit.converged,
            empty_bins: empty,
        });
    }

    let pv_series: Vec<(f64, PVParams)> = distances.iter().map(|f| (f.d_mm, f.params)).collect();
    let (model, curves) =
        fit_param_curves(&pv_series, design, opts.domain).map_err(|e| e.at_stage("fit_param_curves"))?;
    for c in &curves {
        if !c.fit.converged {
            warnings.push(Warning::NotConverged {
                target: format!("{} curve", c.target),
            });
        }
    }
    for f in &distances {
        if !(0.0..=1.0).contains(&f.params.m_u) {
            warnings.push(Warning::LorentzFractionOutOfRange {
                d_mm: f.d_mm,
                m_u: f.params.m_u,
            });
        }
    }

    let report = CalibrationReport {
        design,
        theta_off_deg: theta_off,
        n_records: free.records().len() + post.map_or(0, |p| p.records().len()),
        used_post_path: post.is_some(),
        options: *opts,
        distances,
        curves,
        warnings,
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::dataset::PathKind;
    use crate::localization::SweepSpec;
    use crate::response::NoiseSpec;
    use crate::synthetic::{reference_model, synthesize_sweep};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn coarse_spec() -> SweepSpec {
        SweepSpec {
            d_step: 40.0,
            arc_step: 10.0,
            ..SweepSpec::default()
        }
    }

    #[test]
    fn free_only_warns() {
        let m = reference_model(Design::Flower);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let free = synthesize_sweep(&m, &coarse_spec(), PathKind::Free, NoiseSpec::None, 0.0, &mut rng).unwrap();
        let (_, report) = calibrate(&free, None, &CalibrateOptions::default()).unwrap();
        assert!(report.warnings.contains(&Warning::PostPathMissing));
        assert!(!report.used_post_path);
        assert_eq!(report.distances.len(), 10);
        let json = report.to_json().unwrap();
        assert!(json.contains("post_path_missing"));
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = synthesize_sweep(&reference_model(Design::Vertical), &coarse_spec(), PathKind::Free, NoiseSpec::None, 0.0, &mut rng).unwrap();
        let f = synthesize_sweep(&reference_model(Design::Flower), &coarse_spec(), PathKind::Post, NoiseSpec::None, 0.0, &mut rng).unwrap();
        assert!(matches!(calibrate(&v, Some(&f), &CalibrateOptions::default()), Err(Error::Precondition(_))));
    }

    #[test]
    fn stage_is_named_on_failure() {
        let spec = SweepSpec {
            d_range: [70.0, 110.0],
            ..coarse_spec()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let free = synthesize_sweep(&reference_model(Design::Vertical), &spec, PathKind::Free, NoiseSpec::None, 0.0, &mut rng).unwrap();
        let err = calibrate(&free, None, &CalibrateOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "fit_param_curves", .. }), "{err}");
    }
}
