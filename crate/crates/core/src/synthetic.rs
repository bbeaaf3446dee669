//! Illustrative reference models and sweep generators for closed-loop tests
//! and demos.
//!
//! The coefficients below are tuned so that each design lands in a
//! plausible regime: the vertical sensor has wide peaks whose amplitude and
//! baseline change strongly with distance, the flower sensor has narrower
//! peaks and a flatter amplitude-distance curve. They are synthetic fixtures,
//! not measured calibrations.

use rand::Rng;

use crate::calibration::dataset::{PathKind, SweepDataset, SweepRecord};
use crate::localization::SweepSpec;
use crate::response::{CurveFamily, NoiseSpec, ParamCurve, ResponseModel, Synthesizer, DEFAULT_DOMAIN_MM};
use crate::{wrap_deg, Design, Result};

fn curve(family: CurveFamily, coeffs: &[f64]) -> ParamCurve {
    ParamCurve::new(family, coeffs.to_vec(), DEFAULT_DOMAIN_MM).expect("reference coefficients are valid")
}

/// Reference forward model for `design` over the default 70–450 mm domain.
pub fn reference_model(design: Design) -> ResponseModel {
    use CurveFamily::*;
    let curves = match design {
        Design::Vertical => [
            curve(Logistic, &[80.0, 8.0, 160.0, 2.5]),
            curve(ExpDecay2, &[1500.0, 60000.0, 70.0, 30000.0, 220.0]),
            curve(Lorentz, &[0.35, 30.0, 180.0, 200.0]),
            curve(Lorentz, &[110.0, 6000.0, 250.0, 100.0]),
        ],
        Design::Flower => [
            curve(LogNormal, &[40.375153, 19235.282982, 367.679951, 0.556741]),
            curve(ExpDecay1, &[19135.373923, -11032.153400, 216.2407]),
            curve(Chapman, &[0.503791, 0.017091, 0.513705]),
            curve(Rational, &[0.000137, 53.416403, 0.03808]),
        ],
    };
    let [y0, a, mu, w] = curves;
    ResponseModel::new(design, DEFAULT_DOMAIN_MM, y0, a, mu, w).expect("reference model is consistent")
}

/// Samples `model` on the sweep grid of `spec`. Every emitter orientation is
/// shifted by `rotation_deg` before evaluation, mimicking a sensor mounted
/// with an angular offset; recorded angles stay on the nominal grid.
pub fn synthesize_sweep<R: Rng + ?Sized>(
    model: &ResponseModel,
    spec: &SweepSpec,
    path: PathKind,
    noise: NoiseSpec,
    rotation_deg: f64,
    rng: &mut R,
) -> Result<SweepDataset> {
    spec.validate()?;
    let synth = Synthesizer::new(model, noise)?;
    let mut records = Vec::with_capacity(spec.grid_len());
    for d in spec.distances() {
        for theta in spec.angles_at(d) {
            let r = synth.readout(d, wrap_deg(theta - rotation_deg), rng)?;
            records.push(SweepRecord {
                d_mm: d,
                theta_deg: theta,
                signals: r.signals,
            });
        }
    }
    SweepDataset::new(model.design(), path, records, spec.d_step, spec.arc_step)
}
