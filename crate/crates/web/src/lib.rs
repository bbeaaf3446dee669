//! Browser bindings: fan tracing, photodiode response curves and noisy
//! localization against the built-in reference models. Every export returns
//! a JSON string.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use omnisense::geometry::{trace_emission_fan_in, MirrorProfile, MirrorSection, MountGeometry, ProfileKind};
use omnisense::localization::{Localizer, SweepSpec};
use omnisense::response::{synthesize_readout, NoiseSpec, N_PD};
use omnisense::synthetic::reference_model;
use omnisense::Design;

const MM_PER_CM: f64 = 10.0;
const TAIL_CM: f64 = 40.0;

#[derive(Serialize)]
struct Trace {
    /// Polylines in mm, one per ray, as `[x, z]` pairs.
    rays: Vec<Vec<[f64; 2]>>,
    live: Vec<bool>,
    /// Mirror surface in mm.
    mirror: Vec<[f64; 2]>,
    receiver_height_mm: f64,
    span_mm: Option<[f64; 2]>,
    contiguous: bool,
}

pub fn trace_json(profile: &str, half_angle_deg: f64, n_rays: usize) -> Result<String, String> {
    let kind: ProfileKind = profile.parse().map_err(|e: omnisense::Error| e.to_string())?;
    let (mirror, section) = match kind {
        ProfileKind::Flower => (MirrorProfile::flower(), MirrorSection::flower()),
        _ => (MirrorProfile::vertical_stage1(), MirrorSection::vertical()),
    };
    let mut mount = MountGeometry::default_for(kind);
    mount.half_angle_deg = half_angle_deg;
    let report = trace_emission_fan_in(&section, &mirror, &mount.fan_spec(n_rays)).map_err(|e| e.to_string())?;
    let z = mount.receiver_height_cm;
    let span = report.radial_range_at_height(z);

    let (lo, hi) = section.radial_extent();
    let surface = (0..=200)
        .filter_map(|k| {
            let r = lo + (hi - lo) * k as f64 / 200.0;
            section.surface(r).map(|z| [r * MM_PER_CM, z * MM_PER_CM])
        })
        .collect();
    let out = Trace {
        rays: report
            .rays
            .iter()
            .map(|r| r.polyline(TAIL_CM, Some(z)).iter().map(|p| [p.x * MM_PER_CM, p.y * MM_PER_CM]).collect())
            .collect(),
        live: report.rays.iter().map(|r| r.is_live()).collect(),
        mirror: surface,
        receiver_height_mm: z * MM_PER_CM,
        span_mm: span.map(|s| [s.r_min * MM_PER_CM, s.r_max * MM_PER_CM]),
        contiguous: span.is_some_and(|s| s.contiguous),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

fn check_domain(model: &omnisense::response::ResponseModel, d_mm: f64) -> Result<(), String> {
    let [lo, hi] = model.domain();
    if model.contains(d_mm) {
        Ok(())
    } else {
        Err(format!("distance {d_mm} mm is outside the model domain [{lo}, {hi}] mm"))
    }
}

#[derive(Serialize)]
struct Curves {
    theta_deg: Vec<f64>,
    /// `signals[i][k]` is photodiode `i` at `theta_deg[k]`.
    signals: Vec<Vec<f64>>,
    accumulated: Vec<f64>,
}

pub fn response_json(design: &str, d_mm: f64) -> Result<String, String> {
    let design: Design = design.parse().map_err(|e: omnisense::Error| e.to_string())?;
    let model = reference_model(design);
    check_domain(&model, d_mm)?;
    let theta: Vec<f64> = (0..=180).map(|k| 2.0 * k as f64).collect();
    let mut signals = vec![Vec::new(); N_PD];
    let mut accumulated = Vec::with_capacity(theta.len());
    for &t in &theta {
        let s = model.responses(d_mm, t).map_err(|e| e.to_string())?;
        for (i, v) in s.iter().enumerate() {
            signals[i].push(*v);
        }
        accumulated.push(s.iter().sum());
    }
    serde_json::to_string(&Curves {
        theta_deg: theta,
        signals,
        accumulated,
    })
    .map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Localized {
    signals: [f64; N_PD],
    d_mm: f64,
    theta_deg: f64,
    chi_sq: f64,
}

pub fn localize_json(design: &str, d_mm: f64, theta_deg: f64, noise_frac: f64, seed: u64) -> Result<String, String> {
    let design: Design = design.parse().map_err(|e: omnisense::Error| e.to_string())?;
    let model = reference_model(design);
    check_domain(&model, d_mm)?;
    let noise = if noise_frac > 0.0 {
        NoiseSpec::gaussian(noise_frac).map_err(|e| e.to_string())?
    } else {
        NoiseSpec::None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let readout = synthesize_readout(&model, d_mm, theta_deg, noise, &mut rng).map_err(|e| e.to_string())?;
    let loc = Localizer::new(&model, &SweepSpec::for_model(&model)).map_err(|e| e.to_string())?;
    let est = loc.localize(&readout).map_err(|e| e.to_string())?;
    serde_json::to_string(&Localized {
        signals: readout.signals,
        d_mm: est.d_mm,
        theta_deg: est.theta_deg,
        chi_sq: est.chi_sq,
    })
    .map_err(|e| e.to_string())
}

/// Traces an emission fan off `profile` ("vertical-stage1" or "flower").
#[wasm_bindgen]
pub fn trace_fan(profile: &str, half_angle_deg: f64, n_rays: usize) -> Result<String, JsError> {
    trace_json(profile, half_angle_deg, n_rays).map_err(|e| JsError::new(&e))
}

/// The eight photodiode responses over a full turn at distance `d_mm`.
#[wasm_bindgen]
pub fn response_curves(design: &str, d_mm: f64) -> Result<String, JsError> {
    response_json(design, d_mm).map_err(|e| JsError::new(&e))
}

/// Synthesizes a noisy readout at a pose and localizes it.
#[wasm_bindgen]
pub fn localize_noisy(design: &str, d_mm: f64, theta_deg: f64, noise_frac: f64, seed: u32) -> Result<String, JsError> {
    localize_json(design, d_mm, theta_deg, noise_frac, u64::from(seed)).map_err(|e| JsError::new(&e))
}
