use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Illuminated circle on a screen placed in front of the LED.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenMeasurement {
    /// Distance from the LED base to the screen front, screen thickness included.
    pub x: f64,
    /// Diameter of the illuminated circle, same unit as `x`.
    pub phi: f64,
}

impl ScreenMeasurement {
    pub fn new(x: f64, phi: f64) -> Result<Self> {
        if !(x > 0.0 && phi > 0.0 && x.is_finite() && phi.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "screen measurement needs x > 0 and phi > 0 (got {x}, {phi})"
            )));
        }
        Ok(Self { x, phi })
    }
}

/// Averaged emission cone estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeEstimate {
    /// Cone half-angle, degrees.
    pub theta_fp: f64,
    /// Apparent apex position measured from the LED base, unit of the inputs.
    /// Zero means the apex sits at the base.
    pub x_fp: f64,
    /// Number of measurement pairs averaged.
    pub pairs: usize,
}

/// Estimates the cone half-angle and apparent apex from every pair of screen
/// measurements at distinct distances, then averages over pairs.
///
/// For a pair `x1 < x2` the half-angle is `atan((phi2 - phi1) / (2 (x2 - x1)))`
/// and each member gives an apex `x_i - phi_i / (2 tan theta)`.
pub fn cone_from_screens(measurements: &[ScreenMeasurement]) -> Result<ConeEstimate> {
    if measurements.len() < 2 {
        return Err(Error::Precondition("at least two screen measurements are required".into()));
    }
    for m in measurements {
        ScreenMeasurement::new(m.x, m.phi)?;
    }
    // canonical order makes the average independent of input order
    let mut sorted = measurements.to_vec();
    sorted.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.phi.total_cmp(&b.phi)));

    let mut theta_sum = 0.0;
    let mut apex_sum = 0.0;
    let mut pairs = 0;
    for (i, near) in sorted.iter().enumerate() {
        for far in &sorted[i + 1..] {
            if far.x <= near.x {
                continue;
            }
            let theta = ((far.phi - near.phi) / (2.0 * (far.x - near.x))).atan();
            if theta <= 0.0 {
                return Err(Error::DegenerateInput(format!(
                    "illuminated diameter does not grow between x = {} and x = {}",
                    near.x, far.x
                )));
            }
            let t = theta.tan();
            let apex = 0.5 * ((near.x - near.phi / (2.0 * t)) + (far.x - far.phi / (2.0 * t)));
            theta_sum += theta.to_degrees();
            apex_sum += apex;
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Err(Error::DegenerateInput("all screen distances are equal".into()));
    }
    Ok(ConeEstimate {
        theta_fp: theta_sum / pairs as f64,
        x_fp: apex_sum / pairs as f64,
        pairs,
    })
}
