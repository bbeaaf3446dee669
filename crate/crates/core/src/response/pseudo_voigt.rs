use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::{wrap_deg_signed, Error, Result};

/// Pseudo-Voigt parameters at one distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PVParams {
    /// Baseline, signal units.
    pub y0: f64,
    /// Area under the peak, signal·degree.
    #[serde(rename = "A")]
    pub area: f64,
    /// Lorentzian fraction. Not confined to `[0, 1]`.
    pub m_u: f64,
    /// Full width at half maximum, degrees.
    pub w: f64,
}

impl PVParams {
    pub fn new(y0: f64, area: f64, m_u: f64, w: f64) -> Result<Self> {
        let p = Self { y0, area, m_u, w };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.y0, self.area, self.m_u, self.w].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParams("non-finite pseudo-Voigt parameter".into()));
        }
        if self.w <= 0.0 {
            return Err(Error::InvalidParams(format!("width must be positive, got {}", self.w)));
        }
        Ok(())
    }

    /// Height of the peak above the baseline.
    pub fn peak_height(&self) -> f64 {
        self.area * shape(0.0, self.m_u, self.w)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.y0, self.area, self.m_u, self.w]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self {
            y0: v[0],
            area: v[1],
            m_u: v[2],
            w: v[3],
        }
    }
}

/// Unit-area Lorentzian with FWHM `w`.
#[inline]
pub fn lorentzian(delta: f64, w: f64) -> f64 {
    2.0 * w / (PI * (4.0 * delta * delta + w * w))
}

/// Unit-area Gaussian with FWHM `w`.
#[inline]
pub fn gaussian(delta: f64, w: f64) -> f64 {
    let k = 4.0 * LN_2 / (w * w);
    (k / PI).sqrt() * (-k * delta * delta).exp()
}

/// Unit-area pseudo-Voigt shape, `delta` already wrapped.
#[inline]
pub fn shape(delta: f64, m_u: f64, w: f64) -> f64 {
    m_u * lorentzian(delta, w) + (1.0 - m_u) * gaussian(delta, w)
}

/// Pseudo-Voigt without validation. `theta - theta0` is wrapped to `(-180, 180]`.
#[inline]
pub fn pseudo_voigt_unchecked(theta: f64, theta0: f64, p: &PVParams) -> f64 {
    p.y0 + p.area * shape(wrap_deg_signed(theta - theta0), p.m_u, p.w)
}

/// Pseudo-Voigt response at angle `theta` for a peak centred on `theta0`, degrees.
pub fn pseudo_voigt(theta: f64, theta0: f64, p: &PVParams) -> Result<f64> {
    p.validate()?;
    Ok(pseudo_voigt_unchecked(theta, theta0, p))
}
