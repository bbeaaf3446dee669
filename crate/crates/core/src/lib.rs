//! Forward models, calibration and inversion for camera-less catadioptric
//! omnidirectional infrared sensors built from one LED, a rotationally
//! symmetric mirror and eight discrete photodiodes.
//!
//! The crate is organized along the data flow of a sensor study:
//!
//! * [`geometry`]: mirror profiles, 2D specular ray tracing and the LED
//!   emission-cone estimator.
//! * [`response`]: the pseudo-Voigt photodiode response, its distance
//!   dependent parameter curves and synthetic readouts.
//! * [`calibration`]: sweep datasets, centering/binning and the nonlinear
//!   least-squares fits that turn sweeps into a [`response::ResponseModel`].
//! * [`localization`]: coarse-then-fine χ² grid inversion of one readout.
//! * [`evaluation`]: mean-absolute-error harness and design comparison.

pub mod calibration;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod localization;
pub mod response;
pub mod synthetic;

pub use error::{Error, Result};

/// The two sensor arrangements studied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    /// Photodiodes point upward into a two-stage mirror.
    Vertical,
    /// Photodiodes lie horizontally, pointing outward under a single-stage mirror.
    Flower,
}

impl Design {
    pub fn as_str(self) -> &'static str {
        match self {
            Design::Vertical => "vertical",
            Design::Flower => "flower",
        }
    }
}

impl std::fmt::Display for Design {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vertical" => Ok(Design::Vertical),
            "flower" => Ok(Design::Flower),
            other => Err(Error::Parse(format!("unknown design `{other}`"))),
        }
    }
}

/// Wraps an angle in degrees to `(-180, 180]`.
pub fn wrap_deg_signed(angle: f64) -> f64 {
    let r = angle.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Wraps an angle in degrees to `[0, 360)`.
pub fn wrap_deg(angle: f64) -> f64 {
    let r = angle.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrapping_conventions() {
        assert_eq!(wrap_deg_signed(180.0), 180.0);
        assert_eq!(wrap_deg_signed(-180.0), 180.0);
        assert_eq!(wrap_deg_signed(190.0), -170.0);
        assert_eq!(wrap_deg(-1e-18), 0.0);
        assert_eq!(wrap_deg(725.0), 5.0);
    }

    #[test]
    fn design_parses_case_insensitively() {
        assert_eq!("Flower".parse::<Design>().unwrap(), Design::Flower);
        assert!("hybrid".parse::<Design>().is_err());
    }
}
