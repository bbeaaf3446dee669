//! Mirror profiles, 2D specular ray tracing and LED cone estimation.
//!
//! All lengths in this module are in centimetres, the unit the mirror
//! coefficients are published in. The transverse plane uses `x` for the
//! radial coordinate and `z` for height.

mod cone;
mod profile;
mod ray;

pub use cone::{cone_from_screens, ConeEstimate, ScreenMeasurement};
pub use profile::{
    eval_profile, profile_slope, CubicSegment, MirrorProfile, ProfileKind,
    BREAKPOINT_TOLERANCE_CM,
};
pub use ray::{
    intersect, reflect_ray, specular, trace_emission_fan, trace_emission_fan_in, FanRay,
    FanReport, FanSpec, MirrorSection, RadialSpan, Ray2D, Reflection,
};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

/// Measured half-angle of the LED emission cone, degrees.
pub const LED_HALF_ANGLE_DEG: f64 = 18.4;

/// Where the LED focal point and the receiving target sit in profile
/// coordinates. Only drawings fix these offsets, so they are configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MountGeometry {
    /// Axial height of the LED focal point, cm.
    pub source_height_cm: f64,
    /// Height at which a receiving sensor intercepts the reflected beam, cm.
    pub receiver_height_cm: f64,
    pub half_angle_deg: f64,
}

impl MountGeometry {
    /// Defaults per emitter profile.
    ///
    /// Vertical: the focal point sits 0.8 cm below the stage-1 apex, which
    /// keeps the whole 18.4° cone on stage 1, and the receiver is the middle
    /// of the peer's stage 2 (2.5 to 3.65 cm). Flower: the focal point is the
    /// profile origin and the receiver is the horizontal PD ring at 0.5 cm.
    pub fn default_for(emitter: ProfileKind) -> Self {
        match emitter {
            ProfileKind::VerticalStage1 | ProfileKind::VerticalStage2 => Self {
                source_height_cm: 1.2,
                receiver_height_cm: 3.0,
                half_angle_deg: LED_HALF_ANGLE_DEG,
            },
            ProfileKind::Flower => Self {
                source_height_cm: 0.0,
                receiver_height_cm: 0.5,
                half_angle_deg: LED_HALF_ANGLE_DEG,
            },
        }
    }

    pub fn source(&self) -> Vector2<f64> {
        Vector2::new(0.0, self.source_height_cm)
    }

    pub fn fan_spec(&self, n_rays: usize) -> FanSpec {
        FanSpec {
            n_rays,
            half_angle_deg: self.half_angle_deg,
            source: self.source(),
        }
    }
}
