//! Forward model: pseudo-Voigt photodiode response whose four parameters
//! vary with emitter distance through fitted curves.

pub mod curves;
pub mod model;
pub mod pseudo_voigt;
pub mod readout;

pub use curves::{eval_param_curve, CurveFamily, ParamCurve};
pub use model::{
    design_families, pd_response, ResponseModel, SensorLayout, Warning, DEFAULT_DOMAIN_MM, N_PD,
    PD_SPACING_DEG, THETA0_DEG,
};
pub use pseudo_voigt::{gaussian, lorentzian, pseudo_voigt, PVParams};
pub use readout::{accumulated_signal, synthesize_readout, NoiseSpec, Pose, Readout, Synthesizer};
