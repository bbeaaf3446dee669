//! Sweep datasets to response models: offset estimation, centring on 180°,
//! bin averaging, per-distance pseudo-Voigt fits and distance-curve fits.

pub mod centering;
pub mod dataset;
pub mod fit;
pub mod nlls;
pub mod pipeline;

pub use centering::{bin_average, center_signals, estimate_offset, BinnedProfile, CenteredDistance, CenteredSeries};
pub use dataset::{PathKind, SweepDataset, SweepRecord};
pub use fit::{fit_curve, fit_param_curves, fit_pv_at_distance, BinModel, CurveFit};
pub use nlls::{nlls_fit, nlls_fit_with, FitResult, NllsOptions};
pub use pipeline::{calibrate, CalibrateOptions, CalibrationReport, DistanceFit};
