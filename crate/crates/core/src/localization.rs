//! Pose recovery from one readout by χ² minimization over a coarse grid and
//! then a finer grid around the coarse minimum.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::response::{PVParams, Readout, ResponseModel, N_PD};
use crate::{wrap_deg, Error, Result};

/// Half-width of the fine sweep in distance, mm.
pub const FINE_D_HALF: f64 = 30.0;
/// Half-width of the fine sweep in orientation, degrees.
pub const FINE_THETA_HALF: f64 = 30.0;
/// Fine sweep resolution, mm in distance and mm of arc in orientation.
pub const FINE_STEP: f64 = 2.0;

/// Coarse sweep grid. Each distance row has its own angular step of roughly
/// `arc_step / d` radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub d_range: [f64; 2],
    pub d_step: f64,
    pub arc_step: f64,
    /// Orientation window in degrees; `None` covers the full circle.
    #[serde(default)]
    pub theta_range: Option<[f64; 2]>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            d_range: [70.0, 450.0],
            d_step: 10.0,
            arc_step: 10.0,
            theta_range: None,
        }
    }
}

impl SweepSpec {
    /// Default steps over the model's domain.
    pub fn for_model(model: &ResponseModel) -> Self {
        Self {
            d_range: model.domain(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.d_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidParams(format!("invalid distance range {:?}", self.d_range)));
        }
        if !(self.d_step > 0.0 && self.d_step.is_finite() && self.arc_step > 0.0 && self.arc_step.is_finite()) {
            return Err(Error::InvalidParams("sweep steps must be positive".into()));
        }
        if let Some([a, b]) = self.theta_range {
            if !(a.is_finite() && b.is_finite() && a <= b && b - a < 360.0) {
                return Err(Error::InvalidParams(format!("invalid orientation range [{a}, {b}]")));
            }
        }
        Ok(())
    }

    pub fn validate_for(&self, model: &ResponseModel) -> Result<()> {
        self.validate()?;
        let [lo, hi] = model.domain();
        if self.d_range[0] < lo || self.d_range[1] > hi {
            return Err(Error::InvalidParams(format!(
                "distance range {:?} exceeds model domain [{lo}, {hi}]",
                self.d_range
            )));
        }
        Ok(())
    }

    /// Grid distances, ascending.
    pub fn distances(&self) -> impl Iterator<Item = f64> + '_ {
        let [lo, hi] = self.d_range;
        let n = ((hi - lo) / self.d_step + 1e-9).floor() as usize;
        (0..=n).map(move |k| lo + k as f64 * self.d_step)
    }

    /// Number of orientations in the row at distance `d`. On the full circle
    /// the count is rounded to a multiple of 8 so every row is symmetric
    /// under the 45° photodiode spacing.
    pub fn angular_count(&self, d: f64) -> usize {
        match self.theta_range {
            None => {
                let n = 2.0 * PI * d / self.arc_step;
                (8.0 * (n / 8.0).round()).max(8.0) as usize
            }
            Some([a, b]) => ((b - a).to_radians() * d / self.arc_step).round() as usize + 1,
        }
    }

    /// Row orientations at distance `d`, degrees in `[0, 360)`.
    pub fn angles_at(&self, d: f64) -> impl Iterator<Item = f64> + '_ {
        let n = self.angular_count(d);
        let range = self.theta_range;
        (0..n).map(move |j| match range {
            None => j as f64 * 360.0 / n as f64,
            Some([a, b]) if n > 1 => wrap_deg(a + (b - a) * j as f64 / (n - 1) as f64),
            Some([a, _]) => wrap_deg(a),
        })
    }

    pub fn grid_len(&self) -> usize {
        self.distances().map(|d| self.angular_count(d)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepStage {
    Coarse,
    Fine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseEstimate {
    pub d_mm: f64,
    pub theta_deg: f64,
    pub chi_sq: f64,
    pub stage: SweepStage,
}

#[inline]
fn chi_with(model: &ResponseModel, p: &PVParams, theta: f64, s: &[f64; N_PD]) -> f64 {
    model
        .responses_with(p, theta)
        .iter()
        .zip(s)
        .map(|(m, v)| (v - m) * (v - m))
        .sum()
}

/// Sum over the photodiodes of the squared readout-minus-model difference.
pub fn chi_sq(r: &Readout, model: &ResponseModel, d: f64, theta: f64) -> Result<f64> {
    let p = model.params_at(d)?;
    Ok(chi_with(model, &p, theta, &r.signals))
}

/// Running minimum with the documented tie order: lower χ², then smaller d,
/// then smaller θ.
#[derive(Clone, Copy)]
struct Best(Option<(f64, f64, f64)>);

impl Best {
    #[inline]
    fn offer(&mut self, chi: f64, d: f64, theta: f64) {
        let better = match self.0 {
            None => true,
            Some((c, bd, bt)) => chi < c || (chi == c && (d < bd || (d == bd && theta < bt))),
        };
        if better && !chi.is_nan() {
            self.0 = Some((chi, d, theta));
        }
    }

    fn into_estimate(self, stage: SweepStage) -> Result<PoseEstimate> {
        let (chi_sq, d_mm, theta_deg) = self.0.ok_or(Error::EmptyGrid)?;
        Ok(PoseEstimate {
            d_mm,
            theta_deg,
            chi_sq,
            stage,
        })
    }
}

/// Precomputed coarse grid for repeated localization against one model.
#[derive(Debug, Clone)]
pub struct Localizer<'m> {
    model: &'m ResponseModel,
    rows: Vec<(f64, PVParams, Vec<f64>)>,
}

impl<'m> Localizer<'m> {
    pub fn new(model: &'m ResponseModel, spec: &SweepSpec) -> Result<Self> {
        spec.validate_for(model)?;
        let rows = spec
            .distances()
            .map(|d| Ok((d, model.params_at(d)?, spec.angles_at(d).collect())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { model, rows })
    }

    pub fn model(&self) -> &ResponseModel {
        self.model
    }

    pub fn coarse(&self, r: &Readout) -> Result<PoseEstimate> {
        let mut best = Best(None);
        for (d, p, angles) in &self.rows {
            for &t in angles {
                best.offer(chi_with(self.model, p, t, &r.signals), *d, t);
            }
        }
        best.into_estimate(SweepStage::Coarse)
    }

    pub fn fine(&self, r: &Readout, center: &PoseEstimate) -> Result<PoseEstimate> {
        fine_sweep(r, self.model, center)
    }

    /// Coarse then fine sweep.
    pub fn localize(&self, r: &Readout) -> Result<PoseEstimate> {
        let coarse = self.coarse(r)?;
        let fine = self.fine(r, &coarse)?;
        assert!(fine.chi_sq <= coarse.chi_sq, "fine sweep lost the coarse minimum");
        Ok(fine)
    }
}

/// Grid minimizer over the coarse sweep.
pub fn coarse_sweep(r: &Readout, model: &ResponseModel, spec: &SweepSpec) -> Result<PoseEstimate> {
    Localizer::new(model, spec)?.coarse(r)
}

/// Grid minimizer within ±30 mm and ±30° of `center`, with 2 mm steps in
/// distance and 2 mm of arc in orientation. Rows outside the model domain
/// are skipped.
pub fn fine_sweep(r: &Readout, model: &ResponseModel, center: &PoseEstimate) -> Result<PoseEstimate> {
    let k_max = (FINE_D_HALF / FINE_STEP).round() as i64;
    let mut best = Best(None);
    for k in -k_max..=k_max {
        let d = center.d_mm + k as f64 * FINE_STEP;
        if !model.contains(d) {
            continue;
        }
        let p = model.params_at(d)?;
        let raw = (FINE_STEP / d).to_degrees();
        let n = (FINE_THETA_HALF / raw).ceil() as i64;
        let step = FINE_THETA_HALF / n as f64;
        for j in -n..=n {
            let t = wrap_deg(center.theta_deg + j as f64 * step);
            best.offer(chi_with(model, &p, t, &r.signals), d, t);
        }
    }
    best.into_estimate(SweepStage::Fine)
}

/// Two-stage localization with the default grid over the model's domain.
pub fn localize(r: &Readout, model: &ResponseModel) -> Result<PoseEstimate> {
    Localizer::new(model, &SweepSpec::for_model(model))?.localize(r)
}
