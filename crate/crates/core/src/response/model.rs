use serde::{Deserialize, Serialize};

use super::curves::{CurveDoc, CurveFamily, ParamCurve};
use super::pseudo_voigt::{pseudo_voigt_unchecked, PVParams};
use crate::{Design, Error, Result};

pub const N_PD: usize = 8;
/// Angular spacing of the photodiodes, degrees.
pub const PD_SPACING_DEG: f64 = 45.0;
/// Peak position every per-distance fit is centred on, degrees.
pub const THETA0_DEG: f64 = 180.0;
/// Default distance domain, mm.
pub const DEFAULT_DOMAIN_MM: [f64; 2] = [70.0, 450.0];
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Ring of eight photodiodes at multiples of 45°.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorLayout {
    pub design: Design,
    pub pd_angles: [f64; N_PD],
    pub theta0: f64,
}

impl SensorLayout {
    pub fn standard(design: Design) -> Self {
        let mut pd_angles = [0.0; N_PD];
        for (i, a) in pd_angles.iter_mut().enumerate() {
            *a = i as f64 * PD_SPACING_DEG;
        }
        Self {
            design,
            pd_angles,
            theta0: THETA0_DEG,
        }
    }

    pub fn n_pd(&self) -> usize {
        N_PD
    }
}

/// Curve families bound to each design, in `(y0, A, m_u, w)` order.
pub fn design_families(design: Design) -> [CurveFamily; 4] {
    match design {
        Design::Vertical => [
            CurveFamily::Logistic,
            CurveFamily::ExpDecay2,
            CurveFamily::Lorentz,
            CurveFamily::Lorentz,
        ],
        Design::Flower => [
            CurveFamily::LogNormal,
            CurveFamily::ExpDecay1,
            CurveFamily::Chapman,
            CurveFamily::Rational,
        ],
    }
}

/// Non-fatal conditions raised while evaluating a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    Extrapolated { d_mm: f64 },
    LorentzFractionOutOfRange { d_mm: f64, m_u: f64 },
    PostPathMissing,
    EmptyBins { d_mm: f64, count: usize },
    NotConverged { target: String },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::Extrapolated { d_mm } => write!(f, "d = {d_mm} mm lies outside the model domain"),
            Warning::LorentzFractionOutOfRange { d_mm, m_u } => {
                write!(f, "m_u = {m_u:.4} outside [0, 1] at d = {d_mm} mm")
            }
            Warning::PostPathMissing => f.write_str("post path missing; calibrated from free path only"),
            Warning::EmptyBins { d_mm, count } => write!(f, "{count} empty bin(s) at d = {d_mm} mm"),
            Warning::NotConverged { target } => write!(f, "{target}: iteration limit reached"),
        }
    }
}

/// Forward model `S_i(d, θ)`: four distance curves feeding a pseudo-Voigt
/// centred on each photodiode.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseModel {
    layout: SensorLayout,
    domain: [f64; 2],
    y0: ParamCurve,
    area: ParamCurve,
    m_u: ParamCurve,
    w: ParamCurve,
}

impl ResponseModel {
    /// Assembles a model, checking the design's family binding. Curve domains
    /// are replaced by `domain`.
    pub fn new(
        design: Design,
        domain: [f64; 2],
        y0: ParamCurve,
        area: ParamCurve,
        m_u: ParamCurve,
        w: ParamCurve,
    ) -> Result<Self> {
        if !(domain[0] > 0.0 && domain[0] < domain[1] && domain[1].is_finite()) {
            return Err(Error::InvalidParams(format!("invalid model domain {domain:?}")));
        }
        let expected = design_families(design);
        let got = [y0.family(), area.family(), m_u.family(), w.family()];
        for ((name, e), g) in ["y0", "A", "m_u", "w"].iter().zip(expected).zip(got) {
            if e != g {
                return Err(Error::InvalidParams(format!(
                    "{design} design expects {e} for {name}, got {g}"
                )));
            }
        }
        Ok(Self {
            layout: SensorLayout::standard(design),
            domain,
            y0: y0.with_domain(domain),
            area: area.with_domain(domain),
            m_u: m_u.with_domain(domain),
            w: w.with_domain(domain),
        })
    }

    pub fn design(&self) -> Design {
        self.layout.design
    }

    pub fn layout(&self) -> &SensorLayout {
        &self.layout
    }

    pub fn domain(&self) -> [f64; 2] {
        self.domain
    }

    pub fn contains(&self, d: f64) -> bool {
        d >= self.domain[0] && d <= self.domain[1]
    }

    /// Curves in `(y0, A, m_u, w)` order.
    pub fn curves(&self) -> [&ParamCurve; 4] {
        [&self.y0, &self.area, &self.m_u, &self.w]
    }

    /// Pseudo-Voigt parameters at distance `d` (mm).
    pub fn params_at(&self, d: f64) -> Result<PVParams> {
        let p = PVParams {
            y0: self.y0.eval(d)?,
            area: self.area.eval(d)?,
            m_u: self.m_u.eval(d)?,
            w: self.w.eval(d)?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn warnings_at(&self, d: f64) -> Vec<Warning> {
        let mut out = Vec::new();
        if !self.contains(d) {
            out.push(Warning::Extrapolated { d_mm: d });
        }
        if let Ok(m_u) = self.m_u.eval(d) {
            if !(0.0..=1.0).contains(&m_u) {
                out.push(Warning::LorentzFractionOutOfRange { d_mm: d, m_u });
            }
        }
        out
    }

    /// Signal of photodiode `pd` for an emitter at distance `d` (mm) and
    /// orientation `theta` (degrees).
    pub fn pd_response(&self, d: f64, theta: f64, pd: usize) -> Result<f64> {
        if pd >= N_PD {
            return Err(Error::InvalidParams(format!("photodiode index {pd} out of range")));
        }
        let p = self.params_at(d)?;
        Ok(pseudo_voigt_unchecked(theta, self.layout.pd_angles[pd], &p))
    }

    /// All eight signals at `(d, theta)`.
    pub fn responses(&self, d: f64, theta: f64) -> Result<[f64; N_PD]> {
        let p = self.params_at(d)?;
        Ok(self.responses_with(&p, theta))
    }

    /// All eight signals for precomputed parameters.
    #[inline]
    pub fn responses_with(&self, p: &PVParams, theta: f64) -> [f64; N_PD] {
        let mut out = [0.0; N_PD];
        for (o, &center) in out.iter_mut().zip(&self.layout.pd_angles) {
            *o = pseudo_voigt_unchecked(theta, center, p);
        }
        out
    }

    /// Largest single-photodiode signal over the domain, sampled every 1 mm.
    pub fn global_peak(&self) -> Result<f64> {
        let [lo, hi] = self.domain;
        let n = ((hi - lo).ceil() as usize).max(1);
        let mut best = f64::NEG_INFINITY;
        for k in 0..=n {
            let d = lo + (hi - lo) * k as f64 / n as f64;
            let p = self.params_at(d)?;
            best = best.max(p.y0 + p.peak_height().max(0.0));
        }
        Ok(best)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDoc {
            version: MODEL_FORMAT_VERSION,
            design: self.design(),
            domain: self.domain,
            curves: CurvesDoc {
                y0: self.y0.to_doc(),
                area: self.area.to_doc(),
                m_u: self.m_u.to_doc(),
                w: self.w.to_doc(),
            },
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        if doc.version != MODEL_FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                doc.version
            )));
        }
        let c = &doc.curves;
        Self::new(
            doc.design,
            doc.domain,
            ParamCurve::from_doc(&c.y0, doc.domain)?,
            ParamCurve::from_doc(&c.area, doc.domain)?,
            ParamCurve::from_doc(&c.m_u, doc.domain)?,
            ParamCurve::from_doc(&c.w, doc.domain)?,
        )
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    version: u32,
    design: Design,
    domain: [f64; 2],
    curves: CurvesDoc,
}

#[derive(Serialize, Deserialize)]
struct CurvesDoc {
    y0: CurveDoc,
    #[serde(rename = "A")]
    area: CurveDoc,
    m_u: CurveDoc,
    w: CurveDoc,
}

/// Free-function form of [`ResponseModel::pd_response`].
pub fn pd_response(model: &ResponseModel, d: f64, theta: f64, pd: usize) -> Result<f64> {
    model.pd_response(d, theta, pd)
}
