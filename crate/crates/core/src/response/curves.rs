use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Functional forms used for the distance dependence of the pseudo-Voigt
/// parameters. Distances are in mm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveFamily {
    /// `A2 + (A1 - A2) / (1 + (d/d0)^p)`
    Logistic,
    /// `A0 + A1 exp(-d/t1) + A2 exp(-d/t2)`
    ExpDecay2,
    /// `A0 + 2 A1 w1 / (π (4 (d - d0)^2 + w1^2))`
    Lorentz,
    /// `A0 + A1 / sqrt(2π w1² d²) · exp(-(ln(d/d0))² / (2 w1²))`
    LogNormal,
    /// `A0 + A1 exp(-d/t1)`
    ExpDecay1,
    /// `a (1 - exp(-b d))^c`
    Chapman,
    /// `(b + c d) / (1 + a d)`
    Rational,
}

impl CurveFamily {
    pub const ALL: [CurveFamily; 7] = [
        CurveFamily::Logistic,
        CurveFamily::ExpDecay2,
        CurveFamily::Lorentz,
        CurveFamily::LogNormal,
        CurveFamily::ExpDecay1,
        CurveFamily::Chapman,
        CurveFamily::Rational,
    ];

    /// Coefficient names in storage order.
    pub fn coefficient_names(self) -> &'static [&'static str] {
        match self {
            CurveFamily::Logistic => &["A1", "A2", "d0", "p"],
            CurveFamily::ExpDecay2 => &["A0", "A1", "t1", "A2", "t2"],
            CurveFamily::Lorentz => &["A0", "A1", "w1", "d0"],
            CurveFamily::LogNormal => &["A0", "A1", "d0", "w1"],
            CurveFamily::ExpDecay1 => &["A0", "A1", "t1"],
            CurveFamily::Chapman => &["a", "b", "c"],
            CurveFamily::Rational => &["a", "b", "c"],
        }
    }

    pub fn arity(self) -> usize {
        self.coefficient_names().len()
    }

    /// Indices of coefficients that must be strictly positive.
    pub fn positive_indices(self) -> &'static [usize] {
        match self {
            CurveFamily::Logistic => &[2],
            CurveFamily::ExpDecay2 => &[2, 4],
            CurveFamily::Lorentz => &[2],
            CurveFamily::LogNormal => &[2, 3],
            CurveFamily::ExpDecay1 => &[2],
            CurveFamily::Chapman | CurveFamily::Rational => &[],
        }
    }

    /// Evaluates the family without validating `c`; may return NaN or ±inf.
    #[inline]
    pub fn eval_raw(self, c: &[f64], d: f64) -> f64 {
        match self {
            CurveFamily::Logistic => c[1] + (c[0] - c[1]) / (1.0 + (d / c[2]).powf(c[3])),
            CurveFamily::ExpDecay2 => c[0] + c[1] * (-d / c[2]).exp() + c[3] * (-d / c[4]).exp(),
            CurveFamily::Lorentz => {
                let x = d - c[3];
                c[0] + 2.0 * c[1] * c[2] / (PI * (4.0 * x * x + c[2] * c[2]))
            }
            CurveFamily::LogNormal => {
                let l = (d / c[2]).ln();
                c[0] + c[1] / (2.0 * PI * c[3] * c[3] * d * d).sqrt()
                    * (-(l * l) / (2.0 * c[3] * c[3])).exp()
            }
            CurveFamily::ExpDecay1 => c[0] + c[1] * (-d / c[2]).exp(),
            CurveFamily::Chapman => c[0] * (1.0 - (-c[1] * d).exp()).powf(c[2]),
            CurveFamily::Rational => (c[1] + c[2] * d) / (1.0 + c[0] * d),
        }
    }

    /// Whether `d` is an admissible argument for this family.
    fn accepts(self, c: &[f64], d: f64) -> bool {
        match self {
            CurveFamily::Logistic | CurveFamily::LogNormal => d > 0.0,
            CurveFamily::Rational => 1.0 + c[0] * d != 0.0,
            CurveFamily::Chapman => 1.0 - (-c[1] * d).exp() >= 0.0 || c[2].fract() == 0.0,
            _ => true,
        }
    }
}

impl std::fmt::Display for CurveFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            CurveFamily::Logistic => "logistic",
            CurveFamily::ExpDecay2 => "exp-decay2",
            CurveFamily::Lorentz => "lorentz",
            CurveFamily::LogNormal => "log-normal",
            CurveFamily::ExpDecay1 => "exp-decay1",
            CurveFamily::Chapman => "chapman",
            CurveFamily::Rational => "rational",
        };
        f.write_str(name)
    }
}

/// One fitted distance-dependence curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamCurve {
    family: CurveFamily,
    coeffs: Vec<f64>,
    domain: [f64; 2],
}

impl ParamCurve {
    pub fn new(family: CurveFamily, coeffs: Vec<f64>, domain: [f64; 2]) -> Result<Self> {
        if coeffs.len() != family.arity() {
            return Err(Error::InvalidParams(format!(
                "{family} takes {} coefficients, got {}",
                family.arity(),
                coeffs.len()
            )));
        }
        if !coeffs.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidParams(format!("{family}: non-finite coefficient")));
        }
        for &i in family.positive_indices() {
            if coeffs[i] <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "{family}: {} must be positive, got {}",
                    family.coefficient_names()[i],
                    coeffs[i]
                )));
            }
        }
        if !(domain[0] < domain[1] && domain.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidParams(format!("invalid curve domain {domain:?}")));
        }
        Ok(Self {
            family,
            coeffs,
            domain,
        })
    }

    pub fn family(&self) -> CurveFamily {
        self.family
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn domain(&self) -> [f64; 2] {
        self.domain
    }

    pub fn contains(&self, d: f64) -> bool {
        d >= self.domain[0] && d <= self.domain[1]
    }

    /// Value at distance `d` (mm). Outside the domain the formula is
    /// extrapolated; check [`ParamCurve::contains`] to flag it.
    pub fn eval(&self, d: f64) -> Result<f64> {
        if !d.is_finite() || !self.family.accepts(&self.coeffs, d) {
            return Err(Error::InvalidParams(format!("{} undefined at d = {d}", self.family)));
        }
        let v = self.family.eval_raw(&self.coeffs, d);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidParams(format!("{} not finite at d = {d}", self.family)))
        }
    }

    /// `(value, extrapolated)`.
    pub fn eval_flagged(&self, d: f64) -> Result<(f64, bool)> {
        Ok((self.eval(d)?, !self.contains(d)))
    }

    pub(crate) fn with_domain(mut self, domain: [f64; 2]) -> Self {
        self.domain = domain;
        self
    }

    pub(crate) fn to_doc(&self) -> CurveDoc {
        CurveDoc {
            family: self.family,
            coeffs: self
                .family
                .coefficient_names()
                .iter()
                .zip(&self.coeffs)
                .map(|(n, v)| (n.to_string(), *v))
                .collect(),
        }
    }

    pub(crate) fn from_doc(doc: &CurveDoc, domain: [f64; 2]) -> Result<Self> {
        let names = doc.family.coefficient_names();
        if doc.coeffs.len() != names.len() {
            return Err(Error::Parse(format!(
                "{} expects coefficients {:?}",
                doc.family, names
            )));
        }
        let coeffs = names
            .iter()
            .map(|n| {
                doc.coeffs
                    .get(*n)
                    .copied()
                    .ok_or_else(|| Error::Parse(format!("{} is missing coefficient {n}", doc.family)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(doc.family, coeffs, domain)
    }
}

/// Serialized form: `{family, coeffs: {name: value}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct CurveDoc {
    pub family: CurveFamily,
    pub coeffs: BTreeMap<String, f64>,
}

/// Free-function form of [`ParamCurve::eval`].
pub fn eval_param_curve(curve: &ParamCurve, d: f64) -> Result<f64> {
    curve.eval(d)
}
