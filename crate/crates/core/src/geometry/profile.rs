use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Maximum mismatch between adjacent branches at a breakpoint. The published
/// coefficients are rounded to five decimals and only meet to this level.
pub const BREAKPOINT_TOLERANCE_CM: f64 = 2e-3;

/// One cubic piece `a3 x^3 + a2 x^2 + a1 x + a0` valid on `[x_lo, x_hi]` (cm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicSegment {
    pub a3: f64,
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
    pub x_lo: f64,
    pub x_hi: f64,
}

impl CubicSegment {
    pub fn new(a3: f64, a2: f64, a1: f64, a0: f64, x_lo: f64, x_hi: f64) -> Result<Self> {
        let seg = Self {
            a3,
            a2,
            a1,
            a0,
            x_lo,
            x_hi,
        };
        seg.validate()?;
        Ok(seg)
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.a3, self.a2, self.a1, self.a0, self.x_lo, self.x_hi]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParams("non-finite segment coefficient".into()));
        }
        if self.x_lo >= self.x_hi {
            return Err(Error::InvalidParams(format!(
                "segment bounds must satisfy x_lo < x_hi (got [{}, {}])",
                self.x_lo, self.x_hi
            )));
        }
        Ok(())
    }

    /// The raw polynomial, without any domain check.
    #[inline]
    pub fn poly(&self, x: f64) -> f64 {
        ((self.a3 * x + self.a2) * x + self.a1) * x + self.a0
    }

    /// Derivative of [`CubicSegment::poly`].
    #[inline]
    pub fn poly_slope(&self, x: f64) -> f64 {
        (3.0 * self.a3 * x + 2.0 * self.a2) * x + self.a1
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_lo && x <= self.x_hi
    }
}

/// Which published mirror surface a profile describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProfileKind {
    /// Emitter stage of the vertical design (reflects the LED cone outward).
    #[serde(rename = "vertical-stage1")]
    VerticalStage1,
    /// Receiver stage of the vertical design (focuses incoming light on the PD ring).
    #[serde(rename = "vertical-stage2")]
    VerticalStage2,
    /// Single-stage mirror of the flower design.
    #[serde(rename = "flower")]
    Flower,
}

impl ProfileKind {
    pub const ALL: [ProfileKind; 3] = [
        ProfileKind::VerticalStage1,
        ProfileKind::VerticalStage2,
        ProfileKind::Flower,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProfileKind::VerticalStage1 => "vertical-stage1",
            ProfileKind::VerticalStage2 => "vertical-stage2",
            ProfileKind::Flower => "flower",
        }
    }
}

impl std::str::FromStr for ProfileKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProfileKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::Parse(format!("unknown profile `{s}`")))
    }
}

/// Transverse section of a rotationally symmetric mirror: height `z` (cm) as
/// a piecewise cubic of the radial coordinate `x` (cm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileDoc", into = "ProfileDoc")]
pub struct MirrorProfile {
    kind: ProfileKind,
    segments: Vec<CubicSegment>,
}

#[derive(Serialize, Deserialize)]
struct ProfileDoc {
    design: ProfileKind,
    segments: Vec<CubicSegment>,
}

impl TryFrom<ProfileDoc> for MirrorProfile {
    type Error = Error;

    fn try_from(doc: ProfileDoc) -> Result<Self> {
        MirrorProfile::new(doc.design, doc.segments)
    }
}

impl From<MirrorProfile> for ProfileDoc {
    fn from(p: MirrorProfile) -> Self {
        ProfileDoc {
            design: p.kind,
            segments: p.segments,
        }
    }
}

impl MirrorProfile {
    /// Builds a profile, checking that the segments tile their domain and
    /// meet within [`BREAKPOINT_TOLERANCE_CM`] at each breakpoint.
    pub fn new(kind: ProfileKind, segments: Vec<CubicSegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidParams("a profile needs at least one segment".into()));
        }
        for seg in &segments {
            seg.validate()?;
        }
        for pair in segments.windows(2) {
            let (left, right) = (&pair[0], &pair[1]);
            if left.x_hi != right.x_lo {
                return Err(Error::InvalidParams(format!(
                    "segments must tile the domain: gap or overlap between {} and {}",
                    left.x_hi, right.x_lo
                )));
            }
            let jump = (left.poly(left.x_hi) - right.poly(right.x_lo)).abs();
            if jump > BREAKPOINT_TOLERANCE_CM {
                return Err(Error::InvalidParams(format!(
                    "discontinuity of {jump:.3e} cm at breakpoint x = {}",
                    left.x_hi
                )));
            }
        }
        Ok(Self { kind, segments })
    }

    /// Emitter stage of the vertical design, `x ∈ [0, 0.5]` cm.
    pub fn vertical_stage1() -> Self {
        Self::published(ProfileKind::VerticalStage1)
    }

    /// Receiver stage of the vertical design, `x ∈ [0.69, 2.04]` cm.
    pub fn vertical_stage2() -> Self {
        Self::published(ProfileKind::VerticalStage2)
    }

    /// Flower design mirror, `x ∈ [0, 0.89]` cm.
    pub fn flower() -> Self {
        Self::published(ProfileKind::Flower)
    }

    pub fn published(kind: ProfileKind) -> Self {
        let seg = |a3, a2, a1, a0, lo, hi| CubicSegment {
            a3,
            a2,
            a1,
            a0,
            x_lo: lo,
            x_hi: hi,
        };
        let segments = match kind {
            ProfileKind::VerticalStage1 => vec![
                seg(2.81723, -0.20831, 0.42261, 1.99992, 0.0, 0.2),
                seg(0.05936, 2.24342, -0.24885, 2.05736, 0.2, 0.5),
            ],
            ProfileKind::VerticalStage2 => vec![
                seg(-0.02294, 0.04687, 0.8554, 1.89499, 0.69, 1.36),
                seg(0.02182, -0.1388, 1.1057, 1.78547, 1.36, 2.04),
            ],
            ProfileKind::Flower => vec![
                seg(0.4127, -0.07673, 0.37849, 1.99975, 0.0, 0.48),
                seg(-0.33283, 1.04336, -0.1781, 2.09135, 0.48, 0.89),
            ],
        };
        Self { kind, segments }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn segments(&self) -> &[CubicSegment] {
        &self.segments
    }

    /// `(x_min, x_max)` in cm.
    pub fn domain(&self) -> (f64, f64) {
        (self.segments[0].x_lo, self.segments[self.segments.len() - 1].x_hi)
    }

    /// Active segment for `x`: strict `x < breakpoint` selects the left
    /// branch, so a breakpoint itself belongs to the right branch.
    pub fn segment_at(&self, x: f64) -> Result<&CubicSegment> {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&x) {
            return Err(Error::Domain { x, lo, hi });
        }
        let last = self.segments.len() - 1;
        Ok(self.segments[..last]
            .iter()
            .find(|s| x < s.x_hi)
            .unwrap_or(&self.segments[last]))
    }

    /// Mirror height at radial position `x`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(self.segment_at(x)?.poly(x))
    }

    /// `dz/dx` at radial position `x`.
    pub fn slope(&self, x: f64) -> Result<f64> {
        Ok(self.segment_at(x)?.poly_slope(x))
    }

    /// `(breakpoint, |left − right|)` for each internal breakpoint.
    pub fn breakpoint_mismatches(&self) -> Vec<(f64, f64)> {
        self.segments
            .windows(2)
            .map(|p| {
                let xb = p[0].x_hi;
                (xb, (p[0].poly(xb) - p[1].poly(xb)).abs())
            })
            .collect()
    }

    /// Evaluation clamped into the domain; used by root bracketing where the
    /// ray parameter can overshoot the domain edge by rounding.
    pub(crate) fn eval_clamped(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain();
        let x = x.clamp(lo, hi);
        match self.segment_at(x) {
            Ok(seg) => seg.poly(x),
            Err(_) => unreachable!("clamped x lies in the domain"),
        }
    }
}

/// Free-function form of [`MirrorProfile::eval`].
pub fn eval_profile(profile: &MirrorProfile, x: f64) -> Result<f64> {
    profile.eval(x)
}

/// Free-function form of [`MirrorProfile::slope`].
pub fn profile_slope(profile: &MirrorProfile, x: f64) -> Result<f64> {
    profile.slope(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn published_constant_terms() {
        assert_abs_diff_eq!(MirrorProfile::vertical_stage1().eval(0.0).unwrap(), 1.99992);
        assert_abs_diff_eq!(MirrorProfile::flower().eval(0.0).unwrap(), 1.99975);
        // stage 2 lives on [0.69, 2.04]; its left cubic still carries the constant
        let stage2 = MirrorProfile::vertical_stage2();
        assert_abs_diff_eq!(stage2.segments()[0].poly(0.0), 1.89499);
        assert!(matches!(stage2.eval(0.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn left_branch_at_stage1_breakpoint() {
        // 2.81723·0.008 − 0.20831·0.04 + 0.42261·0.2 + 1.99992 = 2.09864744
        let p = MirrorProfile::vertical_stage1();
        assert_abs_diff_eq!(p.segments()[0].poly(0.2), 2.09864744, epsilon = 1e-12);
        assert_abs_diff_eq!(p.segments()[0].poly(0.2), 2.09865, epsilon = 1e-5);
        // at the breakpoint itself the right branch applies
        assert_abs_diff_eq!(p.eval(0.2).unwrap(), p.segments()[1].poly(0.2));
    }

    #[test]
    fn published_slopes_at_origin() {
        assert_abs_diff_eq!(MirrorProfile::vertical_stage1().slope(0.0).unwrap(), 0.42261);
        assert_abs_diff_eq!(MirrorProfile::flower().slope(0.0).unwrap(), 0.37849);
    }

    #[test]
    fn breakpoints_within_tolerance() {
        for kind in ProfileKind::ALL {
            let p = MirrorProfile::published(kind);
            // same checks the validating constructor runs
            MirrorProfile::new(kind, p.segments().to_vec()).unwrap();
            for (_, gap) in p.breakpoint_mismatches() {
                assert!(gap <= BREAKPOINT_TOLERANCE_CM, "{kind:?}: {gap}");
            }
        }
    }

    #[test]
    fn slope_matches_central_difference() {
        let h = 1e-5;
        for kind in ProfileKind::ALL {
            let p = MirrorProfile::published(kind);
            for seg in p.segments() {
                for k in 0..100 {
                    // interior points only, away from the branch switch
                    let x = seg.x_lo + (seg.x_hi - seg.x_lo) * (k as f64 + 0.5) / 100.0;
                    let fd = (seg.poly(x + h) - seg.poly(x - h)) / (2.0 * h);
                    assert!((p.slope(x).unwrap() - fd).abs() <= 1e-6, "{kind:?} at {x}");
                }
            }
        }
    }

    #[test]
    fn out_of_domain_is_rejected() {
        let p = MirrorProfile::flower();
        assert!(matches!(p.eval(-0.01), Err(Error::Domain { .. })));
        assert!(matches!(p.slope(0.9), Err(Error::Domain { .. })));
        assert!(p.eval(0.89).is_ok());
    }

    #[test]
    fn rejects_gaps_and_jumps() {
        let a = CubicSegment::new(0.0, 0.0, 0.0, 1.0, 0.0, 1.0).unwrap();
        let gap = CubicSegment::new(0.0, 0.0, 0.0, 1.0, 1.1, 2.0).unwrap();
        let jump = CubicSegment::new(0.0, 0.0, 0.0, 1.01, 1.0, 2.0).unwrap();
        assert!(MirrorProfile::new(ProfileKind::Flower, vec![a, gap]).is_err());
        assert!(MirrorProfile::new(ProfileKind::Flower, vec![a, jump]).is_err());
        assert!(CubicSegment::new(0.0, 0.0, 0.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let p = MirrorProfile::vertical_stage2();
        let text = p.to_json().unwrap();
        assert!(text.contains("\"vertical-stage2\""));
        assert_eq!(MirrorProfile::from_json(&text).unwrap(), p);
        let bad = r#"{"design":"flower","segments":[{"a3":0,"a2":0,"a1":0,"a0":1,"x_lo":1,"x_hi":0}]}"#;
        assert!(MirrorProfile::from_json(bad).is_err());
    }
}
