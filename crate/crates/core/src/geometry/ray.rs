use nalgebra::Vector2;
use serde::Serialize;

use super::profile::MirrorProfile;
use crate::{Error, Result};

/// Number of sub-intervals used to bracket a ray/profile crossing.
const BRACKETS: usize = 64;
/// Rays start this far along their parameter to avoid re-hitting their origin.
const T_START: f64 = 1e-9;
/// Sample count when testing a reflected ray against the absorbing section.
const OCCLUSION_SAMPLES: usize = 512;

/// A 2D ray in the transverse `(x, z)` plane, cm. The direction is unit length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ray2D {
    pub origin: Vector2<f64>,
    pub direction: Vector2<f64>,
}

impl Ray2D {
    pub fn new(origin: Vector2<f64>, direction: Vector2<f64>) -> Result<Self> {
        let norm = direction.norm();
        if !(norm.is_finite() && norm > 0.0) || !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParams("ray needs a finite origin and non-zero direction".into()));
        }
        Ok(Self {
            origin,
            direction: direction / norm,
        })
    }

    /// Ray leaving `origin` at `angle_deg` from the +z axis, positive toward +x.
    pub fn from_vertical_angle(origin: Vector2<f64>, angle_deg: f64) -> Self {
        let a = angle_deg.to_radians();
        Self {
            origin,
            direction: Vector2::new(a.sin(), a.cos()),
        }
    }

    pub fn at(&self, t: f64) -> Vector2<f64> {
        self.origin + self.direction * t
    }

    /// Parameter at which the ray crosses height `z`, if it does so ahead of its origin.
    pub fn t_at_height(&self, z: f64) -> Option<f64> {
        if self.direction.y == 0.0 {
            return None;
        }
        let t = (z - self.origin.y) / self.direction.y;
        (t > 0.0).then_some(t)
    }

    fn mirrored(&self) -> Self {
        Self {
            origin: Vector2::new(-self.origin.x, self.origin.y),
            direction: Vector2::new(-self.direction.x, self.direction.y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Reflection {
    Hit {
        point: Vector2<f64>,
        outgoing: Ray2D,
    },
    Miss,
}

impl Reflection {
    pub fn hit(&self) -> Option<(Vector2<f64>, Ray2D)> {
        match *self {
            Reflection::Hit { point, outgoing } => Some((point, outgoing)),
            Reflection::Miss => None,
        }
    }
}

/// First crossing of `ray` with the profile graph, as `(t, point)`.
pub fn intersect(ray: &Ray2D, profile: &MirrorProfile) -> Option<(f64, Vector2<f64>)> {
    let (lo, hi) = profile.domain();
    let (o, d) = (ray.origin, ray.direction);

    if d.x.abs() < 1e-15 {
        if !(lo..=hi).contains(&o.x) || d.y == 0.0 {
            return None;
        }
        let t = (profile.eval_clamped(o.x) - o.y) / d.y;
        return (t > T_START).then(|| (t, ray.at(t)));
    }

    let ta = (lo - o.x) / d.x;
    let tb = (hi - o.x) / d.x;
    let t0 = ta.min(tb).max(T_START);
    let t1 = ta.max(tb);
    if t1 <= t0 {
        return None;
    }

    let gap = |t: f64| o.y + t * d.y - profile.eval_clamped(o.x + t * d.x);
    let step = (t1 - t0) / BRACKETS as f64;
    let mut t_prev = t0;
    let mut f_prev = gap(t0);
    if f_prev == 0.0 {
        return Some((t0, ray.at(t0)));
    }
    for k in 1..=BRACKETS {
        let t = if k == BRACKETS { t1 } else { t0 + step * k as f64 };
        let f = gap(t);
        if f == 0.0 {
            return Some((t, ray.at(t)));
        }
        if f.signum() != f_prev.signum() {
            let t_hit = bisect(&gap, t_prev, t, f_prev);
            return Some((t_hit, ray.at(t_hit)));
        }
        t_prev = t;
        f_prev = f;
    }
    None
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Specular reflection of `direction` off a surface with slope `dz/dx`.
pub fn specular(direction: Vector2<f64>, slope: f64) -> Vector2<f64> {
    let n = Vector2::new(-slope, 1.0) / (1.0 + slope * slope).sqrt();
    let r = direction - n * (2.0 * direction.dot(&n));
    r / r.norm()
}

/// Traces `ray` to the profile and reflects it about the local normal.
pub fn reflect_ray(ray: &Ray2D, profile: &MirrorProfile) -> Reflection {
    match intersect(ray, profile) {
        None => Reflection::Miss,
        Some((_, point)) => {
            let (lo, hi) = profile.domain();
            let slope = profile
                .slope(point.x.clamp(lo, hi))
                .expect("clamped x lies in the domain");
            Reflection::Hit {
                point,
                outgoing: Ray2D {
                    origin: point,
                    direction: specular(ray.direction, slope),
                },
            }
        }
    }
}

/// Full transverse section of a mirror: curved stages joined by straight
/// walls. Anything above the section surface is solid and absorbs light.
#[derive(Debug, Clone, PartialEq)]
pub struct MirrorSection {
    stages: Vec<MirrorProfile>,
}

impl MirrorSection {
    pub fn new(mut stages: Vec<MirrorProfile>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidParams("a section needs at least one stage".into()));
        }
        stages.sort_by(|a, b| a.domain().0.total_cmp(&b.domain().0));
        for pair in stages.windows(2) {
            if pair[0].domain().1 > pair[1].domain().0 {
                return Err(Error::InvalidParams("mirror stages overlap".into()));
            }
        }
        Ok(Self { stages })
    }

    pub fn vertical() -> Self {
        Self {
            stages: vec![MirrorProfile::vertical_stage1(), MirrorProfile::vertical_stage2()],
        }
    }

    pub fn flower() -> Self {
        Self {
            stages: vec![MirrorProfile::flower()],
        }
    }

    pub fn stages(&self) -> &[MirrorProfile] {
        &self.stages
    }

    pub fn radial_extent(&self) -> (f64, f64) {
        (self.stages[0].domain().0, self.stages[self.stages.len() - 1].domain().1)
    }

    /// Section height at radial distance `r`, or `None` outside the mirror.
    pub fn surface(&self, r: f64) -> Option<f64> {
        for (i, stage) in self.stages.iter().enumerate() {
            let (lo, hi) = stage.domain();
            if (lo..=hi).contains(&r) {
                return stage.eval(r).ok();
            }
            if let Some(next) = self.stages.get(i + 1) {
                let (nlo, _) = next.domain();
                if r > hi && r < nlo {
                    let (z0, z1) = (stage.eval_clamped(hi), next.eval_clamped(nlo));
                    return Some(z0 + (z1 - z0) * (r - hi) / (nlo - hi));
                }
            }
        }
        None
    }

    /// Whether a ray leaving the mirror surface enters the solid section.
    pub fn blocks(&self, ray: &Ray2D) -> bool {
        let (_, r_max) = self.radial_extent();
        let dx = ray.direction.x.abs();
        if dx < 1e-15 {
            return self.surface(ray.origin.x.abs()).is_some() && ray.direction.y > 0.0;
        }
        let t_end = (r_max + ray.origin.x.abs()) / dx;
        (1..=OCCLUSION_SAMPLES).any(|k| {
            let p = ray.at(t_end * k as f64 / OCCLUSION_SAMPLES as f64);
            self.surface(p.x.abs()).is_some_and(|z| p.y - z > 1e-9)
        })
    }
}

/// Emission fan configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FanSpec {
    pub n_rays: usize,
    pub half_angle_deg: f64,
    /// LED focal point `(x, z)` in cm, expected on or near the axis.
    pub source: Vector2<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FanRay {
    /// Launch angle from vertical; negative angles head toward −x.
    pub launch_deg: f64,
    /// Emitted ray expressed in the +x half-plane.
    pub emitted: Ray2D,
    pub hit: Option<Vector2<f64>>,
    pub outgoing: Option<Ray2D>,
    /// Reflected but absorbed by another part of the section.
    pub blocked: bool,
}

impl FanRay {
    pub fn is_live(&self) -> bool {
        self.outgoing.is_some() && !self.blocked
    }

    /// Radial distance at which the reflected ray crosses height `z`.
    pub fn crossing_at_height(&self, z: f64) -> Option<f64> {
        if self.blocked {
            return None;
        }
        let out = self.outgoing?;
        let t = out.t_at_height(z)?;
        Some(out.at(t).x.abs())
    }

    /// Breakpoints of the ray path in true `(x, z)` coordinates; the last leg
    /// is extended by `tail` cm (or to `z_stop` when it is crossed).
    pub fn polyline(&self, tail: f64, z_stop: Option<f64>) -> Vec<Vector2<f64>> {
        let sign = if self.launch_deg < 0.0 { -1.0 } else { 1.0 };
        let flip = |p: Vector2<f64>| Vector2::new(sign * p.x, p.y);
        let mut pts = vec![flip(self.emitted.origin)];
        match (self.hit, self.outgoing) {
            (Some(hit), Some(out)) => {
                pts.push(flip(hit));
                if !self.blocked {
                    let t = z_stop
                        .and_then(|z| out.t_at_height(z))
                        .map_or(tail, |t| t.min(tail));
                    pts.push(flip(out.at(t)));
                }
            }
            _ => pts.push(flip(self.emitted.at(tail))),
        }
        pts
    }
}

/// Radial span covered by a reflected fan at one receiver height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialSpan {
    pub r_min: f64,
    pub r_max: f64,
    pub crossings: usize,
    /// Crossing rays form a single run when ordered by launch angle
    /// magnitude, i.e. the covered band has no hole.
    pub contiguous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FanReport {
    pub spec: FanSpec,
    pub rays: Vec<FanRay>,
}

impl FanReport {
    pub fn hits(&self) -> usize {
        self.rays.iter().filter(|r| r.hit.is_some()).count()
    }

    pub fn live(&self) -> usize {
        self.rays.iter().filter(|r| r.is_live()).count()
    }

    pub fn radial_range_at_height(&self, z: f64) -> Option<RadialSpan> {
        let mut order: Vec<&FanRay> = self.rays.iter().collect();
        order.sort_by(|a, b| a.launch_deg.abs().total_cmp(&b.launch_deg.abs()));

        let mut r_min = f64::INFINITY;
        let mut r_max = f64::NEG_INFINITY;
        let mut crossings = 0;
        let mut runs = 0;
        let mut in_run = false;
        for ray in order {
            match ray.crossing_at_height(z) {
                Some(r) => {
                    r_min = r_min.min(r);
                    r_max = r_max.max(r);
                    crossings += 1;
                    if !in_run {
                        runs += 1;
                        in_run = true;
                    }
                }
                None => in_run = false,
            }
        }
        (crossings > 0).then_some(RadialSpan {
            r_min,
            r_max,
            crossings,
            contiguous: runs == 1,
        })
    }
}

fn launch_angles(n: usize, half_angle_deg: f64) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| -half_angle_deg + 2.0 * half_angle_deg * k as f64 / (n - 1) as f64)
}

/// Traces `n_rays` spread uniformly over `±half_angle` about the vertical
/// from the LED source and reflects each off `profile`.
pub fn trace_emission_fan(profile: &MirrorProfile, spec: &FanSpec) -> Result<FanReport> {
    trace_fan(profile, spec, None)
}

/// As [`trace_emission_fan`], additionally absorbing reflected rays that run
/// into any part of `section` (other stages or connecting walls).
pub fn trace_emission_fan_in(
    section: &MirrorSection,
    emitter: &MirrorProfile,
    spec: &FanSpec,
) -> Result<FanReport> {
    trace_fan(emitter, spec, Some(section))
}

fn trace_fan(
    profile: &MirrorProfile,
    spec: &FanSpec,
    section: Option<&MirrorSection>,
) -> Result<FanReport> {
    if spec.n_rays < 2 {
        return Err(Error::Precondition("a fan needs at least 2 rays".into()));
    }
    if !(spec.half_angle_deg >= 0.0 && spec.half_angle_deg < 90.0) {
        return Err(Error::InvalidParams(format!(
            "fan half-angle must lie in [0, 90) degrees, got {}",
            spec.half_angle_deg
        )));
    }
    let rays: Vec<FanRay> = launch_angles(spec.n_rays, spec.half_angle_deg)
        .map(|launch_deg| {
            let mut emitted = Ray2D::from_vertical_angle(spec.source, launch_deg);
            if launch_deg < 0.0 {
                // solid of revolution: trace the −x half in mirror image
                emitted = emitted.mirrored();
            }
            let (hit, outgoing) = match reflect_ray(&emitted, profile).hit() {
                Some((p, out)) => (Some(p), Some(out)),
                None => (None, None),
            };
            let blocked = match (section, outgoing) {
                (Some(sec), Some(out)) => sec.blocks(&out),
                _ => false,
            };
            FanRay {
                launch_deg,
                emitted,
                hit,
                outgoing,
                blocked,
            }
        })
        .collect();

    let report = FanReport { spec: *spec, rays };
    let hits = report.hits();
    if hits < 2 {
        return Err(Error::InsufficientHits { hits });
    }
    Ok(report)
}
