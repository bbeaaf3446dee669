use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::model::{ResponseModel, N_PD};
use crate::{Error, Result};

/// True emitter pose, distance in mm and orientation in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub d_mm: f64,
    pub theta_deg: f64,
}

/// One set of eight photodiode signals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    pub signals: [f64; N_PD],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Pose>,
}

impl Readout {
    pub fn new(signals: [f64; N_PD]) -> Result<Self> {
        let r = Self {
            signals,
            truth: None,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn with_truth(mut self, d_mm: f64, theta_deg: f64) -> Self {
        self.truth = Some(Pose { d_mm, theta_deg });
        self
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let signals: [f64; N_PD] = values.try_into().map_err(|_| {
            Error::DimensionMismatch(format!("readout needs {N_PD} signals, got {}", values.len()))
        })?;
        Self::new(signals)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.signals.iter().enumerate() {
            if !s.is_finite() || *s < 0.0 {
                return Err(Error::InvalidParams(format!("signal S{i} = {s} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// Cyclic relabelling: `out[(i + k) mod 8] = signals[i]`. Equivalent to
    /// turning the emitter by `k·45°`. The truth, if any, is dropped.
    pub fn rotated(&self, k: i64) -> Self {
        let mut out = [0.0; N_PD];
        let k = k.rem_euclid(N_PD as i64) as usize;
        for (i, s) in self.signals.iter().enumerate() {
            out[(i + k) % N_PD] = *s;
        }
        Self {
            signals: out,
            truth: None,
        }
    }
}

/// Additive readout noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    #[default]
    None,
    /// Zero-mean Gaussian with σ as a fraction of the model's global peak.
    Gaussian { sigma_frac: f64 },
}

impl NoiseSpec {
    pub fn gaussian(sigma_frac: f64) -> Result<Self> {
        if !(sigma_frac.is_finite() && sigma_frac >= 0.0) {
            return Err(Error::InvalidParams(format!("noise fraction must be >= 0, got {sigma_frac}")));
        }
        Ok(NoiseSpec::Gaussian { sigma_frac })
    }

    pub fn sigma_frac(&self) -> f64 {
        match self {
            NoiseSpec::None => 0.0,
            NoiseSpec::Gaussian { sigma_frac } => *sigma_frac,
        }
    }
}

/// Generates readouts from a model. Caches the absolute noise level so
/// sweeps do not rescan the model.
#[derive(Debug, Clone)]
pub struct Synthesizer<'m> {
    model: &'m ResponseModel,
    normal: Option<Normal<f64>>,
}

impl<'m> Synthesizer<'m> {
    pub fn new(model: &'m ResponseModel, noise: NoiseSpec) -> Result<Self> {
        let sigma = noise.sigma_frac();
        let normal = if sigma > 0.0 {
            let abs = sigma * model.global_peak()?;
            Some(Normal::new(0.0, abs).map_err(|e| Error::InvalidParams(e.to_string()))?)
        } else {
            None
        };
        Ok(Self { model, normal })
    }

    /// Absolute noise standard deviation in signal units.
    pub fn sigma(&self) -> f64 {
        self.normal.map_or(0.0, |n| n.std_dev())
    }

    pub fn readout<R: Rng + ?Sized>(&self, d: f64, theta: f64, rng: &mut R) -> Result<Readout> {
        let mut signals = self.model.responses(d, theta)?;
        if let Some(n) = &self.normal {
            for s in signals.iter_mut() {
                *s += n.sample(rng);
            }
        }
        for s in signals.iter_mut() {
            *s = s.max(0.0);
        }
        Ok(Readout {
            signals,
            truth: Some(Pose {
                d_mm: d,
                theta_deg: theta,
            }),
        })
    }
}

/// Synthesizes one readout at `(d, theta)`.
pub fn synthesize_readout<R: Rng + ?Sized>(
    model: &ResponseModel,
    d: f64,
    theta: f64,
    noise: NoiseSpec,
    rng: &mut R,
) -> Result<Readout> {
    Synthesizer::new(model, noise)?.readout(d, theta, rng)
}

/// Sum of the eight signals.
pub fn accumulated_signal(r: &Readout) -> f64 {
    r.signals.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::reference_model;
    use crate::Design;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_is_exact() {
        let m = reference_model(Design::Vertical);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = synthesize_readout(&m, 180.0, 77.0, NoiseSpec::None, &mut rng).unwrap();
        for i in 0..8 {
            assert_eq!(r.signals[i], m.pd_response(180.0, 77.0, i).unwrap());
        }
        assert_eq!(r.truth, Some(Pose { d_mm: 180.0, theta_deg: 77.0 }));
    }

    #[test]
    fn seeded_noise_is_deterministic() {
        let m = reference_model(Design::Flower);
        let noise = NoiseSpec::gaussian(0.02).unwrap();
        let a = synthesize_readout(&m, 250.0, 10.0, noise, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = synthesize_readout(&m, 250.0, 10.0, noise, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        let c = synthesize_readout(&m, 250.0, 10.0, noise, &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noise_mean_is_unbiased() {
        let m = reference_model(Design::Vertical);
        let noise = NoiseSpec::gaussian(0.01).unwrap();
        let synth = Synthesizer::new(&m, noise).unwrap();
        let sigma = synth.sigma();
        let truth = m.responses(150.0, 200.0).unwrap();
        // keep clamping out of play so the mean is that of the raw normal
        assert!(truth.iter().all(|&s| s > 6.0 * sigma));
        let n = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut sums = [0.0; 8];
        for _ in 0..n {
            let r = synth.readout(150.0, 200.0, &mut rng).unwrap();
            for (s, v) in sums.iter_mut().zip(r.signals) {
                *s += v;
            }
        }
        // 4 standard errors: eight simultaneous checks
        for i in 0..8 {
            let mean = sums[i] / n as f64;
            assert!((mean - truth[i]).abs() <= 4.0 * sigma / (n as f64).sqrt(), "PD {i}");
        }
    }

    #[test]
    fn negative_values_are_clamped() {
        let m = reference_model(Design::Flower);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let r = synthesize_readout(&m, 450.0, 0.0, NoiseSpec::gaussian(0.5).unwrap(), &mut rng).unwrap();
            assert!(r.signals.iter().all(|&s| s >= 0.0));
        }
    }

    #[test]
    fn accumulated_signal_sums() {
        assert_eq!(accumulated_signal(&Readout::new([0.0; 8]).unwrap()), 0.0);
        assert_eq!(accumulated_signal(&Readout::new([1.0; 8]).unwrap()), 8.0);
    }

    #[test]
    fn vertical_accumulated_signal_is_more_homogeneous() {
        let ratio = |design| {
            let m = reference_model(design);
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for k in 0..360 {
                let s: f64 = m.responses(150.0, k as f64).unwrap().iter().sum();
                lo = lo.min(s);
                hi = hi.max(s);
            }
            (hi - lo) / hi
        };
        assert!(ratio(Design::Vertical) < ratio(Design::Flower));
    }

    #[test]
    fn rotation_and_validation() {
        let r = Readout::new([0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]).unwrap();
        assert_eq!(r.rotated(1).signals, [7.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(r.rotated(-1).rotated(1), r);
        assert_eq!(r.rotated(8), r);
        assert!(Readout::new([f64::NAN; 8]).is_err());
        assert!(Readout::from_slice(&[1.0; 7]).is_err());
    }
}
