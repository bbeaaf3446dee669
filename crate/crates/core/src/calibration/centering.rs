use serde::{Deserialize, Serialize};

use super::dataset::SweepDataset;
use super::nlls::nlls_fit;
use crate::response::{N_PD, PD_SPACING_DEG, THETA0_DEG};
use crate::{wrap_deg, wrap_deg_signed, Error, Result};

/// Largest offset [`center_signals`] accepts; beyond it the PD assignment
/// becomes ambiguous.
pub const MAX_OFFSET_DEG: f64 = 22.5;
pub const DEFAULT_BINS: usize = 40;

/// Rough peak orientation of one photodiode: circular mean of the angles
/// weighted by the squared signal excess over its minimum.
fn pooled_peak(ds: &SweepDataset, pd: usize) -> Option<f64> {
    let lo = ds.records().iter().map(|r| r.signals[pd]).fold(f64::INFINITY, f64::min);
    let (mut sx, mut sy) = (0.0, 0.0);
    for r in ds.records() {
        let w = (r.signals[pd] - lo).powi(2);
        let t = r.theta_deg.to_radians();
        sx += w * t.cos();
        sy += w * t.sin();
    }
    if sx == 0.0 && sy == 0.0 {
        None
    } else {
        Some(wrap_deg(sy.atan2(sx).to_degrees()))
    }
}

/// Angular offset of the whole sweep, degrees. A sweep whose peaks sit at
/// `45·i + 7°` has an offset of `+7°`.
///
/// The photodiode whose pooled peak lies closest to 180° is fitted with a
/// Gaussian on a constant baseline, pooling all distances with equal weight.
pub fn estimate_offset(ds: &SweepDataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::Precondition("cannot estimate an offset from an empty dataset".into()));
    }
    let mut best: Option<(usize, f64, f64)> = None;
    for pd in 0..N_PD {
        let Some(peak) = pooled_peak(ds, pd) else { continue };
        let miss = wrap_deg_signed(peak - THETA0_DEG).abs();
        if best.is_none_or(|(_, _, m)| miss < m) {
            best = Some((pd, peak, miss));
        }
    }
    let Some((pd, c0, _)) = best else {
        return Err(Error::DegenerateInput("all photodiode signals are flat".into()));
    };

    // unwrap angles into a window centred on the rough peak
    let x: Vec<f64> = ds.records().iter().map(|r| c0 + wrap_deg_signed(r.theta_deg - c0)).collect();
    let y: Vec<f64> = ds.records().iter().map(|r| r.signals[pd]).collect();
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gauss = |p: &[f64], t: &f64| p[0] + p[1] * (-(t - p[2]).powi(2) / (2.0 * p[3] * p[3])).exp();
    let failed = |reason: String| Error::FitFailed {
        target: "offset gaussian".into(),
        reason,
    };
    let fit = nlls_fit(
        gauss,
        &x,
        &y,
        &[lo, hi - lo, c0, 20.0],
        Some(&[
            (f64::NEG_INFINITY, f64::INFINITY),
            (0.0, f64::INFINITY),
            (c0 - 90.0, c0 + 90.0),
            (0.5, 360.0),
        ]),
    )
    .map_err(|e| failed(e.to_string()))?;
    if fit.params[1] <= 0.0 || !fit.params[2].is_finite() {
        return Err(failed("no peak above the baseline".into()));
    }
    Ok(wrap_deg_signed(fit.params[2] - pd as f64 * PD_SPACING_DEG))
}

/// Samples at one distance after centring every photodiode on 180°.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenteredDistance {
    pub d_mm: f64,
    /// `(θ_shifted, S)` pairs, θ in `[0, 360)`.
    pub samples: Vec<(f64, f64)>,
}

/// Centred samples for every distance, ascending in `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenteredSeries {
    pub distances: Vec<CenteredDistance>,
}

/// Removes `theta_off` and moves each photodiode's peak to 180° by the
/// appropriate multiple of 45°. Samples from `post` are pooled with `free`.
pub fn center_signals(free: &SweepDataset, post: Option<&SweepDataset>, theta_off: f64) -> Result<CenteredSeries> {
    if !(theta_off.abs() < MAX_OFFSET_DEG) {
        return Err(Error::Precondition(format!(
            "offset {theta_off}° exceeds ±{MAX_OFFSET_DEG}°"
        )));
    }
    let mut all: Vec<(f64, f64, f64)> = Vec::new();
    for ds in std::iter::once(free).chain(post) {
        for r in ds.records() {
            for (pd, s) in r.signals.iter().enumerate() {
                let shift = THETA0_DEG - pd as f64 * PD_SPACING_DEG;
                all.push((r.d_mm, wrap_deg(r.theta_deg - theta_off + shift), *s));
            }
        }
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut distances: Vec<CenteredDistance> = Vec::new();
    for (d, t, s) in all {
        match distances.last_mut() {
            Some(last) if last.d_mm == d => last.samples.push((t, s)),
            _ => distances.push(CenteredDistance {
                d_mm: d,
                samples: vec![(t, s)],
            }),
        }
    }
    Ok(CenteredSeries { distances })
}

/// One angular bin. Empty bins have `count == 0` and no mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean: Option<f64>,
    /// Angles of the member samples, ascending.
    #[serde(skip)]
    pub angles: Vec<f64>,
}

impl Bin {
    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Bin-averaged signal at one distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedProfile {
    pub d_mm: f64,
    pub bins: Vec<Bin>,
}

impl BinnedProfile {
    pub fn n_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn empty_bins(&self) -> usize {
        self.bins.iter().filter(|b| b.count == 0).count()
    }

    pub fn filled(&self) -> impl Iterator<Item = &Bin> {
        self.bins.iter().filter(|b| b.count > 0)
    }
}

/// Averages one distance's samples into `n_bins` equal bins over `[0, 360)`.
/// Bin `k` covers `[k·360/n, (k+1)·360/n)`.
pub fn bin_average(series: &CenteredDistance, n_bins: usize) -> Result<BinnedProfile> {
    if n_bins < 4 {
        return Err(Error::Precondition(format!("need at least 4 bins, got {n_bins}")));
    }
    let width = 360.0 / n_bins as f64;
    let mut members: Vec<Vec<(f64, f64)>> = vec![Vec::new(); n_bins];
    for &(t, s) in &series.samples {
        let k = ((wrap_deg(t) / width).floor() as usize).min(n_bins - 1);
        members[k].push((t, s));
    }
    let bins = members
        .into_iter()
        .enumerate()
        .map(|(k, mut m)| {
            // fixed summation order makes the mean independent of input order
            m.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            let count = m.len();
            let mean = (count > 0).then(|| m.iter().map(|p| p.1).sum::<f64>() / count as f64);
            Bin {
                lo: k as f64 * width,
                hi: (k + 1) as f64 * width,
                count,
                mean,
                angles: m.into_iter().map(|p| p.0).collect(),
            }
        })
        .collect();
    Ok(BinnedProfile {
        d_mm: series.d_mm,
        bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::dataset::{PathKind, SweepRecord};
    use crate::localization::SweepSpec;
    use crate::response::NoiseSpec;
    use crate::synthetic::{reference_model, synthesize_sweep};
    use crate::Design;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sweep(design: Design, rotation: f64) -> SweepDataset {
        let m = reference_model(design);
        let spec = SweepSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        synthesize_sweep(&m, &spec, PathKind::Free, NoiseSpec::None, rotation, &mut rng).unwrap()
    }

    #[test]
    fn centred_sweep_has_no_offset() {
        for design in [Design::Vertical, Design::Flower] {
            let off = estimate_offset(&sweep(design, 0.0)).unwrap();
            // grid resolution at the closest distance is 360/44 degrees
            assert!(off.abs() < 360.0 / 44.0, "{design}: {off}");
            assert!(off.abs() < 0.5, "{design}: {off}");
        }
    }

    #[test]
    fn rotated_sweep_offsets() {
        for design in [Design::Vertical, Design::Flower] {
            let plus = estimate_offset(&sweep(design, 7.0)).unwrap();
            let minus = estimate_offset(&sweep(design, -7.0)).unwrap();
            assert!((plus - 7.0).abs() < 0.5, "{design}: {plus}");
            assert!((minus + 7.0).abs() < 0.5, "{design}: {minus}");
        }
    }

    #[test]
    fn centred_peaks_sit_at_180() {
        let ds = sweep(Design::Flower, 0.0);
        let series = center_signals(&ds, None, 0.0).unwrap();
        for dist in &series.distances {
            let step = 360.0 / (2.0 * std::f64::consts::PI * dist.d_mm / 10.0).round();
            let (peak_t, _) = dist.samples.iter().copied().fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            assert!((peak_t - 180.0).abs() <= step + 1e-9, "d={} peak at {peak_t}", dist.d_mm);
            assert!(dist.samples.iter().all(|(t, _)| (0.0..360.0).contains(t)));
        }
    }

    #[test]
    fn pooling_identical_post_keeps_means() {
        let free = sweep(Design::Vertical, 0.0);
        let post = SweepDataset::new(Design::Vertical, PathKind::Post, free.records().to_vec(), 10.0, 10.0).unwrap();
        let a = center_signals(&free, None, 0.0).unwrap();
        let b = center_signals(&free, Some(&post), 0.0).unwrap();
        for (x, y) in a.distances.iter().zip(&b.distances) {
            assert_eq!(y.samples.len(), 2 * x.samples.len());
            let bx = bin_average(x, 40).unwrap();
            let by = bin_average(y, 40).unwrap();
            for (p, q) in bx.bins.iter().zip(&by.bins) {
                match (p.mean, q.mean) {
                    (Some(u), Some(v)) => assert!((u - v).abs() <= 1e-12 * u.abs()),
                    (None, None) => {}
                    _ => panic!("bin occupancy differs"),
                }
            }
        }
    }

    #[test]
    fn empty_post_equals_free_only() {
        let free = sweep(Design::Flower, 0.0);
        let post = SweepDataset::new(Design::Flower, PathKind::Post, vec![], 10.0, 10.0).unwrap();
        assert_eq!(center_signals(&free, Some(&post), 0.0).unwrap(), center_signals(&free, None, 0.0).unwrap());
    }

    #[test]
    fn relabelled_rotation_gives_same_series() {
        let ds = sweep(Design::Vertical, 0.0);
        for k in 1..8usize {
            let recs: Vec<SweepRecord> = ds
                .records()
                .iter()
                .map(|r| {
                    let mut s = [0.0; 8];
                    for i in 0..8 {
                        s[(i + k) % 8] = r.signals[i];
                    }
                    SweepRecord { d_mm: r.d_mm, theta_deg: r.theta_deg + 45.0 * k as f64, signals: s }
                })
                .collect();
            let rot = SweepDataset::new(Design::Vertical, PathKind::Free, recs, 10.0, 10.0).unwrap();
            let a = center_signals(&ds, None, 0.0).unwrap();
            let b = center_signals(&rot, None, 0.0).unwrap();
            for (x, y) in a.distances.iter().zip(&b.distances) {
                let mut xs = x.samples.clone();
                let mut ys = y.samples.clone();
                let key = |p: &(f64, f64), q: &(f64, f64)| p.1.total_cmp(&q.1).then(p.0.total_cmp(&q.0));
                xs.sort_by(key);
                ys.sort_by(key);
                for (p, q) in xs.iter().zip(&ys) {
                    assert_eq!(p.1, q.1);
                    assert!(wrap_deg_signed(p.0 - q.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn large_offset_rejected() {
        let ds = sweep(Design::Flower, 0.0);
        assert!(center_signals(&ds, None, 30.0).is_err());
    }

    fn series(samples: Vec<(f64, f64)>) -> CenteredDistance {
        CenteredDistance { d_mm: 100.0, samples }
    }

    #[test]
    fn binning_basics() {
        let c = bin_average(&series((0..360).map(|t| (t as f64, 4.5)).collect()), 40).unwrap();
        assert_eq!(c.n_bins(), 40);
        assert!(c.bins.iter().all(|b| b.mean == Some(4.5)));

        let one = bin_average(&series(vec![(0.0, 1.0)]), 40).unwrap();
        assert_eq!(one.bins[0].count, 1);
        assert_eq!(one.empty_bins(), 39);
        assert!(one.bins[1].mean.is_none());

        let two = bin_average(&series(vec![(3.0, 5.0), (4.0, 15.0)]), 40).unwrap();
        assert_eq!(two.bins[0].mean, Some(10.0));
        assert!(bin_average(&series(vec![]), 3).is_err());
    }

    proptest! {
        #[test]
        fn binning_is_permutation_invariant(
            samples in prop::collection::vec((0.0f64..360.0, -1e3f64..1e3), 1..200),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let mut shuffled = samples.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let a = bin_average(&series(samples), 40).unwrap();
            let b = bin_average(&series(shuffled), 40).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
