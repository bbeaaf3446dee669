//! Mean absolute localization errors per distance and design comparison.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::localization::{Localizer, PoseEstimate, SweepSpec};
use crate::response::{NoiseSpec, Pose, ResponseModel, Synthesizer};
use crate::{Design, Error, Result};

/// Smallest angle between two orientations, degrees in `[0, 180]`.
pub fn angular_error(a: f64, b: f64) -> f64 {
    let r = (a - b).abs().rem_euclid(360.0);
    r.min(360.0 - r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngularMode {
    /// Shortest way round the circle.
    #[default]
    Circular,
    /// Plain `|θ̂ − θ|`, which reports up to 360° across the seam.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaeRow {
    pub d_mm: f64,
    pub n_theta: usize,
    pub d_mae_mm: f64,
    pub theta_mae_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub datasets: Vec<String>,
    pub noise: NoiseSpec,
    pub seeds: Vec<u64>,
    pub angular_mode: AngularMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaeReport {
    pub design: Design,
    pub rows: Vec<MaeRow>,
    pub provenance: Provenance,
}

impl MaeReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Largest over smallest per-row orientation MAE.
    pub fn theta_mae_spread(&self) -> f64 {
        let lo = self.rows.iter().map(|r| r.theta_mae_deg).fold(f64::INFINITY, f64::min);
        let hi = self.rows.iter().map(|r| r.theta_mae_deg).fold(f64::NEG_INFINITY, f64::max);
        hi / lo
    }
}

/// Groups estimates by true distance and averages the absolute errors.
pub fn mae_over_sweep(
    estimates: &[(PoseEstimate, Option<Pose>)],
    design: Design,
    mode: AngularMode,
) -> Result<MaeReport> {
    let mut pairs = Vec::with_capacity(estimates.len());
    for (i, (e, truth)) in estimates.iter().enumerate() {
        let t = truth.ok_or(Error::MissingTruth { index: i })?;
        let th = match mode {
            AngularMode::Circular => angular_error(e.theta_deg, t.theta_deg),
            AngularMode::Raw => (e.theta_deg - t.theta_deg).abs(),
        };
        pairs.push((t.d_mm, (e.d_mm - t.d_mm).abs(), th));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rows: Vec<MaeRow> = Vec::new();
    let mut i = 0;
    while i < pairs.len() {
        let d = pairs[i].0;
        let group: Vec<_> = pairs[i..].iter().take_while(|p| p.0 == d).collect();
        let n = group.len();
        rows.push(MaeRow {
            d_mm: d,
            n_theta: n,
            d_mae_mm: group.iter().map(|p| p.1).sum::<f64>() / n as f64,
            theta_mae_deg: group.iter().map(|p| p.2).sum::<f64>() / n as f64,
        });
        i += n;
    }
    Ok(MaeReport {
        design,
        rows,
        provenance: Provenance {
            angular_mode: mode,
            ..Provenance::default()
        },
    })
}

/// Synthesizes a readout at every grid pose from `model`, localizes it with
/// the same model and reports the MAE per distance.
pub fn closed_loop_eval(model: &ResponseModel, noise: NoiseSpec, grid: &SweepSpec, seed: u64) -> Result<MaeReport> {
    closed_loop_eval_split(model, model, noise, grid, seed)
}

/// Like [`closed_loop_eval`] but readouts come from `truth` and are inverted
/// with `estimator`, e.g. a model calibrated from `truth`'s sweeps.
///
/// Each distance row draws from its own stream of the seeded generator, so
/// the result does not depend on how rows are scheduled across threads.
pub fn closed_loop_eval_split(
    truth: &ResponseModel,
    estimator: &ResponseModel,
    noise: NoiseSpec,
    grid: &SweepSpec,
    seed: u64,
) -> Result<MaeReport> {
    closed_loop_eval_with(truth, estimator, noise, grid, seed, AngularMode::Circular)
}

/// [`closed_loop_eval_split`] with an explicit orientation error convention.
pub fn closed_loop_eval_with(
    truth: &ResponseModel,
    estimator: &ResponseModel,
    noise: NoiseSpec,
    grid: &SweepSpec,
    seed: u64,
    mode: AngularMode,
) -> Result<MaeReport> {
    if truth.design() != estimator.design() {
        return Err(Error::Precondition("truth and estimator models are for different designs".into()));
    }
    grid.validate_for(truth)?;
    let synth = Synthesizer::new(truth, noise)?;
    let loc = Localizer::new(estimator, &SweepSpec::for_model(estimator))?;
    let rows: Vec<(usize, f64)> = grid.distances().enumerate().collect();

    let run_row = |&(idx, d): &(usize, f64)| -> Result<Vec<(PoseEstimate, Option<Pose>)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(idx as u64);
        grid.angles_at(d)
            .map(|t| {
                let r = synth.readout(d, t, &mut rng)?;
                Ok((loc.localize(&r)?, r.truth))
            })
            .collect()
    };

    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(rows.len().max(1));
    let chunk = rows.len().div_ceil(threads).max(1);
    let results: Vec<Result<Vec<_>>> = std::thread::scope(|s| {
        let handles: Vec<_> = rows
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(run_row).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("evaluation worker panicked")).collect()
    });
    let mut all = Vec::with_capacity(grid.grid_len());
    for r in results {
        all.extend(r?);
    }

    let mut report = mae_over_sweep(&all, truth.design(), mode)?;
    report.provenance.noise = noise;
    report.provenance.seeds = vec![seed];
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub d_mm: f64,
    pub d_mae_a: f64,
    pub d_mae_b: f64,
    /// `a − b`.
    pub d_delta: f64,
    pub theta_mae_a: f64,
    pub theta_mae_b: f64,
    pub theta_delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WinCount {
    pub a: usize,
    pub b: usize,
    pub ties: usize,
}

impl WinCount {
    fn record(&mut self, a: f64, b: f64) {
        if a < b {
            self.a += 1;
        } else if b < a {
            self.b += 1;
        } else {
            self.ties += 1;
        }
    }

    /// Fraction of rows where `a` is at least as good as `b`.
    pub fn a_fraction(&self) -> f64 {
        let n = self.a + self.b + self.ties;
        (self.a + self.ties) as f64 / n as f64
    }

    pub fn b_fraction(&self) -> f64 {
        let n = self.a + self.b + self.ties;
        (self.b + self.ties) as f64 / n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub a: Design,
    pub b: Design,
    pub rows: Vec<ComparisonRow>,
    pub distance_wins: WinCount,
    pub orientation_wins: WinCount,
    /// Design with strictly more distance wins, if any.
    pub distance_winner: Option<Design>,
    pub orientation_winner: Option<Design>,
}

impl ComparisonSummary {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn winner(w: &WinCount, a: Design, b: Design) -> Option<Design> {
    match w.a.cmp(&w.b) {
        std::cmp::Ordering::Greater => Some(a),
        std::cmp::Ordering::Less => Some(b),
        std::cmp::Ordering::Equal => None,
    }
}

/// Row-by-row comparison of two reports over the same distances.
pub fn compare_designs(a: &MaeReport, b: &MaeReport) -> Result<ComparisonSummary> {
    if a.rows.len() != b.rows.len() || a.rows.iter().zip(&b.rows).any(|(x, y)| x.d_mm != y.d_mm) {
        return Err(Error::GridMismatch(format!(
            "{} rows vs {} rows with differing distances",
            a.rows.len(),
            b.rows.len()
        )));
    }
    let mut dw = WinCount::default();
    let mut tw = WinCount::default();
    let rows = a
        .rows
        .iter()
        .zip(&b.rows)
        .map(|(x, y)| {
            dw.record(x.d_mae_mm, y.d_mae_mm);
            tw.record(x.theta_mae_deg, y.theta_mae_deg);
            ComparisonRow {
                d_mm: x.d_mm,
                d_mae_a: x.d_mae_mm,
                d_mae_b: y.d_mae_mm,
                d_delta: x.d_mae_mm - y.d_mae_mm,
                theta_mae_a: x.theta_mae_deg,
                theta_mae_b: y.theta_mae_deg,
                theta_delta: x.theta_mae_deg - y.theta_mae_deg,
            }
        })
        .collect();
    Ok(ComparisonSummary {
        a: a.design,
        b: b.design,
        rows,
        distance_wins: dw,
        orientation_wins: tw,
        distance_winner: winner(&dw, a.design, b.design),
        orientation_winner: winner(&tw, a.design, b.design),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localization::SweepStage;
    use crate::synthetic::reference_model;
    use proptest::prelude::*;

    fn est(d: f64, t: f64) -> PoseEstimate {
        PoseEstimate { d_mm: d, theta_deg: t, chi_sq: 0.0, stage: SweepStage::Fine }
    }

    fn truth(d: f64, t: f64) -> Option<Pose> {
        Some(Pose { d_mm: d, theta_deg: t })
    }

    #[test]
    fn angular_error_examples() {
        assert_eq!(angular_error(10.0, 350.0), 20.0);
        assert_eq!(angular_error(42.0, 42.0), 0.0);
        assert_eq!(angular_error(0.0, 180.0), 180.0);
        assert_eq!(angular_error(-30.0, 30.0), 60.0);
    }

    proptest! {
        #[test]
        fn angular_error_properties(a in -1000.0f64..1000.0, b in -1000.0f64..1000.0, k in -3i32..3) {
            let e = angular_error(a, b);
            prop_assert!((0.0..=180.0).contains(&e));
            prop_assert_eq!(e, angular_error(b, a));
            prop_assert!(angular_error(a, a + 360.0 * k as f64) < 1e-9);
        }
    }

    #[test]
    fn mae_arithmetic() {
        let perfect = vec![(est(100.0, 10.0), truth(100.0, 10.0)), (est(200.0, 5.0), truth(200.0, 5.0))];
        let r = mae_over_sweep(&perfect, Design::Flower, AngularMode::Circular).unwrap();
        assert!(r.rows.iter().all(|row| row.d_mae_mm == 0.0 && row.theta_mae_deg == 0.0));
        assert_eq!(r.rows.len(), 2);

        let one = vec![(est(104.0, 0.0), truth(100.0, 0.0))];
        assert_eq!(mae_over_sweep(&one, Design::Flower, AngularMode::Circular).unwrap().rows[0].d_mae_mm, 4.0);

        let two = vec![(est(100.0, 11.0), truth(100.0, 10.0)), (est(100.0, 17.0), truth(100.0, 20.0))];
        let r = mae_over_sweep(&two, Design::Vertical, AngularMode::Circular).unwrap();
        assert_eq!(r.rows[0].theta_mae_deg, 2.0);
        assert_eq!(r.rows[0].n_theta, 2);
    }

    #[test]
    fn raw_mode_sees_the_seam() {
        let seam = vec![(est(100.0, 359.0), truth(100.0, 1.0))];
        let c = mae_over_sweep(&seam, Design::Flower, AngularMode::Circular).unwrap();
        let r = mae_over_sweep(&seam, Design::Flower, AngularMode::Raw).unwrap();
        assert_eq!(c.rows[0].theta_mae_deg, 2.0);
        assert_eq!(r.rows[0].theta_mae_deg, 358.0);
    }

    #[test]
    fn missing_truth() {
        let v = vec![(est(100.0, 0.0), truth(100.0, 0.0)), (est(100.0, 0.0), None)];
        assert!(matches!(
            mae_over_sweep(&v, Design::Flower, AngularMode::Circular),
            Err(Error::MissingTruth { index: 1 })
        ));
    }

    fn report(design: Design, rows: &[(f64, f64, f64)]) -> MaeReport {
        MaeReport {
            design,
            rows: rows
                .iter()
                .map(|&(d, dm, tm)| MaeRow { d_mm: d, n_theta: 1, d_mae_mm: dm, theta_mae_deg: tm })
                .collect(),
            provenance: Provenance::default(),
        }
    }

    #[test]
    fn comparison_deltas_and_wins() {
        let a = report(Design::Vertical, &[(100.0, 1.0, 5.0), (200.0, 2.0, 6.0), (300.0, 3.0, 2.0)]);
        let b = report(Design::Flower, &[(100.0, 1.5, 3.0), (200.0, 4.0, 3.0), (300.0, 3.0, 3.0)]);
        let same = compare_designs(&a, &a).unwrap();
        assert!(same.rows.iter().all(|r| r.d_delta == 0.0 && r.theta_delta == 0.0));
        let s = compare_designs(&a, &b).unwrap();
        assert_eq!(s.rows.iter().map(|r| r.d_delta).collect::<Vec<_>>(), vec![-0.5, -2.0, 0.0]);
        assert_eq!(s.rows.iter().map(|r| r.theta_delta).collect::<Vec<_>>(), vec![2.0, 3.0, -1.0]);
        assert_eq!(s.distance_wins, WinCount { a: 2, b: 0, ties: 1 });
        assert_eq!(s.distance_winner, Some(Design::Vertical));
        assert_eq!(s.orientation_winner, Some(Design::Flower));
        let c = report(Design::Flower, &[(100.0, 1.0, 1.0)]);
        assert!(matches!(compare_designs(&a, &c), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn exports() {
        let a = report(Design::Vertical, &[(100.0, 1.0, 5.0)]);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "d_mm,n_theta,d_mae_mm,theta_mae_deg\n100.0,1,1.0,5.0\n");
        assert!(a.to_json().unwrap().contains("\"theta_mae_deg\": 5.0"));
    }

    #[test]
    fn closed_loop_noiseless_bound_and_reproducible() {
        let spec = SweepSpec { d_step: 60.0, arc_step: 60.0, ..SweepSpec::default() };
        for design in [Design::Vertical, Design::Flower] {
            let m = reference_model(design);
            let r = closed_loop_eval(&m, NoiseSpec::None, &spec, 1).unwrap();
            assert_eq!(r.rows.len(), spec.distances().count());
            for row in &r.rows {
                assert!(row.d_mae_mm <= 2.0, "{design}: {row:?}");
                assert!(row.theta_mae_deg <= (2.0 / row.d_mm).to_degrees(), "{design}: {row:?}");
            }
            let noisy = NoiseSpec::gaussian(0.02).unwrap();
            assert_eq!(closed_loop_eval(&m, noisy, &spec, 9).unwrap(), closed_loop_eval(&m, noisy, &spec, 9).unwrap());
        }
    }
}
