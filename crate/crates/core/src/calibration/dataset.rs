use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::response::{DEFAULT_DOMAIN_MM, N_PD};
use crate::{wrap_deg, Design, Error, Result};

/// Whether the emitter's light reached the sensor unobstructed or past one
/// of the mirror-support posts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    Free,
    Post,
}

impl std::fmt::Display for PathKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PathKind::Free => "free",
            PathKind::Post => "post",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub d_mm: f64,
    pub theta_deg: f64,
    pub signals: [f64; N_PD],
}

/// Signals recorded over a grid of distances and orientations.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepDataset {
    design: Design,
    path: PathKind,
    records: Vec<SweepRecord>,
    d_step: f64,
    arc_step: f64,
}

impl SweepDataset {
    /// Validates every record; orientations are wrapped to `[0, 360)`.
    pub fn new(
        design: Design,
        path: PathKind,
        mut records: Vec<SweepRecord>,
        d_step: f64,
        arc_step: f64,
    ) -> Result<Self> {
        let [lo, hi] = DEFAULT_DOMAIN_MM;
        for (i, r) in records.iter_mut().enumerate() {
            if !(r.d_mm.is_finite() && r.theta_deg.is_finite()) || r.signals.iter().any(|s| !s.is_finite()) {
                return Err(Error::InvalidParams(format!("record {i}: non-finite value")));
            }
            if r.d_mm < lo || r.d_mm > hi {
                return Err(Error::InvalidParams(format!(
                    "record {i}: d = {} mm outside [{lo}, {hi}]",
                    r.d_mm
                )));
            }
            r.theta_deg = wrap_deg(r.theta_deg);
        }
        if !(d_step > 0.0 && arc_step > 0.0) {
            return Err(Error::InvalidParams("grid steps must be positive".into()));
        }
        Ok(Self {
            design,
            path,
            records,
            d_step,
            arc_step,
        })
    }

    pub fn design(&self) -> Design {
        self.design
    }

    pub fn path(&self) -> PathKind {
        self.path
    }

    pub fn records(&self) -> &[SweepRecord] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distance step of the acquisition grid, mm.
    pub fn d_step(&self) -> f64 {
        self.d_step
    }

    /// Arc length between neighbouring orientations, mm.
    pub fn arc_step(&self) -> f64 {
        self.arc_step
    }

    /// Distinct distances in ascending order.
    pub fn distances(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.records.iter().map(|r| r.d_mm).collect();
        d.sort_by(f64::total_cmp);
        d.dedup();
        d
    }

    /// Copy with every recorded orientation shifted by `delta` degrees.
    pub fn rotated(&self, delta: f64) -> Self {
        let mut out = self.clone();
        for r in &mut out.records {
            r.theta_deg = wrap_deg(r.theta_deg + delta);
        }
        out
    }

    /// Writes the records as CSV with a header line.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_csv(std::slice::from_ref(self), w)
    }

    /// Reads a sweep CSV. Rows are grouped into one dataset per
    /// `(design, path)` pair, in order of first appearance.
    pub fn read_csv<R: Read>(r: R, d_step: f64, arc_step: f64) -> Result<Vec<SweepDataset>> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut groups: Vec<(Design, PathKind, Vec<SweepRecord>)> = Vec::new();
        for (line, row) in reader.deserialize::<CsvRow>().enumerate() {
            let row = row?;
            let rec = row.record();
            if !(rec.d_mm.is_finite() && rec.theta_deg.is_finite()) || rec.signals.iter().any(|s| !s.is_finite()) {
                return Err(Error::Parse(format!("row {}: NaN or infinite value", line + 2)));
            }
            match groups.iter_mut().find(|(d, p, _)| *d == row.design && *p == row.path) {
                Some(g) => g.2.push(rec),
                None => groups.push((row.design, row.path, vec![rec])),
            }
        }
        groups
            .into_iter()
            .map(|(design, path, recs)| SweepDataset::new(design, path, recs, d_step, arc_step))
            .collect()
    }
}

/// Writes several datasets into a single CSV.
pub fn write_csv<W: Write>(datasets: &[SweepDataset], w: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    for ds in datasets {
        for r in &ds.records {
            writer.serialize(CsvRow::from_record(ds.design, ds.path, r))?;
        }
    }
    writer.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    design: Design,
    path: PathKind,
    d_mm: f64,
    theta_deg: f64,
    #[serde(rename = "S0")]
    s0: f64,
    #[serde(rename = "S1")]
    s1: f64,
    #[serde(rename = "S2")]
    s2: f64,
    #[serde(rename = "S3")]
    s3: f64,
    #[serde(rename = "S4")]
    s4: f64,
    #[serde(rename = "S5")]
    s5: f64,
    #[serde(rename = "S6")]
    s6: f64,
    #[serde(rename = "S7")]
    s7: f64,
}

impl CsvRow {
    fn from_record(design: Design, path: PathKind, r: &SweepRecord) -> Self {
        let s = r.signals;
        Self {
            design,
            path,
            d_mm: r.d_mm,
            theta_deg: r.theta_deg,
            s0: s[0],
            s1: s[1],
            s2: s[2],
            s3: s[3],
            s4: s[4],
            s5: s[5],
            s6: s[6],
            s7: s[7],
        }
    }

    fn record(&self) -> SweepRecord {
        SweepRecord {
            d_mm: self.d_mm,
            theta_deg: self.theta_deg,
            signals: [self.s0, self.s1, self.s2, self.s3, self.s4, self.s5, self.s6, self.s7],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SweepDataset {
        let records = vec![
            SweepRecord { d_mm: 70.0, theta_deg: 0.0, signals: [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0] },
            SweepRecord { d_mm: 80.0, theta_deg: 359.5, signals: [0.5; 8] },
        ];
        SweepDataset::new(Design::Flower, PathKind::Post, records, 10.0, 10.0).unwrap()
    }

    #[test]
    fn csv_round_trip() {
        let ds = sample();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("design,path,d_mm,theta_deg,S0,S1,S2,S3,S4,S5,S6,S7\n"));
        assert!(text.contains("flower,post,70.0,0.0,1.0"));
        let back = SweepDataset::read_csv(buf.as_slice(), 10.0, 10.0).unwrap();
        assert_eq!(back, vec![ds]);
    }

    #[test]
    fn csv_groups_by_path() {
        let text = "design,path,d_mm,theta_deg,S0,S1,S2,S3,S4,S5,S6,S7\n\
                    vertical,free,70,0,1,1,1,1,1,1,1,1\n\
                    vertical,post,70,0,2,2,2,2,2,2,2,2\n\
                    vertical,free,80,10,1,1,1,1,1,1,1,1\n";
        let sets = SweepDataset::read_csv(text.as_bytes(), 10.0, 10.0).unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[0].path(), PathKind::Free);
        assert_eq!(sets[0].records().len(), 2);
        assert_eq!(sets[1].records()[0].signals[0], 2.0);
    }

    #[test]
    fn csv_rejects_nan() {
        let text = "design,path,d_mm,theta_deg,S0,S1,S2,S3,S4,S5,S6,S7\n\
                    vertical,free,70,0,1,NaN,1,1,1,1,1,1\n";
        assert!(matches!(SweepDataset::read_csv(text.as_bytes(), 10.0, 10.0), Err(Error::Parse(_))));
    }

    #[test]
    fn csv_rejects_short_rows() {
        let text = "design,path,d_mm,theta_deg,S0,S1,S2,S3,S4,S5,S6,S7\nvertical,free,70,0,1,1\n";
        assert!(SweepDataset::read_csv(text.as_bytes(), 10.0, 10.0).is_err());
    }

    #[test]
    fn validation() {
        let bad = SweepRecord { d_mm: 20.0, theta_deg: 0.0, signals: [0.0; 8] };
        assert!(SweepDataset::new(Design::Vertical, PathKind::Free, vec![bad], 10.0, 10.0).is_err());
        let wrapped = SweepRecord { d_mm: 100.0, theta_deg: -90.0, signals: [0.0; 8] };
        let ds = SweepDataset::new(Design::Vertical, PathKind::Free, vec![wrapped], 10.0, 10.0).unwrap();
        assert_eq!(ds.records()[0].theta_deg, 270.0);
        assert_eq!(sample().distances(), vec![70.0, 80.0]);
    }
}
