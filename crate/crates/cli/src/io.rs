use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};

use omnisense::response::{Readout, N_PD};

/// Writes `path` through a temporary file in the same directory followed by
/// a rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating temp file in {}", dir.display()))?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf)?;
        buf.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, |w| {
        w.write_all(text.as_bytes())?;
        if !text.ends_with('\n') {
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

/// Parses one readout given as eight comma-separated numbers.
pub fn parse_readout(text: &str) -> Result<Readout> {
    let values: Vec<f64> = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("`{}` is not a number", v.trim())))
        .collect::<Result<_>>()?;
    Ok(Readout::from_slice(&values)?)
}

/// Reads readouts from CSV. With a header, the columns `S0`..`S7` are used
/// and `d_mm`/`theta_deg`, when present, become ground truth; without one,
/// every row must hold exactly eight numbers.
pub fn read_readouts(path: &Path) -> Result<Vec<Readout>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let has_header = first.split(',').any(|f| f.trim().parse::<f64>().is_err());
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let (cols, truth_cols) = if has_header {
        let h = rdr.headers()?.clone();
        let find = |name: &str| h.iter().position(|c| c.eq_ignore_ascii_case(name));
        let cols: Vec<usize> = (0..N_PD)
            .map(|i| find(&format!("S{i}")).with_context(|| format!("{}: missing column S{i}", path.display())))
            .collect::<Result<_>>()?;
        (cols, find("d_mm").zip(find("theta_deg")))
    } else {
        ((0..N_PD).collect(), None)
    };

    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if !has_header && rec.len() != N_PD {
            bail!("{}: row {} has {} fields, expected {N_PD}", path.display(), row + 1, rec.len());
        }
        let num = |i: usize| -> Result<f64> {
            let f = rec.get(i).with_context(|| format!("{}: row {} is short", path.display(), row + 1))?;
            f.parse::<f64>().with_context(|| format!("{}: row {}: `{f}` is not a number", path.display(), row + 1))
        };
        let values: Vec<f64> = cols.iter().map(|&i| num(i)).collect::<Result<_>>()?;
        let mut r = Readout::from_slice(&values).with_context(|| format!("{}: row {}", path.display(), row + 1))?;
        if let Some((di, ti)) = truth_cols {
            r = r.with_truth(num(di)?, num(ti)?);
        }
        out.push(r);
    }
    if out.is_empty() {
        bail!("{}: no readouts", path.display());
    }
    Ok(out)
}
