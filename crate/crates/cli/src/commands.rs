use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use omnisense::calibration::{calibrate as run_calibration, BinModel, CalibrateOptions, PathKind, SweepDataset};
use omnisense::evaluation::{closed_loop_eval_with, compare_designs, AngularMode, MaeReport};
use omnisense::geometry::{
    trace_emission_fan, trace_emission_fan_in, MirrorProfile, MirrorSection, MountGeometry, ProfileKind,
};
use omnisense::localization::{Localizer, SweepSpec};
use omnisense::response::{NoiseSpec, ResponseModel};
use omnisense::synthetic::{reference_model, synthesize_sweep};
use omnisense::{Design, Error};

use crate::config::{existing, require, RunConfig, SweepConfig};
use crate::io::{parse_readout, read_readouts, write_atomic, write_text};
use crate::{CalibrateArgs, CompareArgs, EvaluateArgs, LocalizeArgs, SweepArgs, SynthesizeArgs, TraceArgs};

const MM_PER_CM: f64 = 10.0;
/// Length of the drawn outgoing leg when it never reaches the receiver height, cm.
const POLYLINE_TAIL_CM: f64 = 60.0;
const DEFAULT_SEED: u64 = 0;

fn sweep_spec(flags: &SweepArgs, cfg: &SweepConfig, domain: [f64; 2]) -> Result<SweepSpec> {
    let def = SweepSpec::default();
    let spec = SweepSpec {
        d_range: [
            flags.d_min.or(cfg.d_min).unwrap_or(domain[0]),
            flags.d_max.or(cfg.d_max).unwrap_or(domain[1]),
        ],
        d_step: flags.d_step.or(cfg.d_step).unwrap_or(def.d_step),
        arc_step: flags.arc_step.or(cfg.arc_step).unwrap_or(def.arc_step),
        theta_range: None,
    };
    spec.validate()?;
    Ok(spec)
}

fn noise_spec(flag: Option<f64>, cfg: Option<f64>) -> Result<NoiseSpec> {
    match flag.or(cfg) {
        None => Ok(NoiseSpec::None),
        Some(0.0) => Ok(NoiseSpec::None),
        Some(f) => Ok(NoiseSpec::gaussian(f)?),
    }
}

fn load_model(path: &Path) -> Result<ResponseModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
    ResponseModel::from_json(&text).with_context(|| format!("loading model {}", path.display()))
}

#[derive(Serialize)]
struct SpanMm {
    r_min_mm: f64,
    r_max_mm: f64,
    crossings: usize,
    contiguous: bool,
}

#[derive(Serialize)]
struct TraceSummary {
    profile: String,
    half_angle_deg: f64,
    n_rays: usize,
    hits: usize,
    live: usize,
    source_height_mm: f64,
    receiver_height_mm: f64,
    span_at_receiver: Option<SpanMm>,
}

pub fn trace(cfg: &RunConfig, a: TraceArgs) -> Result<()> {
    let fan = &cfg.fan;
    let name = require(a.profile, fan.profile.clone(), "profile")?;
    let (profile, section) = match name.parse::<ProfileKind>() {
        Ok(kind) => {
            let section = match kind {
                ProfileKind::VerticalStage1 => Some(MirrorSection::vertical()),
                ProfileKind::Flower => Some(MirrorSection::flower()),
                ProfileKind::VerticalStage2 => None,
            };
            (MirrorProfile::published(kind), section)
        }
        Err(_) if Path::new(&name).is_file() => {
            let text = std::fs::read_to_string(&name)?;
            (MirrorProfile::from_json(&text).with_context(|| format!("loading profile {name}"))?, None)
        }
        Err(e) => bail!("{e} (expected vertical-stage1, vertical-stage2, flower or a profile JSON file)"),
    };

    let mut mount = MountGeometry::default_for(profile.kind());
    if let Some(h) = a.half_angle.or(fan.half_angle) {
        mount.half_angle_deg = h;
    }
    if let Some(z) = a.source_height_mm.or(fan.source_height_mm) {
        mount.source_height_cm = z / MM_PER_CM;
    }
    if let Some(z) = a.receiver_height_mm.or(fan.receiver_height_mm) {
        mount.receiver_height_cm = z / MM_PER_CM;
    }
    let n_rays = a.rays.or(fan.rays).unwrap_or(64);
    let spec = mount.fan_spec(n_rays);
    let report = match &section {
        Some(sec) => trace_emission_fan_in(sec, &profile, &spec)?,
        None => trace_emission_fan(&profile, &spec)?,
    };

    let z_rx = mount.receiver_height_cm;
    let span = report.radial_range_at_height(z_rx).map(|s| SpanMm {
        r_min_mm: s.r_min * MM_PER_CM,
        r_max_mm: s.r_max * MM_PER_CM,
        crossings: s.crossings,
        contiguous: s.contiguous,
    });
    let summary = TraceSummary {
        profile: name,
        half_angle_deg: mount.half_angle_deg,
        n_rays,
        hits: report.hits(),
        live: report.live(),
        source_height_mm: mount.source_height_cm * MM_PER_CM,
        receiver_height_mm: z_rx * MM_PER_CM,
        span_at_receiver: span,
    };

    let out = cfg.out_dir();
    let rays_path = out.join("rays.csv");
    write_atomic(&rays_path, |w| {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["ray", "launch_deg", "live", "point", "x_mm", "z_mm"])?;
        for (i, ray) in report.rays.iter().enumerate() {
            for (k, p) in ray.polyline(POLYLINE_TAIL_CM, Some(z_rx)).iter().enumerate() {
                wr.write_record([
                    i.to_string(),
                    ray.launch_deg.to_string(),
                    ray.is_live().to_string(),
                    k.to_string(),
                    (p.x * MM_PER_CM).to_string(),
                    (p.y * MM_PER_CM).to_string(),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    })?;
    let report_path = out.join("fan_report.json");
    write_text(&report_path, &serde_json::to_string_pretty(&summary)?)?;

    match &summary.span_at_receiver {
        Some(s) => eprintln!(
            "{} of {} rays reflected; at z = {} mm the fan covers {:.1}–{:.1} mm ({})",
            summary.live,
            n_rays,
            summary.receiver_height_mm,
            s.r_min_mm,
            s.r_max_mm,
            if s.contiguous { "contiguous" } else { "with gaps" }
        ),
        None => eprintln!("{} of {} rays reflected; none reach z = {} mm", summary.live, n_rays, summary.receiver_height_mm),
    }
    eprintln!("wrote {} and {}", rays_path.display(), report_path.display());
    Ok(())
}

/// Picks the dataset for `path` from a CSV that may hold several groups.
fn pick(sets: Vec<SweepDataset>, path: PathKind, file: &Path) -> Result<Option<SweepDataset>> {
    if sets.len() == 1 {
        return Ok(sets.into_iter().next());
    }
    let mut it = sets.into_iter().filter(|s| s.path() == path);
    let found = it.next();
    if it.next().is_some() {
        bail!("{} holds {path}-path sweeps for more than one design", file.display());
    }
    Ok(found)
}

fn read_sweeps(path: &Path, d_step: f64, arc_step: f64) -> Result<Vec<SweepDataset>> {
    let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    SweepDataset::read_csv(f, d_step, arc_step).with_context(|| format!("reading sweep {}", path.display()))
}

pub fn calibrate(cfg: &RunConfig, a: CalibrateArgs) -> Result<()> {
    let free_path = existing(require(a.free, cfg.free.clone(), "free")?)?;
    let post_path = a.post.or(cfg.post.clone()).map(existing).transpose()?;
    let d_step = a.sweep.d_step.or(cfg.sweep.d_step).unwrap_or(10.0);
    let arc_step = a.sweep.arc_step.or(cfg.sweep.arc_step).unwrap_or(10.0);

    let free_sets = read_sweeps(&free_path, d_step, arc_step)?;
    let embedded_post = if post_path.is_none() && free_sets.len() > 1 {
        free_sets.iter().find(|s| s.path() == PathKind::Post).cloned()
    } else {
        None
    };
    let free = pick(free_sets, PathKind::Free, &free_path)?
        .with_context(|| format!("{} has no free-path sweep", free_path.display()))?;
    let post = match &post_path {
        Some(p) => pick(read_sweeps(p, d_step, arc_step)?, PathKind::Post, p)?,
        None => embedded_post,
    };

    let mut opts = CalibrateOptions::default();
    if let Some(n) = a.bins.or(cfg.calibration.bins) {
        opts.n_bins = n;
    }
    if let Some(m) = a.bin_model {
        opts.bin_model = serde_json::from_value::<BinModel>(serde_json::Value::String(m.clone()))
            .map_err(|_| anyhow::anyhow!("unknown bin model `{m}` (expected sample-average or center)"))?;
    } else if let Some(m) = cfg.calibration.bin_model {
        opts.bin_model = m;
    }

    let (model, report) = run_calibration(&free, post.as_ref(), &opts)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let out = cfg.out_dir();
    let model_path = a.out.or(cfg.model.clone()).unwrap_or_else(|| out.join("model.json"));
    write_text(&model_path, &model.to_json()?)?;
    let report_path = out.join("calibration_report.json");
    write_text(&report_path, &report.to_json()?)?;
    eprintln!(
        "{} model from {} records (θ offset {:.3}°); wrote {} and {}",
        model.design(),
        report.n_records,
        report.theta_off_deg,
        model_path.display(),
        report_path.display()
    );
    Ok(())
}

pub fn synthesize(cfg: &RunConfig, a: SynthesizeArgs) -> Result<()> {
    let model = match (a.model.clone(), a.design.as_deref()) {
        (Some(p), _) => load_model(&existing(p)?)?,
        (None, Some(d)) => reference_model(d.parse::<Design>()?),
        (None, None) => match (&cfg.model, cfg.design) {
            (Some(p), _) => load_model(&existing(p.clone())?)?,
            (None, Some(d)) => reference_model(d),
            (None, None) => bail!("missing required setting `model` or `design` (flag or config)"),
        },
    };
    let path = match a.path.as_str() {
        "free" => PathKind::Free,
        "post" => PathKind::Post,
        other => bail!("unknown path `{other}` (expected free or post)"),
    };
    let spec = sweep_spec(&a.sweep, &cfg.sweep, model.domain())?;
    spec.validate_for(&model)?;
    let noise = noise_spec(a.noise, cfg.noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED));
    let ds = synthesize_sweep(&model, &spec, path, noise, a.rotation, &mut rng)?;

    let out = a
        .out
        .unwrap_or_else(|| cfg.out_dir().join(format!("sweep_{}_{}.csv", model.design(), path)));
    write_atomic(&out, |w| Ok(ds.write_csv(w)?))?;
    eprintln!("wrote {} records to {}", ds.records().len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct EstimateLine {
    d_mm: f64,
    theta_deg: f64,
    chi_sq: f64,
}

pub fn localize(cfg: &RunConfig, a: LocalizeArgs) -> Result<()> {
    let model = load_model(&existing(require(a.model, cfg.model.clone(), "model")?)?)?;
    let readouts = match (a.readout, a.readouts) {
        (Some(text), _) => vec![parse_readout(&text)?],
        (None, Some(p)) => read_readouts(&existing(p)?)?,
        (None, None) => bail!("give a readout with --readout or a CSV with --readouts"),
    };
    let loc = Localizer::new(&model, &SweepSpec::for_model(&model))?;
    let mut lines = String::new();
    for r in &readouts {
        let e = loc.localize(r)?;
        let line = EstimateLine {
            d_mm: e.d_mm,
            theta_deg: e.theta_deg,
            chi_sq: e.chi_sq,
        };
        lines.push_str(&serde_json::to_string(&line)?);
        lines.push('\n');
    }
    match a.out {
        Some(p) => write_text(&p, &lines)?,
        None => std::io::stdout().lock().write_all(lines.as_bytes())?,
    }
    Ok(())
}

fn write_mae(dir: &Path, stem: &str, report: &MaeReport) -> Result<(PathBuf, PathBuf)> {
    let json = dir.join(format!("{stem}.json"));
    let csv = dir.join(format!("{stem}.csv"));
    write_text(&json, &report.to_json()?)?;
    write_atomic(&csv, |w| Ok(report.write_csv(w)?))?;
    Ok((json, csv))
}

pub fn evaluate(cfg: &RunConfig, a: EvaluateArgs) -> Result<()> {
    let paths = if a.models.is_empty() {
        match (&cfg.model, cfg.models.is_empty()) {
            (_, false) => cfg.models.clone(),
            (Some(p), true) => vec![p.clone()],
            (None, true) => bail!("missing required setting `model` (flag or config)"),
        }
    } else {
        a.models
    };
    if paths.len() > 2 {
        bail!("evaluate takes one or two models, got {}", paths.len());
    }
    if !a.truths.is_empty() && a.truths.len() != paths.len() {
        bail!("give one --truth per --model");
    }
    let models: Vec<ResponseModel> = paths.iter().map(|p| load_model(&existing(p.clone())?)).collect::<Result<_>>()?;
    let truths: Vec<ResponseModel> = a.truths.iter().map(|p| load_model(&existing(p.clone())?)).collect::<Result<_>>()?;
    if models.len() == 2 && models[0].design() == models[1].design() {
        bail!("both models are for the {} design", models[0].design());
    }

    let noise = noise_spec(a.noise, cfg.noise)?;
    let seed = a.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let mode = if a.raw_angles { AngularMode::Raw } else { AngularMode::Circular };
    let domain = models[0].domain();
    let spec = sweep_spec(&a.sweep, &cfg.sweep, domain)?;
    let out = cfg.out_dir();

    let mut reports = Vec::new();
    for (i, m) in models.iter().enumerate() {
        let truth = truths.get(i).unwrap_or(m);
        let mut r = closed_loop_eval_with(truth, m, noise, &spec, seed, mode)?;
        r.provenance.datasets = vec![paths[i].display().to_string()];
        if let Some(t) = a.truths.get(i) {
            r.provenance.datasets.push(format!("truth: {}", t.display()));
        }
        let (j, c) = write_mae(&out, &format!("mae_{}", m.design()), &r)?;
        eprintln!("{}: wrote {} and {}", m.design(), j.display(), c.display());
        reports.push(r);
    }
    if let [ra, rb] = reports.as_slice() {
        write_comparison(&out, ra, rb)?;
    }
    Ok(())
}

fn write_comparison(out: &Path, a: &MaeReport, b: &MaeReport) -> Result<()> {
    let summary = compare_designs(a, b)?;
    let json = out.join("comparison.json");
    let csv = out.join("comparison.csv");
    write_text(&json, &summary.to_json()?)?;
    write_atomic(&csv, |w| Ok(summary.write_csv(w)?))?;
    let name = |d: Option<Design>| d.map_or("tie".to_string(), |d| d.to_string());
    eprintln!(
        "distance: {} ({} vs {} rows), orientation: {} ({} vs {} rows); wrote {} and {}",
        name(summary.distance_winner),
        summary.distance_wins.a,
        summary.distance_wins.b,
        name(summary.orientation_winner),
        summary.orientation_wins.a,
        summary.orientation_wins.b,
        json.display(),
        csv.display()
    );
    Ok(())
}

fn load_mae(path: &Path) -> Result<MaeReport> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(Error::from)
        .with_context(|| format!("parsing MAE report {}", path.display()))
}

pub fn compare(cfg: &RunConfig, a: CompareArgs) -> Result<()> {
    let ra = load_mae(&existing(a.a)?)?;
    let rb = load_mae(&existing(a.b)?)?;
    write_comparison(&cfg.out_dir(), &ra, &rb)
}
