//! The pipeline stages. Each reads files, writes files into the output
//! directory and returns a report; nothing here prints.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde_json::{json, Value};

use ro_core::geometry::sample_ephemeris;
use ro_core::ingest::{
    align_epochs, parse_obs_csv, parse_platform_csv, parse_rinex_obs, parse_sp3, write_obs_csv,
    write_platform_csv, write_rinex_obs, write_sp3, AlignConfig, EphemerisTable, ObsEpoch,
    PlatformState,
};
use ro_core::preprocess::{
    calibrate_clock, choose_reference, compute_excess_phase, correct_cycle_slips, export_profile,
    gpr_smooth, import_profile, ExcessPhaseSeries, GprConfig, SlipConfig, SlipReport,
};
use ro_core::raytracer::simulate_occultation;
use ro_core::retrieval::{
    abel_invert_partial, compare_refractivity, doppler_to_bending, export_bending,
    export_refractivity, forward_bending, import_bending, write_bending_csv,
    write_refractivity_profile_csv, DopplerConfig, RefractivityProfile,
};
use ro_core::stats::{sounding_density, tally_counts, Outcome};
use ro_core::ExportFormat;

use crate::config::RunConfig;
use crate::setup;

/// Why a command could not complete.
#[derive(Debug)]
pub enum Failure {
    /// Bad invocation or configuration.
    Usage(anyhow::Error),
    /// Everything that was attempted failed.
    Processing(anyhow::Error),
}

impl From<crate::config::ConfigError> for Failure {
    fn from(e: crate::config::ConfigError) -> Self {
        Failure::Usage(e.into())
    }
}

pub struct Report {
    pub summary: Value,
    pub text: String,
}

pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub out: &'a Path,
    pub pool: &'a rayon::ThreadPool,
}

impl Ctx<'_> {
    fn format(&self) -> (ExportFormat, &'static str) {
        match self.cfg.str("output.format") {
            "json" => (ExportFormat::Json, "json"),
            _ => (ExportFormat::NetCdf, "nc"),
        }
    }

    fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<String> {
        let path = self.out.join(name);
        std::fs::write(&path, contents)
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(name.to_string())
    }

    fn file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Wraps per-item results into the summary, failing only when every
    /// attempted item failed.
    fn finish(&self, command: &str, items: Vec<Value>, text: String) -> Result<Report, Failure> {
        let failed = items.iter().filter(|i| i.get("error").is_some()).count();
        let summary = json!({
            "command": command,
            "config_hash": self.cfg.hash,
            "attempted": items.len(),
            "failed": failed,
            "items": items,
        });
        let body = serde_json::to_string_pretty(&summary).expect("json value") + "\n";
        self.write(&format!("{command}_summary.json"), body)
            .map_err(Failure::Processing)?;
        if !items.is_empty() && failed == items.len() {
            return Err(Failure::Processing(anyhow!(
                "{command}: all {failed} inputs failed\n{text}"
            )));
        }
        Ok(Report { summary, text })
    }
}

fn error_item(name: &str, e: &anyhow::Error) -> Value {
    log::warn!("{name}: {e:#}");
    json!({ "input": name, "error": format!("{e:#}") })
}

/// Files under `inputs` accepted by `keep`, directories expanded one level
/// and everything sorted by name.
fn collect(inputs: &[PathBuf], keep: impl Fn(&str) -> bool) -> Result<Vec<PathBuf>, Failure> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("cannot list {}", p.display()))
                .map_err(Failure::Usage)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.is_file() && f.file_name().and_then(|n| n.to_str()).is_some_and(&keep)
                })
                .collect();
            found.sort();
            files.extend(found);
        } else if p.is_file() {
            files.push(p.clone());
        } else {
            return Err(Failure::Usage(anyhow!("no such input {}", p.display())));
        }
    }
    Ok(files)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("input")
        .to_string()
}

/// `phase_x` and `profile_x` both name profile `x`.
fn profile_name(path: &Path, prefixes: &[&str]) -> String {
    let s = stem(path);
    prefixes
        .iter()
        .find_map(|p| s.strip_prefix(p))
        .map_or_else(|| s.clone(), str::to_string)
}

fn is_profile_file(name: &str, prefixes: &[&str]) -> bool {
    prefixes.iter().any(|p| name.starts_with(p))
        && (name.ends_with(".nc") || name.ends_with(".json"))
        && !name.ends_with("_summary.json")
}

fn slip_config(cfg: &RunConfig) -> SlipConfig {
    SlipConfig {
        mad_factor: cfg.f64("slips.mad_factor"),
        min_jump_cycles: cfg.f64("slips.min_jump_cycles"),
        max_passes: cfg.count("slips.max_passes"),
        median_window: cfg.count("slips.median_window"),
    }
}

fn gpr_config(cfg: &RunConfig) -> GprConfig {
    GprConfig {
        length_scale: cfg.f64("gpr.length_scale_s"),
        signal_sigma: cfg.opt_f64("gpr.signal_sigma_m"),
        noise_sigma: cfg.opt_f64("gpr.noise_sigma_m"),
        chunk: cfg.count("gpr.chunk"),
        overlap: cfg.count("gpr.overlap"),
    }
}

fn doppler_config(cfg: &RunConfig) -> DopplerConfig {
    DopplerConfig {
        angle_tol: cfg.f64("doppler.angle_tol_rad"),
        max_iter: cfg.count("doppler.max_iter"),
        max_failed_fraction: cfg.f64("doppler.max_failed_fraction"),
    }
}

/// Adds seeded white noise to the occulting link and a clock walk shared
/// by every link tracked at an epoch.
fn perturb(
    obs: &mut [ObsEpoch],
    occulting: ro_core::ingest::SatId,
    noise: f64,
    walk: f64,
    seed: u64,
) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clock = 0.0;
    let mut prev: Option<ro_core::Epoch> = None;
    for o in obs.iter_mut() {
        if walk > 0.0 {
            let dt = prev.map_or(0.0, |p| o.t.seconds_since(&p));
            if dt > 0.0 {
                clock += Normal::new(0.0, walk * dt.sqrt())
                    .expect("finite sigma")
                    .sample(&mut rng);
            }
            prev = Some(o.t);
        }
        let mut extra = clock;
        if noise > 0.0 && o.sat == occulting {
            extra += Normal::new(0.0, noise)
                .expect("finite sigma")
                .sample(&mut rng);
        }
        o.carrier_phase += extra / o.sat.constellation.wavelength();
    }
}

pub fn simulate(ctx: &Ctx) -> Result<Report, Failure> {
    let cfg = ctx.cfg;
    let model = setup::model(cfg).map_err(Failure::Usage)?;
    let geo = setup::geometry(cfg).map_err(Failure::Usage)?;
    let dt = cfg.f64("sim.dt_s");
    let (occ, reference) = ctx.pool.install(|| {
        rayon::join(
            || {
                simulate_occultation(
                    &model,
                    geo.tx.as_ref(),
                    geo.rx.as_ref(),
                    geo.start,
                    geo.end,
                    dt,
                )
            },
            || {
                simulate_occultation(
                    &model,
                    geo.reference.as_ref(),
                    geo.rx.as_ref(),
                    geo.start,
                    geo.end,
                    dt,
                )
            },
        )
    });
    let run = || -> Result<(Vec<String>, Value)> {
        let (occ, reference) = (occ?, reference?);
        let (fmt, ext) = ctx.format();
        let mut files = Vec::new();

        let mut obs = occ.observations(geo.sat);
        obs.extend(reference.observations(geo.ref_sat));
        obs.sort_by(|a, b| {
            a.t.seconds_since(&b.t)
                .total_cmp(&0.0)
                .then(a.sat.cmp(&b.sat))
        });
        perturb(
            &mut obs,
            geo.sat,
            cfg.f64("sim.noise_m"),
            cfg.f64("sim.clock_walk_m"),
            cfg.seed,
        );
        files.push(match cfg.str("sim.obs_format") {
            "csv" => ctx.write("obs.csv", write_obs_csv(&obs))?,
            _ => ctx.write("obs.rnx", write_rinex_obs(&obs))?,
        });
        files.push(ctx.write("platform.csv", write_platform_csv(&occ.platform_states()))?);

        // pad the orbit file so interpolation has nodes past both ends
        let interval = cfg.f64("sim.ephemeris_interval_s");
        let pad = 6.0 * interval;
        let mut table = EphemerisTable {
            interval,
            sats: BTreeMap::new(),
        };
        for (sat, traj) in [(geo.sat, &geo.tx), (geo.ref_sat, &geo.reference)] {
            let e = sample_ephemeris(
                traj.as_ref(),
                sat,
                geo.start.add_seconds(-pad),
                geo.end.add_seconds(pad),
                interval,
            )?;
            table.sats.insert(sat, e);
        }
        files.push(ctx.write("orbits.sp3", write_sp3(&table))?);

        for (sat, series) in [(geo.sat, &occ), (geo.ref_sat, &reference)] {
            files.push(ctx.write(&format!("sim_{sat}.json"), serde_json::to_string(series)?)?);
        }
        let mut profile = occ.to_profile(geo.sat);
        profile.config_hash = cfg.hash.clone();
        let name = format!("profile_{}.{ext}", geo.sat);
        export_profile(&profile, &ctx.file(&name), fmt)?;
        files.push(name);

        // truth on a regular grid below the receiver's starting height
        let r_r = geo.rx.state_at(geo.start)?.pos.norm();
        let spacing = cfg.f64("sim.truth_spacing_m");
        let surface = model.surface_radius();
        let x_r = model.refractional_radius(r_r);
        let a0 = model.refractional_radius(surface);
        let grid: Vec<f64> = (0..)
            .map(|k| a0 + spacing * k as f64)
            .take_while(|&a| a < x_r)
            .collect();
        let mut bending = forward_bending(&model, r_r, &grid)?;
        bending.config_hash = cfg.hash.clone();
        export_bending(&bending, &ctx.file(&format!("truth_bending.{ext}")), fmt)?;
        files.push(format!("truth_bending.{ext}"));
        files.push(ctx.write("truth_bending.csv", write_bending_csv(&bending))?);
        let r: Vec<f64> = (0..)
            .map(|k| surface + spacing * k as f64)
            .take_while(|&r| r <= r_r)
            .collect();
        let truth = RefractivityProfile {
            n_units: r.iter().map(|&r| model.refractivity(r).0).collect(),
            r,
            receiver_radius: r_r,
            n_r: model.eval(r_r).0,
            topside: model.describe(),
            config_hash: cfg.hash.clone(),
        };
        export_refractivity(&truth, &ctx.file(&format!("truth_refractivity.{ext}")), fmt)?;
        files.push(format!("truth_refractivity.{ext}"));
        files.push(ctx.write(
            "truth_refractivity.csv",
            write_refractivity_profile_csv(&truth),
        )?);

        let ok: Vec<_> = occ.ok().collect();
        let deepest = ok.iter().min_by(|a, b| a.elevation.total_cmp(&b.elevation));
        let stats = json!({
            "epochs": occ.epochs.len(),
            "valid_rays": ok.len(),
            "observations": obs.len(),
            "min_elevation_deg": deepest.map(|e| e.elevation.to_degrees()),
            "max_excess_phase_m": ok.iter().map(|e| e.excess_phase).fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v)))),
            "model": model.describe(),
        });
        Ok((files, stats))
    };
    match run() {
        Ok((files, stats)) => {
            let text = format!(
                "simulated {} epochs ({} valid rays) with {}\nwrote {}\n",
                stats["epochs"],
                stats["valid_rays"],
                model.describe(),
                files.join(", ")
            );
            let item = json!({ "input": "simulation", "files": files, "stats": stats });
            ctx.finish("simulate", vec![item], text)
        }
        Err(e) => {
            let text = format!("simulation failed: {e:#}\n");
            ctx.finish("simulate", vec![error_item("simulation", &e)], text)
        }
    }
}

struct DirInputs {
    platform: Vec<PlatformState>,
    ephem: EphemerisTable,
    obs_files: Vec<PathBuf>,
}

fn is_obs_file(path: &Path) -> bool {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    if name.ends_with(".rnx") || name.ends_with(".obs") {
        return true;
    }
    // RINEX short names end in a two-digit year and `o`
    let b = name.as_bytes();
    if b.len() > 4
        && b[b.len() - 4] == b'.'
        && b[b.len() - 3..b.len() - 1].iter().all(u8::is_ascii_digit)
        && b[b.len() - 1] == b'o'
    {
        return true;
    }
    name.ends_with(".csv")
        && name != "platform.csv"
        && std::fs::read_to_string(path).is_ok_and(|t| {
            t.lines()
                .next()
                .is_some_and(|h| h.contains("carrier_phase_cycles"))
        })
}

fn dir_inputs(dir: &Path) -> Result<DirInputs> {
    let platform_path = dir.join("platform.csv");
    let text = std::fs::read_to_string(&platform_path)
        .with_context(|| format!("cannot read {}", platform_path.display()))?;
    let (platform, report) =
        parse_platform_csv(&text).with_context(|| platform_path.display().to_string())?;
    if report.rejected + report.implausible > 0 {
        log::warn!("{}: {report:?}", platform_path.display());
    }
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    let mut ephem: Option<EphemerisTable> = None;
    for p in entries
        .iter()
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("sp3")))
    {
        let text = std::fs::read_to_string(p)?;
        let t = parse_sp3(&text).with_context(|| p.display().to_string())?;
        match &mut ephem {
            None => ephem = Some(t),
            Some(all) => {
                for (sat, e) in t.sats {
                    all.sats.entry(sat).or_insert(e);
                }
            }
        }
    }
    let ephem = ephem.with_context(|| format!("no .sp3 orbit file in {}", dir.display()))?;
    let obs_files = entries
        .into_iter()
        .filter(|p| p.is_file() && is_obs_file(p))
        .collect();
    Ok(DirInputs {
        platform,
        ephem,
        obs_files,
    })
}

struct Processed {
    id: String,
    series: Result<(ExcessPhaseSeries, SlipReport)>,
}

fn min_elevation(s: &ExcessPhaseSeries) -> f64 {
    s.usable()
        .map(|x| x.elevation)
        .filter(|e| e.is_finite())
        .fold(f64::INFINITY, f64::min)
}

/// Every occulting arc of one observation file, or the reason the file failed.
fn preprocess_file(cfg: &RunConfig, path: &Path, inputs: &DirInputs) -> Result<Vec<Processed>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let obs = if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        let (obs, dropped) = parse_obs_csv(&text)?;
        if dropped > 0 {
            log::warn!("{}: {dropped} rows dropped", path.display());
        }
        obs
    } else {
        let (obs, report) = parse_rinex_obs(&text, &[])?;
        if report != Default::default() {
            log::warn!("{}: {report:?}", path.display());
        }
        obs
    };
    let align = AlignConfig {
        tolerance: cfg.f64("align.tolerance_s"),
        gap_split_s: cfg.f64("align.gap_split_s"),
        include_excluded: cfg.flag("align.include_excluded"),
    };
    let (sets, report) = align_epochs(&obs, &inputs.platform, &inputs.ephem, &align);
    for w in &report.warnings {
        log::warn!("{}: {w}", path.display());
    }
    if sets.is_empty() {
        bail!("no aligned arcs ({report:?})");
    }
    let raws: Vec<(String, Result<ExcessPhaseSeries>)> = sets
        .par_iter()
        .map(|d| (d.id.clone(), compute_excess_phase(d).map_err(Into::into)))
        .collect();
    let usable: Vec<(usize, &ExcessPhaseSeries)> = raws
        .iter()
        .enumerate()
        .filter_map(|(i, (_, r))| r.as_ref().ok().map(|s| (i, s)))
        .collect();
    let candidates: Vec<ExcessPhaseSeries> = usable.iter().map(|(_, s)| (*s).clone()).collect();
    let reference = choose_reference(
        &candidates,
        cfg.f64("preprocess.min_reference_elevation_deg")
            .to_radians(),
    )
    .map(|k| usable[k].0)
    .map_err(|e| anyhow!("{e}"))?;
    let ref_series = raws[reference].1.as_ref().expect("usable reference");
    let max_el = cfg
        .f64("preprocess.max_occultation_elevation_deg")
        .to_radians();
    let (slips, gpr) = (slip_config(cfg), gpr_config(cfg));
    let tolerance = cfg.f64("preprocess.clock_tolerance_s");
    let out = raws
        .par_iter()
        .enumerate()
        .filter(|(i, (_, r))| {
            *i != reference && r.as_ref().map_or(true, |s| min_elevation(s) < max_el)
        })
        .map(|(_, (id, raw))| {
            let series = raw.as_ref().map_err(|e| anyhow!("{e}")).and_then(|raw| {
                let cal = calibrate_clock(raw, ref_series, tolerance)?;
                let (fixed, report) = correct_cycle_slips(&cal, &slips)?;
                let mut smooth = gpr_smooth(&fixed, &gpr)?;
                smooth.config_hash = cfg.hash.clone();
                Ok((smooth, report))
            });
            Processed {
                id: id.clone(),
                series,
            }
        })
        .collect();
    Ok(out)
}

pub fn preprocess(ctx: &Ctx, inputs: &[PathBuf]) -> Result<Report, Failure> {
    for p in inputs {
        if !p.is_dir() {
            return Err(Failure::Usage(anyhow!(
                "{} is not a directory; preprocess reads directories holding platform.csv, .sp3 orbits and observation files",
                p.display()
            )));
        }
    }
    let mut items = Vec::new();
    let mut text = String::new();
    let (fmt, ext) = ctx.format();
    for dir in inputs {
        let dir_name = dir.display().to_string();
        let inputs = match dir_inputs(dir) {
            Ok(i) => i,
            Err(e) => {
                text.push_str(&format!("{dir_name}: {e:#}\n"));
                items.push(error_item(&dir_name, &e));
                continue;
            }
        };
        let results: Vec<(PathBuf, Result<Vec<Processed>>)> = ctx.pool.install(|| {
            inputs
                .obs_files
                .par_iter()
                .map(|f| (f.clone(), preprocess_file(ctx.cfg, f, &inputs)))
                .collect()
        });
        for (file, result) in results {
            let name = file
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or("obs")
                .to_string();
            let arcs = match result {
                Ok(a) => a,
                Err(e) => {
                    text.push_str(&format!("{name}: skipped: {e:#}\n"));
                    items.push(error_item(&name, &e));
                    continue;
                }
            };
            for arc in arcs {
                let label = format!("{}_{}", stem(&file), arc.id);
                let written = arc.series.and_then(|(s, report)| {
                    let phase = format!("phase_{label}.{ext}");
                    export_profile(&s, &ctx.file(&phase), fmt)?;
                    let slips = ctx.write(
                        &format!("slips_{label}.json"),
                        serde_json::to_string_pretty(&report)? + "\n",
                    )?;
                    Ok((s, report, phase, slips))
                });
                match written {
                    Ok((s, report, phase, slips)) => {
                        text.push_str(&format!(
                            "{label}: {} samples, reference {}, {} slips repaired -> {phase}\n",
                            s.samples.len(),
                            s.reference_sat.map(|r| r.to_string()).unwrap_or_default(),
                            report.entries.len()
                        ));
                        items.push(json!({
                            "input": name,
                            "dataset": arc.id,
                            "sat": s.sat.to_string(),
                            "reference": s.reference_sat.map(|r| r.to_string()),
                            "samples": s.samples.len(),
                            "slips": report.entries.len(),
                            "files": [phase, slips],
                        }));
                    }
                    Err(e) => {
                        text.push_str(&format!("{label}: failed: {e:#}\n"));
                        let mut item = error_item(&label, &e);
                        item["dataset"] = json!(arc.id);
                        items.push(item);
                    }
                }
            }
        }
    }
    if items.is_empty() {
        text.push_str("no observation files found\n");
    }
    ctx.finish("preprocess", items, text)
}

pub fn retrieve(ctx: &Ctx, inputs: &[PathBuf]) -> Result<Report, Failure> {
    const PREFIXES: [&str; 2] = ["phase_", "profile_"];
    let files = collect(inputs, |n| is_profile_file(n, &PREFIXES))?;
    let model = setup::model(ctx.cfg).map_err(Failure::Usage)?;
    let n_r = setup::receiver_index(ctx.cfg, &model);
    let dop = doppler_config(ctx.cfg);
    let (fmt, ext) = ctx.format();
    let results: Vec<Result<Value>> = ctx.pool.install(|| {
        files
            .par_iter()
            .map(|f| {
                let name = profile_name(f, &PREFIXES);
                let s = import_profile(f)?;
                let mut b = doppler_to_bending(&s, &n_r, &dop)?;
                b.config_hash = ctx.cfg.hash.clone();
                let out = format!("bending_{name}.{ext}");
                export_bending(&b, &ctx.file(&out), fmt)?;
                let csv = ctx.write(&format!("bending_{name}.csv"), write_bending_csv(&b))?;
                Ok(json!({
                    "samples": b.len(),
                    "usable": b.usable().count(),
                    "failed_epochs": b.failed,
                    "n_r": b.n_r,
                    "files": [out, csv],
                }))
            })
            .collect()
    });
    let mut items = Vec::new();
    let mut text = String::new();
    for (f, r) in files.iter().zip(results) {
        let input = f
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("")
            .to_string();
        match r {
            Ok(mut v) => {
                text.push_str(&format!(
                    "{input}: {} bending samples ({} usable) -> {}\n",
                    v["samples"],
                    v["usable"],
                    v["files"][0].as_str().unwrap_or("")
                ));
                v["input"] = json!(input);
                items.push(v);
            }
            Err(e) => {
                text.push_str(&format!("{input}: failed: {e:#}\n"));
                items.push(error_item(&input, &e));
            }
        }
    }
    if items.is_empty() {
        text.push_str("no profile files found\n");
    }
    ctx.finish("retrieve", items, text)
}

/// Height bands (m) for comparing a retrieval against the configured model.
const BANDS: [(f64, f64); 5] = [
    (0.0, 2000.0),
    (2000.0, 4500.0),
    (4500.0, 8000.0),
    (8000.0, 12_000.0),
    (12_000.0, 16_000.0),
];

pub fn invert(ctx: &Ctx, inputs: &[PathBuf]) -> Result<Report, Failure> {
    const PREFIXES: [&str; 1] = ["bending_"];
    let files = collect(inputs, |n| {
        is_profile_file(n, &PREFIXES) && !n.starts_with("truth_")
    })?;
    let model = setup::model(ctx.cfg).map_err(Failure::Usage)?;
    let topside = (ctx.cfg.str("invert.topside") == "model").then_some(&model);
    let (fmt, ext) = ctx.format();
    let results: Vec<Result<Value>> = ctx.pool.install(|| {
        files
            .par_iter()
            .map(|f| {
                let name = profile_name(f, &PREFIXES);
                let b = import_bending(f)?;
                let mut r = abel_invert_partial(&b, b.receiver_radius, b.n_r, topside)?;
                r.config_hash = ctx.cfg.hash.clone();
                let out = format!("refractivity_{name}.{ext}");
                export_refractivity(&r, &ctx.file(&out), fmt)?;
                let csv = ctx.write(
                    &format!("refractivity_{name}.csv"),
                    write_refractivity_profile_csv(&r),
                )?;
                let mut v = json!({ "levels": r.r.len(), "files": [out, csv] });
                if !model.is_vacuum() {
                    let surface = model.surface_radius();
                    let grid: Vec<f64> = (0..)
                        .map(|k| surface + 50.0 * k as f64)
                        .take_while(|&x| x <= r.receiver_radius)
                        .collect();
                    let truth = RefractivityProfile {
                        n_units: grid.iter().map(|&x| model.refractivity(x).0).collect(),
                        r: grid,
                        receiver_radius: r.receiver_radius,
                        n_r: r.n_r,
                        topside: model.describe(),
                        config_hash: String::new(),
                    };
                    if let Ok(bands) = compare_refractivity(&r, &truth, surface, &BANDS) {
                        v["against_model"] = serde_json::to_value(bands)?;
                    }
                }
                Ok(v)
            })
            .collect()
    });
    let mut items = Vec::new();
    let mut text = String::new();
    for (f, r) in files.iter().zip(results) {
        let input = f
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("")
            .to_string();
        match r {
            Ok(mut v) => {
                text.push_str(&format!(
                    "{input}: {} levels -> {}\n",
                    v["levels"],
                    v["files"][0].as_str().unwrap_or("")
                ));
                if let Some(bands) = v["against_model"].as_array() {
                    for b in bands.iter().filter(|b| b["count"].as_u64() > Some(0)) {
                        text.push_str(&format!(
                            "  {:>5.1}-{:<5.1} km  mean {:+.3}%  rms {:.3}%  ({} levels)\n",
                            b["lo"].as_f64().unwrap_or(0.0) / 1e3,
                            b["hi"].as_f64().unwrap_or(0.0) / 1e3,
                            b["mean_pct"].as_f64().unwrap_or(f64::NAN),
                            b["rms_pct"].as_f64().unwrap_or(f64::NAN),
                            b["count"]
                        ));
                    }
                }
                v["input"] = json!(input);
                items.push(v);
            }
            Err(e) => {
                text.push_str(&format!("{input}: failed: {e:#}\n"));
                items.push(error_item(&input, &e));
            }
        }
    }
    if items.is_empty() {
        text.push_str("no bending files found\n");
    }
    ctx.finish("invert", items, text)
}

const COUNT_KEYS: [&str; 10] = [
    "observed",
    "parsed",
    "selected",
    "excluded_constellation",
    "loss_of_lock",
    "soundings",
    "area_km2",
    "duration_days",
    "quoted_density_km2",
    "quoted_density_mi2",
];

/// One counts file: stage counts as reached (so `parsed` includes
/// `selected`) and optional sounding-density inputs.
fn stats_file(text: &str) -> Result<(String, Value)> {
    let mut v: BTreeMap<&str, f64> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, val) = line
            .split_once('=')
            .with_context(|| format!("line {}: expected `key = value`", i + 1))?;
        let k = COUNT_KEYS
            .iter()
            .find(|c| **c == k.trim())
            .with_context(|| format!("line {}: unknown key `{}`", i + 1, k.trim()))?;
        let x: f64 = val
            .trim()
            .parse()
            .ok()
            .filter(|x: &f64| x.is_finite() && *x >= 0.0)
            .with_context(|| format!("line {}: {k}: expected a non-negative number", i + 1))?;
        v.insert(k, x);
    }
    let count = |k: &str| -> Result<usize> {
        let x = v.get(k).copied().unwrap_or(0.0);
        if x.fract() != 0.0 {
            bail!("{k} must be a whole number");
        }
        Ok(x as usize)
    };
    let observed = v
        .contains_key("observed")
        .then(|| count("observed"))
        .transpose()?
        .context("missing `observed`")?;
    let selected = count("selected")?;
    let parsed = if v.contains_key("parsed") {
        count("parsed")?
    } else {
        selected
    };
    let (lol, excl) = (count("loss_of_lock")?, count("excluded_constellation")?);
    if selected > parsed {
        bail!("selected ({selected}) exceeds parsed ({parsed})");
    }
    let unattributed = observed.checked_sub(parsed + lol + excl).with_context(|| {
        format!("parsed + loss_of_lock + excluded_constellation exceed observed ({observed})")
    })?;
    let ledger = tally_counts(
        observed,
        &[
            (Outcome::Selected, selected),
            (Outcome::Parsed, parsed - selected),
            (Outcome::LossOfLock, lol),
            (Outcome::ExcludedConstellation, excl),
            (Outcome::Observed, unattributed),
        ],
    )?;
    let mut text = ledger.render_text();
    let mut summary = json!({ "ledger": serde_json::from_str::<Value>(&ledger.to_json())? });
    match (
        v.get("soundings"),
        v.get("area_km2"),
        v.get("duration_days"),
    ) {
        (Some(_), Some(&area), Some(&days)) => {
            let d = sounding_density(count("soundings")?, area, days)?;
            text.push_str(&d.render_text(
                v.get("quoted_density_km2").copied(),
                v.get("quoted_density_mi2").copied(),
            ));
            summary["density"] = serde_json::to_value(&d)?;
            summary["quoted_density_km2"] = json!(v.get("quoted_density_km2"));
            summary["quoted_density_mi2"] = json!(v.get("quoted_density_mi2"));
        }
        (None, None, None) => {}
        _ => bail!("density needs soundings, area_km2 and duration_days together"),
    }
    Ok((text, summary))
}

pub fn stats(ctx: &Ctx, inputs: &[PathBuf]) -> Result<Report, Failure> {
    let files = collect(inputs, |n| n.ends_with(".counts"))?;
    let mut items = Vec::new();
    let mut text = String::new();
    for f in &files {
        let name = stem(f);
        let result = std::fs::read_to_string(f)
            .with_context(|| format!("cannot read {}", f.display()))
            .and_then(|t| stats_file(&t))
            .and_then(|(report, mut summary)| {
                let ledger = serde_json::to_string_pretty(&summary["ledger"])? + "\n";
                summary["files"] = json!([
                    ctx.write(&format!("ledger_{name}.json"), ledger)?,
                    ctx.write(&format!("stats_{name}.txt"), &report)?
                ]);
                Ok((report, summary))
            });
        match result {
            Ok((report, mut summary)) => {
                text.push_str(&format!("== {name}\n{report}"));
                summary["input"] = json!(name);
                items.push(summary);
            }
            Err(e) => {
                text.push_str(&format!("== {name}\nfailed: {e:#}\n"));
                items.push(error_item(&name, &e));
            }
        }
    }
    if items.is_empty() {
        text.push_str("no .counts files found; empty report\n");
    }
    ctx.finish("stats", items, text)
}
