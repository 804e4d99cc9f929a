//! Flat `section.key = value` run configuration.
//!
//! Every key has a default, so an empty file is a valid configuration. The
//! digest covers the fully resolved key set, which makes it independent of
//! comments, ordering and whether a default was spelled out.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use ro_core::preprocess::{GprConfig, SlipConfig};
use ro_core::retrieval::DopplerConfig;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy)]
enum Kind {
    Float,
    /// A float, or `auto` to let the library choose.
    FloatOrAuto,
    Count,
    Flag,
    Choice(&'static [&'static str]),
    /// Free text; paths are resolved against the config file's directory.
    Path,
}

struct Key {
    name: &'static str,
    kind: Kind,
    default: String,
    help: &'static str,
}

fn key(name: &'static str, kind: Kind, default: impl ToString, help: &'static str) -> Key {
    Key {
        name,
        kind,
        default: default.to_string(),
        help,
    }
}

fn auto(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".into(), |v| format!("{v:?}"))
}

fn schema() -> Vec<Key> {
    use Kind::*;
    let slips = SlipConfig::default();
    let gpr = GprConfig::default();
    let dop = DopplerConfig::default();
    vec![
        key(
            "model.kind",
            Choice(&["exponential", "layered", "met", "vacuum"]),
            "exponential",
            "refractivity model",
        ),
        key(
            "model.n0",
            Float,
            "300",
            "surface refractivity of the exponential model (N-units)",
        ),
        key(
            "model.scale_height_m",
            Float,
            "7000",
            "scale height of the exponential model",
        ),
        key(
            "model.surface_radius_m",
            FloatOrAuto,
            "auto",
            "geocentric radius of height zero; auto = ground below the receiver site",
        ),
        key(
            "model.profile",
            Path,
            "",
            "z_m,n_units CSV (layered) or z_m,p_hpa,t_k,e_hpa CSV (met)",
        ),
        key(
            "scenario.rx",
            Choice(&["drift", "hover", "track"]),
            "drift",
            "receiver motion",
        ),
        key("scenario.rx_lat_deg", Float, "33", "launch latitude"),
        key("scenario.rx_lon_deg", Float, "-106", "launch longitude"),
        key(
            "scenario.rx_height_m",
            Float,
            "18000",
            "flight altitude above the ellipsoid",
        ),
        key(
            "scenario.rx_east_speed_mps",
            Float,
            "10",
            "eastward drift speed",
        ),
        key(
            "scenario.rx_track",
            Path,
            "",
            "platform CSV used when scenario.rx = track",
        ),
        key(
            "scenario.tx",
            Choice(&["setting", "kepler"]),
            "setting",
            "occulting orbit: generated setting geometry or tx.* elements",
        ),
        key(
            "scenario.reference",
            Choice(&["setting", "kepler"]),
            "setting",
            "reference orbit: generated or ref.* elements",
        ),
        key("tx.prn", Count, "32", "GPS PRN of the occulting satellite"),
        key("tx.a_m", Float, "26560000", "semi-major axis"),
        key("tx.e", Float, "0", "eccentricity"),
        key("tx.i_deg", Float, "55", "inclination"),
        key(
            "tx.raan_deg",
            Float,
            "0",
            "right ascension of the ascending node at sim start",
        ),
        key("tx.argp_deg", Float, "0", "argument of perigee"),
        key("tx.m0_deg", Float, "0", "mean anomaly at sim start"),
        key("ref.prn", Count, "10", "GPS PRN of the reference satellite"),
        key("ref.a_m", Float, "26560000", "semi-major axis"),
        key("ref.e", Float, "0", "eccentricity"),
        key("ref.i_deg", Float, "55", "inclination"),
        key(
            "ref.raan_deg",
            Float,
            "0",
            "right ascension of the ascending node at sim start",
        ),
        key("ref.argp_deg", Float, "0", "argument of perigee"),
        key("ref.m0_deg", Float, "0", "mean anomaly at sim start"),
        key(
            "sim.start_week",
            Count,
            "2119",
            "GPS week of the first epoch",
        ),
        key(
            "sim.start_tow",
            Float,
            "518400",
            "GPS seconds of week of the first epoch",
        ),
        key("sim.duration_s", Float, "2100", "simulated span"),
        key("sim.dt_s", Float, "1", "sampling interval"),
        key(
            "sim.noise_m",
            Float,
            "0",
            "white phase noise on the occulting link (needs --seed to vary)",
        ),
        key(
            "sim.clock_walk_m",
            Float,
            "0",
            "receiver clock random walk per sqrt(s), common to both links",
        ),
        key(
            "sim.obs_format",
            Choice(&["rinex", "csv"]),
            "rinex",
            "encoding of the simulated observables",
        ),
        key(
            "sim.ephemeris_interval_s",
            Float,
            "300",
            "SP3 sampling interval",
        ),
        key(
            "sim.truth_spacing_m",
            Float,
            "50",
            "spacing of the truth bending and refractivity grids",
        ),
        key(
            "align.tolerance_s",
            Float,
            "0.05",
            "largest observation-to-platform time offset",
        ),
        key("align.gap_split_s", Float, "30", "gap that splits an arc"),
        key("align.include_excluded", Flag, "false", "keep GLONASS arcs"),
        key(
            "preprocess.clock_tolerance_s",
            Float,
            "0.05",
            "epoch matching tolerance for clock calibration",
        ),
        key(
            "preprocess.min_reference_elevation_deg",
            Float,
            "30",
            "lowest mean elevation of a reference arc",
        ),
        key(
            "preprocess.max_occultation_elevation_deg",
            Float,
            "0",
            "arcs reaching below this elevation are processed",
        ),
        key(
            "slips.mad_factor",
            Float,
            slips.mad_factor,
            "detection threshold in robust sigmas",
        ),
        key(
            "slips.min_jump_cycles",
            Float,
            slips.min_jump_cycles,
            "smallest step treated as a slip",
        ),
        key(
            "slips.max_passes",
            Count,
            slips.max_passes,
            "detection passes",
        ),
        key(
            "slips.median_window",
            Count,
            slips.median_window,
            "running-median window (samples)",
        ),
        key(
            "gpr.length_scale_s",
            Float,
            gpr.length_scale,
            "kernel length scale",
        ),
        key(
            "gpr.signal_sigma_m",
            FloatOrAuto,
            auto(gpr.signal_sigma),
            "prior signal sigma",
        ),
        key(
            "gpr.noise_sigma_m",
            FloatOrAuto,
            auto(gpr.noise_sigma),
            "white-noise sigma",
        ),
        key("gpr.chunk", Count, gpr.chunk, "samples per chunk"),
        key(
            "gpr.overlap",
            Count,
            gpr.overlap,
            "samples shared by neighbouring chunks",
        ),
        key(
            "doppler.angle_tol_rad",
            Float,
            dop.angle_tol,
            "Newton convergence step",
        ),
        key(
            "doppler.max_iter",
            Count,
            dop.max_iter,
            "Newton iterations per epoch",
        ),
        key(
            "doppler.max_failed_fraction",
            Float,
            dop.max_failed_fraction,
            "largest tolerated fraction of failed epochs",
        ),
        key(
            "retrieve.receiver_index",
            Choice(&["model", "in_situ", "spaceborne"]),
            "model",
            "refractive index at the receiver",
        ),
        key(
            "retrieve.receiver_n_units",
            Float,
            "0",
            "measured refractivity when receiver_index = in_situ",
        ),
        key(
            "invert.topside",
            Choice(&["model", "none"]),
            "model",
            "bending above the receiver",
        ),
        key(
            "output.format",
            Choice(&["netcdf", "json"]),
            "netcdf",
            "profile file format",
        ),
    ]
}

/// Every problem found in a configuration file.
#[derive(Debug)]
pub struct ConfigError(pub Vec<String>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for e in &self.0 {
            write!(f, "\n  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// Resolved key-value set plus its digest.
#[derive(Debug, Clone)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    base_dir: PathBuf,
    pub seed: u64,
    pub hash: String,
}

fn check(kind: Kind, v: &str) -> Result<String, String> {
    let float = |v: &str| match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(format!("{x:?}")),
        _ => Err(format!("expected a finite number, got `{v}`")),
    };
    match kind {
        Kind::Float => float(v),
        Kind::FloatOrAuto if v == "auto" => Ok(v.into()),
        Kind::FloatOrAuto => float(v),
        Kind::Count => v
            .parse::<u64>()
            .map(|n| n.to_string())
            .map_err(|_| format!("expected a non-negative integer, got `{v}`")),
        Kind::Flag => match v {
            "true" | "yes" | "1" => Ok("true".into()),
            "false" | "no" | "0" => Ok("false".into()),
            _ => Err(format!("expected true or false, got `{v}`")),
        },
        Kind::Choice(opts) if opts.contains(&v) => Ok(v.into()),
        Kind::Choice(opts) => Err(format!("expected one of {}, got `{v}`", opts.join(", "))),
        Kind::Path => Ok(v.into()),
    }
}

impl RunConfig {
    /// Parses `text`; relative paths are taken from `base_dir`.
    pub fn parse(text: &str, base_dir: &Path, seed: u64) -> Result<Self, ConfigError> {
        let keys = schema();
        let mut values: BTreeMap<String, String> = keys
            .iter()
            .map(|k| {
                (
                    k.name.to_string(),
                    check(k.kind, &k.default).unwrap_or_else(|_| k.default.clone()),
                )
            })
            .collect();
        let mut seen = BTreeMap::new();
        let mut errors = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = i + 1;
            let Some((k, v)) = line.split_once('=') else {
                errors.push(format!("line {lineno}: expected `key = value`"));
                continue;
            };
            let (k, v) = (k.trim(), v.trim());
            let Some(spec) = keys.iter().find(|s| s.name == k) else {
                errors.push(format!("line {lineno}: unknown key `{k}`"));
                continue;
            };
            if let Some(first) = seen.insert(k.to_string(), lineno) {
                errors.push(format!("line {lineno}: `{k}` already set on line {first}"));
                continue;
            }
            match check(spec.kind, v) {
                Ok(v) => {
                    values.insert(k.to_string(), v);
                }
                Err(e) => errors.push(format!("line {lineno}: {k}: {e}")),
            }
        }
        let mut cfg = RunConfig {
            values,
            base_dir: base_dir.to_path_buf(),
            seed,
            hash: String::new(),
        };
        errors.extend(cfg.cross_checks());
        if !errors.is_empty() {
            return Err(ConfigError(errors));
        }
        cfg.hash = hex::encode(Sha256::digest(cfg.canonical().as_bytes()));
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, seed: u64) -> anyhow::Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", p.display()))?;
                let base = p.parent().unwrap_or(Path::new("."));
                Ok(Self::parse(&text, base, seed)?)
            }
            None => Ok(Self::parse("", Path::new("."), seed)?),
        }
    }

    fn cross_checks(&self) -> Vec<String> {
        let mut errors = Vec::new();
        let needs_file =
            |kind_key: &str, kinds: &[&str], path_key: &str, errors: &mut Vec<String>| {
                if kinds.contains(&self.str(kind_key)) {
                    let p = self.str(path_key);
                    if p.is_empty() {
                        errors.push(format!(
                            "{kind_key} = {} needs {path_key}",
                            self.str(kind_key)
                        ));
                    } else if !self.path(path_key).is_file() {
                        errors.push(format!("{path_key}: no such file `{p}`"));
                    }
                }
            };
        needs_file(
            "model.kind",
            &["layered", "met"],
            "model.profile",
            &mut errors,
        );
        needs_file("scenario.rx", &["track"], "scenario.rx_track", &mut errors);
        for k in [
            "sim.dt_s",
            "sim.duration_s",
            "sim.ephemeris_interval_s",
            "sim.truth_spacing_m",
            "gpr.length_scale_s",
        ] {
            if !(self.f64(k) > 0.0) {
                errors.push(format!("{k} must be positive"));
            }
        }
        for k in ["sim.noise_m", "sim.clock_walk_m"] {
            if self.f64(k) < 0.0 {
                errors.push(format!("{k} must not be negative"));
            }
        }
        if self.count("gpr.chunk") <= 2 * self.count("gpr.overlap") {
            errors.push("gpr.chunk must exceed twice gpr.overlap".into());
        }
        errors
    }

    /// `key = value` lines for every key, sorted, plus the seed.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out.push_str(&format!("run.seed = {}\n", self.seed));
        out
    }

    pub fn str(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("undeclared key {key}"))
    }

    pub fn f64(&self, key: &str) -> f64 {
        self.str(key).parse().unwrap_or(f64::NAN)
    }

    pub fn opt_f64(&self, key: &str) -> Option<f64> {
        self.str(key).parse().ok()
    }

    pub fn count(&self, key: &str) -> usize {
        self.str(key).parse().unwrap_or(0)
    }

    pub fn flag(&self, key: &str) -> bool {
        self.str(key) == "true"
    }

    pub fn path(&self, key: &str) -> PathBuf {
        self.base_dir.join(self.str(key))
    }
}

/// A commented configuration listing every key at its default.
pub fn default_text() -> String {
    let mut out = String::from("# balloon-ro run configuration; every key is optional\n");
    let mut section = "";
    for k in schema() {
        let s = k.name.split('.').next().unwrap_or("");
        if s != section {
            out.push('\n');
            section = s;
        }
        let opts = match k.kind {
            Kind::Choice(o) => format!(" [{}]", o.join("|")),
            _ => String::new(),
        };
        out.push_str(&format!("# {}{opts}\n{} = {}\n", k.help, k.name, k.default));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::parse(text, Path::new("."), 0)
    }

    #[test]
    fn empty_file_is_all_defaults() {
        let c = parse("").unwrap();
        assert_eq!(c.str("model.kind"), "exponential");
        assert_eq!(c.f64("gpr.length_scale_s"), 5.0);
        assert_eq!(c.opt_f64("gpr.noise_sigma_m"), None);
        assert_eq!(c.hash.len(), 64);
    }

    #[test]
    fn hash_ignores_layout_and_spelled_out_defaults() {
        let a = parse("").unwrap();
        let b = parse("# comment\n\n  model.n0 =   300.0   # same value\ngpr.chunk=512\n").unwrap();
        assert_eq!(a.hash, b.hash);
        let c = parse("model.n0 = 310").unwrap();
        assert_ne!(a.hash, c.hash);
        let d = RunConfig::parse("", Path::new("."), 7).unwrap();
        assert_ne!(a.hash, d.hash);
    }

    #[test]
    fn all_errors_reported_together() {
        let err = parse("model.nO = 3\nmodel.kind = cubic\ngpr.chunk = -1\nno equals sign\nmodel.n0 = 1\nmodel.n0 = 2\n")
            .unwrap_err();
        let text = err.to_string();
        assert_eq!(err.0.len(), 5, "{text}");
        assert!(text.contains("unknown key `model.nO`"));
        assert!(text.contains("expected one of"));
        assert!(text.contains("already set on line 5"));
    }

    #[test]
    fn missing_profile_file_is_reported() {
        let err = parse("model.kind = layered\nmodel.profile = /nonexistent.csv\n").unwrap_err();
        assert!(err.0[0].contains("no such file"), "{err}");
        let err = parse("model.kind = met\n").unwrap_err();
        assert!(err.0[0].contains("needs model.profile"));
    }

    #[test]
    fn default_text_parses_to_defaults() {
        let c = parse(&default_text()).unwrap();
        assert_eq!(c.hash, parse("").unwrap().hash);
    }
}
