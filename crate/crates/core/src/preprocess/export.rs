use std::path::Path;

use crate::columns::{ColumnFile, ExportFormat};
use crate::error::{Error, Result};
use crate::frames::EcefVec;
use crate::geometry::SatState;
use crate::preprocess::{ExcessPhaseSeries, PhaseSample, SampleFlag, Stage};
use crate::time::Epoch;

pub const PROCESSING_VERSION: &str = concat!("ro-core ", env!("CARGO_PKG_VERSION"));

/// Variables every profile file must carry.
pub const MANDATORY_VARIABLES: [&str; 13] = [
    "time",
    "gps_week",
    "gps_tow",
    "excess_phase",
    "excess_doppler",
    "snr",
    "elevation",
    "flag",
    "rx_pos",
    "rx_vel",
    "tx_pos",
    "tx_vel",
    "posterior_sigma",
];

const VECTORS: [&str; 4] = ["rx_pos", "rx_vel", "tx_pos", "tx_vel"];

fn to_columns(s: &ExcessPhaseSeries) -> ColumnFile {
    let mut c = ColumnFile::default();
    c.dimensions.insert("time".into(), s.samples.len());
    c.dimensions.insert("xyz".into(), 3);
    let attrs = &mut c.global_attributes;
    attrs.insert("sat_id".into(), s.sat.to_string());
    attrs.insert(
        "reference_sat".into(),
        s.reference_sat.map(|r| r.to_string()).unwrap_or_default(),
    );
    attrs.insert("processing_version".into(), PROCESSING_VERSION.into());
    attrs.insert("config_hash".into(), s.config_hash.clone());
    attrs.insert("stage".into(), s.stage.name().into());
    c.numeric_attributes
        .insert("wavelength_m".into(), s.wavelength);

    let first = s.samples.first().map(|x| x.t);
    let col = |f: &dyn Fn(&PhaseSample) -> f64| s.samples.iter().map(f).collect::<Vec<f64>>();
    c.add(
        "time",
        &["time"],
        col(&|x| first.map_or(0.0, |f| x.t.seconds_since(&f))),
    );
    c.add_int("gps_week", &["time"], col(&|x| x.t.week() as f64));
    c.add("gps_tow", &["time"], col(&|x| x.t.tow()));
    c.add("excess_phase", &["time"], col(&|x| x.excess_phase));
    c.add(
        "excess_doppler",
        &["time"],
        col(&|x| x.excess_doppler.unwrap_or(f64::NAN)),
    );
    c.add("snr", &["time"], col(&|x| x.snr));
    c.add("elevation", &["time"], col(&|x| x.elevation));
    c.add_int("flag", &["time"], col(&|x| x.flag.code() as f64));
    c.add(
        "posterior_sigma",
        &["time"],
        col(&|x| x.posterior_sigma.unwrap_or(f64::NAN)),
    );
    for name in VECTORS {
        let data = s
            .samples
            .iter()
            .flat_map(|x| {
                let v = match name {
                    "rx_pos" => x.rx.pos,
                    "rx_vel" => x.rx.vel,
                    "tx_pos" => x.tx.pos,
                    _ => x.tx.vel,
                };
                [v.x, v.y, v.z]
            })
            .collect();
        c.add(name, &["time", "xyz"], data);
    }
    c
}

fn from_columns(mut c: ColumnFile) -> Result<ExcessPhaseSeries> {
    for name in MANDATORY_VARIABLES {
        if !c.variables.contains_key(name) {
            return Err(Error::MissingVariable(name.into()));
        }
    }
    let sat = c.attr("sat_id")?.parse()?;
    let reference_sat = match c.attr("reference_sat")? {
        "" => None,
        r => Some(r.parse()?),
    };
    let stage_name = c.attr("stage")?;
    let stage = Stage::from_name(stage_name)
        .ok_or_else(|| Error::Format(format!("unknown stage `{stage_name}`")))?;
    let config_hash = c.attr("config_hash")?.to_string();
    let wavelength = c.num_attr("wavelength_m")?;

    let week = c.take("gps_week")?;
    let tow = c.take("gps_tow")?;
    let phase = c.take("excess_phase")?;
    let doppler = c.take("excess_doppler")?;
    let snr = c.take("snr")?;
    let elev = c.take("elevation")?;
    let flag = c.take("flag")?;
    let sigma = c.take("posterior_sigma")?;
    let vecs = VECTORS
        .iter()
        .map(|v| c.take(v))
        .collect::<Result<Vec<_>>>()?;
    let vec_at =
        |k: usize, i: usize| EcefVec::new(vecs[k][3 * i], vecs[k][3 * i + 1], vecs[k][3 * i + 2]);
    let smoothed = stage >= Stage::Smoothed;
    let mut samples = Vec::with_capacity(tow.len());
    for i in 0..tow.len() {
        if !(week[i] >= 0.0 && week[i].fract() == 0.0) {
            return Err(Error::Format(format!(
                "bad gps_week {} at index {i}",
                week[i]
            )));
        }
        let code = flag[i];
        let flag = SampleFlag::from_code(code as i32)
            .filter(|_| code.fract() == 0.0)
            .ok_or_else(|| Error::Format(format!("unknown flag code {code} at index {i}")))?;
        samples.push(PhaseSample {
            t: Epoch::new(week[i] as u32, tow[i])?,
            excess_phase: phase[i],
            excess_doppler: smoothed.then_some(doppler[i]),
            snr: snr[i],
            elevation: elev[i],
            flag,
            rx: SatState {
                pos: vec_at(0, i),
                vel: vec_at(1, i),
            },
            tx: SatState {
                pos: vec_at(2, i),
                vel: vec_at(3, i),
            },
            posterior_sigma: smoothed.then_some(sigma[i]),
        });
    }
    let series = ExcessPhaseSeries {
        sat,
        reference_sat,
        stage,
        wavelength,
        config_hash,
        samples,
    };
    series.validate()?;
    Ok(series)
}

/// Writes a smoothed series. An existing file at `path` is replaced.
pub fn export_profile(s: &ExcessPhaseSeries, path: &Path, format: ExportFormat) -> Result<()> {
    s.require(Stage::Smoothed)?;
    s.validate()?;
    to_columns(s).write(path, format)
}

/// Reads a profile written in either format.
pub fn import_profile(path: &Path) -> Result<ExcessPhaseSeries> {
    from_columns(ColumnFile::read(path)?)
}
