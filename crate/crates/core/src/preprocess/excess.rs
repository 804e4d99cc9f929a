use crate::constants::SPEED_OF_LIGHT;
use crate::error::{Error, Result};
use crate::frames::{elevation_azimuth, EcefVec};
use crate::geometry::{light_time_range, SatState};
use crate::ingest::{OccultationDataset, SatEphemeris};
use crate::preprocess::{ExcessPhaseSeries, PhaseSample, SampleFlag, Stage};
use crate::time::Epoch;

/// Satellite clock bias at `t` (s) by linear interpolation between the
/// bracketing samples; `None` when either is missing.
fn sat_clock(ephem: &SatEphemeris, t: Epoch) -> Option<f64> {
    let idx = ephem
        .samples
        .partition_point(|s| s.t.seconds_since(&t) <= 0.0);
    let (a, b) = (
        ephem.samples.get(idx.checked_sub(1)?)?,
        ephem.samples.get(idx)?,
    );
    let (ca, cb) = (a.clock_bias?, b.clock_bias?);
    let w = t.seconds_since(&a.t) / b.t.seconds_since(&a.t);
    Some(ca + w * (cb - ca))
}

fn finite(v: &EcefVec) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Carrier phase minus the straight-line light-time range, with the arc
/// ambiguity removed at the highest-elevation epoch.
///
/// Epochs without a usable platform state or ephemeris become gaps.
pub fn compute_excess_phase(ds: &OccultationDataset) -> Result<ExcessPhaseSeries> {
    if ds.obs.is_empty() {
        return Err(Error::InvalidInput(format!(
            "dataset {} has no observations",
            ds.id
        )));
    }
    let wavelength = ds.sat.constellation.wavelength();
    let zero = SatState {
        pos: EcefVec::zeros(),
        vel: EcefVec::zeros(),
    };
    let mut samples = Vec::with_capacity(ds.obs.len());
    for (i, obs) in ds.obs.iter().enumerate() {
        let mut sample = PhaseSample {
            t: obs.t,
            excess_phase: f64::NAN,
            excess_doppler: None,
            snr: obs.snr,
            elevation: f64::NAN,
            flag: SampleFlag::Gap,
            rx: zero,
            tx: zero,
            posterior_sigma: None,
        };
        let Some(p) = ds
            .platform
            .get(i)
            .filter(|p| finite(&p.pos) && finite(&p.vel) && p.pos.norm() > 0.0)
        else {
            samples.push(sample);
            continue;
        };
        sample.rx = SatState {
            pos: p.pos,
            vel: p.vel,
        };
        match light_time_range(&p.pos, &ds.ephem, obs.t) {
            Ok(lt) => {
                sample.tx = SatState {
                    pos: lt.tx_pos,
                    vel: lt.tx_vel,
                };
                sample.elevation = elevation_azimuth(&p.pos, &lt.tx_pos)
                    .map(|e| e.0)
                    .unwrap_or(f64::NAN);
                let clock = sat_clock(&ds.ephem, lt.t_emit).unwrap_or(0.0) * SPEED_OF_LIGHT;
                let excess = wavelength * obs.carrier_phase - lt.range + clock;
                if excess.is_finite() {
                    sample.excess_phase = excess;
                    sample.flag = SampleFlag::Ok;
                }
            }
            Err(e) => log::debug!("{} at {}: {e}", ds.sat, obs.t),
        }
        samples.push(sample);
    }
    let mut series = ExcessPhaseSeries {
        sat: ds.sat,
        reference_sat: None,
        stage: Stage::Raw,
        wavelength,
        config_hash: String::new(),
        samples,
    };
    let Some(k) = series.anchor_index() else {
        return Err(Error::InvalidInput(format!(
            "dataset {} has no usable epoch",
            ds.id
        )));
    };
    let c = series.samples[k].excess_phase;
    for s in series.samples.iter_mut().filter(|s| s.is_usable()) {
        s.excess_phase -= c;
    }
    series.validate()?;
    Ok(series)
}
