//! Pairing observations with platform states and cutting satellite arcs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ingest::{EphemerisTable, ObsEpoch, PlatformState, SatEphemeris, SatId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    /// Maximum |t_obs - t_platform| for a pairing (s).
    pub tolerance: f64,
    /// Observation gaps longer than this split an arc (s).
    pub gap_split_s: f64,
    /// Keep satellites that are excluded by default (GLONASS).
    pub include_excluded: bool,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            tolerance: 0.05,
            gap_split_s: 30.0,
            include_excluded: false,
        }
    }
}

/// A single-satellite arc with a platform state paired to every observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccultationDataset {
    pub id: String,
    pub sat: SatId,
    pub obs: Vec<ObsEpoch>,
    /// `platform[i]` is the state paired with `obs[i]`.
    pub platform: Vec<PlatformState>,
    pub ephem: SatEphemeris,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AlignReport {
    /// Observations with no platform state inside the tolerance.
    pub unpaired: usize,
    /// Observations of satellites excluded by default.
    pub excluded: usize,
    /// Observations of satellites missing from the ephemeris or outside its span.
    pub no_ephemeris: usize,
    /// Arc boundaries introduced by gaps.
    pub gap_splits: usize,
    pub warnings: Vec<String>,
}

fn median_spacing(times: &[f64]) -> Option<f64> {
    if times.len() < 2 {
        return None;
    }
    let mut d: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    d.sort_by(f64::total_cmp);
    Some(d[d.len() / 2])
}

fn nearest(platform: &[PlatformState], obs: &ObsEpoch) -> Option<(usize, f64)> {
    let idx = platform.partition_point(|p| p.t.seconds_since(&obs.t) < 0.0);
    [idx.checked_sub(1), Some(idx)]
        .into_iter()
        .flatten()
        .filter(|&i| i < platform.len())
        .map(|i| (i, platform[i].t.seconds_since(&obs.t).abs()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Groups observations by satellite, pairs each with the nearest platform
/// state within `cfg.tolerance` and splits arcs at gaps. Never interpolates;
/// every output observation is an input observation.
pub fn align_epochs(
    obs: &[ObsEpoch],
    platform: &[PlatformState],
    ephem: &EphemerisTable,
    cfg: &AlignConfig,
) -> (Vec<OccultationDataset>, AlignReport) {
    let mut report = AlignReport::default();
    let mut by_sat: BTreeMap<SatId, Vec<&ObsEpoch>> = BTreeMap::new();
    for o in obs {
        by_sat.entry(o.sat).or_default().push(o);
    }

    if let (Some(p0), Some(o0)) = (platform.first(), obs.first()) {
        let pt: Vec<f64> = platform.iter().map(|p| p.t.seconds_since(&p0.t)).collect();
        let first_sat = obs[0].sat;
        let ot: Vec<f64> = obs
            .iter()
            .filter(|o| o.sat == first_sat)
            .map(|o| o.t.seconds_since(&o0.t))
            .collect();
        if let (Some(dp), Some(dobs)) = (median_spacing(&pt), median_spacing(&ot)) {
            if dp > 10.0 * dobs {
                let msg = format!(
                    "platform sampling ({dp} s) is more than 10x sparser than observations ({dobs} s)"
                );
                log::warn!("{msg}");
                report.warnings.push(msg);
            }
        }
    }

    let mut datasets = Vec::new();
    for (sat, mut list) in by_sat {
        if sat.excluded_by_default() && !cfg.include_excluded {
            report.excluded += list.len();
            continue;
        }
        let Some(eph) = ephem.get(&sat) else {
            report.no_ephemeris += list.len();
            continue;
        };
        let (Some(e0), Some(e1)) = (eph.start(), eph.end()) else {
            report.no_ephemeris += list.len();
            continue;
        };
        list.sort_by(|a, b| a.t.seconds_since(&b.t).total_cmp(&0.0));

        let mut arcs: Vec<(Vec<ObsEpoch>, Vec<PlatformState>)> = Vec::new();
        let mut last_t = None;
        for o in list {
            if o.t.seconds_since(&e0) < 0.0 || e1.seconds_since(&o.t) < 0.0 {
                report.no_ephemeris += 1;
                continue;
            }
            let Some((i, dt)) = nearest(platform, o) else {
                report.unpaired += 1;
                continue;
            };
            if dt > cfg.tolerance {
                report.unpaired += 1;
                continue;
            }
            let split = match last_t {
                None => true,
                Some(prev) => o.t.seconds_since(&prev) > cfg.gap_split_s,
            };
            if split {
                if last_t.is_some() {
                    report.gap_splits += 1;
                }
                arcs.push((Vec::new(), Vec::new()));
            }
            let arc = arcs.last_mut().expect("arc opened above");
            arc.0.push(o.clone());
            arc.1.push(platform[i].clone());
            last_t = Some(o.t);
        }
        for (k, (obs, platform)) in arcs.into_iter().enumerate() {
            datasets.push(OccultationDataset {
                id: format!("{sat}_{:04}", k + 1),
                sat,
                obs,
                platform,
                ephem: eph.clone(),
            });
        }
    }
    (datasets, report)
}
