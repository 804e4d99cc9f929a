use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::frames::{elevation_azimuth, geodetic_from_ecef, EcefVec, GeodeticPos};
use crate::geometry::Trajectory;
use crate::ingest::SatId;
use crate::time::Epoch;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventConfig {
    /// Elevation sampling interval (s).
    pub scan_dt: f64,
    /// Elevation at which an event opens (rad).
    pub elev_high: f64,
    /// Loss threshold closing an event (rad).
    pub elev_low: f64,
}

impl Default for EventConfig {
    fn default() -> Self {
        EventConfig {
            scan_dt: 10.0,
            elev_high: 5f64.to_radians(),
            elev_low: (-6f64).to_radians(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Rising,
    Setting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccultationEvent {
    pub sat: SatId,
    pub t_start: Epoch,
    pub t_end: Epoch,
    pub kind: EventKind,
    pub min_elevation: f64,
    pub tangent_lat: f64,
    pub tangent_lon: f64,
}

/// Lowest point of the straight segment `a`-`b` relative to the ellipsoid.
pub fn tangent_point(a: &EcefVec, b: &EcefVec) -> Result<GeodeticPos> {
    let height = |s: f64| geodetic_from_ecef(&(a + (b - a) * s)).map(|g| g.h);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = height(x1)?;
    let mut f2 = height(x2)?;
    while hi - lo > 1e-10 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = height(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = height(x2)?;
        }
    }
    let mut best = 0.5 * (lo + hi);
    // the minimum may sit on an endpoint when the ray climbs away
    for end in [0.0, 1.0] {
        if height(end)? < height(best)? {
            best = end;
        }
    }
    geodetic_from_ecef(&(a + (b - a) * best))
}

struct Sample {
    t: Epoch,
    elevation: f64,
    rx: EcefVec,
    tx: EcefVec,
}

/// Scans the elevation of each satellite seen from `platform` over
/// `[start, end]` and returns rising and setting events in satellite order.
pub fn detect_events(
    platform: &dyn Trajectory,
    sats: &[(SatId, &dyn Trajectory)],
    start: Epoch,
    end: Epoch,
    cfg: &EventConfig,
) -> Vec<OccultationEvent> {
    let duration = end.seconds_since(&start);
    if !(duration > 0.0) || !(cfg.scan_dt > 0.0) {
        return Vec::new();
    }
    let steps = (duration / cfg.scan_dt).floor() as usize;
    let mut events = Vec::new();
    for (sat, tx) in sats {
        let samples: Vec<Sample> = (0..=steps)
            .filter_map(|k| {
                let t = start.add_seconds(k as f64 * cfg.scan_dt);
                let rx = platform.state_at(t).ok()?.pos;
                let txp = tx.state_at(t).ok()?.pos;
                let (elevation, _) = elevation_azimuth(&rx, &txp).ok()?;
                Some(Sample {
                    t,
                    elevation,
                    rx,
                    tx: txp,
                })
            })
            .collect();
        events.extend(scan_satellite(*sat, &samples, cfg));
    }
    events
}

fn scan_satellite(sat: SatId, samples: &[Sample], cfg: &EventConfig) -> Vec<OccultationEvent> {
    let mut events = Vec::new();
    let mut i = 0;
    while i + 1 < samples.len() {
        // extend a strictly monotone run from i
        let falling = samples[i + 1].elevation < samples[i].elevation;
        let mut j = i + 1;
        while j + 1 < samples.len()
            && (samples[j + 1].elevation < samples[j].elevation) == falling
            && samples[j + 1].elevation != samples[j].elevation
        {
            j += 1;
        }
        let inside: Vec<&Sample> = samples[i..=j]
            .iter()
            .filter(|s| s.elevation < cfg.elev_high && s.elevation > cfg.elev_low)
            .collect();
        if inside.len() >= 2 {
            let lowest = inside
                .iter()
                .min_by(|a, b| a.elevation.total_cmp(&b.elevation))
                .expect("non-empty");
            if let Ok(tp) = tangent_point(&lowest.rx, &lowest.tx) {
                events.push(OccultationEvent {
                    sat,
                    t_start: inside[0].t.min_epoch(inside[inside.len() - 1].t),
                    t_end: inside[0].t.max_epoch(inside[inside.len() - 1].t),
                    kind: if falling {
                        EventKind::Setting
                    } else {
                        EventKind::Rising
                    },
                    min_elevation: lowest.elevation,
                    tangent_lat: tp.lat,
                    tangent_lon: tp.lon,
                });
            }
        }
        i = j;
    }
    events
}

trait EpochOrder {
    fn min_epoch(self, other: Epoch) -> Epoch;
    fn max_epoch(self, other: Epoch) -> Epoch;
}

impl EpochOrder for Epoch {
    fn min_epoch(self, other: Epoch) -> Epoch {
        if other.seconds_since(&self) < 0.0 {
            other
        } else {
            self
        }
    }

    fn max_epoch(self, other: Epoch) -> Epoch {
        if other.seconds_since(&self) > 0.0 {
            other
        } else {
            self
        }
    }
}
