use serde::{Deserialize, Serialize};

use crate::atmosphere::AtmosphereModel;
use crate::error::{Error, Result};
use crate::frames::{elevation_azimuth, EcefVec};
use crate::geometry::{light_time_range, SatState, Trajectory};
use crate::ingest::{ObsEpoch, PlatformState, SatId};
use crate::preprocess::{ExcessPhaseSeries, PhaseSample, SampleFlag, Stage};
use crate::raytracer::solve_connection;
use crate::time::Epoch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimStatus {
    Ok,
    /// Tangent point below the model surface.
    Blocked,
    /// No ray solution at this epoch.
    Failed,
}

/// One simulated epoch. The transmitter state is taken at emission and
/// expressed in the Earth frame of the receive epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEpoch {
    pub t: Epoch,
    pub rx: SatState,
    pub tx: SatState,
    /// Straight-line light-time range (m).
    pub range: f64,
    pub range_rate: f64,
    /// Transmitter velocity whose projection on the line of sight gives `range_rate`.
    pub tx_vel_eff: EcefVec,
    pub excess_phase: f64,
    pub excess_doppler: f64,
    pub true_alpha: f64,
    pub true_a: f64,
    pub tangent_radius: f64,
    pub elevation: f64,
    pub status: SimStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSeries {
    pub epochs: Vec<SimEpoch>,
}

impl SimSeries {
    pub fn ok(&self) -> impl Iterator<Item = &SimEpoch> {
        self.epochs.iter().filter(|e| e.status == SimStatus::Ok)
    }

    /// Carrier-phase observables a receiver would log for `sat`: phase is
    /// the optical path in cycles, Doppler its negated rate. Only epochs
    /// with a ray solution are tracked.
    pub fn observations(&self, sat: SatId) -> Vec<ObsEpoch> {
        let lambda = sat.constellation.wavelength();
        self.ok()
            .map(|e| ObsEpoch {
                t: e.t,
                sat,
                carrier_phase: (e.range + e.excess_phase) / lambda,
                doppler: -(e.range_rate + e.excess_doppler) / lambda,
                snr: (48.0 + 1.5 * e.elevation.to_degrees()).clamp(20.0, 50.0),
                pseudorange: Some(e.range + e.excess_phase),
                loss_of_lock: false,
            })
            .collect()
    }

    /// The simulated truth in the smoothed-profile layout, so retrieval
    /// reads it exactly like preprocessed data. Epochs without a ray
    /// become gaps.
    pub fn to_profile(&self, sat: SatId) -> ExcessPhaseSeries {
        let samples = self
            .epochs
            .iter()
            .map(|e| {
                let ok = e.status == SimStatus::Ok;
                PhaseSample {
                    t: e.t,
                    excess_phase: if ok { e.excess_phase } else { f64::NAN },
                    excess_doppler: Some(if ok { e.excess_doppler } else { f64::NAN }),
                    snr: (48.0 + 1.5 * e.elevation.to_degrees()).clamp(20.0, 50.0),
                    elevation: e.elevation,
                    flag: if ok { SampleFlag::Ok } else { SampleFlag::Gap },
                    rx: e.rx,
                    tx: e.tx,
                    posterior_sigma: None,
                }
            })
            .collect();
        ExcessPhaseSeries {
            sat,
            reference_sat: None,
            stage: Stage::Smoothed,
            wavelength: sat.constellation.wavelength(),
            config_hash: String::new(),
            samples,
        }
    }

    /// Receiver states at every epoch where the receiver was evaluated.
    pub fn platform_states(&self) -> Vec<PlatformState> {
        self.epochs
            .iter()
            .filter(|e| e.rx.pos.norm() > 0.0)
            .map(|e| PlatformState {
                t: e.t,
                pos: e.rx.pos,
                vel: e.rx.vel,
                pos_sigma: None,
            })
            .collect()
    }
}

fn overlap(
    a: Option<(Epoch, Epoch)>,
    b: Option<(Epoch, Epoch)>,
    start: Epoch,
    end: Epoch,
) -> (Epoch, Epoch) {
    let mut lo = start;
    let mut hi = end;
    for (s, e) in [a, b].into_iter().flatten() {
        if s.seconds_since(&lo) > 0.0 {
            lo = s;
        }
        if hi.seconds_since(&e) > 0.0 {
            hi = e;
        }
    }
    (lo, hi)
}

/// Solves the ray at every `dt` over `[start, end]` and differentiates the
/// excess phase with centred differences.
pub fn simulate_occultation(
    model: &AtmosphereModel,
    tx: &dyn Trajectory,
    rx: &dyn Trajectory,
    start: Epoch,
    end: Epoch,
    dt: f64,
) -> Result<SimSeries> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!(
            "time step must be positive, got {dt}"
        )));
    }
    // emission epochs lie up to ~0.1 s before reception
    let (lo, hi) = overlap(
        tx.span().map(|(s, e)| (s.add_seconds(0.2), e)),
        rx.span(),
        start,
        end,
    );
    let span = hi.seconds_since(&lo);
    if !(span >= 2.0 * dt) {
        return Err(Error::NoOverlap(format!(
            "trajectories overlap for {span:.3} s; need at least {:.3} s",
            2.0 * dt
        )));
    }
    let steps = (span / dt + 1e-9).floor() as usize;
    let surface = model.surface_radius();
    let mut epochs = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = lo.add_seconds(k as f64 * dt);
        epochs.push(simulate_epoch(model, tx, rx, t, surface));
    }
    differentiate(&mut epochs);
    Ok(SimSeries { epochs })
}

fn simulate_epoch(
    model: &AtmosphereModel,
    tx: &dyn Trajectory,
    rx: &dyn Trajectory,
    t: Epoch,
    surface: f64,
) -> SimEpoch {
    let failed = |rx_state: SatState| SimEpoch {
        t,
        rx: rx_state,
        tx: SatState {
            pos: EcefVec::zeros(),
            vel: EcefVec::zeros(),
        },
        range: f64::NAN,
        range_rate: f64::NAN,
        tx_vel_eff: EcefVec::zeros(),
        excess_phase: f64::NAN,
        excess_doppler: f64::NAN,
        true_alpha: f64::NAN,
        true_a: f64::NAN,
        tangent_radius: f64::NAN,
        elevation: f64::NAN,
        status: SimStatus::Failed,
    };
    let Ok(rx_state) = rx.state_at(t) else {
        return failed(SatState {
            pos: EcefVec::zeros(),
            vel: EcefVec::zeros(),
        });
    };
    let Ok(lt) = light_time_range(&rx_state.pos, tx, t) else {
        return failed(rx_state);
    };
    let (range_rate, tx_vel_eff) = lt.range_rate(&rx_state.pos, &rx_state.vel);
    let elevation = elevation_azimuth(&rx_state.pos, &lt.tx_pos)
        .map(|(e, _)| e)
        .unwrap_or(f64::NAN);
    let tx_state = SatState {
        pos: lt.tx_pos,
        vel: lt.tx_vel,
    };
    match solve_connection(model, &lt.tx_pos, &rx_state.pos) {
        Ok(ray) => SimEpoch {
            t,
            rx: rx_state,
            tx: tx_state,
            range: lt.range,
            range_rate,
            tx_vel_eff,
            excess_phase: ray.excess_path,
            excess_doppler: f64::NAN,
            true_alpha: ray.alpha,
            true_a: ray.a,
            tangent_radius: ray.tangent_radius,
            elevation,
            status: if ray.tangent_radius < surface {
                SimStatus::Blocked
            } else {
                SimStatus::Ok
            },
        },
        Err(_) => SimEpoch {
            tx: tx_state,
            range: lt.range,
            range_rate,
            tx_vel_eff,
            elevation,
            ..failed(rx_state)
        },
    }
}

fn differentiate(epochs: &mut [SimEpoch]) {
    let usable = |e: &SimEpoch| e.excess_phase.is_finite();
    let n = epochs.len();
    for i in 0..n {
        if !usable(&epochs[i]) {
            continue;
        }
        let prev = (i > 0 && usable(&epochs[i - 1])).then(|| i - 1);
        let next = (i + 1 < n && usable(&epochs[i + 1])).then(|| i + 1);
        let (j, k) = match (prev, next) {
            (Some(p), Some(q)) => (p, q),
            (None, Some(q)) => (i, q),
            (Some(p), None) => (p, i),
            (None, None) => continue,
        };
        let dt = epochs[k].t.seconds_since(&epochs[j].t);
        epochs[i].excess_doppler = (epochs[k].excess_phase - epochs[j].excess_phase) / dt;
    }
}
