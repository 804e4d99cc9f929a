//! Observation pre-processing: excess phase, receiver clock calibration,
//! cycle-slip repair, Gaussian-process smoothing and profile export.
//!
//! Each step consumes a series at one [`Stage`] and returns it at the next;
//! calling a step out of order is an error.

mod calibrate;
mod excess;
mod export;
mod gpr;
mod slips;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SatState;
use crate::ingest::SatId;
use crate::time::Epoch;

pub use crate::columns::ExportFormat;
pub use calibrate::{calibrate_clock, choose_reference};
pub use excess::compute_excess_phase;
pub use export::{export_profile, import_profile, MANDATORY_VARIABLES, PROCESSING_VERSION};
pub use gpr::{gpr_smooth, GprConfig};
pub use slips::{correct_cycle_slips, SlipConfig, SlipEntry, SlipReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Raw,
    Calibrated,
    SlipCorrected,
    Smoothed,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Raw => "raw",
            Stage::Calibrated => "calibrated",
            Stage::SlipCorrected => "slip_corrected",
            Stage::Smoothed => "smoothed",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [
            Stage::Raw,
            Stage::Calibrated,
            Stage::SlipCorrected,
            Stage::Smoothed,
        ]
        .into_iter()
        .find(|st| st.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleFlag {
    Ok,
    /// No usable measurement; values are NaN until smoothing fills them.
    Gap,
    /// First sample after a repaired cycle slip.
    SlipCorrected,
    /// Filled by the smoother at a former gap.
    Interpolated,
}

impl SampleFlag {
    pub fn code(self) -> i32 {
        match self {
            SampleFlag::Ok => 0,
            SampleFlag::Gap => 1,
            SampleFlag::SlipCorrected => 2,
            SampleFlag::Interpolated => 3,
        }
    }

    pub fn from_code(c: i32) -> Option<Self> {
        match c {
            0 => Some(SampleFlag::Ok),
            1 => Some(SampleFlag::Gap),
            2 => Some(SampleFlag::SlipCorrected),
            3 => Some(SampleFlag::Interpolated),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSample {
    pub t: Epoch,
    /// Excess phase (m).
    pub excess_phase: f64,
    /// Excess Doppler (m/s), set by smoothing.
    pub excess_doppler: Option<f64>,
    /// dB-Hz.
    pub snr: f64,
    /// Straight-line elevation of the transmitter (rad).
    pub elevation: f64,
    pub flag: SampleFlag,
    pub rx: SatState,
    /// Transmitter at emission, in the Earth frame of the receive epoch.
    pub tx: SatState,
    /// Posterior standard deviation of the smoothed excess phase (m).
    pub posterior_sigma: Option<f64>,
}

impl PhaseSample {
    pub fn is_usable(&self) -> bool {
        self.flag != SampleFlag::Gap && self.excess_phase.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcessPhaseSeries {
    pub sat: SatId,
    pub reference_sat: Option<SatId>,
    pub stage: Stage,
    /// Carrier wavelength of the tracked signal (m).
    pub wavelength: f64,
    pub config_hash: String,
    pub samples: Vec<PhaseSample>,
}

impl ExcessPhaseSeries {
    pub(crate) fn require(&self, expected: Stage) -> Result<()> {
        if self.stage != expected {
            return Err(Error::Stage {
                expected: expected.name(),
                found: self.stage.name(),
            });
        }
        Ok(())
    }

    /// Checks time order and that Doppler is present exactly from the
    /// smoothed stage on.
    pub fn validate(&self) -> Result<()> {
        for w in self.samples.windows(2) {
            if !(w[1].t.seconds_since(&w[0].t) > 0.0) {
                return Err(Error::Constraint(format!(
                    "samples not time-ordered at {}",
                    w[1].t
                )));
            }
        }
        let smoothed = self.stage >= Stage::Smoothed;
        if let Some(s) = self
            .samples
            .iter()
            .find(|s| s.excess_doppler.is_some() != smoothed)
        {
            return Err(Error::Constraint(format!(
                "excess Doppler {} at {} in stage {}",
                if smoothed { "missing" } else { "present" },
                s.t,
                self.stage.name()
            )));
        }
        if !(self.wavelength > 0.0) {
            return Err(Error::Constraint(format!(
                "wavelength must be positive, got {}",
                self.wavelength
            )));
        }
        Ok(())
    }

    pub fn usable(&self) -> impl Iterator<Item = &PhaseSample> {
        self.samples.iter().filter(|s| s.is_usable())
    }

    /// Index of the usable sample with the highest elevation.
    pub(crate) fn anchor_index(&self) -> Option<usize> {
        self.samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_usable() && s.elevation.is_finite())
            .max_by(|a, b| a.1.elevation.total_cmp(&b.1.elevation))
            .map(|(i, _)| i)
    }

    /// Seconds since the first sample.
    pub(crate) fn rel_times(&self) -> Vec<f64> {
        match self.samples.first() {
            Some(f) => self
                .samples
                .iter()
                .map(|s| s.t.seconds_since(&f.t))
                .collect(),
            None => Vec::new(),
        }
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::series;
    use super::*;

    #[test]
    fn stage_order_and_names() {
        assert!(Stage::Raw < Stage::Calibrated && Stage::SlipCorrected < Stage::Smoothed);
        for st in [
            Stage::Raw,
            Stage::Calibrated,
            Stage::SlipCorrected,
            Stage::Smoothed,
        ] {
            assert_eq!(Stage::from_name(st.name()), Some(st));
        }
        assert_eq!(Stage::from_name("cooked"), None);
    }

    #[test]
    fn flag_codes_round_trip() {
        for c in 0..4 {
            assert_eq!(SampleFlag::from_code(c).unwrap().code(), c);
        }
        assert!(SampleFlag::from_code(7).is_none());
    }

    #[test]
    fn validate_catches_doppler_before_smoothing() {
        let mut s = series(&[0.0, 1.0, 2.0], Stage::Calibrated);
        s.validate().unwrap();
        s.samples[1].excess_doppler = Some(1.0);
        assert!(s.validate().is_err());
        s.samples.swap(0, 2);
        assert!(s.validate().is_err());
    }
}
