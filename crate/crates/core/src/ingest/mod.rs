//! Readers for raw observables, precise orbits and platform trajectories,
//! and alignment of the three into per-satellite occultation datasets.

mod align;
mod obs_csv;
mod platform;
mod rinex;
mod sp3;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseError, Result};
use crate::frames::EcefVec;
use crate::time::Epoch;

pub use align::{align_epochs, AlignConfig, AlignReport, OccultationDataset};
pub use obs_csv::{parse_obs_csv, write_obs_csv};
pub(crate) use platform::{csv_error, header_indices, reader as csv_reader};
pub use platform::{parse_platform_csv, write_platform_csv, PlatformReport};
pub use rinex::{parse_rinex_obs, write_rinex_obs, RinexReport};
pub use sp3::{parse_sp3, write_sp3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Constellation {
    Gps,
    Galileo,
    Beidou,
    Glonass,
}

impl Constellation {
    pub fn letter(self) -> char {
        match self {
            Constellation::Gps => 'G',
            Constellation::Galileo => 'E',
            Constellation::Beidou => 'C',
            Constellation::Glonass => 'R',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'G' => Some(Constellation::Gps),
            'E' => Some(Constellation::Galileo),
            'C' => Some(Constellation::Beidou),
            'R' => Some(Constellation::Glonass),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Constellation::Gps => "GPS",
            Constellation::Galileo => "GAL",
            Constellation::Beidou => "BDS",
            Constellation::Glonass => "GLO",
        }
    }

    /// Carrier frequency (Hz) of the tracked L1-band signal. GLONASS uses the
    /// nominal FDMA centre since the channel number is not carried.
    pub fn carrier_frequency(self) -> f64 {
        match self {
            Constellation::Gps | Constellation::Galileo => crate::constants::F_L1,
            Constellation::Beidou => 1561.098e6,
            Constellation::Glonass => 1602.0e6,
        }
    }

    pub fn wavelength(self) -> f64 {
        crate::constants::SPEED_OF_LIGHT / self.carrier_frequency()
    }

    /// Default carrier-phase code priority for this system.
    pub fn default_phase_codes(self) -> &'static [&'static str] {
        match self {
            Constellation::Gps => &["L1C", "L1X", "L1W"],
            Constellation::Galileo => &["L1C", "L1X"],
            Constellation::Beidou => &["L2I", "L1X"],
            Constellation::Glonass => &["L1C", "L1P"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SatId {
    pub constellation: Constellation,
    pub prn: u8,
}

impl SatId {
    pub fn new(constellation: Constellation, prn: u8) -> Result<Self> {
        if !(1..=63).contains(&prn) {
            return Err(Error::InvalidInput(format!("PRN {prn} outside 1..=63")));
        }
        Ok(SatId { constellation, prn })
    }

    pub fn gps(prn: u8) -> Self {
        SatId::new(Constellation::Gps, prn).expect("valid GPS PRN")
    }

    /// GLONASS is parsed but left out of processing unless asked for.
    pub fn excluded_by_default(&self) -> bool {
        self.constellation == Constellation::Glonass
    }
}

impl fmt::Display for SatId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:02}", self.constellation.letter(), self.prn)
    }
}

impl FromStr for SatId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut chars = s.chars();
        let letter = chars
            .next()
            .ok_or_else(|| Error::InvalidInput("empty satellite id".into()))?;
        let constellation = Constellation::from_letter(letter)
            .ok_or_else(|| Error::InvalidInput(format!("unknown constellation `{letter}`")))?;
        let prn: u8 = chars
            .as_str()
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad satellite id `{s}`")))?;
        SatId::new(constellation, prn)
    }
}

/// One receiver measurement of one satellite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsEpoch {
    pub t: Epoch,
    pub sat: SatId,
    /// Carrier phase (cycles).
    pub carrier_phase: f64,
    /// Doppler (Hz).
    pub doppler: f64,
    /// Signal-to-noise ratio (dB-Hz).
    pub snr: f64,
    /// Pseudorange (m).
    pub pseudorange: Option<f64>,
    pub loss_of_lock: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformState {
    pub t: Epoch,
    pub pos: EcefVec,
    pub vel: EcefVec,
    pub pos_sigma: Option<f64>,
}

impl PlatformState {
    /// Within the balloon envelope: geocentric radius between the mean Earth
    /// radius and 60 km above it, speed below 400 m/s.
    pub fn is_plausible_balloon(&self) -> bool {
        let r = self.pos.norm();
        let re = crate::constants::R_EARTH_MEAN;
        // the ellipsoid dips ~7 km below the mean radius at the poles
        r > re - 25_000.0 && r < re + 60_000.0 && self.vel.norm() < 400.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EphemerisSample {
    pub t: Epoch,
    pub pos: EcefVec,
    /// Satellite clock bias (s), absent when the product flags it bad.
    pub clock_bias: Option<f64>,
}

/// Time-ordered orbit samples of one satellite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatEphemeris {
    pub sat: SatId,
    pub samples: Vec<EphemerisSample>,
}

impl SatEphemeris {
    pub fn start(&self) -> Option<Epoch> {
        self.samples.first().map(|s| s.t)
    }

    pub fn end(&self) -> Option<Epoch> {
        self.samples.last().map(|s| s.t)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EphemerisTable {
    /// Nominal sample spacing (s).
    pub interval: f64,
    pub sats: BTreeMap<SatId, SatEphemeris>,
}

impl EphemerisTable {
    pub fn get(&self, sat: &SatId) -> Option<&SatEphemeris> {
        self.sats.get(sat)
    }
}

/// Fixed-width field of an ASCII record; `None` when the line is too short or
/// the range splits a multi-byte character.
pub(crate) fn field(line: &str, start: usize, end: usize) -> Option<&str> {
    let end = end.min(line.len());
    if start >= end {
        return None;
    }
    line.get(start..end)
}

pub(crate) fn parse_num<T: FromStr>(
    line: &str,
    lineno: usize,
    start: usize,
    end: usize,
    what: &str,
) -> std::result::Result<T, ParseError> {
    let raw = field(line, start, end)
        .ok_or_else(|| ParseError::new(lineno, start + 1, format!("missing {what}")))?;
    raw.trim().parse().map_err(|_| {
        ParseError::new(
            lineno,
            start + 1,
            format!("invalid {what} `{}`", raw.trim()),
        )
    })
}
