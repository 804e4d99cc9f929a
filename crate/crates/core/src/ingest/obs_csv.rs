//! Native observation CSV:
//! `week,tow,sat,carrier_phase_cycles,doppler_hz,snr_dbhz,pseudorange_m,loss_of_lock`.

use std::fmt::Write as _;

use crate::error::{ParseError, Result};
use crate::ingest::platform::header_indices;
use crate::ingest::{ObsEpoch, SatId};
use crate::time::Epoch;

const COLUMNS: [&str; 8] = [
    "week",
    "tow",
    "sat",
    "carrier_phase_cycles",
    "doppler_hz",
    "snr_dbhz",
    "pseudorange_m",
    "loss_of_lock",
];

/// Parses observation CSV; rows with non-finite values are dropped and counted.
pub fn parse_obs_csv(text: &str) -> Result<(Vec<ObsEpoch>, usize)> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| ParseError::new(1, 1, e.to_string()))?
        .clone();
    let idx = header_indices(&headers, &COLUMNS)?;
    let mut out = Vec::new();
    let mut rejected = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            ParseError::new(
                e.position().map(|p| p.line() as usize).unwrap_or(0),
                1,
                e.to_string(),
            )
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let raw = |k: usize| -> std::result::Result<&str, ParseError> {
            rec.get(idx[k])
                .ok_or_else(|| ParseError::new(line, idx[k] + 1, "short row"))
        };
        let num = |k: usize| -> std::result::Result<f64, ParseError> {
            let s = raw(k)?;
            s.parse()
                .map_err(|_| ParseError::new(line, idx[k] + 1, format!("invalid number `{s}`")))
        };
        let week: u32 = raw(0)?
            .parse()
            .map_err(|_| ParseError::new(line, idx[0] + 1, "invalid week"))?;
        let tow = num(1)?;
        let sat: SatId = raw(2)?
            .parse()
            .map_err(|e: crate::Error| ParseError::new(line, idx[2] + 1, e.to_string()))?;
        let (phase, doppler, snr) = (num(3)?, num(4)?, num(5)?);
        let pseudorange = match raw(6)? {
            "" => None,
            _ => Some(num(6)?),
        };
        let loss_of_lock = match raw(7)? {
            "0" | "" => false,
            "1" => true,
            other => {
                return Err(
                    ParseError::new(line, idx[7] + 1, format!("invalid flag `{other}`")).into(),
                )
            }
        };
        if !(tow.is_finite() && phase.is_finite() && doppler.is_finite() && snr.is_finite())
            || snr < 0.0
            || pseudorange.is_some_and(|p| !p.is_finite())
        {
            rejected += 1;
            continue;
        }
        let t =
            Epoch::new(week, tow).map_err(|e| ParseError::new(line, idx[1] + 1, e.to_string()))?;
        out.push(ObsEpoch {
            t,
            sat,
            carrier_phase: phase,
            doppler,
            snr,
            pseudorange,
            loss_of_lock,
        });
    }
    Ok((out, rejected))
}

pub fn write_obs_csv(obs: &[ObsEpoch]) -> String {
    let mut s = COLUMNS.join(",");
    s.push('\n');
    for o in obs {
        let _ = write!(
            s,
            "{},{:?},{},{:?},{:?},{:?},",
            o.t.week(),
            o.t.tow(),
            o.sat,
            o.carrier_phase,
            o.doppler,
            o.snr
        );
        if let Some(p) = o.pseudorange {
            let _ = write!(s, "{p:?}");
        }
        let _ = writeln!(s, ",{}", u8::from(o.loss_of_lock));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip(rows in proptest::collection::vec(
            (0u32..3000, 0.0f64..604_799.0, 1u8..33, -1e9f64..1e9, -5e3f64..5e3,
             0.0f64..60.0, proptest::option::of(1e7f64..3e7), any::<bool>()), 0..20)) {
            let obs: Vec<ObsEpoch> = rows.into_iter().map(|(w, tow, prn, l, d, s, p, lli)| ObsEpoch {
                t: Epoch::new(w, tow).unwrap(),
                sat: SatId::gps(prn),
                carrier_phase: l,
                doppler: d,
                snr: s,
                pseudorange: p,
                loss_of_lock: lli,
            }).collect();
            let (back, rejected) = parse_obs_csv(&write_obs_csv(&obs)).unwrap();
            prop_assert_eq!(rejected, 0);
            prop_assert_eq!(back, obs);
        }
    }
}
