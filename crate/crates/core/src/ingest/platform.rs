//! Platform trajectory CSV: `week,tow,x_m,y_m,z_m,vx_mps,vy_mps,vz_mps[,sigma_m]`.

use std::fmt::Write as _;

use crate::error::{ParseError, Result};
use crate::frames::EcefVec;
use crate::ingest::PlatformState;
use crate::time::Epoch;

const COLUMNS: [&str; 8] = [
    "week", "tow", "x_m", "y_m", "z_m", "vx_mps", "vy_mps", "vz_mps",
];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PlatformReport {
    /// Rows dropped for non-finite fields.
    pub rejected: usize,
    /// Rows outside the balloon envelope (kept).
    pub implausible: usize,
}

pub(crate) fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes())
}

pub(crate) fn csv_error(e: csv::Error) -> ParseError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    ParseError::new(line, 1, e.to_string())
}

/// Column positions for the named header fields, erroring on the first
/// missing one.
pub(crate) fn header_indices(
    headers: &csv::StringRecord,
    names: &[&str],
) -> std::result::Result<Vec<usize>, ParseError> {
    names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| ParseError::new(1, 1, format!("missing column `{name}`")))
        })
        .collect()
}

pub fn parse_platform_csv(text: &str) -> Result<(Vec<PlatformState>, PlatformReport)> {
    let mut rdr = reader(text);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let idx = header_indices(&headers, &COLUMNS)?;
    let sigma_idx = headers.iter().position(|h| h == "sigma_m");

    let mut report = PlatformReport::default();
    let mut out: Vec<PlatformState> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let get = |i: usize| -> std::result::Result<f64, ParseError> {
            let raw = rec
                .get(i)
                .ok_or_else(|| ParseError::new(line, i + 1, "short row"))?;
            raw.parse::<f64>()
                .map_err(|_| ParseError::new(line, i + 1, format!("invalid number `{raw}`")))
        };
        let week_raw = rec
            .get(idx[0])
            .ok_or_else(|| ParseError::new(line, idx[0] + 1, "short row"))?;
        let week: u32 = week_raw
            .parse()
            .map_err(|_| ParseError::new(line, idx[0] + 1, format!("invalid week `{week_raw}`")))?;
        let vals = idx[1..]
            .iter()
            .map(|&i| get(i))
            .collect::<std::result::Result<Vec<f64>, _>>()?;
        let sigma = match sigma_idx.and_then(|i| rec.get(i)) {
            Some(s) if !s.is_empty() => Some(
                s.parse::<f64>()
                    .map_err(|_| ParseError::new(line, 9, format!("invalid sigma `{s}`")))?,
            ),
            _ => None,
        };
        if vals.iter().any(|v| !v.is_finite()) || sigma.is_some_and(|s| !s.is_finite()) {
            report.rejected += 1;
            continue;
        }
        let t = Epoch::new(week, vals[0]).map_err(|e| ParseError::new(line, 2, e.to_string()))?;
        if let Some(prev) = out.last() {
            if t.seconds_since(&prev.t) <= 0.0 {
                return Err(ParseError::new(line, 1, "platform rows out of time order").into());
            }
        }
        let state = PlatformState {
            t,
            pos: EcefVec::new(vals[1], vals[2], vals[3]),
            vel: EcefVec::new(vals[4], vals[5], vals[6]),
            pos_sigma: sigma,
        };
        if !state.is_plausible_balloon() {
            report.implausible += 1;
        }
        out.push(state);
    }
    Ok((out, report))
}

/// Writes states with shortest round-trip float formatting.
pub fn write_platform_csv(states: &[PlatformState]) -> String {
    let with_sigma = states.iter().any(|s| s.pos_sigma.is_some());
    let mut s = String::new();
    s.push_str(&COLUMNS.join(","));
    if with_sigma {
        s.push_str(",sigma_m");
    }
    s.push('\n');
    for p in states {
        let _ = write!(
            s,
            "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            p.t.week(),
            p.t.tow(),
            p.pos.x,
            p.pos.y,
            p.pos.z,
            p.vel.x,
            p.vel.y,
            p.vel.z
        );
        if with_sigma {
            match p.pos_sigma {
                Some(v) => {
                    let _ = write!(s, ",{v:?}");
                }
                None => s.push(','),
            }
        }
        s.push('\n');
    }
    s
}
