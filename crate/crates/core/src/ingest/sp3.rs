//! SP3-c/-d precise orbit position records.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{ParseError, Result};
use crate::frames::EcefVec;
use crate::ingest::{
    field, parse_num, Constellation, EphemerisSample, EphemerisTable, SatEphemeris, SatId,
};
use crate::time::Epoch;

/// Clock values at or above this magnitude (microseconds) are the SP3 bad-value sentinel.
const CLOCK_SENTINEL: f64 = 999_999.0;

fn sp3_sat(raw: &str, lineno: usize) -> std::result::Result<Option<SatId>, ParseError> {
    let mut chars = raw.chars();
    let letter = chars.next().unwrap_or(' ');
    let constellation = match letter {
        ' ' => Some(Constellation::Gps),
        c => Constellation::from_letter(c),
    };
    let Some(constellation) = constellation else {
        return Ok(None);
    };
    let prn: u8 = chars
        .as_str()
        .trim()
        .parse()
        .map_err(|_| ParseError::new(lineno, 3, format!("invalid satellite id `{raw}`")))?;
    SatId::new(constellation, prn)
        .map(Some)
        .map_err(|e| ParseError::new(lineno, 3, e.to_string()))
}

pub fn parse_sp3(text: &str) -> Result<EphemerisTable> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (lineno, first) = lines
        .next()
        .ok_or_else(|| ParseError::new(1, 1, "empty SP3 file"))?;
    if !first.starts_with('#') {
        return Err(ParseError::new(lineno, 1, "SP3 header must start with '#'").into());
    }
    match field(first, 1, 2) {
        Some("c") | Some("d") => {}
        other => {
            return Err(ParseError::new(
                lineno,
                2,
                format!("unknown SP3 version letter `{}`", other.unwrap_or("")),
            )
            .into())
        }
    }

    let mut interval = 0.0;
    let mut current: Option<Epoch> = None;
    let mut sats: BTreeMap<SatId, SatEphemeris> = BTreeMap::new();
    for (lineno, line) in lines {
        if line.starts_with("##") {
            interval = parse_num(line, lineno, 24, 38, "epoch interval")?;
        } else if line.starts_with('*') {
            let year: i32 = parse_num(line, lineno, 3, 7, "year")?;
            let month: u32 = parse_num(line, lineno, 8, 10, "month")?;
            let day: u32 = parse_num(line, lineno, 11, 13, "day")?;
            let hour: u32 = parse_num(line, lineno, 14, 16, "hour")?;
            let minute: u32 = parse_num(line, lineno, 17, 19, "minute")?;
            let second: f64 = parse_num(line, lineno, 20, 31, "second")?;
            let t = Epoch::from_calendar(year, month, day, hour, minute, second)
                .map_err(|e| ParseError::new(lineno, 4, e.to_string()))?;
            if let Some(prev) = current {
                if t.seconds_since(&prev) <= 0.0 {
                    return Err(ParseError::new(lineno, 1, "non-monotone SP3 epochs").into());
                }
            }
            current = Some(t);
        } else if line.starts_with('P') {
            let t = current
                .ok_or_else(|| ParseError::new(lineno, 1, "position record before any epoch"))?;
            let raw = field(line, 1, 4)
                .ok_or_else(|| ParseError::new(lineno, 2, "missing satellite id"))?;
            let Some(sat) = sp3_sat(raw, lineno)? else {
                continue;
            };
            let x: f64 = parse_num(line, lineno, 4, 18, "x")?;
            let y: f64 = parse_num(line, lineno, 18, 32, "y")?;
            let z: f64 = parse_num(line, lineno, 32, 46, "z")?;
            if !(x.is_finite() && y.is_finite() && z.is_finite()) {
                return Err(ParseError::new(lineno, 5, "non-finite position").into());
            }
            // all-zero coordinates flag a missing position
            if x == 0.0 && y == 0.0 && z == 0.0 {
                continue;
            }
            let clock_bias = match field(line, 46, 60).map(str::trim) {
                Some(s) if !s.is_empty() => {
                    let c: f64 = parse_num(line, lineno, 46, 60, "clock")?;
                    (c.is_finite() && c.abs() < CLOCK_SENTINEL).then_some(c * 1e-6)
                }
                _ => None,
            };
            sats.entry(sat)
                .or_insert_with(|| SatEphemeris {
                    sat,
                    samples: Vec::new(),
                })
                .samples
                .push(EphemerisSample {
                    t,
                    pos: EcefVec::new(x * 1e3, y * 1e3, z * 1e3),
                    clock_bias,
                });
        } else if line.starts_with("EOF") {
            break;
        }
    }
    if sats.is_empty() {
        let last = text.lines().count().max(1);
        return Err(ParseError::new(last, 1, "no position records").into());
    }
    Ok(EphemerisTable { interval, sats })
}

/// Writes an SP3-d position file. Coordinates are rounded to the format's
/// millimetre resolution.
pub fn write_sp3(table: &EphemerisTable) -> String {
    let mut by_epoch: BTreeMap<(u32, u64), (Epoch, Vec<(SatId, &EphemerisSample)>)> =
        BTreeMap::new();
    for eph in table.sats.values() {
        for s in &eph.samples {
            by_epoch
                .entry((s.t.week(), s.t.tow().to_bits()))
                .or_insert_with(|| (s.t, Vec::new()))
                .1
                .push((eph.sat, s));
        }
    }
    let mut out = String::new();
    let first = by_epoch
        .values()
        .next()
        .map(|(t, _)| *t)
        .unwrap_or(Epoch::new(0, 0.0).expect("origin epoch"));
    let (y, mo, d, h, mi, sec) = first.to_calendar();
    let _ = writeln!(
        out,
        "#dP{y:4} {mo:2} {d:2} {h:2} {mi:2} {sec:11.8} {:7} ORBIT IGS14 FIT  RO",
        by_epoch.len()
    );
    let _ = writeln!(
        out,
        "## {:4} {:15.8} {:14.8} {:5} {:15.13}",
        first.week(),
        first.tow(),
        table.interval,
        0,
        0.0
    );
    let ids: String = table.sats.keys().map(|s| s.to_string()).collect();
    let _ = writeln!(out, "+ {:4}   {}", table.sats.len(), ids);
    let _ = writeln!(
        out,
        "%c M  cc GPS ccc cccc cccc cccc cccc ccccc ccccc ccccc ccccc"
    );
    let _ = writeln!(out, "/* generated orbit file");

    for (t, recs) in by_epoch.values() {
        let (y, mo, d, h, mi, sec) = t.to_calendar();
        let _ = writeln!(out, "*  {y:4} {mo:2} {d:2} {h:2} {mi:2} {sec:11.8}");
        for (sat, s) in recs {
            let clock = s.clock_bias.map(|c| c * 1e6).unwrap_or(999_999.999_999);
            let _ = writeln!(
                out,
                "P{}{:14.6}{:14.6}{:14.6}{:14.6}",
                sat,
                s.pos.x / 1e3,
                s.pos.y / 1e3,
                s.pos.z / 1e3,
                clock
            );
        }
    }
    out.push_str("EOF\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "#dP2020  8 22  0  0  0.00000000       3 ORBIT IGS14 HLM  IGS
## 2119 518400.00000000   900.00000000 59083 0.0000000000000
+    1   G01
/* fixture
*  2020  8 22  0  0  0.00000000
PG01  12345.678901 -23456.789012   1234.567890    123.456789
*  2020  8 22  0 15  0.00000000
PG01  12346.678901 -23455.789012   1235.567890 999999.999999
*  2020  8 22  0 30  0.00000000
PG01  12347.678901 -23454.789012   1236.567890    123.456790
EOF
";

    #[test]
    fn three_epoch_fixture() {
        let table = parse_sp3(FIXTURE).unwrap();
        assert_eq!(table.interval, 900.0);
        let g01 = table.get(&SatId::gps(1)).unwrap();
        assert_eq!(g01.samples.len(), 3);
        assert_eq!(g01.samples[0].pos.x, 12_345.678_901 * 1e3);
        assert_eq!(g01.samples[0].pos.y, -23_456.789_012 * 1e3);
        assert_eq!(g01.samples[0].clock_bias, Some(123.456_789 * 1e-6));
        assert_eq!(g01.samples[1].clock_bias, None);
        assert_eq!(g01.samples[2].t.seconds_since(&g01.samples[0].t), 1800.0);
    }

    #[test]
    fn non_monotone_epochs_rejected() {
        let bad = FIXTURE.replace("0 30  0.0", "0  5  0.0");
        assert!(parse_sp3(&bad).is_err());
    }

    #[test]
    fn unknown_version_rejected() {
        let bad = FIXTURE.replacen("#dP", "#aP", 1);
        assert!(parse_sp3(&bad).is_err());
    }

    #[test]
    fn zero_position_dropped() {
        let bad = FIXTURE.replace(
            "PG01  12346.678901 -23455.789012   1235.567890",
            "PG01      0.000000      0.000000      0.000000",
        );
        let table = parse_sp3(&bad).unwrap();
        assert_eq!(table.get(&SatId::gps(1)).unwrap().samples.len(), 2);
    }

    #[test]
    fn writer_round_trip() {
        let table = parse_sp3(FIXTURE).unwrap();
        let again = parse_sp3(&write_sp3(&table)).unwrap();
        assert_eq!(table.sats, again.sats);
        assert_eq!(table.interval, again.interval);
    }
}
