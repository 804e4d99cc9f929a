//! RINEX 3.x observation subset: L1-band carrier phase, Doppler, SNR and
//! pseudorange for GPS, Galileo, BeiDou and GLONASS.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{ParseError, Result};
use crate::ingest::{field, parse_num, Constellation, ObsEpoch, SatId};
use crate::time::Epoch;

/// Counters describing what the reader dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RinexReport {
    /// Epochs with an event flag above 1, skipped with their special records.
    pub skipped_epochs: usize,
    /// Records whose constellation letter is not supported.
    pub unknown_constellation: usize,
    /// Satellite records lacking the selected phase, Doppler or SNR.
    pub blank_observations: usize,
    /// Satellites lacking any usable L1-band observation code in the header.
    pub unsupported_codes: usize,
}

/// Column indices of the observables chosen for one system.
#[derive(Debug, Clone)]
struct Selection {
    phase: usize,
    doppler: usize,
    snr: usize,
    range: Option<usize>,
}

fn choose(types: &[String], sys: Constellation, priority: &[String]) -> Option<Selection> {
    let defaults: Vec<String> = sys
        .default_phase_codes()
        .iter()
        .map(|s| s.to_string())
        .collect();
    let list = if priority.is_empty() {
        &defaults
    } else {
        priority
    };
    let (phase, code) = list
        .iter()
        .find_map(|c| types.iter().position(|t| t == c).map(|i| (i, c.clone())))?;
    let band = &code[1..2];
    let attr = &code[2..3];
    let pick = |kind: char| -> Option<usize> {
        let exact = format!("{kind}{band}{attr}");
        types.iter().position(|t| *t == exact).or_else(|| {
            types
                .iter()
                .position(|t| t.starts_with(kind) && &t[1..2] == band)
        })
    };
    Some(Selection {
        phase,
        doppler: pick('D')?,
        snr: pick('S')?,
        range: pick('C'),
    })
}

fn obs_value(line: &str, index: usize) -> (Option<f64>, Option<u8>) {
    let start = 3 + 16 * index;
    let value = field(line, start, start + 14).and_then(|s| s.trim().parse::<f64>().ok());
    let lli = field(line, start + 14, start + 15).and_then(|s| s.trim().parse::<u8>().ok());
    (value.filter(|v| v.is_finite()), lli)
}

/// Parses RINEX 3 observation text. `phase_priority` overrides the per-system
/// default carrier-phase code order when non-empty.
pub fn parse_rinex_obs(
    text: &str,
    phase_priority: &[String],
) -> Result<(Vec<ObsEpoch>, RinexReport)> {
    let mut report = RinexReport::default();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut types: BTreeMap<char, Vec<String>> = BTreeMap::new();
    let mut pending: Option<(char, usize)> = None;
    let mut saw_version = false;
    let mut header_done = false;
    let mut last_line = 0;

    for (lineno, line) in lines.by_ref() {
        last_line = lineno;
        let label = field(line, 60, line.len()).unwrap_or("").trim();
        match label {
            "RINEX VERSION / TYPE" => {
                let version: f64 = parse_num(line, lineno, 0, 9, "RINEX version")?;
                if !(3.0..4.0).contains(&version) {
                    return Err(ParseError::new(
                        lineno,
                        1,
                        format!("unsupported RINEX version {version}"),
                    )
                    .into());
                }
                if field(line, 20, 21) != Some("O") {
                    return Err(ParseError::new(lineno, 21, "not an observation file").into());
                }
                saw_version = true;
            }
            "SYS / # / OBS TYPES" => {
                let sys_char = field(line, 0, 1)
                    .unwrap_or(" ")
                    .chars()
                    .next()
                    .unwrap_or(' ');
                let (sys, count) = if sys_char == ' ' {
                    pending.ok_or_else(|| {
                        ParseError::new(lineno, 1, "continuation line without a system")
                    })?
                } else {
                    let n: usize = parse_num(line, lineno, 3, 6, "observation type count")?;
                    if n > 99 {
                        return Err(ParseError::new(lineno, 4, "too many observation types").into());
                    }
                    types.insert(sys_char, Vec::new());
                    (sys_char, n)
                };
                let list = types.entry(sys).or_default();
                for k in 0..13 {
                    if list.len() >= count {
                        break;
                    }
                    let start = 7 + 4 * k;
                    match field(line, start, start + 3) {
                        Some(t) if t.trim().len() == 3 => list.push(t.to_string()),
                        _ => break,
                    }
                }
                pending = if list.len() < count {
                    Some((sys, count))
                } else {
                    None
                };
            }
            "END OF HEADER" => {
                header_done = true;
                break;
            }
            _ => {}
        }
    }
    if !saw_version {
        return Err(ParseError::new(1, 1, "missing RINEX VERSION / TYPE header line").into());
    }
    if !header_done {
        return Err(ParseError::new(last_line + 1, 1, "missing END OF HEADER").into());
    }

    let mut selections: BTreeMap<char, Option<Selection>> = BTreeMap::new();
    for (sys, list) in &types {
        let sel = Constellation::from_letter(*sys).and_then(|c| choose(list, c, phase_priority));
        selections.insert(*sys, sel);
    }

    let mut out = Vec::new();
    while let Some((lineno, line)) = lines.next() {
        if line.trim().is_empty() {
            continue;
        }
        if !line.starts_with('>') {
            return Err(
                ParseError::new(lineno, 1, "expected epoch record starting with '>'").into(),
            );
        }
        let year: i32 = parse_num(line, lineno, 2, 6, "year")?;
        let month: u32 = parse_num(line, lineno, 7, 9, "month")?;
        let day: u32 = parse_num(line, lineno, 10, 12, "day")?;
        let hour: u32 = parse_num(line, lineno, 13, 15, "hour")?;
        let minute: u32 = parse_num(line, lineno, 16, 18, "minute")?;
        let second: f64 = parse_num(line, lineno, 18, 29, "second")?;
        let flag: u8 = parse_num(line, lineno, 31, 32, "epoch flag")?;
        let nsat: usize = parse_num(line, lineno, 32, 35, "satellite count")?;
        let t = Epoch::from_calendar(year, month, day, hour, minute, second)
            .map_err(|e| ParseError::new(lineno, 3, e.to_string()))?;

        if flag > 1 {
            report.skipped_epochs += 1;
            for _ in 0..nsat {
                if lines.next().is_none() {
                    break;
                }
            }
            continue;
        }

        for _ in 0..nsat {
            let (lineno, line) = lines
                .next()
                .ok_or_else(|| ParseError::new(lineno + 1, 1, "truncated epoch block"))?;
            let sys_char = line.chars().next().unwrap_or(' ');
            let Some(constellation) = Constellation::from_letter(sys_char) else {
                report.unknown_constellation += 1;
                log::warn!("line {lineno}: skipping unsupported system `{sys_char}`");
                continue;
            };
            let prn: u8 = parse_num(line, lineno, 1, 3, "PRN")?;
            let sat = SatId::new(constellation, prn)
                .map_err(|e| ParseError::new(lineno, 2, e.to_string()))?;
            let Some(Some(sel)) = selections.get(&sys_char) else {
                report.unsupported_codes += 1;
                continue;
            };
            let (phase, lli) = obs_value(line, sel.phase);
            let (doppler, _) = obs_value(line, sel.doppler);
            let (snr, _) = obs_value(line, sel.snr);
            let pseudorange = sel.range.and_then(|i| obs_value(line, i).0);
            match (phase, doppler, snr) {
                (Some(carrier_phase), Some(doppler), Some(snr)) if snr >= 0.0 => {
                    out.push(ObsEpoch {
                        t,
                        sat,
                        carrier_phase,
                        doppler,
                        snr,
                        pseudorange,
                        loss_of_lock: lli.is_some_and(|f| f & 1 == 1),
                    });
                }
                _ => report.blank_observations += 1,
            }
        }
    }
    Ok((out, report))
}

/// Writes observations as RINEX 3.04 with `C1C L1C D1C S1C` (or the
/// system's first default phase code) per constellation. Values are written
/// with three decimals, as the format prescribes.
pub fn write_rinex_obs(obs: &[ObsEpoch]) -> String {
    let mut systems: BTreeMap<char, [String; 4]> = BTreeMap::new();
    for o in obs {
        let c = o.sat.constellation;
        let code = c.default_phase_codes()[0];
        let (band, attr) = (&code[1..2], &code[2..3]);
        systems.entry(c.letter()).or_insert_with(|| {
            [
                format!("C{band}{attr}"),
                format!("L{band}{attr}"),
                format!("D{band}{attr}"),
                format!("S{band}{attr}"),
            ]
        });
    }

    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<60}{}",
        "     3.04           OBSERVATION DATA    M", "RINEX VERSION / TYPE"
    );
    for (sys, codes) in &systems {
        let body = format!("{}  {:>3} {}", sys, codes.len(), codes.join(" "));
        let _ = writeln!(s, "{body:<60}SYS / # / OBS TYPES");
    }
    let _ = writeln!(s, "{:<60}END OF HEADER", "");

    let mut i = 0;
    while i < obs.len() {
        let t = obs[i].t;
        let mut j = i;
        while j < obs.len() && obs[j].t == t {
            j += 1;
        }
        let (y, mo, d, h, mi, sec) = t.to_calendar();
        let _ = writeln!(
            s,
            "> {y:04} {mo:02} {d:02} {h:02} {mi:02}{sec:11.7}  0{:3}",
            j - i
        );
        for o in &obs[i..j] {
            let lli = if o.loss_of_lock { "1" } else { " " };
            let range = o
                .pseudorange
                .map(|r| format!("{r:14.3}  "))
                .unwrap_or_else(|| " ".repeat(16));
            let _ = writeln!(
                s,
                "{}{}{:14.3}{} {:14.3}  {:14.3}  ",
                o.sat, range, o.carrier_phase, lli, o.doppler, o.snr
            );
        }
        i = j;
    }
    s
}
