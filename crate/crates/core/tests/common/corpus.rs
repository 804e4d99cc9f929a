//! Malformed inputs for every reader. Each case starts from text the
//! writers produce and breaks one thing.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};

use ro_core::atmosphere::{read_met_csv, read_refractivity_csv};
use ro_core::geometry::sample_ephemeris;
use ro_core::ingest::{
    parse_obs_csv, parse_platform_csv, parse_rinex_obs, parse_sp3, write_obs_csv,
    write_platform_csv, write_rinex_obs, write_sp3, EphemerisTable, ObsEpoch, PlatformState, SatId,
};
use ro_core::preprocess::import_profile;
use ro_core::raytracer::scenario::Scenario;
use ro_core::retrieval::{import_bending, read_bending_csv};
use ro_core::{EcefVec, Epoch};

/// What a reader did with a broken input.
#[derive(Debug)]
pub enum Verdict {
    /// Rejected or counted in a report, with the message shown to users.
    Diagnosed(String),
    /// Accepted without complaint.
    Silent,
    Panicked,
}

pub struct Case {
    pub name: &'static str,
    pub run: Box<dyn Fn() -> Verdict>,
}

fn err<T, E: std::fmt::Display>(r: Result<T, E>) -> Verdict {
    match r {
        Err(e) => Verdict::Diagnosed(e.to_string()),
        Ok(_) => Verdict::Silent,
    }
}

fn sample_obs() -> Vec<ObsEpoch> {
    let t0 = Epoch::new(2119, 518_400.0).unwrap();
    (0..4)
        .flat_map(|k| {
            [SatId::gps(32), SatId::gps(10)].map(|sat| ObsEpoch {
                t: t0.add_seconds(k as f64),
                sat,
                carrier_phase: 1.2e8 + 1234.5 * k as f64,
                doppler: -2500.25,
                snr: 44.0,
                pseudorange: Some(2.3e7 + 0.25 * k as f64),
                loss_of_lock: false,
            })
        })
        .collect()
}

fn sample_platform() -> Vec<PlatformState> {
    let t0 = Epoch::new(2119, 518_400.0).unwrap();
    (0..4)
        .map(|k| PlatformState {
            t: t0.add_seconds(k as f64),
            pos: EcefVec::new(6_389_000.0 + k as f64, 1000.0, -2000.0),
            vel: EcefVec::new(1.0, 10.0, 0.0),
            pos_sigma: None,
        })
        .collect()
}

fn sample_sp3() -> String {
    let sc = Scenario::balloon_setting();
    let e = sample_ephemeris(
        &sc.tx,
        sc.sat,
        sc.start,
        sc.start.add_seconds(3600.0),
        900.0,
    )
    .unwrap();
    let mut sats = BTreeMap::new();
    sats.insert(sc.sat, e);
    write_sp3(&EphemerisTable {
        interval: 900.0,
        sats,
    })
}

/// Replaces the first occurrence of `from` after the header line containing `marker`.
fn after(text: &str, marker: &str, from: &str, to: &str) -> String {
    let at = text.find(marker).map_or(0, |i| i + marker.len());
    let (head, tail) = text.split_at(at);
    format!("{head}{}", tail.replacen(from, to, 1))
}

fn drop_last_lines(text: &str, n: usize) -> String {
    let lines: Vec<&str> = text.lines().collect();
    lines[..lines.len().saturating_sub(n)].join("\n") + "\n"
}

fn rinex(text: String) -> Box<dyn Fn() -> Verdict> {
    Box::new(move || match parse_rinex_obs(&text, &[]) {
        Err(e) => Verdict::Diagnosed(e.to_string()),
        Ok((obs, rep)) if rep != Default::default() => {
            Verdict::Diagnosed(format!("{} epochs kept, {rep:?}", obs.len()))
        }
        Ok(_) => Verdict::Silent,
    })
}

fn sp3(text: String) -> Box<dyn Fn() -> Verdict> {
    Box::new(move || err(parse_sp3(&text)))
}

fn obs_csv(text: String) -> Box<dyn Fn() -> Verdict> {
    Box::new(move || match parse_obs_csv(&text) {
        Err(e) => Verdict::Diagnosed(e.to_string()),
        Ok((_, dropped)) if dropped > 0 => Verdict::Diagnosed(format!("{dropped} rows dropped")),
        Ok(_) => Verdict::Silent,
    })
}

fn platform(text: String) -> Box<dyn Fn() -> Verdict> {
    Box::new(move || match parse_platform_csv(&text) {
        Err(e) => Verdict::Diagnosed(e.to_string()),
        Ok((_, rep)) if rep != Default::default() => Verdict::Diagnosed(format!("{rep:?}")),
        Ok(_) => Verdict::Silent,
    })
}

fn file_reader(
    bytes: Vec<u8>,
    ext: &'static str,
    read: fn(&std::path::Path) -> Verdict,
) -> Box<dyn Fn() -> Verdict> {
    Box::new(move || {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(format!("bad.{ext}"));
        std::fs::write(&path, &bytes).unwrap();
        read(&path)
    })
}

pub fn cases() -> Vec<Case> {
    let rnx = write_rinex_obs(&sample_obs());
    let sp = sample_sp3();
    let csv = write_obs_csv(&sample_obs());
    let plat = write_platform_csv(&sample_platform());
    let phase = format!("{:14.3}", 1.2e8);
    let mut v = vec![
        Case {
            name: "rinex empty",
            run: rinex(String::new()),
        },
        Case {
            name: "rinex version 2",
            run: rinex(rnx.replacen("3.04", "2.11", 1).replacen("3.05", "2.11", 1)),
        },
        Case {
            name: "rinex header never ends",
            run: rinex(rnx.replace("END OF HEADER", "COMMENT      ")),
        },
        Case {
            name: "rinex truncated epoch",
            run: rinex(drop_last_lines(&rnx, 1)),
        },
        Case {
            name: "rinex phase not a number",
            run: rinex(after(&rnx, "END OF HEADER", &phase, "  12x456789.00")),
        },
        Case {
            name: "rinex bad month",
            run: rinex(after(&rnx, "END OF HEADER", "> 2020", "> 2020 13")),
        },
        Case {
            name: "rinex satellite count overstated",
            run: rinex(after(&rnx, "END OF HEADER", "  0  2", "  0  9")),
        },
        Case {
            name: "rinex unknown system",
            run: rinex(after(&rnx, "END OF HEADER", "G32", "X32")),
        },
        Case {
            name: "rinex multibyte garbage",
            run: rinex(rnx.replacen("G32", "Ωλ≠", 2)),
        },
        Case {
            name: "sp3 empty",
            run: sp3(String::new()),
        },
        Case {
            name: "sp3 wrong version",
            run: sp3(sp.replacen("#d", "#x", 1)),
        },
        Case {
            name: "sp3 truncated position",
            run: sp3({
                let i = sp.find("\nPG").unwrap() + 20;
                format!(
                    "{}\n{}",
                    &sp[..i],
                    &sp[sp[i..].find('\n').map_or(sp.len(), |j| i + j + 1)..]
                )
            }),
        },
        Case {
            name: "sp3 coordinate not a number",
            run: sp3({
                let i = sp.find("\nPG").unwrap() + 6;
                format!("{}abcdefgh{}", &sp[..i], &sp[i + 8..])
            }),
        },
        Case {
            name: "sp3 no EOF and no records",
            run: sp3(sp
                .lines()
                .take_while(|l| !l.starts_with('*'))
                .collect::<Vec<_>>()
                .join("\n")),
        },
        Case {
            name: "obs csv missing column",
            run: obs_csv(csv.replacen("snr_dbhz", "snr", 1)),
        },
        Case {
            name: "obs csv NaN phase",
            run: obs_csv(drop_last_lines(&csv, 0).replacen(",1", ",NaN", 1)),
        },
        Case {
            name: "obs csv bad satellite",
            run: obs_csv(after(&csv, "loss_of_lock", "G32", "G99")),
        },
        Case {
            name: "obs csv short row",
            run: obs_csv(format!("{csv}2119,518400\n")),
        },
        Case {
            name: "platform csv text in number",
            run: platform(after(&plat, "vz_mps", "6389000", "6389ooo")),
        },
        Case {
            name: "platform csv no header",
            run: platform(plat.lines().skip(1).collect::<Vec<_>>().join("\n")),
        },
        Case {
            name: "platform csv infinite velocity",
            run: platform(format!("{plat}2119,518410,6389000,0,0,inf,0,0\n")),
        },
        Case {
            name: "refractivity csv letters",
            run: Box::new(|| err(read_refractivity_csv("z_m,n_units\n0,3oo\n"))),
        },
        Case {
            name: "met csv negative pressure",
            run: Box::new(|| err(read_met_csv("z_m,p_hpa,t_k,e_hpa\n0,-1013,288,10\n"))),
        },
        Case {
            name: "bending csv unknown quality",
            run: Box::new(|| {
                err(read_bending_csv(
                    "a_m,alpha_rad,quality\n6.38e6,0.01,7\n",
                    6.389e6,
                    1.0,
                ))
            }),
        },
        Case {
            name: "bending csv descending a",
            run: Box::new(|| {
                err(read_bending_csv(
                    "a_m,alpha_rad,quality\n6.38e6,0.01,0\n6.37e6,0.02,0\n",
                    6.389e6,
                    1.0,
                ))
            }),
        },
    ];
    v.push(Case {
        name: "profile json garbage",
        run: file_reader(
            b"{\"format\": \"ro-columns/1\", \"dimensions\": [".to_vec(),
            "json",
            |p| err(import_profile(p)),
        ),
    });
    v.push(Case {
        name: "profile netcdf truncated",
        run: file_reader(b"CDF\x01\x00\x00\x00\x02".to_vec(), "nc", |p| {
            err(import_profile(p))
        }),
    });
    v.push(Case {
        name: "bending file missing",
        run: Box::new(|| {
            err(import_bending(std::path::Path::new(
                "/nonexistent/bending.nc",
            )))
        }),
    });
    v
}

pub fn run(case: &Case) -> Verdict {
    catch_unwind(AssertUnwindSafe(|| (case.run)())).unwrap_or(Verdict::Panicked)
}
