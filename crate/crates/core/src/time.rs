//! GPS time tags.
//!
//! All series in the chain are tagged in GPS time; there is no leap-second
//! handling. Epochs keep week and seconds-of-week separate so differences
//! between nearby epochs stay exact to well below a nanosecond.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::constants::SECONDS_PER_WEEK;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Epoch {
    week: u32,
    tow: f64,
}

impl Epoch {
    pub fn new(week: u32, tow: f64) -> Result<Self> {
        if !tow.is_finite() || !(0.0..SECONDS_PER_WEEK).contains(&tow) {
            return Err(Error::InvalidInput(format!(
                "seconds of week {tow} outside [0, 604800)"
            )));
        }
        Ok(Epoch { week, tow })
    }

    pub fn week(&self) -> u32 {
        self.week
    }

    pub fn tow(&self) -> f64 {
        self.tow
    }

    /// Continuous GPS seconds since the start of week 0.
    pub fn total_seconds(&self) -> f64 {
        self.week as f64 * SECONDS_PER_WEEK + self.tow
    }

    /// Seconds from `earlier` to `self`, computed without forming large totals.
    pub fn seconds_since(&self, earlier: &Epoch) -> f64 {
        (self.week as f64 - earlier.week as f64) * SECONDS_PER_WEEK + (self.tow - earlier.tow)
    }

    /// Shifts the epoch, renormalising seconds-of-week. Weeks saturate at zero.
    pub fn add_seconds(&self, dt: f64) -> Epoch {
        let mut tow = self.tow + dt;
        let shift = (tow / SECONDS_PER_WEEK).floor();
        tow -= shift * SECONDS_PER_WEEK;
        let mut week = self.week as i64 + shift as i64;
        if tow >= SECONDS_PER_WEEK {
            tow -= SECONDS_PER_WEEK;
            week += 1;
        }
        if tow < 0.0 {
            tow = 0.0;
        }
        if week < 0 {
            return Epoch { week: 0, tow: 0.0 };
        }
        Epoch {
            week: week as u32,
            tow,
        }
    }

    /// GPS epoch from a calendar date and time of day (GPS time scale).
    pub fn from_calendar(
        year: i32,
        month: u32,
        day: u32,
        hour: u32,
        minute: u32,
        second: f64,
    ) -> Result<Self> {
        if !(1..=12).contains(&month) || !(1..=31).contains(&day) || hour > 24 || minute > 59 {
            return Err(Error::InvalidInput(format!(
                "invalid calendar date {year}-{month}-{day} {hour}:{minute}"
            )));
        }
        if !second.is_finite() || !(0.0..61.0).contains(&second) {
            return Err(Error::InvalidInput(format!("invalid seconds {second}")));
        }
        let days = days_from_civil(year, month, day) - days_from_civil(1980, 1, 6);
        if days < 0 {
            return Err(Error::InvalidInput("date precedes the GPS epoch".into()));
        }
        let week = days / 7;
        let tod = hour as f64 * 3600.0 + minute as f64 * 60.0 + second;
        let epoch = Epoch {
            week: week as u32,
            tow: 0.0,
        };
        Ok(epoch.add_seconds((days % 7) as f64 * 86_400.0 + tod))
    }

    /// Calendar representation: (year, month, day, hour, minute, second).
    pub fn to_calendar(&self) -> (i32, u32, u32, u32, u32, f64) {
        let day_of_week = (self.tow / 86_400.0).floor();
        let mut tod = self.tow - day_of_week * 86_400.0;
        let days = days_from_civil(1980, 1, 6) + self.week as i64 * 7 + day_of_week as i64;
        let (y, m, d) = civil_from_days(days);
        let hour = (tod / 3600.0).floor();
        tod -= hour * 3600.0;
        let minute = (tod / 60.0).floor();
        tod -= minute * 60.0;
        (y, m, d, hour as u32, minute as u32, tod)
    }
}

impl PartialOrd for Epoch {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.week.cmp(&other.week) {
            Ordering::Equal => self.tow.partial_cmp(&other.tow),
            ord => Some(ord),
        }
    }
}

impl fmt::Display for Epoch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{:.6}", self.week, self.tow)
    }
}

// Howard Hinnant's days-from-civil algorithm.
fn days_from_civil(y: i32, m: u32, d: u32) -> i64 {
    let y = if m <= 2 { y as i64 - 1 } else { y as i64 };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let m = m as i64;
    let doy = (153 * (if m > 2 { m - 3 } else { m + 9 }) + 2) / 5 + d as i64 - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

fn civil_from_days(z: i64) -> (i32, u32, u32) {
    let z = z + 719_468;
    let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    ((if m <= 2 { y + 1 } else { y }) as i32, m, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn total_seconds_examples() {
        assert_eq!(Epoch::new(0, 0.0).unwrap().total_seconds(), 0.0);
        assert_eq!(Epoch::new(1, 0.0).unwrap().total_seconds(), 604_800.0);
        let e = Epoch::new(2120, 345_600.5).unwrap();
        assert_eq!(e.total_seconds(), 2120.0 * 604_800.0 + 345_600.5);
    }

    #[test]
    fn rejects_out_of_range_tow() {
        assert!(Epoch::new(0, 604_800.0).is_err());
        assert!(Epoch::new(0, -1.0).is_err());
        assert!(Epoch::new(0, f64::NAN).is_err());
    }

    #[test]
    fn calendar_round_trip() {
        // 2020-08-22 is a Saturday in GPS week 2119.
        let e = Epoch::from_calendar(2020, 8, 22, 12, 30, 15.5).unwrap();
        assert_eq!(e.week(), 2119);
        assert_eq!(e.tow(), 6.0 * 86_400.0 + 12.0 * 3600.0 + 30.0 * 60.0 + 15.5);
        assert_eq!(e.to_calendar(), (2020, 8, 22, 12, 30, 15.5));
        let origin = Epoch::from_calendar(1980, 1, 6, 0, 0, 0.0).unwrap();
        assert_eq!(origin.total_seconds(), 0.0);
    }

    #[test]
    fn add_seconds_crosses_week() {
        let e = Epoch::new(10, 604_799.5).unwrap().add_seconds(1.0);
        assert_eq!(e.week(), 11);
        assert_eq!(e.tow(), 0.5);
        let back = e.add_seconds(-1.0);
        assert_eq!(back.week(), 10);
        assert_eq!(back.tow(), 604_799.5);
    }

    proptest! {
        #[test]
        fn total_seconds_monotone(w1 in 0u32..4000, t1 in 0.0f64..604_799.9,
                                  w2 in 0u32..4000, t2 in 0.0f64..604_799.9) {
            let a = Epoch::new(w1, t1).unwrap();
            let b = Epoch::new(w2, t2).unwrap();
            if a < b {
                prop_assert!(a.total_seconds() < b.total_seconds());
            }
            prop_assert!((b.seconds_since(&a) - (b.total_seconds() - a.total_seconds())).abs() < 1e-6);
        }
    }
}
