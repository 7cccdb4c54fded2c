//! Timestamps and the four calendar time-scales (minute of hour, period of
//! day, day of week, week of month).
//!
//! All calendar arithmetic is done in a single fixed UTC offset. There is no
//! daylight-saving handling.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SECONDS_PER_MINUTE: i64 = 60;
pub const SECONDS_PER_HOUR: i64 = 3_600;
pub const SECONDS_PER_DAY: i64 = 86_400;
pub const SECONDS_PER_WEEK: i64 = 604_800;

/// Nominal length of one period of the day (a sixth of a day). Real periods
/// have unequal lengths; this is only used as the divisor in context
/// membership tests.
pub const SECONDS_PER_PERIOD: i64 = SECONDS_PER_DAY / 6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimeError {
    #[error("timestamp must be non-negative, got {0}")]
    NegativeTimestamp(i64),
    #[error("hour must be in 0..=23, got {0}")]
    HourOutOfRange(u32),
    #[error("invalid UTC offset `{0}`")]
    InvalidOffset(String),
    #[error("unknown time unit `{0}` (expected one of 1M, 1P, 1D, 1W)")]
    UnknownUnit(String),
}

/// Seconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub struct Timestamp(i64);

impl Timestamp {
    pub fn new(epoch_seconds: i64) -> Result<Self, TimeError> {
        if epoch_seconds < 0 {
            return Err(TimeError::NegativeTimestamp(epoch_seconds));
        }
        Ok(Self(epoch_seconds))
    }

    pub fn epoch_seconds(self) -> i64 {
        self.0
    }

    /// Seconds from `earlier` to `self` (negative if `earlier` is later).
    pub fn seconds_since(self, earlier: Timestamp) -> i64 {
        self.0 - earlier.0
    }

    pub fn plus_seconds(self, secs: i64) -> Result<Self, TimeError> {
        Self::new(self.0 + secs)
    }
}

impl TryFrom<i64> for Timestamp {
    type Error = TimeError;
    fn try_from(v: i64) -> Result<Self, TimeError> {
        Self::new(v)
    }
}

impl From<Timestamp> for i64 {
    fn from(t: Timestamp) -> i64 {
        t.0
    }
}

/// A fixed offset from UTC, in seconds. Strictly less than one day in magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct UtcOffset(i32);

impl UtcOffset {
    pub const UTC: UtcOffset = UtcOffset(0);

    pub fn from_seconds(secs: i32) -> Result<Self, TimeError> {
        if secs.abs() >= SECONDS_PER_DAY as i32 {
            return Err(TimeError::InvalidOffset(secs.to_string()));
        }
        Ok(Self(secs))
    }

    pub fn seconds(self) -> i32 {
        self.0
    }

    /// Calendar decomposition of `t` in this offset.
    pub fn calendar(self, t: Timestamp) -> CalendarTime {
        CalendarTime::from_local_seconds(t.epoch_seconds() + self.0 as i64)
    }
}

impl fmt::Display for UtcOffset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { '-' } else { '+' };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{:02}:{:02}", abs / 3600, (abs % 3600) / 60)
    }
}

impl FromStr for UtcOffset {
    type Err = TimeError;

    /// Parses `+HH:MM`, `-HH:MM` or `Z`.
    fn from_str(s: &str) -> Result<Self, TimeError> {
        let bad = || TimeError::InvalidOffset(s.to_string());
        let s = s.trim();
        if s == "Z" || s == "z" {
            return Ok(Self::UTC);
        }
        let (sign, rest) = match s.as_bytes().first() {
            Some(b'+') => (1, &s[1..]),
            Some(b'-') => (-1, &s[1..]),
            _ => return Err(bad()),
        };
        let (hh, mm) = rest.split_once(':').ok_or_else(bad)?;
        let hh: i32 = hh.parse().map_err(|_| bad())?;
        let mm: i32 = mm.parse().map_err(|_| bad())?;
        if !(0..24).contains(&hh) || !(0..60).contains(&mm) {
            return Err(bad());
        }
        Self::from_seconds(sign * (hh * 3600 + mm * 60)).map_err(|_| bad())
    }
}

impl TryFrom<String> for UtcOffset {
    type Error = TimeError;
    fn try_from(s: String) -> Result<Self, TimeError> {
        s.parse()
    }
}

impl From<UtcOffset> for String {
    fn from(o: UtcOffset) -> String {
        o.to_string()
    }
}

/// The four time-scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TimeUnit {
    MinuteOfHour,
    PeriodOfDay,
    DayOfWeek,
    WeekOfMonth,
}

impl TimeUnit {
    pub const ALL: [TimeUnit; 4] = [
        TimeUnit::MinuteOfHour,
        TimeUnit::PeriodOfDay,
        TimeUnit::DayOfWeek,
        TimeUnit::WeekOfMonth,
    ];

    pub fn duration_seconds(self) -> i64 {
        match self {
            TimeUnit::MinuteOfHour => SECONDS_PER_MINUTE,
            TimeUnit::PeriodOfDay => SECONDS_PER_PERIOD,
            TimeUnit::DayOfWeek => SECONDS_PER_DAY,
            TimeUnit::WeekOfMonth => SECONDS_PER_WEEK,
        }
    }

    /// Short code used in context specifications.
    pub fn code(self) -> &'static str {
        match self {
            TimeUnit::MinuteOfHour => "1M",
            TimeUnit::PeriodOfDay => "1P",
            TimeUnit::DayOfWeek => "1D",
            TimeUnit::WeekOfMonth => "1W",
        }
    }
}

impl fmt::Display for TimeUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for TimeUnit {
    type Err = TimeError;
    fn from_str(s: &str) -> Result<Self, TimeError> {
        match s {
            "1M" => Ok(TimeUnit::MinuteOfHour),
            "1P" => Ok(TimeUnit::PeriodOfDay),
            "1D" => Ok(TimeUnit::DayOfWeek),
            "1W" => Ok(TimeUnit::WeekOfMonth),
            other => Err(TimeError::UnknownUnit(other.to_string())),
        }
    }
}

/// Time vector `(minute_of_hour, period_of_day, day_of_week, week_of_month)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiScaleTimeVector {
    pub minute_of_hour: u8,
    pub period_of_day: u8,
    pub day_of_week: u8,
    pub week_of_month: u8,
}

impl MultiScaleTimeVector {
    pub const MAX: [u8; 4] = [59, 5, 6, 4];

    pub fn components(&self) -> [u8; 4] {
        [
            self.minute_of_hour,
            self.period_of_day,
            self.day_of_week,
            self.week_of_month,
        ]
    }

    pub fn is_valid(&self) -> bool {
        self.components()
            .iter()
            .zip(Self::MAX)
            .all(|(&c, max)| c <= max)
    }
}

/// Period of the day for an hour, using half-open intervals:
/// morning `[8,12)`=0, lunch `[12,14)`=1, afternoon `[14,17)`=2,
/// dinner `[17,20)`=3, evening `[20,24)`=4, night `[0,8)`=5.
pub fn period_of_day(hour: u32) -> Result<u8, TimeError> {
    Ok(match hour {
        0..=7 => 5,
        8..=11 => 0,
        12..=13 => 1,
        14..=16 => 2,
        17..=19 => 3,
        20..=23 => 4,
        _ => return Err(TimeError::HourOutOfRange(hour)),
    })
}

/// Calendar fields of a local time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CalendarTime {
    /// Days since 1970-01-01 (local).
    pub epoch_day: i64,
    pub year: i64,
    /// 1..=12
    pub month: u32,
    /// 1..=31
    pub day: u32,
    pub hour: u32,
    pub minute: u32,
    /// Monday = 0 .. Sunday = 6
    pub weekday: u32,
}

impl CalendarTime {
    pub fn from_local_seconds(local: i64) -> Self {
        let epoch_day = local.div_euclid(SECONDS_PER_DAY);
        let secs_of_day = local.rem_euclid(SECONDS_PER_DAY);
        let (year, month, day) = civil_from_days(epoch_day);
        // 1970-01-01 was a Thursday (Monday-based index 3).
        let weekday = (epoch_day + 3).rem_euclid(7) as u32;
        Self {
            epoch_day,
            year,
            month,
            day,
            hour: (secs_of_day / SECONDS_PER_HOUR) as u32,
            minute: ((secs_of_day % SECONDS_PER_HOUR) / SECONDS_PER_MINUTE) as u32,
            weekday,
        }
    }

    pub fn week_of_month(&self) -> u8 {
        ((self.day - 1) / 7).min(4) as u8
    }

    pub fn time_vector(&self) -> MultiScaleTimeVector {
        MultiScaleTimeVector {
            minute_of_hour: self.minute as u8,
            period_of_day: period_of_day(self.hour).expect("hour from calendar is < 24"),
            day_of_week: self.weekday as u8,
            week_of_month: self.week_of_month(),
        }
    }

    /// Position of this time within the recurring cycle of `unit`.
    pub fn block_index(&self, unit: TimeUnit) -> u8 {
        let v = self.time_vector();
        match unit {
            TimeUnit::MinuteOfHour => v.minute_of_hour,
            TimeUnit::PeriodOfDay => v.period_of_day,
            TimeUnit::DayOfWeek => v.day_of_week,
            TimeUnit::WeekOfMonth => v.week_of_month,
        }
    }

    /// Index of the enclosing cycle: the hour for minutes, the day for
    /// periods, the (Monday-based) week for weekdays, the month for weeks.
    pub fn cycle_index(&self, unit: TimeUnit) -> i64 {
        match unit {
            TimeUnit::MinuteOfHour => self.epoch_day * 24 + self.hour as i64,
            TimeUnit::PeriodOfDay => self.epoch_day,
            TimeUnit::DayOfWeek => (self.epoch_day + 3).div_euclid(7),
            TimeUnit::WeekOfMonth => self.year * 12 + self.month as i64 - 1,
        }
    }
}

// Days since 1970-01-01 to proleptic Gregorian (year, month, day).
fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    (if m <= 2 { y + 1 } else { y }, m, d)
}

/// Multi-scale time vector of `t` in the given offset.
pub fn to_multiscale(t: Timestamp, offset: UtcOffset) -> MultiScaleTimeVector {
    offset.calendar(t).time_vector()
}

/// Each component divided by its maximum, giving values in `[0, 1]`.
pub fn normalized_time_vector(v: &MultiScaleTimeVector) -> [f64; 4] {
    let c = v.components();
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = c[i] as f64 / MultiScaleTimeVector::MAX[i] as f64;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Datelike, TimeZone, Timelike};
    use proptest::prelude::*;

    // 2017-01-02 is a Monday.
    const MONDAY_2017_01_02: i64 = 1_483_315_200;

    #[test]
    fn period_examples() {
        assert_eq!(period_of_day(9).unwrap(), 0);
        assert_eq!(period_of_day(12).unwrap(), 1);
        assert_eq!(period_of_day(0).unwrap(), 5);
        assert_eq!(period_of_day(14).unwrap(), 2);
        assert_eq!(period_of_day(17).unwrap(), 3);
        assert_eq!(period_of_day(20).unwrap(), 4);
        assert!(period_of_day(24).is_err());
    }

    #[test]
    fn period_preimage_sizes() {
        let mut counts = [0usize; 6];
        for h in 0..24 {
            counts[period_of_day(h).unwrap() as usize] += 1;
        }
        assert_eq!(counts, [4, 2, 3, 3, 4, 8]);
    }

    #[test]
    fn multiscale_examples() {
        let t = Timestamp::new(MONDAY_2017_01_02 + 9 * 3600 + 30 * 60).unwrap();
        let v = to_multiscale(t, UtcOffset::UTC);
        assert_eq!(v.components(), [30, 0, 0, 0]);

        // Sunday 2017-01-29 23:59 (day 29, fifth week).
        let t = Timestamp::new(MONDAY_2017_01_02 + 27 * 86_400 + 23 * 3600 + 59 * 60).unwrap();
        let v = to_multiscale(t, UtcOffset::UTC);
        assert_eq!(v.components(), [59, 4, 6, 4]);
    }

    #[test]
    fn offset_shifts_calendar() {
        let t = Timestamp::new(MONDAY_2017_01_02 + 23 * 3600).unwrap();
        let plus2: UtcOffset = "+02:00".parse().unwrap();
        let cal = plus2.calendar(t);
        assert_eq!(cal.weekday, 1);
        assert_eq!(cal.hour, 1);
        assert_eq!(plus2.to_string(), "+02:00");
        assert_eq!("-05:30".parse::<UtcOffset>().unwrap().seconds(), -19_800);
        assert!("05:00".parse::<UtcOffset>().is_err());
    }

    #[test]
    fn normalized_examples() {
        let zero = MultiScaleTimeVector {
            minute_of_hour: 0,
            period_of_day: 0,
            day_of_week: 0,
            week_of_month: 0,
        };
        assert_eq!(normalized_time_vector(&zero), [0.0; 4]);
        let max = MultiScaleTimeVector {
            minute_of_hour: 59,
            period_of_day: 5,
            day_of_week: 6,
            week_of_month: 4,
        };
        assert_eq!(normalized_time_vector(&max), [1.0; 4]);
        let mid = MultiScaleTimeVector {
            minute_of_hour: 30,
            period_of_day: 2,
            day_of_week: 3,
            week_of_month: 2,
        };
        assert_eq!(normalized_time_vector(&mid), [30.0 / 59.0, 0.4, 0.5, 0.5]);
    }

    #[test]
    fn negative_timestamp_rejected() {
        assert!(Timestamp::new(-1).is_err());
    }

    #[test]
    fn agrees_with_chrono_on_random_timestamps() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let offsets = [0, 3600, -5 * 3600, 5 * 3600 + 1800];
        for i in 0..1000 {
            let secs = rng.random_range(0..4_102_444_800i64);
            let off = offsets[i % offsets.len()];
            let ours = to_multiscale(Timestamp::new(secs).unwrap(), UtcOffset::from_seconds(off).unwrap());
            let tz = chrono::FixedOffset::east_opt(off).unwrap();
            let dt = tz.timestamp_opt(secs, 0).unwrap();
            let expected_pod = match dt.hour() {
                0..=7 => 5,
                8..=11 => 0,
                12..=13 => 1,
                14..=16 => 2,
                17..=19 => 3,
                _ => 4,
            };
            assert_eq!(ours.minute_of_hour as u32, dt.minute());
            assert_eq!(ours.period_of_day, expected_pod);
            assert_eq!(ours.day_of_week as u32, dt.weekday().num_days_from_monday());
            assert_eq!(ours.week_of_month as u32, ((dt.day() - 1) / 7).min(4));
        }
    }

    proptest! {
        #[test]
        fn week_shift_preserves_day_and_period(secs in 0i64..4_000_000_000) {
            let t = Timestamp::new(secs).unwrap();
            let a = to_multiscale(t, UtcOffset::UTC);
            let b = to_multiscale(t.plus_seconds(SECONDS_PER_WEEK).unwrap(), UtcOffset::UTC);
            prop_assert_eq!(a.day_of_week, b.day_of_week);
            prop_assert_eq!(a.period_of_day, b.period_of_day);
            prop_assert!(a.is_valid());
        }

        #[test]
        fn normalized_is_monotone_and_bounded(
            m in 0u8..=59, p in 0u8..=5, d in 0u8..=6, w in 0u8..=4, which in 0usize..4
        ) {
            let v = MultiScaleTimeVector { minute_of_hour: m, period_of_day: p, day_of_week: d, week_of_month: w };
            let n = normalized_time_vector(&v);
            prop_assert!(n.iter().all(|x| (0.0..=1.0).contains(x)));
            let mut c = v.components();
            if c[which] < MultiScaleTimeVector::MAX[which] {
                c[which] += 1;
                let up = MultiScaleTimeVector { minute_of_hour: c[0], period_of_day: c[1], day_of_week: c[2], week_of_month: c[3] };
                prop_assert!(normalized_time_vector(&up)[which] > n[which]);
            }
        }
    }
}
