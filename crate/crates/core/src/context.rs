//! Neighboring (NTC) and periodic (PTC) temporal contexts.
//!
//! A context for a prediction target is the ordered list of earlier records
//! that pass a membership test against the target's time:
//!
//! * NTC keeps records whose gap to the target, measured in time units, is
//!   below `l` (short-term neighbourhood).
//! * PTC keeps records in the same block of the unit's cycle (same period of
//!   a different day, same weekday of a different week, ...) within a range.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::UserPostSequence;
use crate::timebase::{
    MultiScaleTimeVector, TimeUnit, Timestamp, UtcOffset, SECONDS_PER_DAY, SECONDS_PER_HOUR,
    SECONDS_PER_MINUTE, SECONDS_PER_PERIOD, SECONDS_PER_WEEK,
};

pub const DEFAULT_MAX_ITEMS: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContextError {
    #[error("candidate time {candidate} is after target time {target}")]
    NotHistorical { target: i64, candidate: i64 },
    #[error("invalid context spec `{spec}`: {reason}")]
    Parse { spec: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContextKind {
    Neighboring,
    Periodic,
}

impl ContextKind {
    pub fn code(self) -> &'static str {
        match self {
            ContextKind::Neighboring => "NTC",
            ContextKind::Periodic => "PTC",
        }
    }
}

/// NTC membership: `(t_p - t_s) / Δt_unit < l`.
pub fn ntc_member(t_p: Timestamp, t_s: Timestamp, unit: TimeUnit, l: f64) -> Result<bool, ContextError> {
    let gap = t_p.seconds_since(t_s);
    if gap < 0 {
        return Err(ContextError::NotHistorical {
            target: t_p.epoch_seconds(),
            candidate: t_s.epoch_seconds(),
        });
    }
    Ok((gap as f64) / (unit.duration_seconds() as f64) < l)
}

/// PTC membership: same block of `unit` (e.g. same weekday for `1D`), a
/// different enclosing cycle (a different week), and `t_p - t_s <= range`.
pub fn ptc_member(
    t_p: Timestamp,
    t_s: Timestamp,
    unit: TimeUnit,
    range_seconds: i64,
    offset: UtcOffset,
) -> Result<bool, ContextError> {
    let gap = t_p.seconds_since(t_s);
    if gap <= 0 {
        return Err(ContextError::NotHistorical {
            target: t_p.epoch_seconds(),
            candidate: t_s.epoch_seconds(),
        });
    }
    if gap > range_seconds {
        return Ok(false);
    }
    let p = offset.calendar(t_p);
    let s = offset.calendar(t_s);
    Ok(p.block_index(unit) == s.block_index(unit) && p.cycle_index(unit) != s.cycle_index(unit))
}

/// A context type such as `NTC:1P:1D` (neighbouring, period-of-day unit,
/// one day range).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextSpec {
    pub kind: ContextKind,
    pub time_unit: TimeUnit,
    pub range_seconds: i64,
    pub max_items: usize,
    /// Restrict the history to the target's own user.
    #[serde(default)]
    pub per_user: bool,
}

impl ContextSpec {
    pub fn new(kind: ContextKind, time_unit: TimeUnit, range_seconds: i64) -> Self {
        Self {
            kind,
            time_unit,
            range_seconds,
            max_items: DEFAULT_MAX_ITEMS,
            per_user: false,
        }
    }

    pub fn with_max_items(mut self, k: usize) -> Self {
        self.max_items = k;
        self
    }

    pub fn with_per_user(mut self, per_user: bool) -> Self {
        self.per_user = per_user;
        self
    }

    /// `l = t_r / Δt_unit`.
    pub fn context_length(&self) -> f64 {
        self.range_seconds as f64 / self.time_unit.duration_seconds() as f64
    }

    /// Membership of a candidate at `t_s` for a target at `t_p`, with
    /// `t_s <= t_p`.
    pub fn admits(&self, t_p: Timestamp, t_s: Timestamp, offset: UtcOffset) -> Result<bool, ContextError> {
        match self.kind {
            ContextKind::Neighboring => ntc_member(t_p, t_s, self.time_unit, self.context_length()),
            ContextKind::Periodic if t_s == t_p => Ok(false),
            ContextKind::Periodic => ptc_member(t_p, t_s, self.time_unit, self.range_seconds, offset),
        }
    }

    /// Largest gap any member can have; candidates further back are never
    /// members.
    fn max_gap(&self) -> i64 {
        self.range_seconds
    }
}

fn parse_range(s: &str) -> Option<i64> {
    let split = s.find(|c: char| c.is_ascii_alphabetic())?;
    let (num, suffix) = s.split_at(split);
    let n: f64 = num.parse().ok()?;
    let unit = match suffix {
        "Min" | "min" => SECONDS_PER_MINUTE,
        "H" | "h" => SECONDS_PER_HOUR,
        "P" => SECONDS_PER_PERIOD,
        "D" | "d" => SECONDS_PER_DAY,
        "W" | "w" => SECONDS_PER_WEEK,
        // Nominal 30-day month.
        "Mo" | "mo" => 30 * SECONDS_PER_DAY,
        _ => return None,
    };
    let secs = n * unit as f64;
    (n > 0.0 && secs.is_finite() && secs.fract() == 0.0).then_some(secs as i64)
}

fn format_range(secs: i64) -> String {
    for (unit, suffix) in [
        (30 * SECONDS_PER_DAY, "Mo"),
        (SECONDS_PER_WEEK, "W"),
        (SECONDS_PER_DAY, "D"),
        (SECONDS_PER_HOUR, "H"),
        (SECONDS_PER_MINUTE, "Min"),
    ] {
        if secs % unit == 0 {
            return format!("{}{suffix}", secs / unit);
        }
    }
    if (secs * 2) % SECONDS_PER_DAY == 0 {
        return format!("{}D", secs as f64 / SECONDS_PER_DAY as f64);
    }
    format!("{secs}s")
}

impl fmt::Display for ContextSpec {
    /// `KIND:UNIT:RANGE`, with `:K` appended when the item cap is not the
    /// default.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}",
            self.kind.code(),
            self.time_unit,
            format_range(self.range_seconds)
        )?;
        if self.max_items != DEFAULT_MAX_ITEMS {
            write!(f, ":{}", self.max_items)?;
        }
        Ok(())
    }
}

impl FromStr for ContextSpec {
    type Err = ContextError;

    /// Parses `KIND:UNIT:RANGE[:MAX_ITEMS]`, e.g. `NTC:1P:1D`, `PTC:1D:3W`,
    /// `NTC:1P:0.5D:16`.
    fn from_str(s: &str) -> Result<Self, ContextError> {
        let err = |reason: &str| ContextError::Parse {
            spec: s.to_string(),
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = s.trim().split(':').collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(err("expected KIND:UNIT:RANGE[:MAX_ITEMS]"));
        }
        let kind = match fields[0] {
            "NTC" => ContextKind::Neighboring,
            "PTC" => ContextKind::Periodic,
            _ => return Err(err("kind must be NTC or PTC")),
        };
        let unit: TimeUnit = fields[1].parse().map_err(|_| err("unit must be one of 1M, 1P, 1D, 1W"))?;
        let range = parse_range(fields[2]).ok_or_else(|| err("range must look like 0.5D, 1D, 3W, 1Mo"))?;
        let mut spec = ContextSpec::new(kind, unit, range);
        if let Some(k) = fields.get(3) {
            spec.max_items = k
                .parse()
                .ok()
                .filter(|&k: &usize| k > 0)
                .ok_or_else(|| err("max items must be a positive integer"))?;
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContextItem {
    pub record_index: usize,
    pub timestamp: Timestamp,
    pub time_vector: MultiScaleTimeVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalContext {
    pub target_index: usize,
    /// Ascending in time.
    pub items: Vec<ContextItem>,
}

impl TemporalContext {
    pub fn record_indices(&self) -> Vec<usize> {
        self.items.iter().map(|i| i.record_index).collect()
    }
}

/// Indices of the context members for `target`, ascending.
///
/// History is every record before the target in sequence order, which
/// includes equal-timestamp records earlier in the file. The most recent
/// `max_items` members are kept.
pub fn context_indices(seq: &UserPostSequence, target: usize, spec: &ContextSpec, offset: UtcOffset) -> Vec<usize> {
    let recs = seq.records();
    let Some(tgt) = recs.get(target) else {
        return Vec::new();
    };
    let mut picked = Vec::new();
    for j in (0..target).rev() {
        if picked.len() == spec.max_items {
            break;
        }
        let cand = &recs[j];
        if tgt.timestamp.seconds_since(cand.timestamp) > spec.max_gap() {
            break;
        }
        if spec.per_user && cand.user_id != tgt.user_id {
            continue;
        }
        if spec
            .admits(tgt.timestamp, cand.timestamp, offset)
            .expect("sequence is sorted, so history never follows the target")
        {
            picked.push(j);
        }
    }
    picked.reverse();
    picked
}

pub fn build_context(seq: &UserPostSequence, target: usize, spec: &ContextSpec, offset: UtcOffset) -> TemporalContext {
    let items = context_indices(seq, target, spec, offset)
        .into_iter()
        .map(|j| {
            let ts = seq.records()[j].timestamp;
            ContextItem {
                record_index: j,
                timestamp: ts,
                time_vector: offset.calendar(ts).time_vector(),
            }
        })
        .collect();
    TemporalContext {
        target_index: target,
        items,
    }
}

/// Contexts of every record of a sequence under one spec.
#[derive(Debug, Clone)]
pub struct ContextTable {
    pub spec: ContextSpec,
    contexts: Vec<Vec<usize>>,
}

impl ContextTable {
    pub fn build(seq: &UserPostSequence, spec: ContextSpec, offset: UtcOffset) -> Self {
        let contexts = (0..seq.len())
            .map(|i| context_indices(seq, i, &spec, offset))
            .collect();
        Self { spec, contexts }
    }

    pub fn get(&self, target: usize) -> &[usize] {
        &self.contexts[target]
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }
}
