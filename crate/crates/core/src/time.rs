use serde::{Deserialize, Serialize};

pub const MILLIS_PER_DAY: i64 = 86_400_000;

/// Milliseconds since the Unix epoch, UTC.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub const fn from_millis(ms: i64) -> Self {
        Timestamp(ms)
    }

    pub const fn millis(self) -> i64 {
        self.0
    }

    /// Shifts by a (possibly fractional) number of seconds, rounding to the
    /// nearest millisecond.
    pub fn plus_secs(self, secs: f64) -> Self {
        Timestamp(self.0 + libm::round(secs * 1000.0) as i64)
    }

    pub fn plus_millis(self, ms: i64) -> Self {
        Timestamp(self.0 + ms)
    }

    /// Whole days since the epoch (floor).
    pub fn day(self) -> i64 {
        self.0.div_euclid(MILLIS_PER_DAY)
    }

    pub fn start_of_day(day: i64) -> Self {
        Timestamp(day * MILLIS_PER_DAY)
    }
}

/// Half-open interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl TimeWindow {
    pub fn new(start: Timestamp, end: Timestamp) -> crate::Result<Self> {
        if end < start {
            return Err(crate::Error::invalid(
                "window",
                alloc::format!("end {} precedes start {}", end.0, start.0),
            ));
        }
        Ok(TimeWindow { start, end })
    }

    /// The 24 hours ending at `end`.
    pub fn day_ending(end: Timestamp) -> Self {
        TimeWindow {
            start: Timestamp(end.0 - MILLIS_PER_DAY),
            end,
        }
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.start <= t && t < self.end
    }
}
