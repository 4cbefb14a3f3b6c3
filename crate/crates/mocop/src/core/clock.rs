use chrono::{DateTime, Duration, TimeZone, Utc};
use std::sync::Mutex;

/// Time source for response timestamps and pacing.
///
/// Offline runs use a [`VirtualClock`] so the record log is bit-identical
/// across repeats; live runs use the system clock.
pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
    /// Advances virtual time; a no-op on the system clock (real time passes
    /// through sleeps instead).
    fn advance(&self, secs: f64);
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
    fn advance(&self, _secs: f64) {}
}

/// Deterministic clock starting at a fixed epoch, advanced explicitly.
pub struct VirtualClock {
    micros: Mutex<i64>,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self { micros: Mutex::new(0) }
    }

    fn base() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2026, 1, 1, 0, 0, 0).unwrap()
    }
}

impl Default for VirtualClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> DateTime<Utc> {
        let m = *self.micros.lock().unwrap();
        Self::base() + Duration::microseconds(m)
    }

    fn advance(&self, secs: f64) {
        let mut m = self.micros.lock().unwrap();
        *m += (secs * 1e6).round() as i64;
    }
}
