//! Time providers and the cooperative stop flag used by the recorder loop.

use std::sync::atomic::{AtomicBool, AtomicI64, Ordering};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

/// Source of wall-clock instants in milliseconds since the Unix epoch.
pub trait Clock {
    fn now_ms(&self) -> i64;

    /// Block until `deadline_ms` or until `stop` is triggered.
    ///
    /// Returns `false` when the wait ended because the loop should stop.
    fn sleep_until(&self, deadline_ms: i64, stop: &StopSignal) -> bool;
}

/// Shared flag asking a long-running loop to finish after its current tick.
#[derive(Debug, Clone, Default)]
pub struct StopSignal(Arc<AtomicBool>);

impl StopSignal {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn trigger(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_triggered(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

const POLL_SLICE: Duration = Duration::from_millis(100);

impl Clock for SystemClock {
    fn now_ms(&self) -> i64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as i64)
            .unwrap_or(0)
    }

    fn sleep_until(&self, deadline_ms: i64, stop: &StopSignal) -> bool {
        loop {
            if stop.is_triggered() {
                return false;
            }
            let remaining = deadline_ms - self.now_ms();
            if remaining <= 0 {
                return true;
            }
            std::thread::sleep(POLL_SLICE.min(Duration::from_millis(remaining as u64)));
        }
    }
}

/// Deterministic clock for simulations and tests.
///
/// Time only moves when [`SimClock::advance`] or [`Clock::sleep_until`] is
/// called. An optional horizon ends any wait whose deadline lies beyond it,
/// which is how a simulated recording session of fixed length is expressed.
#[derive(Debug)]
pub struct SimClock {
    now: AtomicI64,
    horizon_ms: Option<i64>,
}

impl SimClock {
    pub fn new(start_ms: i64) -> Self {
        SimClock { now: AtomicI64::new(start_ms), horizon_ms: None }
    }

    pub fn with_horizon(start_ms: i64, horizon_ms: i64) -> Self {
        SimClock { now: AtomicI64::new(start_ms), horizon_ms: Some(horizon_ms) }
    }

    pub fn advance(&self, ms: i64) {
        self.now.fetch_add(ms, Ordering::SeqCst);
    }

    pub fn set(&self, ms: i64) {
        self.now.store(ms, Ordering::SeqCst);
    }
}

impl Clock for SimClock {
    fn now_ms(&self) -> i64 {
        self.now.load(Ordering::SeqCst)
    }

    fn sleep_until(&self, deadline_ms: i64, stop: &StopSignal) -> bool {
        if stop.is_triggered() {
            return false;
        }
        if let Some(h) = self.horizon_ms {
            if deadline_ms > h {
                self.now.fetch_max(h, Ordering::SeqCst);
                return false;
            }
        }
        self.now.fetch_max(deadline_ms, Ordering::SeqCst);
        true
    }
}
