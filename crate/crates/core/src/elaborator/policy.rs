use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub backoff_multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 3, initial_backoff_ms: 1000, backoff_multiplier: 4.0 }
    }
}

impl RetryPolicy {
    /// Pause after the `attempt`-th failure (1-based): 1 s, 4 s, 16 s, … by default.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = self.backoff_multiplier.powi(attempt.saturating_sub(1) as i32);
        Duration::from_secs_f64(self.initial_backoff_ms as f64 * factor / 1000.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElaborationPolicy {
    pub retry: RetryPolicy,
    /// Upper bound on concurrently open requests.
    pub max_inflight: usize,
    /// Songs longer than this are split across several requests.
    pub max_lines_per_request: usize,
    /// Lines repeated at the start of each follow-up chunk as context.
    pub chunk_overlap: usize,
    /// Token-bucket refill rate; `None` disables rate limiting.
    pub requests_per_second: Option<f64>,
}

impl Default for ElaborationPolicy {
    fn default() -> Self {
        Self {
            retry: RetryPolicy::default(),
            max_inflight: 4,
            max_lines_per_request: 80,
            chunk_overlap: 2,
            requests_per_second: None,
        }
    }
}

/// Lines `[start, end)` of a song sent in one request; the first `skip`
/// outputs belong to overlap lines and are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Chunk {
    pub start: usize,
    pub end: usize,
    pub skip: usize,
}

impl ElaborationPolicy {
    pub fn chunks(&self, n: usize) -> Vec<Chunk> {
        let max = self.max_lines_per_request.max(1);
        let overlap = self.chunk_overlap.min(max - 1);
        let mut out = vec![Chunk { start: 0, end: n.min(max), skip: 0 }];
        while out.last().unwrap().end < n {
            let start = out.last().unwrap().end - overlap;
            out.push(Chunk { start, end: (start + max).min(n), skip: overlap });
        }
        out
    }
}

pub trait Sleeper: Send + Sync {
    fn sleep(&self, d: Duration);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d)
    }
}

/// Skips backoff pauses entirely; for tests and offline fake clients.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoSleep;

impl Sleeper for NoSleep {
    fn sleep(&self, _: Duration) {}
}

/// Blocking token bucket shared by all request workers.
#[derive(Debug)]
pub struct TokenBucket {
    rate: f64,
    capacity: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(rate_per_sec: f64, capacity: f64) -> Self {
        assert!(rate_per_sec > 0.0 && capacity >= 1.0, "rate must be positive and capacity >= 1");
        Self { rate: rate_per_sec, capacity, state: Mutex::new((capacity, Instant::now())) }
    }

    /// Take one token, waiting for a refill if the bucket is empty.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut st = self.state.lock().unwrap();
                let now = Instant::now();
                st.0 = (st.0 + now.duration_since(st.1).as_secs_f64() * self.rate).min(self.capacity);
                st.1 = now;
                if st.0 >= 1.0 {
                    st.0 -= 1.0;
                    return;
                }
                (1.0 - st.0) / self.rate
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}
