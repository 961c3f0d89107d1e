use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WINDOW: Duration = Duration::from_secs(60);

pub trait Clock: Send + Sync {
    /// Time since an arbitrary fixed origin.
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d)
    }
}

/// Manually driven clock; `sleep` advances time instantly.
#[derive(Debug, Default)]
pub struct VirtualClock {
    now: Mutex<Duration>,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&self, d: Duration) {
        *self.now.lock().expect("clock poisoned") += d;
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Duration {
        *self.now.lock().expect("clock poisoned")
    }
    fn sleep(&self, d: Duration) {
        self.advance(d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateLimit {
    pub queries_per_minute: u32,
    pub tokens_per_minute: u64,
    pub max_concurrent: usize,
}

impl Default for RateLimit {
    fn default() -> Self {
        Self { queries_per_minute: 60, tokens_per_minute: 100_000, max_concurrent: 4 }
    }
}

impl RateLimit {
    pub fn validate(&self) -> Result<()> {
        if self.queries_per_minute == 0 || self.tokens_per_minute == 0 || self.max_concurrent == 0 {
            return Err(Error::InvalidArgument("rate limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Default)]
struct Window {
    /// `(dispatch time, reserved tokens)`, oldest first.
    events: VecDeque<(Duration, u64)>,
    tokens: u64,
}

impl Window {
    fn prune(&mut self, now: Duration) {
        while let Some(&(t, tok)) = self.events.front() {
            if t + WINDOW <= now {
                self.events.pop_front();
                self.tokens -= tok;
            } else {
                break;
            }
        }
    }
}

/// Sliding 60-second limiter on dispatched requests and tokens plus a cap on
/// in-flight requests.
pub struct RateLimiter {
    limit: RateLimit,
    clock: Arc<dyn Clock>,
    window: Mutex<Window>,
    inflight: Mutex<usize>,
    released: Condvar,
}

impl std::fmt::Debug for RateLimiter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RateLimiter").field("limit", &self.limit).finish_non_exhaustive()
    }
}

/// Held while a request is in flight.
#[derive(Debug)]
pub struct Permit<'a> {
    limiter: &'a RateLimiter,
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.limiter.inflight.lock().expect("limiter poisoned");
        *n -= 1;
        self.limiter.released.notify_one();
    }
}

impl RateLimiter {
    pub fn new(limit: RateLimit, clock: Arc<dyn Clock>) -> Result<Self> {
        limit.validate()?;
        Ok(Self {
            limit,
            clock,
            window: Mutex::new(Window::default()),
            inflight: Mutex::new(0),
            released: Condvar::new(),
        })
    }

    pub fn limit(&self) -> RateLimit {
        self.limit
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    /// Blocks until a request reserving `tokens` may be dispatched.
    pub fn acquire(&self, tokens: u64) -> Result<Permit<'_>> {
        if tokens > self.limit.tokens_per_minute {
            return Err(Error::InvalidArgument(format!(
                "request of {tokens} tokens exceeds the per-minute limit {}",
                self.limit.tokens_per_minute
            )));
        }
        {
            let mut n = self.inflight.lock().expect("limiter poisoned");
            while *n >= self.limit.max_concurrent {
                n = self.released.wait(n).expect("limiter poisoned");
            }
            *n += 1;
        }
        let permit = Permit { limiter: self };
        loop {
            let wait = {
                let mut w = self.window.lock().expect("limiter poisoned");
                let now = self.clock.now();
                w.prune(now);
                let fits_queries = w.events.len() < self.limit.queries_per_minute as usize;
                let fits_tokens = w.tokens + tokens <= self.limit.tokens_per_minute;
                if fits_queries && fits_tokens {
                    w.events.push_back((now, tokens));
                    w.tokens += tokens;
                    return Ok(permit);
                }
                // the earliest moment something leaves the window
                let (oldest, _) = *w.events.front().expect("a full window is non-empty");
                (oldest + WINDOW).saturating_sub(now)
            };
            self.clock.sleep(wait.max(Duration::from_millis(1)));
        }
    }
}
