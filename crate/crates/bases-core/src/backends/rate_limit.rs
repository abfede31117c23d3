//! Sliding-window rate limiting over an injectable clock, so the
//! requests-per-second invariant is testable without wall-clock time.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::Duration;

/// Time source for the limiter and for retry backoff. `now` is measured from
/// an arbitrary fixed origin.
pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

/// Wall-clock time; sleeps block the calling thread.
pub struct SystemClock {
    origin: std::time::Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        Self {
            origin: std::time::Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Manually advanced clock; `sleep` advances time instead of blocking.
pub struct VirtualClock {
    now: Mutex<Duration>,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self {
            now: Mutex::new(Duration::ZERO),
        }
    }

    pub fn advance(&self, d: Duration) {
        *self.now.lock().unwrap() += d;
    }
}

impl Default for VirtualClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn sleep(&self, d: Duration) {
        self.advance(d);
    }
}

/// Allows at most `per_second` acquisitions in any one-second window.
/// `acquire` blocks (via the clock) until a slot is free.
pub struct RateLimiter {
    per_second: u32,
    clock: Arc<dyn Clock>,
    issued: Mutex<VecDeque<Duration>>,
}

const WINDOW: Duration = Duration::from_secs(1);

impl RateLimiter {
    pub fn new(per_second: u32, clock: Arc<dyn Clock>) -> Self {
        assert!(per_second > 0, "rate limit must be positive");
        Self {
            per_second,
            clock,
            issued: Mutex::new(VecDeque::new()),
        }
    }

    /// Blocks until issuing a request now keeps every one-second window at or
    /// under the limit, then records the issue time.
    pub fn acquire(&self) {
        loop {
            let now = self.clock.now();
            let wait = {
                let mut issued = self.issued.lock().unwrap();
                while let Some(&front) = issued.front() {
                    if now >= front + WINDOW {
                        issued.pop_front();
                    } else {
                        break;
                    }
                }
                if issued.len() < self.per_second as usize {
                    issued.push_back(now);
                    return;
                }
                // Oldest in-window entry decides when a slot frees up.
                *issued.front().unwrap() + WINDOW - now
            };
            self.clock.sleep(wait.max(Duration::from_millis(1)));
        }
    }
}
