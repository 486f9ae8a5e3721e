//! Blocking rate limiters shared between worker threads.

use std::collections::HashMap;
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

/// Token bucket: `rate` tokens per second, holding at most `burst`.
#[derive(Debug)]
pub struct TokenBucket {
    rate: f64,
    burst: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(rate: f64, burst: u32) -> Self {
        let burst = f64::from(burst.max(1));
        TokenBucket {
            rate,
            burst,
            state: Mutex::new((burst, Instant::now())),
        }
    }

    /// Blocks until a token is available. A non-positive rate never blocks.
    pub fn acquire(&self) {
        if self.rate <= 0.0 || !self.rate.is_finite() {
            return;
        }
        loop {
            let wait = {
                let mut state = self.state.lock().unwrap();
                let (tokens, last) = &mut *state;
                let now = Instant::now();
                *tokens = (*tokens + now.duration_since(*last).as_secs_f64() * self.rate).min(self.burst);
                *last = now;
                if *tokens >= 1.0 {
                    *tokens -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - *tokens) / self.rate)
            };
            thread::sleep(wait);
        }
    }
}

/// Minimum spacing between requests to the same host.
#[derive(Debug)]
pub struct HostRateLimiter {
    interval: Duration,
    next_slot: Mutex<HashMap<String, Instant>>,
}

impl HostRateLimiter {
    /// `per_second <= 0` disables limiting.
    pub fn new(per_second: f64) -> Self {
        let interval = if per_second > 0.0 && per_second.is_finite() {
            Duration::from_secs_f64(1.0 / per_second)
        } else {
            Duration::ZERO
        };
        HostRateLimiter {
            interval,
            next_slot: Mutex::new(HashMap::new()),
        }
    }

    pub fn unlimited() -> Self {
        Self::new(0.0)
    }

    /// Reserves the next slot for `host` and sleeps until it arrives.
    pub fn acquire(&self, host: &str) {
        if self.interval.is_zero() {
            return;
        }
        let slot = {
            let mut slots = self.next_slot.lock().unwrap();
            let now = Instant::now();
            let slot = slots.get(host).copied().filter(|s| *s > now).unwrap_or(now);
            slots.insert(host.to_string(), slot + self.interval);
            slot
        };
        let now = Instant::now();
        if slot > now {
            thread::sleep(slot - now);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn host_limiter_spaces_requests() {
        let limiter = HostRateLimiter::new(20.0);
        let start = Instant::now();
        for _ in 0..3 {
            limiter.acquire("a");
        }
        assert!(start.elapsed() >= Duration::from_millis(95));
    }

    #[test]
    fn hosts_are_independent() {
        let limiter = HostRateLimiter::new(2.0);
        let start = Instant::now();
        limiter.acquire("a");
        limiter.acquire("b");
        assert!(start.elapsed() < Duration::from_millis(200));
    }

    #[test]
    fn bucket_allows_burst_then_throttles() {
        let bucket = TokenBucket::new(50.0, 2);
        let start = Instant::now();
        bucket.acquire();
        bucket.acquire();
        assert!(start.elapsed() < Duration::from_millis(15));
        bucket.acquire();
        assert!(start.elapsed() >= Duration::from_millis(15));
    }
}
