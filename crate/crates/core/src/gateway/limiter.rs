use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

/// Global in-flight cap plus a requests-per-second pacer.
///
/// `max_inflight == 0` and `rate_per_s <= 0` each disable their limit.
#[derive(Debug)]
pub struct Limiter {
    max_inflight: usize,
    inflight: Mutex<usize>,
    released: Condvar,
    interval: Option<Duration>,
    next_slot: Mutex<Option<Instant>>,
}

/// Held for the duration of one backend call.
pub struct Permit<'a> {
    limiter: &'a Limiter,
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        if self.limiter.max_inflight > 0 {
            let mut n = self.limiter.inflight.lock().unwrap_or_else(|e| e.into_inner());
            *n -= 1;
            self.limiter.released.notify_one();
        }
    }
}

impl Limiter {
    pub fn new(max_inflight: usize, rate_per_s: f64) -> Self {
        let interval = (rate_per_s > 0.0).then(|| Duration::from_secs_f64(1.0 / rate_per_s));
        Self {
            max_inflight,
            inflight: Mutex::new(0),
            released: Condvar::new(),
            interval,
            next_slot: Mutex::new(None),
        }
    }

    pub fn unlimited() -> Self {
        Self::new(0, 0.0)
    }

    pub fn acquire(&self) -> Permit<'_> {
        if self.max_inflight > 0 {
            let mut n = self.inflight.lock().unwrap_or_else(|e| e.into_inner());
            while *n >= self.max_inflight {
                n = self.released.wait(n).unwrap_or_else(|e| e.into_inner());
            }
            *n += 1;
        }
        if let Some(interval) = self.interval {
            let wait = {
                let mut slot = self.next_slot.lock().unwrap_or_else(|e| e.into_inner());
                let now = Instant::now();
                let at = slot.map_or(now, |s| s.max(now));
                *slot = Some(at + interval);
                at.saturating_duration_since(now)
            };
            if !wait.is_zero() {
                std::thread::sleep(wait);
            }
        }
        Permit { limiter: self }
    }

    pub fn in_flight(&self) -> usize {
        *self.inflight.lock().unwrap_or_else(|e| e.into_inner())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    #[test]
    fn caps_concurrency() {
        let limiter = Arc::new(Limiter::new(2, 0.0));
        let peak = Arc::new(AtomicUsize::new(0));
        let current = Arc::new(AtomicUsize::new(0));
        std::thread::scope(|s| {
            for _ in 0..8 {
                let (limiter, peak, current) = (limiter.clone(), peak.clone(), current.clone());
                s.spawn(move || {
                    let _p = limiter.acquire();
                    let now = current.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(10));
                    current.fetch_sub(1, Ordering::SeqCst);
                });
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2);
        assert_eq!(limiter.in_flight(), 0);
    }

    #[test]
    fn paces_requests() {
        let limiter = Limiter::new(0, 100.0);
        let start = Instant::now();
        for _ in 0..5 {
            drop(limiter.acquire());
        }
        // Four intervals of 10ms between five calls.
        assert!(start.elapsed() >= Duration::from_millis(38));
    }
}
