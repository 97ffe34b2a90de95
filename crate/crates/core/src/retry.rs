use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Bounded retry with exponential backoff: attempt `n` (0-based) that fails
/// transiently sleeps `base_delay * 2^n` before the next attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub attempts: u32,
    #[serde(with = "millis")]
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(attempts: u32) -> Self {
        Self {
            attempts,
            base_delay: Duration::ZERO,
        }
    }

    pub fn delay_after(&self, attempt: u32) -> Duration {
        self.base_delay.saturating_mul(1u32 << attempt.min(16))
    }

    /// Runs `op` until it succeeds, fails permanently, or attempts run out.
    /// Returns the final result and the number of retries performed.
    pub fn run<T, E>(&self, mut op: impl FnMut() -> Result<T, E>, is_transient: impl Fn(&E) -> bool) -> (Result<T, E>, u32) {
        let attempts = self.attempts.max(1);
        let mut retries = 0;
        loop {
            match op() {
                Ok(v) => return (Ok(v), retries),
                Err(e) if is_transient(&e) && retries + 1 < attempts => {
                    let delay = self.delay_after(retries);
                    if !delay.is_zero() {
                        thread::sleep(delay);
                    }
                    retries += 1;
                }
                Err(e) => return (Err(e), retries),
            }
        }
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}
