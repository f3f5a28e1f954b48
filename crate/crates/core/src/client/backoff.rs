use std::time::Duration;

use rand::{Rng, RngExt};

/// Relative jitter applied to every delay.
pub const JITTER: f64 = 0.2;

/// Exponential backoff: the base delay doubles per retry, each delay carries
/// ±20% jitter, delays never exceed the cap and never decrease.
#[derive(Debug, Clone)]
pub struct Backoff {
    base_ms: f64,
    cap_ms: u64,
    last_ms: u64,
}

impl Backoff {
    pub fn new(initial_ms: u64, cap_ms: u64) -> Self {
        Self {
            base_ms: initial_ms as f64,
            cap_ms,
            last_ms: 0,
        }
    }

    pub fn next_delay<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Duration {
        let factor = 1.0 + rng.random_range(-JITTER..=JITTER);
        let jittered = (self.base_ms * factor).round() as u64;
        let ms = jittered.min(self.cap_ms).max(self.last_ms);
        self.last_ms = ms;
        self.base_ms = (self.base_ms * 2.0).min(self.cap_ms as f64);
        Duration::from_millis(ms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn doubles_within_jitter_and_caps() {
        let mut rng = StdRng::seed_from_u64(7);
        let mut b = Backoff::new(500, 30_000);
        let delays: Vec<u64> = (0..10)
            .map(|_| b.next_delay(&mut rng).as_millis() as u64)
            .collect();
        assert!((400..=600).contains(&delays[0]), "{delays:?}");
        assert!((800..=1200).contains(&delays[1]), "{delays:?}");
        assert!((1600..=2400).contains(&delays[2]), "{delays:?}");
        assert!(delays.iter().all(|&d| d <= 30_000));
        assert_eq!(*delays.last().unwrap(), 30_000);
    }

    proptest! {
        #[test]
        fn delays_never_decrease(seed in any::<u64>(), initial in 0u64..5_000, cap in 0u64..60_000) {
            let mut rng = StdRng::seed_from_u64(seed);
            let mut b = Backoff::new(initial, cap);
            let mut prev = Duration::ZERO;
            for _ in 0..20 {
                let d = b.next_delay(&mut rng);
                prop_assert!(d >= prev);
                prop_assert!(d <= Duration::from_millis(cap));
                prev = d;
            }
        }
    }
}
