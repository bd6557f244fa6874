//! Shared fixtures for unit tests.

use crate::density::CountCollection;
use crate::rng::CounterRng;

/// Log-normal collection with long-tailed counts.
pub(crate) fn log_normal(k: usize, seed: u64, mu: f64, sigma: f64) -> CountCollection {
    let rng = CounterRng::new(seed);
    let mut counts = Vec::with_capacity(k);
    for i in 0..k.div_ceil(2) {
        let (a, b) = rng.normal_pair(0, i as u64, 0);
        counts.push((mu + sigma * a).exp());
        if counts.len() < k {
            counts.push((mu + sigma * b).exp());
        }
    }
    CountCollection::new(counts).unwrap()
}

/// Seven counts spanning background, interior, and border-value cases.
pub(crate) fn seven_count_fixture() -> CountCollection {
    CountCollection::new(vec![0.00005, 0.2, 0.2, 0.4, 0.8, 1.6, 3.2]).unwrap()
}
