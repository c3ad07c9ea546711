//! Raw accelerometer streams with labelled behaviour bouts, transient
//! hand-overs, unlabelled stretches and dropped seconds.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::biosignal::{SensorStream, StreamSample};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct StreamFixture {
    pub seconds: usize,
    pub rate_hz: usize,
    /// Bout length range in seconds, inclusive.
    pub bout_s: (usize, usize),
    pub gap_prob: f64,
    pub unlabelled_prob: f64,
    pub noise: f64,
}

impl Default for StreamFixture {
    fn default() -> Self {
        StreamFixture { seconds: 240, rate_hz: 10, bout_s: (6, 20), gap_prob: 0.02, unlabelled_prob: 0.1, noise: 0.3 }
    }
}

/// One raw stream. Each bout draws a label from `labels` (or none) and shifts
/// the three channel means by a label-specific offset. The first second of a
/// bout following a different label is transient.
pub fn fixture_stream(subject: &str, session: &str, labels: &[&str], fx: &StreamFixture, seed: u64) -> SensorStream {
    let mut rng = seed::rng_from(seed::derive_item(seed, "fixture-stream", &format!("{subject}/{session}")));
    let normal = Normal::new(0.0, fx.noise).expect("valid noise");
    let mut stream = SensorStream::new(subject, session, fx.rate_hz as f64, 3);
    let mut sec = 0;
    let mut previous: Option<usize> = None;
    while sec < fx.seconds {
        let len = rng.random_range(fx.bout_s.0..=fx.bout_s.1.max(fx.bout_s.0));
        let label = if labels.is_empty() || rng.random::<f64>() < fx.unlabelled_prob {
            None
        } else {
            Some(rng.random_range(0..labels.len()))
        };
        let mean = match label {
            Some(l) => {
                let a = std::f64::consts::TAU * l as f64 / labels.len() as f64;
                [a.cos(), a.sin(), if l % 2 == 0 { 0.5 } else { -0.5 }]
            }
            None => [0.0; 3],
        };
        for k in 0..len.min(fx.seconds - sec) {
            let s = sec + k;
            if rng.random::<f64>() < fx.gap_prob {
                continue;
            }
            let transient = k == 0 && previous.is_some() && label.is_some() && previous != label;
            for j in 0..fx.rate_hz {
                let t = s as f64 + j as f64 / fx.rate_hz as f64;
                let channels = mean.iter().map(|m| m + normal.sample(&mut rng)).collect();
                let mut sample = StreamSample::raw(t, channels, label.map(|l| labels[l]));
                sample.transient = transient;
                stream.samples.push(sample);
            }
        }
        if label.is_some() {
            previous = label;
        }
        sec += len;
    }
    stream
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biosignal::aggregate_to_seconds;

    #[test]
    fn fixture_is_valid_and_reproducible() {
        let fx = StreamFixture::default();
        let a = fixture_stream("cat1", "s1", &["Walk", "Run", "Rest"], &fx, 4);
        a.validate().unwrap();
        assert_eq!(a, fixture_stream("cat1", "s1", &["Walk", "Run", "Rest"], &fx, 4));
        assert_ne!(a, fixture_stream("cat2", "s1", &["Walk", "Run", "Rest"], &fx, 4));
        let secs = aggregate_to_seconds(&a).unwrap();
        assert!(secs.samples.iter().any(|s| s.gap));
        assert!(secs.samples.iter().any(|s| s.transient));
        assert!(secs.samples.iter().any(|s| !s.gap && s.label.is_none()));
    }
}
