use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Channel, Dataset, Injection, Label, TimeSeries};
use crate::error::{Error, Result};

/// Sensor channels of the synthetic machine dataset, in schema order.
/// Only the last two ever receive point anomalies.
pub const SYNTHETIC_CHANNELS: [&str; 3] = ["pressure", "torque", "temperature"];

const SPIKE_CHANNELS: [&str; 2] = ["torque", "temperature"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_series: usize,
    pub length: usize,
    pub anomaly_fraction: f64,
    /// Spike size in multiples of the clean channel's standard deviation.
    pub spike_magnitude_range: (f64, f64),
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_series: 1500,
            length: 50,
            anomaly_fraction: 0.17,
            spike_magnitude_range: (4.0, 8.0),
            seed: 7,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_series < 1 {
            return Err(Error::config("n_series", "must be at least 1"));
        }
        if self.length < 8 {
            return Err(Error::config("length", "must be at least 8"));
        }
        if !(self.anomaly_fraction > 0.0 && self.anomaly_fraction < 1.0) {
            return Err(Error::config("anomaly_fraction", "must lie in (0, 1)"));
        }
        let (low, high) = self.spike_magnitude_range;
        if !(low >= 3.0) || !low.is_finite() {
            return Err(Error::config(
                "spike_magnitude_range",
                "lower bound must be at least 3",
            ));
        }
        if !(high >= low) || !high.is_finite() {
            return Err(Error::config(
                "spike_magnitude_range",
                "upper bound must be finite and not below the lower bound",
            ));
        }
        Ok(())
    }

    pub fn n_anomalous(&self) -> usize {
        (self.n_series as f64 * self.anomaly_fraction).round() as usize
    }
}

/// Generates the synthetic pressure/torque/temperature dataset.
///
/// Every channel is a randomly parameterised sinusoid plus clipped Gaussian
/// noise. Anomalous series get one or two point spikes placed at
/// `mean ± m·std` of the clean torque or temperature channel. Injection
/// sites are recorded on the series.
pub fn generate_synthetic(config: &GenConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let t_len = config.length;

    let mut order: Vec<usize> = (0..config.n_series).collect();
    order.shuffle(&mut rng);
    let mut anomalous = vec![false; config.n_series];
    for &i in &order[..config.n_anomalous()] {
        anomalous[i] = true;
    }

    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let (low, high) = config.spike_magnitude_range;
    let mut series = Vec::with_capacity(config.n_series);
    for (id, &is_anomalous) in anomalous.iter().enumerate() {
        let mut channels: Vec<Channel> = SYNTHETIC_CHANNELS
            .iter()
            .map(|name| {
                let amp = rng.random_range(0.5..=2.0);
                let freq = rng.random_range(1.0..=4.0);
                let phase = rng.random_range(0.0..2.0 * PI);
                let sigma = 0.1 * amp;
                let values = (0..t_len)
                    .map(|t| {
                        let base = amp * (2.0 * PI * freq * t as f64 / t_len as f64 + phase).sin();
                        let noise: f64 = unit.sample(&mut rng);
                        base + sigma * noise.clamp(-3.0, 3.0)
                    })
                    .collect();
                Channel::new(*name, values)
            })
            .collect();

        let mut injections = Vec::new();
        if is_anomalous {
            // Spike levels come from the clean channel, before any injection.
            let stats: Vec<(f64, f64)> = channels
                .iter()
                .map(|c| crate::features::mean_std(&c.values))
                .collect();
            let n_spikes = rng.random_range(1..=2usize);
            while injections.len() < n_spikes {
                let channel = SPIKE_CHANNELS[rng.random_range(0..SPIKE_CHANNELS.len())];
                let index = rng.random_range(0..t_len);
                let magnitude = rng.random_range(low..=high);
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                if injections
                    .iter()
                    .any(|i: &Injection| i.channel == channel && i.index == index)
                {
                    continue;
                }
                let c = channels
                    .iter()
                    .position(|c| c.name == channel)
                    .expect("spike channel in schema");
                let (mean, std) = stats[c];
                channels[c].values[index] = mean + sign * magnitude * std;
                injections.push(Injection {
                    channel: channel.to_string(),
                    index,
                });
            }
            injections.sort();
        }

        let label = if is_anomalous {
            Label::Anomalous
        } else {
            Label::Normal
        };
        // Store exactly what the CSV writer emits so files round-trip bit for bit.
        for c in &mut channels {
            for v in &mut c.values {
                *v = super::csv_io::quantize(*v);
            }
        }
        let mut s = TimeSeries::new(id as u64, channels, Some(label))?;
        s.injections = injections;
        series.push(s);
    }

    Dataset::new(
        series,
        SYNTHETIC_CHANNELS.iter().map(|s| s.to_string()).collect(),
        None,
    )
}
