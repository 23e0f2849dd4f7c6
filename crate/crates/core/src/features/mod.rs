//! Sequence-wise statistics and point-wise descriptors used to describe
//! influential points.
//!
//! Variances and standard deviations are population (divide-by-N)
//! quantities. Block features split a sequence into consecutive blocks of
//! `n` observations and drop any trailing partial block.

mod cwt;

use serde::{Deserialize, Serialize};

use crate::dataset::TimeSeries;
use crate::error::{Error, Result};
use crate::influence::SalientPoint;

pub use cwt::{cwt, num_peaks, ricker, ridge_lines, Ridge, NOISE_PERCENTILE};

/// How consecutive-block KL divergences are reduced to one score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlMode {
    /// Largest divergence between any two consecutive blocks.
    #[default]
    MaxPairwise,
    /// Largest absolute change between successive pairwise divergences
    /// (falls back to the single divergence with only two blocks).
    MaxSuccessiveDifference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub block_size: usize,
    pub kl_bins: usize,
    pub kl_epsilon: f64,
    pub kl_mode: KlMode,
    pub r_sigma: f64,
    pub peak_max_width: usize,
    pub peak_snr: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            block_size: 10,
            kl_bins: 5,
            kl_epsilon: 1e-4,
            kl_mode: KlMode::MaxPairwise,
            r_sigma: 3.0,
            peak_max_width: 5,
            peak_snr: 1.0,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_size < 2 {
            return Err(Error::config("block_size", "must be at least 2"));
        }
        if self.kl_bins < 2 {
            return Err(Error::config("kl_bins", "must be at least 2"));
        }
        if !(self.kl_epsilon > 0.0 && self.kl_epsilon.is_finite()) {
            return Err(Error::config("kl_epsilon", "must be positive"));
        }
        if !(self.r_sigma > 0.0 && self.r_sigma.is_finite()) {
            return Err(Error::config("r_sigma", "must be positive"));
        }
        if self.peak_max_width < 1 {
            return Err(Error::config("peak_max_width", "must be at least 1"));
        }
        if !(self.peak_snr > 0.0 && self.peak_snr.is_finite()) {
            return Err(Error::config("peak_snr", "must be positive"));
        }
        Ok(())
    }
}

/// Names of the sequence-wise features, in report order.
pub const SEQUENCE_FEATURES: [&str; 6] = [
    "lumpiness",
    "level_shift",
    "kl_score",
    "num_peaks",
    "ratio_beyond_r_sigma",
    "std_dev",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceFeatures {
    pub lumpiness: f64,
    pub level_shift: f64,
    pub kl_score: f64,
    pub num_peaks: usize,
    pub ratio_beyond_r_sigma: f64,
    pub std_dev: f64,
}

impl SequenceFeatures {
    pub fn compute(values: &[f64], config: &FeatureConfig) -> Result<Self> {
        let n = config.block_size;
        Ok(SequenceFeatures {
            lumpiness: lumpiness(values, n)?,
            level_shift: level_shift(values, n)?,
            kl_score: kl_score_with(values, n, config.kl_bins, config.kl_epsilon, config.kl_mode)?,
            num_peaks: num_peaks(values, config.peak_max_width, config.peak_snr)?,
            ratio_beyond_r_sigma: ratio_beyond_r_sigma(values, config.r_sigma)?,
            std_dev: std_dev(values)?,
        })
    }

    /// Value of a feature by name.
    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "lumpiness" => self.lumpiness,
            "level_shift" => self.level_shift,
            "kl_score" => self.kl_score,
            "num_peaks" => self.num_peaks as f64,
            "ratio_beyond_r_sigma" => self.ratio_beyond_r_sigma,
            "std_dev" => self.std_dev,
            _ => return None,
        })
    }
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn population_variance(values: &[f64]) -> f64 {
    let (_, std) = mean_std(values);
    std * std
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Feature(format!("non-finite value at index {i}"))),
        None => Ok(()),
    }
}

fn blocks(values: &[f64], n: usize) -> Result<std::slice::ChunksExact<'_, f64>> {
    if n < 1 || values.len() < 2 * n {
        return Err(Error::Feature(format!(
            "block features need at least {} points (two blocks of {n}), got {}",
            2 * n,
            values.len()
        )));
    }
    check_finite(values)?;
    Ok(values.chunks_exact(n))
}

/// Variance of the per-block variances.
pub fn lumpiness(values: &[f64], n: usize) -> Result<f64> {
    let vars: Vec<f64> = blocks(values, n)?
        .map(|b| {
            let m = b.iter().sum::<f64>() / b.len() as f64;
            b.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / b.len() as f64
        })
        .collect();
    Ok(population_variance(&vars))
}

/// Largest absolute change in mean between consecutive blocks.
pub fn level_shift(values: &[f64], n: usize) -> Result<f64> {
    let means: Vec<f64> = blocks(values, n)?
        .map(|b| b.iter().sum::<f64>() / b.len() as f64)
        .collect();
    Ok(means
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max))
}

/// Smoothed block histograms on bin edges shared across the sequence.
fn block_histograms(values: &[f64], n: usize, bins: usize, epsilon: f64) -> Result<Vec<Vec<f64>>> {
    if bins < 2 || !(epsilon > 0.0) {
        return Err(Error::Feature("kl score needs >= 2 bins and epsilon > 0".into()));
    }
    let chunks = blocks(values, n)?;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    Ok(chunks
        .map(|b| {
            let mut hist = vec![0.0; bins];
            for &v in b {
                let slot = if span > 0.0 {
                    (((v - lo) / span * bins as f64).floor() as usize).min(bins - 1)
                } else {
                    0
                };
                hist[slot] += 1.0;
            }
            let len = b.len() as f64;
            let norm = 1.0 + epsilon * bins as f64;
            hist.iter().map(|c| (c / len + epsilon) / norm).collect()
        })
        .collect())
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| a * (a / b).ln()).sum()
}

/// KL score with the default reduction (largest consecutive-block KL).
pub fn kl_score(values: &[f64], n: usize, bins: usize, epsilon: f64) -> Result<f64> {
    kl_score_with(values, n, bins, epsilon, KlMode::MaxPairwise)
}

pub fn kl_score_with(
    values: &[f64],
    n: usize,
    bins: usize,
    epsilon: f64,
    mode: KlMode,
) -> Result<f64> {
    let hists = block_histograms(values, n, bins, epsilon)?;
    let divs: Vec<f64> = hists.windows(2).map(|w| kl(&w[0], &w[1])).collect();
    let score = match mode {
        KlMode::MaxPairwise => divs.iter().copied().fold(0.0, f64::max),
        KlMode::MaxSuccessiveDifference if divs.len() == 1 => divs[0],
        KlMode::MaxSuccessiveDifference => divs
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0, f64::max),
    };
    // Identical histograms can leave a tiny negative rounding residue.
    Ok(score.max(0.0))
}

/// Fraction of points further than `r` population standard deviations from
/// the mean. Zero for constant sequences.
pub fn ratio_beyond_r_sigma(values: &[f64], r: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Feature("empty sequence".into()));
    }
    check_finite(values)?;
    let (mean, std) = mean_std(values);
    if std == 0.0 {
        return Ok(0.0);
    }
    let beyond = values.iter().filter(|v| (*v - mean).abs() > r * std).count();
    Ok(beyond as f64 / values.len() as f64)
}

pub fn std_dev(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Feature("empty sequence".into()));
    }
    check_finite(values)?;
    Ok(mean_std(values).1)
}

/// Descriptors of a single point relative to its channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointFeatures {
    pub index: usize,
    pub value: f64,
    pub z_score: f64,
    pub is_global_max: bool,
    pub is_global_min: bool,
    pub is_local_peak: bool,
    pub is_local_valley: bool,
    pub is_highest_spike: bool,
    pub is_lowest_valley: bool,
}

impl PointFeatures {
    /// Numeric view of a descriptor; flags map to 0/1.
    pub fn get(&self, name: &str) -> Option<f64> {
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        Some(match name {
            "index" => self.index as f64,
            "value" => self.value,
            "z_score" => self.z_score,
            "abs_z_score" => self.z_score.abs(),
            "is_global_max" => flag(self.is_global_max),
            "is_global_min" => flag(self.is_global_min),
            "is_local_peak" => flag(self.is_local_peak),
            "is_local_valley" => flag(self.is_local_valley),
            "is_highest_spike" => flag(self.is_highest_spike),
            "is_lowest_valley" => flag(self.is_lowest_valley),
            _ => return None,
        })
    }
}

/// Strictly above every neighbour; a boundary point has one neighbour.
fn is_peak(values: &[f64], i: usize) -> bool {
    (i == 0 || values[i] > values[i - 1]) && (i + 1 == values.len() || values[i] > values[i + 1])
}

fn is_valley(values: &[f64], i: usize) -> bool {
    (i == 0 || values[i] < values[i - 1]) && (i + 1 == values.len() || values[i] < values[i + 1])
}

/// Point-wise descriptors of `values[index]`.
///
/// The global max/min flags require the point to be the unique extreme.
/// The highest spike is the local peak with the largest z-score, the lowest
/// valley the local valley with the smallest; ties go to the lower index.
pub fn point_features(values: &[f64], index: usize) -> Result<PointFeatures> {
    if index >= values.len() {
        return Err(Error::Feature(format!(
            "index {index} out of range for length {}",
            values.len()
        )));
    }
    if values.len() < 2 {
        return Err(Error::Feature("point features need at least 2 points".into()));
    }
    check_finite(values)?;
    let (mean, std) = mean_std(values);
    let z = |v: f64| if std > 0.0 { (v - mean) / std } else { 0.0 };
    let x = values[index];
    let others = || values.iter().enumerate().filter(|&(i, _)| i != index);
    let is_local_peak = is_peak(values, index);
    let is_local_valley = is_valley(values, index);

    // First index holding the extreme z-score among peaks (valleys).
    let mut top: Option<(usize, f64)> = None;
    let mut bottom: Option<(usize, f64)> = None;
    for i in 0..values.len() {
        let zi = z(values[i]);
        if is_peak(values, i) && top.is_none_or(|(_, best)| zi > best) {
            top = Some((i, zi));
        }
        if is_valley(values, i) && bottom.is_none_or(|(_, best)| zi < best) {
            bottom = Some((i, zi));
        }
    }

    Ok(PointFeatures {
        index,
        value: x,
        z_score: z(x),
        is_global_max: others().all(|(_, &v)| x > v),
        is_global_min: others().all(|(_, &v)| x < v),
        is_local_peak,
        is_local_valley,
        is_highest_spike: top.is_some_and(|(i, _)| i == index),
        is_lowest_valley: bottom.is_some_and(|(i, _)| i == index),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelFeatures {
    pub channel: String,
    #[serde(flatten)]
    pub features: SequenceFeatures,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointEntry {
    pub channel: String,
    pub scaled_influence: f64,
    #[serde(flatten)]
    pub features: PointFeatures,
}

/// Sequence features for every channel plus descriptors of salient points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub config: FeatureConfig,
    pub channels: Vec<ChannelFeatures>,
    pub points: Vec<PointEntry>,
}

impl FeatureReport {
    pub fn channel(&self, name: &str) -> Option<&SequenceFeatures> {
        self.channels
            .iter()
            .find(|c| c.channel == name)
            .map(|c| &c.features)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn feature_report(
    series: &TimeSeries,
    salient_points: &[SalientPoint],
    config: &FeatureConfig,
) -> Result<FeatureReport> {
    config.validate()?;
    let channels = series
        .channels
        .iter()
        .map(|c| {
            SequenceFeatures::compute(&c.values, config)
                .map(|features| ChannelFeatures {
                    channel: c.name.clone(),
                    features,
                })
                .map_err(|e| Error::Report(format!("channel `{}`: {e}", c.name)))
        })
        .collect::<Result<Vec<_>>>()?;
    let points = salient_points
        .iter()
        .map(|p| {
            let ch = series.channel(&p.channel).ok_or_else(|| {
                Error::Report(format!(
                    "salient point ({}, {}) names an unknown channel",
                    p.channel, p.index
                ))
            })?;
            if p.index >= ch.values.len() {
                return Err(Error::Report(format!(
                    "salient point ({}, {}) is out of range",
                    p.channel, p.index
                )));
            }
            Ok(PointEntry {
                channel: p.channel.clone(),
                scaled_influence: p.scaled_influence,
                features: point_features(&ch.values, p.index)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureReport {
        config: config.clone(),
        channels,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lumpiness_by_hand() {
        assert_eq!(lumpiness(&[1.0, 1.0, 2.0, 2.0, 3.0, 3.0], 2).unwrap(), 0.0);
        assert_eq!(lumpiness(&[0.0, 2.0, 0.0, 0.0], 2).unwrap(), 0.25);
        assert!(lumpiness(&[0.0, 1.0, 2.0], 2).is_err());
    }

    #[test]
    fn level_shift_by_hand() {
        assert_eq!(level_shift(&[1.0, 1.0, 1.0, 5.0, 5.0, 5.0], 3).unwrap(), 4.0);
        assert_eq!(level_shift(&[2.5; 8], 3).unwrap(), 0.0);
    }

    #[test]
    fn kl_of_identical_blocks_is_zero() {
        assert_eq!(kl_score(&[0.0, 1.0, 2.0, 0.0, 1.0, 2.0], 3, 3, 1e-4).unwrap(), 0.0);
        assert_eq!(kl_score(&[4.0; 6], 3, 3, 1e-4).unwrap(), 0.0);
    }

    #[test]
    fn kl_modes_differ_with_three_blocks() {
        let v = [0.0, 0.0, 1.0, 1.0, 0.0, 1.0];
        let pairwise = kl_score_with(&v, 2, 2, 1e-4, KlMode::MaxPairwise).unwrap();
        let diff = kl_score_with(&v, 2, 2, 1e-4, KlMode::MaxSuccessiveDifference).unwrap();
        assert!(pairwise > 0.0 && diff >= 0.0);
        assert_ne!(pairwise, diff);
    }

    #[test]
    fn ratio_and_std_by_hand() {
        let v = [0.0, 0.0, 0.0, 0.0, 10.0];
        assert_eq!(ratio_beyond_r_sigma(&v, 1.0).unwrap(), 0.2);
        assert_eq!(std_dev(&v).unwrap(), 4.0);
        assert_eq!(ratio_beyond_r_sigma(&[3.0; 5], 0.5).unwrap(), 0.0);
        assert_eq!(std_dev(&[3.0; 5]).unwrap(), 0.0);
    }

    #[test]
    fn point_features_by_hand() {
        let p = point_features(&[1.0, 5.0, 1.0], 1).unwrap();
        assert!(p.is_local_peak && p.is_global_max && p.is_highest_spike);
        assert!(!p.is_local_valley && !p.is_global_min);

        let p = point_features(&[0.0, 0.0, 0.0, 0.0, 10.0], 4).unwrap();
        assert_eq!(p.z_score, 2.0);
        assert!(p.is_global_max && p.is_local_peak && p.is_highest_spike);

        for i in 0..4 {
            let p = point_features(&[7.0; 4], i).unwrap();
            assert_eq!(p.z_score, 0.0);
            assert!(
                !(p.is_global_max
                    || p.is_global_min
                    || p.is_local_peak
                    || p.is_local_valley
                    || p.is_highest_spike
                    || p.is_lowest_valley)
            );
        }
    }

    #[test]
    fn highest_spike_tie_goes_to_lower_index() {
        let v = [0.0, 3.0, 0.0, 3.0, 0.0];
        assert!(point_features(&v, 1).unwrap().is_highest_spike);
        assert!(!point_features(&v, 3).unwrap().is_highest_spike);
        assert!(!point_features(&v, 1).unwrap().is_global_max);
        assert!(point_features(&v, 0).unwrap().is_lowest_valley);
    }

    #[test]
    fn peaks_of_simple_shapes() {
        assert_eq!(num_peaks(&[0.0; 50], 5, 1.0).unwrap(), 0);
        assert_eq!(num_peaks(&[3.5; 50], 5, 1.0).unwrap(), 0);
    }
}
