//! Input influence: magnitude of the output gradient per input value,
//! max-min scaled, plus selection of the most salient points.

use serde::{Deserialize, Serialize};

use crate::dataset::TimeSeries;
use crate::error::{Error, Result};
use crate::network::Network;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMode {
    /// Max-min over the whole map.
    Global,
    /// Max-min within each channel.
    #[default]
    PerChannel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceMap {
    pub channels: Vec<String>,
    /// `|∂p/∂x|`, `[channel][t]`.
    pub raw: Vec<Vec<f64>>,
    /// Max-min scaled `raw`, in `[0, 1]`.
    pub scaled: Vec<Vec<f64>>,
    pub scaling_mode: ScalingMode,
}

/// One row of the JSON export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelInfluence {
    pub channel: String,
    pub raw: Vec<f64>,
    pub scaled: Vec<f64>,
}

/// Max-min scaling; all zeros when max equals min.
pub fn max_min_scale(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![0.0; values.len()];
    }
    values
        .iter()
        .map(|&v| if v == hi { 1.0 } else { (v - lo) / span })
        .collect()
}

impl InfluenceMap {
    pub fn from_raw(channels: Vec<String>, raw: Vec<Vec<f64>>, mode: ScalingMode) -> Self {
        let scaled = match mode {
            ScalingMode::PerChannel => raw.iter().map(|r| max_min_scale(r)).collect(),
            ScalingMode::Global => {
                let len = raw.first().map_or(0, Vec::len);
                let flat: Vec<f64> = raw.iter().flatten().copied().collect();
                max_min_scale(&flat)
                    .chunks(len.max(1))
                    .map(<[f64]>::to_vec)
                    .collect()
            }
        };
        InfluenceMap {
            channels,
            raw,
            scaled,
            scaling_mode: mode,
        }
    }

    pub fn export(&self) -> Vec<ChannelInfluence> {
        self.channels
            .iter()
            .zip(&self.raw)
            .zip(&self.scaled)
            .map(|((c, r), s)| ChannelInfluence {
                channel: c.clone(),
                raw: r.clone(),
                scaled: s.clone(),
            })
            .collect()
    }

    /// `[{"channel": .., "raw": [..], "scaled": [..]}, ..]`
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.export()).expect("influence serializes")
    }
}

/// Influence map of `series` under `network`.
pub fn trace(network: &Network, series: &TimeSeries, mode: ScalingMode) -> Result<InfluenceMap> {
    let grad = network.grad_input(series)?;
    let raw = grad
        .into_iter()
        .map(|row| row.into_iter().map(f64::abs).collect())
        .collect();
    Ok(InfluenceMap::from_raw(series.channel_names(), raw, mode))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SalientPoint {
    pub channel: String,
    pub index: usize,
    pub scaled_influence: f64,
    /// Unscaled gradient magnitude, comparable across channels.
    pub raw_influence: f64,
    pub value: f64,
}

/// Threshold on scaled influence plus a per-channel cap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SalientPolicy {
    pub threshold: f64,
    pub per_channel_cap: usize,
}

impl Default for SalientPolicy {
    fn default() -> Self {
        SalientPolicy {
            threshold: 0.8,
            per_channel_cap: 3,
        }
    }
}

impl SalientPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::config("threshold", "must lie in (0, 1]"));
        }
        if self.per_channel_cap == 0 {
            return Err(Error::config("per_channel_cap", "must be positive"));
        }
        Ok(())
    }
}

/// Per channel (in map order), up to `per_channel_cap` points whose scaled
/// influence reaches the threshold, strongest first, ties to the lower
/// index. `values` supplies the input value at each point.
pub fn top_salient(
    map: &InfluenceMap,
    series: &TimeSeries,
    policy: &SalientPolicy,
) -> Result<Vec<SalientPoint>> {
    policy.validate()?;
    let mut out = Vec::new();
    for ((name, scaled), raw) in map.channels.iter().zip(&map.scaled).zip(&map.raw) {
        let values = &series
            .channel(name)
            .ok_or_else(|| Error::Shape(format!("series has no channel `{name}`")))?
            .values;
        if values.len() != scaled.len() {
            return Err(Error::Shape(format!(
                "channel `{name}`: influence length {} vs series length {}",
                scaled.len(),
                values.len()
            )));
        }
        let mut idx: Vec<usize> = (0..scaled.len())
            .filter(|&t| scaled[t] >= policy.threshold)
            .collect();
        idx.sort_by(|&a, &b| scaled[b].total_cmp(&scaled[a]).then(a.cmp(&b)));
        out.extend(idx.into_iter().take(policy.per_channel_cap).map(|t| SalientPoint {
            channel: name.clone(),
            index: t,
            scaled_influence: scaled[t],
            raw_influence: raw[t],
            value: values[t],
        }));
    }
    Ok(out)
}
