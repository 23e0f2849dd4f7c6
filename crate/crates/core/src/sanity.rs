//! Masking-based check of an explanation: replace the explained points by
//! linear interpolation, classify again and see whether the label flips.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::TimeSeries;
use crate::error::{Error, Result};
use crate::influence::SalientPoint;
use crate::network::{Network, Prediction};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    /// `(channel, index)` centres.
    pub points: Vec<(String, usize)>,
    /// Odd window width centred on each point.
    pub window: usize,
}

impl MaskSpec {
    pub fn new(points: Vec<(String, usize)>, window: usize) -> Self {
        MaskSpec { points, window }
    }

    pub fn from_salient(points: &[SalientPoint], window: usize) -> Self {
        MaskSpec {
            points: points.iter().map(|p| (p.channel.clone(), p.index)).collect(),
            window,
        }
    }

    /// Merged, inclusive masked runs per channel.
    pub fn runs(&self, series: &TimeSeries) -> Result<BTreeMap<usize, Vec<(usize, usize)>>> {
        if self.window == 0 || self.window.is_multiple_of(2) {
            return Err(Error::Mask(format!("window must be odd, got {}", self.window)));
        }
        let len = series.len();
        let half = self.window / 2;
        let mut spans: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
        for (name, index) in &self.points {
            let c = series
                .channel_index(name)
                .ok_or_else(|| Error::Mask(format!("unknown channel `{name}`")))?;
            if *index >= len {
                return Err(Error::Mask(format!(
                    "index {index} out of range for `{name}` (length {len})"
                )));
            }
            spans
                .entry(c)
                .or_default()
                .push((index.saturating_sub(half), (index + half).min(len - 1)));
        }
        for (&c, list) in spans.iter_mut() {
            list.sort_unstable();
            let mut merged: Vec<(usize, usize)> = Vec::with_capacity(list.len());
            for &(a, b) in list.iter() {
                match merged.last_mut() {
                    // Touching runs merge too: interpolating one must not
                    // anchor on a value the other is about to replace.
                    Some(last) if a <= last.1 + 1 => last.1 = last.1.max(b),
                    _ => merged.push((a, b)),
                }
            }
            if merged.iter().any(|&(a, b)| a == 0 && b == len - 1) {
                return Err(Error::Mask(format!(
                    "mask covers all of channel `{}`",
                    series.channels[c].name
                )));
            }
            *list = merged;
        }
        Ok(spans)
    }
}

/// Replaces every masked run `[a, b]` by the straight line between
/// `x[a-1]` and `x[b+1]`; a run touching an end takes the single retained
/// neighbour's value.
pub fn mask(series: &TimeSeries, spec: &MaskSpec) -> Result<TimeSeries> {
    let runs = spec.runs(series)?;
    let mut out = series.clone();
    let len = series.len();
    for (c, list) in runs {
        let v = &mut out.channels[c].values;
        for (a, b) in list {
            match (a, b + 1 < len) {
                (0, _) => {
                    let fill = v[b + 1];
                    v[..=b].fill(fill);
                }
                (_, false) => {
                    let fill = v[a - 1];
                    v[a..].fill(fill);
                }
                _ => {
                    let (left, right) = (v[a - 1], v[b + 1]);
                    let span = (b + 2 - a) as f64;
                    for i in a..=b {
                        let frac = (i + 1 - a) as f64 / span;
                        v[i] = left + (right - left) * frac;
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    High,
    Low,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SanityResult {
    pub original_prediction: Prediction,
    pub masked_prediction: Prediction,
    pub flipped: bool,
    pub confidence: Confidence,
    pub masked_series: TimeSeries,
}

/// Classifies the original and the masked series; a label flip means high
/// confidence.
pub fn check(network: &Network, series: &TimeSeries, spec: &MaskSpec) -> Result<SanityResult> {
    let original_prediction = network.forward(series)?;
    let masked_series = mask(series, spec)?;
    let masked_prediction = network.forward(&masked_series)?;
    let flipped = original_prediction.label != masked_prediction.label;
    Ok(SanityResult {
        original_prediction,
        masked_prediction,
        flipped,
        confidence: if flipped {
            Confidence::High
        } else {
            Confidence::Low
        },
        masked_series,
    })
}
