//! Multichannel time series, labelled datasets, the synthetic machine
//! sensor generator, CSV ingestion and stratified splitting.

mod csv_io;
mod generate;
mod split;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_io::{
    format_real, quantize, load_csv, parse_csv, parse_truth, save_csv, truth_path, write_csv, write_truth,
    Layout, SchemaSpec, Truth,
};
pub use generate::{generate_synthetic, GenConfig, SYNTHETIC_CHANNELS};
pub use split::split;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Anomalous,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Normal => 0,
            Label::Anomalous => 1,
        }
    }

    pub fn is_anomalous(self) -> bool {
        self == Label::Anomalous
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Normal => "normal",
            Label::Anomalous => "anomalous",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    pub values: Vec<f64>,
}

impl Channel {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Channel {
            name: name.into(),
            values,
        }
    }
}

/// Ground-truth location of an injected point anomaly. Kept for evaluation
/// only; nothing in the model path reads it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Injection {
    pub channel: String,
    pub index: usize,
}

/// A fixed-length multichannel sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub id: u64,
    pub channels: Vec<Channel>,
    pub label: Option<Label>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub injections: Vec<Injection>,
}

impl TimeSeries {
    pub fn new(id: u64, channels: Vec<Channel>, label: Option<Label>) -> Result<Self> {
        let series = TimeSeries {
            id,
            channels,
            label,
            injections: Vec::new(),
        };
        series.validate()?;
        Ok(series)
    }

    /// Checks length, naming and finiteness invariants.
    pub fn validate(&self) -> Result<()> {
        let first = self
            .channels
            .first()
            .ok_or_else(|| Error::Series(format!("series {} has no channels", self.id)))?;
        let len = first.values.len();
        if len < 2 {
            return Err(Error::Series(format!(
                "series {} has length {len}, need at least 2",
                self.id
            )));
        }
        let mut seen = HashSet::new();
        for ch in &self.channels {
            if ch.values.len() != len {
                return Err(Error::Series(format!(
                    "series {}: channel `{}` has length {}, expected {len}",
                    self.id,
                    ch.name,
                    ch.values.len()
                )));
            }
            if !seen.insert(ch.name.as_str()) {
                return Err(Error::Series(format!(
                    "series {}: duplicate channel `{}`",
                    self.id, ch.name
                )));
            }
            if let Some(t) = ch.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::Series(format!(
                    "series {}: non-finite value in `{}` at index {t}",
                    self.id, ch.name
                )));
            }
        }
        for inj in &self.injections {
            if !seen.contains(inj.channel.as_str()) || inj.index >= len {
                return Err(Error::Series(format!(
                    "series {}: injection site ({}, {}) out of range",
                    self.id, inj.channel, inj.index
                )));
            }
        }
        Ok(())
    }

    /// Sequence length T.
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, |c| c.values.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c.name == name)
    }

    pub fn channel_names(&self) -> Vec<String> {
        self.channels.iter().map(|c| c.name.clone()).collect()
    }
}

/// A collection of series sharing one channel schema and length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub series: Vec<TimeSeries>,
    pub split: Option<Split>,
    pub channel_schema: Vec<String>,
}

impl Dataset {
    pub fn new(
        series: Vec<TimeSeries>,
        channel_schema: Vec<String>,
        split: Option<Split>,
    ) -> Result<Self> {
        let ds = Dataset {
            series,
            split,
            channel_schema,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channel_schema.is_empty() {
            return Err(Error::Series("dataset has an empty channel schema".into()));
        }
        let mut ids = HashSet::new();
        let mut length = None;
        for s in &self.series {
            s.validate()?;
            let names: Vec<&str> = s.channels.iter().map(|c| c.name.as_str()).collect();
            if names != self.channel_schema.iter().map(String::as_str).collect::<Vec<_>>() {
                return Err(Error::Series(format!(
                    "series {} does not match the channel schema {:?}",
                    s.id, self.channel_schema
                )));
            }
            match length {
                None => length = Some(s.len()),
                Some(t) if t != s.len() => {
                    return Err(Error::Series(format!(
                        "series {} has length {}, dataset length is {t}",
                        s.id,
                        s.len()
                    )))
                }
                _ => {}
            }
            if !ids.insert(s.id) {
                return Err(Error::Series(format!("duplicate series id {}", s.id)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Shared sequence length, if the dataset is non-empty.
    pub fn length(&self) -> Option<usize> {
        self.series.first().map(TimeSeries::len)
    }

    pub fn n_anomalous(&self) -> usize {
        self.series
            .iter()
            .filter(|s| s.label == Some(Label::Anomalous))
            .count()
    }

    pub fn get(&self, id: u64) -> Option<&TimeSeries> {
        self.series.iter().find(|s| s.id == id)
    }
}
