//! Explainable anomaly classification for multichannel time series.
//!
//! A small 1-D convolutional network labels fixed-length sequences as normal
//! or anomalous. For anomalous decisions the crate traces input influence
//! through the network, describes the most influential points with
//! statistical features, renders rule-based natural-language explanations
//! and rates each explanation by masking the referenced points and checking
//! whether the decision flips.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod explain;
pub mod features;
pub mod harness;
pub mod influence;
pub mod network;
pub mod pipeline;
pub mod sanity;

pub use error::{CheckpointError, Error, Result};
