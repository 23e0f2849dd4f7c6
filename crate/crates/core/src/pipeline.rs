//! End-to-end wiring: classify, and for anomalous decisions trace
//! influence, describe the salient points, mask them and explain.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, TimeSeries};
use crate::error::{Error, Result};
use crate::explain::{self, Explanation, Level, RuleBase};
use crate::features::{feature_report, FeatureConfig};
use crate::influence::{self, SalientPoint, SalientPolicy, ScalingMode};
use crate::network::{Network, TrainConfig};
use crate::sanity::{self, MaskSpec};

/// Everything the explanation path needs besides the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub features: FeatureConfig,
    pub salient: SalientPolicy,
    pub scaling: ScalingMode,
    pub window: usize,
    pub level: Level,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            features: FeatureConfig::default(),
            salient: SalientPolicy::default(),
            scaling: ScalingMode::default(),
            window: 1,
            level: Level::Expert,
        }
    }
}

impl ExplainConfig {
    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        self.salient.validate()?;
        if self.window == 0 || self.window.is_multiple_of(2) {
            return Err(Error::config("window", "must be a positive odd number"));
        }
        Ok(())
    }
}

/// Trains from `initial` and stores the explanation thresholds learned from
/// the normal series of `train_set`.
pub fn fit(
    initial: &Network,
    train_set: &Dataset,
    val_set: &Dataset,
    train_config: &TrainConfig,
    feature_config: &FeatureConfig,
) -> Result<Network> {
    let mut net = crate::network::train(initial, train_set, val_set, train_config)?;
    net.thresholds = explain::learn_thresholds(train_set, feature_config)?;
    Ok(net)
}

/// Salient points of `series` under the configured scaling and policy.
pub fn salient_points(
    network: &Network,
    series: &TimeSeries,
    config: &ExplainConfig,
) -> Result<Vec<SalientPoint>> {
    let map = influence::trace(network, series, config.scaling)?;
    influence::top_salient(&map, series, &config.salient)
}

/// Runs the full explanation path for one series. Normal predictions
/// return an inactive explanation without any further work.
pub fn explain_series(
    network: &Network,
    series: &TimeSeries,
    config: &ExplainConfig,
    rules: &RuleBase,
) -> Result<Explanation> {
    config.validate()?;
    let prediction = network.forward(series)?;
    if !prediction.label.is_anomalous() {
        return Ok(Explanation::inactive(prediction, config.level));
    }
    let salient = salient_points(network, series, config)?;
    let report = feature_report(series, &salient, &config.features)?;
    let sanity = sanity::check(network, series, &MaskSpec::from_salient(&salient, config.window))?;
    explain::generate(
        &prediction,
        &salient,
        &report,
        &sanity,
        config.level,
        rules,
        &network.thresholds,
    )
}
