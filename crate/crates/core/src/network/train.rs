use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sigmoid, Network, Params};
use crate::dataset::{Dataset, Label, TimeSeries};
use crate::error::{Error, Result};

/// Probabilities are clipped to this margin inside the cross-entropy.
const CLIP: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Weight of the squared pre-sigmoid activation penalty.
    pub lambda: f64,
    /// Weight of the cross-entropy term.
    pub beta: f64,
    pub seed: u64,
    pub early_stop_patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-2,
            epochs: 30,
            batch_size: 1,
            lambda: 1e-3,
            beta: 1.0,
            seed: 1,
            early_stop_patience: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config("lr", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("lambda", "must be non-negative"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::config("beta", "must be positive"));
        }
        if self.early_stop_patience == 0 {
            return Err(Error::config("early_stop_patience", "must be positive"));
        }
        Ok(())
    }
}

fn target(series: &TimeSeries) -> Result<f64> {
    match series.label {
        Some(Label::Anomalous) => Ok(1.0),
        Some(Label::Normal) => Ok(0.0),
        None => Err(Error::Series(format!("series {} has no label", series.id))),
    }
}

fn bce(p: f64, y: f64) -> f64 {
    let p = p.clamp(CLIP, 1.0 - CLIP);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// `beta · mean BCE(p, y) + lambda · mean(z²)` over the batch.
pub fn loss(network: &Network, batch: &[TimeSeries], lambda: f64, beta: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Series("loss over an empty batch".into()));
    }
    let mut total = 0.0;
    for s in batch {
        let y = target(s)?;
        let z = network.forward(s)?.logit;
        total += beta * bce(sigmoid(z), y) + lambda * z * z;
    }
    Ok(total / batch.len() as f64)
}

/// Loss and its parameter gradient over a batch of (input, target) pairs.
fn loss_and_grad(
    network: &Network,
    batch: &[(&[f64], f64)],
    lambda: f64,
    beta: f64,
    grads: &mut Params,
) -> f64 {
    for t in grads.tensors_mut() {
        t.fill(0.0);
    }
    let n = batch.len() as f64;
    let mut total = 0.0;
    for &(x, y) in batch {
        let trace = network.trace(x.to_vec());
        let z = trace.logit;
        let p = sigmoid(z);
        total += beta * bce(p, y) + lambda * z * z;
        // d/dz of the unclipped cross-entropy is p - y.
        let dz = (beta * (p - y) + 2.0 * lambda * z) / n;
        network.backward(&trace, dz, Some(grads), false);
    }
    total / n
}

fn dataset_loss(network: &Network, data: &[(Vec<f64>, f64)], lambda: f64, beta: f64) -> f64 {
    let total: f64 = data
        .iter()
        .map(|(x, y)| {
            let z = network.trace(x.clone()).logit;
            beta * bce(sigmoid(z), *y) + lambda * z * z
        })
        .sum();
    total / data.len() as f64
}

/// Mini-batch SGD with a fixed learning rate. Returns the parameters with
/// the lowest validation loss; stops after `early_stop_patience` epochs
/// without improvement.
pub fn train(
    network: &Network,
    train_set: &Dataset,
    val_set: &Dataset,
    config: &TrainConfig,
) -> Result<Network> {
    config.validate()?;
    let encode = |ds: &Dataset| -> Result<Vec<(Vec<f64>, f64)>> {
        ds.series
            .iter()
            .map(|s| Ok((network.input_of(s)?, target(s)?)))
            .collect()
    };
    let train_data = encode(train_set)?;
    let val_data = encode(val_set)?;
    if config.epochs == 0 {
        return Ok(network.clone());
    }
    if train_data.is_empty() || val_data.is_empty() {
        return Err(Error::Series("training and validation sets must be non-empty".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut current = network.clone();
    let mut best = network.clone();
    let mut best_val = f64::INFINITY;
    let mut since_best = 0;
    let mut grads = Params::zeros(&network.architecture);
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let mut meta = network.training_meta.clone();
    let start_epoch = meta.epochs_trained;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&[f64], f64)> = chunk
                .iter()
                .map(|&i| (train_data[i].0.as_slice(), train_data[i].1))
                .collect();
            let l = loss_and_grad(&current, &batch, config.lambda, config.beta, &mut grads);
            if !l.is_finite() {
                return Err(Error::Training {
                    epoch,
                    reason: format!("batch loss is {l}"),
                });
            }
            epoch_loss += l * batch.len() as f64;
            current.params.add_scaled(&grads, -config.lr);
        }
        let train_loss = epoch_loss / train_data.len() as f64;
        let val_loss = dataset_loss(&current, &val_data, config.lambda, config.beta);
        if !val_loss.is_finite() || current.params.values().any(|v| !v.is_finite()) {
            return Err(Error::Training {
                epoch,
                reason: format!("validation loss is {val_loss}"),
            });
        }
        log::debug!("epoch {epoch}: train loss {train_loss:.6}, val loss {val_loss:.6}");
        meta.epochs_trained = start_epoch + epoch;
        meta.train_loss.push(train_loss);
        meta.val_loss.push(val_loss);
        if val_loss < best_val {
            best_val = val_loss;
            best.params = current.params.clone();
            meta.best_epoch = start_epoch + epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.early_stop_patience {
                break;
            }
        }
    }
    best.training_meta = meta;
    Ok(best)
}
