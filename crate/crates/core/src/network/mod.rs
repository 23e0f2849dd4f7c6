//! One-dimensional convolutional binary classifier with exact reverse-mode
//! gradients, trained from scratch.
//!
//! Layout: `conv(filters, kernel) -> leaky ReLU` repeated, valid padding and
//! stride 1, then one dense unit over the flattened final feature map and a
//! sigmoid. All tensors are row-major `f64`.

mod checkpoint;
mod train;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Label, TimeSeries};
use crate::error::{Error, Result};

pub use checkpoint::{load, save, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use train::{loss, train, TrainConfig};

/// Per-channel, per-feature decision thresholds stored alongside a model.
pub type FeatureThresholds = BTreeMap<String, BTreeMap<String, f64>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub input_channels: usize,
    pub input_length: usize,
    pub conv_layers: Vec<ConvSpec>,
    pub leaky_slope: f64,
}

impl Architecture {
    /// Three conv layers of 16, 32 and 64 filters, kernel 5, slope 0.01.
    pub fn default_for(input_channels: usize, input_length: usize) -> Self {
        Architecture {
            input_channels,
            input_length,
            conv_layers: [16, 32, 64]
                .into_iter()
                .map(|filters| ConvSpec { filters, kernel: 5 })
                .collect(),
            leaky_slope: 0.01,
        }
    }

    /// A network with no conv layers: `sigmoid(w · x + b)`.
    pub fn dense_only(input_channels: usize, input_length: usize) -> Self {
        Architecture {
            input_channels,
            input_length,
            conv_layers: Vec::new(),
            leaky_slope: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_channels == 0 || self.input_length == 0 {
            return Err(Error::Shape("input shape must be non-empty".into()));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::Shape(format!(
                "leaky slope {} outside (0, 1)",
                self.leaky_slope
            )));
        }
        let mut len = self.input_length;
        for (l, c) in self.conv_layers.iter().enumerate() {
            if c.filters == 0 || c.kernel == 0 {
                return Err(Error::Shape(format!("conv layer {l} has zero filters or kernel")));
            }
            if c.kernel > len {
                return Err(Error::Shape(format!(
                    "conv layer {l}: kernel {} exceeds input length {len}",
                    c.kernel
                )));
            }
            len = len - c.kernel + 1;
        }
        Ok(())
    }

    /// Sequence length entering each conv layer, plus the final length.
    pub fn lengths(&self) -> Vec<usize> {
        let mut out = vec![self.input_length];
        for c in &self.conv_layers {
            out.push(out.last().unwrap() + 1 - c.kernel);
        }
        out
    }

    /// Channel count entering each conv layer, plus the final count.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_channels)
            .chain(self.conv_layers.iter().map(|c| c.filters))
            .collect()
    }

    pub fn dense_inputs(&self) -> usize {
        self.widths().last().unwrap() * self.lengths().last().unwrap()
    }

    /// Tensor names and shapes in serialization order.
    pub fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let widths = self.widths();
        let mut out = Vec::new();
        for (l, c) in self.conv_layers.iter().enumerate() {
            out.push((format!("conv{l}.weight"), vec![c.filters, widths[l], c.kernel]));
            out.push((format!("conv{l}.bias"), vec![c.filters]));
        }
        let (f, len) = (*widths.last().unwrap(), *self.lengths().last().unwrap());
        out.push(("dense.weight".into(), vec![f, len]));
        out.push(("dense.bias".into(), vec![1]));
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensor_shapes()
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// `[out][in][kernel]`
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Every trainable tensor. Also used to hold gradients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub conv: Vec<ConvLayer>,
    /// `[filters][length]` of the last feature map.
    pub dense_weight: Vec<f64>,
    /// Single element.
    pub dense_bias: Vec<f64>,
}

impl Params {
    pub fn zeros(arch: &Architecture) -> Self {
        let widths = arch.widths();
        let conv = arch
            .conv_layers
            .iter()
            .enumerate()
            .map(|(l, c)| ConvLayer {
                in_channels: widths[l],
                out_channels: c.filters,
                kernel: c.kernel,
                weight: vec![0.0; c.filters * widths[l] * c.kernel],
                bias: vec![0.0; c.filters],
            })
            .collect();
        Params {
            conv,
            dense_weight: vec![0.0; arch.dense_inputs()],
            dense_bias: vec![0.0],
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(2 * self.conv.len() + 2);
        for c in &self.conv {
            out.push(&c.weight);
            out.push(&c.bias);
        }
        out.push(&self.dense_weight);
        out.push(&self.dense_bias);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(2 * self.conv.len() + 2);
        for c in &mut self.conv {
            out.push(&mut c.weight);
            out.push(&mut c.bias);
        }
        out.push(&mut self.dense_weight);
        out.push(&mut self.dense_bias);
        out
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.tensors().into_iter().flat_map(|t| t.iter().copied())
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &Params, scale: f64) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    fn fill(&mut self, v: f64) {
        for t in self.tensors_mut() {
            t.fill(v);
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs_trained: usize,
    /// Epoch (1-based) whose parameters were kept; 0 when untrained.
    pub best_epoch: usize,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub architecture: Architecture,
    pub params: Params,
    pub training_meta: TrainingMeta,
    /// Channel names the model was trained on; empty when unknown.
    #[serde(default)]
    pub channel_schema: Vec<String>,
    /// Explanation thresholds learned from the normal training series.
    #[serde(default)]
    pub thresholds: FeatureThresholds,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probability: f64,
    pub logit: f64,
    pub label: Label,
}

impl Prediction {
    pub fn from_logit(logit: f64) -> Self {
        let probability = sigmoid(logit);
        // p = 0.5 counts as anomalous.
        let label = if probability >= 0.5 {
            Label::Anomalous
        } else {
            Label::Normal
        };
        Prediction {
            probability,
            logit,
            label,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Activations recorded during a forward pass.
pub(crate) struct Trace {
    /// Input to each conv layer and, last, the dense input. `[channels][len]`.
    activations: Vec<Vec<f64>>,
    /// Pre-activation output of each conv layer.
    pre: Vec<Vec<f64>>,
    logit: f64,
}

impl Network {
    /// Uniform `±sqrt(6 / fan_in)` weights, zero biases.
    pub fn init(architecture: Architecture, seed: u64) -> Result<Self> {
        architecture.validate()?;
        let mut params = Params::zeros(&architecture);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for c in &mut params.conv {
            let bound = (6.0 / (c.in_channels * c.kernel) as f64).sqrt();
            for w in &mut c.weight {
                *w = rng.random_range(-bound..bound);
            }
        }
        let bound = (6.0 / architecture.dense_inputs() as f64).sqrt();
        for w in &mut params.dense_weight {
            *w = rng.random_range(-bound..bound);
        }
        Ok(Network {
            architecture,
            params,
            training_meta: TrainingMeta::default(),
            channel_schema: Vec::new(),
            thresholds: FeatureThresholds::new(),
        })
    }

    /// A network whose parameters are all zero (outputs p = 0.5 everywhere).
    pub fn zeros(architecture: Architecture) -> Result<Self> {
        architecture.validate()?;
        let mut net = Network::init(architecture, 0)?;
        net.params.fill(0.0);
        Ok(net)
    }

    pub fn param_count(&self) -> usize {
        self.params.values().count()
    }

    /// Flattens a series to `[channels][len]`, checking its shape.
    pub fn input_of(&self, series: &TimeSeries) -> Result<Vec<f64>> {
        let arch = &self.architecture;
        if series.n_channels() != arch.input_channels || series.len() != arch.input_length {
            return Err(Error::Shape(format!(
                "series {} is {}x{}, network expects {}x{}",
                series.id,
                series.n_channels(),
                series.len(),
                arch.input_channels,
                arch.input_length
            )));
        }
        if !self.channel_schema.is_empty() {
            let names = series.channel_names();
            if names != self.channel_schema {
                return Err(Error::Shape(format!(
                    "series {} channels {names:?} differ from model channels {:?}",
                    series.id, self.channel_schema
                )));
            }
        }
        Ok(series
            .channels
            .iter()
            .flat_map(|c| c.values.iter().copied())
            .collect())
    }

    pub fn forward(&self, series: &TimeSeries) -> Result<Prediction> {
        let x = self.input_of(series)?;
        Ok(Prediction::from_logit(self.trace(x).logit))
    }

    /// Forward pass over a flattened `[channels][len]` input.
    pub fn forward_flat(&self, input: &[f64]) -> Prediction {
        assert_eq!(
            input.len(),
            self.architecture.input_channels * self.architecture.input_length
        );
        Prediction::from_logit(self.trace(input.to_vec()).logit)
    }

    pub(crate) fn trace(&self, input: Vec<f64>) -> Trace {
        let arch = &self.architecture;
        let lengths = arch.lengths();
        let alpha = arch.leaky_slope;
        let mut activations = vec![input];
        let mut pre = Vec::with_capacity(self.params.conv.len());
        for (l, layer) in self.params.conv.iter().enumerate() {
            let y = conv_forward(layer, activations.last().unwrap(), lengths[l]);
            let act = y.iter().map(|&v| if v >= 0.0 { v } else { alpha * v }).collect();
            pre.push(y);
            activations.push(act);
        }
        let feat = activations.last().unwrap();
        let logit = self.params.dense_bias[0]
            + self
                .params
                .dense_weight
                .iter()
                .zip(feat)
                .map(|(w, h)| w * h)
                .sum::<f64>();
        Trace {
            activations,
            pre,
            logit,
        }
    }

    /// Back-propagates `d_logit` through a recorded trace. Accumulates
    /// parameter gradients into `grads` when given and returns the input
    /// gradient when `want_input` is set.
    pub(crate) fn backward(
        &self,
        trace: &Trace,
        d_logit: f64,
        mut grads: Option<&mut Params>,
        want_input: bool,
    ) -> Option<Vec<f64>> {
        let arch = &self.architecture;
        let lengths = arch.lengths();
        let alpha = arch.leaky_slope;
        let n_conv = self.params.conv.len();

        let feat = &trace.activations[n_conv];
        if let Some(g) = grads.as_deref_mut() {
            g.dense_bias[0] += d_logit;
            for (gw, h) in g.dense_weight.iter_mut().zip(feat) {
                *gw += d_logit * h;
            }
        }
        let mut upstream: Vec<f64> = self.params.dense_weight.iter().map(|w| w * d_logit).collect();

        for l in (0..n_conv).rev() {
            let layer = &self.params.conv[l];
            for (u, &z) in upstream.iter_mut().zip(&trace.pre[l]) {
                if z < 0.0 {
                    *u *= alpha;
                }
            }
            let need_dx = l > 0 || want_input;
            let dx = conv_backward(
                layer,
                &trace.activations[l],
                lengths[l],
                &upstream,
                grads.as_deref_mut().map(|g| &mut g.conv[l]),
                need_dx,
            );
            upstream = dx?;
        }
        want_input.then_some(upstream)
    }

    /// Which hidden units are on the identity side of the leaky ReLU
    /// (`pre-activation >= 0`), all conv layers concatenated. Two inputs
    /// with the same pattern lie in the same linear region of the conv stack.
    pub fn activation_pattern(&self, series: &TimeSeries) -> Result<Vec<bool>> {
        let trace = self.trace(self.input_of(series)?);
        Ok(trace.pre.iter().flatten().map(|&v| v >= 0.0).collect())
    }

    /// Exact `∂p/∂x` for every channel and timestep, signed.
    pub fn grad_input(&self, series: &TimeSeries) -> Result<Vec<Vec<f64>>> {
        let x = self.input_of(series)?;
        let trace = self.trace(x);
        let p = sigmoid(trace.logit);
        let flat = self
            .backward(&trace, p * (1.0 - p), None, true)
            .expect("input gradient requested");
        Ok(flat
            .chunks(self.architecture.input_length)
            .map(<[f64]>::to_vec)
            .collect())
    }
}

fn conv_forward(layer: &ConvLayer, x: &[f64], len_in: usize) -> Vec<f64> {
    let k = layer.kernel;
    let len_out = len_in + 1 - k;
    let mut y = vec![0.0; layer.out_channels * len_out];
    for (o, dst) in y.chunks_mut(len_out).enumerate() {
        dst.fill(layer.bias[o]);
        for i in 0..layer.in_channels {
            let src = &x[i * len_in..(i + 1) * len_in];
            let w = &layer.weight[(o * layer.in_channels + i) * k..][..k];
            for (j, &wj) in w.iter().enumerate() {
                for (d, s) in dst.iter_mut().zip(&src[j..j + len_out]) {
                    *d += wj * s;
                }
            }
        }
    }
    y
}

fn conv_backward(
    layer: &ConvLayer,
    x: &[f64],
    len_in: usize,
    dy: &[f64],
    grads: Option<&mut ConvLayer>,
    need_dx: bool,
) -> Option<Vec<f64>> {
    let k = layer.kernel;
    let len_out = len_in + 1 - k;
    if let Some(g) = grads {
        for (o, dyo) in dy.chunks(len_out).enumerate() {
            g.bias[o] += dyo.iter().sum::<f64>();
            for i in 0..layer.in_channels {
                let src = &x[i * len_in..(i + 1) * len_in];
                let gw = &mut g.weight[(o * layer.in_channels + i) * k..][..k];
                for (j, gwj) in gw.iter_mut().enumerate() {
                    *gwj += dyo
                        .iter()
                        .zip(&src[j..j + len_out])
                        .map(|(a, b)| a * b)
                        .sum::<f64>();
                }
            }
        }
    }
    if !need_dx {
        return None;
    }
    let mut dx = vec![0.0; layer.in_channels * len_in];
    for (o, dyo) in dy.chunks(len_out).enumerate() {
        for i in 0..layer.in_channels {
            let dst = &mut dx[i * len_in..(i + 1) * len_in];
            let w = &layer.weight[(o * layer.in_channels + i) * k..][..k];
            for (j, &wj) in w.iter().enumerate() {
                for (d, g) in dst[j..j + len_out].iter_mut().zip(dyo) {
                    *d += wj * g;
                }
            }
        }
    }
    Some(dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Channel;

    fn series(channels: Vec<Vec<f64>>) -> TimeSeries {
        let chans = channels
            .into_iter()
            .enumerate()
            .map(|(i, v)| Channel::new(format!("c{i}"), v))
            .collect();
        TimeSeries::new(0, chans, None).unwrap()
    }

    #[test]
    fn default_param_count_matches_closed_form() {
        // conv: f_out * f_in * k + f_out; dense: 64 * 38 + 1.
        let expected = (16 * 3 * 5 + 16) + (32 * 16 * 5 + 32) + (64 * 32 * 5 + 64) + (64 * 38 + 1);
        assert_eq!(expected, 15585);
        let arch = Architecture::default_for(3, 50);
        assert_eq!(arch.lengths(), vec![50, 46, 42, 38]);
        assert_eq!(arch.param_count(), expected);
        assert_eq!(Network::init(arch, 1).unwrap().param_count(), expected);
    }

    #[test]
    fn init_is_seeded() {
        let arch = Architecture::default_for(3, 50);
        let a = Network::init(arch.clone(), 9).unwrap();
        let b = Network::init(arch.clone(), 9).unwrap();
        let c = Network::init(arch, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.params, c.params);
        let bound = (6.0f64 / 15.0).sqrt();
        assert!(a.params.conv[0].weight.iter().all(|w| w.abs() < bound));
        assert!(a.params.conv[0].bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn kernel_longer_than_input_is_rejected() {
        let mut arch = Architecture::default_for(3, 50);
        arch.conv_layers[0].kernel = 51;
        assert!(matches!(Network::init(arch, 0), Err(Error::Shape(_))));
        // 50 -> 46 -> 42 leaves 42 < 43.
        let mut arch = Architecture::default_for(3, 50);
        arch.conv_layers[2].kernel = 43;
        assert!(Network::init(arch, 0).is_err());
    }

    #[test]
    fn zero_network_is_half() {
        let net = Network::zeros(Architecture::default_for(2, 20)).unwrap();
        let s = series(vec![vec![3.0; 20], (0..20).map(f64::from).collect()]);
        let p = net.forward(&s).unwrap();
        assert_eq!(p.probability, 0.5);
        assert_eq!(p.label, Label::Anomalous);
        let g = net.grad_input(&s).unwrap();
        assert!(g.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn tiny_network_by_hand() {
        // One conv layer, one filter, kernel 1: h = leaky(w x + b).
        let arch = Architecture {
            input_channels: 1,
            input_length: 3,
            conv_layers: vec![ConvSpec { filters: 1, kernel: 1 }],
            leaky_slope: 0.1,
        };
        let mut net = Network::zeros(arch).unwrap();
        net.params.conv[0].weight = vec![-0.5];
        net.params.conv[0].bias = vec![0.75];
        net.params.dense_weight = vec![1.0, -2.0, 0.5];
        net.params.dense_bias = vec![0.25];
        // pre = [0.25, -0.25, -0.75] -> h = [0.25, -0.025, -0.075]
        // z = 0.25 + 0.25 + 0.05 - 0.0375 = 0.5125
        let p = net.forward(&series(vec![vec![1.0, 2.0, 3.0]])).unwrap();
        assert!((p.logit - 0.5125).abs() < 1e-15);
        assert!((p.probability - 1.0 / (1.0 + (-0.5125f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn dense_only_gradient_is_quarter() {
        let mut net = Network::zeros(Architecture::dense_only(1, 2)).unwrap();
        net.params.dense_weight = vec![1.0, 0.0];
        let g = net.grad_input(&series(vec![vec![0.0, 0.0]])).unwrap();
        assert_eq!(g, vec![vec![0.25, 0.0]]);
    }

    #[test]
    fn shape_mismatch() {
        let net = Network::zeros(Architecture::default_for(3, 50)).unwrap();
        let s = series(vec![vec![0.0; 49]; 3]);
        assert!(matches!(net.forward(&s), Err(Error::Shape(_))));
        assert!(matches!(net.grad_input(&s), Err(Error::Shape(_))));
    }

    #[test]
    fn sigmoid_is_monotone_in_dense_bias() {
        let mut net = Network::init(Architecture::default_for(1, 16), 4).unwrap();
        let s = series(vec![(0..16).map(|t| (t as f64).sin()).collect()]);
        let mut last = net.forward(&s).unwrap().probability;
        for _ in 0..20 {
            net.params.dense_bias[0] += 0.1;
            let p = net.forward(&s).unwrap();
            assert!(p.probability > last);
            assert!((p.probability - sigmoid(p.logit)).abs() < 1e-12);
            last = p.probability;
        }
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        let net = Network::init(Architecture::default_for(2, 16), 5).unwrap();
        let s = series(vec![
            (0..16).map(|t| (t as f64 * 0.7).sin()).collect(),
            (0..16).map(|t| (t as f64 * 0.3).cos()).collect(),
        ]);
        let x = net.input_of(&s).unwrap();
        let trace = net.trace(x.clone());
        let mut grads = Params::zeros(&net.architecture);
        net.backward(&trace, 1.0, Some(&mut grads), false);

        let h = 1e-5;
        let analytic: Vec<f64> = grads.values().collect();
        let mut probe = net.clone();
        let mut idx = 0;
        for t in 0..probe.params.tensors().len() {
            let n = probe.params.tensors()[t].len();
            for j in (0..n).step_by(7) {
                let orig = probe.params.tensors()[t][j];
                probe.params.tensors_mut()[t][j] = orig + h;
                let up = probe.trace(x.clone()).logit;
                probe.params.tensors_mut()[t][j] = orig - h;
                let down = probe.trace(x.clone()).logit;
                probe.params.tensors_mut()[t][j] = orig;
                let fd = (up - down) / (2.0 * h);
                let a = analytic[idx + j];
                assert!((fd - a).abs() < 1e-6 * (1.0 + fd.abs()), "tensor {t}[{j}]: {a} vs {fd}");
            }
            idx += n;
        }
    }
}
