//! Batch evaluation: classification metrics and the masking flip-rate
//! protocol over correctly classified anomalous series.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};
use crate::network::{Network, Prediction};
use crate::pipeline::{salient_points, ExplainConfig};
use crate::sanity::{self, MaskSpec};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Metrics on the anomalous class. Undefined ratios (zero denominators)
/// are reported as 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: Confusion,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    pub fn from_confusion(c: Confusion) -> Self {
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics {
            accuracy: ratio(c.tp + c.tn, c.total()),
            precision,
            recall,
            f1,
            confusion: c,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub metrics: Metrics,
    /// `(series id, prediction)` in dataset order.
    pub predictions: Vec<(u64, Prediction)>,
}

fn truth(s: &crate::dataset::TimeSeries) -> Result<Label> {
    s.label
        .ok_or_else(|| Error::Label { row: s.id as usize, value: "missing label".into() })
}

pub fn classify_all(network: &Network, dataset: &Dataset) -> Result<Classification> {
    let predictions: Vec<(u64, Prediction)> = dataset
        .series
        .par_iter()
        .map(|s| Ok((s.id, network.forward(s)?)))
        .collect::<Result<_>>()?;
    let mut c = Confusion::default();
    for (s, (_, p)) in dataset.series.iter().zip(&predictions) {
        match (truth(s)?, p.label) {
            (Label::Anomalous, Label::Anomalous) => c.tp += 1,
            (Label::Normal, Label::Anomalous) => c.fp += 1,
            (Label::Normal, Label::Normal) => c.tn += 1,
            (Label::Anomalous, Label::Normal) => c.fn_ += 1,
        }
    }
    Ok(Classification {
        metrics: Metrics::from_confusion(c),
        predictions,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlipReport {
    pub window: usize,
    pub n_anomalous_correct: usize,
    pub n_flipped: usize,
    pub percent_flipped: f64,
    /// Set when no series was eligible; `percent_flipped` is then 0.
    pub empty: bool,
}

/// Masks the salient points of every correctly classified anomalous series
/// with the given window and counts label flips.
pub fn flip_rate(
    network: &Network,
    dataset: &Dataset,
    window: usize,
    config: &ExplainConfig,
) -> Result<FlipReport> {
    let config = ExplainConfig { window, ..config.clone() };
    config.validate()?;
    let outcomes: Vec<Option<bool>> = dataset
        .series
        .par_iter()
        .map(|s| {
            if truth(s)? != Label::Anomalous {
                return Ok(None);
            }
            if !network.forward(s)?.label.is_anomalous() {
                return Ok(None);
            }
            let salient = salient_points(network, s, &config)?;
            let r = sanity::check(network, s, &MaskSpec::from_salient(&salient, window))?;
            Ok(Some(r.flipped))
        })
        .collect::<Result<_>>()?;
    let n_anomalous_correct = outcomes.iter().flatten().count();
    let n_flipped = outcomes.iter().flatten().filter(|&&f| f).count();
    Ok(FlipReport {
        window,
        n_anomalous_correct,
        n_flipped,
        percent_flipped: 100.0 * ratio(n_flipped, n_anomalous_correct),
        empty: n_anomalous_correct == 0,
    })
}

/// Plain-text table with one row per window.
pub fn flip_table(reports: &[FlipReport]) -> String {
    let header = [
        "Window size",
        "Anomalous sequence",
        "Flipped prediction after masking",
        "Percentage flipped",
    ];
    let rows: Vec<[String; 4]> = reports
        .iter()
        .map(|r| {
            [
                r.window.to_string(),
                r.n_anomalous_correct.to_string(),
                r.n_flipped.to_string(),
                if r.empty {
                    "n/a".to_string()
                } else {
                    format!("{:.1}%", r.percent_flipped)
                },
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..4)
        .map(|i| rows.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: [&str; 4]| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                s.push_str(" | ");
            }
            s.push_str(&format!("{c:<w$}", w = widths[i]));
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    out.push_str(
        &widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-|-"),
    );
    out.push('\n');
    for r in &rows {
        out.push_str(&line([&r[0], &r[1], &r[2], &r[3]]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, GenConfig};
    use crate::network::Architecture;

    fn small() -> Dataset {
        generate_synthetic(&GenConfig {
            n_series: 40,
            anomaly_fraction: 0.25,
            ..GenConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn zero_network_labels_everything_anomalous() {
        let ds = small();
        let net = Network::zeros(Architecture::default_for(3, 50)).unwrap();
        let c = classify_all(&net, &ds).unwrap();
        assert_eq!(c.metrics.recall, 1.0);
        assert_eq!(c.metrics.precision, ds.n_anomalous() as f64 / ds.len() as f64);
        let k = c.metrics.confusion;
        assert_eq!(c.metrics.accuracy, (k.tp + k.tn) as f64 / ds.len() as f64);
        assert_eq!(k.total(), ds.len());
    }

    #[test]
    fn no_anomalous_series_gives_flagged_report() {
        let mut ds = small();
        ds.series.retain(|s| s.label == Some(Label::Normal));
        let net = Network::init(Architecture::default_for(3, 50), 1).unwrap();
        let r = flip_rate(&net, &ds, 1, &ExplainConfig::default()).unwrap();
        assert!(r.empty);
        assert_eq!((r.n_anomalous_correct, r.n_flipped, r.percent_flipped), (0, 0, 0.0));
    }

    #[test]
    fn flip_rate_is_deterministic() {
        let ds = small();
        let net = Network::zeros(Architecture::default_for(3, 50)).unwrap();
        // The zero network is constant, so nothing can flip.
        let a = flip_rate(&net, &ds, 3, &ExplainConfig::default()).unwrap();
        assert_eq!(a.n_anomalous_correct, ds.n_anomalous());
        assert_eq!(a.n_flipped, 0);
        let net = Network::init(Architecture::default_for(3, 50), 4).unwrap();
        let a = flip_rate(&net, &ds, 1, &ExplainConfig::default()).unwrap();
        let b = flip_rate(&net, &ds, 1, &ExplainConfig::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.n_flipped <= a.n_anomalous_correct);
    }

    #[test]
    fn table_layout() {
        let t = flip_table(&[
            FlipReport { window: 1, n_anomalous_correct: 1511, n_flipped: 1104, percent_flipped: 73.06, empty: false },
            FlipReport { window: 3, n_anomalous_correct: 0, n_flipped: 0, percent_flipped: 0.0, empty: true },
        ]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(
            lines[0],
            "Window size | Anomalous sequence | Flipped prediction after masking | Percentage flipped"
        );
        assert!(lines[2].starts_with("1           | 1511"));
        assert!(lines[2].ends_with("73.1%"));
        assert!(lines[3].ends_with("n/a"));
    }

    #[test]
    fn metric_identities() {
        let m = Metrics::from_confusion(Confusion { tp: 3, fp: 1, tn: 5, fn_: 1 });
        assert_eq!(m.accuracy, 0.8);
        assert_eq!(m.precision, 0.75);
        assert_eq!(m.recall, 0.75);
        assert!((m.f1 - 0.75).abs() < 1e-15);
    }
}
