use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Label, Split, TimeSeries};
use crate::error::{Error, Result};

/// Largest-remainder apportionment of `total` items by `weights`.
/// Ties on the fractional part go to the earlier slot.
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Stratified, seeded train/val/test partition.
///
/// Split sizes are the largest-remainder apportionment of the dataset size.
/// Anomalous series are apportioned by split size, so each split's anomaly
/// count is within one series of proportional. Members keep their original
/// relative order.
pub fn split(
    dataset: &Dataset,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    let fr = [fractions.0, fractions.1, fractions.2];
    if fr.iter().any(|f| !(*f > 0.0) || !f.is_finite()) {
        return Err(Error::Split(format!("fractions must be positive, got {fr:?}")));
    }
    if (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Split(format!("fractions must sum to 1, got {fr:?}")));
    }
    let n = dataset.len();
    let sizes = apportion(n, &fr);
    if let Some(i) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::Split(format!(
            "{} split would be empty ({n} series, fractions {fr:?})",
            ["train", "val", "test"][i]
        )));
    }

    let mut anomalous: Vec<usize> = Vec::new();
    let mut normal: Vec<usize> = Vec::new();
    for (i, s) in dataset.series.iter().enumerate() {
        if s.label == Some(Label::Anomalous) {
            anomalous.push(i);
        } else {
            normal.push(i);
        }
    }
    let weights: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    let mut anom_counts = apportion(anomalous.len(), &weights);
    // Apportionment by size keeps each count within ceil(quota) <= size, so
    // this only matters for pathological inputs.
    for (c, &size) in anom_counts.iter_mut().zip(&sizes) {
        *c = (*c).min(size);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    anomalous.shuffle(&mut rng);
    normal.shuffle(&mut rng);

    let mut assignment = vec![0usize; n];
    let (mut a_iter, mut n_iter) = (anomalous.into_iter(), normal.into_iter());
    for (part, (&size, &n_anom)) in sizes.iter().zip(&anom_counts).enumerate() {
        for _ in 0..n_anom {
            assignment[a_iter.next().expect("anomalous member")] = part;
        }
        for _ in n_anom..size {
            let idx = n_iter.next().or_else(|| a_iter.next()).expect("member");
            assignment[idx] = part;
        }
    }

    let mut parts: [Vec<TimeSeries>; 3] = Default::default();
    for (s, &p) in dataset.series.iter().zip(&assignment) {
        parts[p].push(s.clone());
    }
    let [train, val, test] = parts;
    let make = |series, split| Dataset {
        series,
        split: Some(split),
        channel_schema: dataset.channel_schema.clone(),
    };
    Ok((
        make(train, Split::Train),
        make(val, Split::Val),
        make(test, Split::Test),
    ))
}
