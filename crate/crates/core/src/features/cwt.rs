//! Peak counting by continuous wavelet transform with Ricker wavelets.
//!
//! Each row of the transform is the sequence convolved with a Ricker
//! wavelet of width `w` (1..=max_width), edge values replicated past the
//! ends. Strict interior local maxima are linked from the widest row down
//! into ridge lines; a ridge counts as a peak when it spans enough rows and
//! its strongest response clears the row's noise floor.

use crate::error::{Error, Result};

/// Percentile of the absolute row values used as the noise floor.
pub const NOISE_PERCENTILE: f64 = 90.0;

/// Ricker ("Mexican hat") wavelet sampled at integer offsets `-half..=half`,
/// shifted to sum exactly to zero so the transform ignores constant offsets.
pub fn ricker(width: f64, half: usize) -> Vec<f64> {
    let amp = 2.0 / ((3.0 * width).sqrt() * std::f64::consts::PI.powf(0.25));
    let wsq = width * width;
    let mut w: Vec<f64> = (0..=2 * half)
        .map(|i| {
            let t = i as f64 - half as f64;
            let tsq = t * t;
            amp * (1.0 - tsq / wsq) * (-tsq / (2.0 * wsq)).exp()
        })
        .collect();
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    for v in &mut w {
        *v -= mean;
    }
    w
}

/// Transform rows for widths `1..=max_width`.
pub fn cwt(values: &[f64], max_width: usize) -> Vec<Vec<f64>> {
    let n = values.len();
    let last = n as isize - 1;
    (1..=max_width)
        .map(|width| {
            let half = (5 * width).min((n - 1) / 2);
            let wavelet = ricker(width as f64, half);
            (0..n as isize)
                .map(|t| {
                    wavelet
                        .iter()
                        .enumerate()
                        .map(|(k, w)| {
                            let idx = (t + k as isize - half as isize).clamp(0, last);
                            w * values[idx as usize]
                        })
                        .sum()
                })
                .collect()
        })
        .collect()
}

fn local_maxima(row: &[f64]) -> Vec<usize> {
    (1..row.len().saturating_sub(1))
        .filter(|&t| row[t] > 0.0 && row[t] > row[t - 1] && row[t] > row[t + 1])
        .collect()
}

/// Linear-interpolated percentile of `|row|`.
fn abs_percentile(row: &[f64], pct: f64) -> f64 {
    let mut a: Vec<f64> = row.iter().map(|v| v.abs()).collect();
    a.sort_by(f64::total_cmp);
    let pos = pct / 100.0 * (a.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    a[lo] + (a[hi] - a[lo]) * (pos - lo as f64)
}

/// A ridge line: `(row, column)` points from the widest row downwards.
#[derive(Clone, Debug, PartialEq)]
pub struct Ridge {
    pub points: Vec<(usize, usize)>,
}

/// Links local maxima across adjacent rows, widest first. A ridge at
/// column `c` continues to the nearest unclaimed maximum within
/// `ceil(w / 4)` columns in the next narrower row (ties to the lower
/// column) and ends otherwise. Unclaimed maxima start new ridges.
pub fn ridge_lines(rows: &[Vec<f64>]) -> Vec<Ridge> {
    let mut done = Vec::new();
    let mut active: Vec<Ridge> = Vec::new();
    for r in (0..rows.len()).rev() {
        let maxima = local_maxima(&rows[r]);
        let mut claimed = vec![false; maxima.len()];
        let reach = (r + 1).div_ceil(4);
        let mut still = Vec::new();
        for mut ridge in active.drain(..) {
            let col = ridge.points.last().unwrap().1;
            let best = maxima
                .iter()
                .enumerate()
                .filter(|&(i, &m)| !claimed[i] && m.abs_diff(col) <= reach)
                .min_by_key(|&(_, &m)| (m.abs_diff(col), m));
            match best {
                Some((i, &m)) => {
                    claimed[i] = true;
                    ridge.points.push((r, m));
                    still.push(ridge);
                }
                None => done.push(ridge),
            }
        }
        for (i, &m) in maxima.iter().enumerate() {
            if !claimed[i] {
                still.push(Ridge {
                    points: vec![(r, m)],
                });
            }
        }
        active = still;
    }
    done.extend(active);
    done
}

/// Number of peaks found by ridge-line CWT detection.
pub fn num_peaks(values: &[f64], max_width: usize, snr: f64) -> Result<usize> {
    if values.len() < 4 {
        return Err(Error::Feature(format!(
            "peak detection needs at least 4 points, got {}",
            values.len()
        )));
    }
    if max_width == 0 || !(snr > 0.0) {
        return Err(Error::Feature("max_width and snr must be positive".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Feature("non-finite value".into()));
    }
    if values.iter().all(|&v| v == values[0]) {
        return Ok(0);
    }
    let rows = cwt(values, max_width);
    let min_len = max_width as f64 / 4.0;
    let count = ridge_lines(&rows)
        .into_iter()
        .filter(|ridge| {
            if (ridge.points.len() as f64) < min_len {
                return false;
            }
            let &(r, c) = ridge
                .points
                .iter()
                .max_by(|a, b| rows[a.0][a.1].total_cmp(&rows[b.0][b.1]))
                .expect("non-empty ridge");
            let noise = abs_percentile(&rows[r], NOISE_PERCENTILE);
            let ratio = if noise > 0.0 {
                rows[r][c] / noise
            } else {
                f64::INFINITY
            };
            ratio >= snr
        })
        .count();
    Ok(count)
}
