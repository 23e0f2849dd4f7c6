//! Deliberately naive reference implementations used to cross-check the
//! library.

pub fn mean(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for v in x {
        s += v;
    }
    s / x.len() as f64
}

pub fn pvar(x: &[f64]) -> f64 {
    let m = mean(x);
    let mut s = 0.0;
    for v in x {
        s += (v - m) * (v - m);
    }
    s / x.len() as f64
}

pub fn pstd(x: &[f64]) -> f64 {
    pvar(x).sqrt()
}

fn block(x: &[f64], n: usize, b: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for i in b * n..(b + 1) * n {
        out.push(x[i]);
    }
    out
}

pub fn lumpiness(x: &[f64], n: usize) -> f64 {
    let mut vars = Vec::new();
    for b in 0..x.len() / n {
        vars.push(pvar(&block(x, n, b)));
    }
    pvar(&vars)
}

pub fn level_shift(x: &[f64], n: usize) -> f64 {
    let mut best = 0.0;
    for b in 0..x.len() / n - 1 {
        let d = (mean(&block(x, n, b + 1)) - mean(&block(x, n, b))).abs();
        if d > best {
            best = d;
        }
    }
    best
}

fn histogram(b: &[f64], lo: f64, hi: f64, bins: usize, eps: f64) -> Vec<f64> {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0.0; bins];
    for &v in b {
        // Last bin whose left edge is at or below v.
        let mut k = 0;
        if hi > lo {
            for j in 0..bins {
                if v >= lo + j as f64 * width {
                    k = j;
                }
            }
        }
        counts[k] += 1.0;
    }
    let mut p: Vec<f64> = counts.iter().map(|c| c / b.len() as f64 + eps).collect();
    let total: f64 = p.iter().sum();
    for q in &mut p {
        *q /= total;
    }
    p
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        s += p[i] * (p[i].ln() - q[i].ln());
    }
    s
}

/// Pairwise KL between consecutive block histograms.
pub fn kl_divergences(x: &[f64], n: usize, bins: usize, eps: f64) -> Vec<f64> {
    let mut lo = x[0];
    let mut hi = x[0];
    for &v in x {
        if v < lo {
            lo = v;
        }
        if v > hi {
            hi = v;
        }
    }
    let hists: Vec<Vec<f64>> = (0..x.len() / n)
        .map(|b| histogram(&block(x, n, b), lo, hi, bins, eps))
        .collect();
    (0..hists.len() - 1).map(|i| kl(&hists[i], &hists[i + 1])).collect()
}

pub fn kl_max_pairwise(x: &[f64], n: usize, bins: usize, eps: f64) -> f64 {
    let mut best = 0.0;
    for d in kl_divergences(x, n, bins, eps) {
        if d > best {
            best = d;
        }
    }
    best
}

pub fn kl_max_successive(x: &[f64], n: usize, bins: usize, eps: f64) -> f64 {
    let d = kl_divergences(x, n, bins, eps);
    if d.len() == 1 {
        return d[0].max(0.0);
    }
    let mut best = 0.0;
    for i in 0..d.len() - 1 {
        let v = (d[i + 1] - d[i]).abs();
        if v > best {
            best = v;
        }
    }
    best
}

pub fn ratio_beyond(x: &[f64], r: f64) -> f64 {
    let m = mean(x);
    let s = pstd(x);
    if s == 0.0 {
        return 0.0;
    }
    let mut count = 0;
    for v in x {
        if (v - m).abs() > r * s {
            count += 1;
        }
    }
    count as f64 / x.len() as f64
}

#[derive(Debug, PartialEq)]
pub struct Point {
    pub z: f64,
    pub global_max: bool,
    pub global_min: bool,
    pub peak: bool,
    pub valley: bool,
    pub highest_spike: bool,
    pub lowest_valley: bool,
}

fn peak_at(x: &[f64], i: usize) -> bool {
    let left = i == 0 || x[i] > x[i - 1];
    let right = i == x.len() - 1 || x[i] > x[i + 1];
    left && right
}

fn valley_at(x: &[f64], i: usize) -> bool {
    let left = i == 0 || x[i] < x[i - 1];
    let right = i == x.len() - 1 || x[i] < x[i + 1];
    left && right
}

pub fn point(x: &[f64], i: usize) -> Point {
    let m = mean(x);
    let s = pstd(x);
    let z = |v: f64| if s == 0.0 { 0.0 } else { (v - m) / s };
    let mut count_ge = 0;
    let mut count_le = 0;
    for &v in x {
        if v >= x[i] {
            count_ge += 1;
        }
        if v <= x[i] {
            count_le += 1;
        }
    }
    let mut spike = None;
    let mut dip = None;
    for j in 0..x.len() {
        if peak_at(x, j) {
            match spike {
                Some(k) if z(x[k]) >= z(x[j]) => {}
                _ => spike = Some(j),
            }
        }
        if valley_at(x, j) {
            match dip {
                Some(k) if z(x[k]) <= z(x[j]) => {}
                _ => dip = Some(j),
            }
        }
    }
    Point {
        z: z(x[i]),
        global_max: count_ge == 1,
        global_min: count_le == 1,
        peak: peak_at(x, i),
        valley: valley_at(x, i),
        highest_spike: spike == Some(i),
        lowest_valley: dip == Some(i),
    }
}

/// Mexican-hat wavelet sampled at `-half..=half`, shifted to zero mean.
fn wavelet(width: f64, half: usize) -> Vec<f64> {
    let a = 2.0 / ((3.0 * width).sqrt() * std::f64::consts::PI.sqrt().sqrt());
    let mut w = Vec::new();
    let mut total = 0.0;
    for k in 0..2 * half + 1 {
        let t = k as f64 - half as f64;
        let u = t / width;
        let v = a * (1.0 - u * u) * (-u * u / 2.0).exp();
        w.push(v);
        total += v;
    }
    let m = total / w.len() as f64;
    for v in &mut w {
        *v -= m;
    }
    w
}

pub fn num_peaks(x: &[f64], max_width: usize, snr: f64) -> usize {
    let n = x.len();
    let mut constant = true;
    for &v in x {
        if v != x[0] {
            constant = false;
        }
    }
    if constant {
        return 0;
    }
    // rows[w - 1] is the transform at width w, edges padded with the end values.
    let mut rows = Vec::new();
    for width in 1..=max_width {
        let mut half = 5 * width;
        if half > (n - 1) / 2 {
            half = (n - 1) / 2;
        }
        let w = wavelet(width as f64, half);
        let mut row = Vec::new();
        for t in 0..n {
            let mut acc = 0.0;
            for k in 0..w.len() {
                let pos = t as i64 + k as i64 - half as i64;
                let sample = if pos < 0 {
                    x[0]
                } else if pos >= n as i64 {
                    x[n - 1]
                } else {
                    x[pos as usize]
                };
                acc += w[k] * sample;
            }
            row.push(acc);
        }
        rows.push(row);
    }

    // Ridges grow from the widest row towards width 1.
    let mut finished: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut open: Vec<Vec<(usize, usize)>> = Vec::new();
    for r in (0..max_width).rev() {
        let row = &rows[r];
        let mut maxima = Vec::new();
        for t in 1..n - 1 {
            if row[t] > 0.0 && row[t] > row[t - 1] && row[t] > row[t + 1] {
                maxima.push(t);
            }
        }
        let reach = (r + 1 + 3) / 4;
        let mut taken = vec![false; maxima.len()];
        let mut next_open = Vec::new();
        for mut ridge in open {
            let col = ridge[ridge.len() - 1].1;
            let mut pick: Option<usize> = None;
            for (i, &m) in maxima.iter().enumerate() {
                let d = if m > col { m - col } else { col - m };
                if taken[i] || d > reach {
                    continue;
                }
                let better = match pick {
                    None => true,
                    Some(p) => {
                        let pm = maxima[p];
                        let pd = if pm > col { pm - col } else { col - pm };
                        d < pd || (d == pd && m < pm)
                    }
                };
                if better {
                    pick = Some(i);
                }
            }
            if let Some(i) = pick {
                taken[i] = true;
                ridge.push((r, maxima[i]));
                next_open.push(ridge);
            } else {
                finished.push(ridge);
            }
        }
        for (i, &m) in maxima.iter().enumerate() {
            if !taken[i] {
                next_open.push(vec![(r, m)]);
            }
        }
        open = next_open;
    }
    finished.extend(open);

    let mut count = 0;
    for ridge in finished {
        if (ridge.len() as f64) < max_width as f64 / 4.0 {
            continue;
        }
        let mut best = ridge[0];
        for &p in &ridge {
            if rows[p.0][p.1] > rows[best.0][best.1] {
                best = p;
            }
        }
        let row = &rows[best.0];
        let mut mags: Vec<f64> = row.iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let pos = 0.9 * (mags.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let frac = pos - lo as f64;
        let noise = if frac == 0.0 {
            mags[lo]
        } else {
            mags[lo] + (mags[lo + 1] - mags[lo]) * frac
        };
        let ratio = if noise > 0.0 { row[best.1] / noise } else { f64::INFINITY };
        if ratio >= snr {
            count += 1;
        }
    }
    count
}

/// Linear interpolation across masked runs, constant fill at the edges.
pub fn mask(x: &[f64], masked: &[bool]) -> Vec<f64> {
    let n = x.len();
    let mut out = x.to_vec();
    for i in 0..n {
        if !masked[i] {
            continue;
        }
        let mut l = None;
        let mut j = i;
        while j > 0 {
            j -= 1;
            if !masked[j] {
                l = Some(j);
                break;
            }
        }
        let mut r = None;
        for k in i + 1..n {
            if !masked[k] {
                r = Some(k);
                break;
            }
        }
        out[i] = match (l, r) {
            (Some(l), Some(r)) => x[l] + (x[r] - x[l]) * (i - l) as f64 / (r - l) as f64,
            (Some(l), None) => x[l],
            (None, Some(r)) => x[r],
            (None, None) => panic!("fully masked"),
        };
    }
    out
}
