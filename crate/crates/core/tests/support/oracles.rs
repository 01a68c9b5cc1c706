//! Independent reference implementations used by the oracle and acceptance
//! tests. They favour directness over speed.
#![allow(dead_code)]

use smilescope_core::smile::ExtractionParams;

/// `(start_frame, end_frame, peak, mean)` per segment, found by marking
/// frames, filling short gaps in the mask, then scanning maximal runs.
pub fn brute_extract(au12: &[f64], p: &ExtractionParams, fps: f64) -> Vec<(usize, usize, f64, f64)> {
    let n = au12.len();
    let sd = p.sigma * fps;
    // frames beyond 4 sd carry no weight, so only scan a slightly wider window
    let reach = (4.0 * sd).ceil() as usize + 1;
    let smoothed: Vec<f64> = (0..n)
        .map(|i| {
            let mut acc = 0.0;
            let mut wsum = 0.0;
            for j in i.saturating_sub(reach)..(i + reach + 1).min(n) {
                let v = au12[j];
                let d = i as f64 - j as f64;
                if d * d <= 16.0 * sd * sd {
                    let w = (-(d * d) / (2.0 * sd * sd)).exp();
                    acc += w * v;
                    wsum += w;
                }
            }
            acc / wsum
        })
        .collect();
    let mut mask: Vec<bool> = smoothed.iter().map(|&v| v > p.threshold).collect();
    // fill interior gaps shorter than merge_gap
    let mut i = 0;
    while i < n {
        if !mask[i] {
            let mut j = i;
            while j < n && !mask[j] {
                j += 1;
            }
            let interior = i > 0 && j < n;
            if interior && ((j - i) as f64 / fps) < p.merge_gap {
                for m in &mut mask[i..j] {
                    *m = true;
                }
            }
            i = j;
        } else {
            i += 1;
        }
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if mask[i] {
            let mut j = i;
            while j < n && mask[j] {
                j += 1;
            }
            if (j - i) as f64 / fps >= p.min_duration {
                let w = &smoothed[i..j];
                let peak = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                out.push((i, j, peak, w.iter().sum::<f64>() / w.len() as f64));
            }
            i = j;
        } else {
            i += 1;
        }
    }
    out
}

/// Fleiss' kappa from per-rater label lists, counting agreeing rater pairs
/// one pair at a time.
pub fn fleiss_by_pairs(items: &[Vec<usize>], n_categories: usize) -> f64 {
    let n = items[0].len();
    let mut p_sum = 0.0;
    let mut cat_counts = vec![0usize; n_categories];
    for labels in items {
        let mut agree = 0usize;
        for a in 0..n {
            for b in 0..n {
                if a != b && labels[a] == labels[b] {
                    agree += 1;
                }
            }
            cat_counts[labels[a]] += 1;
        }
        p_sum += agree as f64 / (n * (n - 1)) as f64;
    }
    let p_bar = p_sum / items.len() as f64;
    let total = (items.len() * n) as f64;
    let p_e: f64 = cat_counts.iter().map(|&c| (c as f64 / total) * (c as f64 / total)).sum();
    (p_bar - p_e) / (1.0 - p_e)
}

/// Average ranks by counting: rank = #smaller + (#equal + 1) / 2.
pub fn ranks_by_counting(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let less = v.iter().filter(|&&y| y < x).count() as f64;
            let eq = v.iter().filter(|&&y| y == x).count() as f64;
            less + (eq + 1.0) / 2.0
        })
        .collect()
}

/// Two-sided exact signed-rank p by enumerating all `2^n` sign patterns of
/// the nonzero differences.
pub fn wilcoxon_enumerate(diffs: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = diffs.iter().copied().filter(|&x| x != 0.0).collect();
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let ranks = ranks_by_counting(&abs);
    let w_obs: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let n = d.len();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u64..(1u64 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w <= w_obs + 1e-9 {
            le += 1;
        }
        if w >= w_obs - 1e-9 {
            ge += 1;
        }
    }
    let total = (1u64 << n) as f64;
    (w_obs, (2.0 * le.min(ge) as f64 / total).min(1.0))
}

/// Pooled-SD effect size from sums of squared deviations.
pub fn cohens_d_direct(a: &[f64], b: &[f64]) -> f64 {
    let ma = a.iter().sum::<f64>() / a.len() as f64;
    let mb = b.iter().sum::<f64>() / b.len() as f64;
    let ssa: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let ssb: f64 = b.iter().map(|x| (x - mb).powi(2)).sum();
    let s = ((ssa + ssb) / (a.len() + b.len() - 2) as f64).sqrt();
    (ma - mb) / s
}

/// Macro-F1 through a confusion matrix and per-class precision/recall.
pub fn macro_f1_confusion(pred: &[usize], gold: &[usize], k: usize) -> f64 {
    let mut cm = vec![vec![0usize; k]; k];
    for (&p, &g) in pred.iter().zip(gold) {
        cm[g][p] += 1;
    }
    let mut sum = 0.0;
    for c in 0..k {
        let tp = cm[c][c] as f64;
        let predicted: f64 = (0..k).map(|g| cm[g][c] as f64).sum();
        let actual: f64 = cm[c].iter().map(|&x| x as f64).sum();
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if actual > 0.0 { tp / actual } else { 0.0 };
        sum += if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
    }
    sum / k as f64
}

/// Probability that a random positive outscores a random negative, ties half.
pub fn auc_pairs(scores: &[f64], labels: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            den += 1.0;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / den
}

/// Regularized logistic loss written out term by term.
pub fn logistic_loss(x: &[Vec<f64>], y: &[bool], w: &[f64], b: f64, l2: f64) -> f64 {
    let mut loss = 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
    for (row, &yi) in x.iter().zip(y) {
        let z = b + row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
        let p = 1.0 / (1.0 + (-z).exp());
        loss -= if yi { p.ln() } else { (1.0 - p).ln() };
    }
    loss
}

/// Newton's method on the regularized logistic loss; returns `(w, b)`.
pub fn newton_logistic(x: &[Vec<f64>], y: &[bool], l2: f64) -> (Vec<f64>, f64) {
    let d = x[0].len();
    let mut theta = vec![0.0; d + 1];
    for _ in 0..100 {
        let mut g = vec![0.0; d + 1];
        let mut h = vec![vec![0.0; d + 1]; d + 1];
        for (row, &yi) in x.iter().zip(y) {
            let mut xe = row.clone();
            xe.push(1.0);
            let z: f64 = xe.iter().zip(&theta).map(|(a, c)| a * c).sum();
            let p = 1.0 / (1.0 + (-z).exp());
            let r = p - if yi { 1.0 } else { 0.0 };
            for a in 0..=d {
                g[a] += r * xe[a];
                for c in 0..=d {
                    h[a][c] += p * (1.0 - p) * xe[a] * xe[c];
                }
            }
        }
        for a in 0..d {
            g[a] += l2 * theta[a];
            h[a][a] += l2;
        }
        let step = solve(h, g.clone());
        for a in 0..=d {
            theta[a] -= step[a];
        }
        if g.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-12 {
            break;
        }
    }
    let b = theta.pop().unwrap();
    (theta, b)
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}
