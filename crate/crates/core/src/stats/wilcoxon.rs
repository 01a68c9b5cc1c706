use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::StatsError;

/// Largest number of ranked differences handled by the exact null distribution.
pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZeroMethod {
    /// Drop zero differences before ranking.
    #[default]
    Wilcox,
    /// Rank zeros with the rest, then drop them from the statistic.
    Pratt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WilcoxonMethod {
    /// Exact up to [`EXACT_MAX_N`] nonzero differences, normal beyond.
    #[default]
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WilcoxonOptions {
    pub zero_method: ZeroMethod,
    pub method: WilcoxonMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of ranks of positive differences.
    pub w_plus: f64,
    pub w_minus: f64,
    /// Nonzero differences entering the statistic.
    pub n: usize,
    pub p_two_sided: f64,
    pub exact: bool,
}

/// Average 1-based ranks of `values`.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Paired signed-rank test on `a - b`.
pub fn wilcoxon_signed_rank(
    pairs: &[(f64, f64)],
    opts: WilcoxonOptions,
) -> Result<WilcoxonResult, StatsError> {
    let diffs: Vec<f64> = pairs.iter().map(|(a, b)| a - b).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let ranked: Vec<f64> = match opts.zero_method {
        ZeroMethod::Wilcox => diffs.iter().copied().filter(|&d| d != 0.0).collect(),
        ZeroMethod::Pratt => diffs.clone(),
    };
    let abs: Vec<f64> = ranked.iter().map(|d| d.abs()).collect();
    let all_ranks = average_ranks(&abs);
    let mut ranks = Vec::new();
    let mut w_plus = 0.0;
    let mut w_minus = 0.0;
    for (&d, &r) in ranked.iter().zip(&all_ranks) {
        if d > 0.0 {
            w_plus += r;
            ranks.push(r);
        } else if d < 0.0 {
            w_minus += r;
            ranks.push(r);
        }
    }
    let n = ranks.len();
    if n == 0 {
        return Err(StatsError::AllZeroDifferences);
    }
    let exact = match opts.method {
        WilcoxonMethod::Auto => n <= EXACT_MAX_N,
        WilcoxonMethod::Exact => true,
        WilcoxonMethod::Normal => false,
    };
    let p = if exact {
        exact_p(&ranks, w_plus)
    } else {
        normal_p(&ranks, w_plus)
    };
    Ok(WilcoxonResult {
        w_plus,
        w_minus,
        n,
        p_two_sided: p,
        exact,
    })
}

/// Two-sided p under the sign-flip null, counting every one of the `2^n`
/// sign assignments through a subset-sum table over doubled ranks (average
/// ranks are multiples of 1/2).
fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0f64; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let obs = (w_plus * 2.0).round() as usize;
    let all: f64 = counts.iter().sum();
    let lower: f64 = counts[..=obs].iter().sum();
    let upper: f64 = counts[obs..].iter().sum();
    (2.0 * lower.min(upper) / all).min(1.0)
}

/// Normal approximation with tie-corrected variance and a 1/2 continuity
/// correction.
fn normal_p(ranks: &[f64], w_plus: f64) -> f64 {
    let mean = ranks.iter().sum::<f64>() / 2.0;
    let var = ranks.iter().map(|r| r * r).sum::<f64>() / 4.0;
    if var == 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn from_diffs(d: &[f64]) -> Vec<(f64, f64)> {
        d.iter().map(|&x| (x, 0.0)).collect()
    }

    #[test]
    fn all_positive_five() {
        let r = wilcoxon_signed_rank(&from_diffs(&[1.0; 5]), Default::default()).unwrap();
        assert_eq!(r.w_plus, 15.0);
        assert_eq!(r.p_two_sided, 0.0625);
        assert!(r.exact);
    }

    #[test]
    fn antisymmetric_pair() {
        let r = wilcoxon_signed_rank(&from_diffs(&[1.0, -1.0]), Default::default()).unwrap();
        assert_eq!((r.w_plus, r.w_minus), (1.5, 1.5));
        assert_eq!(r.p_two_sided, 1.0);
    }

    #[test]
    fn zero_handling() {
        let d = from_diffs(&[0.0, 0.0]);
        assert_eq!(wilcoxon_signed_rank(&d, Default::default()), Err(StatsError::AllZeroDifferences));
        let d = from_diffs(&[0.0, 1.0, 2.0, -3.0]);
        let w = wilcoxon_signed_rank(&d, Default::default()).unwrap();
        assert_eq!((w.w_plus, w.w_minus, w.n), (3.0, 3.0, 3));
        let p = wilcoxon_signed_rank(
            &d,
            WilcoxonOptions {
                zero_method: ZeroMethod::Pratt,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!((p.w_plus, p.w_minus, p.n), (5.0, 4.0, 3));
    }

    #[test]
    fn normal_branch_selected_above_cutoff() {
        let d: Vec<f64> = (1..=30).map(|i| i as f64 * if i % 3 == 0 { -1.0 } else { 1.0 }).collect();
        let r = wilcoxon_signed_rank(&from_diffs(&d), Default::default()).unwrap();
        assert!(!r.exact);
        assert!(r.p_two_sided > 0.0 && r.p_two_sided <= 1.0);
    }

    proptest! {
        #[test]
        fn p_in_unit_interval_and_symmetric(d in prop::collection::vec(-5i32..=5, 1..14), c in 0.1f64..20.0) {
            let diffs: Vec<f64> = d.iter().map(|&v| v as f64).collect();
            let Ok(r) = wilcoxon_signed_rank(&from_diffs(&diffs), Default::default()) else { return Ok(()); };
            prop_assert!(r.p_two_sided > 0.0 && r.p_two_sided <= 1.0);
            let neg: Vec<f64> = diffs.iter().map(|v| -v).collect();
            let rn = wilcoxon_signed_rank(&from_diffs(&neg), Default::default()).unwrap();
            prop_assert_eq!(rn.p_two_sided, r.p_two_sided);
            let scaled: Vec<f64> = diffs.iter().map(|v| v * c).collect();
            let rs = wilcoxon_signed_rank(&from_diffs(&scaled), Default::default()).unwrap();
            prop_assert_eq!(rs.p_two_sided, r.p_two_sided);
        }
    }
}
