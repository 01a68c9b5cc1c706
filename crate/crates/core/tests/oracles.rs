#[path = "support/oracles.rs"]
mod oracles;

use ndarray::Array2;
use oracles::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smilescope_core::learn::{fit_logistic, logistic_loss_and_grad, roc_auc};
use smilescope_core::smile::{extract_candidates, ExtractionParams};
use smilescope_core::stats::{
    classification_scores, cohens_d, fleiss_kappa, wilcoxon_signed_rank, RatingMatrix,
    WilcoxonMethod, WilcoxonOptions,
};

fn au_like() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![2 => 0.0f64..0.8, 1 => 0.8f64..3.5], 30..600)
}

fn to_rows(x: &Array2<f64>) -> Vec<Vec<f64>> {
    x.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn random_problem(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Array2<f64>, Vec<bool>) {
    let x = Array2::from_shape_fn((n, d), |_| rng.gen_range(-2.0..2.0));
    let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect();
    let mut y: Vec<bool> = x
        .rows()
        .into_iter()
        .map(|r| {
            let z: f64 = r.iter().zip(&w).map(|(a, b)| a * b).sum();
            rng.gen::<f64>() < 1.0 / (1.0 + (-z).exp())
        })
        .collect();
    y[0] = true;
    y[1] = false;
    (x, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn extraction_matches_direct_scan(x in au_like(), fps in prop_oneof![Just(10.0), Just(25.0), Just(30.0)]) {
        let p = ExtractionParams::default();
        let got = extract_candidates(&x, &p, fps).unwrap();
        let want = brute_extract(&x, &p, fps);
        prop_assert_eq!(got.len(), want.len());
        for (g, (a, b, peak, mean)) in got.iter().zip(&want) {
            prop_assert_eq!(g.start, *a as f64 / fps);
            prop_assert_eq!(g.end, *b as f64 / fps);
            prop_assert!((g.peak_au12 - peak).abs() < 1e-12);
            prop_assert!((g.mean_au12 - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn fleiss_matches_pair_count(seed in any::<u64>(), items in 2usize..15, raters in 2usize..6, k in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<Vec<usize>> = (0..items)
            .map(|_| (0..raters).map(|_| rng.gen_range(0..k)).collect())
            .collect();
        let used: std::collections::HashSet<usize> = labels.iter().flatten().copied().collect();
        prop_assume!(used.len() > 1);
        let m = RatingMatrix::from_labels(&labels, k).unwrap();
        let got = fleiss_kappa(&m).unwrap();
        prop_assert!((got - fleiss_by_pairs(&labels, k)).abs() < 1e-10);
    }

    #[test]
    fn wilcoxon_exact_matches_enumeration(d in prop::collection::vec((-3i32..=3i32).prop_map(|v| v as f64 * 0.5), 1..13)) {
        let pairs: Vec<(f64, f64)> = d.iter().map(|&v| (v, 0.0)).collect();
        prop_assume!(d.iter().any(|&v| v != 0.0));
        let opts = WilcoxonOptions { method: WilcoxonMethod::Exact, ..Default::default() };
        let r = wilcoxon_signed_rank(&pairs, opts).unwrap();
        let (w, p) = wilcoxon_enumerate(&d);
        prop_assert_eq!(r.w_plus, w);
        prop_assert!((r.p_two_sided - p).abs() < 1e-10);
    }

    #[test]
    fn cohens_d_matches_direct(a in prop::collection::vec(-10.0f64..10.0, 2..30), b in prop::collection::vec(-10.0f64..10.0, 2..30)) {
        let d = cohens_d(&a, &b).unwrap();
        prop_assert!((d - cohens_d_direct(&a, &b)).abs() < 1e-10);
    }

    #[test]
    fn macro_f1_matches_confusion(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60)) {
        let pred: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let gold: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let s = classification_scores(&pred, &gold, &[0, 1, 2, 3], false).unwrap();
        prop_assert!((s.macro_f1 - macro_f1_confusion(&pred, &gold, 4)).abs() < 1e-10);
    }

    #[test]
    fn auc_matches_pair_count(v in prop::collection::vec((0i32..20, any::<bool>()), 2..80)) {
        let scores: Vec<f64> = v.iter().map(|p| p.0 as f64).collect();
        let labels: Vec<bool> = v.iter().map(|p| p.1).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        prop_assert!((roc_auc(&scores, &labels).unwrap() - auc_pairs(&scores, &labels)).abs() < 1e-12);
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let n = rng.gen_range(5..=50);
        let d = rng.gen_range(1..=20);
        let (x, y) = random_problem(&mut rng, n, d);
        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = rng.gen_range(-1.0..1.0);
        let l2 = rng.gen_range(0.0..2.0);
        let (loss, gw, gb) = logistic_loss_and_grad(x.view(), &y, ndarray::ArrayView1::from(&w), b, l2);
        let rows = to_rows(&x);
        assert!((loss - logistic_loss(&rows, &y, &w, b, l2)).abs() < 1e-9 * loss.max(1.0));
        let h = 1e-6;
        let mut fd = Vec::with_capacity(d + 1);
        for j in 0..d {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp[j] += h;
            wm[j] -= h;
            fd.push((logistic_loss(&rows, &y, &wp, b, l2) - logistic_loss(&rows, &y, &wm, b, l2)) / (2.0 * h));
        }
        fd.push((logistic_loss(&rows, &y, &w, b + h, l2) - logistic_loss(&rows, &y, &w, b - h, l2)) / (2.0 * h));
        let analytic: Vec<f64> = gw.iter().copied().chain([gb]).collect();
        let diff: f64 = analytic.iter().zip(&fd).map(|(a, f)| (a - f).powi(2)).sum::<f64>().sqrt();
        let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-8);
        assert!(diff / scale < 1e-5, "relative error {}", diff / scale);
    }
}

#[test]
fn fit_matches_newton() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let n = rng.gen_range(20..=80);
        let d = rng.gen_range(1..=8);
        let (x, y) = random_problem(&mut rng, n, d);
        let m = fit_logistic(x.view(), &y, 1.0).unwrap();
        let (w, b) = newton_logistic(&to_rows(&x), &y, 1.0);
        for (a, e) in m.weights.iter().zip(&w) {
            assert!((a - e).abs() < 1e-6, "{a} vs {e}");
        }
        assert!((m.bias - b).abs() < 1e-6);
    }
}

#[test]
fn normal_branch_tracks_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let n = rng.gen_range(20..=25);
        let shift = rng.gen_range(-0.8..0.8);
        let pairs: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen_range(-1.0..1.0) + shift, 0.0)).collect();
        let run = |method| {
            wilcoxon_signed_rank(&pairs, WilcoxonOptions { method, ..Default::default() })
                .unwrap()
                .p_two_sided
        };
        let (e, a) = (run(WilcoxonMethod::Exact), run(WilcoxonMethod::Normal));
        assert!((e - a).abs() < 0.02, "n={n} exact {e} normal {a}");
    }
}
