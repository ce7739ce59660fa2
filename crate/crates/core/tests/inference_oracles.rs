use rand::Rng;

use prevmap::inference::{bh_adjust, signed_rank_test, signed_rank_test_with, t_test, SignedRankMethod};
use prevmap::rng::{keyed, Purpose};

/// Midranks of `|x|` over the non-zero values.
fn midranks(x: &[f64]) -> Vec<f64> {
    let a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    a.iter()
        .map(|&v| {
            let below = a.iter().filter(|&&u| u < v).count() as f64;
            let equal = a.iter().filter(|&&u| u == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Two-sided p-value by visiting every sign assignment.
fn brute_force_p(x: &[f64]) -> (f64, f64) {
    let x: Vec<f64> = x.iter().copied().filter(|&v| v != 0.0).collect();
    let r = midranks(&x);
    let w: f64 = x.iter().zip(&r).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let n = x.len();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| r[k]).sum();
        if s <= w + 1e-9 {
            le += 1;
        }
        if s >= w - 1e-9 {
            ge += 1;
        }
    }
    (w, (2.0 * le.min(ge) as f64 / (1u64 << n) as f64).min(1.0))
}

#[test]
fn exact_distribution_matches_enumeration() {
    for s in 0..200u64 {
        let mut rng = keyed(s, Purpose::MonteCarlo, &[21]);
        let n = rng.random_range(5..=14);
        // Coarse values produce ties and zeros.
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-4i32..=5) as f64 * 0.5).collect();
        if x.iter().filter(|&&v| v != 0.0).count() < 5 {
            continue;
        }
        let (w, p) = brute_force_p(&x);
        let got = signed_rank_test_with(&x, SignedRankMethod::Exact).unwrap();
        assert_eq!(got.statistic, w, "{x:?}");
        assert!((got.p_value - p).abs() < 1e-12, "{x:?}: {} vs {p}", got.p_value);
    }
}

#[test]
fn normal_approximation_tracks_the_exact_law_at_twenty() {
    let mut worst = 0.0f64;
    for s in 0..100u64 {
        let mut rng = keyed(s, Purpose::MonteCarlo, &[22]);
        let x: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.5)).collect();
        let (_, p) = brute_force_p(&x);
        let a = signed_rank_test_with(&x, SignedRankMethod::Normal).unwrap().p_value;
        worst = worst.max((p - a).abs());
    }
    assert!(worst < 0.01, "{worst}");
}

#[test]
fn automatic_method_switches_after_twenty() {
    let x: Vec<f64> = (1..=21).map(|k| k as f64 - 8.5).collect();
    let auto = signed_rank_test(&x).unwrap();
    let normal = signed_rank_test_with(&x, SignedRankMethod::Normal).unwrap();
    assert_eq!(auto, normal);
    assert_eq!(signed_rank_test(&x[..20]).unwrap(), signed_rank_test_with(&x[..20], SignedRankMethod::Exact).unwrap());
}

#[test]
fn t_test_textbook_value() {
    let r = t_test(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
    assert!((r.statistic - 3.0 / (2.5f64 / 5.0).sqrt()).abs() < 1e-12);
    assert!((r.p_value - 0.013_235_599_563_682_7).abs() < 1e-10, "{}", r.p_value);
}

#[test]
fn bh_hand_step_up() {
    let out = bh_adjust(&[0.01, 0.04, 0.03, 0.20], 0.1).unwrap();
    assert_eq!(out.reject, vec![true, true, true, false]);
}
