use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use prevmap::em::EmOptions;
use prevmap::gof::{gaussian_estimate, gof_compare, ks_statistic, laplace_estimate, CandidateFamily, Fitted};
use prevmap::model::EffectsTable;
use prevmap::rng::{keyed, Purpose};
use prevmap::volume::Dims;

/// `sup |F_n - F|` checked at every data point from both sides, with the
/// empirical cdf counted directly.
fn naive_ks(x: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = x.len() as f64;
    let mut d = 0.0f64;
    for &a in x {
        let at = x.iter().filter(|&&b| b <= a).count() as f64 / n;
        let before = x.iter().filter(|&&b| b < a).count() as f64 / n;
        let f = cdf(a);
        d = d.max((at - f).abs()).max((before - f).abs());
    }
    d
}

#[test]
fn ks_matches_double_loop() {
    for s in 0..50u64 {
        let mut rng = keyed(s, Purpose::MonteCarlo, &[31]);
        let n = rng.random_range(1..80);
        let x: Vec<f64> = (0..n).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); 0.3 + 1.7 * z }).collect();
        let x: Vec<f64> = x.iter().map(|v| (v * 4.0).round() / 4.0).collect();
        let fit = gaussian_estimate(&x).unwrap_or(Fitted::Gaussian { mean: 0.0, var: 1.0 });
        let got = ks_statistic(&x, |t| fit.cdf(t));
        assert!((got - naive_ks(&x, |t| fit.cdf(t))).abs() < 1e-12);
    }
}

#[test]
fn laplace_on_three_points() {
    match laplace_estimate(&[-2.0, 0.0, 2.0]).unwrap() {
        Fitted::Laplace { location, scale } => {
            assert_eq!(location, 0.0);
            assert!((scale - 4.0 / 3.0).abs() < 1e-15);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn ks_shrinks_like_root_n_under_the_true_model() {
    let sizes = [100usize, 400, 1600];
    let mean_d: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            (0..40u64)
                .map(|s| {
                    let mut rng = keyed(s, Purpose::MonteCarlo, &[32, n as u64]);
                    let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let f = Fitted::Gaussian { mean: 0.0, var: 1.0 };
                    ks_statistic(&x, |t| f.cdf(t))
                })
                .sum::<f64>()
                / 40.0
        })
        .collect();
    for w in mean_d.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.6..2.5).contains(&ratio), "{mean_d:?}");
    }
}

#[test]
fn simple_truth_costs_the_mixture_nothing() {
    let (n_vox, n) = (200usize, 100usize);
    let mut rng = keyed(0, Purpose::MonteCarlo, &[33]);
    let effects: Vec<f64> = (0..n_vox * n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let table = EffectsTable::new(Dims::plane(20, 10).unwrap(), (0..n_vox).collect(), effects, n).unwrap();
    let families = [CandidateFamily::Gaussian, CandidateFamily::GaussianMixture3];
    let res = gof_compare(&table, &families, 1, &EmOptions::default()).unwrap();
    let (g, m) = (res.summaries[0].median, res.summaries[1].median);
    assert!((g - m).abs() <= 0.02, "gaussian {g}, mixture {m}");
}
