use prevmap::model::MixtureParams;
use prevmap::quad::{integrate, integrate_with_breaks};

fn toy_density(p: f64) -> MixtureParams {
    MixtureParams::new(0.88 * (1.0 - p), 0.12 * (1.0 - p), p, 1.0, 0.15, 1.0, 0.25).unwrap()
}

#[test]
fn toy_density_integrates_to_one() {
    let m = toy_density(0.5);
    let total = integrate_with_breaks(|x| m.pdf(x), -50.0, 50.0, &[0.0, 1.0], 1e-12).unwrap();
    assert!((total - 1.0).abs() < 1e-9, "{total}");
}

#[test]
fn cdf_matches_integrated_density() {
    let cases = [
        toy_density(0.5),
        toy_density(0.0),
        MixtureParams::new(0.2, 0.3, 0.5, -2.5, 0.05, 3.0, 0.4).unwrap(),
        MixtureParams::new(0.6, 0.1, 0.3, 4.0, 1.0, 0.2, 2.0).unwrap(),
    ];
    for m in &cases {
        for x in [-6.0, -2.5, -0.3, 0.0, 0.7, 1.0, 3.3, 8.0] {
            let lo = -60.0;
            let breaks: Vec<f64> = [0.0, m.mu()].into_iter().filter(|&b| b < x).collect();
            let want = integrate_with_breaks(|t| m.pdf(t), lo, x, &breaks, 1e-12).unwrap();
            assert!((m.cdf(x) - want).abs() < 1e-8, "x={x}: {} vs {want}", m.cdf(x));
        }
    }
}

#[test]
fn pdf_second_moment_matches_weights() {
    let m = toy_density(0.3);
    let second = integrate(|x| x * x * m.pdf(x), -50.0, 50.0, 1e-12).unwrap();
    let want = m.p1() * m.var1() + m.p2() * m.var2() + m.p3() * (m.var3() + m.mu() * m.mu());
    assert!((second - want).abs() < 1e-9);
}

/// Cases frozen from `data/loglik_reference.py` (200-digit arithmetic).
#[test]
fn loglik_matches_high_precision_reference() {
    let text = include_str!("data/loglik_reference.txt");
    let mut n = 0;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let parts: Vec<&str> = line.split('|').collect();
        let nums = |s: &str| -> Vec<f64> { s.split_whitespace().map(|t| t.parse().unwrap()).collect() };
        let p = nums(parts[0]);
        let x = nums(parts[1]);
        let want: f64 = parts[2].trim().parse().unwrap();
        let m = MixtureParams::new(p[0], p[1], p[2], p[3], p[4], p[5], p[6]).unwrap();
        let got = m.loglik(&x);
        assert!(((got - want) / want).abs() < 1e-9, "{got} vs {want}");
        n += 1;
    }
    assert_eq!(n, 12);
}
