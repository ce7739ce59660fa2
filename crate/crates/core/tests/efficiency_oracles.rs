use prevmap::efficiency::{efficacy_signed_rank, efficacy_t, power_curve_mc, NuisanceSpec};
use prevmap::rng::{keyed, Purpose};

const H: f64 = 0.05;

/// Derivative at zero of a function of `p` sampled at `0, H, 2H`, with the
/// standard error implied by independent estimates of the three values.
fn forward_slope(vals: [f64; 3], vars: [f64; 3]) -> (f64, f64) {
    let slope = (-3.0 * vals[0] + 4.0 * vals[1] - vals[2]) / (2.0 * H);
    let var = (9.0 * vars[0] + 16.0 * vars[1] + vars[2]) / (4.0 * H * H);
    (slope, var.sqrt())
}

fn specs() -> [NuisanceSpec; 2] {
    [
        NuisanceSpec::toy(),
        NuisanceSpec {
            null_weights: [0.6, 0.4],
            null_vars: [0.5, 2.0],
            active_mu: -0.7,
            active_var: 1.5,
        },
    ]
}

#[test]
fn t_efficacy_matches_simulated_mean_slope() {
    let draws = 400_000;
    for (k, spec) in specs().iter().enumerate() {
        let mut vals = [0.0; 3];
        let mut vars = [0.0; 3];
        for (j, p) in [0.0, H, 2.0 * H].into_iter().enumerate() {
            let mut rng = keyed(k as u64, Purpose::MonteCarlo, &[41, j as u64]);
            let x: Vec<f64> = (0..draws).map(|_| spec.sample(p, &mut rng)).collect();
            let mean = x.iter().sum::<f64>() / draws as f64;
            let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
            vals[j] = mean;
            vars[j] = var / draws as f64;
        }
        let (slope, se) = forward_slope(vals, vars);
        let sd0 = spec.null_variance().sqrt();
        let want = efficacy_t(spec).unwrap();
        assert!((slope / sd0 - want).abs() < 3.0 * se / sd0, "{} vs {want} (se {})", slope / sd0, se / sd0);
    }
}

/// The mean of `W+ / (n (n + 1) / 2)` tends to `P(X1 + X2 > 0)`, whose
/// null standard deviation after the usual scaling is `1 / sqrt(3)`.
#[test]
fn signed_rank_efficacy_matches_simulated_slope() {
    let pairs = 1_000_000;
    for (k, spec) in specs().iter().enumerate() {
        let mut vals = [0.0; 3];
        let mut vars = [0.0; 3];
        for (j, p) in [0.0, H, 2.0 * H].into_iter().enumerate() {
            let mut rng = keyed(k as u64, Purpose::MonteCarlo, &[42, j as u64]);
            let hits = (0..pairs)
                .filter(|_| spec.sample(p, &mut rng) + spec.sample(p, &mut rng) > 0.0)
                .count();
            let r = hits as f64 / pairs as f64;
            vals[j] = r;
            vars[j] = r * (1.0 - r) / pairs as f64;
        }
        let (slope, se) = forward_slope(vals, vars);
        let scale = 3f64.sqrt();
        let want = efficacy_signed_rank(spec).unwrap();
        assert!(
            (slope * scale - want).abs() < 3.0 * se * scale,
            "{} vs {want} (se {})",
            slope * scale,
            se * scale
        );
    }
}

/// Pool-adjacent-violators fit of a non-decreasing sequence.
fn isotonic(y: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::new();
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 && blocks[blocks.len() - 2].0 > blocks[blocks.len() - 1].0 {
            let (b, nb) = blocks.pop().unwrap();
            let (a, na) = blocks.pop().unwrap();
            blocks.push(((a * na as f64 + b * nb as f64) / (na + nb) as f64, na + nb));
        }
    }
    blocks.into_iter().flat_map(|(v, n)| std::iter::repeat_n(v, n)).collect()
}

#[test]
fn power_is_monotone_up_to_noise() {
    let grid: Vec<f64> = (0..=8).map(|k| k as f64 * 0.04).collect();
    let pts = power_curve_mc(&NuisanceSpec::toy(), 24, &grid, 0.05, 600, 5).unwrap();
    let reps = 600.0;
    for power in [
        pts.iter().map(|q| q.power_t).collect::<Vec<_>>(),
        pts.iter().map(|q| q.power_wilcoxon).collect(),
    ] {
        let iso = isotonic(&power);
        for k in 0..power.len() {
            let se = (iso[k] * (1.0 - iso[k]) / reps).sqrt();
            assert!((power[k] - iso[k]).abs() <= 3.0 * se, "{power:?}");
        }
    }
}

#[test]
fn type_one_error_is_near_alpha() {
    let pts = power_curve_mc(&NuisanceSpec::toy(), 32, &[0.0], 0.05, 3000, 6).unwrap();
    let q = pts[0];
    assert!((q.power_t - 0.05).abs() < 4.0 * (0.05f64 * 0.95 / 3000.0).sqrt(), "{q:?}");
    assert!(q.power_wilcoxon <= 0.05 + 4.0 * (0.05f64 * 0.95 / 3000.0).sqrt(), "{q:?}");
}
