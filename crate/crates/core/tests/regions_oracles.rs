use rand_distr::{Distribution, StandardNormal};

use prevmap::em::EmOptions;
use prevmap::model::EffectsTable;
use prevmap::regions::{split_half_agreement, Statistic};
use prevmap::rng::{keyed, Purpose};
use prevmap::simulate::{make_toy_population, sample_effects, ToySpec};
use prevmap::volume::Dims;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn noise_agreement_sits_at_the_active_fraction() {
    let dims = Dims::plane(30, 30).unwrap();
    let n = 32;
    let mut rng = keyed(0, Purpose::MonteCarlo, &[51]);
    let effects: Vec<f64> = (0..dims.len() * n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let table = EffectsTable::new(dims, (0..dims.len()).collect(), effects, n).unwrap();
    for frac in [0.2, 0.5] {
        let d = split_half_agreement(&table, Statistic::T, frac, 20, 1, &EmOptions::default()).unwrap();
        assert!((mean(&d) - frac).abs() < 0.03, "fraction {frac}: {d:?}");
    }
}

#[test]
fn prevalence_masks_are_as_stable_as_t_masks() {
    let spec = ToySpec::standard(0);
    let table = sample_effects(&make_toy_population(&spec).unwrap(), &spec).unwrap();
    let opts = EmOptions::default();
    let t = split_half_agreement(&table, Statistic::T, 0.5, 2, 9, &opts).unwrap();
    let p = split_half_agreement(&table, Statistic::Prevalence, 0.5, 2, 9, &opts).unwrap();
    assert!((mean(&t) - mean(&p)).abs() <= 0.1, "t {t:?}, prevalence {p:?}");
}
