//! Local efficiency of the t and signed-rank tests under the mixture
//! alternative.
//!
//! The local path is indexed by the prevalence `p`:
//! `(1 - p) (q1 N(0, v1) + q2 N(0, v2)) + p N(mu, v3)`, with `p -> 0`.
//! Each test's efficacy is the derivative of its mean statistic at `p = 0`
//! divided by its null standard deviation.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inference::{signed_rank_test, t_test};
use crate::model::{normal_cdf, normal_pdf};
use crate::quad::integrate_with_breaks;
use crate::rng::{keyed, Purpose};

/// Absolute tolerance of the signed-rank efficacy integral.
pub const QUAD_TOL: f64 = 1e-8;

/// Nuisance parameters of the local mixture path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuisanceSpec {
    pub null_weights: [f64; 2],
    pub null_vars: [f64; 2],
    pub active_mu: f64,
    pub active_var: f64,
}

impl NuisanceSpec {
    /// The toy null `0.88 N(0,0.15) + 0.12 N(0,1)` with active `N(1, 0.25)`.
    pub fn toy() -> Self {
        NuisanceSpec {
            null_weights: [0.88, 0.12],
            null_vars: [0.15, 1.0],
            active_mu: 1.0,
            active_var: 0.25,
        }
    }

    /// Standard normal null with active `N(mu, 1)`.
    pub fn gaussian(mu: f64) -> Self {
        NuisanceSpec {
            null_weights: [1.0, 0.0],
            null_vars: [1.0, 1.0],
            active_mu: mu,
            active_var: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [q1, q2] = self.null_weights;
        let ok = q1 >= 0.0
            && q2 >= 0.0
            && ((q1 + q2) - 1.0).abs() <= 1e-9
            && self.null_vars.iter().all(|&v| v > 0.0 && v.is_finite())
            && self.active_mu.is_finite()
            && self.active_var > 0.0
            && self.active_var.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("invalid nuisance parameters {self:?}")))
        }
    }

    pub fn null_variance(&self) -> f64 {
        self.null_weights[0] * self.null_vars[0] + self.null_weights[1] * self.null_vars[1]
    }

    pub fn null_cdf(&self, x: f64) -> f64 {
        self.null_weights[0] * normal_cdf(x, 0.0, self.null_vars[0])
            + self.null_weights[1] * normal_cdf(x, 0.0, self.null_vars[1])
    }

    /// One draw from the path at prevalence `p`.
    pub fn sample<R: Rng + ?Sized>(&self, p: f64, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let z: f64 = StandardNormal.sample(rng);
        if u < p {
            return self.active_mu + self.active_var.sqrt() * z;
        }
        // Reuse the uniform for the null component choice.
        let w = (u - p) / (1.0 - p);
        let v = if w < self.null_weights[0] {
            self.null_vars[0]
        } else {
            self.null_vars[1]
        };
        v.sqrt() * z
    }
}

/// `mu / sqrt(q1 v1 + q2 v2)`.
pub fn efficacy_t(spec: &NuisanceSpec) -> Result<f64> {
    spec.validate()?;
    Ok(spec.active_mu / spec.null_variance().sqrt())
}

/// `2 (int f2 F1 - 1/2) / sqrt(1/3)`, with `f2` the active density and `F1`
/// the null cdf.
pub fn efficacy_signed_rank(spec: &NuisanceSpec) -> Result<f64> {
    spec.validate()?;
    let (mu, v3) = (spec.active_mu, spec.active_var);
    let sd = v3.sqrt();
    let f = |x: f64| normal_pdf(x, mu, v3) * (spec.null_cdf(x) - 0.5);
    let breaks: Vec<f64> = [-5.0, -3.0, -1.0, 0.0, 1.0, 3.0, 5.0]
        .iter()
        .map(|k| mu + k * sd)
        .chain(std::iter::once(0.0))
        .collect();
    // The half is subtracted inside the integral: f2 integrates to one.
    let integral = integrate_with_breaks(f, mu - 40.0 * sd, mu + 40.0 * sd, &breaks, QUAD_TOL / 2.0)?;
    Ok(2.0 * integral * 3f64.sqrt())
}

/// Pitman efficiency of the signed-rank test relative to the t test,
/// `(c_W / c_T)^2`. It tends to `3 / pi` for a Gaussian null as `mu -> 0`.
pub fn pitman_are(spec: &NuisanceSpec) -> Result<f64> {
    let ct = efficacy_t(spec)?;
    let cw = efficacy_signed_rank(spec)?;
    if ct == 0.0 {
        return Err(Error::DegenerateAlternative);
    }
    Ok((cw / ct).powi(2))
}

/// Rejection rates at one prevalence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerPoint {
    pub p: f64,
    pub power_t: f64,
    pub se_t: f64,
    pub power_wilcoxon: f64,
    pub se_wilcoxon: f64,
}

/// Monte Carlo power of both tests at level `alpha` for samples of size `n`.
///
/// Replicate `r` at prevalence `p` draws from a stream keyed by
/// `(seed, p, r)`, so each grid point is reproducible on its own.
pub fn power_curve_mc(
    spec: &NuisanceSpec,
    n: usize,
    p_grid: &[f64],
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<Vec<PowerPoint>> {
    spec.validate()?;
    if n < 2 || reps == 0 {
        return Err(Error::InvalidOption(format!("need n >= 2 and reps >= 1, got n={n}, reps={reps}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidOption(format!("alpha must be in (0, 1), got {alpha}")));
    }
    if let Some(p) = p_grid.iter().find(|&&p| !(0.0..=1.0).contains(&p)) {
        return Err(Error::InvalidOption(format!("prevalence {p} outside [0, 1]")));
    }
    Ok(p_grid
        .iter()
        .map(|&p| {
            let (hits_t, hits_w) = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let mut rng = keyed(seed, Purpose::Power, &[p.to_bits(), r as u64]);
                    let x: Vec<f64> = (0..n).map(|_| spec.sample(p, &mut rng)).collect();
                    let t = t_test(&x).is_ok_and(|t| t.p_value <= alpha);
                    let w = signed_rank_test(&x).is_ok_and(|t| t.p_value <= alpha);
                    (t as usize, w as usize)
                })
                .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
            let rate = |h: usize| h as f64 / reps as f64;
            let se = |r: f64| (r * (1.0 - r) / reps as f64).sqrt();
            let (pt, pw) = (rate(hits_t), rate(hits_w));
            PowerPoint {
                p,
                power_t: pt,
                se_t: se(pt),
                power_wilcoxon: pw,
                se_wilcoxon: se(pw),
            }
        })
        .collect())
}

/// CSV with columns `p,power_t,se_t,power_wilcoxon,se_wilcoxon`.
pub fn power_csv(points: &[PowerPoint]) -> String {
    let mut s = String::from("p,power_t,se_t,power_wilcoxon,se_wilcoxon\n");
    for q in points {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            q.p, q.power_t, q.se_t, q.power_wilcoxon, q.se_wilcoxon
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::std_normal_cdf;

    #[test]
    fn t_efficacy_examples() {
        let s = NuisanceSpec {
            null_weights: [1.0, 0.0],
            null_vars: [1.0, 3.0],
            active_mu: 2.0,
            active_var: 0.5,
        };
        assert_eq!(efficacy_t(&s).unwrap(), 2.0);
        assert_eq!(efficacy_t(&NuisanceSpec { active_mu: 0.0, ..s }).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_closed_form() {
        for mu in [0.1, 0.7, 2.0, -1.5] {
            let got = efficacy_signed_rank(&NuisanceSpec::gaussian(mu)).unwrap() / 3f64.sqrt();
            let want = 2.0 * (std_normal_cdf(mu / 2f64.sqrt()) - 0.5);
            assert!((got - want).abs() < 1e-8, "mu={mu}: {got} vs {want}");
        }
    }

    #[test]
    fn symmetric_active_density_has_no_efficacy() {
        let s = NuisanceSpec {
            active_mu: 0.0,
            ..NuisanceSpec::gaussian(0.0)
        };
        assert!(efficacy_signed_rank(&s).unwrap().abs() < 1e-8);
        assert!(matches!(pitman_are(&s), Err(Error::DegenerateAlternative)));
    }

    #[test]
    fn classical_limit() {
        let e = pitman_are(&NuisanceSpec::gaussian(1e-3)).unwrap();
        assert!((e - 3.0 / std::f64::consts::PI).abs() < 1e-4, "{e}");
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let s = NuisanceSpec {
            null_weights: [0.5, 0.4],
            ..NuisanceSpec::toy()
        };
        assert!(efficacy_t(&s).is_err());
        assert!(power_curve_mc(&NuisanceSpec::toy(), 10, &[1.5], 0.05, 10, 0).is_err());
    }
}
