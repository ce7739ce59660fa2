//! The three-component mixture for per-subject effects at one voxel.
//!
//! Two zero-mean Gaussians describe the inactive population (a scale
//! mixture) and a third Gaussian with free mean describes the active one:
//!
//! ```text
//! f(x) = p1 N(x; 0, var1) + p2 N(x; 0, var2) + p3 N(x; mu, var3)
//! ```
//!
//! `p3` is the prevalence of activation. Parameters are canonicalized at
//! construction so that `var1 <= var2`, which makes evaluation independent
//! of how the two null components were labelled.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::volume::{check_voxel_index, Dims};

/// `ln` of the smallest positive normal `f64`; the floor for log-densities.
pub const LN_MIN_POSITIVE: f64 = -708.396_418_532_264_1;

pub(crate) const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Parameters of the three-component mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureParams {
    p: [f64; 3],
    mu: f64,
    var: [f64; 3],
}

impl MixtureParams {
    /// Validates and canonicalizes a parameter set.
    ///
    /// Weights within `1e-9` of summing to one are renormalized; larger
    /// violations are rejected. The null components are swapped if needed so
    /// that `var1 <= var2`, and `mu` is reported as zero when `p3 == 0`.
    pub fn new(
        p1: f64,
        p2: f64,
        p3: f64,
        mu: f64,
        var1: f64,
        var2: f64,
        var3: f64,
    ) -> Result<Self> {
        let mut p = [p1, p2, p3];
        let mut var = [var1, var2, var3];
        if !mu.is_finite() {
            return Err(Error::InvalidParams(format!("mu must be finite, got {mu}")));
        }
        for (k, w) in p.iter_mut().enumerate() {
            if !w.is_finite() || *w < -1e-12 {
                return Err(Error::InvalidParams(format!(
                    "weight p{} must be non-negative, got {w}",
                    k + 1
                )));
            }
            *w = w.max(0.0);
        }
        for (k, v) in var.iter().enumerate() {
            if !v.is_finite() || *v <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "variance var{} must be positive, got {v}",
                    k + 1
                )));
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        if (sum - 1.0).abs() > 4.0 * f64::EPSILON {
            for w in &mut p {
                *w /= sum;
            }
        }
        if var[0] > var[1] {
            p.swap(0, 1);
            var.swap(0, 1);
        }
        let mu = if p[2] == 0.0 { 0.0 } else { mu };
        Ok(MixtureParams { p, mu, var })
    }

    /// A pure null scale mixture (`p3 = 0`). `var3` is set to the null
    /// variance so the parameter set stays valid.
    pub fn null(p1: f64, p2: f64, var1: f64, var2: f64) -> Result<Self> {
        let var3 = (p1 * var1 + p2 * var2).max(f64::MIN_POSITIVE);
        Self::new(p1, p2, 0.0, 0.0, var1, var2, var3)
    }

    pub fn p1(&self) -> f64 {
        self.p[0]
    }
    pub fn p2(&self) -> f64 {
        self.p[1]
    }
    /// The prevalence.
    pub fn p3(&self) -> f64 {
        self.p[2]
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn var1(&self) -> f64 {
        self.var[0]
    }
    pub fn var2(&self) -> f64 {
        self.var[1]
    }
    pub fn var3(&self) -> f64 {
        self.var[2]
    }
    pub fn weights(&self) -> [f64; 3] {
        self.p
    }
    pub fn variances(&self) -> [f64; 3] {
        self.var
    }
    pub fn means(&self) -> [f64; 3] {
        [0.0, 0.0, self.mu]
    }

    /// `p1 var1 + p2 var2`, the (unnormalized) null variance.
    pub fn null_variance_mass(&self) -> f64 {
        self.p[0] * self.var[0] + self.p[1] * self.var[1]
    }

    pub fn pdf(&self, x: f64) -> f64 {
        mixture_pdf(self, x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        mixture_cdf(self, x)
    }

    /// Log-density, floored at [`LN_MIN_POSITIVE`].
    pub fn ln_pdf(&self, x: f64) -> f64 {
        let mut terms = [f64::NEG_INFINITY; 3];
        let means = self.means();
        for k in 0..3 {
            if self.p[k] > 0.0 {
                terms[k] = self.p[k].ln() + normal_ln_pdf(x, means[k], self.var[k]);
            }
        }
        log_sum_exp3(terms).max(LN_MIN_POSITIVE)
    }

    pub fn loglik(&self, data: &[f64]) -> f64 {
        mixture_loglik(self, data)
    }

    /// Draws one effect from the mixture.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let k = if u < self.p[0] {
            0
        } else if u < self.p[0] + self.p[1] {
            1
        } else {
            2
        };
        let z: f64 = StandardNormal.sample(rng);
        self.means()[k] + self.var[k].sqrt() * z
    }
}

/// Mixture density at `x`.
pub fn mixture_pdf(params: &MixtureParams, x: f64) -> f64 {
    let means = params.means();
    (0..3)
        .filter(|&k| params.p[k] > 0.0)
        .map(|k| params.p[k] * normal_pdf(x, means[k], params.var[k]))
        .sum()
}

/// Mixture distribution function at `x`.
pub fn mixture_cdf(params: &MixtureParams, x: f64) -> f64 {
    let means = params.means();
    let c: f64 = (0..3)
        .filter(|&k| params.p[k] > 0.0)
        .map(|k| params.p[k] * normal_cdf(x, means[k], params.var[k]))
        .sum();
    c.clamp(0.0, 1.0)
}

/// Sum of log-densities over `data`; never NaN for valid parameters.
pub fn mixture_loglik(params: &MixtureParams, data: &[f64]) -> f64 {
    data.iter().map(|&x| params.ln_pdf(x)).sum()
}

#[inline]
pub(crate) fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    (-0.5 * d * d / var).exp() / (2.0 * PI * var).sqrt()
}

#[inline]
pub(crate) fn normal_ln_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * d * d / var - 0.5 * var.ln() - HALF_LN_2PI
}

#[inline]
pub(crate) fn normal_cdf(x: f64, mean: f64, var: f64) -> f64 {
    let z = (x - mean) / var.sqrt();
    std_normal_cdf(z)
}

#[inline]
pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z * FRAC_1_SQRT_2)
}

#[inline]
pub(crate) fn log_sum_exp3(t: [f64; 3]) -> f64 {
    let m = t[0].max(t[1]).max(t[2]);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((t[0] - m).exp() + (t[1] - m).exp() + (t[2] - m).exp()).ln()
}

/// Per-voxel, per-subject effect estimates on a grid.
///
/// `effects` is stored row-major: row `v` holds the `n_subjects` effects of
/// the voxel `voxel_index[v]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectsTable {
    dims: Dims,
    voxel_index: Vec<usize>,
    effects: Vec<f64>,
    n_subjects: usize,
}

impl EffectsTable {
    pub fn new(
        dims: Dims,
        voxel_index: Vec<usize>,
        effects: Vec<f64>,
        n_subjects: usize,
    ) -> Result<Self> {
        if n_subjects == 0 {
            return Err(Error::InvariantViolation(
                "number of subjects must be positive".into(),
            ));
        }
        if effects.len() != voxel_index.len() * n_subjects {
            return Err(Error::InvariantViolation(format!(
                "effects has {} values, expected {} voxels x {} subjects",
                effects.len(),
                voxel_index.len(),
                n_subjects
            )));
        }
        check_voxel_index(&dims, &voxel_index)?;
        if let Some(pos) = effects.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvariantViolation(format!(
                "non-finite effect at voxel {} subject {}",
                voxel_index[pos / n_subjects],
                pos % n_subjects
            )));
        }
        Ok(EffectsTable {
            dims,
            voxel_index,
            effects,
            n_subjects,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }
    pub fn voxel_index(&self) -> &[usize] {
        &self.voxel_index
    }
    pub fn n_subjects(&self) -> usize {
        self.n_subjects
    }
    pub fn n_voxels(&self) -> usize {
        self.voxel_index.len()
    }
    pub fn effects(&self) -> &[f64] {
        &self.effects
    }

    /// Effects of the `v`-th in-mask voxel (row position, not linear index).
    pub fn row(&self, v: usize) -> &[f64] {
        &self.effects[v * self.n_subjects..(v + 1) * self.n_subjects]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.effects.chunks_exact(self.n_subjects)
    }

    /// A table restricted to the given subject columns, in the given order.
    pub fn select_subjects(&self, subjects: &[usize]) -> Result<Self> {
        if let Some(&s) = subjects.iter().find(|&&s| s >= self.n_subjects) {
            return Err(Error::IndexOutOfRange(format!(
                "subject {s} of {}",
                self.n_subjects
            )));
        }
        let mut effects = Vec::with_capacity(self.n_voxels() * subjects.len());
        for row in self.rows() {
            effects.extend(subjects.iter().map(|&s| row[s]));
        }
        Self::new(
            self.dims,
            self.voxel_index.clone(),
            effects,
            subjects.len(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn std1() -> MixtureParams {
        MixtureParams::new(1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn pdf_reference_values() {
        assert!(close(std1().pdf(0.0), 0.398_942_280_401_432_7, 1e-15));
        let half = MixtureParams::new(0.5, 0.5, 0.0, 0.0, 1.0, 4.0, 1.0).unwrap();
        assert!(close(half.pdf(0.0), 0.299_206_710_301_074_5, 1e-15));
    }

    #[test]
    fn cdf_reference_values() {
        let sym = MixtureParams::new(0.3, 0.7, 0.0, 5.0, 0.2, 3.0, 1.0).unwrap();
        assert!(close(sym.cdf(0.0), 0.5, 1e-15));
        assert!(close(std1().cdf(1.959_964), 0.975, 1e-7));
    }

    #[test]
    fn loglik_reference_values() {
        assert!(close(std1().loglik(&[0.0]), -0.918_938_533_204_672_8, 1e-15));
        assert!(close(std1().loglik(&[0.0, 0.0]), -1.837_877_066_409_345_5, 1e-14));
    }

    #[test]
    fn loglik_is_floored_not_nan() {
        let p = MixtureParams::new(0.5, 0.5, 0.0, 0.0, 1e-4, 1e-3, 1.0).unwrap();
        let ll = p.loglik(&[1e6]);
        assert_eq!(ll, LN_MIN_POSITIVE);
        assert!(!ll.is_nan());
    }

    #[test]
    fn construction_rules() {
        let p = MixtureParams::new(0.2, 0.3, 0.5, 1.0, 4.0, 1.0, 1.0).unwrap();
        assert_eq!(p.weights(), [0.3, 0.2, 0.5]);
        assert_eq!(p.variances(), [1.0, 4.0, 1.0]);

        let z = MixtureParams::new(0.5, 0.5, 0.0, 3.0, 1.0, 2.0, 1.0).unwrap();
        assert_eq!(z.mu(), 0.0);

        let renorm = MixtureParams::new(0.2, 0.3, 0.5 + 5e-10, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(close(renorm.weights().iter().sum::<f64>(), 1.0, 1e-12));

        assert!(MixtureParams::new(0.2, 0.3, 0.51, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(MixtureParams::new(-0.1, 0.6, 0.5, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(MixtureParams::new(0.5, 0.5, 0.0, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(MixtureParams::new(0.5, 0.5, 0.0, f64::NAN, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn effects_table_validation() {
        let d = Dims::plane(2, 2).unwrap();
        assert!(EffectsTable::new(d, vec![0, 3], vec![1.0; 4], 2).is_ok());
        assert!(EffectsTable::new(d, vec![0, 3], vec![1.0; 5], 2).is_err());
        assert!(EffectsTable::new(d, vec![0, 0], vec![1.0; 4], 2).is_err());
        assert!(EffectsTable::new(d, vec![0, 3], vec![1.0, f64::NAN, 1.0, 1.0], 2).is_err());
        let t = EffectsTable::new(d, vec![1, 2], vec![1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(t.row(1), &[3.0, 4.0]);
        let s = t.select_subjects(&[1]).unwrap();
        assert_eq!(s.effects(), &[2.0, 4.0]);
    }
}
