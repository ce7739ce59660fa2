//! Voxel-wise tests, Benjamini–Hochberg adjustment and the signed
//! prevalence map.
//!
//! Both tests are two-sided against a zero centre. The signed-rank test drops
//! exact zeros, uses midranks for tied magnitudes, and is exact up to 20
//! non-zero observations; above that it uses the tie-corrected normal
//! approximation with a continuity correction.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::em::VoxelFit;
use crate::error::{Error, Result};
use crate::model::std_normal_cdf;

/// Largest non-zero sample size for which the exact null distribution is used.
pub const EXACT_MAX_N: usize = 20;

/// Smallest non-zero sample size accepted by [`signed_rank_test`].
pub const SIGNED_RANK_MIN_N: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestMethod {
    SignedRankExact,
    SignedRankNormal,
    T,
}

impl TestMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            TestMethod::SignedRankExact => "signed_rank_exact",
            TestMethod::SignedRankNormal => "signed_rank_normal",
            TestMethod::T => "t",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    /// `W+` for the signed-rank test, `t` for the t-test.
    pub statistic: f64,
    pub p_value: f64,
    pub method: TestMethod,
    /// Observations used, after dropping zeros.
    pub n_effective: usize,
}

/// Midranks (1-based) of `values`, which must be sorted ascending.
/// Also returns the tie-group sizes.
fn midranks_sorted(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let n = values.len();
    let mut ranks = vec![0.0; n];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[j] == values[i] {
            j += 1;
        }
        let r = 0.5 * ((i + 1) + j) as f64;
        ranks[i..j].iter_mut().for_each(|x| *x = r);
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

/// Signed magnitude ranks: `(W+, doubled ranks, tie sizes)`.
fn signed_ranks(nonzero: &[f64]) -> (f64, Vec<u32>, Vec<usize>) {
    let mut order: Vec<usize> = (0..nonzero.len()).collect();
    order.sort_by(|&a, &b| nonzero[a].abs().total_cmp(&nonzero[b].abs()));
    let mags: Vec<f64> = order.iter().map(|&i| nonzero[i].abs()).collect();
    let (ranks, ties) = midranks_sorted(&mags);
    let w_plus = order
        .iter()
        .zip(&ranks)
        .filter(|(&i, _)| nonzero[i] > 0.0)
        .map(|(_, &r)| r)
        .sum();
    let doubled = ranks.iter().map(|&r| (2.0 * r).round() as u32).collect();
    (w_plus, doubled, ties)
}

/// Null distribution of `2 W+` given the (doubled) ranks: `counts[s]` is the
/// number of sign assignments whose positive ranks sum to `s / 2`.
fn exact_counts(doubled_ranks: &[u32]) -> Vec<u64> {
    let total: u32 = doubled_ranks.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in doubled_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            let c = counts[s];
            if c != 0 {
                counts[s + r] += c;
            }
        }
        reach += r;
    }
    counts
}

fn exact_two_sided(doubled_ranks: &[u32], doubled_w: u32) -> f64 {
    let counts = exact_counts(doubled_ranks);
    let total = (1u64 << doubled_ranks.len()) as f64;
    let w = doubled_w as usize;
    let lower: u64 = counts[..=w].iter().sum();
    let upper: u64 = counts[w..].iter().sum();
    (2.0 * lower.min(upper) as f64 / total).min(1.0)
}

/// Which null distribution the signed-rank test uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignedRankMethod {
    /// Exact up to [`EXACT_MAX_N`] non-zero values, normal beyond.
    #[default]
    Auto,
    /// Exact enumeration; at most [`EXACT_LIMIT_N`] non-zero values.
    Exact,
    /// Normal approximation with tie and continuity corrections.
    Normal,
}

/// Largest sample the exact distribution is computed for on request.
pub const EXACT_LIMIT_N: usize = 62;

/// Wilcoxon signed-rank test of symmetry about zero.
pub fn signed_rank_test(data: &[f64]) -> Result<TestResult> {
    signed_rank_test_with(data, SignedRankMethod::Auto)
}

/// [`signed_rank_test`] with an explicit choice of null distribution.
pub fn signed_rank_test_with(data: &[f64], method: SignedRankMethod) -> Result<TestResult> {
    let nonzero: Vec<f64> = data.iter().copied().filter(|&x| x != 0.0).collect();
    let n = nonzero.len();
    if n < SIGNED_RANK_MIN_N {
        return Err(Error::TooFewNonzero { got: n });
    }
    let exact = match method {
        SignedRankMethod::Auto => n <= EXACT_MAX_N,
        SignedRankMethod::Exact if n > EXACT_LIMIT_N => {
            return Err(Error::InvalidOption(format!(
                "exact signed-rank distribution limited to {EXACT_LIMIT_N} values, got {n}"
            )))
        }
        SignedRankMethod::Exact => true,
        SignedRankMethod::Normal => false,
    };
    let (w_plus, doubled, ties) = signed_ranks(&nonzero);
    if exact {
        let p = exact_two_sided(&doubled, (2.0 * w_plus).round() as u32);
        return Ok(TestResult {
            statistic: w_plus,
            p_value: p,
            method: TestMethod::SignedRankExact,
            n_effective: n,
        });
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = ties
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let dev = ((w_plus - mean).abs() - 0.5).max(0.0);
    let z = dev / var.sqrt();
    let p = (2.0 * std_normal_cdf(-z)).min(1.0);
    Ok(TestResult {
        statistic: w_plus,
        p_value: p,
        method: TestMethod::SignedRankNormal,
        n_effective: n,
    })
}

/// One-sample two-sided t-test against zero.
pub fn t_test(data: &[f64]) -> Result<TestResult> {
    let n = data.len();
    if n < 2 {
        return Err(Error::DataTooShort { got: n, min: 2 });
    }
    let nf = n as f64;
    let mean = data.iter().sum::<f64>() / nf;
    let var = data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nf - 1.0);
    if !(var > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let t = mean / (var / nf).sqrt();
    let dist = StudentsT::new(0.0, 1.0, nf - 1.0).expect("positive degrees of freedom");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TestResult {
        statistic: t,
        p_value: p,
        method: TestMethod::T,
        n_effective: n,
    })
}

/// Benjamini–Hochberg adjusted p-values and rejections.
#[derive(Debug, Clone, PartialEq)]
pub struct FdrOutcome {
    pub q_values: Vec<f64>,
    pub reject: Vec<bool>,
    pub q_level: f64,
}

impl FdrOutcome {
    pub fn n_rejected(&self) -> usize {
        self.reject.iter().filter(|&&r| r).count()
    }
}

/// BH step-up over all `p_values` at level `q_level`.
///
/// The adjusted value of the `k`-th smallest p-value is
/// `min_{j >= k} min(1, p_(j) m / j)`; a hypothesis is rejected when its
/// adjusted value is at most `q_level`.
pub fn bh_adjust(p_values: &[f64], q_level: f64) -> Result<FdrOutcome> {
    if !(q_level > 0.0 && q_level < 1.0) {
        return Err(Error::InvalidOption(format!(
            "FDR level must lie in (0, 1), got {q_level}"
        )));
    }
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidOption(format!(
            "p-values must lie in [0, 1], got {p}"
        )));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut q_values = vec![1.0; m];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        let adj = p_values[i] * m as f64 / (rank + 1) as f64;
        running = running.min(adj).min(1.0);
        q_values[i] = running;
    }
    let reject = q_values.iter().map(|&q| q <= q_level).collect();
    Ok(FdrOutcome {
        q_values,
        reject,
        q_level,
    })
}

/// `p3 sign(mu)` where the voxel is rejected, zero elsewhere.
pub fn signed_prevalence_map(fits: &[VoxelFit], fdr: &FdrOutcome) -> Result<Vec<f64>> {
    if fits.len() != fdr.reject.len() {
        return Err(Error::LengthMismatch {
            left: fits.len(),
            right: fdr.reject.len(),
        });
    }
    Ok(fits
        .iter()
        .zip(&fdr.reject)
        .map(|(f, &r)| signed_prevalence(f, r))
        .collect())
}

/// The signed prevalence of one voxel given its rejection flag.
pub fn signed_prevalence(fit: &VoxelFit, reject: bool) -> f64 {
    if !reject || fit.thresholded {
        return 0.0;
    }
    let mu = fit.params.mu();
    let sign = if mu > 0.0 {
        1.0
    } else if mu < 0.0 {
        -1.0
    } else {
        0.0
    };
    fit.params.p3() * sign
}
