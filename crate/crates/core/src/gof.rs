//! Held-out goodness of fit of candidate effect distributions.
//!
//! Each voxel's subjects are split into a training and a test half. A
//! candidate family is fitted on the training half and scored by the
//! Kolmogorov–Smirnov distance between its cdf and the empirical cdf of the
//! test half.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use statrs::distribution::{Cauchy, ContinuousCDF, Laplace, Normal};
use statrs::statistics::{Data, OrderStatistics};

use crate::em::{fit_null_mixture, fit_voxel_unconstrained, EmOptions, MIN_OBSERVATIONS};
use crate::error::{Error, Result};
use crate::model::{EffectsTable, MixtureParams};
use crate::rng::{keyed, Purpose};

/// Minimum number of subjects for a train/test comparison.
pub const MIN_SUBJECTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CandidateFamily {
    Gaussian,
    Laplace,
    Cauchy,
    Logistic,
    GaussianScaleMixture2,
    GaussianMixture3,
}

impl CandidateFamily {
    pub const ALL: [CandidateFamily; 6] = [
        CandidateFamily::Gaussian,
        CandidateFamily::Laplace,
        CandidateFamily::Cauchy,
        CandidateFamily::Logistic,
        CandidateFamily::GaussianScaleMixture2,
        CandidateFamily::GaussianMixture3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CandidateFamily::Gaussian => "gaussian",
            CandidateFamily::Laplace => "laplace",
            CandidateFamily::Cauchy => "cauchy",
            CandidateFamily::Logistic => "logistic",
            CandidateFamily::GaussianScaleMixture2 => "gaussian_scale_mixture_2",
            CandidateFamily::GaussianMixture3 => "gaussian_mixture_3",
        }
    }
}

impl fmt::Display for CandidateFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CandidateFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidOption(format!("unknown family '{s}'")))
    }
}

/// A fitted candidate distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fitted {
    Gaussian { mean: f64, var: f64 },
    Laplace { location: f64, scale: f64 },
    Cauchy { location: f64, scale: f64 },
    Logistic { location: f64, scale: f64 },
    Mixture(MixtureParams),
}

impl Fitted {
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Fitted::Gaussian { mean, var } => Normal::new(mean, var.sqrt()).expect("positive sd").cdf(x),
            Fitted::Laplace { location, scale } => Laplace::new(location, scale).expect("positive scale").cdf(x),
            Fitted::Cauchy { location, scale } => Cauchy::new(location, scale).expect("positive scale").cdf(x),
            Fitted::Logistic { location, scale } => 1.0 / (1.0 + (-(x - location) / scale).exp()),
            Fitted::Mixture(p) => p.cdf(x),
        }
    }
}

fn mean_var(data: &[f64]) -> (f64, f64) {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn positive(v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::ZeroVariance)
    }
}

/// Sample mean and unbiased variance.
pub fn gaussian_estimate(data: &[f64]) -> Result<Fitted> {
    let (mean, var) = mean_var(data);
    Ok(Fitted::Gaussian {
        mean,
        var: positive(var)?,
    })
}

/// Median and mean absolute deviation from the median.
pub fn laplace_estimate(data: &[f64]) -> Result<Fitted> {
    let location = Data::new(data.to_vec()).median();
    let scale = data.iter().map(|x| (x - location).abs()).sum::<f64>() / data.len() as f64;
    Ok(Fitted::Laplace {
        location,
        scale: positive(scale)?,
    })
}

/// Median and half the interquartile range.
pub fn cauchy_estimate(data: &[f64]) -> Result<Fitted> {
    let mut d = Data::new(data.to_vec());
    let location = d.median();
    let scale = 0.5 * (d.upper_quartile() - d.lower_quartile());
    Ok(Fitted::Cauchy {
        location,
        scale: positive(scale)?,
    })
}

/// Sample mean and the scale `sqrt(3 var) / pi` matching the variance.
pub fn logistic_estimate(data: &[f64]) -> Result<Fitted> {
    let (mean, var) = mean_var(data);
    Ok(Fitted::Logistic {
        location: mean,
        scale: (3.0 * positive(var)?).sqrt() / std::f64::consts::PI,
    })
}

/// Fits `family` to `data` (at least eight values, not all equal).
pub fn fit_candidate(family: CandidateFamily, data: &[f64], opts: &EmOptions) -> Result<Fitted> {
    if data.len() < MIN_OBSERVATIONS {
        return Err(Error::DataTooShort {
            got: data.len(),
            min: MIN_OBSERVATIONS,
        });
    }
    if data.iter().all(|&x| x == data[0]) {
        return Err(Error::ZeroVariance);
    }
    match family {
        CandidateFamily::Gaussian => gaussian_estimate(data),
        CandidateFamily::Laplace => laplace_estimate(data),
        CandidateFamily::Cauchy => cauchy_estimate(data),
        CandidateFamily::Logistic => logistic_estimate(data),
        CandidateFamily::GaussianScaleMixture2 => Ok(Fitted::Mixture(fit_null_mixture(data, None, opts)?.params)),
        CandidateFamily::GaussianMixture3 => Ok(Fitted::Mixture(fit_voxel_unconstrained(data, opts)?.params)),
    }
}

/// Kolmogorov–Smirnov distance between the empirical cdf of `data` and
/// `cdf`. Returns NaN for empty data.
pub fn ks_statistic(data: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    if data.is_empty() {
        return f64::NAN;
    }
    let mut x = data.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter().enumerate().fold(0.0, |d, (i, &xi)| {
        let f = cdf(xi);
        d.max((i + 1) as f64 / n - f).max(f - i as f64 / n)
    })
}

/// A seeded 50/50 partition of `0..n` into sorted (train, test) lists.
/// With odd `n` the test side gets the extra subject.
pub fn split_subjects(n: usize, seed: u64, split: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut keyed(seed, Purpose::Split, &[split]));
    let (a, b) = idx.split_at(n / 2);
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

/// Box-plot statistics of one family's KS values over voxels.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilySummary {
    pub family: CandidateFamily,
    pub n_scored: usize,
    pub n_missing: usize,
    pub median: f64,
    pub lower_quartile: f64,
    pub upper_quartile: f64,
    /// Most extreme values within 1.5 IQR of the quartiles.
    pub whisker_low: f64,
    pub whisker_high: f64,
}

impl FamilySummary {
    fn of(family: CandidateFamily, values: &[Option<f64>]) -> Self {
        let ok: Vec<f64> = values.iter().flatten().copied().collect();
        let n_missing = values.len() - ok.len();
        if ok.is_empty() {
            return FamilySummary {
                family,
                n_scored: 0,
                n_missing,
                median: f64::NAN,
                lower_quartile: f64::NAN,
                upper_quartile: f64::NAN,
                whisker_low: f64::NAN,
                whisker_high: f64::NAN,
            };
        }
        let mut d = Data::new(ok.clone());
        let (q1, med, q3) = (d.lower_quartile(), d.median(), d.upper_quartile());
        let iqr = q3 - q1;
        let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let inside = ok.iter().copied().filter(|&v| v >= lo_fence && v <= hi_fence);
        let whisker_low = inside.clone().fold(f64::INFINITY, f64::min);
        let whisker_high = inside.fold(f64::NEG_INFINITY, f64::max);
        FamilySummary {
            family,
            n_scored: ok.len(),
            n_missing,
            median: med,
            lower_quartile: q1,
            upper_quartile: q3,
            whisker_low,
            whisker_high,
        }
    }
}

/// Per-voxel, per-family held-out KS distances.
#[derive(Debug, Clone, PartialEq)]
pub struct GofTable {
    pub families: Vec<CandidateFamily>,
    pub voxel_index: Vec<usize>,
    /// `ks[v][k]` is the distance of family `k` at voxel row `v`, or `None`
    /// when that fit failed.
    pub ks: Vec<Vec<Option<f64>>>,
    pub summaries: Vec<FamilySummary>,
}

impl GofTable {
    /// Summaries sorted by median (missing medians last).
    pub fn ranking(&self) -> Vec<&FamilySummary> {
        let mut r: Vec<&FamilySummary> = self.summaries.iter().collect();
        r.sort_by(|a, b| a.median.total_cmp(&b.median).then(a.family.cmp(&b.family)));
        r
    }

    /// CSV with columns `voxel_index,family,ks`; failures are written as NaN.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("voxel_index,family,ks\n");
        for (v, row) in self.voxel_index.iter().zip(&self.ks) {
            for (f, d) in self.families.iter().zip(row) {
                s.push_str(&format!("{v},{f},{}\n", d.unwrap_or(f64::NAN)));
            }
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from(
            "family,n_scored,n_missing,median,lower_quartile,upper_quartile,whisker_low,whisker_high\n",
        );
        for m in self.ranking() {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                m.family,
                m.n_scored,
                m.n_missing,
                m.median,
                m.lower_quartile,
                m.upper_quartile,
                m.whisker_low,
                m.whisker_high
            ));
        }
        s
    }
}

/// Fits every family on a seeded training half of the subjects and scores
/// it on the other half, voxel by voxel.
pub fn gof_compare(
    effects: &EffectsTable,
    families: &[CandidateFamily],
    split_seed: u64,
    opts: &EmOptions,
) -> Result<GofTable> {
    let n = effects.n_subjects();
    if n < MIN_SUBJECTS {
        return Err(Error::DataTooShort {
            got: n,
            min: MIN_SUBJECTS,
        });
    }
    opts.validate()?;
    let (train, test) = split_subjects(n, split_seed, 0);
    let ks: Vec<Vec<Option<f64>>> = (0..effects.n_voxels())
        .into_par_iter()
        .map(|v| {
            let row = effects.row(v);
            let tr: Vec<f64> = train.iter().map(|&i| row[i]).collect();
            let te: Vec<f64> = test.iter().map(|&i| row[i]).collect();
            families
                .iter()
                .map(|&f| {
                    fit_candidate(f, &tr, opts)
                        .ok()
                        .map(|fit| ks_statistic(&te, |x| fit.cdf(x)))
                })
                .collect()
        })
        .collect();
    let summaries = families
        .iter()
        .enumerate()
        .map(|(k, &f)| {
            let col: Vec<Option<f64>> = ks.iter().map(|r| r[k]).collect();
            FamilySummary::of(f, &col)
        })
        .collect();
    Ok(GofTable {
        families: families.to_vec(),
        voxel_index: effects.voxel_index().to_vec(),
        ks,
        summaries,
    })
}
