//! Toy populations with elliptical activation regions.
//!
//! Each simulated subject activates the voxels inside its own copy of a
//! nominal ellipse whose centre and axes are randomly perturbed. Effects are
//! then drawn per voxel and subject from the null scale mixture or from the
//! active distribution.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::em::EmOptions;
use crate::error::{Error, Result};
use crate::model::{EffectsTable, MixtureParams};
use crate::pipeline::Analysis;
use crate::rng::{keyed, Purpose};
use crate::volume::{BinaryVolume, Dims};

/// How the second parameter of the `N(a, b)` entries of a [`ToySpec`] is
/// read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Spread {
    #[default]
    Variance,
    StdDev,
}

impl Spread {
    fn to_variance(self, b: f64) -> f64 {
        match self {
            Spread::Variance => b,
            Spread::StdDev => b * b,
        }
    }
}

/// Effect distribution of an active subject.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActiveModel {
    Gaussian { mean: f64, spread: f64 },
    /// `w N(mean, spread1) + (1 - w) N(mean, spread2)`.
    ScaleMixture {
        w: f64,
        mean: f64,
        spread1: f64,
        spread2: f64,
    },
}

impl ActiveModel {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ActiveModel::Gaussian { mean, spread } => mean.is_finite() && spread > 0.0 && spread.is_finite(),
            ActiveModel::ScaleMixture {
                w,
                mean,
                spread1,
                spread2,
            } => {
                (0.0..=1.0).contains(&w)
                    && mean.is_finite()
                    && spread1 > 0.0
                    && spread2 > 0.0
                    && spread1.is_finite()
                    && spread2.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("invalid active model {self:?}")))
        }
    }

    fn sample<R: Rng + ?Sized>(&self, spread: Spread, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        match *self {
            ActiveModel::Gaussian { mean, spread: s } => mean + spread.to_variance(s).sqrt() * z,
            ActiveModel::ScaleMixture {
                w,
                mean,
                spread1,
                spread2,
            } => {
                let u: f64 = rng.random();
                let s = if u < w { spread1 } else { spread2 };
                mean + spread.to_variance(s).sqrt() * z
            }
        }
    }
}

/// Nominal activation ellipse, in voxel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: [f64; 3],
    pub axes: [f64; 3],
}

/// Settings for a toy population.
#[derive(Debug, Clone, PartialEq)]
pub struct ToySpec {
    pub dims: Dims,
    pub n_subjects: usize,
    /// `None` gives a population with no activation at all.
    pub ellipse: Option<Ellipse>,
    pub center_jitter_sd: f64,
    pub axes_jitter_sd: f64,
    /// Null scale mixture. Its variances are read through `spread`.
    pub null_model: MixtureParams,
    pub active_model: ActiveModel,
    pub spread: Spread,
    pub seed: u64,
}

impl ToySpec {
    /// The 64x64 toy: null `0.88 N(0,0.15) + 0.12 N(0,1)`, active `N(1,0.25)`.
    pub fn standard(seed: u64) -> Self {
        ToySpec {
            dims: Dims { nx: 64, ny: 64, nz: 1 },
            n_subjects: 100,
            ellipse: Some(Ellipse {
                center: [31.5, 31.5, 0.0],
                axes: [20.0, 12.0, 1.0],
            }),
            center_jitter_sd: 1.5,
            axes_jitter_sd: 0.1,
            null_model: MixtureParams::null(0.88, 0.12, 0.15, 1.0).expect("valid null"),
            active_model: ActiveModel::Gaussian { mean: 1.0, spread: 0.25 },
            spread: Spread::Variance,
            seed,
        }
    }

    /// [`ToySpec::standard`] with the active model `0.88 N(1,0.15) + 0.12 N(1,1)`.
    pub fn standard_misspecified(seed: u64) -> Self {
        ToySpec {
            active_model: ActiveModel::ScaleMixture {
                w: 0.88,
                mean: 1.0,
                spread1: 0.15,
                spread2: 1.0,
            },
            ..Self::standard(seed)
        }
    }

    /// A population with no activation on the given grid.
    pub fn pure_null(dims: Dims, n_subjects: usize, seed: u64) -> Self {
        ToySpec {
            dims,
            n_subjects,
            ellipse: None,
            ..Self::standard(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        Dims::new(self.dims.nx, self.dims.ny, self.dims.nz)?;
        if self.n_subjects == 0 {
            return Err(Error::InvalidParams("n_subjects must be positive".into()));
        }
        for (name, v) in [
            ("center_jitter_sd", self.center_jitter_sd),
            ("axes_jitter_sd", self.axes_jitter_sd),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.null_model.p3() != 0.0 {
            return Err(Error::InvalidParams("null model must have p3 = 0".into()));
        }
        self.active_model.validate()?;
        if let Some(e) = &self.ellipse {
            let ext = self.dims.as_array();
            for axis in 0..self.used_axes() {
                let (c, a) = (e.center[axis], e.axes[axis]);
                if !(c.is_finite() && a > 0.0 && a.is_finite()) {
                    return Err(Error::EllipseOutOfBounds(format!(
                        "axis {axis}: centre {c}, semi-axis {a}"
                    )));
                }
                let reach = 3.0 * self.center_jitter_sd + a * (1.0 + 3.0 * self.axes_jitter_sd);
                let hi = (ext[axis] - 1) as f64;
                if c - reach < 0.0 || c + reach > hi {
                    return Err(Error::EllipseOutOfBounds(format!(
                        "axis {axis}: centre {c} +/- {reach} leaves [0, {hi}]"
                    )));
                }
            }
        }
        Ok(())
    }

    fn used_axes(&self) -> usize {
        if self.dims.nz > 1 {
            3
        } else {
            2
        }
    }

    /// The null model with variances as actually used for sampling.
    pub fn effective_null(&self) -> MixtureParams {
        let n = &self.null_model;
        MixtureParams::null(
            n.p1(),
            n.p2(),
            self.spread.to_variance(n.var1()),
            self.spread.to_variance(n.var2()),
        )
        .expect("validated null model")
    }
}

/// Per-subject activation masks and their average.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyPopulation {
    pub dims: Dims,
    pub activity: Vec<BinaryVolume>,
    /// Dense over the grid.
    pub true_prevalence: Vec<f64>,
}

impl ToyPopulation {
    pub fn n_subjects(&self) -> usize {
        self.activity.len()
    }
}

/// Fraction of `activity` volumes active at each voxel.
pub fn prevalence_of(dims: Dims, activity: &[BinaryVolume]) -> Vec<f64> {
    let n = activity.len() as f64;
    (0..dims.len())
        .map(|v| activity.iter().filter(|a| a.data[v]).count() as f64 / n)
        .collect()
}

/// Draws the per-subject activation volumes.
pub fn make_toy_population(spec: &ToySpec) -> Result<ToyPopulation> {
    spec.validate()?;
    let dims = spec.dims;
    let axes_used = spec.used_axes();
    let activity: Vec<BinaryVolume> = (0..spec.n_subjects)
        .map(|s| {
            let Some(e) = spec.ellipse else {
                return BinaryVolume::empty(dims);
            };
            let mut rng = keyed(spec.seed, Purpose::Population, &[s as u64]);
            let mut c = e.center;
            let mut a = e.axes;
            for k in 0..3 {
                let zc: f64 = StandardNormal.sample(&mut rng);
                let za: f64 = StandardNormal.sample(&mut rng);
                c[k] += spec.center_jitter_sd * zc;
                a[k] *= 1.0 + spec.axes_jitter_sd * za;
            }
            let mut vol = BinaryVolume::empty(dims);
            if a[..axes_used].iter().any(|&x| x <= 0.0) {
                return vol;
            }
            for (i, cell) in vol.data.iter_mut().enumerate() {
                let p = dims.coords(i);
                let r2: f64 = (0..axes_used)
                    .map(|k| {
                        let d = (p[k] as f64 - c[k]) / a[k];
                        d * d
                    })
                    .sum();
                *cell = r2 <= 1.0;
            }
            vol
        })
        .collect();
    let true_prevalence = prevalence_of(dims, &activity);
    Ok(ToyPopulation {
        dims,
        activity,
        true_prevalence,
    })
}

fn check_population(pop: &ToyPopulation, spec: &ToySpec) -> Result<()> {
    if pop.dims != spec.dims {
        return Err(Error::DimensionMismatch(format!(
            "population grid {:?} differs from spec grid {:?}",
            pop.dims, spec.dims
        )));
    }
    if pop.activity.len() != spec.n_subjects {
        return Err(Error::DimensionMismatch(format!(
            "population has {} subjects, spec has {}",
            pop.activity.len(),
            spec.n_subjects
        )));
    }
    if pop.activity.iter().any(|a| a.dims != pop.dims) {
        return Err(Error::DimensionMismatch("activity volume grid differs".into()));
    }
    Ok(())
}

/// Draws the effect of one subject at one voxel from its own keyed stream.
pub fn sample_effect(spec: &ToySpec, null: &MixtureParams, voxel: usize, subject: usize, active: bool) -> f64 {
    let mut rng = keyed(spec.seed, Purpose::Effects, &[voxel as u64, subject as u64]);
    if active {
        spec.active_model.sample(spec.spread, &mut rng)
    } else {
        null.sample(&mut rng)
    }
}

/// Effects for every voxel of the grid.
pub fn sample_effects(pop: &ToyPopulation, spec: &ToySpec) -> Result<EffectsTable> {
    let all: Vec<usize> = (0..spec.dims.len()).collect();
    sample_effects_at(pop, spec, &all)
}

/// Effects for the listed voxels only (strictly increasing linear indices).
/// Each value equals the one [`sample_effects`] produces for that voxel.
pub fn sample_effects_at(pop: &ToyPopulation, spec: &ToySpec, voxels: &[usize]) -> Result<EffectsTable> {
    spec.validate()?;
    check_population(pop, spec)?;
    crate::volume::check_voxel_index(&spec.dims, voxels)?;
    let null = spec.effective_null();
    let n = spec.n_subjects;
    let rows: Vec<Vec<f64>> = voxels
        .par_iter()
        .map(|&v| {
            (0..n)
                .map(|s| sample_effect(spec, &null, v, s, pop.activity[s].data[v]))
                .collect()
        })
        .collect();
    EffectsTable::new(spec.dims, voxels.to_vec(), rows.concat(), n)
}

/// End-to-end toy run: population, effects, fits, tests and masking.
#[derive(Debug, Clone)]
pub struct ToyReport {
    pub population: ToyPopulation,
    pub effects: EffectsTable,
    pub analysis: Analysis,
    /// Constrained prevalence estimate per voxel (before masking).
    pub estimated_prevalence: Vec<f64>,
    pub correlation: f64,
    pub mean_abs_error: f64,
    /// Voxels with a non-zero masked value.
    pub n_discoveries: usize,
    /// Discoveries where the true prevalence is zero.
    pub n_false_discoveries: usize,
    /// `n_false_discoveries / max(n_discoveries, 1)`.
    pub fdp: f64,
    /// Same proportion computed over BH rejections rather than the masked map.
    pub fdp_rejections: f64,
}

pub fn run_toy_pipeline(spec: &ToySpec, em_opts: &EmOptions, q_level: f64) -> Result<ToyReport> {
    let population = make_toy_population(spec)?;
    let effects = sample_effects(&population, spec)?;
    let analysis = Analysis::run(&effects, em_opts, q_level)?;
    let estimated_prevalence = analysis.prevalence();
    let truth = &population.true_prevalence;
    let correlation = pearson(truth, &estimated_prevalence);
    let mean_abs_error = truth
        .iter()
        .zip(&estimated_prevalence)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / truth.len() as f64;
    let count = |hit: &dyn Fn(usize) -> bool| {
        let found: Vec<usize> = (0..truth.len()).filter(|&v| hit(v)).collect();
        let false_found = found.iter().filter(|&&v| truth[v] == 0.0).count();
        (found.len(), false_found)
    };
    let (n_discoveries, n_false_discoveries) = count(&|v| analysis.signed_prevalence[v] != 0.0);
    let (n_rej, n_false_rej) = count(&|v| analysis.fdr.reject[v]);
    Ok(ToyReport {
        fdp: n_false_discoveries as f64 / n_discoveries.max(1) as f64,
        fdp_rejections: n_false_rej as f64 / n_rej.max(1) as f64,
        population,
        effects,
        analysis,
        estimated_prevalence,
        correlation,
        mean_abs_error,
        n_discoveries,
        n_false_discoveries,
    })
}

/// Pearson correlation; NaN when either input is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    sab / (saa * sbb).sqrt()
}
