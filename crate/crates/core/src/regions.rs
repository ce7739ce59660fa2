//! Activation regions of thresholded maps.
//!
//! A map is cut at a fixed active fraction, the active voxels are grouped
//! into face-connected regions, and each region is scored by how much of its
//! bounding box it fills.

use std::collections::VecDeque;

use rayon::prelude::*;
use statrs::statistics::{Data, OrderStatistics};

use crate::em::{fit_voxel_unconstrained, EmOptions};
use crate::error::{Error, Result};
use crate::gof::{split_subjects, MIN_SUBJECTS};
use crate::inference::t_test;
use crate::model::EffectsTable;
use crate::volume::{BinaryVolume, Dims, VoxelMap};

/// A face-connected set of voxels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    /// Linear indices, increasing.
    pub voxels: Vec<usize>,
    pub bbox_min: [usize; 3],
    pub bbox_max: [usize; 3],
}

impl Region {
    pub fn size(&self) -> usize {
        self.voxels.len()
    }

    /// Bounding-box side lengths in voxels.
    pub fn extents(&self) -> [usize; 3] {
        std::array::from_fn(|k| self.bbox_max[k] - self.bbox_min[k] + 1)
    }
}

/// Number of voxels kept when a fraction `f` of `m` is active: `ceil(f m)`,
/// ignoring rounding noise in the product.
pub fn active_count(fraction: f64, m: usize) -> usize {
    let x = fraction * m as f64;
    let r = x.round();
    let k = if (x - r).abs() <= 1e-9 * (m as f64).max(1.0) {
        r
    } else {
        x.ceil()
    };
    (k.max(0.0) as usize).min(m)
}

/// Marks the `ceil(fraction m)` in-mask voxels with the largest values.
/// Ties go to the lower linear index; NaN values rank below everything.
pub fn threshold_map(map: &VoxelMap, fraction: f64) -> Result<BinaryVolume> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidOption(format!(
            "active fraction must be in (0, 1], got {fraction}"
        )));
    }
    let m = map.len();
    let k = active_count(fraction, m);
    let mut order: Vec<usize> = (0..m).collect();
    let key = |i: usize| {
        let v = map.values[i];
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    order.sort_by(|&a, &b| {
        let (va, vb) = (key(a), key(b));
        vb.total_cmp(&va)
            .then_with(|| map.values[a].is_nan().cmp(&map.values[b].is_nan()))
            .then(map.voxel_index[a].cmp(&map.voxel_index[b]))
    });
    BinaryVolume::from_indices(map.dims, order[..k].iter().map(|&i| map.voxel_index[i]))
}

/// Face-connected components, largest first; equal sizes by lowest voxel.
pub fn label_components(mask: &BinaryVolume) -> Vec<Region> {
    let dims = mask.dims;
    let mut seen = vec![false; dims.len()];
    let mut regions = Vec::new();
    let mut queue = VecDeque::new();
    for start in mask.active_indices() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut voxels = Vec::new();
        while let Some(v) = queue.pop_front() {
            voxels.push(v);
            for n in dims.face_neighbors(v) {
                if mask.data[n] && !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
        voxels.sort_unstable();
        regions.push(region_from(dims, voxels));
    }
    regions.sort_by(|a, b| b.size().cmp(&a.size()).then(a.voxels[0].cmp(&b.voxels[0])));
    regions
}

fn region_from(dims: Dims, voxels: Vec<usize>) -> Region {
    let mut lo = [usize::MAX; 3];
    let mut hi = [0; 3];
    for &v in &voxels {
        let c = dims.coords(v);
        for k in 0..3 {
            lo[k] = lo[k].min(c[k]);
            hi[k] = hi[k].max(c[k]);
        }
    }
    Region {
        voxels,
        bbox_min: lo,
        bbox_max: hi,
    }
}

/// Region size over bounding-box volume.
pub fn complexity_ratio(region: &Region) -> f64 {
    let boxed: usize = region.extents().iter().product();
    region.size() as f64 / boxed as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSummary {
    pub n_regions: usize,
    pub n_singletons: usize,
    /// Median complexity over regions of two or more voxels.
    pub median_complexity: Option<f64>,
}

pub fn summarize_regions(regions: &[Region]) -> RegionSummary {
    let ratios: Vec<f64> = regions
        .iter()
        .filter(|r| r.size() > 1)
        .map(complexity_ratio)
        .collect();
    RegionSummary {
        n_regions: regions.len(),
        n_singletons: regions.iter().filter(|r| r.size() == 1).count(),
        median_complexity: (!ratios.is_empty()).then(|| Data::new(ratios).median()),
    }
}

pub fn region_summary(mask: &BinaryVolume) -> RegionSummary {
    summarize_regions(&label_components(mask))
}

/// CSV with one row per region: id, size, bounding box and complexity.
pub fn regions_csv(regions: &[Region]) -> String {
    let mut s = String::from("id,size,min_x,min_y,min_z,extent_x,extent_y,extent_z,complexity\n");
    for (id, r) in regions.iter().enumerate() {
        let e = r.extents();
        s.push_str(&format!(
            "{id},{},{},{},{},{},{},{},{}\n",
            r.size(),
            r.bbox_min[0],
            r.bbox_min[1],
            r.bbox_min[2],
            e[0],
            e[1],
            e[2],
            complexity_ratio(r)
        ));
    }
    s
}

/// `2 |A and B| / (|A| + |B|)`; one for two empty masks.
pub fn dice(a: &BinaryVolume, b: &BinaryVolume) -> Result<f64> {
    if a.dims != b.dims {
        return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", a.dims, b.dims)));
    }
    let both = a.data.iter().zip(&b.data).filter(|(x, y)| **x && **y).count();
    let total = a.count() + b.count();
    Ok(if total == 0 {
        1.0
    } else {
        2.0 * both as f64 / total as f64
    })
}

/// Voxel statistic that gets thresholded into regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    /// One-sample t statistic; zero-variance voxels score 0.
    T,
    /// Signed prevalence `p3 sign(mu)` of the fit before the estimability
    /// constraint.
    Prevalence,
}

impl std::str::FromStr for Statistic {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t" => Ok(Statistic::T),
            "prevalence" => Ok(Statistic::Prevalence),
            _ => Err(Error::InvalidOption(format!("unknown statistic '{s}'"))),
        }
    }
}

/// The per-voxel map of `statistic` for `table`.
pub fn statistic_map(table: &EffectsTable, statistic: Statistic, opts: &EmOptions) -> Result<VoxelMap> {
    let values: Vec<f64> = match statistic {
        Statistic::T => (0..table.n_voxels())
            .into_par_iter()
            .map(|v| t_test(table.row(v)).map_or(0.0, |t| t.statistic))
            .collect(),
        Statistic::Prevalence => (0..table.n_voxels())
            .into_par_iter()
            .map(|v| {
                fit_voxel_unconstrained(table.row(v), opts).map(|f| {
                    let u = f.params;
                    if u.mu() == 0.0 {
                        0.0
                    } else {
                        u.p3() * u.mu().signum()
                    }
                })
            })
            .collect::<Result<_>>()?,
    };
    VoxelMap::new(table.dims(), table.voxel_index().to_vec(), values)
}

/// Dice agreement of the thresholded maps of two subject groups.
pub fn halves_agreement(
    effects: &EffectsTable,
    a: &[usize],
    b: &[usize],
    statistic: Statistic,
    active_fraction: f64,
    opts: &EmOptions,
) -> Result<f64> {
    let ma = threshold_map(&statistic_map(&effects.select_subjects(a)?, statistic, opts)?, active_fraction)?;
    let mb = threshold_map(&statistic_map(&effects.select_subjects(b)?, statistic, opts)?, active_fraction)?;
    dice(&ma, &mb)
}

/// Dice agreement over `n_splits` seeded 50/50 subject splits.
pub fn split_half_agreement(
    effects: &EffectsTable,
    statistic: Statistic,
    active_fraction: f64,
    n_splits: usize,
    seed: u64,
    opts: &EmOptions,
) -> Result<Vec<f64>> {
    let n = effects.n_subjects();
    if n < MIN_SUBJECTS || !n.is_multiple_of(2) {
        return Err(Error::InvalidOption(format!(
            "split-half agreement needs an even number of at least {MIN_SUBJECTS} subjects, got {n}"
        )));
    }
    (0..n_splits as u64)
        .map(|s| {
            let (a, b) = split_subjects(n, seed, s);
            halves_agreement(effects, &a, &b, statistic, active_fraction, opts)
        })
        .collect()
}

/// CSV with columns `split,statistic,dice`.
pub fn agreement_csv(rows: &[(usize, Statistic, f64)]) -> String {
    let mut s = String::from("split,statistic,dice\n");
    for (k, stat, d) in rows {
        let name = match stat {
            Statistic::T => "t",
            Statistic::Prevalence => "prevalence",
        };
        s.push_str(&format!("{k},{name},{d}\n"));
    }
    s
}
