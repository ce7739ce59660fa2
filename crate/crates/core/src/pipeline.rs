//! Whole-table fitting and testing.
//!
//! Voxels are processed with a parallel map whose results are gathered in
//! voxel order, so outputs never depend on the number of worker threads.

use rayon::prelude::*;

use crate::em::{fit_voxel, EmOptions, VoxelFit, MIN_OBSERVATIONS};
use crate::error::{Error, Result};
use crate::inference::{bh_adjust, signed_prevalence_map, signed_rank_test, t_test, FdrOutcome, TestResult};
use crate::model::EffectsTable;
use crate::volume::VoxelMap;

/// Fits every voxel of `table`.
pub fn fit_table(table: &EffectsTable, opts: &EmOptions) -> Result<Vec<VoxelFit>> {
    opts.validate()?;
    if table.n_subjects() < MIN_OBSERVATIONS {
        return Err(Error::DataTooShort {
            got: table.n_subjects(),
            min: MIN_OBSERVATIONS,
        });
    }
    (0..table.n_voxels())
        .into_par_iter()
        .map(|v| fit_voxel(table.row(v), opts))
        .collect()
}

/// Signed-rank test per voxel. Voxels with too few non-zero effects get
/// `None`.
pub fn signed_rank_table(table: &EffectsTable) -> Vec<Option<TestResult>> {
    (0..table.n_voxels())
        .into_par_iter()
        .map(|v| signed_rank_test(table.row(v)).ok())
        .collect()
}

/// One-sample t statistic per voxel; zero-variance voxels get `None`.
pub fn t_table(table: &EffectsTable) -> Vec<Option<TestResult>> {
    (0..table.n_voxels())
        .into_par_iter()
        .map(|v| t_test(table.row(v)).ok())
        .collect()
}

/// p-values for BH; untestable voxels count as p = 1.
pub fn p_values(tests: &[Option<TestResult>]) -> Vec<f64> {
    tests
        .iter()
        .map(|t| t.map_or(1.0, |t| t.p_value))
        .collect()
}

/// Fits, signed-rank tests, FDR adjustment and the masked map for a table.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub fits: Vec<VoxelFit>,
    pub tests: Vec<Option<TestResult>>,
    pub fdr: FdrOutcome,
    pub signed_prevalence: Vec<f64>,
}

impl Analysis {
    pub fn run(table: &EffectsTable, opts: &EmOptions, q_level: f64) -> Result<Self> {
        let fits = fit_table(table, opts)?;
        Self::from_fits(table, fits, q_level)
    }

    /// Testing stage for already fitted voxels.
    pub fn from_fits(table: &EffectsTable, fits: Vec<VoxelFit>, q_level: f64) -> Result<Self> {
        if fits.len() != table.n_voxels() {
            return Err(Error::LengthMismatch {
                left: fits.len(),
                right: table.n_voxels(),
            });
        }
        let tests = signed_rank_table(table);
        let fdr = bh_adjust(&p_values(&tests), q_level)?;
        let signed_prevalence = signed_prevalence_map(&fits, &fdr)?;
        Ok(Analysis {
            fits,
            tests,
            fdr,
            signed_prevalence,
        })
    }

    /// Constrained prevalence estimates, unmasked.
    pub fn prevalence(&self) -> Vec<f64> {
        self.fits.iter().map(|f| f.params.p3()).collect()
    }

    pub fn signed_prevalence_map(&self, table: &EffectsTable) -> VoxelMap {
        VoxelMap {
            dims: table.dims(),
            voxel_index: table.voxel_index().to_vec(),
            values: self.signed_prevalence.clone(),
        }
    }
}
