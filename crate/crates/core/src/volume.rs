//! Grid geometry shared by every module.
//!
//! Voxels are addressed by a zero-based linear index with x varying fastest:
//! `index = x + nx * (y + ny * z)`. A 2D image is a grid with `nz == 1`.

use crate::error::{Error, Result};

/// Extents of a voxel grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::DimensionMismatch(format!(
                "grid extents must be positive, got {nx}x{ny}x{nz}"
            )));
        }
        nx.checked_mul(ny)
            .and_then(|v| v.checked_mul(nz))
            .ok_or_else(|| Error::DimensionMismatch("grid too large".into()))?;
        Ok(Dims { nx, ny, nz })
    }

    /// Convenience for a 2D grid.
    pub fn plane(nx: usize, ny: usize) -> Result<Self> {
        Self::new(nx, ny, 1)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let x = index % self.nx;
        let rest = index / self.nx;
        [x, rest % self.ny, rest / self.ny]
    }

    /// Face neighbours of a voxel (up to 6; 4 in a plane).
    pub fn face_neighbors(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        let [x, y, z] = self.coords(index);
        let ext = self.as_array();
        let c = [x, y, z];
        (0..3).flat_map(move |axis| {
            let lo = (c[axis] > 0).then(|| {
                let mut n = c;
                n[axis] -= 1;
                n
            });
            let hi = (c[axis] + 1 < ext[axis]).then(|| {
                let mut n = c;
                n[axis] += 1;
                n
            });
            lo.into_iter()
                .chain(hi)
                .map(move |n| self.index(n[0], n[1], n[2]))
        })
    }
}

/// A real-valued map defined on the in-mask voxels of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelMap {
    pub dims: Dims,
    pub voxel_index: Vec<usize>,
    pub values: Vec<f64>,
}

impl VoxelMap {
    pub fn new(dims: Dims, voxel_index: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if voxel_index.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: voxel_index.len(),
                right: values.len(),
            });
        }
        check_voxel_index(&dims, &voxel_index)?;
        Ok(VoxelMap {
            dims,
            voxel_index,
            values,
        })
    }

    /// Expands to a full grid, filling out-of-mask voxels with `fill`.
    pub fn to_dense(&self, fill: f64) -> Vec<f64> {
        let mut out = vec![fill; self.dims.len()];
        for (&i, &v) in self.voxel_index.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A binary volume over the full grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryVolume {
    pub dims: Dims,
    pub data: Vec<bool>,
}

impl BinaryVolume {
    pub fn empty(dims: Dims) -> Self {
        BinaryVolume {
            dims,
            data: vec![false; dims.len()],
        }
    }

    pub fn from_indices(dims: Dims, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut v = Self::empty(dims);
        for i in indices {
            if i >= dims.len() {
                return Err(Error::IndexOutOfRange(format!(
                    "voxel {i} outside grid of {} voxels",
                    dims.len()
                )));
            }
            v.data[i] = true;
        }
        Ok(v)
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn active_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }
}

/// Checks that linear indices lie in the grid and are strictly increasing.
pub(crate) fn check_voxel_index(dims: &Dims, voxel_index: &[usize]) -> Result<()> {
    let n = dims.len();
    for (k, &i) in voxel_index.iter().enumerate() {
        if i >= n {
            return Err(Error::InvariantViolation(format!(
                "voxel index {i} is not below grid size {n}"
            )));
        }
        if k > 0 {
            let prev = voxel_index[k - 1];
            if i == prev {
                return Err(Error::InvariantViolation(format!(
                    "duplicate voxel index {i}"
                )));
            }
            if i < prev {
                return Err(Error::InvariantViolation(format!(
                    "voxel indices not strictly increasing ({prev} then {i})"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let d = Dims::new(52, 30, 64).unwrap();
        for i in [0, 1, 51, 52, 1559, 1560, d.len() - 1] {
            let [x, y, z] = d.coords(i);
            assert_eq!(d.index(x, y, z), i);
        }
        assert_eq!(d.index(1, 0, 0), 1);
        assert_eq!(d.index(0, 1, 0), 52);
        assert_eq!(d.index(0, 0, 1), 52 * 30);
    }

    #[test]
    fn neighbors_in_plane_and_volume() {
        let p = Dims::plane(3, 3).unwrap();
        let mut n: Vec<_> = p.face_neighbors(p.index(1, 1, 0)).collect();
        n.sort();
        assert_eq!(n, vec![1, 3, 5, 7]);
        assert_eq!(p.face_neighbors(0).count(), 2);

        let v = Dims::new(3, 3, 3).unwrap();
        assert_eq!(v.face_neighbors(v.index(1, 1, 1)).count(), 6);
        assert_eq!(v.face_neighbors(0).count(), 3);
    }

    #[test]
    fn rejects_bad_indices() {
        let d = Dims::plane(2, 2).unwrap();
        assert!(check_voxel_index(&d, &[0, 1, 3]).is_ok());
        assert!(check_voxel_index(&d, &[0, 4]).is_err());
        assert!(check_voxel_index(&d, &[1, 1]).is_err());
        assert!(check_voxel_index(&d, &[2, 1]).is_err());
        assert!(Dims::new(0, 1, 1).is_err());
    }
}
