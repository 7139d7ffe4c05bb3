//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector, SMatrix};

/// Reciprocal condition threshold below which a matrix counts as singular.
pub const RCOND_SINGULAR: f64 = 1e-13;

/// Inverse of a square matrix, or `None` when it is numerically singular.
pub fn checked_inverse<const N: usize>(m: &SMatrix<f64, N, N>) -> Option<SMatrix<f64, N, N>> {
    let sv = DMatrix::from_column_slice(N, N, m.as_slice()).singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0) || !(min / max > RCOND_SINGULAR) {
        return None;
    }
    m.try_inverse()
}

/// Diagonal entries below this fraction of the largest one are not rescaled,
/// so a column that is zero up to round-off still shows up as a null direction.
pub const WEAK_COLUMN_RATIO: f64 = 1e-18;

/// Symmetric positive semi-definite normal matrix analysed after Jacobi
/// (column-norm) scaling, which removes the unit disparity between columns.
pub struct ScaledNormal {
    pub scale: DVector<f64>,
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl ScaledNormal {
    pub fn new(normal: &DMatrix<f64>) -> Self {
        let n = normal.nrows();
        let max_d = (0..n).map(|i| normal[(i, i)]).fold(0.0, f64::max);
        let scale = DVector::from_fn(n, |i, _| {
            let d = normal[(i, i)];
            if d > WEAK_COLUMN_RATIO * max_d {
                1.0 / d.sqrt()
            } else if max_d > 0.0 {
                1.0 / max_d.sqrt()
            } else {
                1.0
            }
        });
        let scaled = DMatrix::from_fn(n, n, |i, j| normal[(i, j)] * scale[i] * scale[j]);
        let eig = scaled.symmetric_eigen();
        Self {
            scale,
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        }
    }

    pub fn rcond(&self) -> f64 {
        let max = self.eigenvalues.max();
        let min = self.eigenvalues.min();
        if max > 0.0 {
            min.max(0.0) / max
        } else {
            0.0
        }
    }

    /// Unit directions (in unscaled parameter space) with negligible information.
    pub fn null_directions(&self, rcond: f64) -> Vec<Vec<f64>> {
        let max = self.eigenvalues.max().max(0.0);
        (0..self.eigenvalues.len())
            .filter(|&i| !(self.eigenvalues[i] > rcond * max) || max == 0.0)
            .map(|i| {
                let v = self.eigenvectors.column(i).component_mul(&self.scale);
                let norm = v.norm();
                v.iter().map(|x| x / norm).collect()
            })
            .collect()
    }

    /// Inverse of the original (unscaled) normal matrix.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.scale.len();
        let inv_eig = DVector::from_fn(n, |i, _| 1.0 / self.eigenvalues[i]);
        let core = &self.eigenvectors * DMatrix::from_diagonal(&inv_eig) * self.eigenvectors.transpose();
        DMatrix::from_fn(n, n, |i, j| core[(i, j)] * self.scale[i] * self.scale[j])
    }
}

/// Condition number (2-norm) of a rectangular matrix.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}
