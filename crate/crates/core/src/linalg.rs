//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};

/// Condition number above which a matrix is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Builds an n×p matrix from p equally long columns.
pub fn matrix_from_columns(columns: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let p = columns.len();
    let n = columns.first().map_or(0, Vec::len);
    if let Some(bad) = columns.iter().find(|c| c.len() != n) {
        return Err(CoreError::LengthMismatch(n, bad.len()));
    }
    Ok(DMatrix::from_fn(n, p, |i, j| columns[j][i]))
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues in descending order.
pub fn sorted_symmetric_eigen(matrix: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eigen = matrix.clone().symmetric_eigen();
    let n = eigen.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eigen.eigenvalues[i]));
    let vectors = DMatrix::from_fn(n, n, |r, c| eigen.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Inverse of a symmetric positive definite matrix, rejecting ill-conditioned input.
pub fn checked_spd_inverse(matrix: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eigen = matrix.clone().symmetric_eigen();
    let max = eigen.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let min = eigen.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    if !(min > 0.0) || max / min > MAX_CONDITION {
        return Err(CoreError::SingularMatrix);
    }
    matrix
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(CoreError::SingularMatrix)
}

/// Column means and sample (n−1) standard deviations.
pub fn column_moments(data: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = data.nrows() as f64;
    data.column_iter()
        .map(|col| {
            let mean = col.sum() / n;
            let ss: f64 = col.iter().map(|x| (x - mean).powi(2)).sum();
            (mean, (ss / (n - 1.0)).sqrt())
        })
        .unzip()
}

/// Column-wise z-scores using sample standard deviations.
pub fn standardize(data: &DMatrix<f64>) -> DMatrix<f64> {
    let (means, sds) = column_moments(data);
    DMatrix::from_fn(data.nrows(), data.ncols(), |i, j| {
        (data[(i, j)] - means[j]) / sds[j]
    })
}

/// Serde adapter storing a matrix as a list of rows.
pub mod serde_rows {
    use nalgebra::DMatrix;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(
        matrix: &DMatrix<f64>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = matrix
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        rows.serialize(serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<DMatrix<f64>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(deserializer)?;
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_is_sorted_descending() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 1.0]);
        let (values, vectors) = sorted_symmetric_eigen(&m);
        assert_eq!(values.as_slice(), &[5.0, 2.0, 1.0]);
        assert!((vectors[(1, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(checked_spd_inverse(&m), Err(CoreError::SingularMatrix));
    }
}
