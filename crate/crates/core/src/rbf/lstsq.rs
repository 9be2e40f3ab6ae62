use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix::RowMatrix;

/// Minimum-norm least-squares solution of `design * w ~ targets` via the SVD pseudo-inverse.
///
/// Singular values below `max(rows, cols) * eps * sigma_max` are treated as zero, so a
/// rank-deficient design still yields the minimum-norm solution.
pub fn lstsq_min_norm(design: &RowMatrix, targets: &[f64]) -> Result<Vec<f64>> {
    let rows = design.nrows();
    let cols = design.ncols();
    if rows == 0 {
        return Err(Error::InvalidArgument("least squares needs at least one row".into()));
    }
    if targets.len() != rows {
        return Err(Error::LengthMismatch { left: rows, right: targets.len() });
    }
    if design.as_slice().iter().chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least-squares input"));
    }
    let a = DMatrix::from_row_slice(rows, cols, design.as_slice());
    let b = DVector::from_column_slice(targets);
    let svd = a.svd(true, true);
    let sigma_max = svd.singular_values.max();
    if sigma_max == 0.0 {
        return Ok(vec![0.0; cols]);
    }
    let tol = rows.max(cols) as f64 * f64::EPSILON * sigma_max;
    let w = svd.solve(&b, tol).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(w.iter().copied().collect())
}

/// Output-layer weights for a design whose last column is the constant bias input.
///
/// Returns `S + 1` values: the `S` unit weights followed by the output bias.
pub fn solve_output_layer(design: &RowMatrix, targets: &[f64]) -> Result<Vec<f64>> {
    lstsq_min_norm(design, targets)
}
