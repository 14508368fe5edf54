use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Row norms and the row-normalized matrix. Zero rows stay zero.
pub(crate) fn normalize_rows(a: ArrayView2<'_, f64>) -> (Array1<f64>, Array2<f64>) {
    let norms = a.map_axis(Axis(1), |row| row.dot(&row).sqrt());
    let mut unit = a.to_owned();
    for (mut row, &n) in unit.rows_mut().into_iter().zip(norms.iter()) {
        if n > 0.0 {
            row /= n;
        }
    }
    (norms, unit)
}

/// `S[i][j] = cos(left_i, right_j)`. A zero row has similarity 0 with
/// everything.
pub fn similarity_matrix(
    left: ArrayView2<'_, f64>,
    right: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    if left.ncols() != right.ncols() {
        return Err(Error::DimensionMismatch {
            expected: left.ncols(),
            actual: right.ncols(),
        });
    }
    let (_, l) = normalize_rows(left);
    let (_, r) = normalize_rows(right);
    let mut s = l.dot(&r.t());
    // Rounding can nudge |cos| a hair past 1.
    s.mapv_inplace(|v| v.clamp(-1.0, 1.0));
    Ok(s)
}
