use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Loss value and gradient with respect to the similarity matrix.
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    pub left_to_right: f64,
    pub right_to_left: f64,
    /// `∂loss/∂S`, same shape as `S`.
    pub grad: Array2<f64>,
}

/// Cross-entropy of `softmax(σ·S_i)` against target `i`, averaged over the
/// rows of `scores`, with its gradient
/// `(σ/n)·(softmax(σ·S_i)[j] − [i = j])`.
pub fn directed_loss(scores: ArrayView2<'_, f64>, sigma: f64) -> Result<(f64, Array2<f64>)> {
    let n = scores.nrows();
    if n == 0 || n != scores.ncols() {
        return Err(Error::invalid(format!(
            "similarity matrix must be square and non-empty, got {:?}",
            scores.dim()
        )));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!(
            "temperature must be positive, got {sigma}"
        )));
    }
    let scale = sigma / n as f64;
    let mut grad = Array2::zeros((n, n));
    let mut total = 0.0;
    for (i, (row, mut g)) in scores.rows().into_iter().zip(grad.rows_mut()).enumerate() {
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(sigma * v));
        if !max.is_finite() {
            return Err(Error::NonFinite("similarity matrix"));
        }
        let mut others = 0.0;
        for (j, (gj, &v)) in g.iter_mut().zip(row.iter()).enumerate() {
            let e = (sigma * v - max).exp();
            *gj = e;
            if j != i {
                others += e;
            }
        }
        let target = g[i];
        let denom = target + others;
        // ln_1p keeps tiny losses from rounding to zero when the target wins.
        total += if target == 1.0 {
            others.ln_1p()
        } else {
            max - sigma * row[i] + denom.ln()
        };
        g.mapv_inplace(|e| scale * e / denom);
        g[i] -= scale;
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("similarity matrix"));
    }
    Ok((total / n as f64, grad))
}

/// Mean of the left→right (rows) and right→left (columns) cross-entropies.
pub fn loss(scores: ArrayView2<'_, f64>, sigma: f64) -> Result<LossOutput> {
    let (l2r, g_rows) = directed_loss(scores, sigma)?;
    let (r2l, g_cols) = directed_loss(scores.t(), sigma)?;
    let grad = (g_rows + &g_cols.t()) * 0.5;
    Ok(LossOutput {
        loss: 0.5 * (l2r + r2l),
        left_to_right: l2r,
        right_to_left: r2l,
        grad,
    })
}
