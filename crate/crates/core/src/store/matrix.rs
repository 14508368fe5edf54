use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// An `n × d` matrix of descriptors, one row per image.
///
/// Always non-empty and finite. Values are held in `f64`; the on-disk
/// representation is `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    data: Array2<f64>,
}

impl EmbeddingMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (rows, cols) = data.dim();
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "empty embedding matrix ({rows} x {cols})"
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("embedding matrix"));
        }
        Ok(Self { data })
    }

    pub fn from_shape_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        let expected = rows.checked_mul(cols).ok_or(Error::DimensionOverflow {
            rows: rows as u64,
            cols: cols as u64,
        })?;
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: values.len(),
            });
        }
        let data = Array2::from_shape_vec((rows, cols), values)
            .map_err(|e| Error::invalid(e.to_string()))?;
        Self::new(data)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    actual: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::from_shape_vec(rows.len(), cols, values)
    }

    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }

    /// Rows at `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("row selection is empty"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n_rows()) {
            return Err(Error::invalid(format!(
                "row index {bad} out of range for {} rows",
                self.n_rows()
            )));
        }
        Ok(Self {
            data: self.data.select(Axis(0), indices),
        })
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.n_cols() != other.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols(),
                actual: other.n_cols(),
            });
        }
        let data = ndarray::concatenate(Axis(0), &[self.data.view(), other.data.view()])
            .map_err(|e| Error::invalid(e.to_string()))?;
        Ok(Self { data })
    }
}

impl TryFrom<Array2<f64>> for EmbeddingMatrix {
    type Error = Error;

    fn try_from(data: Array2<f64>) -> Result<Self> {
        Self::new(data)
    }
}
