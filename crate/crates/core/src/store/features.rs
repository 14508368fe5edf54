//! Turning per-layer activation maps into a single image descriptor:
//! spatial mean pooling, per-layer L2 normalization, concatenation.

use ndarray::{Array3, Axis};

use crate::error::{Error, Result};

/// One layer's activations laid out as `(height, width, channels)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub name: String,
    pub values: Array3<f64>,
}

impl FeatureMap {
    pub fn new(name: impl Into<String>, values: Array3<f64>) -> Result<Self> {
        let (h, w, c) = values.dim();
        if h == 0 || w == 0 || c == 0 {
            return Err(Error::invalid(format!(
                "feature map has empty dimension ({h}x{w}x{c})"
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("feature map"));
        }
        Ok(Self {
            name: name.into(),
            values,
        })
    }

    pub fn channels(&self) -> usize {
        self.values.dim().2
    }
}

/// Layers of one image in extraction order. That order fixes the segment
/// order of the concatenated descriptor.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureMapStack {
    pub layers: Vec<FeatureMap>,
}

impl FeatureMapStack {
    pub fn new(layers: Vec<FeatureMap>) -> Self {
        Self { layers }
    }

    pub fn layer_names(&self) -> Vec<&str> {
        self.layers.iter().map(|l| l.name.as_str()).collect()
    }
}

/// Mean over all spatial positions, per channel, for every layer.
pub fn pool_spatial(maps: &FeatureMapStack) -> Result<Vec<Vec<f64>>> {
    if maps.layers.is_empty() {
        return Err(Error::NoLayers);
    }
    maps.layers
        .iter()
        .map(|layer| {
            let (h, w, c) = layer.values.dim();
            let flat = layer
                .values
                .view()
                .into_shape_with_order((h * w, c))
                .map_err(|e| Error::invalid(e.to_string()))?;
            Ok(flat
                .mean_axis(Axis(0))
                .expect("spatial extent is non-empty")
                .to_vec())
        })
        .collect()
}

pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    if !v.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("vector"));
    }
    // Scale first so the squared sum cannot overflow or flush to zero.
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let norm = scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt();
    Ok(v.iter().map(|x| x / norm).collect())
}

pub fn concat_layers(vectors: &[Vec<f64>]) -> Result<Vec<f64>> {
    if vectors.is_empty() {
        return Err(Error::NoLayers);
    }
    Ok(vectors.concat())
}

/// Full descriptor for one image: pool, normalize each layer, concatenate.
///
/// With `renormalize` the concatenation is normalized once more; without it
/// the result has norm `sqrt(layer count)`.
pub fn describe(maps: &FeatureMapStack, renormalize: bool) -> Result<Vec<f64>> {
    let pooled = pool_spatial(maps)?;
    let normalized = pooled
        .iter()
        .map(|v| l2_normalize(v))
        .collect::<Result<Vec<_>>>()?;
    let out = concat_layers(&normalized)?;
    if renormalize {
        l2_normalize(&out)
    } else {
        Ok(out)
    }
}
