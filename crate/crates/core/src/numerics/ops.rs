//! Scalar and array kernels shared by the tape and by inference code.

use super::tensor::Tensor;
use crate::error::{Error, Result};

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_CUBIC: f64 = 0.044_715;

/// GELU, tanh approximation.
#[inline]
pub fn gelu(x: f64) -> f64 {
    let inner = SQRT_2_OVER_PI * (x + GELU_CUBIC * x * x * x);
    0.5 * x * (1.0 + inner.tanh())
}

#[inline]
pub fn gelu_derivative(x: f64) -> f64 {
    let inner = SQRT_2_OVER_PI * (x + GELU_CUBIC * x * x * x);
    let t = inner.tanh();
    let d_inner = SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_CUBIC * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * d_inner
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Checks that `segments` is non-decreasing and as long as `len`.
pub fn validate_segments(len: usize, segments: &[usize]) -> Result<()> {
    if segments.len() != len {
        return Err(Error::Shape(format!(
            "{len} values but {} segment ids",
            segments.len()
        )));
    }
    if let Some(i) = segments.windows(2).position(|w| w[0] > w[1]) {
        return Err(Error::Invalid(format!(
            "segment ids must be sorted; position {} has {} after {}",
            i + 1,
            segments[i + 1],
            segments[i]
        )));
    }
    Ok(())
}

/// Softmax applied independently within each run of equal segment ids.
pub fn segmented_softmax(values: &[f64], segments: &[usize]) -> Result<Vec<f64>> {
    validate_segments(values.len(), segments)?;
    let mut out = vec![0.0; values.len()];
    segmented_softmax_into(values, segments, &mut out);
    Ok(out)
}

pub(crate) fn segmented_softmax_into(values: &[f64], segments: &[usize], out: &mut [f64]) {
    let mut start = 0;
    while start < values.len() {
        let mut end = start + 1;
        while end < values.len() && segments[end] == segments[start] {
            end += 1;
        }
        let max = values[start..end]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for i in start..end {
            let e = (values[i] - max).exp();
            out[i] = e;
            total += e;
        }
        for o in &mut out[start..end] {
            *o /= total;
        }
        start = end;
    }
}

/// Valid (no padding, stride 1) convolution of an `l × 4` one-hot matrix
/// with one `k × 4` filter.
pub fn conv1d_single_filter(x: &Tensor, kernel: &Tensor, bias: f64) -> Result<Vec<f64>> {
    if x.cols() != kernel.cols() {
        return Err(Error::Shape(format!(
            "input has {} channels, kernel has {}",
            x.cols(),
            kernel.cols()
        )));
    }
    if x.rows() < kernel.rows() {
        return Err(Error::Shape(format!(
            "sequence length {} shorter than kernel height {}",
            x.rows(),
            kernel.rows()
        )));
    }
    Ok(conv1d_flat(
        x.data(),
        kernel.data(),
        kernel.rows(),
        kernel.cols(),
        bias,
    ))
}

/// Convolution over a flattened row-major `l × channels` window buffer.
pub(crate) fn conv1d_flat(
    x: &[f64],
    kernel: &[f64],
    k: usize,
    channels: usize,
    bias: f64,
) -> Vec<f64> {
    let l = x.len() / channels;
    let width = k * channels;
    (0..=l - k)
        .map(|i| {
            let window = &x[i * channels..i * channels + width];
            bias + window.iter().zip(kernel).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}
