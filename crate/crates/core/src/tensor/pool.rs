use super::{Real, Shape3, Tensor};
use crate::error::{Error, Result};

/// Max pooling with "same" padding: `ceil(time / stride)` outputs, edge
/// windows take the max of the samples they actually cover. Returns the flat
/// input index of each maximum (ties resolve to the lowest index).
pub fn maxpool1d<T: Real>(input: &Tensor<T>, pool: usize, stride: usize) -> Result<(Tensor<T>, Vec<usize>)> {
    if pool == 0 || stride == 0 {
        return Err(Error::Contract(format!(
            "maxpool needs pool >= 1 and stride >= 1, got pool {pool}, stride {stride}"
        )));
    }
    let s = input.shape();
    if s.time == 0 {
        return Err(Error::InvalidInput("maxpool input has a zero-length time axis".into()));
    }
    let tout = s.time.div_ceil(stride);
    let total = ((tout - 1) * stride + pool).saturating_sub(s.time);
    let left = total / 2;
    let mut out = Tensor::zeros(Shape3::new(s.batch, s.channels, tout));
    let mut indices = Vec::with_capacity(out.data().len());
    let data = input.data();
    for row in 0..s.batch * s.channels {
        let base = row * s.time;
        for t in 0..tout {
            let start = (t * stride).saturating_sub(left);
            let end = (t * stride + pool - left).min(s.time);
            let mut best = base + start;
            for i in base + start + 1..base + end {
                if data[i] > data[best] {
                    best = i;
                }
            }
            out.data_mut()[row * tout + t] = data[best];
            indices.push(best);
        }
    }
    Ok((out, indices))
}

/// Routes each output gradient to the input position that won its window.
pub fn maxpool1d_backward<T: Real>(
    indices: &[usize],
    output_grad: &Tensor<T>,
    input_shape: Shape3,
) -> Result<Tensor<T>> {
    if indices.len() != output_grad.data().len() {
        return Err(Error::Contract("maxpool indices do not match gradient size".into()));
    }
    let mut dx = Tensor::zeros(input_shape);
    for (&i, &g) in indices.iter().zip(output_grad.data()) {
        let slot = dx
            .data_mut()
            .get_mut(i)
            .ok_or_else(|| Error::Contract(format!("maxpool index {i} outside input")))?;
        *slot += g;
    }
    Ok(dx)
}
