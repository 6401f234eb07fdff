//! 1-D convolution with "same" zero padding.
//!
//! Weights are `[out_ch, in_ch, filter_len]`. Batches are unrolled into an
//! im2col buffer and reduced with one matrix product per chunk of items.

use super::{gemm, LayerGrads, ParamGrad, Real, Shape3, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv1dSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub filter_len: usize,
    pub stride: usize,
}

impl Conv1dSpec {
    pub fn new(in_channels: usize, out_channels: usize, filter_len: usize, stride: usize) -> Self {
        Conv1dSpec {
            in_channels,
            out_channels,
            filter_len,
            stride,
        }
    }

    pub fn weight_len(&self) -> usize {
        self.out_channels * self.in_channels * self.filter_len
    }

    /// `ceil(time / stride)`.
    pub fn output_len(&self, time: usize) -> usize {
        time.div_ceil(self.stride)
    }

    /// Left padding and total padding for an input of `time` samples.
    ///
    /// The total is the smallest padding giving `ceil(time / stride)` outputs;
    /// the left side gets the floor of half of it.
    pub fn padding(&self, time: usize) -> (usize, usize) {
        let out = self.output_len(time);
        let total = ((out.saturating_sub(1)) * self.stride + self.filter_len).saturating_sub(time);
        (total / 2, total)
    }

    fn validate<T: Real>(&self, input: &Tensor<T>, weights: &[T]) -> Result<()> {
        if self.filter_len == 0 {
            return Err(Error::Contract("conv1d filter_len must be >= 1".into()));
        }
        if self.stride == 0 {
            return Err(Error::Contract("conv1d stride must be >= 1".into()));
        }
        let s = input.shape();
        if s.channels != self.in_channels {
            return Err(Error::Contract(format!(
                "conv1d expects {} input channels, input has {}",
                self.in_channels, s.channels
            )));
        }
        if s.time == 0 {
            return Err(Error::InvalidInput("conv1d input has a zero-length time axis".into()));
        }
        if weights.len() != self.weight_len() {
            return Err(Error::Contract(format!(
                "conv1d weights hold {} values, shape [{}, {}, {}] needs {}",
                weights.len(),
                self.out_channels,
                self.in_channels,
                self.filter_len,
                self.weight_len()
            )));
        }
        Ok(())
    }
}

/// Target im2col buffer size in entries, chosen to stay cache resident.
const COL_BUDGET: usize = 1 << 19;
/// Smallest useful number of columns per matrix product.
const MIN_COLUMNS: usize = 256;

/// A run of output columns: items `b0..b0+items`, output steps `t0..t1` of
/// each. Multi-item tiles always span whole items.
#[derive(Debug, Clone, Copy)]
struct Tile {
    b0: usize,
    items: usize,
    t0: usize,
    t1: usize,
}

impl Tile {
    fn steps(&self) -> usize {
        self.t1 - self.t0
    }

    fn columns(&self) -> usize {
        self.items * self.steps()
    }
}

fn tiles(spec: &Conv1dSpec, batch: usize, tout: usize) -> Vec<Tile> {
    let rows = spec.in_channels * spec.filter_len;
    let columns = (COL_BUDGET / rows.max(1)).max(MIN_COLUMNS);
    let mut out = Vec::new();
    if tout >= columns {
        for b in 0..batch {
            for t0 in (0..tout).step_by(columns) {
                out.push(Tile {
                    b0: b,
                    items: 1,
                    t0,
                    t1: (t0 + columns).min(tout),
                });
            }
        }
    } else {
        let per = (columns / tout).max(1);
        for b0 in (0..batch).step_by(per) {
            out.push(Tile {
                b0,
                items: per.min(batch - b0),
                t0: 0,
                t1: tout,
            });
        }
    }
    out
}

/// Output steps of `t0..t1` whose tap `j` lands inside the unpadded input,
/// and the input position read by the first of them.
fn tap_range(spec: &Conv1dSpec, time: usize, j: usize, t0: usize, t1: usize) -> Option<(usize, usize, usize)> {
    let (left, _) = spec.padding(time);
    let stride = spec.stride;
    let lo = left.saturating_sub(j).div_ceil(stride).max(t0);
    let hi = (time + left).saturating_sub(j).div_ceil(stride).min(t1);
    (lo < hi).then(|| (lo, hi, lo * stride + j - left))
}

/// Fills `col` (`in_ch·filter_len` rows × tile columns) so that
/// `col[(c·k + j), (i·steps + t − t0)] = x_padded[b0 + i, c, t·stride + j]`.
fn im2col<T: Real>(input: &Tensor<T>, spec: &Conv1dSpec, tile: Tile, col: &mut Vec<T>) {
    let time = input.shape().time;
    let (k, stride) = (spec.filter_len, spec.stride);
    let (n, steps) = (tile.columns(), tile.steps());
    col.clear();
    col.resize(spec.in_channels * k * n, T::zero());
    for i in 0..tile.items {
        for c in 0..spec.in_channels {
            let x = input.row(tile.b0 + i, c);
            for j in 0..k {
                let Some((lo, hi, p0)) = tap_range(spec, time, j, tile.t0, tile.t1) else {
                    continue;
                };
                let base = (c * k + j) * n + i * steps;
                let dst = &mut col[base + lo - tile.t0..base + hi - tile.t0];
                if stride == 1 {
                    dst.copy_from_slice(&x[p0..p0 + hi - lo]);
                } else {
                    for (d, &v) in dst.iter_mut().zip(x[p0..].iter().step_by(stride)) {
                        *d = v;
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates `col` back into `dx`.
fn col2im<T: Real>(col: &[T], spec: &Conv1dSpec, tile: Tile, dx: &mut Tensor<T>) {
    let time = dx.shape().time;
    let (k, stride) = (spec.filter_len, spec.stride);
    let (n, steps) = (tile.columns(), tile.steps());
    for i in 0..tile.items {
        let item = dx.item_mut(tile.b0 + i);
        for c in 0..spec.in_channels {
            let x = &mut item[c * time..(c + 1) * time];
            for j in 0..k {
                let Some((lo, hi, p0)) = tap_range(spec, time, j, tile.t0, tile.t1) else {
                    continue;
                };
                let base = (c * k + j) * n + i * steps;
                let src = &col[base + lo - tile.t0..base + hi - tile.t0];
                if stride == 1 {
                    for (d, &v) in x[p0..p0 + hi - lo].iter_mut().zip(src) {
                        *d += v;
                    }
                } else {
                    for (d, &v) in x[p0..].iter_mut().step_by(stride).zip(src) {
                        *d += v;
                    }
                }
            }
        }
    }
}

pub fn conv1d<T: Real>(input: &Tensor<T>, weights: &[T], bias: &[T], spec: Conv1dSpec) -> Result<Tensor<T>> {
    spec.validate(input, weights)?;
    if bias.len() != spec.out_channels {
        return Err(Error::Contract(format!(
            "conv1d bias holds {} values, expected {}",
            bias.len(),
            spec.out_channels
        )));
    }
    let s = input.shape();
    let tout = spec.output_len(s.time);
    let (cout, rows) = (spec.out_channels, spec.in_channels * spec.filter_len);
    let mut out = Tensor::zeros(Shape3::new(s.batch, cout, tout));
    let mut col = Vec::new();
    let mut y = Vec::new();
    for tile in tiles(&spec, s.batch, tout) {
        let (n, steps) = (tile.columns(), tile.steps());
        im2col(input, &spec, tile, &mut col);
        y.clear();
        y.resize(cout * n, T::zero());
        gemm(
            cout,
            rows,
            n,
            T::one(),
            weights,
            (rows, 1),
            &col,
            (n, 1),
            T::zero(),
            &mut y,
            (n, 1),
        );
        for i in 0..tile.items {
            let dst = out.item_mut(tile.b0 + i);
            for (o, &bo) in bias.iter().enumerate() {
                let src = &y[o * n + i * steps..o * n + (i + 1) * steps];
                for (d, &v) in dst[o * tout + tile.t0..o * tout + tile.t1].iter_mut().zip(src) {
                    *d = v + bo;
                }
            }
        }
    }
    out.debug_assert_finite("conv1d");
    Ok(out)
}

/// Gradients with respect to input, `weight` and `bias`.
pub fn conv1d_backward<T: Real>(
    input: &Tensor<T>,
    weights: &[T],
    spec: Conv1dSpec,
    output_grad: &Tensor<T>,
) -> Result<LayerGrads<Tensor<T>, T>> {
    spec.validate(input, weights)?;
    let s = input.shape();
    let tout = spec.output_len(s.time);
    let expected = Shape3::new(s.batch, spec.out_channels, tout);
    if output_grad.shape() != expected {
        return Err(Error::Contract(format!(
            "conv1d output grad has shape {}, expected {expected}",
            output_grad.shape()
        )));
    }
    let (cin, cout, k) = (spec.in_channels, spec.out_channels, spec.filter_len);
    let rows = cin * k;
    let mut dw = vec![T::zero(); spec.weight_len()];
    let mut db = vec![0f64; cout];
    let mut dx = Tensor::zeros(s);
    let mut col = Vec::new();
    let mut dy = Vec::new();
    for tile in tiles(&spec, s.batch, tout) {
        let (n, steps) = (tile.columns(), tile.steps());
        dy.clear();
        dy.resize(cout * n, T::zero());
        for i in 0..tile.items {
            let src = output_grad.item(tile.b0 + i);
            for o in 0..cout {
                dy[o * n + i * steps..o * n + (i + 1) * steps]
                    .copy_from_slice(&src[o * tout + tile.t0..o * tout + tile.t1]);
            }
        }
        for (o, acc) in db.iter_mut().enumerate() {
            *acc += dy[o * n..(o + 1) * n].iter().map(|v| v.as_f64()).sum::<f64>();
        }
        im2col(input, &spec, tile, &mut col);
        // dW += dY · colᵀ
        gemm(
            cout,
            n,
            rows,
            T::one(),
            &dy,
            (n, 1),
            &col,
            (1, n),
            T::one(),
            &mut dw,
            (rows, 1),
        );
        // dcol = Wᵀ · dY
        gemm(
            rows,
            cout,
            n,
            T::one(),
            weights,
            (1, rows),
            &dy,
            (n, 1),
            T::zero(),
            &mut col,
            (n, 1),
        );
        col2im(&col, &spec, tile, &mut dx);
    }
    dx.debug_assert_finite("conv1d_backward");
    Ok(LayerGrads {
        input_grad: dx,
        param_grads: vec![
            ParamGrad {
                name: "weight",
                shape: vec![cout, cin, k],
                data: dw,
            },
            ParamGrad {
                name: "bias",
                shape: vec![cout],
                data: db.into_iter().map(T::from_f64).collect(),
            },
        ],
    })
}
