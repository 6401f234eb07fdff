//! Dense numeric kernels over `(batch, channels, time)` arrays.
//!
//! Every kernel is generic over [`Real`] so the same code path runs in `f32`
//! for training and in `f64` for finite-difference gradient checks. Forward
//! kernels return what their backward counterpart needs; there is no graph.

mod activation;
mod conv;
mod dense;
mod gemm;
pub mod gradcheck;
mod loss;
mod norm;
mod pool;

pub use activation::{dropout, dropout_backward, relu, relu_backward, DropoutMask};
pub use conv::{conv1d, conv1d_backward, Conv1dSpec};
pub use dense::{dense, dense_backward};
pub use gemm::gemm;
pub use loss::{log_softmax_rows, softmax_xent};
pub use norm::{batchnorm, batchnorm_backward, BatchNormCache, RunningStats};
pub use pool::{maxpool1d, maxpool1d_backward};

use std::fmt::Debug;
use std::ops::{AddAssign, MulAssign, SubAssign};

use crate::error::{Error, Result};

/// Floating-point element type accepted by the kernels.
pub trait Real:
    num_traits::Float + Default + Debug + Send + Sync + AddAssign + SubAssign + MulAssign + std::iter::Sum + 'static
{
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;

    /// `c ← alpha·a·b + beta·c` on strided row/column views.
    ///
    /// # Safety
    /// Every index reachable through the given dimensions and strides must be
    /// in bounds for the respective pointer.
    #[allow(clippy::too_many_arguments)]
    unsafe fn raw_gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Real for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
    unsafe fn raw_gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
    unsafe fn raw_gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// Train or inference semantics for batch-norm and dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape3 {
    pub batch: usize,
    pub channels: usize,
    pub time: usize,
}

impl Shape3 {
    pub const fn new(batch: usize, channels: usize, time: usize) -> Self {
        Shape3 { batch, channels, time }
    }

    pub const fn len(&self) -> usize {
        self.batch * self.channels * self.time
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Shape3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.batch, self.channels, self.time)
    }
}

/// Contiguous row-major `(batch, channels, time)` array, batch outermost.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Shape3,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: Shape3, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::Contract(format!(
                "tensor of shape {shape} needs {} values, got {}",
                shape.len(),
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Shape3) -> Self {
        Tensor {
            shape,
            data: vec![T::zero(); shape.len()],
        }
    }

    pub fn from_fn(shape: Shape3, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for b in 0..shape.batch {
            for c in 0..shape.channels {
                for t in 0..shape.time {
                    data.push(f(b, c, t));
                }
            }
        }
        Tensor { shape, data }
    }

    pub fn shape(&self) -> Shape3 {
        self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// `(channels, time)` block of one batch item.
    pub fn item(&self, b: usize) -> &[T] {
        let n = self.shape.channels * self.shape.time;
        &self.data[b * n..(b + 1) * n]
    }

    pub fn item_mut(&mut self, b: usize) -> &mut [T] {
        let n = self.shape.channels * self.shape.time;
        &mut self.data[b * n..(b + 1) * n]
    }

    pub fn row(&self, b: usize, c: usize) -> &[T] {
        let t = self.shape.time;
        let start = (b * self.shape.channels + c) * t;
        &self.data[start..start + t]
    }

    pub fn get(&self, b: usize, c: usize, t: usize) -> T {
        self.data[(b * self.shape.channels + c) * self.shape.time + t]
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &Tensor<T>) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Contract(format!(
                "cannot add tensors of shapes {} and {}",
                self.shape, other.shape
            )));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: T) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Same values converted to another element type.
    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }

    pub(crate) fn debug_assert_finite(&self, kernel: &str) {
        debug_assert!(self.all_finite(), "{kernel} produced a non-finite value");
    }
}

/// Row-major 2-D array: one row per (batch item, time step) for the dense head.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T = f32> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Contract(format!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn scale(&mut self, factor: T) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }
}

/// Gradient of one named parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrad<T> {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

/// Output of a layer's backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads<X, T> {
    pub input_grad: X,
    pub param_grads: Vec<ParamGrad<T>>,
}

impl<X, T> LayerGrads<X, T> {
    pub fn param(&self, name: &str) -> Option<&ParamGrad<T>> {
        self.param_grads.iter().find(|g| g.name == name)
    }
}

/// Time-major `(batch, channels, time)` → `(batch·time, channels)` rows.
pub fn to_rows<T: Real>(x: &Tensor<T>) -> Matrix<T> {
    let s = x.shape();
    let mut out = Matrix::zeros(s.batch * s.time, s.channels);
    for b in 0..s.batch {
        for c in 0..s.channels {
            let row = x.row(b, c);
            for (t, &v) in row.iter().enumerate() {
                out.data[(b * s.time + t) * s.channels + c] = v;
            }
        }
    }
    out
}

/// Inverse of [`to_rows`].
pub fn from_rows<T: Real>(m: &Matrix<T>, batch: usize, time: usize) -> Result<Tensor<T>> {
    if m.rows() != batch * time {
        return Err(Error::Contract(format!(
            "{} rows cannot be split into batch {batch} x time {time}",
            m.rows()
        )));
    }
    let ch = m.cols();
    let shape = Shape3::new(batch, ch, time);
    let mut out = Tensor::zeros(shape);
    for b in 0..batch {
        for t in 0..time {
            let row = m.row(b * time + t);
            for (c, &v) in row.iter().enumerate() {
                out.data[(b * ch + c) * time + t] = v;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_checks_length() {
        assert!(Tensor::<f32>::new(Shape3::new(1, 2, 3), vec![0.0; 5]).is_err());
        assert!(Tensor::<f32>::new(Shape3::new(1, 2, 3), vec![0.0; 6]).is_ok());
    }

    #[test]
    fn rows_round_trip() {
        let x = Tensor::<f64>::from_fn(Shape3::new(2, 3, 4), |b, c, t| (b * 100 + c * 10 + t) as f64);
        let m = to_rows(&x);
        assert_eq!(m.row(5), &[101.0, 111.0, 121.0]);
        assert_eq!(from_rows(&m, 2, 4).unwrap(), x);
    }
}
