//! Ordered, named parameter arrays and their gradients.

use crate::error::{Error, Result};
use crate::tensor::Real;

/// Learnable arrays receive gradients; running arrays are batch-norm state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Learnable,
    Running,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: ParamKind,
    pub data: Vec<T>,
}

impl<T> NamedArray<T> {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Parameters<T = f32> {
    arrays: Vec<NamedArray<T>>,
}

impl<T: Real> Parameters<T> {
    pub(crate) fn push(&mut self, name: String, shape: Vec<usize>, kind: ParamKind, fill: T) -> usize {
        let len = shape.iter().product();
        self.arrays.push(NamedArray {
            name,
            shape,
            kind,
            data: vec![fill; len],
        });
        self.arrays.len() - 1
    }

    pub fn arrays(&self) -> &[NamedArray<T>] {
        &self.arrays
    }

    pub fn arrays_mut(&mut self) -> &mut [NamedArray<T>] {
        &mut self.arrays
    }

    pub fn get(&self, index: usize) -> &[T] {
        &self.arrays[index].data
    }

    pub fn get_mut(&mut self, index: usize) -> &mut [T] {
        &mut self.arrays[index].data
    }

    pub fn find(&self, name: &str) -> Option<&NamedArray<T>> {
        self.arrays.iter().find(|a| a.name == name)
    }

    /// Number of learnable scalars.
    pub fn learnable_count(&self) -> usize {
        self.arrays
            .iter()
            .filter(|a| a.kind == ParamKind::Learnable)
            .map(|a| a.len())
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.arrays.iter().all(|a| a.data.iter().all(|v| v.is_finite()))
    }

    pub fn cast<U: Real>(&self) -> Parameters<U> {
        Parameters {
            arrays: self
                .arrays
                .iter()
                .map(|a| NamedArray {
                    name: a.name.clone(),
                    shape: a.shape.clone(),
                    kind: a.kind,
                    data: a.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
                })
                .collect(),
        }
    }

    pub fn zero_grads(&self) -> Gradients<T> {
        Gradients {
            arrays: self.arrays.iter().map(|a| vec![T::zero(); a.len()]).collect(),
        }
    }

    /// Replaces every array's data, checking names, shapes and kinds match.
    pub fn load_from(&mut self, other: Parameters<T>) -> Result<()> {
        if other.arrays.len() != self.arrays.len() {
            return Err(Error::State(format!(
                "expected {} parameter arrays, found {}",
                self.arrays.len(),
                other.arrays.len()
            )));
        }
        for (mine, theirs) in self.arrays.iter().zip(&other.arrays) {
            if mine.name != theirs.name || mine.shape != theirs.shape || mine.kind != theirs.kind {
                return Err(Error::State(format!(
                    "parameter `{}` {:?} does not match expected `{}` {:?}",
                    theirs.name, theirs.shape, mine.name, mine.shape
                )));
            }
            if theirs.data.len() != mine.data.len() {
                return Err(Error::State(format!(
                    "parameter `{}` has the wrong length",
                    theirs.name
                )));
            }
        }
        self.arrays = other.arrays;
        Ok(())
    }

    pub(crate) fn from_arrays(arrays: Vec<NamedArray<T>>) -> Self {
        Parameters { arrays }
    }
}

/// Gradients aligned index-for-index with a [`Parameters`] set. Running
/// arrays always hold zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T = f32> {
    pub arrays: Vec<Vec<T>>,
}

impl<T: Real> Gradients<T> {
    pub(crate) fn accumulate(&mut self, index: usize, grad: &[T]) {
        for (g, &v) in self.arrays[index].iter_mut().zip(grad) {
            *g += v;
        }
    }

    pub fn scale(&mut self, factor: T) {
        for a in &mut self.arrays {
            a.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn add_assign(&mut self, other: &Gradients<T>) -> Result<()> {
        if self.arrays.len() != other.arrays.len() {
            return Err(Error::Contract("gradient sets have different layouts".into()));
        }
        for (i, a) in other.arrays.iter().enumerate() {
            if a.len() != self.arrays[i].len() {
                return Err(Error::Contract("gradient sets have different layouts".into()));
            }
            self.accumulate(i, a);
        }
        Ok(())
    }

    /// Euclidean norm over all arrays, accumulated in 64-bit.
    pub fn global_norm(&self) -> f64 {
        self.arrays
            .iter()
            .flatten()
            .map(|v| v.as_f64() * v.as_f64())
            .sum::<f64>()
            .sqrt()
    }
}
