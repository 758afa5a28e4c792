//! A small matrix-valued tensor engine with reverse-mode differentiation.
//!
//! Every tensor is two-dimensional (`rows × cols`, row-major); vectors are
//! `1 × n` and scalars `1 × 1`. Operations are recorded on a [`Tape`] and
//! differentiated with [`Tape::backward`].

mod gradcheck;
mod scalar;
mod tape;

pub use gradcheck::{gradient_check, GradCheckFailure, GradCheckOptions, GradCheckReport};
pub use scalar::Scalar;
pub use scalar::View;
pub use tape::{Axis, Gradients, Tape, Var};

use crate::error::{Error, Result};

pub type Shape = [usize; 2];

/// A dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape[0] * shape[1] {
            return Err(Error::InvalidArgument {
                op: "tensor",
                msg: format!("{} values do not fill shape {:?}", data.len(), shape),
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Tensor { shape, data: vec![T::zero(); shape[0] * shape[1]] }
    }

    pub fn filled(shape: Shape, value: T) -> Self {
        Tensor { shape, data: vec![value; shape[0] * shape[1]] }
    }

    pub fn scalar(value: T) -> Self {
        Tensor { shape: [1, 1], data: vec![value] }
    }

    pub fn row(values: Vec<T>) -> Self {
        Tensor { shape: [1, values.len()], data: values }
    }

    pub fn from_f64(shape: Shape, values: &[f64]) -> Result<Self> {
        Self::new(shape, values.iter().map(|&v| T::from_f64_lossy(v)).collect())
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
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

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.shape[1] + c]
    }

    pub fn row_slice(&self, r: usize) -> &[T] {
        let c = self.shape[1];
        &self.data[r * c..(r + 1) * c]
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| U::from_f64_lossy(v.to_f64_lossy())).collect(),
        }
    }

    /// Plain (non-recorded) matrix product.
    pub fn matmul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        if self.cols() != other.rows() {
            return Err(Error::ShapeMismatch { op: "matmul", left: self.shape, right: other.shape });
        }
        let mut out = vec![T::zero(); self.rows() * other.cols()];
        T::gemm(
            View::new(&self.data, self.rows(), self.cols()),
            View::new(&other.data, other.rows(), other.cols()),
            &mut out,
            T::zero(),
        );
        Ok(Tensor { shape: [self.rows(), other.cols()], data: out })
    }

    pub fn transpose(&self) -> Tensor<T> {
        let [r, c] = self.shape;
        let mut out = Vec::with_capacity(r * c);
        for j in 0..c {
            for i in 0..r {
                out.push(self.data[i * c + j]);
            }
        }
        Tensor { shape: [c, r], data: out }
    }
}
