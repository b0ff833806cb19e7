//! Dense n-dimensional arrays over `f64` or `Complex64`.
//!
//! Arrays carry an explicit shape and row-major data; every operation
//! checks shapes and refuses to broadcast. All numerics in this crate
//! are double precision.

use num_complex::Complex64;

use crate::error::{CoreError, Result};

/// Element types admitted by [`NdArray`]: real or complex doubles.
///
/// The conjugation/`abs_sq` pair is what the inner product and the
/// adjoint tests need; for `f64` conjugation is the identity.
pub trait Scalar:
    Copy
    + PartialEq
    + std::fmt::Debug
    + Send
    + Sync
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
    + std::ops::SubAssign
    + 'static
{
    const ZERO: Self;
    const ONE: Self;
    fn conj(self) -> Self;
    /// Multiply by a real factor.
    fn scale(self, s: f64) -> Self;
    /// Squared modulus |v|².
    fn abs_sq(self) -> f64;
    fn from_re(re: f64) -> Self;
    fn re(self) -> f64;
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    fn conj(self) -> Self {
        self
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn abs_sq(self) -> f64 {
        self * self
    }
    fn from_re(re: f64) -> Self {
        re
    }
    fn re(self) -> f64 {
        self
    }
}

impl Scalar for Complex64 {
    const ZERO: Self = Complex64 { re: 0.0, im: 0.0 };
    const ONE: Self = Complex64 { re: 1.0, im: 0.0 };
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn scale(self, s: f64) -> Self {
        Complex64 {
            re: self.re * s,
            im: self.im * s,
        }
    }
    fn abs_sq(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
    fn from_re(re: f64) -> Self {
        Complex64 { re, im: 0.0 }
    }
    fn re(self) -> f64 {
        self.re
    }
}

/// Dense row-major array with explicit shape.
#[derive(Clone, PartialEq)]
pub struct NdArray<T: Scalar> {
    shape: Vec<usize>,
    data: Vec<T>,
}

/// Real-valued array (images, sinograms, patches).
pub type NdArrayF = NdArray<f64>;
/// Complex-valued array (image sequences, k-space data).
pub type NdArrayC = NdArray<Complex64>;

impl<T: Scalar> std::fmt::Debug for NdArray<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "NdArray(shape={:?}, len={})", self.shape, self.data.len())
    }
}

fn checked_len(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(CoreError::InvalidShape {
            shape: shape.to_vec(),
            reason: "rank must be at least 1".into(),
        });
    }
    let mut len = 1usize;
    for &d in shape {
        if d == 0 {
            return Err(CoreError::InvalidShape {
                shape: shape.to_vec(),
                reason: "all dimensions must be >= 1".into(),
            });
        }
        len = len.checked_mul(d).ok_or_else(|| CoreError::InvalidShape {
            shape: shape.to_vec(),
            reason: "element count overflows usize".into(),
        })?;
    }
    Ok(len)
}

impl<T: Scalar> NdArray<T> {
    /// Build an array from a shape and matching row-major data.
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<T>) -> Result<Self> {
        let shape = shape.into();
        let len = checked_len(&shape)?;
        if data.len() != len {
            return Err(CoreError::InvalidShape {
                shape,
                reason: format!("data length {} != shape product {}", data.len(), len),
            });
        }
        Ok(NdArray { shape, data })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        let len = checked_len(&shape)?;
        Ok(NdArray {
            shape,
            data: vec![T::ZERO; len],
        })
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: T) -> Result<Self> {
        let shape = shape.into();
        let len = checked_len(&shape)?;
        Ok(NdArray {
            shape,
            data: vec![value; len],
        })
    }

    /// Build by evaluating `f` at every multi-index, in row-major order.
    pub fn from_fn(shape: impl Into<Vec<usize>>, mut f: impl FnMut(&[usize]) -> T) -> Result<Self> {
        let shape = shape.into();
        let len = checked_len(&shape)?;
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f(&idx));
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Ok(NdArray { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
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

    /// Row-major strides, in elements.
    pub fn strides(&self) -> Vec<usize> {
        row_major_strides(&self.shape)
    }

    /// Flat offset of a multi-index (debug-checked).
    pub fn flat(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut off = 0;
        let mut stride = 1;
        for ax in (0..self.shape.len()).rev() {
            debug_assert!(idx[ax] < self.shape[ax]);
            off += idx[ax] * stride;
            stride *= self.shape[ax];
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> T {
        self.data[self.flat(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: T) {
        let off = self.flat(idx);
        self.data[off] = value;
    }

    pub fn same_shape<U: Scalar>(&self, other: &NdArray<U>) -> Result<()> {
        if self.shape != other.shape() {
            return Err(CoreError::ShapeMismatch {
                expected: self.shape.clone(),
                got: other.shape().to_vec(),
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        NdArray {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// self += factor * other
    pub fn add_scaled(&mut self, other: &Self, factor: f64) -> Result<()> {
        self.same_shape(other)?;
        for (a, &b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b.scale(factor);
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(NdArray {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(NdArray {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map(|v| v.scale(factor))
    }

    pub fn scale_in_place(&mut self, factor: f64) {
        for v in &mut self.data {
            *v = v.scale(factor);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .map(|v| v.abs_sq().sqrt())
            .fold(0.0, f64::max)
    }
}

impl NdArrayC {
    /// Real part as a real array.
    pub fn re_part(&self) -> NdArrayF {
        NdArray {
            shape: self.shape.clone(),
            data: self.data.iter().map(|c| c.re).collect(),
        }
    }

    /// Imaginary part as a real array.
    pub fn im_part(&self) -> NdArrayF {
        NdArray {
            shape: self.shape.clone(),
            data: self.data.iter().map(|c| c.im).collect(),
        }
    }

    /// Elementwise modulus as a real array.
    pub fn magnitude(&self) -> NdArrayF {
        NdArray {
            shape: self.shape.clone(),
            data: self.data.iter().map(|c| c.norm()).collect(),
        }
    }

    /// re + i·im, rejecting shape disagreement.
    pub fn from_re_im(re: &NdArrayF, im: &NdArrayF) -> Result<Self> {
        re.same_shape(im)?;
        let data = re
            .data
            .iter()
            .zip(im.data.iter())
            .map(|(&r, &i)| Complex64 { re: r, im: i })
            .collect();
        Ok(NdArray {
            shape: re.shape.clone(),
            data,
        })
    }
}

impl NdArrayF {
    /// Promote to a complex array with zero imaginary part.
    pub fn to_complex(&self) -> NdArrayC {
        NdArray {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|&r| Complex64 { re: r, im: 0.0 })
                .collect(),
        }
    }
}

pub(crate) fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for ax in (0..shape.len().saturating_sub(1)).rev() {
        strides[ax] = strides[ax + 1] * shape[ax + 1];
    }
    strides
}

/// Hilbert-space inner product Σ conj(aᵢ)·bᵢ (conjugate-linear in `a`).
pub fn inner_product<T: Scalar>(a: &NdArray<T>, b: &NdArray<T>) -> Result<T> {
    a.same_shape(b)?;
    let mut acc = T::ZERO;
    for (&x, &y) in a.data().iter().zip(b.data().iter()) {
        acc += x.conj() * y;
    }
    Ok(acc)
}

/// Euclidean norm sqrt(Σ |aᵢ|²).
pub fn norm2<T: Scalar>(a: &NdArray<T>) -> f64 {
    a.data().iter().map(|v| v.abs_sq()).sum::<f64>().sqrt()
}
