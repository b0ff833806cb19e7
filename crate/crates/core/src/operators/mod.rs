//! Imaging forward/adjoint operator pairs.
//!
//! Every adjoint here is the exact transpose (conjugate transpose for
//! complex) of its discrete forward map, so the dot-product test
//! ⟨Ax, y⟩ = ⟨x, Aᴴy⟩ holds to rounding.

pub mod ct;
pub mod lowdose;
pub mod mri;

use crate::array::{NdArray, Scalar};
use crate::error::{CoreError, Result};

pub use ct::{fbp, ParallelBeamGeometry, RayTransform};
pub use lowdose::{
    ct_initial_recon, kl_divergence, kl_gradient, lowdose_forward, lowdose_simulate, LowDoseModel,
};
pub use mri::{
    density_weights, golden_angle_frames, golden_angle_trajectory, nufft_recon, CoilProfile,
    FrameSampling, RadialEncoder, RadialTrajectory, GOLDEN_ANGLE,
};

/// A linear forward/adjoint pair between shaped arrays.
pub trait ImagingOperator<T: Scalar>: Sync {
    fn domain_shape(&self) -> &[usize];
    fn range_shape(&self) -> &[usize];
    fn forward(&self, x: &NdArray<T>) -> Result<NdArray<T>>;
    fn adjoint(&self, y: &NdArray<T>) -> Result<NdArray<T>>;
}

/// Explicit dense matrix as an operator; the workhorse for solver
/// cross-checks against small systems.
#[derive(Debug, Clone)]
pub struct DenseOperator<T: Scalar> {
    rows: usize,
    cols: usize,
    /// row-major (rows × cols)
    entries: Vec<T>,
    domain_shape: Vec<usize>,
    range_shape: Vec<usize>,
}

impl<T: Scalar> DenseOperator<T> {
    pub fn new(rows: usize, cols: usize, entries: Vec<T>) -> Result<Self> {
        if entries.len() != rows * cols || rows == 0 || cols == 0 {
            return Err(CoreError::InvalidArgument(format!(
                "dense operator {}x{} needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                entries.len()
            )));
        }
        Ok(DenseOperator {
            rows,
            cols,
            entries,
            domain_shape: vec![cols],
            range_shape: vec![rows],
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }
}

/// An operator multiplied by a real factor (the adjoint scales by the
/// same factor). Used to renormalize an encoder so that regularization
/// weights keep their published meaning.
pub struct ScaledOperator<'a, T: Scalar> {
    inner: &'a dyn ImagingOperator<T>,
    factor: f64,
}

impl<'a, T: Scalar> ScaledOperator<'a, T> {
    pub fn new(inner: &'a dyn ImagingOperator<T>, factor: f64) -> Self {
        ScaledOperator { inner, factor }
    }
}

impl<T: Scalar> ImagingOperator<T> for ScaledOperator<'_, T> {
    fn domain_shape(&self) -> &[usize] {
        self.inner.domain_shape()
    }

    fn range_shape(&self) -> &[usize] {
        self.inner.range_shape()
    }

    fn forward(&self, x: &NdArray<T>) -> Result<NdArray<T>> {
        Ok(self.inner.forward(x)?.scaled(self.factor))
    }

    fn adjoint(&self, y: &NdArray<T>) -> Result<NdArray<T>> {
        Ok(self.inner.adjoint(y)?.scaled(self.factor))
    }
}

impl<T: Scalar> ImagingOperator<T> for DenseOperator<T> {
    fn domain_shape(&self) -> &[usize] {
        &self.domain_shape
    }

    fn range_shape(&self) -> &[usize] {
        &self.range_shape
    }

    fn forward(&self, x: &NdArray<T>) -> Result<NdArray<T>> {
        if x.shape() != self.domain_shape() {
            return Err(CoreError::ShapeMismatch {
                expected: self.domain_shape.clone(),
                got: x.shape().to_vec(),
            });
        }
        let mut out = vec![T::ZERO; self.rows];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.entries[i * self.cols..(i + 1) * self.cols];
            let mut acc = T::ZERO;
            for (a, b) in row.iter().zip(x.data().iter()) {
                acc += *a * *b;
            }
            *o = acc;
        }
        NdArray::new(self.range_shape.clone(), out)
    }

    fn adjoint(&self, y: &NdArray<T>) -> Result<NdArray<T>> {
        if y.shape() != self.range_shape() {
            return Err(CoreError::ShapeMismatch {
                expected: self.range_shape.clone(),
                got: y.shape().to_vec(),
            });
        }
        let mut out = vec![T::ZERO; self.cols];
        for i in 0..self.rows {
            let yi = y.data()[i];
            let row = &self.entries[i * self.cols..(i + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row.iter()) {
                *o += a.conj() * yi;
            }
        }
        NdArray::new(self.domain_shape.clone(), out)
    }
}
