//! Patch decomposition and reassembly.
//!
//! A volume is covered by a regular grid of possibly overlapping
//! patches. Extraction and its transpose (additive repositioning) form
//! an exact adjoint pair, and dividing the reassembled sum by the
//! per-voxel coverage count reproduces the input exactly. Priors are
//! applied patch-by-patch through [`PatchDenoiser`] and reassembled the
//! same way; for complex inputs the real and imaginary parts are routed
//! through the same real-valued denoiser separately.

use rayon::prelude::*;

use crate::array::{NdArray, NdArrayC, NdArrayF, Scalar};
use crate::error::{CoreError, Result};

/// What to do when `(shape - p)` is not a multiple of the stride.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Reject shapes that do not tile exactly.
    ExactFit,
    /// Add one final patch per axis, clamped to end at the boundary.
    ClampLast,
}

/// Patch sizes, strides and the derived origin grid for one volume shape.
#[derive(Debug, Clone)]
pub struct PatchScheme {
    volume_shape: Vec<usize>,
    patch_shape: Vec<usize>,
    strides: Vec<usize>,
    boundary: Boundary,
}

impl PatchScheme {
    pub fn new(
        volume_shape: impl Into<Vec<usize>>,
        patch_shape: impl Into<Vec<usize>>,
        strides: impl Into<Vec<usize>>,
        boundary: Boundary,
    ) -> Result<Self> {
        let volume_shape = volume_shape.into();
        let patch_shape = patch_shape.into();
        let strides = strides.into();
        if volume_shape.is_empty()
            || patch_shape.len() != volume_shape.len()
            || strides.len() != volume_shape.len()
        {
            return Err(CoreError::InvalidArgument(format!(
                "patch scheme ranks disagree: volume {:?}, p {:?}, s {:?}",
                volume_shape, patch_shape, strides
            )));
        }
        for ax in 0..volume_shape.len() {
            let (n, p, s) = (volume_shape[ax], patch_shape[ax], strides[ax]);
            if p < 1 || p > n {
                return Err(CoreError::InvalidArgument(format!(
                    "axis {ax}: patch size {p} must satisfy 1 <= p <= {n}"
                )));
            }
            if s < 1 || s > p {
                return Err(CoreError::InvalidArgument(format!(
                    "axis {ax}: stride {s} must satisfy 1 <= s <= patch size {p}"
                )));
            }
            if boundary == Boundary::ExactFit && (n - p) % s != 0 {
                return Err(CoreError::InvalidArgument(format!(
                    "axis {ax}: ({n} - {p}) is not a multiple of stride {s} under ExactFit"
                )));
            }
        }
        Ok(PatchScheme {
            volume_shape,
            patch_shape,
            strides,
            boundary,
        })
    }

    pub fn volume_shape(&self) -> &[usize] {
        &self.volume_shape
    }

    pub fn patch_shape(&self) -> &[usize] {
        &self.patch_shape
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Patch origins along one axis, ascending; under `ClampLast` an
    /// inexact fit contributes one extra origin clamped to `n - p`.
    pub fn axis_origins(&self, axis: usize) -> Vec<usize> {
        let (n, p, s) = (
            self.volume_shape[axis],
            self.patch_shape[axis],
            self.strides[axis],
        );
        let regular = (n - p) / s + 1;
        let mut origins: Vec<usize> = (0..regular).map(|k| k * s).collect();
        if self.boundary == Boundary::ClampLast && (n - p) % s != 0 {
            origins.push(n - p);
        }
        origins
    }

    /// Number of patches N_{p,s}.
    pub fn patch_count(&self) -> usize {
        (0..self.volume_shape.len())
            .map(|ax| self.axis_origins(ax).len())
            .product()
    }

    /// All patch origins in lexicographic order; length equals
    /// [`patch_count`](Self::patch_count).
    pub fn origins(&self) -> Vec<Vec<usize>> {
        let per_axis: Vec<Vec<usize>> = (0..self.volume_shape.len())
            .map(|ax| self.axis_origins(ax))
            .collect();
        let mut out = Vec::with_capacity(self.patch_count());
        let mut counter = vec![0usize; per_axis.len()];
        loop {
            out.push(
                counter
                    .iter()
                    .enumerate()
                    .map(|(ax, &k)| per_axis[ax][k])
                    .collect(),
            );
            let mut ax = per_axis.len();
            loop {
                if ax == 0 {
                    return out;
                }
                ax -= 1;
                counter[ax] += 1;
                if counter[ax] < per_axis[ax].len() {
                    break;
                }
                counter[ax] = 0;
            }
        }
    }
}

fn check_bounds(
    volume_shape: &[usize],
    origin: &[usize],
    patch_shape: &[usize],
) -> Result<()> {
    if origin.len() != volume_shape.len() || patch_shape.len() != volume_shape.len() {
        return Err(CoreError::InvalidArgument(format!(
            "rank mismatch: volume {:?}, origin {:?}, patch {:?}",
            volume_shape, origin, patch_shape
        )));
    }
    for ax in 0..volume_shape.len() {
        if origin[ax] + patch_shape[ax] > volume_shape[ax] {
            return Err(CoreError::InvalidArgument(format!(
                "patch out of bounds on axis {ax}: origin {} + size {} > {}",
                origin[ax], patch_shape[ax], volume_shape[ax]
            )));
        }
    }
    Ok(())
}

/// Visit every element of the patch window: (flat offset in volume,
/// flat offset in patch), in patch-row-major order.
fn for_each_window_pair(
    volume_shape: &[usize],
    origin: &[usize],
    patch_shape: &[usize],
    mut f: impl FnMut(usize, usize),
) {
    let vstrides = crate::array::row_major_strides(volume_shape);
    let rank = volume_shape.len();
    let patch_len: usize = patch_shape.iter().product();
    let base: usize = (0..rank).map(|ax| origin[ax] * vstrides[ax]).sum();
    let mut idx = vec![0usize; rank];
    let mut voff = base;
    for poff in 0..patch_len {
        f(voff, poff);
        // advance the multi-index with carry, updating the volume offset
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            voff += vstrides[ax];
            if idx[ax] < patch_shape[ax] {
                break;
            }
            voff -= idx[ax] * vstrides[ax];
            idx[ax] = 0;
        }
    }
}

/// Copy the patch of shape `p` at `origin` out of `x` (R_j x).
pub fn extract_patch<T: Scalar>(
    x: &NdArray<T>,
    origin: &[usize],
    p: &[usize],
) -> Result<NdArray<T>> {
    check_bounds(x.shape(), origin, p)?;
    let mut out = NdArray::zeros(p.to_vec())?;
    {
        let src = x.data();
        let dst = out.data_mut();
        for_each_window_pair(x.shape(), origin, p, |voff, poff| {
            dst[poff] = src[voff];
        });
    }
    Ok(out)
}

/// Add `patch` into `accumulator` at `origin` (the transpose R_jᵀ of
/// extraction — overlapping insertions sum).
pub fn insert_patch_transpose<T: Scalar>(
    accumulator: &mut NdArray<T>,
    patch: &NdArray<T>,
    origin: &[usize],
) -> Result<()> {
    check_bounds(accumulator.shape(), origin, patch.shape())?;
    let shape = accumulator.shape().to_vec();
    let dst = accumulator.data_mut();
    let src = patch.data();
    for_each_window_pair(&shape, origin, patch.shape(), |voff, poff| {
        dst[voff] += src[poff];
    });
    Ok(())
}

/// Per-voxel weights 1/coverage making the decomposition an identity.
#[derive(Debug, Clone)]
pub struct WeightMap {
    weights: NdArrayF,
}

impl WeightMap {
    pub fn weights(&self) -> &NdArrayF {
        &self.weights
    }

    pub fn apply<T: Scalar>(&self, x: &mut NdArray<T>) -> Result<()> {
        self.weights.same_shape(x)?;
        for (v, &w) in x.data_mut().iter_mut().zip(self.weights.data().iter()) {
            *v = v.scale(w);
        }
        Ok(())
    }
}

/// Reciprocal coverage counts for a scheme. The origin grid is a
/// Cartesian product, so coverage factorizes per axis.
pub fn compute_weights(scheme: &PatchScheme) -> Result<WeightMap> {
    let rank = scheme.volume_shape().len();
    let mut axis_cover: Vec<Vec<f64>> = Vec::with_capacity(rank);
    for ax in 0..rank {
        let n = scheme.volume_shape()[ax];
        let p = scheme.patch_shape()[ax];
        let mut cover = vec![0u32; n];
        for o in scheme.axis_origins(ax) {
            for c in cover.iter_mut().skip(o).take(p) {
                *c += 1;
            }
        }
        if cover.iter().any(|&c| c == 0) {
            return Err(CoreError::Numerical(format!(
                "axis {ax}: voxel with zero patch coverage"
            )));
        }
        axis_cover.push(cover.into_iter().map(|c| c as f64).collect());
    }
    let weights = NdArrayF::from_fn(scheme.volume_shape().to_vec(), |idx| {
        let cover: f64 = idx
            .iter()
            .enumerate()
            .map(|(ax, &i)| axis_cover[ax][i])
            .product();
        1.0 / cover
    })?;
    Ok(WeightMap { weights })
}

/// A same-shape patch-to-patch map. Implemented by [`crate::priors::PriorModel`].
pub trait PatchDenoiser: Sync {
    /// The patch shape this model requires, or `None` if any shape of
    /// the supported rank is accepted.
    fn expected_patch_shape(&self) -> Option<&[usize]>;

    /// Map a real patch to a same-shape real patch.
    fn denoise(&self, patch: &NdArrayF) -> Result<NdArrayF>;
}

fn denoise_checked(denoiser: &dyn PatchDenoiser, patch: &NdArrayF) -> Result<NdArrayF> {
    if let Some(expect) = denoiser.expected_patch_shape() {
        if expect != patch.shape() {
            return Err(CoreError::ShapeMismatch {
                expected: expect.to_vec(),
                got: patch.shape().to_vec(),
            });
        }
    }
    let out = denoiser.denoise(patch)?;
    if out.shape() != patch.shape() {
        return Err(CoreError::ShapeMismatch {
            expected: patch.shape().to_vec(),
            got: out.shape().to_vec(),
        });
    }
    Ok(out)
}

/// W Σ_j R_jᵀ u(R_j x): denoise every patch and reassemble with
/// coverage weighting. Patches are processed independently (in
/// parallel) and accumulated in lexicographic origin order, so the
/// result does not depend on scheduling.
pub fn apply_prior_patchwise(
    x: &NdArrayF,
    scheme: &PatchScheme,
    denoiser: &dyn PatchDenoiser,
) -> Result<NdArrayF> {
    if x.shape() != scheme.volume_shape() {
        return Err(CoreError::ShapeMismatch {
            expected: scheme.volume_shape().to_vec(),
            got: x.shape().to_vec(),
        });
    }
    let origins = scheme.origins();
    let p = scheme.patch_shape().to_vec();
    let denoised: Vec<NdArrayF> = origins
        .par_iter()
        .map(|origin| {
            let patch = extract_patch(x, origin, &p)?;
            denoise_checked(denoiser, &patch)
        })
        .collect::<Result<_>>()?;
    let mut acc = NdArrayF::zeros(x.shape().to_vec())?;
    for (origin, patch) in origins.iter().zip(denoised.iter()) {
        insert_patch_transpose(&mut acc, patch, origin)?;
    }
    compute_weights(scheme)?.apply(&mut acc)?;
    Ok(acc)
}

/// Complex variant: the real-valued denoiser is applied to the real
/// and imaginary parts separately and the results recombined.
pub fn apply_prior_patchwise_complex(
    x: &NdArrayC,
    scheme: &PatchScheme,
    denoiser: &dyn PatchDenoiser,
) -> Result<NdArrayC> {
    let re = apply_prior_patchwise(&x.re_part(), scheme, denoiser)?;
    let im = apply_prior_patchwise(&x.im_part(), scheme, denoiser)?;
    NdArrayC::from_re_im(&re, &im)
}

/// Spatio-temporal slice prior for an (Nx, Ny, Nt) complex sequence:
/// the denoiser runs on every xt-slice and every yt-slice of the real
/// and imaginary parts, each slice family is reassembled (both tile the
/// volume exactly), and the two stacks are averaged with factor 1/2.
pub fn apply_prior_xtyt(x: &NdArrayC, denoiser: &dyn PatchDenoiser) -> Result<NdArrayC> {
    if x.ndim() != 3 {
        return Err(CoreError::InvalidArgument(format!(
            "xt/yt prior needs a rank-3 (Nx, Ny, Nt) input, got shape {:?}",
            x.shape()
        )));
    }
    let re = xtyt_real(&x.re_part(), denoiser)?;
    let im = xtyt_real(&x.im_part(), denoiser)?;
    NdArrayC::from_re_im(&re, &im)
}

fn xtyt_real(x: &NdArrayF, denoiser: &dyn PatchDenoiser) -> Result<NdArrayF> {
    let (nx, ny, nt) = (x.shape()[0], x.shape()[1], x.shape()[2]);

    // xt-slices: fix y, patch shape (nx, nt) at origin (0, y, 0)
    let xt_slices: Vec<NdArrayF> = (0..ny)
        .into_par_iter()
        .map(|y| {
            let slice = NdArrayF::from_fn(vec![nx, nt], |ix| x.get(&[ix[0], y, ix[1]]))?;
            denoise_checked(denoiser, &slice)
        })
        .collect::<Result<_>>()?;
    // yt-slices: fix x, patch shape (ny, nt)
    let yt_slices: Vec<NdArrayF> = (0..nx)
        .into_par_iter()
        .map(|x0| {
            let slice = NdArrayF::from_fn(vec![ny, nt], |ix| x.get(&[x0, ix[0], ix[1]]))?;
            denoise_checked(denoiser, &slice)
        })
        .collect::<Result<_>>()?;

    let mut out = NdArrayF::zeros(x.shape().to_vec())?;
    for (y, slice) in xt_slices.iter().enumerate() {
        for ix in 0..nx {
            for it in 0..nt {
                let v = slice.get(&[ix, it]);
                let off = out.flat(&[ix, y, it]);
                out.data_mut()[off] += v;
            }
        }
    }
    for (x0, slice) in yt_slices.iter().enumerate() {
        for iy in 0..ny {
            for it in 0..nt {
                let v = slice.get(&[iy, it]);
                let off = out.flat(&[x0, iy, it]);
                out.data_mut()[off] += v;
            }
        }
    }
    out.scale_in_place(0.5);
    Ok(out)
}
