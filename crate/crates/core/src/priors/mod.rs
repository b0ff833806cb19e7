//! Patch denoisers that produce the prior image: identity, Gaussian
//! smoothing, a small trainable convolutional net, and sparse coding
//! over a learned dictionary.

pub mod convnet;
pub mod dictionary;

use crate::array::NdArrayF;
use crate::error::{CoreError, Result};
use crate::patchwork::PatchDenoiser;

pub use convnet::{Activation, ConvNet, ConvNetSpec, LayerSpec, TrainConfig};
pub use dictionary::{dictionary_prior, itkrm_train, omp_sparse_code, DictionaryModel};

/// A same-shape patch-to-patch denoiser.
pub enum PriorModel {
    /// Returns the patch unchanged.
    Identity,
    /// Separable truncated Gaussian (radius ⌈3σ⌉) with per-position
    /// boundary renormalization, so constants are preserved exactly.
    GaussianSmooth { sigma: f64 },
    /// Forward pass of a trained convolutional net (2D patches).
    ConvNet(ConvNet),
    /// S-sparse approximation D·OMP(patch) over a trained dictionary.
    Dictionary(DictionaryModel),
}

impl PriorModel {
    /// Apply the model to one patch; output shape equals input shape.
    pub fn denoise_patch(&self, patch: &NdArrayF) -> Result<NdArrayF> {
        match self {
            PriorModel::Identity => Ok(patch.clone()),
            PriorModel::GaussianSmooth { sigma } => gaussian_smooth(patch, *sigma),
            PriorModel::ConvNet(net) => net.forward(patch),
            PriorModel::Dictionary(dict) => dict.denoise(patch),
        }
    }
}

impl PatchDenoiser for PriorModel {
    fn expected_patch_shape(&self) -> Option<&[usize]> {
        match self {
            PriorModel::Identity | PriorModel::GaussianSmooth { .. } => None,
            PriorModel::ConvNet(_) => None,
            PriorModel::Dictionary(d) => Some(d.patch_shape()),
        }
    }

    fn denoise(&self, patch: &NdArrayF) -> Result<NdArrayF> {
        self.denoise_patch(patch)
    }
}

/// Axis-separable truncated Gaussian smoothing. Near the boundary the
/// kernel is renormalized over its in-bounds support.
pub fn gaussian_smooth(patch: &NdArrayF, sigma: f64) -> Result<NdArrayF> {
    if sigma <= 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "gaussian sigma must be positive, got {sigma}"
        )));
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();

    let shape = patch.shape().to_vec();
    let strides = patch.strides();
    let mut cur = patch.clone();
    for ax in 0..shape.len() {
        let mut next = NdArrayF::zeros(shape.clone())?;
        let n_ax = shape[ax] as isize;
        let stride = strides[ax] as isize;
        let total = cur.len();
        // walk all positions; for each, the index along `ax` is
        // (flat / stride) % n_ax
        for flat in 0..total {
            let i_ax = (flat as isize / stride) % n_ax;
            let mut acc = 0.0;
            let mut wsum = 0.0;
            for (ki, &kw) in kernel.iter().enumerate() {
                let off = ki as isize - radius;
                let j = i_ax + off;
                if j < 0 || j >= n_ax {
                    continue;
                }
                acc += kw * cur.data()[(flat as isize + off * stride) as usize];
                wsum += kw;
            }
            next.data_mut()[flat] = acc / wsum;
        }
        cur = next;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_returns_the_patch() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        let p = NdArrayF::from_fn(vec![4, 4], |_| rng.gen_range(-1.0..1.0)).unwrap();
        let out = PriorModel::Identity.denoise_patch(&p).unwrap();
        assert_eq!(out.data(), p.data());
    }

    #[test]
    fn gaussian_preserves_constants_exactly() {
        let c = 0.37;
        let p = NdArrayF::full(vec![6, 5], c).unwrap();
        for sigma in [0.5, 2.0, 10.0] {
            let out = PriorModel::GaussianSmooth { sigma }
                .denoise_patch(&p)
                .unwrap();
            for v in out.data() {
                assert!((v - c).abs() < 1e-14, "sigma {sigma}: {v}");
            }
        }
    }

    #[test]
    fn gaussian_smooths_toward_the_mean() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2);
        let p = NdArrayF::from_fn(vec![16, 16], |_| rng.gen_range(-1.0..1.0)).unwrap();
        let out = gaussian_smooth(&p, 1.5).unwrap();
        let var_in: f64 = p.data().iter().map(|v| v * v).sum();
        let var_out: f64 = out.data().iter().map(|v| v * v).sum();
        assert!(var_out < var_in);
    }

    #[test]
    fn gaussian_rejects_bad_sigma() {
        let p = NdArrayF::zeros(vec![4]).unwrap();
        assert!(gaussian_smooth(&p, 0.0).is_err());
        assert!(gaussian_smooth(&p, -1.0).is_err());
    }
}
