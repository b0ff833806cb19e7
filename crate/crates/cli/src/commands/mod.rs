//! Subcommand implementations and the helpers they share.

mod analyze;
mod data;
mod recon;
mod training;

pub use analyze::{cmd_convergence, cmd_evaluate, cmd_render};
pub use data::{cmd_phantom, cmd_simulate};
pub use recon::{cmd_prior, cmd_reconstruct};
pub use training::cmd_train;

use std::path::Path;

use anyhow::{bail, Context, Result};
use recon_core::operators::{golden_angle_frames, CoilProfile, RadialTrajectory};
use recon_core::operators::{LowDoseModel, ParallelBeamGeometry};
use recon_core::patchwork::{Boundary, PatchScheme};
use recon_core::phantoms::{DynamicPhantomSpec, EllipseSpec};
use recon_core::priors::{ConvNet, DictionaryModel, PriorModel};
use recon_core::{ndf, NdArrayC, NdArrayF};

use crate::config::{Mode, PipelineConfig};

pub(crate) fn ct_model(cfg: &PipelineConfig) -> Result<LowDoseModel> {
    let n = cfg.usize_or("ct.n", 128)?;
    let angles = cfg.usize_or("ct.angles", 360)?;
    let geom = match cfg.get("ct.bins") {
        Some(_) => ParallelBeamGeometry::new(n, angles, cfg.usize_or("ct.bins", 0)?)?,
        None => ParallelBeamGeometry::with_diagonal_detector(n, angles)?,
    };
    Ok(LowDoseModel::new(
        cfg.f64_or("ct.photons", 10_000.0)?,
        cfg.f64_or("ct.mu", 0.02)?,
        geom,
    )?)
}

pub(crate) fn mri_trajectories(
    cfg: &PipelineConfig,
    n_frames: usize,
) -> Result<Vec<RadialTrajectory>> {
    Ok(golden_angle_frames(
        n_frames,
        cfg.usize_or("mri.spokes", 34)?,
        cfg.usize_or("mri.samples", 64)?,
    )?)
}

/// Coil profiles travel as one complex NDF of shape (n_c, N, N).
pub(crate) fn write_coils(path: &Path, coils: &CoilProfile) -> Result<()> {
    let [nx, ny] = coils.image_shape();
    let nc = coils.n_coils();
    let mut data = Vec::with_capacity(nc * nx * ny);
    for m in coils.maps() {
        data.extend_from_slice(m.data());
    }
    let arr = NdArrayC::new(vec![nc, nx, ny], data)?;
    Ok(ndf::write_complex(path, &arr)?)
}

pub(crate) fn read_coils(path: &Path) -> Result<CoilProfile> {
    let arr = ndf::read(path)?.into_complex()?;
    if arr.ndim() != 3 {
        bail!(
            "coil file {} must be 3D (n_c, N, N), got {:?}",
            path.display(),
            arr.shape()
        );
    }
    let (nc, nx, ny) = (arr.shape()[0], arr.shape()[1], arr.shape()[2]);
    let maps = (0..nc)
        .map(|c| {
            NdArrayC::new(
                vec![nx, ny],
                arr.data()[c * nx * ny..(c + 1) * nx * ny].to_vec(),
            )
        })
        .collect::<recon_core::Result<Vec<_>>>()?;
    Ok(CoilProfile::new(maps)?)
}

pub(crate) fn boundary_from(cfg: &PipelineConfig) -> Result<Boundary> {
    match cfg.get("patch.boundary").unwrap_or("exact") {
        "exact" => Ok(Boundary::ExactFit),
        "clamp" => Ok(Boundary::ClampLast),
        other => bail!("patch.boundary must be `exact` or `clamp`, got `{other}`"),
    }
}

/// The reassembly scheme for the prior stage: `dict.*` keys when the
/// prior is a dictionary, `patch.*` otherwise.
pub(crate) fn prior_scheme(
    cfg: &PipelineConfig,
    volume_shape: &[usize],
    dictionary: bool,
) -> Result<PatchScheme> {
    let (p, s) = if dictionary {
        (
            cfg.usize_list_or("dict.patch", &[8, 8])?,
            cfg.usize_list_or("dict.stride", &[2, 2])?,
        )
    } else {
        (
            cfg.usize_list_or("patch.p", &[16, 16])?,
            cfg.usize_list_or("patch.s", &[8, 8])?,
        )
    };
    Ok(PatchScheme::new(
        volume_shape.to_vec(),
        p,
        s,
        boundary_from(cfg)?,
    )?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PriorRoute {
    Patch,
    Xtyt,
}

pub(crate) fn load_prior(cfg: &PipelineConfig) -> Result<(PriorModel, PriorRoute)> {
    let kind = cfg.get("prior.kind").unwrap_or("identity");
    let model = match kind {
        "identity" => PriorModel::Identity,
        "gauss" => PriorModel::GaussianSmooth {
            sigma: cfg.f64_or("prior.sigma", 1.0)?,
        },
        "convnet" => {
            let path = cfg.path("prior.weights")?;
            PriorModel::ConvNet(
                ConvNet::load(&path)
                    .with_context(|| format!("loading weights {}", path.display()))?,
            )
        }
        "dictionary" => {
            let path = cfg.path("prior.dict")?;
            let patch = cfg.usize_list_or("dict.patch", &[8, 8])?;
            PriorModel::Dictionary(
                DictionaryModel::load(&path, patch)
                    .with_context(|| format!("loading dictionary {}", path.display()))?,
            )
        }
        other => bail!("prior.kind must be identity|gauss|convnet|dictionary, got `{other}`"),
    };
    let default_route = match cfg.mode()? {
        Mode::Ct => "patch",
        Mode::Mri => "xtyt",
    };
    let route = match (kind, cfg.get("prior.route").unwrap_or(default_route)) {
        // dictionary coding is defined on patches
        ("dictionary", _) => PriorRoute::Patch,
        (_, "patch") => PriorRoute::Patch,
        (_, "xtyt") => PriorRoute::Xtyt,
        (_, other) => bail!("prior.route must be `patch` or `xtyt`, got `{other}`"),
    };
    Ok((model, route))
}

/// Deterministic phantom perturbation: variant 0 is canonical, other
/// variants jitter ellipse parameters from a labeled stream so that
/// training and test phantoms differ.
pub(crate) fn jitter_ellipses(ellipses: &mut [EllipseSpec], variant: u64) {
    if variant == 0 {
        return;
    }
    use rand::Rng;
    let mut rng = recon_core::rng::substream(variant, "phantom-variant");
    for e in ellipses {
        e.intensity *= 1.0 + 0.08 * rng.gen_range(-1.0..1.0);
        e.semi_axes.0 *= 1.0 + 0.05 * rng.gen_range(-1.0..1.0);
        e.semi_axes.1 *= 1.0 + 0.05 * rng.gen_range(-1.0..1.0);
        e.center.0 += 0.02 * rng.gen_range(-1.0..1.0);
        e.center.1 += 0.02 * rng.gen_range(-1.0..1.0);
        e.rotation += 0.05 * rng.gen_range(-1.0..1.0);
    }
}

pub(crate) fn ct_phantom(cfg: &PipelineConfig) -> Result<NdArrayF> {
    let n = cfg.usize_or("ct.n", 128)?;
    let variant = cfg.u64_or("phantom.variant", 0)?;
    if variant == 0 {
        return Ok(recon_core::phantoms::shepp_logan(n)?);
    }
    let mut ellipses = recon_core::phantoms::shepp_logan_ellipses();
    jitter_ellipses(&mut ellipses, variant);
    let img = recon_core::phantoms::render_ellipses(&ellipses, n)?;
    Ok(img.map(|v| (v * 0.5).clamp(0.0, 1.0)))
}

pub(crate) fn mri_phantom(cfg: &PipelineConfig) -> Result<NdArrayC> {
    let n = cfg.usize_or("mri.n", 64)?;
    let frames = cfg.usize_or("mri.frames", 30)?;
    let variant = cfg.u64_or("phantom.variant", 0)?;
    let mut spec = DynamicPhantomSpec::cardiac_default();
    spec.n_frames = frames;
    if variant != 0 {
        use rand::Rng;
        jitter_ellipses(&mut spec.base, variant);
        let mut rng = recon_core::rng::substream(variant, "phantom-variant-pulse");
        spec.pulse_amplitude = (spec.pulse_amplitude * (1.0 + 0.3 * rng.gen_range(-1.0..1.0)))
            .clamp(0.02, 0.9);
    }
    Ok(recon_core::phantoms::dynamic_phantom(&spec, n)?)
}

pub(crate) fn read_real(path: &Path) -> Result<NdArrayF> {
    Ok(ndf::read(path)?.into_real()?)
}

pub(crate) fn read_complex(path: &Path) -> Result<NdArrayC> {
    Ok(ndf::read(path)?.into_complex()?)
}

/// Magnitude image of either NDF flavor, for metrics and rendering.
pub(crate) fn read_magnitude(path: &Path) -> Result<NdArrayF> {
    Ok(match ndf::read(path)? {
        ndf::NdfArray::Real(a) => a,
        ndf::NdfArray::Complex(a) => a.magnitude(),
    })
}
