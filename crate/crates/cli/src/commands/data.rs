//! `phantom` and `simulate`: ground-truth generation and measurement
//! simulation for both application paths.

use anyhow::{bail, Context, Result};
use recon_core::ndf;
use recon_core::operators::{lowdose_simulate, RadialEncoder};
use recon_core::operators::ImagingOperator;

use crate::config::{Mode, PipelineConfig};

use super::{ct_model, ct_phantom, mri_phantom, mri_trajectories, read_coils, read_complex, read_real, write_coils};

/// Write the ground-truth phantom (and, for MRI, the coil profile).
pub fn cmd_phantom(cfg: &PipelineConfig) -> Result<()> {
    match cfg.mode()? {
        Mode::Ct => {
            let x = ct_phantom(cfg)?;
            let path = cfg.path("io.phantom")?;
            ndf::write_real(&path, &x)?;
            println!("phantom: wrote {} shape {:?}", path.display(), x.shape());
        }
        Mode::Mri => {
            let x = mri_phantom(cfg)?;
            let path = cfg.path("io.phantom")?;
            ndf::write_complex(&path, &x)?;
            println!("phantom: wrote {} shape {:?}", path.display(), x.shape());
            let n = cfg.usize_or("mri.n", 64)?;
            let coils = recon_core::phantoms::synth_coils(n, cfg.usize_or("mri.coils", 8)?)?;
            let cpath = cfg.path("io.coils")?;
            write_coils(&cpath, &coils)?;
            println!(
                "phantom: wrote {} ({} coils)",
                cpath.display(),
                coils.n_coils()
            );
        }
    }
    Ok(())
}

/// Simulate measurements: Poisson low-dose counts for CT, radial
/// k-space for MRI.
pub fn cmd_simulate(cfg: &PipelineConfig) -> Result<()> {
    match cfg.mode()? {
        Mode::Ct => {
            let model = ct_model(cfg)?;
            let x = read_real(&cfg.path("io.phantom")?).context("reading phantom")?;
            let expected = [model.geom.n, model.geom.n];
            if x.shape() != expected {
                bail!(
                    "phantom shape {:?} does not match ct.n = {}",
                    x.shape(),
                    model.geom.n
                );
            }
            let y = lowdose_simulate(&x, &model, cfg.seed()?)?;
            let path = cfg.path("io.data")?;
            ndf::write_real(&path, &y)?;
            println!(
                "simulate: wrote {} shape {:?} (photons {}, mu {})",
                path.display(),
                y.shape(),
                model.photons,
                model.mu
            );
        }
        Mode::Mri => {
            let x = read_complex(&cfg.path("io.phantom")?).context("reading phantom")?;
            if x.ndim() != 3 {
                bail!("MRI phantom must be (N, N, Nt), got {:?}", x.shape());
            }
            let coils = read_coils(&cfg.path("io.coils")?)?;
            let trajs = mri_trajectories(cfg, x.shape()[2])?;
            let encoder = RadialEncoder::from_trajectories(coils, &trajs)?;
            let y = encoder.forward(&x).context("radial encoding")?;
            let path = cfg.path("io.data")?;
            ndf::write_complex(&path, &y)?;
            println!(
                "simulate: wrote {} shape {:?} ({} spokes/frame)",
                path.display(),
                y.shape(),
                trajs[0].n_spokes()
            );
        }
    }
    Ok(())
}
