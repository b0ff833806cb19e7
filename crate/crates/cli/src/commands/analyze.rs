//! `evaluate`, `render` and `convergence`.

use anyhow::{bail, Context, Result};
use rand::Rng;
use recon_core::metrics::evaluate_slices;
use recon_core::rng::substream;
use recon_core::solvers::convergence_experiment;
use recon_core::NdArrayF;

use crate::config::PipelineConfig;
use crate::pgm::write_pgm;

use super::read_magnitude;

/// Per-slice metrics of `io.input` against `io.reference`, written as
/// CSV to `io.metrics` (complex inputs are compared by magnitude).
pub fn cmd_evaluate(cfg: &PipelineConfig) -> Result<()> {
    let x = read_magnitude(&cfg.path("io.input")?).context("reading input")?;
    let reference = read_magnitude(&cfg.path("io.reference")?).context("reading reference")?;
    let report = evaluate_slices(
        &x,
        &reference,
        cfg.f64_auto("metrics.peak")?,
        cfg.f64_auto("metrics.range")?,
    )?;
    let out = cfg.path("io.metrics")?;
    std::fs::write(&out, report.to_csv())
        .with_context(|| format!("writing {}", out.display()))?;
    println!(
        "evaluate: mean psnr {:.4} nrmse {:.6} ssim {:.4} hpsi {:.4} ({} slices)",
        report.mean.psnr,
        report.mean.nrmse,
        report.mean.ssim,
        report.mean.hpsi,
        report.slices.len()
    );
    Ok(())
}

/// Window one slice of `io.input` into an 8-bit PGM at `io.image`.
pub fn cmd_render(cfg: &PipelineConfig) -> Result<()> {
    let x = read_magnitude(&cfg.path("io.input")?).context("reading input")?;
    let slice = match x.ndim() {
        2 => x,
        3 => {
            let t = cfg.usize_or("render.slice", 0)?;
            if t >= x.shape()[2] {
                bail!("render.slice {t} out of range for shape {:?}", x.shape());
            }
            let (h, w) = (x.shape()[0], x.shape()[1]);
            NdArrayF::from_fn(vec![h, w], |ix| x.get(&[ix[0], ix[1], t]))?
        }
        _ => bail!("render expects a 2D or 3D array, got shape {:?}", x.shape()),
    };
    let center = cfg.f64_or("render.center", 0.5)?;
    let width = cfg.f64_or("render.width", 1.0)?;
    let out = cfg.path("io.image")?;
    write_pgm(&out, &slice, center, width)?;
    println!("render: wrote {}", out.display());
    Ok(())
}

/// Noise-sweep verification of prior-anchored Tikhonov regularization
/// on a seeded random underdetermined system; writes the error table.
pub fn cmd_convergence(cfg: &PipelineConfig) -> Result<()> {
    let seed = cfg.seed()?;
    let rows = cfg.usize_or("conv.rows", 8)?;
    let cols = cfg.usize_or("conv.cols", 12)?;
    let deltas = cfg.f64_list(
        "conv.deltas",
        &[1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
    )?;

    let mut mat_rng = substream(seed, "convergence-matrix");
    let a = NdArrayF::from_fn(vec![rows, cols], |_| mat_rng.gen_range(-1.0..1.0))?;
    let mut x_rng = substream(seed, "convergence-xtrue");
    let x_true = NdArrayF::from_fn(vec![cols], |_| x_rng.gen_range(-1.0..1.0))?;
    let mut p_rng = substream(seed, "convergence-xprior");
    let x_prior = NdArrayF::from_fn(vec![cols], |_| p_rng.gen_range(-1.0..1.0))?;

    let table = convergence_experiment(&a, &x_true, &x_prior, &deltas, |d| d, seed)?;
    let out = cfg.path("io.table")?;
    std::fs::write(&out, table.to_csv())
        .with_context(|| format!("writing {}", out.display()))?;
    for r in &table.rows {
        println!(
            "convergence: delta {:.3e} lambda {:.3e} error {:.6e} shift_gap {:.3e}",
            r.delta, r.lambda, r.error, r.shift_gap
        );
    }
    let errors = table.errors();
    let monotone = errors.windows(2).all(|w| w[1] <= w[0]);
    println!(
        "convergence: errors {} over the sweep, total reduction {:.1}x",
        if monotone { "decrease monotonically" } else { "are NOT monotone" },
        errors.first().unwrap_or(&f64::NAN) / errors.last().unwrap_or(&f64::NAN)
    );
    Ok(())
}
