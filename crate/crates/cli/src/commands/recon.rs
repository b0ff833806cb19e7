//! `prior` and `reconstruct`: the patch-prior stage and the full
//! three-stage pipeline (direct reconstruction, prior, Tikhonov
//! data-consistency solve), plus the TV baseline route.

use anyhow::{bail, Context, Result};
use recon_core::ndf;
use recon_core::operators::{ct_initial_recon, nufft_recon, RadialEncoder, ScaledOperator};
use recon_core::patchwork::{
    apply_prior_patchwise, apply_prior_patchwise_complex, apply_prior_xtyt,
};
use recon_core::priors::PriorModel;
use recon_core::solvers::{landweber_kl, pcg_normal_solve, tv_reconstruct_kl, tv_reconstruct_l2, TvConfig};
use recon_core::{NdArrayC, NdArrayF};

use crate::config::{Mode, PipelineConfig};

use super::{
    ct_model, load_prior, mri_trajectories, prior_scheme, read_coils, read_complex, read_real,
    PriorRoute,
};

fn apply_prior_real(
    cfg: &PipelineConfig,
    x: &NdArrayF,
    model: &PriorModel,
) -> Result<NdArrayF> {
    let dict = matches!(model, PriorModel::Dictionary(_));
    let scheme = prior_scheme(cfg, x.shape(), dict)?;
    Ok(apply_prior_patchwise(x, &scheme, model)?)
}

fn apply_prior_complex(
    cfg: &PipelineConfig,
    x: &NdArrayC,
    model: &PriorModel,
    route: PriorRoute,
) -> Result<NdArrayC> {
    match route {
        PriorRoute::Xtyt => Ok(apply_prior_xtyt(x, model)?),
        PriorRoute::Patch => {
            let dict = matches!(model, PriorModel::Dictionary(_));
            let scheme = prior_scheme(cfg, x.shape(), dict)?;
            Ok(apply_prior_patchwise_complex(x, &scheme, model)?)
        }
    }
}

/// Apply the configured prior to `io.x_ini`, writing `io.x_prior`.
pub fn cmd_prior(cfg: &PipelineConfig) -> Result<()> {
    let (model, route) = load_prior(cfg)?;
    let input = cfg.path("io.x_ini")?;
    let out = cfg.path("io.x_prior")?;
    match ndf::read(&input)? {
        ndf::NdfArray::Real(x) => {
            let p = apply_prior_real(cfg, &x, &model)?;
            ndf::write_real(&out, &p)?;
        }
        ndf::NdfArray::Complex(x) => {
            let p = apply_prior_complex(cfg, &x, &model, route)?;
            ndf::write_complex(&out, &p)?;
        }
    }
    println!("prior: wrote {}", out.display());
    Ok(())
}

#[derive(PartialEq, Eq)]
enum Method {
    Tikhonov,
    Tv,
}

fn method_from(cfg: &PipelineConfig) -> Result<Method> {
    match cfg.get("recon.method").unwrap_or("tikhonov") {
        "tikhonov" => Ok(Method::Tikhonov),
        "tv" => Ok(Method::Tv),
        other => bail!("recon.method must be `tikhonov` or `tv`, got `{other}`"),
    }
}

/// The full pipeline: initial reconstruction, prior image, and the
/// data-consistency solve; writes all three stages plus the solver
/// report.
pub fn cmd_reconstruct(cfg: &PipelineConfig) -> Result<()> {
    match cfg.mode()? {
        Mode::Ct => reconstruct_ct(cfg),
        Mode::Mri => reconstruct_mri(cfg),
    }
}

fn reconstruct_ct(cfg: &PipelineConfig) -> Result<()> {
    let model = ct_model(cfg)?;
    let y = read_real(&cfg.path("io.data")?).context("stage 1: reading measured data")?;

    let x_ini = ct_initial_recon(&y, &model).context("stage 1: FBP reconstruction")?;
    ndf::write_real(cfg.path("io.x_ini")?, &x_ini).context("stage 1: writing x_ini")?;

    let method = method_from(cfg)?;
    let lambda = cfg.f64_or("solver.lambda", 1.0)?;
    let iters = cfg.usize_or("solver.iters", 4)?;
    let (x_rec, report) = match method {
        Method::Tikhonov => {
            let (prior_model, _) = load_prior(cfg).context("stage 2: loading prior model")?;
            let x_prior =
                apply_prior_real(cfg, &x_ini, &prior_model).context("stage 2: prior image")?;
            ndf::write_real(cfg.path("io.x_prior")?, &x_prior)
                .context("stage 2: writing x_prior")?;
            let tau = cfg.f64_auto("solver.tau")?;
            // iterate from the prior: the few early-stopped steps then
            // trade prior smoothness for data consistency
            landweber_kl(&model, &y, lambda, &x_prior, iters, tau, Some(&x_prior))
                .context("stage 3: Landweber solve")?
        }
        Method::Tv => {
            let tv_cfg = TvConfig {
                rho: cfg.f64_or("tv.rho", 1.0)?,
                n_outer: cfg.usize_or("tv.outer", 16)?,
                n_inner: cfg.usize_or("tv.inner", 8)?,
                inner_tol: cfg.f64_or("solver.tol", 1e-10)?,
            };
            let lambda_tv = cfg.f64_or("tv.lambda", 1.0)?;
            tv_reconstruct_kl(&model, &y, lambda_tv, &tv_cfg, Some(&x_ini))
                .context("stage 3: TV solve")?
        }
    };
    ndf::write_real(cfg.path("io.x_rec")?, &x_rec).context("stage 3: writing x_rec")?;
    write_report(cfg, &report)?;
    println!(
        "reconstruct: final objective {:.6e} after {} iterations",
        report.objective.last().unwrap(),
        report.iterations
    );
    Ok(())
}

fn reconstruct_mri(cfg: &PipelineConfig) -> Result<()> {
    let y = read_complex(&cfg.path("io.data")?).context("stage 1: reading k-space data")?;
    let coils = read_coils(&cfg.path("io.coils")?).context("stage 1: reading coils")?;
    if y.ndim() != 3 {
        bail!("k-space data must be (n_c, Nt, m), got {:?}", y.shape());
    }
    let trajs = mri_trajectories(cfg, y.shape()[1])?;
    let x_ini =
        nufft_recon(&y, &coils, &trajs).context("stage 1: NUFFT reconstruction")?;
    ndf::write_complex(cfg.path("io.x_ini")?, &x_ini).context("stage 1: writing x_ini")?;

    // solve on the isometry-normalized encoder E/sqrt(Nx·Ny) so that
    // the configured lambda carries its usual meaning
    let [nx, ny] = coils.image_shape();
    let encoder = RadialEncoder::from_trajectories(coils, &trajs)?;
    let norm = 1.0 / ((nx * ny) as f64).sqrt();
    let op = ScaledOperator::new(&encoder, norm);
    let y_norm = y.scaled(norm);

    let method = method_from(cfg)?;
    let lambda = cfg.f64_or("solver.lambda", 0.1)?;
    let iters = cfg.usize_or("solver.iters", 16)?;
    let tol = cfg.f64_or("solver.tol", 0.0)?;
    let (x_rec, report) = match method {
        Method::Tikhonov => {
            let (prior_model, route) = load_prior(cfg).context("stage 2: loading prior model")?;
            let x_prior = apply_prior_complex(cfg, &x_ini, &prior_model, route)
                .context("stage 2: prior image")?;
            ndf::write_complex(cfg.path("io.x_prior")?, &x_prior)
                .context("stage 2: writing x_prior")?;
            pcg_normal_solve(&op, &y_norm, lambda, &x_prior, iters, tol)
                .context("stage 3: PCG solve")?
        }
        Method::Tv => {
            let tv_cfg = TvConfig {
                rho: cfg.f64_or("tv.rho", 1.0)?,
                n_outer: cfg.usize_or("tv.outer", 16)?,
                n_inner: cfg.usize_or("tv.inner", 8)?,
                inner_tol: cfg.f64_or("solver.tol", 1e-10)?,
            };
            let lambda_tv = cfg.f64_or("tv.lambda", 1.0)?;
            tv_reconstruct_l2(&op, &y_norm, lambda_tv, &tv_cfg).context("stage 3: TV solve")?
        }
    };
    ndf::write_complex(cfg.path("io.x_rec")?, &x_rec).context("stage 3: writing x_rec")?;
    write_report(cfg, &report)?;
    println!(
        "reconstruct: final objective {:.6e} after {} iterations",
        report.objective.last().unwrap(),
        report.iterations
    );
    Ok(())
}

fn write_report(cfg: &PipelineConfig, report: &recon_core::SolveReport) -> Result<()> {
    if let Some(path) = cfg.get("io.report") {
        std::fs::write(path, report.to_csv())
            .with_context(|| format!("writing report {path}"))?;
    }
    Ok(())
}
