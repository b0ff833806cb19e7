//! `train`: fit the convolutional denoiser on (initial, ground-truth)
//! patch pairs, or learn a dictionary on ground-truth patches.

use anyhow::{bail, Context, Result};
use rand::Rng;
use recon_core::ndf;
use recon_core::patchwork::{extract_patch, PatchScheme};
use recon_core::priors::convnet::{self, Activation, ConvNetSpec, LayerSpec, TrainConfig};
use recon_core::priors::dictionary::{itkrm_step, itkrm_train};
use recon_core::rng::substream;
use recon_core::{NdArrayC, NdArrayF};

use crate::config::PipelineConfig;

use super::boundary_from;

/// Denoiser layer chain from hidden channel widths: 3×3 kernels, ReLU
/// between, residual output.
fn net_spec(channels: &[usize]) -> ConvNetSpec {
    let mut widths = vec![1usize];
    widths.extend_from_slice(channels);
    widths.push(1);
    let layers = widths
        .windows(2)
        .enumerate()
        .map(|(i, w)| LayerSpec {
            kernel: 3,
            in_ch: w[0],
            out_ch: w[1],
            bias: true,
            activation: if i + 2 == widths.len() {
                Activation::None
            } else {
                Activation::Relu
            },
        })
        .collect();
    ConvNetSpec {
        layers,
        residual: true,
    }
}

fn budget_subsample<T>(items: Vec<T>, budget: usize, seed: u64) -> Vec<T> {
    if budget == 0 || items.len() <= budget {
        return items;
    }
    let mut rng = substream(seed, "train-subsample");
    let mut order: Vec<usize> = (0..items.len()).collect();
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let keep: std::collections::BTreeSet<usize> = order[..budget].iter().copied().collect();
    items
        .into_iter()
        .enumerate()
        .filter_map(|(i, v)| keep.contains(&i).then_some(v))
        .collect()
}

/// All (noisy, clean) training patches of a CT image pair.
fn ct_patch_pairs(
    cfg: &PipelineConfig,
    noisy: &NdArrayF,
    clean: &NdArrayF,
) -> Result<Vec<(NdArrayF, NdArrayF)>> {
    let p = cfg.usize_list_or("patch.p", &[16, 16])?;
    let s_default = cfg.usize_list_or("patch.s", &[8, 8])?;
    let s = cfg.usize_list_or("train.s", &s_default)?;
    let scheme = PatchScheme::new(noisy.shape().to_vec(), p, s, boundary_from(cfg)?)?;
    let mut pairs = Vec::with_capacity(scheme.patch_count());
    for origin in scheme.origins() {
        pairs.push((
            extract_patch(noisy, &origin, scheme.patch_shape())?,
            extract_patch(clean, &origin, scheme.patch_shape())?,
        ));
    }
    Ok(pairs)
}

/// All spatio-temporal slices (xt and yt, real and imaginary) of an
/// MRI sequence pair.
fn mri_slice_pairs(noisy: &NdArrayC, clean: &NdArrayC) -> Result<Vec<(NdArrayF, NdArrayF)>> {
    if noisy.ndim() != 3 {
        bail!("MRI training arrays must be (N, N, Nt), got {:?}", noisy.shape());
    }
    let (nx, ny, nt) = (noisy.shape()[0], noisy.shape()[1], noisy.shape()[2]);
    let mut out = Vec::with_capacity(2 * (nx + ny));
    for part in 0..2 {
        let (na, ca) = if part == 0 {
            (noisy.re_part(), clean.re_part())
        } else {
            (noisy.im_part(), clean.im_part())
        };
        for y in 0..ny {
            out.push((
                NdArrayF::from_fn(vec![nx, nt], |ix| na.get(&[ix[0], y, ix[1]]))?,
                NdArrayF::from_fn(vec![nx, nt], |ix| ca.get(&[ix[0], y, ix[1]]))?,
            ));
        }
        for x in 0..nx {
            out.push((
                NdArrayF::from_fn(vec![ny, nt], |ix| na.get(&[x, ix[0], ix[1]]))?,
                NdArrayF::from_fn(vec![ny, nt], |ix| ca.get(&[x, ix[0], ix[1]]))?,
            ));
        }
    }
    Ok(out)
}

fn convnet_dataset(cfg: &PipelineConfig) -> Result<Vec<(NdArrayF, NdArrayF)>> {
    let noisy_paths = cfg.path_list("train.noisy")?;
    let clean_paths = cfg.path_list("train.clean")?;
    if noisy_paths.len() != clean_paths.len() || noisy_paths.is_empty() {
        bail!(
            "train.noisy and train.clean must list the same nonzero number of files ({} vs {})",
            noisy_paths.len(),
            clean_paths.len()
        );
    }
    let mut dataset = Vec::new();
    for (np, cp) in noisy_paths.iter().zip(clean_paths.iter()) {
        match (ndf::read(np)?, ndf::read(cp)?) {
            (ndf::NdfArray::Real(n), ndf::NdfArray::Real(c)) => {
                if n.shape() != c.shape() {
                    bail!("pair {} / {} disagrees in shape", np.display(), cp.display());
                }
                dataset.extend(ct_patch_pairs(cfg, &n, &c)?);
            }
            (ndf::NdfArray::Complex(n), ndf::NdfArray::Complex(c)) => {
                if n.shape() != c.shape() {
                    bail!("pair {} / {} disagrees in shape", np.display(), cp.display());
                }
                dataset.extend(mri_slice_pairs(&n, &c)?);
            }
            _ => bail!(
                "pair {} / {} mixes real and complex arrays",
                np.display(),
                cp.display()
            ),
        }
    }
    Ok(dataset)
}

fn train_convnet(cfg: &PipelineConfig) -> Result<()> {
    let seed = cfg.seed()?;
    let dataset = convnet_dataset(cfg)?;
    let dataset = budget_subsample(dataset, cfg.usize_or("train.budget", 0)?, seed);
    if dataset.is_empty() {
        bail!("no training patches extracted");
    }
    let channels = cfg.usize_list_or("train.channels", &[8, 8])?;
    let train_cfg = TrainConfig {
        epochs: cfg.usize_or("train.epochs", 20)?,
        batch_size: cfg.usize_or("train.batch", 32)?,
        learning_rate: cfg.f64_or("train.lr", 1e-3)?,
        seed,
        ..TrainConfig::default()
    };
    println!(
        "train: {} patches of shape {:?}, {} epochs",
        dataset.len(),
        dataset[0].0.shape(),
        train_cfg.epochs
    );
    let (net, log) = convnet::train(net_spec(&channels), &dataset, &train_cfg)
        .context("convnet training")?;
    let out = cfg.path("io.weights")?;
    net.save(&out)?;
    println!(
        "train: loss {:.6e} -> {:.6e}, wrote {}",
        log.initial_loss,
        log.final_loss,
        out.display()
    );
    if let Some(log_path) = cfg.get("train.log") {
        let mut csv = String::from("epoch,loss\r\n");
        csv.push_str(&format!("initial,{:.17e}\r\n", log.initial_loss));
        for (i, l) in log.epoch_losses.iter().enumerate() {
            csv.push_str(&format!("{},{:.17e}\r\n", i + 1, l));
        }
        csv.push_str(&format!("final,{:.17e}\r\n", log.final_loss));
        std::fs::write(log_path, csv).with_context(|| format!("writing {log_path}"))?;
    }
    Ok(())
}

/// Ground-truth patches for dictionary learning: real images yield
/// their patches, complex sequences contribute real and imaginary
/// parts separately.
fn dictionary_patches(cfg: &PipelineConfig) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let p = cfg.usize_list_or("dict.patch", &[8, 8])?;
    let s = cfg.usize_list_or("dict.stride", &[2, 2])?;
    let mut patches: Vec<Vec<f64>> = Vec::new();
    for path in cfg.path_list("train.clean")? {
        let reals: Vec<NdArrayF> = match ndf::read(&path)? {
            ndf::NdfArray::Real(a) => vec![a],
            ndf::NdfArray::Complex(a) => vec![a.re_part(), a.im_part()],
        };
        for img in reals {
            let scheme =
                PatchScheme::new(img.shape().to_vec(), p.clone(), s.clone(), boundary_from(cfg)?)?;
            for origin in scheme.origins() {
                patches
                    .push(extract_patch(&img, &origin, scheme.patch_shape())?.into_data());
            }
        }
    }
    Ok((patches, p))
}

fn train_dictionary(cfg: &PipelineConfig) -> Result<()> {
    let seed = cfg.seed()?;
    let (all_patches, patch_shape) = dictionary_patches(cfg)?;
    let d: usize = patch_shape.iter().product();
    let n_atoms = cfg.usize_or("dict.atoms", 4 * d)?;
    let sparsity = cfg.usize_or("dict.sparsity", 16)?;
    let iters = cfg.usize_or("dict.iters", 15)?;
    let budget = cfg.usize_or("train.budget", 0)?;
    let refresh = cfg.usize_or("dict.refresh", 0)? != 0;

    let dict = if refresh && budget > 0 && budget < all_patches.len() {
        // fresh patch subset every iteration, mirroring per-iteration
        // re-extraction
        let mut rng = substream(seed, "itkrm-refresh");
        let subset = budget_subsample(all_patches.clone(), budget, seed);
        let mut dict = itkrm_train(&subset, n_atoms, sparsity, 0, seed, patch_shape.clone())?;
        for it in 0..iters {
            let mut order: Vec<usize> = (0..all_patches.len()).collect();
            for i in (1..order.len()).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
            let subset: Vec<Vec<f64>> = order[..budget]
                .iter()
                .map(|&i| all_patches[i].clone())
                .collect();
            dict = itkrm_step(&dict, &subset, &mut rng)
                .with_context(|| format!("ITKRM iteration {it}"))?;
        }
        dict
    } else {
        let subset = budget_subsample(all_patches, budget, seed);
        itkrm_train(&subset, n_atoms, sparsity, iters, seed, patch_shape)
            .context("ITKRM training")?
    };
    let out = cfg.path("io.dict")?;
    dict.save(&out)?;
    println!(
        "train: dictionary {} atoms (d = {}), S = {}, wrote {}",
        dict.n_atoms(),
        dict.dim(),
        dict.sparsity(),
        out.display()
    );
    Ok(())
}

/// Train either prior model, per `train.kind`.
pub fn cmd_train(cfg: &PipelineConfig) -> Result<()> {
    // mode is read for validation even though both paths accept both
    // array flavors
    let _ = cfg.mode()?;
    match cfg.get("train.kind").unwrap_or("convnet") {
        "convnet" => train_convnet(cfg),
        "dictionary" => train_dictionary(cfg),
        other => bail!("train.kind must be `convnet` or `dictionary`, got `{other}`"),
    }
}
