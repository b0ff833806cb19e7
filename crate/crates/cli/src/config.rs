//! Flat `key = value` pipeline configuration with a closed key set.
//!
//! Unknown keys are rejected, `#` starts a comment, and `--set
//! key=value` overrides win over the file. `dump()` emits a sorted
//! listing that re-parses to the same configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};

/// Every key the pipeline understands, with a one-line description.
pub const KNOWN_KEYS: &[(&str, &str)] = &[
    ("mode", "application path: ct | mri"),
    ("seed", "master seed; all randomness derives from it"),
    ("phantom.variant", "deterministic phantom perturbation index (0 = canonical)"),
    ("ct.n", "CT image side"),
    ("ct.angles", "number of projection angles on [0, pi)"),
    ("ct.bins", "detector bin count (defaults to the image diagonal)"),
    ("ct.photons", "mean photon count per detector bin"),
    ("ct.mu", "attenuation coefficient"),
    ("mri.n", "MRI image side"),
    ("mri.frames", "number of cine frames"),
    ("mri.coils", "number of receiver coils"),
    ("mri.spokes", "acquired radial spokes per frame"),
    ("mri.spokes_full", "fully sampled spokes per frame (reference)"),
    ("mri.samples", "samples per spoke"),
    ("patch.p", "prior patch size per axis, comma-separated"),
    ("patch.s", "prior reassembly strides per axis, comma-separated"),
    ("patch.boundary", "patch grid boundary policy: exact | clamp"),
    ("prior.kind", "identity | gauss | convnet | dictionary"),
    ("prior.route", "patch | xtyt (defaults: ct->patch, mri->xtyt)"),
    ("prior.sigma", "gaussian prior width"),
    ("prior.weights", "CNW1 weight file for the convnet prior"),
    ("prior.dict", "NDF dictionary file (with .s sidecar)"),
    ("dict.patch", "dictionary patch size per axis"),
    ("dict.stride", "dictionary coding strides per axis"),
    ("dict.atoms", "dictionary atom count K (default 4*d)"),
    ("dict.sparsity", "OMP sparsity level S"),
    ("dict.iters", "ITKRM iteration count"),
    ("dict.refresh", "resample the training patch budget every ITKRM iteration: 0 | 1"),
    ("train.kind", "what `train` produces: convnet | dictionary"),
    ("train.noisy", "semicolon-separated NDF paths of initial reconstructions"),
    ("train.clean", "semicolon-separated NDF paths of ground truths"),
    ("train.s", "patch extraction strides used for training (default patch.s)"),
    ("train.epochs", "training epochs"),
    ("train.batch", "minibatch size"),
    ("train.lr", "Adam learning rate"),
    ("train.budget", "max training patches (0 = all), subsampled by seed"),
    ("train.channels", "hidden channel widths of the denoiser, comma-separated"),
    ("train.log", "CSV path for the loss trace"),
    ("solver.lambda", "Tikhonov weight (defaults: ct 1.0, mri 0.1)"),
    ("solver.iters", "solver iteration cap (defaults: ct 4, mri 16)"),
    ("solver.tau", "Landweber step size, or `auto`"),
    ("solver.tol", "PCG relative-residual tolerance"),
    ("recon.method", "reconstruct subcommand method: tikhonov | tv"),
    ("tv.lambda", "TV regularization weight"),
    ("tv.rho", "TV splitting penalty"),
    ("tv.outer", "TV outer iterations"),
    ("tv.inner", "TV inner iterations"),
    ("metrics.peak", "PSNR peak, or `auto` (max of reference per slice)"),
    ("metrics.range", "SSIM dynamic range, or `auto` (reference range per slice)"),
    ("render.center", "window center"),
    ("render.width", "window width"),
    ("render.slice", "slice index for 3D inputs"),
    ("conv.rows", "convergence experiment: matrix rows"),
    ("conv.cols", "convergence experiment: matrix cols"),
    ("conv.deltas", "comma-separated noise levels"),
    ("io.phantom", "phantom NDF path"),
    ("io.coils", "coil profile NDF path (complex, shape n_c x N x N)"),
    ("io.data", "measured data NDF path"),
    ("io.x_ini", "initial reconstruction NDF path"),
    ("io.x_prior", "prior image NDF path"),
    ("io.x_rec", "final reconstruction NDF path"),
    ("io.report", "solver report CSV path"),
    ("io.weights", "trained CNW1 output path"),
    ("io.dict", "trained dictionary output path"),
    ("io.metrics", "metrics CSV path"),
    ("io.input", "generic input NDF (evaluate/render)"),
    ("io.reference", "reference NDF (evaluate)"),
    ("io.image", "PGM output path (render)"),
    ("io.table", "convergence table CSV path"),
];

fn is_known(key: &str) -> bool {
    KNOWN_KEYS.iter().any(|(k, _)| *k == key)
}

#[derive(Debug, Clone, Default)]
pub struct PipelineConfig {
    values: BTreeMap<String, String>,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`, got `{raw}`", lineno + 1))?;
            let key = key.trim();
            let value = value.trim();
            if !is_known(key) {
                bail!("line {}: unknown configuration key `{key}`", lineno + 1);
            }
            if values.insert(key.to_string(), value.to_string()).is_some() {
                bail!("line {}: duplicate key `{key}`", lineno + 1);
            }
        }
        Ok(PipelineConfig { values })
    }

    pub fn load(path: &PathBuf) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Apply `--set key=value` overrides.
    pub fn apply_overrides(&mut self, sets: &[String]) -> Result<()> {
        for s in sets {
            let (key, value) = s
                .split_once('=')
                .ok_or_else(|| anyhow!("--set expects key=value, got `{s}`"))?;
            let key = key.trim();
            if !is_known(key) {
                bail!("--set: unknown configuration key `{key}`");
            }
            self.values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(())
    }

    /// Sorted `key = value` listing; parses back to the same map.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        debug_assert!(is_known(key), "unlisted key {key}");
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| anyhow!("missing required configuration key `{key}`"))
    }

    pub fn mode(&self) -> Result<Mode> {
        match self.require("mode")? {
            "ct" => Ok(Mode::Ct),
            "mri" => Ok(Mode::Mri),
            other => bail!("mode must be `ct` or `mri`, got `{other}`"),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .with_context(|| format!("key `{key}`: expected an integer, got `{v}`")),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .with_context(|| format!("key `{key}`: expected an integer, got `{v}`")),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .with_context(|| format!("key `{key}`: expected a number, got `{v}`")),
        }
    }

    /// `auto` (or absence) maps to None.
    pub fn f64_auto(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some("auto") => Ok(None),
            Some(v) => Ok(Some(v.parse().with_context(|| {
                format!("key `{key}`: expected a number or `auto`, got `{v}`")
            })?)),
        }
    }

    pub fn usize_list_or(&self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse()
                        .with_context(|| format!("key `{key}`: bad integer `{p}`"))
                })
                .collect(),
        }
    }

    pub fn f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse()
                        .with_context(|| format!("key `{key}`: bad number `{p}`"))
                })
                .collect(),
        }
    }

    pub fn path(&self, key: &str) -> Result<PathBuf> {
        Ok(PathBuf::from(self.require(key)?))
    }

    pub fn path_list(&self, key: &str) -> Result<Vec<PathBuf>> {
        Ok(self
            .require(key)?
            .split(';')
            .map(|p| PathBuf::from(p.trim()))
            .collect())
    }

    pub fn seed(&self) -> Result<u64> {
        self.u64_or("seed", 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Ct,
    Mri,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_dump_roundtrip() {
        let cfg = PipelineConfig::parse(
            "# comment\nmode = ct\nseed = 7\nct.n = 64 # trailing comment\n",
        )
        .unwrap();
        assert_eq!(cfg.get("mode"), Some("ct"));
        assert_eq!(cfg.usize_or("ct.n", 0).unwrap(), 64);
        let dumped = cfg.dump();
        let back = PipelineConfig::parse(&dumped).unwrap();
        assert_eq!(back.dump(), dumped);
    }

    #[test]
    fn unknown_and_duplicate_keys_rejected() {
        assert!(PipelineConfig::parse("bogus = 1\n").is_err());
        assert!(PipelineConfig::parse("mode = ct\nmode = mri\n").is_err());
    }

    #[test]
    fn overrides_win() {
        let mut cfg = PipelineConfig::parse("mode = ct\n").unwrap();
        cfg.apply_overrides(&["mode=mri".to_string()]).unwrap();
        assert_eq!(cfg.mode().unwrap(), Mode::Mri);
        assert!(cfg.apply_overrides(&["nope=1".to_string()]).is_err());
    }

    #[test]
    fn typed_getters() {
        let cfg = PipelineConfig::parse(
            "patch.p = 16, 16\nsolver.tau = auto\nconv.deltas = 1e-1, 1e-3\n",
        )
        .unwrap();
        assert_eq!(cfg.usize_list_or("patch.p", &[]).unwrap(), vec![16, 16]);
        assert_eq!(cfg.f64_auto("solver.tau").unwrap(), None);
        assert_eq!(
            cfg.f64_list("conv.deltas", &[]).unwrap(),
            vec![1e-1, 1e-3]
        );
        assert!(cfg.require("io.data").is_err());
    }
}
