//! Dictionary-learning baseline: ITKRM training (iterative
//! thresholding + K residual means), OMP sparse coding, and the
//! patch-wise sparse-approximation prior.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::array::NdArrayF;
use crate::error::{CoreError, Result};
use crate::patchwork::{apply_prior_patchwise, PatchDenoiser, PatchScheme};
use crate::rng::substream;

/// K unit-norm atoms of dimension d = Πp, with a fixed sparsity level.
#[derive(Debug, Clone)]
pub struct DictionaryModel {
    /// atom-major storage: atom k occupies [k·d, (k+1)·d)
    atoms: Vec<f64>,
    d: usize,
    n_atoms: usize,
    sparsity: usize,
    patch_shape: Vec<usize>,
}

impl DictionaryModel {
    pub fn new(
        atoms: Vec<f64>,
        sparsity: usize,
        patch_shape: Vec<usize>,
    ) -> Result<Self> {
        let d: usize = patch_shape.iter().product();
        if d == 0 || patch_shape.is_empty() {
            return Err(CoreError::InvalidArgument("empty patch shape".into()));
        }
        if atoms.is_empty() || atoms.len() % d != 0 {
            return Err(CoreError::InvalidArgument(format!(
                "atom storage length {} is not a multiple of d = {d}",
                atoms.len()
            )));
        }
        let n_atoms = atoms.len() / d;
        if sparsity == 0 || sparsity > n_atoms {
            return Err(CoreError::InvalidArgument(format!(
                "sparsity {sparsity} must be in 1..=K ({n_atoms})"
            )));
        }
        for k in 0..n_atoms {
            let norm: f64 = atoms[k * d..(k + 1) * d]
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(CoreError::InvalidArgument(format!(
                    "atom {k} has norm {norm}, expected 1"
                )));
            }
        }
        Ok(DictionaryModel {
            atoms,
            d,
            n_atoms,
            sparsity,
            patch_shape,
        })
    }

    pub fn atom(&self, k: usize) -> &[f64] {
        &self.atoms[k * self.d..(k + 1) * self.d]
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn sparsity(&self) -> usize {
        self.sparsity
    }

    pub fn patch_shape(&self) -> &[usize] {
        &self.patch_shape
    }

    /// Synthesize D·γ from a sparse code.
    pub fn synthesize(&self, code: &SparseCode) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for (&k, &c) in code.indices.iter().zip(code.values.iter()) {
            for (o, a) in out.iter_mut().zip(self.atom(k).iter()) {
                *o += c * a;
            }
        }
        out
    }

    /// OMP-code then synthesize one patch.
    pub fn denoise(&self, patch: &NdArrayF) -> Result<NdArrayF> {
        if patch.shape() != self.patch_shape.as_slice() {
            return Err(CoreError::ShapeMismatch {
                expected: self.patch_shape.clone(),
                got: patch.shape().to_vec(),
            });
        }
        let code = omp_sparse_code(self, patch.data())?;
        NdArrayF::new(self.patch_shape.clone(), self.synthesize(&code))
    }

    /// Save as an NDF matrix of shape (d, K) plus a text sidecar
    /// `<path>.s` holding `S=<count>`.
    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let mut mat = vec![0.0; self.d * self.n_atoms];
        for k in 0..self.n_atoms {
            for i in 0..self.d {
                mat[i * self.n_atoms + k] = self.atoms[k * self.d + i];
            }
        }
        let arr = NdArrayF::new(vec![self.d, self.n_atoms], mat)?;
        crate::ndf::write_real(path, &arr)?;
        let sidecar = sidecar_path(path);
        std::fs::write(&sidecar, format!("S={}\n", self.sparsity))
            .map_err(|e| CoreError::io(sidecar, e))
    }

    /// Load a dictionary; the patch shape comes from the caller and
    /// must multiply to the stored d.
    pub fn load(path: impl AsRef<std::path::Path>, patch_shape: Vec<usize>) -> Result<Self> {
        let path = path.as_ref();
        let arr = crate::ndf::read(path)?.into_real()?;
        if arr.ndim() != 2 {
            return Err(CoreError::Malformed {
                path: path.into(),
                reason: format!("dictionary must be 2D (d, K), got {:?}", arr.shape()),
            });
        }
        let (d, n_atoms) = (arr.shape()[0], arr.shape()[1]);
        let expect_d: usize = patch_shape.iter().product();
        if expect_d != d {
            return Err(CoreError::InvalidArgument(format!(
                "patch shape {:?} multiplies to {expect_d}, dictionary has d = {d}",
                patch_shape
            )));
        }
        let sidecar = sidecar_path(path);
        let text =
            std::fs::read_to_string(&sidecar).map_err(|e| CoreError::io(sidecar.clone(), e))?;
        let sparsity = text
            .trim()
            .strip_prefix("S=")
            .and_then(|v| v.parse::<usize>().ok())
            .ok_or_else(|| CoreError::Malformed {
                path: sidecar,
                reason: "expected a single line 'S=<count>'".into(),
            })?;
        let mut atoms = vec![0.0; d * n_atoms];
        for k in 0..n_atoms {
            for i in 0..d {
                atoms[k * d + i] = arr.data()[i * n_atoms + k];
            }
        }
        DictionaryModel::new(atoms, sparsity, patch_shape)
    }
}

fn sidecar_path(path: &std::path::Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_os_string();
    os.push(".s");
    std::path::PathBuf::from(os)
}

/// An S-sparse coefficient vector in support/value form.
#[derive(Debug, Clone, Default)]
pub struct SparseCode {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseCode {
    pub fn to_dense(&self, n_atoms: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_atoms];
        for (&k, &v) in self.indices.iter().zip(self.values.iter()) {
            out[k] = v;
        }
        out
    }
}

/// Cholesky solve of a small SPD system; `None` when a pivot is not
/// safely positive (rank-deficient support).
fn cholesky_solve(gram: &[f64], n: usize, rhs: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = gram[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 1e-13 {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    // forward then backward substitution
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = rhs[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    Some(x)
}

/// Least-squares coefficients of `signal` on the atoms in `support`.
fn refit(dict: &DictionaryModel, support: &[usize], signal: &[f64]) -> Option<Vec<f64>> {
    let m = support.len();
    let mut gram = vec![0.0; m * m];
    let mut rhs = vec![0.0; m];
    for (a, &ka) in support.iter().enumerate() {
        let atom_a = dict.atom(ka);
        rhs[a] = atom_a.iter().zip(signal.iter()).map(|(x, y)| x * y).sum();
        for (b, &kb) in support.iter().enumerate().take(a + 1) {
            let g: f64 = atom_a
                .iter()
                .zip(dict.atom(kb).iter())
                .map(|(x, y)| x * y)
                .sum();
            gram[a * m + b] = g;
            gram[b * m + a] = g;
        }
    }
    cholesky_solve(&gram, m, &rhs)
}

/// Orthogonal matching pursuit: greedily select up to S atoms by
/// residual correlation, refitting by least squares each step. Stops
/// early on a tiny residual or a rank-deficient support.
pub fn omp_sparse_code(dict: &DictionaryModel, signal: &[f64]) -> Result<SparseCode> {
    if signal.len() != dict.dim() {
        return Err(CoreError::InvalidArgument(format!(
            "signal length {} != atom dimension {}",
            signal.len(),
            dict.dim()
        )));
    }
    let mut support: Vec<usize> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut residual = signal.to_vec();
    for _ in 0..dict.sparsity() {
        let rnorm: f64 = residual.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm < 1e-12 {
            break;
        }
        let mut best = usize::MAX;
        let mut best_corr = -1.0;
        for k in 0..dict.n_atoms() {
            if support.contains(&k) {
                continue;
            }
            let corr: f64 = dict
                .atom(k)
                .iter()
                .zip(residual.iter())
                .map(|(a, r)| a * r)
                .sum();
            if corr.abs() > best_corr {
                best_corr = corr.abs();
                best = k;
            }
        }
        if best == usize::MAX {
            break;
        }
        support.push(best);
        match refit(dict, &support, signal) {
            Some(coeffs) => {
                values = coeffs;
                // recompute the residual on the refit support
                residual.copy_from_slice(signal);
                for (&k, &c) in support.iter().zip(values.iter()) {
                    for (r, a) in residual.iter_mut().zip(dict.atom(k).iter()) {
                        *r -= c * a;
                    }
                }
            }
            None => {
                support.pop();
                break;
            }
        }
    }
    Ok(SparseCode {
        indices: support,
        values,
    })
}

/// One ITKRM iteration: threshold every patch to its S best-correlated
/// atoms, then replace each atom by the normalized signed sum of
/// (patch residual + the atom's own contribution) over the patches
/// that selected it. Atoms selected by no patch are redrawn from a
/// random normalized training patch.
pub fn itkrm_step(
    dict: &DictionaryModel,
    patches: &[Vec<f64>],
    rng: &mut ChaCha12Rng,
) -> Result<DictionaryModel> {
    let d = dict.dim();
    let k_atoms = dict.n_atoms();
    let s = dict.sparsity();
    let mut new_atoms = vec![0.0; d * k_atoms];
    let mut selected = vec![false; k_atoms];

    for patch in patches {
        if patch.len() != d {
            return Err(CoreError::InvalidArgument(format!(
                "training patch length {} != d = {d}",
                patch.len()
            )));
        }
        // thresholding: S largest |<atom, patch>|
        let corrs: Vec<f64> = (0..k_atoms)
            .map(|k| {
                dict.atom(k)
                    .iter()
                    .zip(patch.iter())
                    .map(|(a, y)| a * y)
                    .sum()
            })
            .collect();
        let mut order: Vec<usize> = (0..k_atoms).collect();
        order.sort_by(|&a, &b| {
            corrs[b]
                .abs()
                .partial_cmp(&corrs[a].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let support: Vec<usize> = order[..s].to_vec();

        // projection of the patch onto the selected span
        let proj = match refit(dict, &support, patch) {
            Some(coeffs) => {
                let mut p = vec![0.0; d];
                for (&k, &c) in support.iter().zip(coeffs.iter()) {
                    for (pv, av) in p.iter_mut().zip(dict.atom(k).iter()) {
                        *pv += c * av;
                    }
                }
                p
            }
            None => vec![0.0; d],
        };

        for &k in &support {
            selected[k] = true;
            let c = corrs[k];
            let sign = if c >= 0.0 { 1.0 } else { -1.0 };
            let atom = dict.atom(k);
            let dst = &mut new_atoms[k * d..(k + 1) * d];
            for i in 0..d {
                // residual plus the atom's own contribution, signed
                dst[i] += sign * (patch[i] - proj[i]) + c.abs() * atom[i];
            }
        }
    }

    for k in 0..k_atoms {
        let dst = &mut new_atoms[k * d..(k + 1) * d];
        let norm: f64 = dst.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !selected[k] || norm < 1e-12 {
            let replacement = draw_normalized_patch(patches, rng, d)?;
            dst.copy_from_slice(&replacement);
        } else {
            for v in dst.iter_mut() {
                *v /= norm;
            }
        }
    }
    DictionaryModel::new(new_atoms, s, dict.patch_shape().to_vec())
}

fn draw_normalized_patch(
    patches: &[Vec<f64>],
    rng: &mut ChaCha12Rng,
    d: usize,
) -> Result<Vec<f64>> {
    for _ in 0..64 {
        let p = &patches[rng.gen_range(0..patches.len())];
        let norm: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return Ok(p.iter().map(|v| v / norm).collect());
        }
    }
    // all-zero training set: fall back to a coordinate atom
    let mut out = vec![0.0; d];
    out[0] = 1.0;
    Ok(out)
}

/// Train a dictionary by `n_iters` ITKRM iterations, initialized from
/// randomly chosen normalized training patches; deterministic per seed.
pub fn itkrm_train(
    patches: &[Vec<f64>],
    n_atoms: usize,
    sparsity: usize,
    n_iters: usize,
    seed: u64,
    patch_shape: Vec<usize>,
) -> Result<DictionaryModel> {
    let d: usize = patch_shape.iter().product();
    if d == 0 || n_atoms == 0 {
        return Err(CoreError::InvalidArgument(
            "patch dimension and atom count must be positive".into(),
        ));
    }
    if sparsity > n_atoms {
        return Err(CoreError::InvalidArgument(format!(
            "sparsity {sparsity} exceeds atom count {n_atoms}"
        )));
    }
    if patches.len() < n_atoms {
        return Err(CoreError::InvalidArgument(format!(
            "need at least K = {n_atoms} training patches, got {}",
            patches.len()
        )));
    }
    let mut rng = substream(seed, "itkrm");
    let mut atoms = Vec::with_capacity(n_atoms * d);
    for _ in 0..n_atoms {
        atoms.extend(draw_normalized_patch(patches, &mut rng, d)?);
    }
    let mut dict = DictionaryModel::new(atoms, sparsity, patch_shape)?;
    for _ in 0..n_iters {
        dict = itkrm_step(&dict, patches, &mut rng)?;
    }
    Ok(dict)
}

struct DictDenoiser<'a>(&'a DictionaryModel);

impl PatchDenoiser for DictDenoiser<'_> {
    fn expected_patch_shape(&self) -> Option<&[usize]> {
        Some(self.0.patch_shape())
    }
    fn denoise(&self, patch: &NdArrayF) -> Result<NdArrayF> {
        self.0.denoise(patch)
    }
}

/// Patch-wise sparse approximation of an image: every patch is
/// OMP-coded and synthesized, then reassembled with coverage weights.
pub fn dictionary_prior(
    x_ini: &NdArrayF,
    scheme: &PatchScheme,
    dict: &DictionaryModel,
) -> Result<NdArrayF> {
    if scheme.patch_shape() != dict.patch_shape() {
        return Err(CoreError::ShapeMismatch {
            expected: dict.patch_shape().to_vec(),
            got: scheme.patch_shape().to_vec(),
        });
    }
    apply_prior_patchwise(x_ini, scheme, &DictDenoiser(dict))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patchwork::Boundary;
    use rand::SeedableRng;

    fn identity_dictionary(d: usize, sparsity: usize, patch_shape: Vec<usize>) -> DictionaryModel {
        let mut atoms = vec![0.0; d * d];
        for k in 0..d {
            atoms[k * d + k] = 1.0;
        }
        DictionaryModel::new(atoms, sparsity, patch_shape).unwrap()
    }

    /// Random orthonormal atoms via Gram-Schmidt.
    fn orthonormal_dictionary(d: usize, sparsity: usize, seed: u64) -> DictionaryModel {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let mut atoms: Vec<Vec<f64>> = Vec::new();
        while atoms.len() < d {
            let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for a in &atoms {
                let dot: f64 = a.iter().zip(v.iter()).map(|(x, y)| x * y).sum();
                for (vi, ai) in v.iter_mut().zip(a.iter()) {
                    *vi -= dot * ai;
                }
            }
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                atoms.push(v.into_iter().map(|x| x / norm).collect());
            }
        }
        DictionaryModel::new(atoms.concat(), sparsity, vec![d]).unwrap()
    }

    #[test]
    fn construction_rejects_bad_inputs() {
        assert!(DictionaryModel::new(vec![1.0, 0.0, 0.0, 1.0], 0, vec![2]).is_err());
        assert!(DictionaryModel::new(vec![1.0, 0.0, 0.0, 1.0], 3, vec![2]).is_err());
        // non-unit atom
        assert!(DictionaryModel::new(vec![2.0, 0.0], 1, vec![2]).is_err());
    }

    #[test]
    fn omp_picks_the_single_active_atom() {
        let dict = identity_dictionary(8, 1, vec![8]);
        let mut signal = vec![0.0; 8];
        signal[2] = 5.0;
        let code = omp_sparse_code(&dict, &signal).unwrap();
        assert_eq!(code.indices, vec![2]);
        assert!((code.values[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn omp_of_zero_is_empty() {
        let dict = identity_dictionary(8, 3, vec![8]);
        let code = omp_sparse_code(&dict, &vec![0.0; 8]).unwrap();
        assert!(code.indices.is_empty());
        assert!(dict.synthesize(&code).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn omp_exact_recovery_in_orthonormal_dictionaries() {
        let d = 16;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(50);
        for trial in 0..100 {
            let dict = orthonormal_dictionary(d, 3, 1000 + trial);
            let k_count = rng.gen_range(1..=3usize);
            let mut truth = SparseCode::default();
            while truth.indices.len() < k_count {
                let k = rng.gen_range(0..d);
                if !truth.indices.contains(&k) {
                    truth.indices.push(k);
                    truth.values.push(rng.gen_range(0.5..2.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 });
                }
            }
            let signal = dict.synthesize(&truth);
            let code = omp_sparse_code(&dict, &signal).unwrap();
            let got = code.to_dense(d);
            let want = truth.to_dense(d);
            for i in 0..d {
                assert!(
                    (got[i] - want[i]).abs() <= 1e-10,
                    "trial {trial}, coeff {i}: {} vs {}",
                    got[i],
                    want[i]
                );
            }
        }
    }

    #[test]
    fn omp_residual_is_monotone() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let d = 12;
        // overcomplete random dictionary
        let k_atoms = 30;
        let mut atoms = Vec::new();
        for _ in 0..k_atoms {
            let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            atoms.extend(v.into_iter().map(|x| x / n));
        }
        let dict = DictionaryModel::new(atoms, 6, vec![d]).unwrap();
        let signal: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // re-run OMP step by step via sparsity-truncated dictionaries
        let mut last = f64::INFINITY;
        for s in 1..=6 {
            let trunc =
                DictionaryModel::new(dict.atoms.clone(), s, vec![d]).unwrap();
            let code = omp_sparse_code(&trunc, &signal).unwrap();
            let approx = trunc.synthesize(&code);
            let r: f64 = signal
                .iter()
                .zip(approx.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(r <= last + 1e-12, "S={s}: residual {r} > previous {last}");
            last = r;
        }
    }

    #[test]
    fn itkrm_orthonormal_fixed_point() {
        let d = 8;
        let s = 2;
        let dict = orthonormal_dictionary(d, s, 7);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(8);
        // exactly 2-sparse data in this basis
        let patches: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                let mut code = SparseCode::default();
                while code.indices.len() < s {
                    let k = rng.gen_range(0..d);
                    if !code.indices.contains(&k) {
                        code.indices.push(k);
                        code.values.push(rng.gen_range(0.5..2.0));
                    }
                }
                dict.synthesize(&code)
            })
            .collect();
        let mut step_rng = substream(1, "itkrm-test");
        let updated = itkrm_step(&dict, &patches, &mut step_rng).unwrap();
        for k in 0..d {
            // unchanged up to sign
            let dot: f64 = dict
                .atom(k)
                .iter()
                .zip(updated.atom(k).iter())
                .map(|(a, b)| a * b)
                .sum();
            let dev: f64 = dict
                .atom(k)
                .iter()
                .zip(updated.atom(k).iter())
                .map(|(a, b)| (a - dot.signum() * b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(dev <= 1e-10, "atom {k} moved by {dev}");
        }
    }

    #[test]
    fn itkrm_keeps_atoms_unit_norm() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(12);
        let d = 16;
        let patches: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let dict = itkrm_train(&patches, 32, 4, 5, 77, vec![4, 4]).unwrap();
        for k in 0..dict.n_atoms() {
            let n: f64 = dict.atom(k).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn itkrm_improves_sparse_approximation() {
        // noisy sparse data: training should beat the random init
        let d = 16;
        let k_atoms = 24;
        let s = 3;
        let gen_dict = orthonormal_dictionary(d, s, 15);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(16);
        let patches: Vec<Vec<f64>> = (0..400)
            .map(|_| {
                let mut code = SparseCode::default();
                while code.indices.len() < s {
                    let k = rng.gen_range(0..d);
                    if !code.indices.contains(&k) {
                        code.indices.push(k);
                        code.values.push(rng.gen_range(0.5..2.0));
                    }
                }
                gen_dict
                    .synthesize(&code)
                    .into_iter()
                    .map(|v| v + 0.02 * rng.gen_range(-1.0..1.0))
                    .collect()
            })
            .collect();
        let approx_err = |dict: &DictionaryModel| -> f64 {
            patches
                .iter()
                .map(|p| {
                    let code = omp_sparse_code(dict, p).unwrap();
                    let a = dict.synthesize(&code);
                    p.iter()
                        .zip(a.iter())
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                })
                .sum::<f64>()
        };
        let init = itkrm_train(&patches, k_atoms, s, 0, 5, vec![16]).unwrap();
        let trained = itkrm_train(&patches, k_atoms, s, 10, 5, vec![16]).unwrap();
        let (e0, e1) = (approx_err(&init), approx_err(&trained));
        assert!(e1 < e0, "training error {e1} should beat init {e0}");
    }

    #[test]
    fn itkrm_validates_arguments() {
        let patches = vec![vec![1.0, 0.0]; 4];
        assert!(itkrm_train(&patches, 3, 4, 1, 0, vec![2]).is_err()); // S > K
        assert!(itkrm_train(&patches, 0, 1, 1, 0, vec![2]).is_err());
        assert!(itkrm_train(&patches, 8, 1, 1, 0, vec![2]).is_err()); // too few patches
    }

    #[test]
    fn complete_identity_basis_is_lossless() {
        let dict = identity_dictionary(16, 16, vec![4, 4]);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(20);
        let patch = NdArrayF::from_fn(vec![4, 4], |_| rng.gen_range(-1.0..1.0)).unwrap();
        let out = dict.denoise(&patch).unwrap();
        for (a, b) in out.data().iter().zip(patch.data().iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn dictionary_prior_reproduces_sparse_input() {
        // build an image whose every (4,4) tile is one dictionary atom
        let dict = orthonormal_dictionary(16, 3, 29);
        let dict = DictionaryModel::new(dict.atoms.clone(), 3, vec![4, 4]).unwrap();
        let mut x = NdArrayF::zeros(vec![8, 8]).unwrap();
        for (tile, origin) in [[0usize, 0], [0, 4], [4, 0], [4, 4]].iter().enumerate() {
            let atom = dict.atom(tile);
            for dy in 0..4 {
                for dx in 0..4 {
                    x.set(&[origin[0] + dy, origin[1] + dx], 1.7 * atom[dy * 4 + dx]);
                }
            }
        }
        let scheme =
            PatchScheme::new(vec![8, 8], vec![4, 4], vec![4, 4], Boundary::ExactFit).unwrap();
        let out = dictionary_prior(&x, &scheme, &dict).unwrap();
        let err = crate::array::norm2(&out.sub(&x).unwrap()) / crate::array::norm2(&x);
        assert!(err <= 1e-8, "relative error {err}");

        // zero input maps to zero
        let z = dictionary_prior(&NdArrayF::zeros(vec![8, 8]).unwrap(), &scheme, &dict).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dictionary_prior_equals_patchwise_dictionary_denoiser() {
        let dict = identity_dictionary(16, 4, vec![4, 4]);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(31);
        let x = NdArrayF::from_fn(vec![8, 8], |_| rng.gen_range(-1.0..1.0)).unwrap();
        let scheme =
            PatchScheme::new(vec![8, 8], vec![4, 4], vec![2, 2], Boundary::ExactFit).unwrap();
        let a = dictionary_prior(&x, &scheme, &dict).unwrap();
        let model = crate::priors::PriorModel::Dictionary(dict);
        let b = apply_prior_patchwise(&x, &scheme, &model).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn save_load_roundtrip_keeps_unit_norms() {
        let dict = orthonormal_dictionary(8, 2, 40);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dict.ndf");
        let dict = DictionaryModel::new(dict.atoms.clone(), 2, vec![2, 4]).unwrap();
        dict.save(&path).unwrap();
        let back = DictionaryModel::load(&path, vec![2, 4]).unwrap();
        assert_eq!(back.n_atoms(), dict.n_atoms());
        assert_eq!(back.sparsity(), 2);
        for k in 0..back.n_atoms() {
            let n: f64 = back.atom(k).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() <= 1e-10);
            assert_eq!(back.atom(k), dict.atom(k));
        }
    }
}
