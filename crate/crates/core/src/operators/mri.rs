//! Golden-angle radial Fourier encoding with coil sensitivities.
//!
//! The encoder is an exact type-2 nonuniform DFT evaluated by direct
//! summation — viable at desk-scale grids — with the adjoint as its
//! exact conjugate transpose. Sample points are grouped into affine
//! lines in k-space (spokes, or Cartesian rows in tests) so the
//! per-sample phases advance by one complex multiply per pixel.
//!
//! Conventions: pixel coordinates are integers centered at index
//! `n/2`, the forward kernel is exp(−i·k·r) with no normalization, and
//! k ranges over [−π, π).

use num_complex::Complex64;
use rayon::prelude::*;

use crate::array::NdArrayC;
use crate::error::{CoreError, Result};
use crate::operators::ImagingOperator;

/// Golden-angle increment π·(√5−1)/2 ≈ 111.246°.
pub const GOLDEN_ANGLE: f64 = std::f64::consts::PI * 0.6180339887498949;

/// Radial sampling pattern: spokes through the k-space center with
/// uniform radii in [−k_max, k_max).
#[derive(Debug, Clone)]
pub struct RadialTrajectory {
    pub spoke_angles: Vec<f64>,
    pub n_samples_per_spoke: usize,
    pub k_max: f64,
}

impl RadialTrajectory {
    pub fn n_spokes(&self) -> usize {
        self.spoke_angles.len()
    }

    pub fn n_samples(&self) -> usize {
        self.n_spokes() * self.n_samples_per_spoke
    }

    fn radius(&self, m: usize) -> f64 {
        -self.k_max + m as f64 * (2.0 * self.k_max / self.n_samples_per_spoke as f64)
    }

    /// Sample points, spoke-major.
    pub fn points(&self) -> Vec<[f64; 2]> {
        let mut pts = Vec::with_capacity(self.n_samples());
        for &phi in &self.spoke_angles {
            let (s, c) = phi.sin_cos();
            for m in 0..self.n_samples_per_spoke {
                let r = self.radius(m);
                pts.push([r * c, r * s]);
            }
        }
        pts
    }

    pub fn sampling(&self) -> FrameSampling {
        let step = 2.0 * self.k_max / self.n_samples_per_spoke as f64;
        let lines = self
            .spoke_angles
            .iter()
            .map(|&phi| {
                let (s, c) = phi.sin_cos();
                SampleLine {
                    base: [-self.k_max * c, -self.k_max * s],
                    step: [step * c, step * s],
                    n: self.n_samples_per_spoke,
                }
            })
            .collect();
        FrameSampling { lines }
    }
}

/// Spoke k at angle (k·Δ_G) mod π, samples uniform along the spoke.
pub fn golden_angle_trajectory(n_spokes: usize, n_samples: usize) -> Result<RadialTrajectory> {
    golden_angle_trajectory_from(0, n_spokes, n_samples)
}

/// Same, starting at global spoke index `start` (cine continuation).
pub fn golden_angle_trajectory_from(
    start: usize,
    n_spokes: usize,
    n_samples: usize,
) -> Result<RadialTrajectory> {
    if n_spokes < 1 || n_samples < 1 {
        return Err(CoreError::InvalidArgument(
            "spoke and sample counts must be >= 1".into(),
        ));
    }
    let spoke_angles = (start..start + n_spokes)
        .map(|k| (k as f64 * GOLDEN_ANGLE) % std::f64::consts::PI)
        .collect();
    Ok(RadialTrajectory {
        spoke_angles,
        n_samples_per_spoke: n_samples,
        k_max: std::f64::consts::PI,
    })
}

/// Per-frame trajectories for a cine acquisition: the golden-angle
/// sequence continues across frames.
pub fn golden_angle_frames(
    n_frames: usize,
    spokes_per_frame: usize,
    n_samples: usize,
) -> Result<Vec<RadialTrajectory>> {
    (0..n_frames)
        .map(|t| golden_angle_trajectory_from(t * spokes_per_frame, spokes_per_frame, n_samples))
        .collect()
}

/// Uniformly spaced samples along an affine line in k-space:
/// k_m = base + m·step.
#[derive(Debug, Clone)]
pub struct SampleLine {
    pub base: [f64; 2],
    pub step: [f64; 2],
    pub n: usize,
}

/// All k-space samples of one frame, grouped into lines.
#[derive(Debug, Clone)]
pub struct FrameSampling {
    pub lines: Vec<SampleLine>,
}

impl FrameSampling {
    pub fn n_samples(&self) -> usize {
        self.lines.iter().map(|l| l.n).sum()
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        let mut pts = Vec::with_capacity(self.n_samples());
        for l in &self.lines {
            for m in 0..l.n {
                pts.push([
                    l.base[0] + m as f64 * l.step[0],
                    l.base[1] + m as f64 * l.step[1],
                ]);
            }
        }
        pts
    }
}

/// Complex sensitivity maps, one per receiver coil, all of one 2D shape.
#[derive(Debug, Clone)]
pub struct CoilProfile {
    maps: Vec<NdArrayC>,
}

impl CoilProfile {
    pub fn new(maps: Vec<NdArrayC>) -> Result<Self> {
        if maps.is_empty() {
            return Err(CoreError::InvalidArgument("need at least one coil".into()));
        }
        let shape = maps[0].shape().to_vec();
        if shape.len() != 2 {
            return Err(CoreError::InvalidArgument(format!(
                "coil maps must be 2D, got shape {shape:?}"
            )));
        }
        for m in &maps[1..] {
            if m.shape() != shape.as_slice() {
                return Err(CoreError::ShapeMismatch {
                    expected: shape,
                    got: m.shape().to_vec(),
                });
            }
        }
        Ok(CoilProfile { maps })
    }

    /// Single coil with sensitivity identically one.
    pub fn uniform(nx: usize, ny: usize) -> Result<Self> {
        Ok(CoilProfile {
            maps: vec![NdArrayC::full(vec![nx, ny], Complex64 { re: 1.0, im: 0.0 })?],
        })
    }

    pub fn n_coils(&self) -> usize {
        self.maps.len()
    }

    pub fn maps(&self) -> &[NdArrayC] {
        &self.maps
    }

    pub fn image_shape(&self) -> [usize; 2] {
        [self.maps[0].shape()[0], self.maps[0].shape()[1]]
    }
}

/// Multi-coil nonuniform Fourier encoder for an (Nx, Ny, Nt) sequence.
pub struct RadialEncoder {
    coils: CoilProfile,
    frames: Vec<FrameSampling>,
    samples_per_frame: usize,
    domain_shape: Vec<usize>,
    range_shape: Vec<usize>,
}

impl RadialEncoder {
    pub fn new(coils: CoilProfile, frames: Vec<FrameSampling>) -> Result<Self> {
        if frames.is_empty() {
            return Err(CoreError::InvalidArgument("need at least one frame".into()));
        }
        let samples_per_frame = frames[0].n_samples();
        if samples_per_frame == 0 {
            return Err(CoreError::InvalidArgument("empty frame sampling".into()));
        }
        for f in &frames {
            if f.n_samples() != samples_per_frame {
                return Err(CoreError::InvalidArgument(
                    "all frames must carry the same sample count".into(),
                ));
            }
        }
        let [nx, ny] = coils.image_shape();
        let nt = frames.len();
        Ok(RadialEncoder {
            range_shape: vec![coils.n_coils(), nt, samples_per_frame],
            domain_shape: vec![nx, ny, nt],
            samples_per_frame,
            coils,
            frames,
        })
    }

    pub fn from_trajectories(coils: CoilProfile, trajs: &[RadialTrajectory]) -> Result<Self> {
        Self::new(coils, trajs.iter().map(|t| t.sampling()).collect())
    }

    pub fn coils(&self) -> &CoilProfile {
        &self.coils
    }

    pub fn frames(&self) -> &[FrameSampling] {
        &self.frames
    }

    fn nx(&self) -> usize {
        self.domain_shape[0]
    }

    fn ny(&self) -> usize {
        self.domain_shape[1]
    }

    fn nt(&self) -> usize {
        self.domain_shape[2]
    }

    /// Centered integer pixel coordinates, row-major over (ix, iy).
    fn pixel_coords(&self) -> Vec<[f64; 2]> {
        let (nx, ny) = (self.nx(), self.ny());
        let mut out = Vec::with_capacity(nx * ny);
        for ix in 0..nx {
            let cx = ix as f64 - (nx / 2) as f64;
            for iy in 0..ny {
                let cy = iy as f64 - (ny / 2) as f64;
                out.push([cx, cy]);
            }
        }
        out
    }

    /// Gather the coil-weighted image of (coil c, frame t).
    fn coil_frame_image(&self, x: &NdArrayC, c: usize, t: usize) -> Vec<Complex64> {
        let (nx, ny, nt) = (self.nx(), self.ny(), self.nt());
        let coil = self.coils.maps()[c].data();
        let xd = x.data();
        let mut g = Vec::with_capacity(nx * ny);
        for p in 0..nx * ny {
            g.push(coil[p] * xd[p * nt + t]);
        }
        g
    }
}

/// exp(i·θ) for every θ in `phases`.
fn unit_phasors(phases: &[f64]) -> Vec<Complex64> {
    phases
        .iter()
        .map(|&p| {
            let (s, c) = p.sin_cos();
            Complex64 { re: c, im: s }
        })
        .collect()
}

/// Sum over pixels of g·exp(−i·k_m·r) for each sample of each line.
fn nudft_forward_frame(
    g: &[Complex64],
    coords: &[[f64; 2]],
    frame: &FrameSampling,
    out: &mut [Complex64],
) {
    let npx = coords.len();
    let mut z: Vec<Complex64> = Vec::with_capacity(npx);
    let mut offset = 0;
    for line in &frame.lines {
        let phase0: Vec<f64> = coords
            .iter()
            .map(|c| -(line.base[0] * c[0] + line.base[1] * c[1]))
            .collect();
        let dphase: Vec<f64> = coords
            .iter()
            .map(|c| -(line.step[0] * c[0] + line.step[1] * c[1]))
            .collect();
        let w = unit_phasors(&dphase);
        z.clear();
        z.extend(
            unit_phasors(&phase0)
                .iter()
                .zip(g.iter())
                .map(|(u, gv)| u * gv),
        );
        for m in 0..line.n {
            let mut acc = Complex64 { re: 0.0, im: 0.0 };
            for (zv, wv) in z.iter_mut().zip(w.iter()) {
                acc += *zv;
                *zv *= *wv;
            }
            out[offset + m] = acc;
        }
        offset += line.n;
    }
}

/// Accumulate Σ_m y_m·exp(+i·k_m·r) into a pixel image.
fn nudft_adjoint_frame(
    y: &[Complex64],
    coords: &[[f64; 2]],
    frame: &FrameSampling,
    img: &mut [Complex64],
) {
    let mut offset = 0;
    for line in &frame.lines {
        let phase0: Vec<f64> = coords
            .iter()
            .map(|c| line.base[0] * c[0] + line.base[1] * c[1])
            .collect();
        let dphase: Vec<f64> = coords
            .iter()
            .map(|c| line.step[0] * c[0] + line.step[1] * c[1])
            .collect();
        let w = unit_phasors(&dphase);
        let mut z = unit_phasors(&phase0);
        for m in 0..line.n {
            let ym = y[offset + m];
            for ((zv, wv), iv) in z.iter_mut().zip(w.iter()).zip(img.iter_mut()) {
                *iv += ym * *zv;
                *zv *= *wv;
            }
        }
        offset += line.n;
    }
}

impl ImagingOperator<Complex64> for RadialEncoder {
    fn domain_shape(&self) -> &[usize] {
        &self.domain_shape
    }

    fn range_shape(&self) -> &[usize] {
        &self.range_shape
    }

    fn forward(&self, x: &NdArrayC) -> Result<NdArrayC> {
        if x.shape() != self.domain_shape() {
            return Err(CoreError::ShapeMismatch {
                expected: self.domain_shape.clone(),
                got: x.shape().to_vec(),
            });
        }
        let coords = self.pixel_coords();
        let (nc, nt, spf) = (self.coils.n_coils(), self.nt(), self.samples_per_frame);
        let tasks: Vec<(usize, usize)> = (0..nc)
            .flat_map(|c| (0..nt).map(move |t| (c, t)))
            .collect();
        let blocks: Vec<Vec<Complex64>> = tasks
            .par_iter()
            .map(|&(c, t)| {
                let g = self.coil_frame_image(x, c, t);
                let mut out = vec![Complex64 { re: 0.0, im: 0.0 }; spf];
                nudft_forward_frame(&g, &coords, &self.frames[t], &mut out);
                out
            })
            .collect();
        let mut data = Vec::with_capacity(nc * nt * spf);
        for block in blocks {
            data.extend(block);
        }
        NdArrayC::new(self.range_shape.clone(), data)
    }

    fn adjoint(&self, y: &NdArrayC) -> Result<NdArrayC> {
        if y.shape() != self.range_shape() {
            return Err(CoreError::ShapeMismatch {
                expected: self.range_shape.clone(),
                got: y.shape().to_vec(),
            });
        }
        let coords = self.pixel_coords();
        let (nc, nt, spf) = (self.coils.n_coils(), self.nt(), self.samples_per_frame);
        let npx = self.nx() * self.ny();
        let tasks: Vec<(usize, usize)> = (0..nc)
            .flat_map(|c| (0..nt).map(move |t| (c, t)))
            .collect();
        let partials: Vec<Vec<Complex64>> = tasks
            .par_iter()
            .map(|&(c, t)| {
                let block = &y.data()[(c * nt + t) * spf..(c * nt + t + 1) * spf];
                let mut img = vec![Complex64 { re: 0.0, im: 0.0 }; npx];
                nudft_adjoint_frame(block, &coords, &self.frames[t], &mut img);
                img
            })
            .collect();
        // combine with conj(C_c), summing coils in fixed order
        let mut out = NdArrayC::zeros(self.domain_shape.clone())?;
        for (k, &(c, t)) in tasks.iter().enumerate() {
            let coil = self.coils.maps()[c].data();
            let od = out.data_mut();
            for p in 0..npx {
                od[p * nt + t] += coil[p].conj() * partials[k][p];
            }
        }
        Ok(out)
    }
}

/// Radial density-compensation weights for one trajectory: ramp
/// max(|r|/k_max, 1/(2·n_samples)), normalized so the weights sum to
/// the number of Cartesian grid points inside the sampled disk.
pub fn density_weights(traj: &RadialTrajectory, image_shape: [usize; 2]) -> Vec<f64> {
    let floor = 1.0 / (2.0 * traj.n_samples_per_spoke as f64);
    let mut w: Vec<f64> = Vec::with_capacity(traj.n_samples());
    for _ in 0..traj.n_spokes() {
        for m in 0..traj.n_samples_per_spoke {
            let r = traj.radius(m).abs() / traj.k_max;
            w.push(r.max(floor));
        }
    }
    let [nx, ny] = image_shape;
    let mut cartesian_in_disk = 0usize;
    for p in 0..nx {
        let kx = 2.0 * std::f64::consts::PI * (p as f64 - (nx / 2) as f64) / nx as f64;
        for q in 0..ny {
            let ky = 2.0 * std::f64::consts::PI * (q as f64 - (ny / 2) as f64) / ny as f64;
            if (kx * kx + ky * ky).sqrt() <= traj.k_max + 1e-12 {
                cartesian_in_disk += 1;
            }
        }
    }
    let total: f64 = w.iter().sum();
    let scale = cartesian_in_disk as f64 / total;
    for v in &mut w {
        *v *= scale;
    }
    w
}

/// Adjoint applied to density-compensated data, scaled by 1/(Nx·Ny):
/// the direct reconstruction for radial data.
pub fn nufft_recon(
    y: &NdArrayC,
    coils: &CoilProfile,
    trajs: &[RadialTrajectory],
) -> Result<NdArrayC> {
    let encoder = RadialEncoder::from_trajectories(coils.clone(), trajs)?;
    if y.shape() != encoder.range_shape() {
        return Err(CoreError::ShapeMismatch {
            expected: encoder.range_shape().to_vec(),
            got: y.shape().to_vec(),
        });
    }
    let [nx, ny] = coils.image_shape();
    let nt = trajs.len();
    let spf = encoder.samples_per_frame;
    let mut weighted = y.clone();
    for (t, traj) in trajs.iter().enumerate() {
        let w = density_weights(traj, [nx, ny]);
        for c in 0..coils.n_coils() {
            let base = (c * nt + t) * spf;
            for (m, &wm) in w.iter().enumerate() {
                let v = weighted.data()[base + m];
                weighted.data_mut()[base + m] = v.scale(wm);
            }
        }
    }
    let mut img = encoder.adjoint(&weighted)?;
    img.scale_in_place(1.0 / (nx * ny) as f64);
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{inner_product, norm2};
    use rand::{Rng, SeedableRng};

    fn random_complex(shape: &[usize], seed: u64) -> NdArrayC {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        NdArrayC::from_fn(shape.to_vec(), |_| Complex64 {
            re: rng.gen_range(-1.0..1.0),
            im: rng.gen_range(-1.0..1.0),
        })
        .unwrap()
    }

    /// Full Cartesian sampling grid as lines, matching DFT frequencies.
    fn cartesian_sampling(n: usize) -> FrameSampling {
        let dk = 2.0 * std::f64::consts::PI / n as f64;
        let lines = (0..n)
            .map(|q| SampleLine {
                base: [
                    -std::f64::consts::PI,
                    dk * (q as f64 - (n / 2) as f64),
                ],
                step: [dk, 0.0],
                n,
            })
            .collect();
        FrameSampling { lines }
    }

    #[test]
    fn golden_angle_values() {
        let t = golden_angle_trajectory(3, 4).unwrap();
        assert_eq!(t.spoke_angles[0], 0.0);
        let expect = std::f64::consts::PI * (5.0_f64.sqrt() - 1.0) / 2.0;
        assert!((t.spoke_angles[1] - expect).abs() < 1e-12);
        assert!((expect - 1.9416110387254665).abs() < 1e-12);
    }

    #[test]
    fn golden_angle_spokes_do_not_coincide() {
        let t = golden_angle_trajectory(1130, 2).unwrap();
        let n = t.spoke_angles.len();
        for a in 0..n {
            for b in (a + 1)..n {
                let d = (t.spoke_angles[a] - t.spoke_angles[b]).abs();
                let d = d.min(std::f64::consts::PI - d);
                assert!(d > 1e-9, "spokes {a} and {b} coincide: gap {d}");
            }
        }
    }

    #[test]
    fn trajectory_points_match_lines() {
        let t = golden_angle_trajectory(5, 8).unwrap();
        let from_points = t.points();
        let from_lines = t.sampling().points();
        assert_eq!(from_points.len(), from_lines.len());
        for (a, b) in from_points.iter().zip(from_lines.iter()) {
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn centered_delta_has_flat_magnitude() {
        let n = 16;
        let coils = CoilProfile::uniform(n, n).unwrap();
        let mut x = NdArrayC::zeros(vec![n, n, 1]).unwrap();
        let center = x.flat(&[n / 2, n / 2, 0]);
        x.data_mut()[center] = Complex64 { re: 1.0, im: 0.0 };
        let trajs = vec![golden_angle_trajectory(7, 12).unwrap()];
        let enc = RadialEncoder::from_trajectories(coils, &trajs).unwrap();
        let y = enc.forward(&x).unwrap();
        for v in y.data() {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_roundtrips() {
        let n = 8;
        let coils = CoilProfile::uniform(n, n).unwrap();
        let trajs = vec![golden_angle_trajectory(4, 8).unwrap()];
        let enc = RadialEncoder::from_trajectories(coils, &trajs).unwrap();
        let y = enc.forward(&NdArrayC::zeros(vec![n, n, 1]).unwrap()).unwrap();
        assert!(y.data().iter().all(|c| c.norm() == 0.0));
        let x = enc.adjoint(&NdArrayC::zeros(y.shape().to_vec()).unwrap()).unwrap();
        assert!(x.data().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn forward_is_linear() {
        let n = 12;
        let coils = crate::phantoms::synth_coils(n, 3).unwrap();
        let trajs = crate::operators::mri::golden_angle_frames(2, 5, 10).unwrap();
        let enc = RadialEncoder::from_trajectories(coils, &trajs).unwrap();
        let x1 = random_complex(&[n, n, 2], 1);
        let x2 = random_complex(&[n, n, 2], 2);
        let (a, b) = (1.7, -0.4);
        let lhs = enc
            .forward(&x1.scaled(a).add(&x2.scaled(b)).unwrap())
            .unwrap();
        let rhs = enc
            .forward(&x1)
            .unwrap()
            .scaled(a)
            .add(&enc.forward(&x2).unwrap().scaled(b))
            .unwrap();
        let err = norm2(&lhs.sub(&rhs).unwrap()) / norm2(&rhs);
        assert!(err <= 1e-12);
    }

    #[test]
    fn dot_product_adjoint_test() {
        let n = 32;
        let coils = crate::phantoms::synth_coils(n, 4).unwrap();
        let trajs = golden_angle_frames(3, 6, 16).unwrap();
        let enc = RadialEncoder::from_trajectories(coils, &trajs).unwrap();
        for seed in 0..5 {
            let x = random_complex(&[n, n, 3], 100 + seed);
            let y = random_complex(enc.range_shape(), 200 + seed);
            let lhs = inner_product(&enc.forward(&x).unwrap(), &y).unwrap();
            let rhs = inner_product(&x, &enc.adjoint(&y).unwrap()).unwrap();
            let err = (lhs - rhs).norm() / lhs.norm().max(1.0);
            assert!(err <= 1e-10, "seed {seed}: relative error {err}");
        }
    }

    #[test]
    fn cartesian_normal_operator_is_pixel_count_times_identity() {
        let n = 8;
        let coils = CoilProfile::uniform(n, n).unwrap();
        let enc = RadialEncoder::new(coils, vec![cartesian_sampling(n)]).unwrap();
        let x = random_complex(&[n, n, 1], 77);
        let ehe = enc.adjoint(&enc.forward(&x).unwrap()).unwrap();
        let expect = x.scaled((n * n) as f64);
        let err = norm2(&ehe.sub(&expect).unwrap()) / norm2(&expect);
        assert!(err <= 1e-10, "relative error {err}");
    }

    #[test]
    fn forward_matches_dense_dft_matrix() {
        // independent oracle: evaluate the kernel entrywise with exp()
        let n = 8;
        let coils = CoilProfile::uniform(n, n).unwrap();
        let traj = golden_angle_trajectory(5, 8).unwrap();
        let enc = RadialEncoder::from_trajectories(coils, &[traj.clone()]).unwrap();
        let x = random_complex(&[n, n, 1], 31);
        let y = enc.forward(&x).unwrap();
        let pts = traj.points();
        for (s, k) in pts.iter().enumerate() {
            let mut acc = Complex64 { re: 0.0, im: 0.0 };
            for ix in 0..n {
                for iy in 0..n {
                    let cx = ix as f64 - (n / 2) as f64;
                    let cy = iy as f64 - (n / 2) as f64;
                    let ph = -(k[0] * cx + k[1] * cy);
                    acc += x.get(&[ix, iy, 0]) * Complex64 { re: ph.cos(), im: ph.sin() };
                }
            }
            let err = (y.data()[s] - acc).norm() / acc.norm().max(1.0);
            assert!(err <= 1e-12, "sample {s}: {err}");
        }
    }

    #[test]
    fn nufft_recon_recovers_a_disk() {
        let n = 64;
        let coils = CoilProfile::uniform(n, n).unwrap();
        // smooth-edged disk, single frame
        let half = (n as f64 - 1.0) / 2.0;
        let disk = NdArrayC::from_fn(vec![n, n, 1], |ix| {
            let y = half - ix[0] as f64;
            let x = ix[1] as f64 - half;
            let r = (x * x + y * y).sqrt();
            let v = 1.0 / (1.0 + ((r - 18.0) / 1.5).exp());
            Complex64 { re: v, im: 0.0 }
        })
        .unwrap();
        let dense = vec![golden_angle_trajectory(200, 128).unwrap()];
        let enc = RadialEncoder::from_trajectories(coils.clone(), &dense).unwrap();
        let y = enc.forward(&disk).unwrap();
        let rec = nufft_recon(&y, &coils, &dense).unwrap();
        let nrmse = norm2(&rec.sub(&disk).unwrap()) / norm2(&disk);
        assert!(nrmse <= 0.15, "fully sampled NRMSE {nrmse}");

        // undersampling strictly degrades the reconstruction
        let sparse = vec![golden_angle_trajectory(20, 128).unwrap()];
        let enc_u = RadialEncoder::from_trajectories(coils.clone(), &sparse).unwrap();
        let y_u = enc_u.forward(&disk).unwrap();
        let rec_u = nufft_recon(&y_u, &coils, &sparse).unwrap();
        let nrmse_u = norm2(&rec_u.sub(&disk).unwrap()) / norm2(&disk);
        assert!(
            nrmse_u > nrmse,
            "undersampled {nrmse_u} should exceed fully sampled {nrmse}"
        );
    }

    #[test]
    fn nufft_recon_zero_data_is_zero() {
        let n = 16;
        let coils = CoilProfile::uniform(n, n).unwrap();
        let trajs = vec![golden_angle_trajectory(8, 16).unwrap()];
        let y = NdArrayC::zeros(vec![1, 1, 8 * 16]).unwrap();
        let rec = nufft_recon(&y, &coils, &trajs).unwrap();
        assert!(rec.data().iter().all(|c| c.norm() == 0.0));
    }
}
