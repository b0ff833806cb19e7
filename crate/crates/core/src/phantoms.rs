//! Synthetic ground truths: Shepp-Logan for CT, a beating-ellipse
//! complex sequence for cine MRI, and smooth coil sensitivity maps.
//!
//! All generators are deterministic. Ellipse overlays are rendered
//! with 4×4 supersampling per pixel so that edge pixels carry area
//! fractions and resolutions stay mutually consistent.

use num_complex::Complex64;

use crate::array::{NdArrayC, NdArrayF};
use crate::error::{CoreError, Result};
use crate::operators::mri::CoilProfile;

/// One additive ellipse on the [-1, 1]² field of view.
#[derive(Debug, Clone)]
pub struct EllipseSpec {
    pub center: (f64, f64),
    pub semi_axes: (f64, f64),
    /// counterclockwise rotation in radians
    pub rotation: f64,
    pub intensity: f64,
}

impl EllipseSpec {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (cx, cy) = self.center;
        let (ct, st) = (self.rotation.cos(), self.rotation.sin());
        let dx = x - cx;
        let dy = y - cy;
        let u = ct * dx + st * dy;
        let v = -st * dx + ct * dy;
        let (a, b) = self.semi_axes;
        (u / a) * (u / a) + (v / b) * (v / b) <= 1.0
    }
}

/// Render the additive overlay of `ellipses` on an N×N grid spanning
/// [-1, 1]²; row 0 is the top of the field of view.
pub fn render_ellipses(ellipses: &[EllipseSpec], n: usize) -> Result<NdArrayF> {
    if n < 2 {
        return Err(CoreError::InvalidArgument("grid side must be >= 2".into()));
    }
    for e in ellipses {
        if e.semi_axes.0 <= 0.0 || e.semi_axes.1 <= 0.0 {
            return Err(CoreError::InvalidArgument(
                "ellipse semi-axes must be positive".into(),
            ));
        }
    }
    const SS: usize = 4;
    // signed-integer sample coordinates over a common denominator, so
    // mirrored pixels sample at exactly negated positions
    let denom = (SS * n) as f64;
    NdArrayF::from_fn(vec![n, n], |ix| {
        let (i, j) = (ix[0], ix[1]);
        let mut acc = 0.0;
        for sy in 0..SS {
            for sx in 0..SS {
                let mx = (2 * (SS * j + sx) + 1) as i64 - (SS * n) as i64;
                let my = (SS * n) as i64 - (2 * (SS * i + sy) + 1) as i64;
                let x = mx as f64 / denom;
                let y = my as f64 / denom;
                for e in ellipses {
                    if e.contains(x, y) {
                        acc += e.intensity;
                    }
                }
            }
        }
        acc / (SS * SS) as f64
    })
}

/// The conventional ten-ellipse Shepp-Logan parameter set
/// (intensity, a, b, x0, y0, rotation in degrees).
const SHEPP_LOGAN: [(f64, f64, f64, f64, f64, f64); 10] = [
    (2.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.98, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    (-0.02, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    (-0.02, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    (0.01, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    (0.01, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    (0.01, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    (0.01, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    (0.01, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    (0.01, 0.0230, 0.0460, 0.06, -0.605, 0.0),
];

pub fn shepp_logan_ellipses() -> Vec<EllipseSpec> {
    SHEPP_LOGAN
        .iter()
        .map(|&(intensity, a, b, x0, y0, deg)| EllipseSpec {
            center: (x0, y0),
            semi_axes: (a, b),
            rotation: deg.to_radians(),
            intensity,
        })
        .collect()
}

/// Standard Shepp-Logan head phantom, overlay rescaled to [0, 1].
pub fn shepp_logan(n: usize) -> Result<NdArrayF> {
    if n < 16 {
        return Err(CoreError::InvalidArgument(format!(
            "shepp_logan needs n >= 16, got {n}"
        )));
    }
    // the outer ellipse intensity 2.0 is the overlay maximum
    Ok(render_ellipses(&shepp_logan_ellipses(), n)?.scaled(0.5))
}

/// Beating-ellipse cine phantom: a subset of ellipses pulses
/// sinusoidally over one cycle, and a fixed smooth polynomial phase
/// map makes the sequence genuinely complex.
#[derive(Debug, Clone)]
pub struct DynamicPhantomSpec {
    pub base: Vec<EllipseSpec>,
    /// indices into `base` whose semi-axes pulse
    pub pulsing: Vec<usize>,
    /// fractional amplitude of the axis pulsation, in [0, 1)
    pub pulse_amplitude: f64,
    pub n_frames: usize,
}

impl DynamicPhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_frames < 1 {
            return Err(CoreError::InvalidArgument("n_frames must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.pulse_amplitude) {
            return Err(CoreError::InvalidArgument(
                "pulse amplitude must be in [0, 1)".into(),
            ));
        }
        for &i in &self.pulsing {
            if i >= self.base.len() {
                return Err(CoreError::InvalidArgument(format!(
                    "pulsing index {i} out of range"
                )));
            }
        }
        Ok(())
    }

    /// A thorax-like default: body outline, two static organs and one
    /// pulsing chamber, 30 frames per cycle.
    pub fn cardiac_default() -> Self {
        DynamicPhantomSpec {
            base: vec![
                EllipseSpec {
                    center: (0.0, 0.0),
                    semi_axes: (0.85, 0.7),
                    rotation: 0.0,
                    intensity: 0.4,
                },
                EllipseSpec {
                    center: (-0.35, 0.15),
                    semi_axes: (0.22, 0.3),
                    rotation: 0.3,
                    intensity: 0.25,
                },
                EllipseSpec {
                    center: (0.4, -0.1),
                    semi_axes: (0.18, 0.25),
                    rotation: -0.2,
                    intensity: 0.2,
                },
                EllipseSpec {
                    center: (0.05, -0.05),
                    semi_axes: (0.16, 0.14),
                    rotation: 0.5,
                    intensity: 0.35,
                },
            ],
            pulsing: vec![3],
            pulse_amplitude: 0.15,
            n_frames: 30,
        }
    }
}

fn phase_map(n: usize) -> NdArrayF {
    // fixed low-order polynomial, roughly ±1 rad across the FOV
    NdArrayF::from_fn(vec![n, n], |ix| {
        let x = -1.0 + 2.0 * (ix[1] as f64 + 0.5) / n as f64;
        let y = 1.0 - 2.0 * (ix[0] as f64 + 0.5) / n as f64;
        0.3 + 0.8 * x - 0.5 * y + 0.4 * x * x - 0.3 * x * y + 0.2 * y * y
    })
    .unwrap()
}

/// Complex image sequence of shape (N, N, n_frames); frame phase
/// follows one sinusoidal cycle so an implied frame `n_frames` equals
/// frame 0.
pub fn dynamic_phantom(spec: &DynamicPhantomSpec, n: usize) -> Result<NdArrayC> {
    spec.validate()?;
    if n < 8 {
        return Err(CoreError::InvalidArgument(format!(
            "dynamic phantom needs n >= 8, got {n}"
        )));
    }
    let nt = spec.n_frames;
    let phase = phase_map(n);
    let mut out = NdArrayC::zeros(vec![n, n, nt])?;
    for t in 0..nt {
        let cycle = (2.0 * std::f64::consts::PI * t as f64 / nt as f64).sin();
        let factor = 1.0 + spec.pulse_amplitude * cycle;
        let frame_ellipses: Vec<EllipseSpec> = spec
            .base
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let mut e = e.clone();
                if spec.pulsing.contains(&k) {
                    e.semi_axes = (e.semi_axes.0 * factor, e.semi_axes.1 * factor);
                }
                e
            })
            .collect();
        let mag = render_ellipses(&frame_ellipses, n)?;
        for i in 0..n {
            for j in 0..n {
                let m = mag.get(&[i, j]);
                let ph = phase.get(&[i, j]);
                let off = out.flat(&[i, j, t]);
                out.data_mut()[off] = Complex64 {
                    re: m * ph.cos(),
                    im: m * ph.sin(),
                };
            }
        }
    }
    Ok(out)
}

/// Smooth complex Gaussian-bump coil sensitivities on a ring around
/// the FOV, normalized so Σᵢ|Cᵢ|² = 1 at every pixel.
pub fn synth_coils(n: usize, n_c: usize) -> Result<CoilProfile> {
    if n_c < 1 {
        return Err(CoreError::InvalidArgument("n_c must be >= 1".into()));
    }
    if n < 2 {
        return Err(CoreError::InvalidArgument("grid side must be >= 2".into()));
    }
    let sigma = 0.9_f64;
    let ring = 1.1_f64;
    let mut maps: Vec<NdArrayC> = (0..n_c)
        .map(|c| {
            let ang = 2.0 * std::f64::consts::PI * c as f64 / n_c as f64;
            let (cy, cx) = (ring * ang.sin(), ring * ang.cos());
            NdArrayC::from_fn(vec![n, n], |ix| {
                let x = -1.0 + 2.0 * (ix[1] as f64 + 0.5) / n as f64;
                let y = 1.0 - 2.0 * (ix[0] as f64 + 0.5) / n as f64;
                let d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                let mag = (-d2 / (2.0 * sigma * sigma)).exp();
                // gentle coil-specific linear phase
                let ph = 0.5 * (x * ang.cos() + y * ang.sin());
                Complex64 {
                    re: mag * ph.cos(),
                    im: mag * ph.sin(),
                }
            })
        })
        .collect::<Result<_>>()?;

    for p in 0..n * n {
        let sos: f64 = maps.iter().map(|m| m.data()[p].norm_sqr()).sum();
        let s = 1.0 / sos.sqrt();
        for m in maps.iter_mut() {
            m.data_mut()[p] = m.data()[p].scale(s);
        }
    }
    CoilProfile::new(maps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shepp_logan_support_and_range() {
        let x = shepp_logan(128).unwrap();
        let n = 128;
        assert!(x.get(&[n / 2, n / 2]) > 0.0);
        // corners lie outside the head
        assert_eq!(x.get(&[0, 0]), 0.0);
        assert_eq!(x.get(&[0, n - 1]), 0.0);
        assert!(x.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn shepp_logan_minimal_grid() {
        let x = shepp_logan(16).unwrap();
        assert!(x.data().iter().all(|&v| v.is_finite() && (0.0..=1.0).contains(&v)));
        assert!(shepp_logan(15).is_err());
    }

    #[test]
    fn shepp_logan_left_right_symmetry_outside_asymmetric_region() {
        let n = 128;
        let x = shepp_logan(n).unwrap();
        // mask out the asymmetric content: the two unequal lateral
        // blobs and the small bottom cluster; everything else is built
        // from ellipses centered on the x = 0 axis
        for i in 0..n {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            for j in 0..n {
                let xc = -1.0 + 2.0 * (j as f64 + 0.5) / n as f64;
                let lateral = xc.abs() > 0.015 && xc.abs() < 0.43 && y.abs() < 0.41;
                let bottom = y < -0.54;
                if lateral || bottom {
                    continue;
                }
                let v = x.get(&[i, j]);
                let w = x.get(&[i, n - 1 - j]);
                assert!(
                    (v - w).abs() < 1e-12,
                    "asymmetry at ({i},{j}) x={xc:.3} y={y:.3}: {v} vs {w}"
                );
            }
        }
    }

    #[test]
    fn downsampled_phantom_matches_coarse_rendering() {
        let n = 64;
        let fine = shepp_logan(2 * n).unwrap();
        let coarse = shepp_logan(n).unwrap();
        let mut down = NdArrayF::zeros(vec![n, n]).unwrap();
        for i in 0..n {
            for j in 0..n {
                let s = fine.get(&[2 * i, 2 * j])
                    + fine.get(&[2 * i + 1, 2 * j])
                    + fine.get(&[2 * i, 2 * j + 1])
                    + fine.get(&[2 * i + 1, 2 * j + 1]);
                down.set(&[i, j], s / 4.0);
            }
        }
        let nrmse = crate::array::norm2(&down.sub(&coarse).unwrap())
            / crate::array::norm2(&coarse);
        assert!(nrmse <= 0.05, "NRMSE {nrmse}");
    }

    #[test]
    fn zero_pulse_gives_identical_frames() {
        let mut spec = DynamicPhantomSpec::cardiac_default();
        spec.pulse_amplitude = 0.0;
        spec.n_frames = 5;
        let x = dynamic_phantom(&spec, 32).unwrap();
        for t in 1..5 {
            for i in 0..32 {
                for j in 0..32 {
                    assert_eq!(x.get(&[i, j, 0]), x.get(&[i, j, t]));
                }
            }
        }
    }

    #[test]
    fn default_frame_count_is_thirty() {
        let spec = DynamicPhantomSpec::cardiac_default();
        assert_eq!(spec.n_frames, 30);
        let x = dynamic_phantom(&spec, 16).unwrap();
        assert_eq!(x.shape(), &[16, 16, 30]);
    }

    #[test]
    fn pulsing_region_area_averages_to_base_area() {
        let spec = DynamicPhantomSpec::cardiac_default();
        let n = 64;
        let x = dynamic_phantom(&spec, n).unwrap();
        let base = render_ellipses(&spec.base, n).unwrap();
        // measure the chamber by total magnitude mass above the static
        // overlay, which is proportional to its area
        let chamber = &spec.base[3];
        let mut static_ellipses = spec.base.clone();
        static_ellipses.remove(3);
        let backdrop = render_ellipses(&static_ellipses, n).unwrap();
        let base_mass: f64 = base
            .data()
            .iter()
            .zip(backdrop.data().iter())
            .map(|(b, s)| b - s)
            .sum();
        let mut mean_mass = 0.0;
        for t in 0..spec.n_frames {
            let mut mass = 0.0;
            for i in 0..n {
                for j in 0..n {
                    mass += x.get(&[i, j, t]).norm() - backdrop.get(&[i, j]);
                }
            }
            mean_mass += mass;
        }
        mean_mass /= spec.n_frames as f64;
        let rel = (mean_mass - base_mass).abs() / base_mass;
        // sinusoidal pulsation biases area by amplitude²/2 ≈ 1.1%
        assert!(rel <= 0.02, "relative area deviation {rel}");
        let _ = chamber;
    }

    #[test]
    fn phantom_is_genuinely_complex_and_cyclic() {
        let spec = DynamicPhantomSpec::cardiac_default();
        let x = dynamic_phantom(&spec, 32).unwrap();
        assert!(x.data().iter().any(|c| c.im.abs() > 1e-6));
        // frame 0 equals the implied frame n_frames (sin is 2π-periodic)
        let cycle0 = (0.0_f64).sin();
        let cycle_n = (2.0 * std::f64::consts::PI).sin();
        assert!((cycle0 - cycle_n).abs() < 1e-15);
    }

    #[test]
    fn single_coil_normalizes_to_unit_magnitude() {
        let coils = synth_coils(32, 1).unwrap();
        for c in coils.maps()[0].data() {
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sum_of_squares_is_one_everywhere() {
        let coils = synth_coils(48, 8).unwrap();
        for p in 0..48 * 48 {
            let sos: f64 = coils.maps().iter().map(|m| m.data()[p].norm_sqr()).sum();
            assert!((sos - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn twelve_coils_cover_every_pixel_at_least_twice() {
        let coils = synth_coils(64, 12).unwrap();
        for p in 0..64 * 64 {
            let covered = coils
                .maps()
                .iter()
                .filter(|m| m.data()[p].norm() > 0.05)
                .count();
            assert!(covered >= 2, "pixel {p} covered by {covered} coils");
        }
    }
}
