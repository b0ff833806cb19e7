//! Image-quality measures: PSNR, NRMSE, SSIM and the Haar
//! wavelet-based perceptual similarity index. Volumes are evaluated
//! slice-wise in the xy-plane and averaged.

use crate::array::{norm2, NdArrayF};
use crate::error::{CoreError, Result};

/// 10·log10(peak²/MSE); +∞ when the images are identical.
/// `peak` defaults to the maximum of `reference`.
pub fn psnr(x: &NdArrayF, reference: &NdArrayF, peak: Option<f64>) -> Result<f64> {
    x.same_shape(reference)?;
    let peak = match peak {
        Some(p) => p,
        None => reference.data().iter().copied().fold(f64::MIN, f64::max),
    };
    if peak <= 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "psnr peak must be positive, got {peak}"
        )));
    }
    let mse = x
        .data()
        .iter()
        .zip(reference.data().iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// ‖x − ref‖₂ / ‖ref‖₂.
pub fn nrmse(x: &NdArrayF, reference: &NdArrayF) -> Result<f64> {
    x.same_shape(reference)?;
    let den = norm2(reference);
    if den == 0.0 {
        return Err(CoreError::InvalidArgument(
            "nrmse needs a nonzero reference".into(),
        ));
    }
    Ok(norm2(&x.sub(reference)?) / den)
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn ssim_window() -> Vec<f64> {
    let half = (SSIM_WINDOW as isize - 1) / 2;
    let mut w: Vec<f64> = (-half..=half)
        .map(|k| (-(k * k) as f64 / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let sum: f64 = w.iter().sum();
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Separable weighted filtering, valid region only.
fn filter_valid(img: &NdArrayF, w: &[f64]) -> NdArrayF {
    let (h, wid) = (img.shape()[0], img.shape()[1]);
    let k = w.len();
    let oh = h - k + 1;
    let ow = wid - k + 1;
    // rows
    let mut tmp = vec![0.0; oh * wid];
    for y in 0..oh {
        for x in 0..wid {
            let mut acc = 0.0;
            for (dy, &wv) in w.iter().enumerate() {
                acc += wv * img.data()[(y + dy) * wid + x];
            }
            tmp[y * wid + x] = acc;
        }
    }
    // columns
    let mut out = NdArrayF::zeros(vec![oh, ow]).unwrap();
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (dx, &wv) in w.iter().enumerate() {
                acc += wv * tmp[y * wid + x + dx];
            }
            out.data_mut()[y * ow + x] = acc;
        }
    }
    out
}

/// Mean structural similarity over valid 11×11 Gaussian windows
/// (σ = 1.5, C1 = (0.01·L)², C2 = (0.03·L)²).
pub fn ssim(x: &NdArrayF, reference: &NdArrayF, dynamic_range: f64) -> Result<f64> {
    x.same_shape(reference)?;
    if x.ndim() != 2 {
        return Err(CoreError::InvalidArgument(format!(
            "ssim expects 2D slices, got shape {:?}",
            x.shape()
        )));
    }
    if x.shape()[0] < SSIM_WINDOW || x.shape()[1] < SSIM_WINDOW {
        return Err(CoreError::InvalidArgument(format!(
            "image {:?} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window",
            x.shape()
        )));
    }
    if dynamic_range <= 0.0 {
        return Err(CoreError::InvalidArgument(
            "dynamic range must be positive".into(),
        ));
    }
    let c1 = (SSIM_K1 * dynamic_range).powi(2);
    let c2 = (SSIM_K2 * dynamic_range).powi(2);
    let w = ssim_window();

    let xx = NdArrayF::new(
        x.shape().to_vec(),
        x.data().iter().map(|v| v * v).collect(),
    )?;
    let yy = NdArrayF::new(
        reference.shape().to_vec(),
        reference.data().iter().map(|v| v * v).collect(),
    )?;
    let xy = NdArrayF::new(
        x.shape().to_vec(),
        x.data()
            .iter()
            .zip(reference.data().iter())
            .map(|(a, b)| a * b)
            .collect(),
    )?;

    let mu_x = filter_valid(x, &w);
    let mu_y = filter_valid(reference, &w);
    let m_xx = filter_valid(&xx, &w);
    let m_yy = filter_valid(&yy, &w);
    let m_xy = filter_valid(&xy, &w);

    let mut acc = 0.0;
    for p in 0..mu_x.len() {
        let (mx, my) = (mu_x.data()[p], mu_y.data()[p]);
        let vx = m_xx.data()[p] - mx * mx;
        let vy = m_yy.data()[p] - my * my;
        let cov = m_xy.data()[p] - mx * my;
        acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
            / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    Ok(acc / mu_x.len() as f64)
}

const HPSI_C: f64 = 30.0;
const HPSI_ALPHA: f64 = 4.2;

/// 2D correlation with zero padding, output aligned like a centered
/// "same" convolution: offset floor((K−1)/2) into the full extent.
fn haar_response(img: &[f64], h: usize, w: usize, scale: u32, orientation: usize) -> Vec<f64> {
    let k = 1usize << scale;
    let half = k / 2;
    let amp = 0.5f64.powi(scale as i32);
    let off = (k - 1) / 2;
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for r in 0..k {
                let yy = y as isize + r as isize - off as isize;
                if yy < 0 || yy >= h as isize {
                    continue;
                }
                for c in 0..k {
                    let xx = x as isize + c as isize - off as isize;
                    if xx < 0 || xx >= w as isize {
                        continue;
                    }
                    let sign_idx = if orientation == 0 { r } else { c };
                    let sgn = if sign_idx < half { -amp } else { amp };
                    acc += sgn * img[yy as usize * w + xx as usize];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-HPSI_ALPHA * v).exp())
}

/// Haar wavelet-based perceptual similarity, grayscale path: local
/// similarity of the two finer-scale Haar magnitudes, weighted by the
/// coarsest-scale magnitude maxima, squashed through a logistic map
/// and inverted at the end. Inputs are jointly rescaled to the 0–255
/// convention internally. Result in (0, 1].
pub fn hpsi(x: &NdArrayF, reference: &NdArrayF) -> Result<f64> {
    x.same_shape(reference)?;
    if x.ndim() != 2 {
        return Err(CoreError::InvalidArgument(format!(
            "hpsi expects 2D slices, got shape {:?}",
            x.shape()
        )));
    }
    let (h, w) = (x.shape()[0], x.shape()[1]);
    if h < 8 || w < 8 {
        return Err(CoreError::InvalidArgument(format!(
            "hpsi needs min side >= 8, got {:?}",
            x.shape()
        )));
    }
    // joint affine rescale to [0, 255]
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in x.data().iter().chain(reference.data().iter()) {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    let scale = if hi > lo { 255.0 / (hi - lo) } else { 0.0 };
    let a: Vec<f64> = x.data().iter().map(|v| (v - lo) * scale).collect();
    let b: Vec<f64> = reference.data().iter().map(|v| (v - lo) * scale).collect();

    let c = HPSI_C;
    let sim = |p: f64, q: f64| (2.0 * p * q + c) / (p * p + q * q + c);

    let mut num = 0.0;
    let mut den = 0.0;
    let mut unweighted = 0.0;
    for orientation in 0..2 {
        let a1 = haar_response(&a, h, w, 1, orientation);
        let a2 = haar_response(&a, h, w, 2, orientation);
        let a3 = haar_response(&a, h, w, 3, orientation);
        let b1 = haar_response(&b, h, w, 1, orientation);
        let b2 = haar_response(&b, h, w, 2, orientation);
        let b3 = haar_response(&b, h, w, 3, orientation);
        for p in 0..h * w {
            let hs = 0.5
                * (sim(a1[p].abs(), b1[p].abs()) + sim(a2[p].abs(), b2[p].abs()));
            let weight = a3[p].abs().max(b3[p].abs());
            num += logistic(hs) * weight;
            den += weight;
            unweighted += logistic(hs);
        }
    }
    let val = if den > 0.0 {
        num / den
    } else {
        unweighted / (2 * h * w) as f64
    };
    let inv = (val / (1.0 - val)).ln() / HPSI_ALPHA;
    Ok((inv * inv).min(1.0))
}

/// Per-slice metric values.
#[derive(Debug, Clone, Copy)]
pub struct SliceMetrics {
    pub psnr: f64,
    pub nrmse: f64,
    pub ssim: f64,
    pub hpsi: f64,
}

/// Slice metrics plus their arithmetic mean.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub slices: Vec<SliceMetrics>,
    pub mean: SliceMetrics,
}

impl MetricReport {
    /// CSV: one row per slice, then a mean row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("slice,psnr,nrmse,ssim,hpsi\r\n");
        for (i, s) in self.slices.iter().enumerate() {
            out.push_str(&format!(
                "{i},{:.17e},{:.17e},{:.17e},{:.17e}\r\n",
                s.psnr, s.nrmse, s.ssim, s.hpsi
            ));
        }
        out.push_str(&format!(
            "mean,{:.17e},{:.17e},{:.17e},{:.17e}\r\n",
            self.mean.psnr, self.mean.nrmse, self.mean.ssim, self.mean.hpsi
        ));
        out
    }
}

fn slice_of(x: &NdArrayF, t: usize) -> NdArrayF {
    let (h, w) = (x.shape()[0], x.shape()[1]);
    NdArrayF::from_fn(vec![h, w], |ix| x.get(&[ix[0], ix[1], t])).unwrap()
}

/// Evaluate all four metrics slice-wise: 2D inputs are one slice, 3D
/// inputs are sliced along the last axis (the xy-plane convention).
/// `peak` and `dynamic_range` default per slice to max(ref) and
/// max(ref) − min(ref).
pub fn evaluate_slices(
    x: &NdArrayF,
    reference: &NdArrayF,
    peak: Option<f64>,
    dynamic_range: Option<f64>,
) -> Result<MetricReport> {
    x.same_shape(reference)?;
    let slices: Vec<(NdArrayF, NdArrayF)> = match x.ndim() {
        2 => vec![(x.clone(), reference.clone())],
        3 => (0..x.shape()[2])
            .map(|t| (slice_of(x, t), slice_of(reference, t)))
            .collect(),
        _ => {
            return Err(CoreError::InvalidArgument(format!(
                "metrics expect 2D or 3D arrays, got shape {:?}",
                x.shape()
            )))
        }
    };
    let mut rows = Vec::with_capacity(slices.len());
    for (xs, rs) in &slices {
        let range = dynamic_range.unwrap_or_else(|| {
            let lo = rs.data().iter().copied().fold(f64::INFINITY, f64::min);
            let hi = rs.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (hi - lo).max(1e-12)
        });
        rows.push(SliceMetrics {
            psnr: psnr(xs, rs, peak)?,
            nrmse: nrmse(xs, rs)?,
            ssim: ssim(xs, rs, range)?,
            hpsi: hpsi(xs, rs)?,
        });
    }
    let n = rows.len() as f64;
    let mean = SliceMetrics {
        psnr: rows.iter().map(|r| r.psnr).sum::<f64>() / n,
        nrmse: rows.iter().map(|r| r.nrmse).sum::<f64>() / n,
        ssim: rows.iter().map(|r| r.ssim).sum::<f64>() / n,
        hpsi: rows.iter().map(|r| r.hpsi).sum::<f64>() / n,
    };
    Ok(MetricReport { slices: rows, mean })
}
