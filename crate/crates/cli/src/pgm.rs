//! Binary PGM (P5) rendering with linear intensity windowing.

use std::path::Path;

use anyhow::{Context, Result};
use recon_core::NdArrayF;

/// clamp((v − (C − W/2)) / W, 0, 1) · 255, rounded half-up.
pub fn window_to_byte(v: f64, center: f64, width: f64) -> u8 {
    let lo = center - width / 2.0;
    let t = ((v - lo) / width).clamp(0.0, 1.0);
    (t * 255.0 + 0.5).floor() as u8
}

/// Write a 2D slice as binary PGM with the given window.
pub fn write_pgm(path: &Path, slice: &NdArrayF, center: f64, width: f64) -> Result<()> {
    anyhow::ensure!(slice.ndim() == 2, "PGM rendering expects a 2D slice");
    anyhow::ensure!(width > 0.0, "window width must be positive");
    let (h, w) = (slice.shape()[0], slice.shape()[1]);
    let mut bytes = Vec::with_capacity(32 + h * w);
    bytes.extend_from_slice(format!("P5\n{w} {h}\n255\n").as_bytes());
    for v in slice.data() {
        bytes.push(window_to_byte(*v, center, width));
    }
    std::fs::write(path, &bytes).with_context(|| format!("writing {}", path.display()))
}
