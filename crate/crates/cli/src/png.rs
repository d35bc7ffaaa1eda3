use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use gyroblur_core::LinearImage;
use image::{ImageBuffer, Rgb};

/// Decodes an 8/16-bit PNG to `[0, 1]` RGB values as stored (no transfer curve).
pub fn read(path: &Path) -> Result<LinearImage> {
    let img = image::open(path)
        .with_context(|| format!("reading {}", path.display()))?
        .into_rgb16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.into_raw().into_iter().map(|v| f64::from(v) / 65535.0).collect();
    Ok(LinearImage::new(w, h, data)?)
}

/// Writes a 16-bit RGB PNG, clamping to `[0, 1]`.
pub fn write(path: &Path, img: &LinearImage) -> Result<()> {
    let raw: Vec<u16> = img
        .data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16)
        .collect();
    let buf: ImageBuffer<Rgb<u16>, Vec<u16>> =
        ImageBuffer::from_raw(img.width() as u32, img.height() as u32, raw).expect("buffer sized to image");
    buf.save(path).with_context(|| format!("writing {}", path.display()))
}

/// PNG files of a directory, sorted by name.
pub fn list(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let p = entry?.path();
        if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}
