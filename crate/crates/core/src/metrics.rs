//! Full-reference quality metrics.

use crate::error::{Error, Result};
use crate::image::{LinearImage, CHANNELS};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_dims(a: &LinearImage, b: &LinearImage) -> Result<()> {
    if !a.same_dims(b) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

pub fn mse(a: &LinearImage, b: &LinearImage) -> Result<f64> {
    check_dims(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.data().len() as f64)
}

/// Peak signal-to-noise ratio in dB. Identical images give `f64::INFINITY`.
pub fn psnr(a: &LinearImage, b: &LinearImage, peak: f64) -> Result<f64> {
    let e = mse(a, b)?;
    if e == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / e).log10())
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Separable "valid" filtering of a plane with the SSIM window.
fn filter_valid(plane: &[f64], w: usize, h: usize, win: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..SSIM_WINDOW).map(|k| win[k] * plane[y * w + x + k]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|k| win[k] * rows[(y + k) * ow + x]).sum();
        }
    }
    out
}

/// Mean structural similarity over all valid 11x11 Gaussian windows
/// (sigma 1.5, K1 0.01, K2 0.03, dynamic range 1), averaged over channels.
pub fn ssim(a: &LinearImage, b: &LinearImage) -> Result<f64> {
    check_dims(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            window: SSIM_WINDOW,
        });
    }
    let win = gaussian_window();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut total = 0.0;
    for c in 0..CHANNELS {
        let pa = a.plane(c);
        let pb = b.plane(c);
        let aa: Vec<f64> = pa.iter().map(|v| v * v).collect();
        let bb: Vec<f64> = pb.iter().map(|v| v * v).collect();
        let ab: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
        let mu_a = filter_valid(&pa, w, h, &win);
        let mu_b = filter_valid(&pb, w, h, &win);
        let e_aa = filter_valid(&aa, w, h, &win);
        let e_bb = filter_valid(&bb, w, h, &win);
        let e_ab = filter_valid(&ab, w, h, &win);
        let mut sum = 0.0;
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
        total += sum / mu_a.len() as f64;
    }
    Ok(total / CHANNELS as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn noise_img(w: usize, h: usize, seed: u64) -> LinearImage {
        LinearImage::from_fn(w, h, |x, y| {
            let v = crate::rng::mix64(seed ^ ((y * w + x) as u64));
            let f = |s: u32| ((v >> s) & 0xffff) as f64 / 65535.0;
            [f(0), f(16), f(32)]
        })
    }

    #[test]
    fn psnr_cases() {
        let a = LinearImage::filled(8, 8, 0.0);
        let b = LinearImage::filled(8, 8, 1.0);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        assert_eq!(psnr(&a, &b, 1.0).unwrap(), 0.0);
        let c = LinearImage::filled(8, 8, 0.5);
        let d = LinearImage::filled(8, 8, 0.6);
        assert_abs_diff_eq!(psnr(&c, &d, 1.0).unwrap(), 20.0, epsilon = 1e-9);
        assert!(psnr(&a, &LinearImage::filled(8, 7, 0.0), 1.0).is_err());
    }

    #[test]
    fn ssim_identity_symmetry_and_negative() {
        let a = noise_img(24, 20, 1);
        let b = noise_img(24, 20, 2);
        assert_abs_diff_eq!(ssim(&a, &a).unwrap(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap(), epsilon = 1e-12);
        let neg = a.map(|v| 1.0 - v);
        assert!(ssim(&a, &neg).unwrap() < 1.0);
        assert!(ssim(&a, &neg).unwrap() < 0.0);
        assert!(matches!(
            ssim(&noise_img(10, 20, 0), &noise_img(10, 20, 1)),
            Err(Error::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn ssim_single_window_matches_direct_formula() {
        // 11x11 images: exactly one window position, computed here from the
        // 2D Gaussian weights directly.
        let a = noise_img(11, 11, 7);
        let b = a.map(|v| 0.8 * v + 0.1 + 0.05 * (v * 40.0).sin());
        let mut g = [[0.0; 11]; 11];
        let mut gs = 0.0;
        for (y, row) in g.iter_mut().enumerate() {
            for (x, v) in row.iter_mut().enumerate() {
                let (dx, dy) = (x as f64 - 5.0, y as f64 - 5.0);
                *v = (-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5)).exp();
                gs += *v;
            }
        }
        let mut expected = 0.0;
        for c in 0..3 {
            let (mut ma, mut mb) = (0.0, 0.0);
            for y in 0..11 {
                for x in 0..11 {
                    ma += g[y][x] / gs * a.get(x, y, c);
                    mb += g[y][x] / gs * b.get(x, y, c);
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for y in 0..11 {
                for x in 0..11 {
                    let wt = g[y][x] / gs;
                    va += wt * (a.get(x, y, c) - ma).powi(2);
                    vb += wt * (b.get(x, y, c) - mb).powi(2);
                    cov += wt * (a.get(x, y, c) - ma) * (b.get(x, y, c) - mb);
                }
            }
            let (c1, c2) = (1e-4, 9e-4);
            expected += (2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
        expected /= 3.0;
        assert_abs_diff_eq!(ssim(&a, &b).unwrap(), expected, epsilon = 1e-12);
    }
}
