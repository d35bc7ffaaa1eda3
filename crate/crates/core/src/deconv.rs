//! Non-blind deconvolution with per-patch kernels.
//!
//! Each patch is deconvolved on a power-of-two buffer at least `patch + ksize`
//! wide, filled with the surrounding image (mirrored at image borders), so the
//! circular model only wraps outside the region that is kept. Patch results
//! are merged by overlap-add with Hann windows renormalized to sum to one.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::image::{reflect_index, LinearImage, Rect, CHANNELS};
use crate::kernels::{BlurKernel, KernelGrid, PatchLayout};

/// Regularization strengths used for the kernel-error baselines.
pub const BASELINE_LAMBDAS: [f64; 4] = [0.001, 0.002, 0.005, 0.01];

const SPECTRAL_ZERO: f64 = 1e-12;
const RL_EPS: f64 = 1e-12;
const FILL_ROUNDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeconvMethod {
    Wiener { lambda: f64 },
    RichardsonLucy { iters: usize },
}

/// 2D FFT over a row-major `nx * ny` buffer.
struct Fft2 {
    nx: usize,
    ny: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            nx,
            ny,
            row_fwd: planner.plan_fft_forward(nx),
            row_inv: planner.plan_fft_inverse(nx),
            col_fwd: planner.plan_fft_forward(ny),
            col_inv: planner.plan_fft_inverse(ny),
        }
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        row.process(buf);
        let mut t = transpose(buf, self.nx, self.ny);
        col.process(&mut t);
        let back = transpose(&t, self.ny, self.nx);
        buf.copy_from_slice(&back);
        if inverse {
            let scale = 1.0 / (self.nx * self.ny) as f64;
            for v in buf.iter_mut() {
                *v *= scale;
            }
        }
    }

    fn forward_real(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        self.transform(&mut buf, false);
        buf
    }

    fn inverse_real(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut spec, true);
        spec.into_iter().map(|c| c.re).collect()
    }

    /// Spectrum of the kernel zero-padded with its center tap at the origin.
    fn kernel_spectrum(&self, kernel: &BlurKernel) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.nx * self.ny];
        let r = kernel.radius() as isize;
        for dy in -r..=r {
            for dx in -r..=r {
                let w = kernel.at(dx, dy);
                if w != 0.0 {
                    let x = dx.rem_euclid(self.nx as isize) as usize;
                    let y = dy.rem_euclid(self.ny as isize) as usize;
                    buf[y * self.nx + x].re += w;
                }
            }
        }
        self.transform(&mut buf, false);
        buf
    }
}

fn transpose(src: &[Complex64], w: usize, h: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); w * h];
    for y in 0..h {
        for x in 0..w {
            out[x * h + y] = src[y * w + x];
        }
    }
    out
}

fn check_buffer(len: usize, nx: usize, ny: usize, kernel: &BlurKernel) -> Result<()> {
    if len != nx * ny {
        return Err(Error::DimensionMismatch(format!(
            "buffer of {len} values is not {nx}x{ny}"
        )));
    }
    if kernel.size() > nx || kernel.size() > ny {
        return Err(Error::DimensionMismatch(format!(
            "kernel {} larger than buffer {nx}x{ny}",
            kernel.size()
        )));
    }
    Ok(())
}

/// Circular convolution `k * x` on an `nx * ny` plane.
pub fn convolve_circular(x: &[f64], nx: usize, ny: usize, kernel: &BlurKernel) -> Result<Vec<f64>> {
    check_buffer(x.len(), nx, ny, kernel)?;
    let fft = Fft2::new(nx, ny);
    let k = fft.kernel_spectrum(kernel);
    let mut xs = fft.forward_real(x);
    for (a, b) in xs.iter_mut().zip(&k) {
        *a *= b;
    }
    Ok(fft.inverse_real(xs))
}

fn wiener_with(fft: &Fft2, k: &[Complex64], y: &[f64], lambda: f64) -> Vec<f64> {
    let mut ys = fft.forward_real(y);
    for (v, kv) in ys.iter_mut().zip(k) {
        *v = kv.conj() * *v / (kv.norm_sqr() + lambda);
    }
    fft.inverse_real(ys)
}

fn check_lambda(k: &[Complex64], lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::OutOfRange {
            what: "lambda",
            value: lambda,
        });
    }
    if lambda == 0.0 && k.iter().any(|c| c.norm_sqr() < SPECTRAL_ZERO) {
        return Err(Error::SpectralZero);
    }
    Ok(())
}

/// Wiener estimate `conj(K) Y / (|K|^2 + lambda)` on a circular plane.
pub fn wiener_circular(y: &[f64], nx: usize, ny: usize, kernel: &BlurKernel, lambda: f64) -> Result<Vec<f64>> {
    check_buffer(y.len(), nx, ny, kernel)?;
    let fft = Fft2::new(nx, ny);
    let k = fft.kernel_spectrum(kernel);
    check_lambda(&k, lambda)?;
    Ok(wiener_with(&fft, &k, y, lambda))
}

fn rl_with(fft: &Fft2, k: &[Complex64], y: &[f64], iters: usize) -> Vec<f64> {
    let y: Vec<f64> = y.iter().map(|v| v.max(0.0)).collect();
    let mut x = y.clone();
    for _ in 0..iters {
        let mut xs = fft.forward_real(&x);
        for (a, b) in xs.iter_mut().zip(k) {
            *a *= b;
        }
        let blurred = fft.inverse_real(xs);
        let ratio: Vec<f64> = y
            .iter()
            .zip(&blurred)
            .map(|(o, b)| o / b.max(RL_EPS))
            .collect();
        let mut rs = fft.forward_real(&ratio);
        for (a, b) in rs.iter_mut().zip(k) {
            *a *= b.conj();
        }
        let corr = fft.inverse_real(rs);
        for (xv, c) in x.iter_mut().zip(corr) {
            *xv = (*xv * c).max(0.0);
        }
    }
    x
}

/// Richardson-Lucy iterations on a circular plane, starting from the observation.
pub fn richardson_lucy_circular(y: &[f64], nx: usize, ny: usize, kernel: &BlurKernel, iters: usize) -> Result<Vec<f64>> {
    check_buffer(y.len(), nx, ny, kernel)?;
    let fft = Fft2::new(nx, ny);
    let k = fft.kernel_spectrum(kernel);
    Ok(rl_with(&fft, &k, y, iters))
}

/// Deconvolves the region `rect` of `img`. The region is padded with at
/// least one kernel width of context (mirrored past the image border) and the
/// padding is edge-tapered so the circular model has no seam. For Wiener, the
/// samples outside the image or near the seam are then re-estimated a few
/// times by blurring the current estimate.
pub fn deconv_region(img: &LinearImage, rect: Rect, kernel: &BlurKernel, method: DeconvMethod) -> Result<LinearImage> {
    if rect.w == 0 || rect.h == 0 || rect.x + rect.w > img.width() || rect.y + rect.h > img.height() {
        return Err(Error::DimensionMismatch(format!(
            "region {rect:?} outside {}x{} image",
            img.width(),
            img.height()
        )));
    }
    if let DeconvMethod::RichardsonLucy { iters: 0 } = method {
        return img.crop(&rect);
    }
    let margin = kernel.size();
    let (lead_x, nx) = padded_len(rect.w, margin);
    let (lead_y, ny) = padded_len(rect.h, margin);
    let fft = Fft2::new(nx, ny);
    let k = fft.kernel_spectrum(kernel);
    if let DeconvMethod::Wiener { lambda } = method {
        check_lambda(&k, lambda)?;
    }

    let xmap: Vec<usize> = (0..nx)
        .map(|i| reflect_index(rect.x as isize - lead_x as isize + i as isize, img.width()))
        .collect();
    let ymap: Vec<usize> = (0..ny)
        .map(|j| reflect_index(rect.y as isize - lead_y as isize + j as isize, img.height()))
        .collect();
    let (rx, ry) = extent(kernel);
    let tx = taper(nx, lead_x.min(nx - rect.w - lead_x), rect.x as isize - lead_x as isize, img.width(), rx);
    let ty = taper(ny, lead_y.min(ny - rect.h - lead_y), rect.y as isize - lead_y as isize, img.height(), ry);

    let kx = observed(nx, rect.x as isize - lead_x as isize, img.width(), margin);
    let ky = observed(ny, rect.y as isize - lead_y as isize, img.height(), margin);
    let known: Vec<bool> = (0..nx * ny).map(|i| kx[i % nx] && ky[i / nx]).collect();
    let mut out = LinearImage::filled(rect.w, rect.h, 0.0);
    for c in 0..CHANNELS {
        let mut buf = vec![0.0; nx * ny];
        for (j, &sy) in ymap.iter().enumerate() {
            for (i, &sx) in xmap.iter().enumerate() {
                buf[j * nx + i] = img.get(sx, sy, c);
            }
        }
        edge_taper(&fft, &k, &mut buf, &tx, &ty);
        let est = match method {
            DeconvMethod::Wiener { lambda } => {
                for _ in 0..FILL_ROUNDS {
                    let reblur = blur_with(&fft, &k, &wiener_with(&fft, &k, &buf, lambda));
                    for ((v, r), &m) in buf.iter_mut().zip(reblur).zip(&known) {
                        if !m {
                            *v = r;
                        }
                    }
                }
                wiener_with(&fft, &k, &buf, lambda)
            }
            DeconvMethod::RichardsonLucy { iters } => rl_with(&fft, &k, &buf, iters),
        };
        for y in 0..rect.h {
            for x in 0..rect.w {
                out.set(x, y, c, est[(y + lead_y) * nx + x + lead_x]);
            }
        }
    }
    Ok(out)
}

/// Largest horizontal and vertical offsets carrying weight.
fn extent(kernel: &BlurKernel) -> (usize, usize) {
    let r = kernel.radius() as isize;
    let (mut rx, mut ry) = (0, 0);
    for dy in -r..=r {
        for dx in -r..=r {
            if kernel.at(dx, dy) > 0.0 {
                rx = rx.max(dx.unsigned_abs());
                ry = ry.max(dy.unsigned_abs());
            }
        }
    }
    (rx, ry)
}

fn is_smooth(mut p: usize) -> bool {
    for f in [2, 3, 5] {
        while p % f == 0 {
            p /= f;
        }
    }
    p == 1
}

/// FFT-friendly length of at least `len + 2 * margin`, and the padding
/// before the region.
fn padded_len(len: usize, margin: usize) -> (usize, usize) {
    let mut n = len + 2 * margin;
    while !is_smooth(n) {
        n += 1;
    }
    ((n - len) / 2, n)
}

/// Weight 1 away from the wrap-around seam, falling to 0 at it over `width`
/// samples. Samples that lie outside the image get weight 0.
fn taper(n: usize, width: usize, start: isize, dim: usize, border: usize) -> Vec<f64> {
    let ramp = |d: f64, w: usize| {
        let s = (0.5 * PI * (d / w.max(1) as f64).min(1.0)).sin();
        s * s
    };
    (0..n)
        .map(|i| {
            let src = start + i as isize;
            if src < 0 || src >= dim as isize {
                return 0.0;
            }
            let to_seam = (i as f64 + 0.5).min(n as f64 - i as f64 - 0.5);
            let to_border = (src as f64 + 0.5).min(dim as f64 - src as f64 - 0.5);
            let inner = if border == 0 { 1.0 } else { ramp(to_border, border) };
            ramp(to_seam, width) * inner
        })
        .collect()
}

/// Samples inside the image and at least `band` away from the seam.
fn observed(n: usize, start: isize, dim: usize, band: usize) -> Vec<bool> {
    (0..n)
        .map(|i| {
            let src = start + i as isize;
            src >= 0 && src < dim as isize && i >= band && i + band < n
        })
        .collect()
}

fn blur_with(fft: &Fft2, k: &[Complex64], x: &[f64]) -> Vec<f64> {
    let mut spec = fft.forward_real(x);
    for (a, b) in spec.iter_mut().zip(k) {
        *a *= b;
    }
    fft.inverse_real(spec)
}

/// `y <- a y + (1 - a) (k * y)` with circular blur, so data near the seam
/// is consistent with the circular model.
fn edge_taper(fft: &Fft2, k: &[Complex64], buf: &mut [f64], tx: &[f64], ty: &[f64]) {
    let mut spec = fft.forward_real(buf);
    for (a, b) in spec.iter_mut().zip(k) {
        *a *= b;
    }
    let blurred = fft.inverse_real(spec);
    let nx = tx.len();
    for (i, (v, b)) in buf.iter_mut().zip(blurred).enumerate() {
        let a = tx[i % nx] * ty[i / nx];
        *v = a * *v + (1.0 - a) * b;
    }
}

pub fn wiener_patch(patch: &LinearImage, kernel: &BlurKernel, lambda: f64) -> Result<LinearImage> {
    let rect = Rect::new(0, 0, patch.width(), patch.height());
    deconv_region(patch, rect, kernel, DeconvMethod::Wiener { lambda })
}

pub fn richardson_lucy(patch: &LinearImage, kernel: &BlurKernel, iters: usize) -> Result<LinearImage> {
    let rect = Rect::new(0, 0, patch.width(), patch.height());
    deconv_region(patch, rect, kernel, DeconvMethod::RichardsonLucy { iters })
}

fn hann(i: usize, n: usize) -> f64 {
    let s = (PI * (i as f64 + 0.5) / n as f64).sin();
    s * s
}

/// Per-patch blend weights (row-major patch order, each `patch * patch`),
/// normalized so that the weights of all patches covering a pixel sum to 1.
pub fn blend_weights(layout: &PatchLayout) -> Result<Vec<Vec<f64>>> {
    let (w, h, p) = (layout.width, layout.height, layout.patch);
    let window: Vec<f64> = (0..p * p).map(|i| hann(i / p, p) * hann(i % p, p)).collect();
    let mut sum = vec![0.0; w * h];
    for r in layout.rects() {
        for y in 0..p {
            for x in 0..p {
                sum[(r.y + y) * w + r.x + x] += window[y * p + x];
            }
        }
    }
    if let Some(i) = sum.iter().position(|s| !(*s > 0.0)) {
        return Err(Error::CoverageGap { x: i % w, y: i / w });
    }
    Ok(layout
        .rects()
        .map(|r| {
            (0..p * p)
                .map(|i| window[i] / sum[(r.y + i / p) * w + r.x + i % p])
                .collect()
        })
        .collect())
}

/// Deconvolves every patch with its own kernel and merges the results by
/// windowed overlap-add. Patch jobs may run in parallel; accumulation is
/// sequential in row-major patch order.
pub fn deconv_spatially_varying(
    img: &LinearImage,
    kernels: &KernelGrid,
    layout: &PatchLayout,
    method: DeconvMethod,
) -> Result<LinearImage> {
    if layout.width != img.width() || layout.height != img.height() {
        return Err(Error::DimensionMismatch(format!(
            "layout {}x{} vs image {}x{}",
            layout.width,
            layout.height,
            img.width(),
            img.height()
        )));
    }
    if !kernels.matches(layout) {
        return Err(Error::DimensionMismatch(format!(
            "kernel grid {}x{} vs layout {}x{}",
            kernels.rows,
            kernels.cols,
            layout.rows(),
            layout.cols()
        )));
    }
    let weights = blend_weights(layout)?;
    let rects: Vec<Rect> = layout.rects().collect();
    let patches = rects
        .par_iter()
        .zip(kernels.kernels.par_iter())
        .map(|(r, k)| deconv_region(img, *r, k, method))
        .collect::<Result<Vec<_>>>()?;

    let w = img.width();
    let p = layout.patch;
    let mut acc = vec![0.0; w * img.height() * CHANNELS];
    let mut wsum = vec![0.0; w * img.height()];
    for ((r, patch), wts) in rects.iter().zip(&patches).zip(&weights) {
        for y in 0..p {
            for x in 0..p {
                let wt = wts[y * p + x];
                let pix = (r.y + y) * w + r.x + x;
                wsum[pix] += wt;
                for c in 0..CHANNELS {
                    acc[pix * CHANNELS + c] += wt * patch.get(x, y, c);
                }
            }
        }
    }
    if let Some(i) = wsum.iter().position(|s| *s < 1.0 - 1e-6) {
        return Err(Error::CoverageGap { x: i % w, y: i / w });
    }
    LinearImage::new(w, img.height(), acc)
}

/// Direct spatial convolution `k * x` with mirrored borders.
pub fn convolve_reflect(img: &LinearImage, kernel: &BlurKernel) -> LinearImage {
    let (w, h) = (img.width(), img.height());
    let r = kernel.radius() as isize;
    let taps: Vec<(isize, isize, f64)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter_map(|(dx, dy)| {
            let wt = kernel.at(dx, dy);
            (wt != 0.0).then_some((dx, dy, wt))
        })
        .collect();
    let mut out = LinearImage::filled(w, h, 0.0);
    out.data_mut()
        .par_chunks_mut(w * CHANNELS)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..w {
                let mut acc = [0.0; 3];
                for &(dx, dy, wt) in &taps {
                    let sx = reflect_index(x as isize - dx, w);
                    let sy = reflect_index(y as isize - dy, h);
                    for (c, a) in acc.iter_mut().enumerate() {
                        *a += wt * img.get(sx, sy, c);
                    }
                }
                row[x * CHANNELS..(x + 1) * CHANNELS].copy_from_slice(&acc);
            }
        });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::patch_layout;
    use crate::metrics::psnr;
    use approx::assert_abs_diff_eq;

    fn line_kernel(len: usize, size: usize) -> BlurKernel {
        let mut w = vec![0.0; size * size];
        let r = size / 2;
        let start = r - len / 2;
        for i in 0..len {
            w[r * size + start + i] = 1.0 / len as f64;
        }
        BlurKernel::new(size, w).unwrap()
    }

    fn texture(w: usize, h: usize) -> LinearImage {
        LinearImage::from_fn(w, h, |x, y| {
            let (x, y) = (x as f64, y as f64);
            let checker = if ((x / 6.0).floor() + (y / 6.0).floor()) as i64 % 2 == 0 { 0.2 } else { 0.0 };
            [
                0.4 + 0.25 * (0.31 * x + 0.1 * y).sin() + checker,
                0.5 + 0.2 * (0.17 * y).cos() * (0.23 * x).sin(),
                0.3 + checker + 0.1 * (0.05 * (x - y)).sin(),
            ]
        })
    }

    #[test]
    fn delta_kernel_is_identity() {
        let img = texture(37, 29);
        let d = BlurKernel::delta(9).unwrap();
        let w = wiener_patch(&img, &d, 0.0).unwrap();
        for (a, b) in w.data().iter().zip(img.data()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
        let rl = richardson_lucy(&img, &d, 25).unwrap();
        for (a, b) in rl.data().iter().zip(img.data()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(rl.mean(), img.mean(), epsilon = 1e-12);
        assert_eq!(richardson_lucy(&img, &line_kernel(5, 9), 0).unwrap(), img);
    }

    #[test]
    fn accepts_baseline_lambdas() {
        let img = texture(32, 32);
        let k = line_kernel(5, 9);
        for l in BASELINE_LAMBDAS {
            assert!(wiener_patch(&img, &k, l).is_ok());
        }
        assert!(wiener_patch(&img, &k, -1.0).is_err());
    }

    #[test]
    fn spectral_zero_rejected_without_regularization() {
        // [0.5, 0.5] has a zero at the Nyquist frequency of any even-sized buffer.
        let mut w = vec![0.0; 9];
        w[4] = 0.5;
        w[5] = 0.5;
        let k = BlurKernel::new(3, w).unwrap();
        assert!(matches!(wiener_patch(&texture(16, 16), &k, 0.0), Err(Error::SpectralZero)));
        assert!(wiener_patch(&texture(16, 16), &k, 1e-3).is_ok());
    }

    #[test]
    fn wiener_gain_on_line_blur() {
        let sharp = texture(96, 96);
        let k = line_kernel(9, 11);
        let blurred = convolve_reflect(&sharp, &k);
        let out = wiener_patch(&blurred, &k, 1e-4).unwrap();
        let gain = psnr(&out, &sharp, 1.0).unwrap() - psnr(&blurred, &sharp, 1.0).unwrap();
        assert!(gain >= 10.0, "gain {gain}");
    }

    #[test]
    fn rl_gain_and_nonnegativity() {
        let sharp = texture(96, 96);
        let k = line_kernel(9, 11);
        let blurred = convolve_reflect(&sharp, &k);
        let out = richardson_lucy(&blurred, &k, 30).unwrap();
        assert!(out.data().iter().all(|v| *v >= 0.0));
        let gain = psnr(&out, &sharp, 1.0).unwrap() - psnr(&blurred, &sharp, 1.0).unwrap();
        assert!(gain >= 5.0, "gain {gain}");
    }

    #[test]
    fn convolve_circular_matches_direct_sum() {
        let (nx, ny) = (8, 4);
        let x: Vec<f64> = (0..nx * ny).map(|i| ((i * 7) % 5) as f64).collect();
        let k = BlurKernel::new(3, vec![0.0, 0.1, 0.0, 0.2, 0.4, 0.0, 0.0, 0.3, 0.0]).unwrap();
        let got = convolve_circular(&x, nx, ny, &k).unwrap();
        for y in 0..ny {
            for xx in 0..nx {
                let mut s = 0.0;
                for dy in -1..=1isize {
                    for dx in -1..=1isize {
                        let sx = (xx as isize - dx).rem_euclid(nx as isize) as usize;
                        let sy = (y as isize - dy).rem_euclid(ny as isize) as usize;
                        s += k.at(dx, dy) * x[sy * nx + sx];
                    }
                }
                assert_abs_diff_eq!(got[y * nx + xx], s, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn wiener_residual_monotone_in_lambda() {
        let (nx, ny) = (32, 32);
        let y: Vec<f64> = (0..nx * ny).map(|i| ((i as f64) * 0.37).sin() * 0.5 + 0.5).collect();
        let k = line_kernel(7, 9);
        let mut last = -1.0;
        for lambda in [0.0, 1e-6, 1e-4, 1e-3, 2e-3, 5e-3, 1e-2, 0.1, 1.0] {
            let Ok(x) = wiener_circular(&y, nx, ny, &k, lambda) else {
                continue;
            };
            let kx = convolve_circular(&x, nx, ny, &k).unwrap();
            let res: f64 = kx.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(res >= last - 1e-12, "lambda {lambda}: {res} < {last}");
            last = res;
        }
    }

    #[test]
    fn blend_weights_partition_of_unity() {
        for (w, h, p) in [(300, 170, 160), (128, 96, 32), (64, 64, 64)] {
            let layout = patch_layout(w, h, p, 0.5).unwrap();
            let weights = blend_weights(&layout).unwrap();
            let mut sum = vec![0.0; w * h];
            for (r, wt) in layout.rects().zip(&weights) {
                for y in 0..p {
                    for x in 0..p {
                        sum[(r.y + y) * w + r.x + x] += wt[y * p + x];
                    }
                }
            }
            assert!(sum.iter().all(|s| (s - 1.0).abs() < 1e-6));
        }
    }

    #[test]
    fn spatially_varying_delta_identity_and_errors() {
        let img = texture(100, 72);
        let layout = patch_layout(100, 72, 32, 0.5).unwrap();
        let grid = KernelGrid::uniform(layout.rows(), layout.cols(), BlurKernel::delta(5).unwrap());
        for m in [DeconvMethod::Wiener { lambda: 0.0 }, DeconvMethod::RichardsonLucy { iters: 5 }] {
            let out = deconv_spatially_varying(&img, &grid, &layout, m).unwrap();
            for (a, b) in out.data().iter().zip(img.data()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-6);
            }
        }
        let small = KernelGrid::uniform(1, 1, BlurKernel::delta(5).unwrap());
        assert!(deconv_spatially_varying(&img, &small, &layout, DeconvMethod::Wiener { lambda: 0.01 }).is_err());
        let other = patch_layout(90, 72, 32, 0.5).unwrap();
        assert!(deconv_spatially_varying(&img, &grid, &other, DeconvMethod::Wiener { lambda: 0.01 }).is_err());
    }
}
