//! Synthetic camera-shake blur: warp a sharp frame along the gyro trajectory,
//! optionally composite a moving object, average, then apply a simplified
//! sensor model (saturation, heteroscedastic noise, sRGB encoding).

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gyro::{
    build_cmf_with_exposure, homography, integrate_orientations, rotation_matrix,
    CameraIntrinsics, CameraMotionField, GyroSample, GyroSequence, Homography, ResampledGyro,
};
use crate::image::{LinearImage, Rect, CHANNELS};
use crate::rng::rng_from_seed;

const EDGE_EPS: f64 = 1e-9;

/// Per-pixel flag: true where the warped pixel had a source inside the image.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidityMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl ValidityMask {
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn all_valid(&self) -> bool {
        self.data.iter().all(|v| *v)
    }
}

/// Bilinear sample at a continuous position. `None` when outside the image.
#[inline]
fn sample_bilinear(img: &LinearImage, sx: f64, sy: f64) -> Option<[f64; 3]> {
    let (w, h) = (img.width(), img.height());
    let max_x = (w - 1) as f64;
    let max_y = (h - 1) as f64;
    if !(sx >= -EDGE_EPS && sx <= max_x + EDGE_EPS && sy >= -EDGE_EPS && sy <= max_y + EDGE_EPS) {
        return None;
    }
    let sx = sx.clamp(0.0, max_x);
    let sy = sy.clamp(0.0, max_y);
    let x0 = (sx.floor() as usize).min(w.saturating_sub(2));
    let y0 = (sy.floor() as usize).min(h.saturating_sub(2));
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = sx - x0 as f64;
    let fy = sy - y0 as f64;
    let data = img.data();
    let mut out = [0.0; 3];
    let i00 = (y0 * w + x0) * CHANNELS;
    let i01 = (y0 * w + x1) * CHANNELS;
    let i10 = (y1 * w + x0) * CHANNELS;
    let i11 = (y1 * w + x1) * CHANNELS;
    for (c, o) in out.iter_mut().enumerate() {
        let top = data[i00 + c] * (1.0 - fx) + data[i01 + c] * fx;
        let bottom = data[i10 + c] * (1.0 - fx) + data[i11 + c] * fx;
        *o = top * (1.0 - fy) + bottom * fy;
    }
    Some(out)
}

#[inline]
fn inverse_map(hinv: &nalgebra::Matrix3<f64>, x: f64, y: f64) -> Option<(f64, f64)> {
    let w = hinv[(2, 0)] * x + hinv[(2, 1)] * y + hinv[(2, 2)];
    if w.abs() < 1e-12 {
        return None;
    }
    Some((
        (hinv[(0, 0)] * x + hinv[(0, 1)] * y + hinv[(0, 2)]) / w,
        (hinv[(1, 0)] * x + hinv[(1, 1)] * y + hinv[(1, 2)]) / w,
    ))
}

/// Inverse-mapped bilinear warp: `out(q) = img(H^-1 q)`. Pixels whose source
/// falls outside the image are zero and flagged invalid.
pub fn warp_image(img: &LinearImage, h: &Homography) -> Result<(LinearImage, ValidityMask)> {
    let hinv = *h.inverse()?.matrix();
    let (w, hgt) = (img.width(), img.height());
    let mut out = LinearImage::filled(w, hgt, 0.0);
    let mut mask = vec![false; w * hgt];
    out.data_mut()
        .par_chunks_mut(w * CHANNELS)
        .zip(mask.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (row, mrow))| {
            for x in 0..w {
                let px = inverse_map(&hinv, x as f64, y as f64)
                    .and_then(|(sx, sy)| sample_bilinear(img, sx, sy));
                if let Some(px) = px {
                    row[x * CHANNELS..(x + 1) * CHANNELS].copy_from_slice(&px);
                    mrow[x] = true;
                }
            }
        });
    Ok((
        out,
        ValidityMask {
            width: w,
            height: hgt,
            data: mask,
        },
    ))
}

/// RGBA sprite with straight (non-premultiplied) alpha.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbaSprite {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl RgbaSprite {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height * 4 {
            return Err(Error::DimensionMismatch(format!(
                "sprite {width}x{height} with {} values",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Opaque disc of `radius` pixels with a one-pixel antialiased rim.
    pub fn disc(radius: f64, color: [f64; 3]) -> Self {
        let size = (2.0 * radius).ceil() as usize + 2;
        let c = (size as f64 - 1.0) / 2.0;
        let mut data = Vec::with_capacity(size * size * 4);
        for y in 0..size {
            for x in 0..size {
                let d = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2)).sqrt();
                let a = (radius - d + 0.5).clamp(0.0, 1.0);
                data.extend_from_slice(&[color[0], color[1], color[2], a]);
            }
        }
        Self {
            width: size,
            height: size,
            data,
        }
    }

    /// Premultiplied RGBA at a continuous sprite coordinate, zero outside.
    #[inline]
    fn sample_premultiplied(&self, u: f64, v: f64) -> [f64; 4] {
        let mut out = [0.0; 4];
        if !(u > -1.0 && v > -1.0 && u < self.width as f64 && v < self.height as f64) {
            return out;
        }
        let u0 = u.floor();
        let v0 = v.floor();
        let fu = u - u0;
        let fv = v - v0;
        for (dy, wy) in [(0isize, 1.0 - fv), (1, fv)] {
            for (dx, wx) in [(0isize, 1.0 - fu), (1, fu)] {
                let xi = u0 as isize + dx;
                let yi = v0 as isize + dy;
                let wgt = wx * wy;
                if wgt == 0.0
                    || xi < 0
                    || yi < 0
                    || xi >= self.width as isize
                    || yi >= self.height as isize
                {
                    continue;
                }
                let i = (yi as usize * self.width + xi as usize) * 4;
                let a = self.data[i + 3];
                out[0] += wgt * a * self.data[i];
                out[1] += wgt * a * self.data[i + 1];
                out[2] += wgt * a * self.data[i + 2];
                out[3] += wgt * a;
            }
        }
        out
    }
}

/// An object sliding at constant speed across the exposure.
#[derive(Debug, Clone, PartialEq)]
pub struct MovingObjectSpec {
    pub sprite: RgbaSprite,
    /// Top-left corner of the sprite at the start of the exposure.
    pub position: (f64, f64),
    /// Degrees in `[0, 360)`.
    pub direction_deg: f64,
    /// Pixels travelled over the whole exposure.
    pub distance: f64,
}

impl MovingObjectSpec {
    pub const MIN_DISTANCE: f64 = 30.0;
    pub const MAX_DISTANCE: f64 = 70.0;

    /// Displacement at fraction `f` of the exposure.
    pub fn offset_at(&self, f: f64) -> (f64, f64) {
        let rad = self.direction_deg.to_radians();
        (f * self.distance * rad.cos(), f * self.distance * rad.sin())
    }

    /// Displacement in frame `k` of `n`.
    pub fn offset(&self, k: usize, n: usize) -> (f64, f64) {
        if n <= 1 {
            return (0.0, 0.0);
        }
        self.offset_at(k as f64 / (n - 1) as f64)
    }

    fn check_fits(&self, w: usize, h: usize) -> Result<()> {
        if self.sprite.width > w || self.sprite.height > h {
            return Err(Error::SpriteTooLarge {
                sprite_w: self.sprite.width,
                sprite_h: self.sprite.height,
                frame_w: w,
                frame_h: h,
            });
        }
        if self.distance < 0.0 || !self.distance.is_finite() {
            return Err(Error::OutOfRange {
                what: "object distance",
                value: self.distance,
            });
        }
        Ok(())
    }

    #[inline]
    fn over(&self, offset: (f64, f64), x: usize, y: usize, bg: &mut [f64]) {
        let u = x as f64 - self.position.0 - offset.0;
        let v = y as f64 - self.position.1 - offset.1;
        let s = self.sprite.sample_premultiplied(u, v);
        if s[3] == 0.0 {
            return;
        }
        for c in 0..3 {
            bg[c] = s[c] + (1.0 - s[3]) * bg[c];
        }
    }

    fn composite_at(&self, img: &mut LinearImage, offset: (f64, f64)) {
        let w = img.width();
        img.data_mut()
            .chunks_mut(w * CHANNELS)
            .enumerate()
            .for_each(|(y, row)| {
                for x in 0..w {
                    self.over(offset, x, y, &mut row[x * CHANNELS..(x + 1) * CHANNELS]);
                }
            });
    }
}

/// Draws direction in `[0, 360)`, distance in `[30, 70]` and a start position
/// keeping the sprite inside the frame.
pub fn sample_object_spec<R: Rng + ?Sized>(
    rng: &mut R,
    sprite: RgbaSprite,
    frame_w: usize,
    frame_h: usize,
) -> Result<MovingObjectSpec> {
    if sprite.width > frame_w || sprite.height > frame_h {
        return Err(Error::SpriteTooLarge {
            sprite_w: sprite.width,
            sprite_h: sprite.height,
            frame_w,
            frame_h,
        });
    }
    let direction_deg = rng.random_range(0.0..360.0);
    let distance = rng.random_range(MovingObjectSpec::MIN_DISTANCE..=MovingObjectSpec::MAX_DISTANCE);
    let x = rng.random_range(0.0..=(frame_w - sprite.width) as f64);
    let y = rng.random_range(0.0..=(frame_h - sprite.height) as f64);
    Ok(MovingObjectSpec {
        sprite,
        position: (x, y),
        direction_deg,
        distance,
    })
}

/// Alpha-composites the object into each frame at its constant-speed position.
pub fn composite_object(frames: &[LinearImage], spec: &MovingObjectSpec) -> Result<Vec<LinearImage>> {
    let first = frames.first().ok_or(Error::NoFrames)?;
    spec.check_fits(first.width(), first.height())?;
    let n = frames.len();
    Ok(frames
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let mut out = f.clone();
            spec.composite_at(&mut out, spec.offset(k, n));
            out
        })
        .collect())
}

/// Blurred image restricted to the all-frames-valid crop.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesized {
    pub image: LinearImage,
    /// Crop rectangle in source-image coordinates.
    pub crop: Rect,
}

/// Average of the frames warped by every homography, center-cropped to the
/// largest region valid in all frames (crop dims even).
pub fn synthesize_blur(img: &LinearImage, homographies: &[Homography]) -> Result<Synthesized> {
    synthesize_blur_with(img, homographies, None, 2)
}

/// [`synthesize_blur`] with an optional moving object composited into each
/// warped frame before averaging, and crop dims rounded down to a multiple of `align`.
pub fn synthesize_blur_with(
    img: &LinearImage,
    homographies: &[Homography],
    object: Option<&MovingObjectSpec>,
    align: usize,
) -> Result<Synthesized> {
    if homographies.is_empty() {
        return Err(Error::EmptyHomographies);
    }
    let (w, h) = (img.width(), img.height());
    if let Some(obj) = object {
        obj.check_fits(w, h)?;
    }
    let inverses = homographies
        .iter()
        .map(|hm| hm.inverse().map(|i| *i.matrix()))
        .collect::<Result<Vec<_>>>()?;
    let n = homographies.len();
    let offsets: Vec<(f64, f64)> = (0..n)
        .map(|k| object.map_or((0.0, 0.0), |o| o.offset(k, n)))
        .collect();

    let mut sum = vec![0.0; w * h * CHANNELS];
    let mut valid = vec![true; w * h];
    sum.par_chunks_mut(w * CHANNELS)
        .zip(valid.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (row, vrow))| {
            let mut px = [0.0; 3];
            for (hinv, offset) in inverses.iter().zip(&offsets) {
                for x in 0..w {
                    if !vrow[x] {
                        continue;
                    }
                    match inverse_map(hinv, x as f64, y as f64)
                        .and_then(|(sx, sy)| sample_bilinear(img, sx, sy))
                    {
                        Some(v) => {
                            px.copy_from_slice(&v);
                            if let Some(obj) = object {
                                obj.over(*offset, x, y, &mut px);
                            }
                            for c in 0..CHANNELS {
                                row[x * CHANNELS + c] += px[c];
                            }
                        }
                        None => vrow[x] = false,
                    }
                }
            }
            let inv_n = 1.0 / n as f64;
            for x in 0..w {
                for c in 0..CHANNELS {
                    let v = &mut row[x * CHANNELS + c];
                    *v = if vrow[x] { *v * inv_n } else { 0.0 };
                }
            }
        });

    let crop = max_centered_valid_rect(&valid, w, h, align)?;
    let full = LinearImage::new(w, h, sum)?;
    Ok(Synthesized {
        image: full.crop(&crop)?,
        crop,
    })
}

/// Largest-area rectangle with symmetric margins that contains only valid
/// pixels. Width and height are rounded down to multiples of `align`, trimming
/// the right/bottom edge. Ties prefer the wider rectangle.
pub fn max_centered_valid_rect(valid: &[bool], w: usize, h: usize, align: usize) -> Result<Rect> {
    let align = align.max(1);
    // prefix[y][x] = number of invalid pixels in [0, x) x [0, y)
    let stride = w + 1;
    let mut prefix = vec![0u32; (h + 1) * stride];
    for y in 0..h {
        let mut row_acc = 0u32;
        for x in 0..w {
            row_acc += u32::from(!valid[y * w + x]);
            prefix[(y + 1) * stride + x + 1] = prefix[y * stride + x + 1] + row_acc;
        }
    }
    let invalid_in = |x0: usize, y0: usize, x1: usize, y1: usize| -> u32 {
        prefix[y1 * stride + x1] + prefix[y0 * stride + x0]
            - prefix[y0 * stride + x1]
            - prefix[y1 * stride + x0]
    };

    let mut best: Option<(usize, Rect)> = None;
    for mx in 0..w.div_ceil(2) {
        let width = w - 2 * mx;
        let aligned_w = width - width % align;
        if aligned_w == 0 {
            break;
        }
        if let Some((area, _)) = best {
            if aligned_w * h <= area {
                break;
            }
        }
        let ok = |my: usize| -> bool { invalid_in(mx, my, w - mx, h - my) == 0 };
        let max_my = (h - 1) / 2;
        if !ok(max_my) {
            continue;
        }
        let (mut lo, mut hi) = (0usize, max_my);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let height = h - 2 * lo;
        let aligned_h = height - height % align;
        if aligned_h == 0 {
            continue;
        }
        let area = aligned_w * aligned_h;
        if best.is_none_or(|(a, _)| area > a) {
            best = Some((area, Rect::new(mx, lo, aligned_w, aligned_h)));
        }
    }
    best.map(|(_, r)| r).ok_or(Error::EmptyValidRegion)
}

/// Scales intensities and clips to `[0, 1]`.
pub fn apply_saturation(img: &LinearImage, scale: f64) -> Result<LinearImage> {
    if !(scale.is_finite() && scale >= 1.0) {
        return Err(Error::OutOfRange {
            what: "saturation scale",
            value: scale,
        });
    }
    Ok(img.map(|v| (v * scale).clamp(0.0, 1.0)))
}

/// Shot/read noise calibration: `log2(shot)` at two ISO anchors and a linear
/// relation `log2(read) = slope * log2(shot) + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub log2_shot_iso100: f64,
    pub log2_shot_iso1600: f64,
    pub slope: f64,
    pub intercept: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            log2_shot_iso100: -10.000_993_824_3,
            log2_shot_iso1600: -9.334_882_426_6,
            slope: 3.155_787_51,
            intercept: 10.000_351_415_2,
        }
    }
}

impl NoiseParams {
    pub const ISO_MIN: f64 = 100.0;
    pub const ISO_MAX: f64 = 1600.0;

    /// Parameters that produce zero variance at every ISO.
    pub fn silent() -> Self {
        Self {
            log2_shot_iso100: f64::NEG_INFINITY,
            log2_shot_iso1600: f64::NEG_INFINITY,
            slope: 1.0,
            intercept: 0.0,
        }
    }

    /// `(shot, read)` at `iso`, interpolating `log2(shot)` linearly in `log2(iso)`.
    pub fn shot_read(&self, iso: f64) -> Result<(f64, f64)> {
        if !(Self::ISO_MIN..=Self::ISO_MAX).contains(&iso) {
            return Err(Error::OutOfRange {
                what: "iso",
                value: iso,
            });
        }
        let t = (iso.log2() - Self::ISO_MIN.log2()) / (Self::ISO_MAX.log2() - Self::ISO_MIN.log2());
        let log2_shot = if self.log2_shot_iso100 == self.log2_shot_iso1600 {
            self.log2_shot_iso100
        } else {
            self.log2_shot_iso100 + t * (self.log2_shot_iso1600 - self.log2_shot_iso100)
        };
        let shot = log2_shot.exp2();
        let read = (self.slope * log2_shot + self.intercept).exp2();
        Ok((shot, read))
    }
}

/// Variance `shot * signal + read` at `iso`.
pub fn shot_read_variance(params: &NoiseParams, iso: f64, signal: f64) -> Result<f64> {
    if !(signal >= 0.0) {
        return Err(Error::OutOfRange {
            what: "signal",
            value: signal,
        });
    }
    let (shot, read) = params.shot_read(iso)?;
    Ok(shot * signal + read)
}

/// Adds Gaussian noise with variance `shot * x + read` per value, then clips to `[0, 1]`.
pub fn apply_noise(img: &LinearImage, iso: f64, params: &NoiseParams, seed: u64) -> Result<LinearImage> {
    let (shot, read) = params.shot_read(iso)?;
    let mut rng = rng_from_seed(seed);
    let mut out = img.clone();
    for v in out.data_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        let var = shot * v.max(0.0) + read;
        *v = (*v + z * var.sqrt()).clamp(0.0, 1.0);
    }
    Ok(out)
}

pub fn linear_to_srgb_value(v: f64) -> f64 {
    let v = v.clamp(0.0, 1.0);
    if v <= 0.003_130_8 {
        12.92 * v
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

pub fn srgb_to_linear_value(v: f64) -> f64 {
    let v = v.clamp(0.0, 1.0);
    if v <= 0.040_45 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

pub fn linear_to_srgb(img: &LinearImage) -> LinearImage {
    img.map(linear_to_srgb_value)
}

pub fn srgb_to_linear(img: &LinearImage) -> LinearImage {
    img.map(srgb_to_linear_value)
}

/// Upsamples the window by `factor` with per-axis cubic splines:
/// `(N - 1) * factor + 1` samples, original samples kept exactly.
pub fn densify_gyro(seq: &GyroSequence, factor: usize) -> Result<GyroSequence> {
    if factor == 0 {
        return Err(Error::OutOfRange {
            what: "interpolation factor",
            value: 0.0,
        });
    }
    if factor == 1 {
        return Ok(seq.clone());
    }
    let s = seq.samples();
    let mut times = Vec::with_capacity((s.len() - 1) * factor + 1);
    for pair in s.windows(2) {
        for j in 0..factor {
            times.push(pair[0].t + (pair[1].t - pair[0].t) * j as f64 / factor as f64);
        }
    }
    times.push(seq.last_t());
    let omegas = seq.interpolate(&times)?;
    let samples = times
        .into_iter()
        .zip(omegas)
        .map(|(t, omega)| GyroSample { t, omega })
        .collect();
    GyroSequence::new(samples, seq.rate_hz() * factor as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Seconds.
    pub exposure: f64,
    /// Gyro samples per exposure window.
    pub gyro_window: usize,
    pub interp_factor: usize,
    pub m: usize,
    pub s: usize,
    /// `None` disables sensor noise.
    pub noise: Option<NoiseParams>,
    pub iso: f64,
    pub saturation_scale: f64,
    pub fx: f64,
    pub fy: f64,
    /// Principal point; defaults to the image center.
    pub cx: Option<f64>,
    pub cy: Option<f64>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            exposure: 1.0 / 20.0,
            gyro_window: 10,
            interp_factor: 8,
            m: crate::gyro::DEFAULT_M,
            s: crate::gyro::DEFAULT_SCALE,
            noise: Some(NoiseParams::default()),
            iso: 100.0,
            saturation_scale: 1.0,
            fx: 1000.0,
            fy: 1000.0,
            cx: None,
            cy: None,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.interp_factor < 1 {
            return Err(Error::OutOfRange {
                what: "interp_factor",
                value: self.interp_factor as f64,
            });
        }
        if self.gyro_window < 2 {
            return Err(Error::TooFewSamples {
                need: 2,
                got: self.gyro_window,
            });
        }
        if !(self.exposure.is_finite() && self.exposure > 0.0) {
            return Err(Error::NonPositiveExposure(self.exposure));
        }
        Ok(())
    }

    pub fn intrinsics(&self, width: usize, height: usize) -> Result<CameraIntrinsics> {
        CameraIntrinsics::new(
            self.fx,
            self.fy,
            self.cx.unwrap_or((width as f64 - 1.0) / 2.0),
            self.cy.unwrap_or((height as f64 - 1.0) / 2.0),
        )
    }
}

/// One synthesized training triplet. Images are sRGB-encoded.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub blurred: LinearImage,
    pub gt: LinearImage,
    /// Motion field of the cropped frame, from the undensified window.
    pub cmf: CameraMotionField,
    pub crop: Rect,
    pub intrinsics: CameraIntrinsics,
}

/// Dense center-referenced homographies `K R(theta_i) K^-1` for blur synthesis.
pub fn dense_homographies(
    seq: &GyroSequence,
    k: &CameraIntrinsics,
    interp_factor: usize,
    exposure: f64,
) -> Result<Vec<Homography>> {
    let dense = densify_gyro(seq, interp_factor)?;
    let m = dense.len() - 1;
    if m % 2 != 0 {
        return Err(Error::InvalidVectorCount(m));
    }
    let rs = ResampledGyro {
        times: dense.samples().iter().map(|s| s.t).collect(),
        omegas: dense.samples().iter().map(|s| s.omega).collect(),
    };
    let track = integrate_orientations(&rs, exposure)?;
    track
        .thetas
        .iter()
        .map(|t| homography(k, &rotation_matrix(t)))
        .collect()
}

/// Full triplet synthesis: densify, warp, composite, average, saturate,
/// add noise, encode. The GT is the sharp frame under the same crop, with the
/// object (if any) at its mid-exposure position.
pub fn synth_pipeline(
    sharp: &LinearImage,
    seq: &GyroSequence,
    cfg: &SynthConfig,
    object: Option<&MovingObjectSpec>,
    seed: u64,
) -> Result<SynthOutput> {
    cfg.validate()?;
    let k = cfg.intrinsics(sharp.width(), sharp.height())?;
    let hs = dense_homographies(seq, &k, cfg.interp_factor, cfg.exposure)?;
    let Synthesized { image, crop } = synthesize_blur_with(sharp, &hs, object, cfg.s.max(1))?;

    let saturated = apply_saturation(&image, cfg.saturation_scale)?;
    let noisy = match &cfg.noise {
        Some(p) => apply_noise(&saturated, cfg.iso, p, seed)?,
        None => saturated,
    };
    let blurred = linear_to_srgb(&noisy);

    let mut gt = sharp.clone();
    if let Some(obj) = object {
        obj.composite_at(&mut gt, obj.offset_at(0.5));
    }
    let gt = linear_to_srgb(&gt.crop(&crop)?);

    let cropped_k = CameraIntrinsics {
        cx: k.cx - crop.x as f64,
        cy: k.cy - crop.y as f64,
        ..k
    };
    let cmf = build_cmf_with_exposure(seq, &cropped_k, crop.w, crop.h, cfg.m, cfg.s, cfg.exposure)?;
    Ok(SynthOutput {
        blurred,
        gt,
        cmf,
        crop,
        intrinsics: cropped_k,
    })
}
