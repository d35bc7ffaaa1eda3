//! Gyro sequences to camera motion fields.
//!
//! A gyro window covering one exposure is resampled to `M+1` angular
//! velocities, integrated into orientations referenced to the temporal center,
//! turned into rotation-induced homographies `K R K^-1`, and finally into a
//! grid of per-cell displacement chains.

use nalgebra::{Matrix3, Point2, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::spline::NaturalCubicSpline;

/// Default number of motion vectors per cell.
pub const DEFAULT_M: usize = 8;
/// Default grid downscale factor.
pub const DEFAULT_SCALE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GyroSample {
    /// Seconds.
    pub t: f64,
    /// Angular velocity in rad/s.
    pub omega: Vector3<f64>,
}

impl GyroSample {
    pub fn new(t: f64, wx: f64, wy: f64, wz: f64) -> Self {
        Self {
            t,
            omega: Vector3::new(wx, wy, wz),
        }
    }
}

/// Timestamped angular velocities covering one exposure window.
#[derive(Debug, Clone, PartialEq)]
pub struct GyroSequence {
    samples: Vec<GyroSample>,
    rate_hz: f64,
}

impl GyroSequence {
    pub fn new(samples: Vec<GyroSample>, rate_hz: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::TooFewSamples {
                need: 2,
                got: samples.len(),
            });
        }
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::OutOfRange {
                what: "sampling rate",
                value: rate_hz,
            });
        }
        for (i, s) in samples.iter().enumerate() {
            if !s.t.is_finite() || !s.omega.iter().all(|w| w.is_finite()) {
                return Err(Error::NonFinite("gyro sample"));
            }
            if i > 0 && !(s.t > samples[i - 1].t) {
                return Err(Error::NonMonotoneTimestamps { index: i });
            }
        }
        Ok(Self { samples, rate_hz })
    }

    /// Builds a sequence whose nominal rate is the inverse of the median sample spacing.
    pub fn with_inferred_rate(samples: Vec<GyroSample>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::TooFewSamples {
                need: 2,
                got: samples.len(),
            });
        }
        let mut dts: Vec<f64> = samples.windows(2).map(|w| w[1].t - w[0].t).collect();
        dts.sort_by(f64::total_cmp);
        let median = dts[dts.len() / 2];
        Self::new(samples, 1.0 / median)
    }

    /// `n` samples of constant angular velocity at `rate_hz`, starting at t = 0.
    pub fn constant(omega: Vector3<f64>, n: usize, rate_hz: f64) -> Result<Self> {
        let samples = (0..n)
            .map(|i| GyroSample {
                t: i as f64 / rate_hz,
                omega,
            })
            .collect();
        Self::new(samples, rate_hz)
    }

    pub fn samples(&self) -> &[GyroSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    /// Exposure represented by the window: one sample period per sample.
    pub fn exposure(&self) -> f64 {
        self.samples.len() as f64 / self.rate_hz
    }

    /// Contiguous sub-window `[start, start + len)`.
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.samples.len() {
            return Err(Error::TooFewSamples {
                need: start + len,
                got: self.samples.len(),
            });
        }
        Self::new(self.samples[start..start + len].to_vec(), self.rate_hz)
    }

    pub fn first_t(&self) -> f64 {
        self.samples[0].t
    }

    pub fn last_t(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    /// Per-axis natural cubic spline evaluated at `times`.
    pub fn interpolate(&self, times: &[f64]) -> Result<Vec<Vector3<f64>>> {
        let ts: Vec<f64> = self.samples.iter().map(|s| s.t).collect();
        let splines = (0..3)
            .map(|axis| {
                let ys: Vec<f64> = self.samples.iter().map(|s| s.omega[axis]).collect();
                NaturalCubicSpline::new(&ts, &ys)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(times
            .iter()
            .map(|&t| Vector3::new(splines[0].eval(t), splines[1].eval(t), splines[2].eval(t)))
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        let k = Self { fx, fy, cx, cy };
        k.validate()?;
        Ok(k)
    }

    /// Square pixels with the principal point at the image center.
    pub fn centered(focal: f64, width: usize, height: usize) -> Result<Self> {
        Self::new(
            focal,
            focal,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("intrinsics"));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidIntrinsics {
                fx: self.fx,
                fy: self.fy,
            });
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }
}

/// `M+1` angular velocities at uniform times spanning the window.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampledGyro {
    pub times: Vec<f64>,
    pub omegas: Vec<Vector3<f64>>,
}

impl ResampledGyro {
    /// The number of intervals, `M`.
    pub fn m(&self) -> usize {
        self.omegas.len() - 1
    }
}

fn check_m(m: usize) -> Result<()> {
    if m < 2 || m % 2 != 0 {
        return Err(Error::InvalidVectorCount(m));
    }
    Ok(())
}

fn uniform_times(t0: f64, t1: f64, intervals: usize) -> Vec<f64> {
    (0..=intervals)
        .map(|i| {
            if i == intervals {
                t1
            } else {
                t0 + (t1 - t0) * i as f64 / intervals as f64
            }
        })
        .collect()
}

/// Resamples the angular velocities to `m + 1` uniform instants from the
/// first to the last timestamp, inclusive.
pub fn resample_gyro(seq: &GyroSequence, m: usize) -> Result<ResampledGyro> {
    check_m(m)?;
    let times = uniform_times(seq.first_t(), seq.last_t(), m);
    let omegas = seq.interpolate(&times)?;
    Ok(ResampledGyro { times, omegas })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrientationTrack {
    /// Rotation vectors relative to the center orientation; `thetas[M/2]` is zero.
    pub thetas: Vec<Vector3<f64>>,
    pub exposure: f64,
}

impl OrientationTrack {
    pub fn m(&self) -> usize {
        self.thetas.len() - 1
    }

    pub fn rotations(&self) -> Vec<Matrix3<f64>> {
        self.thetas.iter().map(rotation_matrix).collect()
    }
}

/// Trapezoidal integration of the resampled angular velocities over
/// `exposure`, re-referenced so the center orientation is the identity.
pub fn integrate_orientations(rs: &ResampledGyro, exposure: f64) -> Result<OrientationTrack> {
    if !(exposure.is_finite() && exposure > 0.0) {
        return Err(Error::NonPositiveExposure(exposure));
    }
    let m = rs.m();
    if m == 0 {
        return Err(Error::TooFewSamples { need: 2, got: 1 });
    }
    let dt = exposure / m as f64;

    let mut absolute = Vec::with_capacity(m + 1);
    absolute.push(Matrix3::identity());
    for i in 0..m {
        let step = (rs.omegas[i] + rs.omegas[i + 1]) * (0.5 * dt);
        let next = rotation_matrix(&step) * absolute[i];
        absolute.push(next);
    }

    let center = m / 2;
    let center_inv = absolute[center].transpose();
    let thetas = absolute
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if i == center {
                Vector3::zeros()
            } else {
                rotation_vector(&(r * center_inv))
            }
        })
        .collect();
    Ok(OrientationTrack { thetas, exposure })
}

/// Exponential map from a rotation vector to a rotation matrix (Rodrigues).
pub fn rotation_matrix(theta: &Vector3<f64>) -> Matrix3<f64> {
    let angle = theta.norm();
    let k = theta.cross_matrix();
    if angle < 1e-12 {
        return Matrix3::identity() + k + k * k * 0.5;
    }
    let a = angle.sin() / angle;
    let b = (1.0 - angle.cos()) / (angle * angle);
    Matrix3::identity() + k * a + k * k * b
}

/// Logarithm map of a rotation matrix; the inverse of [`rotation_matrix`].
pub fn rotation_vector(r: &Matrix3<f64>) -> Vector3<f64> {
    UnitQuaternion::from_matrix(r).scaled_axis()
}

/// Projective transform, normalized so the bottom-right entry is 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self(Matrix3::new(1.0, 0.0, tx, 0.0, 1.0, ty, 0.0, 0.0, 1.0))
    }

    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("homography"));
        }
        let h22 = m[(2, 2)];
        if h22.abs() < 1e-12 {
            return Err(Error::DegenerateHomography(m.determinant()));
        }
        let h = m / h22;
        let det = h.determinant();
        if det.abs() < 1e-12 {
            return Err(Error::DegenerateHomography(det));
        }
        Ok(Self(h))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .0
            .try_inverse()
            .ok_or(Error::DegenerateHomography(self.0.determinant()))?;
        Self::from_matrix(inv)
    }
}

/// `K R K^-1` for a pure camera rotation.
pub fn homography(k: &CameraIntrinsics, r: &Matrix3<f64>) -> Result<Homography> {
    k.validate()?;
    Homography::from_matrix(k.matrix() * r * k.inverse_matrix())
}

pub fn warp_point(h: &Homography, p: Point2<f64>) -> Result<Point2<f64>> {
    let m = h.matrix();
    let w = m[(2, 0)] * p.x + m[(2, 1)] * p.y + m[(2, 2)];
    if w.abs() < 1e-12 {
        return Err(Error::PointAtInfinity(w));
    }
    let x = (m[(0, 0)] * p.x + m[(0, 1)] * p.y + m[(0, 2)]) / w;
    let y = (m[(1, 0)] * p.x + m[(1, 1)] * p.y + m[(1, 2)]) / w;
    Ok(Point2::new(x, y))
}

/// Homographies `H_0..H_M` for a window integrated over `exposure`.
pub fn homography_chain(
    seq: &GyroSequence,
    k: &CameraIntrinsics,
    m: usize,
    exposure: f64,
) -> Result<Vec<Homography>> {
    let rs = resample_gyro(seq, m)?;
    let track = integrate_orientations(&rs, exposure)?;
    track
        .thetas
        .iter()
        .map(|theta| homography(k, &rotation_matrix(theta)))
        .collect()
}

/// Grid of `M` displacement vectors per cell, `(row, col, channel)` layout with
/// channels `dx0, dy0, dx1, dy1, ...` in full-resolution pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraMotionField {
    pub width_g: usize,
    pub height_g: usize,
    pub m: usize,
    pub s: usize,
    pub source_w: usize,
    pub source_h: usize,
    pub data: Vec<f64>,
}

impl CameraMotionField {
    pub fn zeros(source_w: usize, source_h: usize, m: usize, s: usize) -> Result<Self> {
        check_dims(source_w, source_h, s)?;
        let (width_g, height_g) = (source_w / s, source_h / s);
        Ok(Self {
            width_g,
            height_g,
            m,
            s,
            source_w,
            source_h,
            data: vec![0.0; width_g * height_g * 2 * m],
        })
    }

    pub fn channels(&self) -> usize {
        2 * self.m
    }

    /// Full-resolution point sampled by grid cell `(gx, gy)`.
    pub fn cell_center(&self, gx: usize, gy: usize) -> Point2<f64> {
        cell_center(gx, gy, self.s)
    }

    pub fn cell(&self, gx: usize, gy: usize) -> &[f64] {
        let c = self.channels();
        let off = (gy * self.width_g + gx) * c;
        &self.data[off..off + c]
    }

    /// Displacement vector `k` at a cell.
    pub fn vector(&self, gx: usize, gy: usize, k: usize) -> (f64, f64) {
        let cell = self.cell(gx, gy);
        (cell[2 * k], cell[2 * k + 1])
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width_g == other.width_g
            && self.height_g == other.height_g
            && self.m == other.m
            && self.s == other.s
            && self.source_w == other.source_w
            && self.source_h == other.source_h
    }
}

fn cell_center(gx: usize, gy: usize, s: usize) -> Point2<f64> {
    let s = s as f64;
    Point2::new((gx as f64 + 0.5) * s - 0.5, (gy as f64 + 0.5) * s - 0.5)
}

fn check_dims(w: usize, h: usize, s: usize) -> Result<()> {
    if s == 0 {
        return Err(Error::OutOfRange {
            what: "scale",
            value: 0.0,
        });
    }
    if w == 0 || w % s != 0 {
        return Err(Error::NotDivisible {
            what: "width",
            dim: w,
            scale: s,
        });
    }
    if h == 0 || h % s != 0 {
        return Err(Error::NotDivisible {
            what: "height",
            dim: h,
            scale: s,
        });
    }
    Ok(())
}

/// Camera motion field from an explicit homography chain `H_0..H_M`.
pub fn cmf_from_homographies(
    hs: &[Homography],
    w: usize,
    h: usize,
    s: usize,
) -> Result<CameraMotionField> {
    if hs.len() < 2 {
        return Err(Error::EmptyHomographies);
    }
    let m = hs.len() - 1;
    let mut field = CameraMotionField::zeros(w, h, m, s)?;
    let c = field.channels();
    let mut warped = vec![Point2::origin(); m + 1];
    for gy in 0..field.height_g {
        for gx in 0..field.width_g {
            let p = cell_center(gx, gy, s);
            for (q, hm) in warped.iter_mut().zip(hs) {
                *q = warp_point(hm, p)?;
            }
            let off = (gy * field.width_g + gx) * c;
            let cell = &mut field.data[off..off + c];
            for k in 0..m {
                cell[2 * k] = warped[k + 1].x - warped[k].x;
                cell[2 * k + 1] = warped[k + 1].y - warped[k].y;
            }
        }
    }
    if !field.data.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("camera motion field"));
    }
    Ok(field)
}

/// Camera motion field with the exposure taken from the window itself.
pub fn build_cmf(
    seq: &GyroSequence,
    k: &CameraIntrinsics,
    w: usize,
    h: usize,
    m: usize,
    s: usize,
) -> Result<CameraMotionField> {
    build_cmf_with_exposure(seq, k, w, h, m, s, seq.exposure())
}

pub fn build_cmf_with_exposure(
    seq: &GyroSequence,
    k: &CameraIntrinsics,
    w: usize,
    h: usize,
    m: usize,
    s: usize,
    exposure: f64,
) -> Result<CameraMotionField> {
    check_dims(w, h, s)?;
    let hs = homography_chain(seq, k, m, exposure)?;
    cmf_from_homographies(&hs, w, h, s)
}
