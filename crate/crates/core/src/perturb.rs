//! Simulated gyro errors and curriculum blending of clean and noisy motion fields.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gyro::{
    build_cmf_with_exposure, CameraIntrinsics, CameraMotionField, GyroSample, GyroSequence,
};
use crate::rng::rng_from_seed;

/// Gaussian noise of one gyro axis, in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisNoise {
    pub mean: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GyroNoiseModel {
    pub x: AxisNoise,
    pub y: AxisNoise,
    pub z: AxisNoise,
}

impl GyroNoiseModel {
    pub fn zero() -> Self {
        let a = AxisNoise {
            mean: 0.0,
            sigma: 0.0,
        };
        Self { x: a, y: a, z: a }
    }

    pub fn axes(&self) -> [AxisNoise; 3] {
        [self.x, self.y, self.z]
    }

    pub fn validate(&self) -> Result<()> {
        for a in self.axes() {
            if !(a.mean.is_finite() && a.sigma.is_finite()) {
                return Err(Error::NonFinite("noise model"));
            }
            if a.sigma < 0.0 {
                return Err(Error::OutOfRange {
                    what: "noise sigma",
                    value: a.sigma,
                });
            }
        }
        Ok(())
    }
}

impl Default for GyroNoiseModel {
    fn default() -> Self {
        default_noise_model()
    }
}

/// Noise measured on a stationary Galaxy S22.
pub fn default_noise_model() -> GyroNoiseModel {
    GyroNoiseModel {
        x: AxisNoise {
            mean: -0.000_056_431_53,
            sigma: 0.000_863_160_7,
        },
        y: AxisNoise {
            mean: -0.000_063_690_04,
            sigma: 0.001_502_394_7,
        },
        z: AxisNoise {
            mean: 0.000_213_795_17,
            sigma: 0.000_765_564_3,
        },
    }
}

/// Rotation-center shifts are drawn uniformly from `[-max_abs, max_abs]` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterShiftRange {
    pub max_abs: f64,
}

impl CenterShiftRange {
    pub const DEFAULT_MAX_ABS: f64 = 500.0;

    pub fn new(max_abs: f64) -> Result<Self> {
        if !(max_abs.is_finite() && max_abs >= 0.0) {
            return Err(Error::OutOfRange {
                what: "center shift range",
                value: max_abs,
            });
        }
        Ok(Self { max_abs })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        if self.max_abs == 0.0 {
            return (0.0, 0.0);
        }
        let dx = rng.random_range(-self.max_abs..=self.max_abs);
        let dy = rng.random_range(-self.max_abs..=self.max_abs);
        (dx, dy)
    }
}

impl Default for CenterShiftRange {
    fn default() -> Self {
        Self {
            max_abs: Self::DEFAULT_MAX_ABS,
        }
    }
}

/// Adds independent per-sample, per-axis Gaussian noise. Timestamps are kept.
pub fn inject_gyro_noise(
    seq: &GyroSequence,
    model: &GyroNoiseModel,
    seed: u64,
) -> Result<GyroSequence> {
    model.validate()?;
    let mut rng = rng_from_seed(seed);
    let dists = model
        .axes()
        .map(|a| Normal::new(a.mean, a.sigma).expect("validated sigma"));
    let samples = seq
        .samples()
        .iter()
        .map(|s| {
            let mut out = *s;
            for (axis, d) in dists.iter().enumerate() {
                out.omega[axis] += d.sample(&mut rng);
            }
            out
        })
        .collect::<Vec<GyroSample>>();
    GyroSequence::new(samples, seq.rate_hz())
}

/// Moves the principal point, which is the pivot of the rotation homographies.
pub fn shift_rotation_center(k: &CameraIntrinsics, delta: (f64, f64)) -> CameraIntrinsics {
    CameraIntrinsics {
        cx: k.cx + delta.0,
        cy: k.cy + delta.1,
        ..*k
    }
}

/// `(1 - alpha) * clean + alpha * noisy`, elementwise.
pub fn blend_cmf(
    clean: &CameraMotionField,
    noisy: &CameraMotionField,
    alpha: f64,
) -> Result<CameraMotionField> {
    if !clean.same_shape(noisy) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            clean.width_g,
            clean.height_g,
            clean.channels(),
            noisy.width_g,
            noisy.height_g,
            noisy.channels()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::OutOfRange {
            what: "alpha",
            value: alpha,
        });
    }
    let mut out = clean.clone();
    if alpha == 0.0 {
        return Ok(out);
    }
    if alpha == 1.0 {
        out.data.copy_from_slice(&noisy.data);
        return Ok(out);
    }
    for (o, (c, n)) in out.data.iter_mut().zip(clean.data.iter().zip(&noisy.data)) {
        *o = (1.0 - alpha) * c + alpha * n;
    }
    Ok(out)
}

/// Staircase schedule for the blending weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurriculumSchedule {
    pub step: f64,
    pub stage_len: u32,
    pub saturate_epoch: u32,
}

impl Default for CurriculumSchedule {
    fn default() -> Self {
        Self {
            step: 0.1,
            stage_len: 10,
            saturate_epoch: 100,
        }
    }
}

/// `step * floor(ep / stage_len)` before `saturate_epoch`, 1 from then on.
pub fn curriculum_alpha(sched: &CurriculumSchedule, ep: u32) -> f64 {
    if ep >= sched.saturate_epoch {
        return 1.0;
    }
    let stage = ep / sched.stage_len.max(1);
    (sched.step * f64::from(stage)).min(1.0)
}

/// Noisy camera motion field: one center shift per field, then per-sample gyro noise.
///
/// The shift is drawn first from the seeded stream; the noise stream is
/// seeded with the next `u64` of that stream.
#[allow(clippy::too_many_arguments)]
pub fn make_noisy_cmf(
    seq: &GyroSequence,
    k: &CameraIntrinsics,
    dims: (usize, usize),
    m: usize,
    s: usize,
    exposure: f64,
    model: &GyroNoiseModel,
    range: &CenterShiftRange,
    seed: u64,
) -> Result<CameraMotionField> {
    let mut rng = rng_from_seed(seed);
    let delta = range.sample(&mut rng);
    let noise_seed: u64 = rng.random();
    let noisy = inject_gyro_noise(seq, model, noise_seed)?;
    let shifted = shift_rotation_center(k, delta);
    build_cmf_with_exposure(&noisy, &shifted, dims.0, dims.1, m, s, exposure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gyro::{build_cmf, homography_chain, warp_point};
    use nalgebra::{Point2, Vector3};

    fn wobbly(n: usize) -> GyroSequence {
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 / 200.0;
                GyroSample::new(t, 0.1 * (30.0 * t).sin(), -0.05, 0.2 * t)
            })
            .collect();
        GyroSequence::new(samples, 200.0).unwrap()
    }

    #[test]
    fn default_model_values() {
        let m = default_noise_model();
        assert_eq!(m.x.mean, -0.00005643153);
        assert_eq!(m.x.sigma, 0.0008631607);
        assert_eq!(m.y.mean, -0.00006369004);
        assert_eq!(m.y.sigma, 0.0015023947);
        assert_eq!(m.z.mean, 0.00021379517);
        assert_eq!(m.z.sigma, 0.0007655643);
    }

    #[test]
    fn zero_model_is_identity_and_seed_is_deterministic() {
        let seq = wobbly(10);
        assert_eq!(inject_gyro_noise(&seq, &GyroNoiseModel::zero(), 7).unwrap(), seq);
        let a = inject_gyro_noise(&seq, &default_noise_model(), 7).unwrap();
        let b = inject_gyro_noise(&seq, &default_noise_model(), 7).unwrap();
        let c = inject_gyro_noise(&seq, &default_noise_model(), 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for (x, y) in a.samples().iter().zip(seq.samples()) {
            assert_eq!(x.t, y.t);
        }
    }

    #[test]
    fn negative_sigma_rejected() {
        let mut m = GyroNoiseModel::zero();
        m.y.sigma = -1.0;
        assert!(inject_gyro_noise(&wobbly(4), &m, 0).is_err());
    }

    #[test]
    fn shift_composes_additively() {
        let k = CameraIntrinsics::new(900.0, 910.0, 300.0, 200.0).unwrap();
        assert_eq!(shift_rotation_center(&k, (0.0, 0.0)), k);
        let s = shift_rotation_center(&k, (500.0, 500.0));
        assert_eq!((s.cx, s.cy), (800.0, 700.0));
        let a = shift_rotation_center(&shift_rotation_center(&k, (12.5, -3.0)), (-2.5, 7.0));
        let b = shift_rotation_center(&k, (10.0, 4.0));
        assert_eq!(a, b);
    }

    #[test]
    fn shifted_pivot_is_stationary() {
        let seq = GyroSequence::constant(Vector3::new(0.0, 0.0, 0.4), 10, 200.0).unwrap();
        let k = CameraIntrinsics::new(1000.0, 1000.0, 31.5, 31.5).unwrap();
        let shifted = shift_rotation_center(&k, (16.0, -8.0));
        let hs = homography_chain(&seq, &shifted, 8, seq.exposure()).unwrap();
        let pivot = Point2::new(47.5, 23.5);
        let orig = Point2::new(31.5, 31.5);
        let moved = |p| (warp_point(&hs[8], p).unwrap() - warp_point(&hs[0], p).unwrap()).norm();
        assert!(moved(pivot) < 1e-9);
        assert!(moved(orig) > 0.1);
    }

    #[test]
    fn blend_endpoints_and_midpoint() {
        let k = CameraIntrinsics::centered(500.0, 64, 32).unwrap();
        let clean = build_cmf(&wobbly(10), &k, 64, 32, 8, 2).unwrap();
        let noisy = make_noisy_cmf(
            &wobbly(10),
            &k,
            (64, 32),
            8,
            2,
            0.05,
            &default_noise_model(),
            &CenterShiftRange::default(),
            3,
        )
        .unwrap();
        assert_eq!(blend_cmf(&clean, &noisy, 0.0).unwrap(), clean);
        assert_eq!(blend_cmf(&clean, &noisy, 1.0).unwrap(), noisy);
        let mid = blend_cmf(&clean, &noisy, 0.5).unwrap();
        for ((m, c), n) in mid.data.iter().zip(&clean.data).zip(&noisy.data) {
            assert!((m - (c + n) / 2.0).abs() < 1e-12);
        }
        assert!(blend_cmf(&clean, &noisy, 1.5).is_err());
        let other = build_cmf(&wobbly(10), &k, 64, 32, 4, 2).unwrap();
        assert!(matches!(
            blend_cmf(&clean, &other, 0.5),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn curriculum_values() {
        let s = CurriculumSchedule::default();
        assert_eq!(curriculum_alpha(&s, 0), 0.0);
        assert_eq!(curriculum_alpha(&s, 35), 0.1 * 3.0);
        assert!((curriculum_alpha(&s, 35) - 0.3).abs() < 1e-15);
        assert_eq!(curriculum_alpha(&s, 99), 0.1 * 9.0);
        assert_eq!(curriculum_alpha(&s, 100), 1.0);
        assert_eq!(curriculum_alpha(&s, 250), 1.0);
    }

    #[test]
    fn noisy_cmf_reduces_to_clean() {
        let k = CameraIntrinsics::centered(500.0, 64, 32).unwrap();
        let seq = wobbly(10);
        let clean = build_cmf(&seq, &k, 64, 32, 8, 2).unwrap();
        let noisy = make_noisy_cmf(
            &seq,
            &k,
            (64, 32),
            8,
            2,
            seq.exposure(),
            &GyroNoiseModel::zero(),
            &CenterShiftRange::new(0.0).unwrap(),
            99,
        )
        .unwrap();
        assert_eq!(clean, noisy);
    }
}
