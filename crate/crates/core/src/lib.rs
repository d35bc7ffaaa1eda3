//! Gyro-guided motion deblurring toolkit: camera motion fields from gyro
//! data, gyro error simulation, blur synthesis, patch-wise kernels and
//! non-blind deconvolution, reference network blocks, and image metrics.

pub mod blursynth;
pub mod deconv;
pub mod error;
pub mod formats;
pub mod gyro;
pub mod image;
pub mod kernels;
pub mod metrics;
pub mod netblocks;
pub mod perturb;
pub mod rng;
pub mod spline;

pub use error::{Error, Result};
pub use gyro::{
    build_cmf, CameraIntrinsics, CameraMotionField, GyroSample, GyroSequence, Homography,
};
pub use image::{LinearImage, Rect};
pub use kernels::{BlurKernel, KernelGrid, PatchLayout};
pub use nalgebra::{Matrix3, Point2, Vector3};
pub use perturb::{CenterShiftRange, CurriculumSchedule, GyroNoiseModel};
