use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("need at least {need} gyro samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("vector count must be even and >= 2, got {0}")]
    InvalidVectorCount(usize),
    #[error("timestamps must be strictly increasing (sample {index})")]
    NonMonotoneTimestamps { index: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("exposure must be positive, got {0}")]
    NonPositiveExposure(f64),
    #[error("invalid intrinsics: focal lengths must be positive (fx={fx}, fy={fy})")]
    InvalidIntrinsics { fx: f64, fy: f64 },
    #[error("point maps to infinity under homography (w={0:e})")]
    PointAtInfinity(f64),
    #[error("degenerate homography (det={0:e})")]
    DegenerateHomography(f64),
    #[error("{what}: {dim} is not divisible by scale {scale}")]
    NotDivisible { what: &'static str, dim: usize, scale: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{what} out of range: {value}")]
    OutOfRange { what: &'static str, value: f64 },
    #[error("homography list is empty")]
    EmptyHomographies,
    #[error("no pixel is valid in every warped frame")]
    EmptyValidRegion,
    #[error("sprite {sprite_w}x{sprite_h} larger than frame {frame_w}x{frame_h}")]
    SpriteTooLarge { sprite_w: usize, sprite_h: usize, frame_w: usize, frame_h: usize },
    #[error("frame list is empty")]
    NoFrames,
    #[error("kernel size must be odd and > 0, got {0}")]
    InvalidKernelSize(usize),
    #[error("trajectory point ({x:.3}, {y:.3}) falls outside kernel support of size {ksize}")]
    TrajectoryOutsideSupport { x: f64, y: f64, ksize: usize },
    #[error("patch {patch} larger than image {width}x{height}")]
    PatchTooLarge { patch: usize, width: usize, height: usize },
    #[error("kernel spectrum has zeros and regularization is 0")]
    SpectralZero,
    #[error("blend windows leave a coverage gap at ({x}, {y})")]
    CoverageGap { x: usize, y: usize },
    #[error("image {width}x{height} smaller than {window}x{window} window")]
    ImageTooSmall { width: usize, height: usize, window: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("bad file format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stable snake_case identifier for machine-readable reporting.
    pub fn code(&self) -> &'static str {
        match self {
            Error::TooFewSamples { .. } => "too_few_samples",
            Error::InvalidVectorCount(_) => "invalid_vector_count",
            Error::NonMonotoneTimestamps { .. } => "non_monotone_timestamps",
            Error::NonFinite(_) => "non_finite",
            Error::NonPositiveExposure(_) => "non_positive_exposure",
            Error::InvalidIntrinsics { .. } => "invalid_intrinsics",
            Error::PointAtInfinity(_) => "point_at_infinity",
            Error::DegenerateHomography(_) => "degenerate_homography",
            Error::NotDivisible { .. } => "not_divisible",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::OutOfRange { .. } => "out_of_range",
            Error::EmptyHomographies => "empty_homographies",
            Error::EmptyValidRegion => "empty_valid_region",
            Error::SpriteTooLarge { .. } => "sprite_too_large",
            Error::NoFrames => "no_frames",
            Error::InvalidKernelSize(_) => "invalid_kernel_size",
            Error::TrajectoryOutsideSupport { .. } => "trajectory_outside_support",
            Error::PatchTooLarge { .. } => "patch_too_large",
            Error::SpectralZero => "spectral_zero",
            Error::CoverageGap { .. } => "coverage_gap",
            Error::ImageTooSmall { .. } => "image_too_small",
            Error::Shape(_) => "shape",
            Error::Parse { .. } => "parse",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }
}
