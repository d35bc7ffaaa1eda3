use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gyroblur_core::gyro::{DEFAULT_M, DEFAULT_SCALE};
use gyroblur_core::kernels::{DEFAULT_OVERLAP, DEFAULT_PATCH};

#[derive(Parser, Debug)]
#[command(name = "gyroblur", version, about = "Gyro-guided deblurring data tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Camera motion fields
    #[command(subcommand)]
    Cmf(CmfCommand),
    /// Gyro error simulation
    #[command(subcommand)]
    Error(ErrorCommand),
    /// Synthetic training data
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Patch-wise blur kernels
    #[command(subcommand)]
    Kernels(KernelsCommand),
    /// Non-blind deconvolution
    #[command(subcommand)]
    Deconv(DeconvCommand),
    /// Image quality metrics
    #[command(subcommand)]
    Metrics(MetricsCommand),
}

#[derive(Subcommand, Debug)]
pub enum CmfCommand {
    Build(CmfBuild),
    /// Print the header and displacement statistics of a CMF file
    Inspect {
        file: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct Camera {
    /// Gyro CSV with header `t,wx,wy,wz`
    #[arg(long)]
    pub gyro: PathBuf,
    /// Key-value file with fx, fy, cx, cy
    #[arg(long)]
    pub intrinsics: PathBuf,
    #[arg(long)]
    pub width: usize,
    #[arg(long)]
    pub height: usize,
}

#[derive(Args, Debug)]
pub struct CmfBuild {
    #[command(flatten)]
    pub camera: Camera,
    #[arg(long, default_value_t = DEFAULT_M)]
    pub m: usize,
    #[arg(long, default_value_t = DEFAULT_SCALE)]
    pub scale: usize,
    /// Exposure in seconds; defaults to samples / rate of the gyro file
    #[arg(long)]
    pub exposure: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the field of a perturbed gyro instead of the clean one
    #[arg(long)]
    pub noisy: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Max absolute rotation-center shift in pixels
    #[arg(long)]
    pub center_shift: Option<f64>,
    /// Key-value error model (mean_x, sigma_x, ..., max_center_shift)
    #[arg(long)]
    pub noise_model: Option<PathBuf>,
    /// Blend weight of the noisy field; implies --noisy
    #[arg(long, conflicts_with = "epoch")]
    pub alpha: Option<f64>,
    /// Take the blend weight from the curriculum schedule; implies --noisy
    #[arg(long)]
    pub epoch: Option<u32>,
}

#[derive(Subcommand, Debug)]
pub enum ErrorCommand {
    /// Add simulated sensor noise to a gyro CSV
    Inject {
        #[arg(long)]
        gyro: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        noise_model: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum DatasetCommand {
    Synth(DatasetSynth),
}

#[derive(Args, Debug)]
pub struct DatasetSynth {
    /// Directory of sharp PNG frames
    #[arg(long)]
    pub sharp_dir: PathBuf,
    #[arg(long)]
    pub gyro: PathBuf,
    /// Synthesis config (TOML); defaults apply when omitted
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Worker threads; 0 uses all cores
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Fixed ISO; sampled log-uniformly in [100, 1600] per item when omitted
    #[arg(long)]
    pub iso: Option<f64>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub scale: Option<usize>,
    /// Probability that an item gets a moving object
    #[arg(long, default_value_t = 0.0)]
    pub object_prob: f64,
    /// Disable sensor noise
    #[arg(long)]
    pub no_noise: bool,
}

#[derive(Subcommand, Debug)]
pub enum KernelsCommand {
    Render(KernelsRender),
}

#[derive(Args, Debug)]
pub struct KernelsRender {
    #[command(flatten)]
    pub camera: Camera,
    #[arg(long, default_value_t = DEFAULT_PATCH)]
    pub patch: usize,
    #[arg(long, default_value_t = DEFAULT_OVERLAP)]
    pub overlap: f64,
    /// Odd kernel support in pixels
    #[arg(long, default_value_t = DEFAULT_PATCH + 1)]
    pub ksize: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum DeconvCommand {
    Run(DeconvRun),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Wiener,
    Rl,
}

#[derive(Args, Debug)]
pub struct DeconvRun {
    /// Blurred PNG
    #[arg(long)]
    pub input: PathBuf,
    /// `KRN1` kernel grid matching the patch layout of the input
    #[arg(long)]
    pub kernels: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Wiener)]
    pub method: Method,
    #[arg(long, default_value_t = 0.001)]
    pub lambda: f64,
    #[arg(long, default_value_t = 30)]
    pub iters: usize,
    #[arg(long, default_value_t = DEFAULT_PATCH)]
    pub patch: usize,
    #[arg(long, default_value_t = DEFAULT_OVERLAP)]
    pub overlap: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum MetricsCommand {
    /// PSNR/SSIM of every PNG in --pred against the same name in --gt
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Per-image CSV; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        /// Aggregate CSV; appended to the per-image output when omitted
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}
