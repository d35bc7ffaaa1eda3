use gyroblur_core::deconv::{convolve_reflect, deconv_spatially_varying, DeconvMethod};
use gyroblur_core::kernels::patch_layout;
use gyroblur_core::metrics::psnr;
use gyroblur_core::{BlurKernel, KernelGrid, LinearImage};

fn scene(w: usize, h: usize) -> LinearImage {
    LinearImage::from_fn(w, h, |x, y| {
        let (x, y) = (x as f64, y as f64);
        let bars = if ((x + 0.5 * y) / 19.0).floor() as i64 % 2 == 0 { 0.12 } else { 0.0 };
        [
            0.45 + 0.2 * (0.09 * x + 0.05 * y).sin() + bars,
            0.5 + 0.2 * (0.07 * x).cos() * (0.11 * y).sin(),
            0.35 + bars + 0.15 * (0.03 * (2.0 * x - y)).sin(),
        ]
    })
}

/// Diagonal 6-px translation, one tap per step along the path.
fn diagonal_kernel() -> BlurKernel {
    let size = 15;
    let mut w = vec![0.0; size * size];
    for i in 0..7 {
        let (x, y) = (7 + i, 7 + i / 2);
        w[y * size + x] = 1.0 / 7.0;
    }
    BlurKernel::new(size, w).unwrap()
}

#[test]
fn uniform_translation_gain_on_hd_frame() {
    let (w, h) = (1280, 720);
    let sharp = scene(w, h);
    let k = diagonal_kernel();
    let blurred = convolve_reflect(&sharp, &k);
    let layout = patch_layout(w, h, 160, 0.5).unwrap();
    let grid = KernelGrid::uniform(layout.rows(), layout.cols(), k);
    let out = deconv_spatially_varying(&blurred, &grid, &layout, DeconvMethod::Wiener { lambda: 1e-4 }).unwrap();
    let before = psnr(&blurred, &sharp, 1.0).unwrap();
    let after = psnr(&out, &sharp, 1.0).unwrap();
    assert!(after - before >= 8.0, "{before:.2} -> {after:.2}");
}

#[test]
fn rl_improves_translation_blur() {
    let sharp = scene(320, 160);
    let k = diagonal_kernel();
    let blurred = convolve_reflect(&sharp, &k);
    let layout = patch_layout(320, 160, 160, 0.5).unwrap();
    let grid = KernelGrid::uniform(layout.rows(), layout.cols(), k);
    let out = deconv_spatially_varying(&blurred, &grid, &layout, DeconvMethod::RichardsonLucy { iters: 30 }).unwrap();
    assert!(psnr(&out, &sharp, 1.0).unwrap() > psnr(&blurred, &sharp, 1.0).unwrap() + 3.0);
}
