use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use gyroblur_core::blursynth::{linear_to_srgb, srgb_to_linear};
use gyroblur_core::deconv::{deconv_spatially_varying, DeconvMethod};
use gyroblur_core::formats;
use gyroblur_core::kernels::{patch_layout, render_all};
use gyroblur_core::metrics::{psnr, ssim};
use gyroblur_core::perturb::{
    blend_cmf, curriculum_alpha, inject_gyro_noise, make_noisy_cmf, CenterShiftRange, CurriculumSchedule,
    GyroNoiseModel,
};
use gyroblur_core::gyro::build_cmf_with_exposure;
use serde_json::json;

use crate::args::{Camera, CmfBuild, DeconvRun, KernelsRender, Method};
use crate::png;

fn error_model(path: Option<&Path>, center_shift: Option<f64>) -> Result<(GyroNoiseModel, CenterShiftRange)> {
    let (model, mut range) = match path {
        Some(p) => formats::read_error_model(p).with_context(|| format!("reading {}", p.display()))?,
        None => (GyroNoiseModel::default(), CenterShiftRange::default()),
    };
    if let Some(px) = center_shift {
        range = CenterShiftRange::new(px)?;
    }
    Ok((model, range))
}

fn load_camera(c: &Camera) -> Result<(gyroblur_core::GyroSequence, gyroblur_core::CameraIntrinsics)> {
    let seq = formats::read_gyro_csv(&c.gyro).with_context(|| format!("reading {}", c.gyro.display()))?;
    let k = formats::read_intrinsics(&c.intrinsics).with_context(|| format!("reading {}", c.intrinsics.display()))?;
    Ok((seq, k))
}

pub fn cmf_build(a: &CmfBuild) -> Result<()> {
    let (seq, k) = load_camera(&a.camera)?;
    let (w, h) = (a.camera.width, a.camera.height);
    let exposure = a.exposure.unwrap_or_else(|| seq.exposure());
    let alpha = match (a.alpha, a.epoch) {
        (Some(x), _) => Some(x),
        (None, Some(ep)) => Some(curriculum_alpha(&CurriculumSchedule::default(), ep)),
        (None, None) => None,
    };
    let noisy = a.noisy || alpha.is_some();
    let field = if noisy {
        let (model, range) = error_model(a.noise_model.as_deref(), a.center_shift)?;
        let n = make_noisy_cmf(&seq, &k, (w, h), a.m, a.scale, exposure, &model, &range, a.seed)?;
        match alpha {
            Some(alpha) => {
                let clean = build_cmf_with_exposure(&seq, &k, w, h, a.m, a.scale, exposure)?;
                blend_cmf(&clean, &n, alpha)?
            }
            None => n,
        }
    } else {
        build_cmf_with_exposure(&seq, &k, w, h, a.m, a.scale, exposure)?
    };
    formats::write_cmf(&a.out, &field)?;
    Ok(())
}

pub fn cmf_inspect(path: &Path) -> Result<()> {
    let f = formats::read_cmf(path)?;
    let mags: Vec<f64> = f.data.chunks_exact(2).map(|v| v[0].hypot(v[1])).collect();
    let max = mags.iter().copied().fold(0.0, f64::max);
    let mean = if mags.is_empty() { 0.0 } else { mags.iter().sum::<f64>() / mags.len() as f64 };
    let info = json!({
        "width_g": f.width_g,
        "height_g": f.height_g,
        "m": f.m,
        "s": f.s,
        "width": f.source_w,
        "height": f.source_h,
        "max_displacement": max,
        "mean_displacement": mean,
    });
    println!("{info}");
    Ok(())
}

pub fn error_inject(gyro: &Path, out: &Path, seed: u64, noise_model: Option<&Path>) -> Result<()> {
    let seq = formats::read_gyro_csv(gyro).with_context(|| format!("reading {}", gyro.display()))?;
    let (model, _) = error_model(noise_model, None)?;
    let noisy = inject_gyro_noise(&seq, &model, seed)?;
    formats::write_gyro_csv(out, &noisy)?;
    Ok(())
}

pub fn kernels_render(a: &KernelsRender) -> Result<()> {
    let (seq, k) = load_camera(&a.camera)?;
    let layout = patch_layout(a.camera.width, a.camera.height, a.patch, a.overlap)?;
    let grid = render_all(&seq, &k, &layout, a.ksize)?;
    formats::write_kernels(&a.out, &grid)?;
    Ok(())
}

pub fn deconv_run(a: &DeconvRun) -> Result<()> {
    let blurred = srgb_to_linear(&png::read(&a.input)?);
    let grid = formats::read_kernels(&a.kernels)?;
    let layout = patch_layout(blurred.width(), blurred.height(), a.patch, a.overlap)?;
    if !grid.matches(&layout) {
        bail!(
            "kernel grid {}x{} does not match the {}x{} patch layout of the input",
            grid.rows,
            grid.cols,
            layout.rows(),
            layout.cols()
        );
    }
    let method = match a.method {
        Method::Wiener => DeconvMethod::Wiener { lambda: a.lambda },
        Method::Rl => DeconvMethod::RichardsonLucy { iters: a.iters },
    };
    let out = deconv_spatially_varying(&blurred, &grid, &layout, method)?;
    png::write(&a.out, &linear_to_srgb(&out.map(|v| v.clamp(0.0, 1.0))))
}

fn fmt_metric(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.6}")
    }
}

pub fn metrics_eval(pred: &Path, gt: &Path, out: Option<&Path>, summary: Option<&Path>) -> Result<()> {
    let mut rows = String::from("image,psnr,ssim\n");
    let (mut sp, mut ss, mut n) = (0.0, 0.0, 0usize);
    for p in png::list(pred)? {
        let name = p.file_name().expect("listed file has a name");
        let g = gt.join(name);
        if !g.exists() {
            bail!("no ground truth for {}", name.to_string_lossy());
        }
        let (a, b) = (png::read(&p)?, png::read(&g)?);
        let (vp, vs) = (psnr(&a, &b, 1.0)?, ssim(&a, &b)?);
        rows.push_str(&format!("{},{},{}\n", name.to_string_lossy(), fmt_metric(vp), fmt_metric(vs)));
        sp += vp;
        ss += vs;
        n += 1;
    }
    if n == 0 {
        bail!("no PNG files in {}", pred.display());
    }
    let agg = format!(
        "count,mean_psnr,mean_ssim\n{n},{},{}\n",
        fmt_metric(sp / n as f64),
        fmt_metric(ss / n as f64)
    );
    match out {
        Some(path) => fs::write(path, &rows)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(rows.as_bytes())?;
            if summary.is_none() {
                stdout.write_all(agg.as_bytes())?;
            }
        }
    }
    if let Some(path) = summary {
        fs::write(path, &agg)?;
    } else if out.is_some() {
        print!("{agg}");
    }
    Ok(())
}
