use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gyroblur_core::blursynth::{sample_object_spec, synth_pipeline, MovingObjectSpec, NoiseParams, RgbaSprite, SynthConfig};
use gyroblur_core::blursynth::srgb_to_linear;
use gyroblur_core::formats;
use gyroblur_core::rng::{derive_seed, rng_from_seed};
use gyroblur_core::GyroSequence;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::DatasetSynth;
use crate::png;

pub const MANIFEST: &str = "manifest.jsonl";

#[derive(Serialize)]
struct ObjectRecord {
    radius: f64,
    color: [f64; 3],
    position: (f64, f64),
    direction_deg: f64,
    distance: f64,
}

#[derive(Serialize)]
struct Record {
    index: usize,
    seed: u64,
    sharp: String,
    blurred: String,
    gt: String,
    cmf: String,
    gyro: String,
    window_start: usize,
    exposure: f64,
    iso: f64,
    crop: [usize; 4],
    object: Option<ObjectRecord>,
}

fn load_config(a: &DatasetSynth) -> Result<SynthConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            formats::parse_toml::<SynthConfig>(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SynthConfig::default(),
    };
    if let Some(m) = a.m {
        cfg.m = m;
    }
    if let Some(s) = a.scale {
        cfg.s = s;
    }
    if a.no_noise {
        cfg.noise = None;
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Job<'a> {
    args: &'a DatasetSynth,
    cfg: &'a SynthConfig,
    gyro: &'a GyroSequence,
    sharp: &'a [PathBuf],
}

impl Job<'_> {
    fn run(&self, index: usize) -> Result<Record> {
        let a = self.args;
        let seed = derive_seed(a.seed, index as u64);
        let mut rng = rng_from_seed(seed);
        let win = self.cfg.gyro_window;
        let start = rng.random_range(0..=self.gyro.len() - win);
        let window = self.gyro.window(start, win)?;
        let iso = match a.iso {
            Some(iso) => iso,
            None => {
                let (lo, hi) = (NoiseParams::ISO_MIN.log2(), NoiseParams::ISO_MAX.log2());
                rng.random_range(lo..=hi).exp2()
            }
        };
        let with_object = a.object_prob > 0.0 && rng.random::<f64>() < a.object_prob;

        let src = &self.sharp[index % self.sharp.len()];
        let sharp = srgb_to_linear(&png::read(src)?);
        let (w, h) = (sharp.width(), sharp.height());

        let mut object = None;
        if with_object {
            let max_r = (w.min(h) as f64 / 2.0 - 1.0).min(0.15 * w.min(h) as f64);
            if max_r >= 2.0 {
                let radius = rng.random_range(2.0f64.max(0.5 * max_r)..=max_r);
                let color = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
                let spec = sample_object_spec(&mut rng, RgbaSprite::disc(radius, color), w, h)?;
                object = Some((radius, color, spec));
            }
        }
        let noise_seed: u64 = rng.random();
        let cfg = SynthConfig { iso, ..self.cfg.clone() };
        let spec: Option<&MovingObjectSpec> = object.as_ref().map(|(_, _, s)| s);
        let out = synth_pipeline(&sharp, &window, &cfg, spec, noise_seed)
            .with_context(|| format!("item {index} from {}", src.display()))?;

        let stem = format!("{index:05}");
        let names = [
            format!("{stem}_blur.png"),
            format!("{stem}_gt.png"),
            format!("{stem}.cmf"),
            format!("{stem}_gyro.csv"),
        ];
        let dir = &a.out;
        png::write(&dir.join(&names[0]), &out.blurred)?;
        png::write(&dir.join(&names[1]), &out.gt)?;
        formats::write_cmf(&dir.join(&names[2]), &out.cmf)?;
        formats::write_gyro_csv(&dir.join(&names[3]), &window)?;

        let [blurred, gt, cmf, gyro] = names;
        Ok(Record {
            index,
            seed,
            sharp: src.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            blurred,
            gt,
            cmf,
            gyro,
            window_start: start,
            exposure: cfg.exposure,
            iso,
            crop: [out.crop.x, out.crop.y, out.crop.w, out.crop.h],
            object: object.map(|(radius, color, s)| ObjectRecord {
                radius,
                color,
                position: s.position,
                direction_deg: s.direction_deg,
                distance: s.distance,
            }),
        })
    }
}

pub fn synth(a: &DatasetSynth) -> Result<()> {
    let cfg = load_config(a)?;
    if !(0.0..=1.0).contains(&a.object_prob) {
        bail!("--object-prob must lie in [0, 1], got {}", a.object_prob);
    }
    if let Some(iso) = a.iso {
        if !(NoiseParams::ISO_MIN..=NoiseParams::ISO_MAX).contains(&iso) {
            bail!("--iso must lie in [100, 1600], got {iso}");
        }
    }
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let manifest = a.out.join(MANIFEST);
    if a.count == 0 {
        fs::write(&manifest, "")?;
        return Ok(());
    }

    let gyro = formats::read_gyro_csv(&a.gyro).with_context(|| format!("reading {}", a.gyro.display()))?;
    if gyro.len() < cfg.gyro_window {
        bail!(
            "gyro file has {} samples, windows need {}",
            gyro.len(),
            cfg.gyro_window
        );
    }
    let sharp = png::list(&a.sharp_dir)?;
    if sharp.is_empty() {
        bail!("no PNG files in {}", a.sharp_dir.display());
    }

    let job = Job {
        args: a,
        cfg: &cfg,
        gyro: &gyro,
        sharp: &sharp,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.jobs).build()?;
    let records = pool.install(|| (0..a.count).into_par_iter().map(|i| job.run(i)).collect::<Result<Vec<_>>>())?;

    let mut text = String::new();
    for r in &records {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    write_atomic(&manifest, &text)
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("jsonl.tmp");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
