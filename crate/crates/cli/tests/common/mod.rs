#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use image::{ImageBuffer, Rgb};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gyroblur"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn gyroblur")
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "gyroblur {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

/// Writes a gyro CSV of `n` samples at 200 Hz with omega(t) = f(t).
pub fn write_gyro(path: &Path, n: usize, f: impl Fn(f64) -> [f64; 3]) {
    let mut s = String::from("t,wx,wy,wz\n");
    for i in 0..n {
        let t = i as f64 / 200.0;
        let w = f(t);
        s.push_str(&format!("{t},{},{},{}\n", w[0], w[1], w[2]));
    }
    std::fs::write(path, s).unwrap();
}

pub fn write_intrinsics(path: &Path, f: f64, w: usize, h: usize) {
    std::fs::write(
        path,
        format!(
            "fx = {f}\nfy = {f}\ncx = {}\ncy = {}\n",
            (w as f64 - 1.0) / 2.0,
            (h as f64 - 1.0) / 2.0
        ),
    )
    .unwrap();
}

/// 8-bit textured PNG.
pub fn write_texture(path: &Path, w: u32, h: u32, phase: f64) {
    let img = ImageBuffer::from_fn(w, h, |x, y| {
        let (x, y) = (x as f64, y as f64);
        let v = |a: f64, b: f64| (127.5 + 120.0 * (a * x + b * y + phase).sin()) as u8;
        Rgb([v(0.21, 0.05), v(0.07, 0.19), v(0.13, 0.13)])
    });
    img.save(path).unwrap();
}

pub fn sorted_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    v.sort();
    v
}
