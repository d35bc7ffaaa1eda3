//! On-disk formats: `CMF1`, `KRN1` and `WGT1` binaries, gyro CSV, and the
//! TOML key-value files for intrinsics and the gyro error model.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gyro::{CameraIntrinsics, CameraMotionField, GyroSample, GyroSequence};
use crate::kernels::{BlurKernel, KernelGrid};
use crate::netblocks::{Tensor, WeightSet};
use crate::perturb::{AxisNoise, CenterShiftRange, GyroNoiseModel};

pub const CMF_MAGIC: &[u8; 4] = b"CMF1";
pub const KRN_MAGIC: &[u8; 4] = b"KRN1";
pub const WGT_MAGIC: &[u8; 4] = b"WGT1";

fn put_u32(out: &mut Vec<u8>, v: usize, what: &str) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_f32s(out: &mut Vec<u8>, vals: impl IntoIterator<Item = f32>) {
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Little-endian byte cursor.
struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format(format!(
                "truncated at byte {} (wanted {n} more)",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn magic(&mut self, m: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != m {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(m)
            )));
        }
        Ok(())
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = n
            .checked_mul(4)
            .ok_or_else(|| Error::Format("payload size overflow".into()))?;
        let b = self.take(bytes)?;
        Ok(b.chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub fn encode_cmf(cmf: &CameraMotionField) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(28 + cmf.data.len() * 4);
    out.extend_from_slice(CMF_MAGIC);
    for (v, what) in [
        (cmf.width_g, "width_g"),
        (cmf.height_g, "height_g"),
        (cmf.m, "m"),
        (cmf.s, "s"),
        (cmf.source_w, "width"),
        (cmf.source_h, "height"),
    ] {
        put_u32(&mut out, v, what)?;
    }
    put_f32s(&mut out, cmf.data.iter().map(|v| *v as f32));
    Ok(out)
}

pub fn decode_cmf(buf: &[u8]) -> Result<CameraMotionField> {
    let mut r = Reader::new(buf);
    r.magic(CMF_MAGIC)?;
    let (width_g, height_g, m, s, w, h) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?, r.u32()?, r.u32()?);
    let mut field = CameraMotionField::zeros(w, h, m, s)?;
    if (field.width_g, field.height_g) != (width_g, height_g) {
        return Err(Error::Format(format!(
            "grid {width_g}x{height_g} inconsistent with {w}x{h} at scale {s}"
        )));
    }
    let n = field.data.len();
    field.data = r.f32s(n)?.into_iter().map(f64::from).collect();
    r.finish()?;
    Ok(field)
}

pub fn encode_kernels(grid: &KernelGrid) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(KRN_MAGIC);
    put_u32(&mut out, grid.rows, "rows")?;
    put_u32(&mut out, grid.cols, "cols")?;
    put_u32(&mut out, grid.ksize, "ksize")?;
    for k in &grid.kernels {
        put_f32s(&mut out, k.weights().iter().map(|v| *v as f32));
    }
    Ok(out)
}

pub fn decode_kernels(buf: &[u8]) -> Result<KernelGrid> {
    let mut r = Reader::new(buf);
    r.magic(KRN_MAGIC)?;
    let (rows, cols, ksize) = (r.u32()?, r.u32()?, r.u32()?);
    let mut kernels = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        let w = r.f32s(ksize * ksize)?;
        kernels.push(BlurKernel::new(ksize, w.into_iter().map(f64::from).collect())?);
    }
    r.finish()?;
    Ok(KernelGrid {
        rows,
        cols,
        ksize,
        kernels,
    })
}

pub fn encode_weights(ws: &WeightSet) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(WGT_MAGIC);
    put_u32(&mut out, ws.entries.len(), "tensor count")?;
    for (name, t) in &ws.entries {
        let n: usize = t.dims.iter().product();
        if n != t.data.len() {
            return Err(Error::Shape(format!(
                "tensor {name}: dims {:?} hold {n} values, got {}",
                t.dims,
                t.data.len()
            )));
        }
        put_u32(&mut out, name.len(), "name length")?;
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, t.dims.len(), "rank")?;
        for d in &t.dims {
            put_u32(&mut out, *d, "dim")?;
        }
        put_f32s(&mut out, t.data.iter().copied());
    }
    Ok(out)
}

pub fn decode_weights(buf: &[u8]) -> Result<WeightSet> {
    let mut r = Reader::new(buf);
    r.magic(WGT_MAGIC)?;
    let count = r.u32()?;
    let mut ws = WeightSet::default();
    for _ in 0..count {
        let len = r.u32()?;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|e| Error::Format(format!("tensor name: {e}")))?
            .to_string();
        let rank = r.u32()?;
        let dims = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let n = dims
            .iter()
            .try_fold(1usize, |a, d| a.checked_mul(*d))
            .ok_or_else(|| Error::Format(format!("tensor {name}: size overflow")))?;
        let data = r.f32s(n)?;
        if ws.get(&name).is_some() {
            return Err(Error::Format(format!("duplicate tensor {name}")));
        }
        ws.entries.push((name, Tensor { dims, data }));
    }
    r.finish()?;
    Ok(ws)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}

pub fn read_cmf(path: &Path) -> Result<CameraMotionField> {
    decode_cmf(&read_bytes(path)?)
}

pub fn write_cmf(path: &Path, cmf: &CameraMotionField) -> Result<()> {
    Ok(std::fs::write(path, encode_cmf(cmf)?)?)
}

pub fn read_kernels(path: &Path) -> Result<KernelGrid> {
    decode_kernels(&read_bytes(path)?)
}

pub fn write_kernels(path: &Path, grid: &KernelGrid) -> Result<()> {
    Ok(std::fs::write(path, encode_kernels(grid)?)?)
}

pub fn read_weights(path: &Path) -> Result<WeightSet> {
    decode_weights(&read_bytes(path)?)
}

pub fn write_weights(path: &Path, ws: &WeightSet) -> Result<()> {
    Ok(std::fs::write(path, encode_weights(ws)?)?)
}

#[derive(Debug, Deserialize, Serialize)]
struct CsvRow {
    t: f64,
    wx: f64,
    wy: f64,
    wz: f64,
}

/// Parses `t,wx,wy,wz` rows. Errors carry the 1-based file line.
pub fn parse_gyro_csv(text: &str) -> Result<Vec<GyroSample>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "wx", "wy", "wz"] {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header t,wx,wy,wz, got {}", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let row: CsvRow = rec
            .deserialize(Some(&headers))
            .map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        if ![row.t, row.wx, row.wy, row.wz].iter().all(|v| v.is_finite()) {
            return Err(Error::Parse {
                line,
                msg: "non-finite value".into(),
            });
        }
        out.push(GyroSample::new(row.t, row.wx, row.wy, row.wz));
    }
    Ok(out)
}

pub fn format_gyro_csv(samples: &[GyroSample]) -> String {
    let mut s = String::from("t,wx,wy,wz\n");
    for g in samples {
        s.push_str(&format!("{},{},{},{}\n", g.t, g.omega.x, g.omega.y, g.omega.z));
    }
    s
}

pub fn read_gyro_csv(path: &Path) -> Result<GyroSequence> {
    let text = std::fs::read_to_string(path)?;
    GyroSequence::with_inferred_rate(parse_gyro_csv(&text)?)
}

pub fn write_gyro_csv(path: &Path, seq: &GyroSequence) -> Result<()> {
    Ok(std::fs::write(path, format_gyro_csv(seq.samples()))?)
}

fn toml_error(text: &str, e: &toml::de::Error) -> Error {
    let line = e
        .span()
        .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() as u64 + 1);
    Error::Parse {
        line,
        msg: e.message().to_string(),
    }
}

pub fn parse_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| toml_error(text, &e))
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct IntrinsicsFile {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
}

pub fn parse_intrinsics(text: &str) -> Result<CameraIntrinsics> {
    let f: IntrinsicsFile = parse_toml(text)?;
    CameraIntrinsics::new(f.fx, f.fy, f.cx, f.cy)
}

pub fn format_intrinsics(k: &CameraIntrinsics) -> String {
    let f = IntrinsicsFile {
        fx: k.fx,
        fy: k.fy,
        cx: k.cx,
        cy: k.cy,
    };
    toml::to_string(&f).expect("plain struct serializes")
}

pub fn read_intrinsics(path: &Path) -> Result<CameraIntrinsics> {
    parse_intrinsics(&std::fs::read_to_string(path)?)
}

/// Flat key-value gyro error model.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorModelFile {
    pub mean_x: f64,
    pub sigma_x: f64,
    pub mean_y: f64,
    pub sigma_y: f64,
    pub mean_z: f64,
    pub sigma_z: f64,
    #[serde(default = "default_shift")]
    pub max_center_shift: f64,
}

fn default_shift() -> f64 {
    CenterShiftRange::DEFAULT_MAX_ABS
}

impl ErrorModelFile {
    pub fn new(model: &GyroNoiseModel, range: &CenterShiftRange) -> Self {
        Self {
            mean_x: model.x.mean,
            sigma_x: model.x.sigma,
            mean_y: model.y.mean,
            sigma_y: model.y.sigma,
            mean_z: model.z.mean,
            sigma_z: model.z.sigma,
            max_center_shift: range.max_abs,
        }
    }

    pub fn split(&self) -> Result<(GyroNoiseModel, CenterShiftRange)> {
        let ax = |mean, sigma| AxisNoise { mean, sigma };
        let model = GyroNoiseModel {
            x: ax(self.mean_x, self.sigma_x),
            y: ax(self.mean_y, self.sigma_y),
            z: ax(self.mean_z, self.sigma_z),
        };
        model.validate()?;
        Ok((model, CenterShiftRange::new(self.max_center_shift)?))
    }
}

pub fn parse_error_model(text: &str) -> Result<(GyroNoiseModel, CenterShiftRange)> {
    parse_toml::<ErrorModelFile>(text)?.split()
}

pub fn format_error_model(model: &GyroNoiseModel, range: &CenterShiftRange) -> String {
    toml::to_string(&ErrorModelFile::new(model, range)).expect("plain struct serializes")
}

pub fn read_error_model(path: &Path) -> Result<(GyroNoiseModel, CenterShiftRange)> {
    parse_error_model(&std::fs::read_to_string(path)?)
}
