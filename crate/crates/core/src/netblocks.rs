//! Forward-only reference implementations of the gyro refinement block and
//! the offset/deformable-convolution/spatial-attention path of the gyro
//! deblurring block. Weights are supplied by the caller; nothing here trains.

use rand::Rng;
use rand_distr::Uniform;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Channel-major (`C x H x W`) feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(c: usize, h: usize, w: usize, data: Vec<f32>) -> Result<Self> {
        if c == 0 || h == 0 || w == 0 {
            return Err(Error::Shape(format!("feature map dims {c}x{h}x{w}")));
        }
        if data.len() != c * h * w {
            return Err(Error::Shape(format!(
                "{c}x{h}x{w} feature map with {} values",
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("feature map"));
        }
        Ok(Self { c, h, w, data })
    }

    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self {
            c,
            h,
            w,
            data: vec![0.0; c * h * w],
        }
    }

    /// Uniform values in `[-1, 1)`.
    pub fn random(c: usize, h: usize, w: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let d = Uniform::new(-1.0f32, 1.0).expect("valid range");
        Self {
            c,
            h,
            w,
            data: (0..c * h * w).map(|_| rng.sample(d)).collect(),
        }
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.h + y) * self.w + x]
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        &self.data[c * self.h * self.w..(c + 1) * self.h * self.w]
    }

    pub fn same_spatial(&self, other: &Self) -> bool {
        self.h == other.h && self.w == other.w
    }
}

/// Stride-1 convolution weights, `[out][in][k][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    pub out_c: usize,
    pub in_c: usize,
    pub k: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl ConvWeights {
    pub fn new(out_c: usize, in_c: usize, k: usize, weight: Vec<f32>, bias: Vec<f32>) -> Result<Self> {
        if weight.len() != out_c * in_c * k * k || bias.len() != out_c {
            return Err(Error::Shape(format!(
                "conv {out_c}x{in_c}x{k}x{k}: {} weights, {} biases",
                weight.len(),
                bias.len()
            )));
        }
        Ok(Self {
            out_c,
            in_c,
            k,
            weight,
            bias,
        })
    }

    pub fn zeros(out_c: usize, in_c: usize, k: usize) -> Self {
        Self {
            out_c,
            in_c,
            k,
            weight: vec![0.0; out_c * in_c * k * k],
            bias: vec![0.0; out_c],
        }
    }

    /// Uniform weights in `[-scale, scale)`, zero bias.
    pub fn random(out_c: usize, in_c: usize, k: usize, scale: f32, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let d = Uniform::new(-scale, scale).expect("valid range");
        Self {
            out_c,
            in_c,
            k,
            weight: (0..out_c * in_c * k * k).map(|_| rng.sample(d)).collect(),
            bias: vec![0.0; out_c],
        }
    }

    /// `c -> c` convolution that passes each channel through unchanged.
    pub fn identity(c: usize, k: usize) -> Self {
        let mut w = Self::zeros(c, c, k);
        let mid = k / 2;
        for o in 0..c {
            w.weight[((o * c + o) * k + mid) * k + mid] = 1.0;
        }
        w
    }

    #[inline]
    fn w(&self, o: usize, i: usize, ky: usize, kx: usize) -> f32 {
        self.weight[((o * self.in_c + i) * self.k + ky) * self.k + kx]
    }

    pub fn to_tensors(&self) -> (Tensor, Tensor) {
        (
            Tensor {
                dims: vec![self.out_c, self.in_c, self.k, self.k],
                data: self.weight.clone(),
            },
            Tensor {
                dims: vec![self.out_c],
                data: self.bias.clone(),
            },
        )
    }

    pub fn from_tensors(weight: &Tensor, bias: &Tensor) -> Result<Self> {
        let [o, i, kh, kw] = weight.dims[..] else {
            return Err(Error::Shape(format!("conv weight dims {:?}", weight.dims)));
        };
        if kh != kw || bias.dims != [o] {
            return Err(Error::Shape(format!(
                "conv weight {:?} with bias {:?}",
                weight.dims, bias.dims
            )));
        }
        Self::new(o, i, kh, weight.data.clone(), bias.data.clone())
    }
}

/// Stride-1 convolution with zero padding.
pub fn conv2d(feat: &FeatureMap, conv: &ConvWeights, padding: usize) -> Result<FeatureMap> {
    if feat.c != conv.in_c {
        return Err(Error::Shape(format!(
            "conv expects {} input channels, got {}",
            conv.in_c, feat.c
        )));
    }
    if feat.h + 2 * padding < conv.k || feat.w + 2 * padding < conv.k {
        return Err(Error::Shape("kernel larger than padded input".into()));
    }
    let oh = feat.h + 2 * padding - conv.k + 1;
    let ow = feat.w + 2 * padding - conv.k + 1;
    let mut out = FeatureMap::zeros(conv.out_c, oh, ow);
    for o in 0..conv.out_c {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = f64::from(conv.bias[o]);
                for i in 0..conv.in_c {
                    for ky in 0..conv.k {
                        let sy = (y + ky) as isize - padding as isize;
                        if sy < 0 || sy >= feat.h as isize {
                            continue;
                        }
                        for kx in 0..conv.k {
                            let sx = (x + kx) as isize - padding as isize;
                            if sx < 0 || sx >= feat.w as isize {
                                continue;
                            }
                            acc += f64::from(conv.w(o, i, ky, kx))
                                * f64::from(feat.at(i, sy as usize, sx as usize));
                        }
                    }
                }
                out.data[(o * oh + y) * ow + x] = acc as f32;
            }
        }
    }
    Ok(out)
}

/// Channel concatenation `[a; b]`.
pub fn concat(a: &FeatureMap, b: &FeatureMap) -> Result<FeatureMap> {
    if !a.same_spatial(b) {
        return Err(Error::Shape(format!(
            "cannot concat {}x{} with {}x{}",
            a.h, a.w, b.h, b.w
        )));
    }
    let mut data = a.data.clone();
    data.extend_from_slice(&b.data);
    Ok(FeatureMap {
        c: a.c + b.c,
        h: a.h,
        w: a.w,
        data,
    })
}

pub fn global_average_pool(feat: &FeatureMap) -> Vec<f32> {
    let n = (feat.h * feat.w) as f64;
    (0..feat.c)
        .map(|c| (feat.channel(c).iter().map(|v| f64::from(*v)).sum::<f64>() / n) as f32)
        .collect()
}

fn sigmoid(v: f32) -> f32 {
    1.0 / (1.0 + (-v).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementWeights {
    /// 1x1, `2c -> c`.
    pub conv1: ConvWeights,
    /// 3x3, `c -> c`, padding 1.
    pub conv2: ConvWeights,
    /// Squash the channel weights with a sigmoid. Off by default.
    pub sigmoid: bool,
}

impl RefinementWeights {
    pub fn random(c: usize, seed: u64) -> Self {
        Self {
            conv1: ConvWeights::random(c, 2 * c, 1, 0.5, seed),
            conv2: ConvWeights::random(c, c, 3, 0.2, seed.wrapping_add(1)),
            sigmoid: false,
        }
    }
}

/// Channel weights from concat -> global average pool -> 1x1 conv.
pub fn channel_weights(gyro: &FeatureMap, image: &FeatureMap, w: &RefinementWeights) -> Result<Vec<f32>> {
    check_refinement(gyro, image, w)?;
    let pooled = global_average_pool(&concat(gyro, image)?);
    let pooled = FeatureMap::new(pooled.len(), 1, 1, pooled)?;
    let mut weights = conv2d(&pooled, &w.conv1, 0)?.data;
    if w.sigmoid {
        weights.iter_mut().for_each(|v| *v = sigmoid(*v));
    }
    Ok(weights)
}

fn check_refinement(gyro: &FeatureMap, image: &FeatureMap, w: &RefinementWeights) -> Result<()> {
    let c = gyro.c;
    if image.c != c || !gyro.same_spatial(image) {
        return Err(Error::Shape(format!(
            "gyro {}x{}x{} vs image {}x{}x{}",
            gyro.c, gyro.h, gyro.w, image.c, image.h, image.w
        )));
    }
    if (w.conv1.in_c, w.conv1.out_c, w.conv1.k) != (2 * c, c, 1) {
        return Err(Error::Shape(format!(
            "conv1 must be 1x1 {} -> {c}, got {}x{} {} -> {}",
            2 * c,
            w.conv1.k,
            w.conv1.k,
            w.conv1.in_c,
            w.conv1.out_c
        )));
    }
    if (w.conv2.in_c, w.conv2.out_c, w.conv2.k) != (c, c, 3) {
        return Err(Error::Shape(format!("conv2 must be 3x3 {c} -> {c}")));
    }
    Ok(())
}

/// Channel-wise reweighting of the gyro feature.
pub fn scale_channels(feat: &FeatureMap, weights: &[f32]) -> Result<FeatureMap> {
    if weights.len() != feat.c {
        return Err(Error::Shape(format!(
            "{} channel weights for {} channels",
            weights.len(),
            feat.c
        )));
    }
    let hw = feat.h * feat.w;
    let mut out = feat.clone();
    for (c, chunk) in out.data.chunks_mut(hw).enumerate() {
        chunk.iter_mut().for_each(|v| *v *= weights[c]);
    }
    Ok(out)
}

/// Gyro refinement: concat, GAP, 1x1 conv, channel multiply, 3x3 conv.
pub fn gyro_refinement_forward(gyro: &FeatureMap, image: &FeatureMap, w: &RefinementWeights) -> Result<FeatureMap> {
    let weights = channel_weights(gyro, image, w)?;
    conv2d(&scale_channels(gyro, &weights)?, &w.conv2, 1)
}

/// Nine `(dy, dx)` pairs per pixel for a 3x3 deformable kernel; channel
/// `2k` is `dy` and `2k + 1` is `dx` of tap `k` (row-major over the 3x3 taps).
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetField(FeatureMap);

pub const OFFSET_CHANNELS: usize = 18;

impl OffsetField {
    pub fn new(map: FeatureMap) -> Result<Self> {
        if map.c != OFFSET_CHANNELS {
            return Err(Error::Shape(format!(
                "offset field needs {OFFSET_CHANNELS} channels, got {}",
                map.c
            )));
        }
        Ok(Self(map))
    }

    pub fn zeros(h: usize, w: usize) -> Self {
        Self(FeatureMap::zeros(OFFSET_CHANNELS, h, w))
    }

    /// Same `(dy, dx)` for every tap and pixel.
    pub fn constant(h: usize, w: usize, dy: f32, dx: f32) -> Self {
        let mut m = FeatureMap::zeros(OFFSET_CHANNELS, h, w);
        for k in 0..9 {
            m.data[2 * k * h * w..(2 * k + 1) * h * w].fill(dy);
            m.data[(2 * k + 1) * h * w..(2 * k + 2) * h * w].fill(dx);
        }
        Self(m)
    }

    pub fn map(&self) -> &FeatureMap {
        &self.0
    }

    #[inline]
    pub fn tap(&self, k: usize, y: usize, x: usize) -> (f32, f32) {
        (self.0.at(2 * k, y, x), self.0.at(2 * k + 1, y, x))
    }
}

/// Offsets from concat(image, gyro) through a 3x3 conv (padding 1) to 18 channels.
pub fn compute_offsets(image: &FeatureMap, gyro: &FeatureMap, conv: &ConvWeights) -> Result<OffsetField> {
    if image.c != gyro.c || !image.same_spatial(gyro) {
        return Err(Error::Shape(format!(
            "image {}x{}x{} vs gyro {}x{}x{}",
            image.c, image.h, image.w, gyro.c, gyro.h, gyro.w
        )));
    }
    if conv.k != 3 || conv.out_c != OFFSET_CHANNELS {
        return Err(Error::Shape(format!(
            "offset conv must be 3x3 -> {OFFSET_CHANNELS}, got {}x{} -> {}",
            conv.k, conv.k, conv.out_c
        )));
    }
    OffsetField::new(conv2d(&concat(image, gyro)?, conv, 1)?)
}

/// Bilinear sample with zero padding outside the map.
#[inline]
fn sample_zero_padded(feat: &FeatureMap, c: usize, y: f64, x: f64) -> f64 {
    let y0 = y.floor();
    let x0 = x.floor();
    let fy = y - y0;
    let fx = x - x0;
    let (y0, x0) = (y0 as isize, x0 as isize);
    let mut acc = 0.0;
    for (dy, wy) in [(0isize, 1.0 - fy), (1, fy)] {
        for (dx, wx) in [(0isize, 1.0 - fx), (1, fx)] {
            let (yy, xx) = (y0 + dy, x0 + dx);
            let wt = wy * wx;
            if wt == 0.0 || yy < 0 || xx < 0 || yy >= feat.h as isize || xx >= feat.w as isize {
                continue;
            }
            acc += wt * f64::from(feat.at(c, yy as usize, xx as usize));
        }
    }
    acc
}

/// 3x3 deformable convolution, stride 1, padding 1: tap `(i, j)` at output
/// `(y, x)` reads `feat` at `(y + i - 1 + dy, x + j - 1 + dx)`.
pub fn deformable_conv(feat: &FeatureMap, offsets: &OffsetField, conv: &ConvWeights) -> Result<FeatureMap> {
    if !feat.same_spatial(offsets.map()) {
        return Err(Error::Shape(format!(
            "offsets {}x{} vs feature {}x{}",
            offsets.map().h,
            offsets.map().w,
            feat.h,
            feat.w
        )));
    }
    if conv.k != 3 || conv.in_c != feat.c {
        return Err(Error::Shape(format!(
            "deformable conv needs 3x3 weights over {} channels",
            feat.c
        )));
    }
    let (h, w) = (feat.h, feat.w);
    // Sample once per (tap, pixel, channel), then contract with the weights.
    let mut cols = vec![0.0f64; 9 * feat.c];
    let mut out = FeatureMap::zeros(conv.out_c, h, w);
    for y in 0..h {
        for x in 0..w {
            for k in 0..9 {
                let (dy, dx) = offsets.tap(k, y, x);
                let sy = (y + k / 3) as f64 - 1.0 + f64::from(dy);
                let sx = (x + k % 3) as f64 - 1.0 + f64::from(dx);
                for i in 0..feat.c {
                    cols[i * 9 + k] = sample_zero_padded(feat, i, sy, sx);
                }
            }
            for o in 0..conv.out_c {
                let mut acc = f64::from(conv.bias[o]);
                for i in 0..feat.c {
                    for k in 0..9 {
                        acc += f64::from(conv.w(o, i, k / 3, k % 3)) * cols[i * 9 + k];
                    }
                }
                out.data[(o * h + y) * w + x] = acc as f32;
            }
        }
    }
    Ok(out)
}

/// `sigmoid(conv(feat))` with a 3x3 conv, padding 1. `conv` may emit one
/// channel (shared map) or one per input channel.
pub fn attention_map(feat: &FeatureMap, conv: &ConvWeights) -> Result<FeatureMap> {
    if conv.out_c != 1 && conv.out_c != feat.c {
        return Err(Error::Shape(format!(
            "attention conv must emit 1 or {} channels, got {}",
            feat.c, conv.out_c
        )));
    }
    let mut a = conv2d(feat, conv, conv.k / 2)?;
    a.data.iter_mut().for_each(|v| *v = sigmoid(*v));
    Ok(a)
}

/// `attention ⊙ feat`.
pub fn spatial_attention(feat: &FeatureMap, conv: &ConvWeights) -> Result<FeatureMap> {
    let a = attention_map(feat, conv)?;
    let hw = feat.h * feat.w;
    let mut out = feat.clone();
    for (i, v) in out.data.iter_mut().enumerate() {
        let (c, p) = (i / hw, i % hw);
        let ac = if a.c == 1 { 0 } else { c };
        *v *= a.data[ac * hw + p];
    }
    Ok(out)
}

/// A named f32 tensor as stored in weight files.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

/// Ordered collection of named tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightSet {
    pub entries: Vec<(String, Tensor)>,
}

impl WeightSet {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        let name = name.into();
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = t,
            None => self.entries.push((name, t)),
        }
    }

    pub fn insert_conv(&mut self, prefix: &str, conv: &ConvWeights) {
        let (w, b) = conv.to_tensors();
        self.insert(format!("{prefix}.weight"), w);
        self.insert(format!("{prefix}.bias"), b);
    }

    pub fn conv(&self, prefix: &str) -> Result<ConvWeights> {
        let missing = |n: String| Error::Format(format!("missing tensor {n}"));
        let w = self
            .get(&format!("{prefix}.weight"))
            .ok_or_else(|| missing(format!("{prefix}.weight")))?;
        let b = self
            .get(&format!("{prefix}.bias"))
            .ok_or_else(|| missing(format!("{prefix}.bias")))?;
        ConvWeights::from_tensors(w, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs_diff(a: &FeatureMap, b: &FeatureMap) -> f32 {
        a.data
            .iter()
            .zip(&b.data)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f32::max)
    }

    #[test]
    fn conv2d_matches_hand_computation() {
        // 1 channel 3x3 input, 3x3 kernel of ones, padding 1: corner = sum of 2x2 block
        let f = FeatureMap::new(1, 3, 3, (1..=9).map(|v| v as f32).collect()).unwrap();
        let k = ConvWeights::new(1, 1, 3, vec![1.0; 9], vec![0.5]).unwrap();
        let o = conv2d(&f, &k, 1).unwrap();
        assert_eq!(o.at(0, 0, 0), 1.0 + 2.0 + 4.0 + 5.0 + 0.5);
        assert_eq!(o.at(0, 1, 1), 45.0 + 0.5);
        assert!(conv2d(&FeatureMap::zeros(2, 3, 3), &k, 1).is_err());
    }

    #[test]
    fn refinement_identity_configuration() {
        let c = 4;
        let gyro = FeatureMap::random(c, 6, 5, 1);
        let image = FeatureMap::random(c, 6, 5, 2);
        // conv1 emits exactly 1 per channel via bias; conv2 passes through.
        let w = RefinementWeights {
            conv1: ConvWeights::new(c, 2 * c, 1, vec![0.0; 2 * c * c], vec![1.0; c]).unwrap(),
            conv2: ConvWeights::identity(c, 3),
            sigmoid: false,
        };
        let out = gyro_refinement_forward(&gyro, &image, &w).unwrap();
        assert_eq!((out.c, out.h, out.w), (c, 6, 5));
        assert!(max_abs_diff(&out, &gyro) < 1e-7);
    }

    #[test]
    fn refinement_channel_broadcast() {
        let c = 3;
        let gyro = FeatureMap::random(c, 5, 5, 3);
        let image = FeatureMap::random(c, 5, 5, 4);
        let w = RefinementWeights::random(c, 9);
        let weights = channel_weights(&gyro, &image, &w).unwrap();
        // Oracle: pooled vector by hand, then the 1x1 conv as a matrix product.
        let cat = concat(&gyro, &image).unwrap();
        let pooled: Vec<f64> = (0..2 * c)
            .map(|ch| cat.channel(ch).iter().map(|v| f64::from(*v)).sum::<f64>() / 25.0)
            .collect();
        for (o, wo) in weights.iter().enumerate() {
            let e: f64 = (0..2 * c).map(|i| f64::from(w.conv1.weight[o * 2 * c + i]) * pooled[i]).sum();
            assert!((f64::from(*wo) - e).abs() < 1e-6);
        }
        // scaling gyro channel j by t with channel weights held fixed
        let t = 2.5f32;
        let mut scaled = gyro.clone();
        let j = 1;
        scaled.data[j * 25..(j + 1) * 25].iter_mut().for_each(|v| *v *= t);
        let a = scale_channels(&gyro, &weights).unwrap();
        let b = scale_channels(&scaled, &weights).unwrap();
        for p in 0..25 {
            assert!((b.data[j * 25 + p] - t * a.data[j * 25 + p]).abs() < 1e-6);
            assert_eq!(b.data[p], a.data[p]);
        }
        let sig = RefinementWeights { sigmoid: true, ..w };
        let sw = channel_weights(&gyro, &image, &sig).unwrap();
        assert!(sw.iter().all(|v| *v > 0.0 && *v < 1.0));
    }

    #[test]
    fn refinement_shape_errors() {
        let w = RefinementWeights::random(4, 0);
        assert!(gyro_refinement_forward(&FeatureMap::zeros(4, 3, 3), &FeatureMap::zeros(4, 3, 4), &w).is_err());
        assert!(gyro_refinement_forward(&FeatureMap::zeros(3, 3, 3), &FeatureMap::zeros(3, 3, 3), &w).is_err());
    }

    #[test]
    fn offsets_shapes_and_values() {
        let image = FeatureMap::random(4, 5, 6, 10);
        let gyro = FeatureMap::random(4, 5, 6, 11);
        let zero = compute_offsets(&image, &gyro, &ConvWeights::zeros(18, 8, 3)).unwrap();
        assert_eq!(zero.map().c, 18);
        assert!(zero.map().data.iter().all(|v| *v == 0.0));

        let conv = ConvWeights::random(18, 8, 3, 0.3, 12);
        let off = compute_offsets(&image, &gyro, &conv).unwrap();
        // Oracle: direct sum over the concatenated channels at interior pixel (2, 3).
        let (y, x) = (2usize, 3usize);
        for o in [0usize, 7, 17] {
            let mut e = 0.0f64;
            for i in 0..8 {
                let src = if i < 4 { &image } else { &gyro };
                for ky in 0..3 {
                    for kx in 0..3 {
                        e += f64::from(conv.weight[((o * 8 + i) * 3 + ky) * 3 + kx])
                            * f64::from(src.at(i % 4, y + ky - 1, x + kx - 1));
                    }
                }
            }
            assert!((f64::from(off.map().at(o, y, x)) - e).abs() < 1e-5);
        }
        assert!(compute_offsets(&image, &gyro, &ConvWeights::zeros(16, 8, 3)).is_err());
    }

    #[test]
    fn deformable_zero_offsets_equal_standard_conv() {
        let f = FeatureMap::random(5, 9, 11, 20);
        let conv = ConvWeights::random(3, 5, 3, 0.5, 21);
        let d = deformable_conv(&f, &OffsetField::zeros(9, 11), &conv).unwrap();
        let s = conv2d(&f, &conv, 1).unwrap();
        assert!(max_abs_diff(&d, &s) < 1e-5);
    }

    #[test]
    fn deformable_integer_shift() {
        let f = FeatureMap::random(2, 7, 8, 30);
        let conv = ConvWeights::random(2, 2, 3, 0.5, 31);
        // shifted(y, x) = f(y, x + 1), zero past the right edge
        let mut shifted = FeatureMap::zeros(2, 7, 8);
        for c in 0..2 {
            for y in 0..7 {
                for x in 0..7 {
                    shifted.data[(c * 7 + y) * 8 + x] = f.at(c, y, x + 1);
                }
            }
        }
        let d = deformable_conv(&f, &OffsetField::constant(7, 8, 0.0, 1.0), &conv).unwrap();
        let s = conv2d(&shifted, &conv, 1).unwrap();
        // column 0 differs: the deformable taps still reach f(., 0) there
        for o in 0..2 {
            for y in 0..7 {
                for x in 1..8 {
                    assert!((d.at(o, y, x) - s.at(o, y, x)).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn deformable_half_pixel_averages() {
        let f = FeatureMap::random(1, 4, 6, 40);
        // single center tap weight 1
        let mut conv = ConvWeights::zeros(1, 1, 3);
        conv.weight[4] = 1.0;
        let d = deformable_conv(&f, &OffsetField::constant(4, 6, 0.0, 0.5), &conv).unwrap();
        for y in 0..4 {
            for x in 0..5 {
                let e = 0.5 * (f.at(0, y, x) + f.at(0, y, x + 1));
                assert!((d.at(0, y, x) - e).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn attention_bounds() {
        let f = FeatureMap::random(3, 6, 6, 50);
        let out = spatial_attention(&f, &ConvWeights::zeros(3, 3, 3)).unwrap();
        for (o, v) in out.data.iter().zip(&f.data) {
            assert_eq!(*o, 0.5 * v);
        }
        let conv = ConvWeights::random(1, 3, 3, 2.0, 51);
        let a = attention_map(&f, &conv).unwrap();
        assert!(a.data.iter().all(|v| *v > 0.0 && *v < 1.0));
        let out = spatial_attention(&f, &conv).unwrap();
        // Oracle: conv + sigmoid computed explicitly.
        let pre = conv2d(&f, &conv, 1).unwrap();
        for i in 0..out.data.len() {
            let p = i % 36;
            let e = f.data[i] / (1.0 + (-pre.data[p]).exp());
            assert!((out.data[i] - e).abs() < 1e-6);
            assert!(out.data[i].abs() <= f.data[i].abs());
        }
    }

    #[test]
    fn weight_set_conv_round_trip() {
        let conv = ConvWeights::random(18, 8, 3, 0.1, 3);
        let mut ws = WeightSet::default();
        ws.insert_conv("offsets", &conv);
        assert_eq!(ws.conv("offsets").unwrap(), conv);
        assert!(ws.conv("missing").is_err());
    }
}
