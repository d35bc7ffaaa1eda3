use crate::error::{Error, Result};

/// Interleaved RGB image in linear color.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

pub const CHANNELS: usize = 3;

impl LinearImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::DimensionMismatch(format!(
                "image dims must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height * CHANNELS {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height}x3 image needs {} values, got {}",
                width * height * CHANNELS,
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("image"));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0);
        Self {
            width,
            height,
            data: vec![value; width * height * CHANNELS],
        }
    }

    /// Builds an image from `f(x, y) -> [r, g, b]`.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [f64; 3]) -> Self {
        assert!(width > 0 && height > 0);
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    /// Assembles an image from three planes of `width * height` values.
    pub fn from_planes(width: usize, height: usize, planes: &[Vec<f64>; 3]) -> Result<Self> {
        let mut data = vec![0.0; width * height * CHANNELS];
        for (c, plane) in planes.iter().enumerate() {
            if plane.len() != width * height {
                return Err(Error::DimensionMismatch("plane size".into()));
            }
            for (i, v) in plane.iter().enumerate() {
                data[i * CHANNELS + c] = *v;
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn same_dims(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * CHANNELS + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * CHANNELS + c] = v;
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn plane(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(CHANNELS).copied().collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn crop(&self, rect: &Rect) -> Result<Self> {
        if rect.w == 0
            || rect.h == 0
            || rect.x + rect.w > self.width
            || rect.y + rect.h > self.height
        {
            return Err(Error::DimensionMismatch(format!(
                "crop {rect:?} outside {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(rect.w * rect.h * CHANNELS);
        for y in rect.y..rect.y + rect.h {
            let row = (y * self.width + rect.x) * CHANNELS;
            data.extend_from_slice(&self.data[row..row + rect.w * CHANNELS]);
        }
        Ok(Self {
            width: rect.w,
            height: rect.h,
            data,
        })
    }
}

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }
}

/// Mirror index into `[0, n)` without repeating the edge sample
/// (`... 2 1 | 0 1 2 ... n-1 | n-2 ...`), valid for any offset.
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut r = i.rem_euclid(period);
    if r >= n as isize {
        r = period - r;
    }
    r as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_index_mirrors() {
        let got: Vec<usize> = (-4..8).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(got, vec![2, 3, 2, 1, 0, 1, 2, 3, 2, 1, 0, 1]);
        assert_eq!(reflect_index(-7, 1), 0);
    }

    #[test]
    fn crop_and_planes() {
        let img = LinearImage::from_fn(5, 4, |x, y| [x as f64, y as f64, (x * y) as f64]);
        let c = img.crop(&Rect::new(1, 2, 3, 2)).unwrap();
        assert_eq!((c.width(), c.height()), (3, 2));
        assert_eq!(c.pixel(0, 0), [1.0, 2.0, 2.0]);
        assert_eq!(c.pixel(2, 1), [3.0, 3.0, 9.0]);
        assert!(img.crop(&Rect::new(3, 0, 3, 1)).is_err());
        let planes = [img.plane(0), img.plane(1), img.plane(2)];
        assert_eq!(LinearImage::from_planes(5, 4, &planes).unwrap(), img);
    }

    #[test]
    fn rejects_bad_data() {
        assert!(LinearImage::new(2, 2, vec![0.0; 11]).is_err());
        assert!(LinearImage::new(1, 1, vec![0.0, f64::NAN, 0.0]).is_err());
        assert!(LinearImage::new(0, 1, vec![]).is_err());
    }
}
