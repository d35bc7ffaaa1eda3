//! Patch-wise blur kernels rasterized from homography trajectories.

use nalgebra::Point2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gyro::{homography_chain, warp_point, CameraIntrinsics, GyroSequence, Homography};
use crate::image::Rect;

pub const DEFAULT_PATCH: usize = 160;
pub const DEFAULT_OVERLAP: f64 = 0.5;
/// Dense homography steps per gyro interval when rendering kernels.
pub const KERNEL_INTERP: usize = 8;
/// Arc-length samples per pixel of trajectory.
const SAMPLES_PER_PX: f64 = 16.0;

/// Overlapping square patches tiling an image; the last row and column are
/// clamped to the image edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchLayout {
    pub width: usize,
    pub height: usize,
    pub patch: usize,
    pub stride: usize,
    /// Left edges of the patch columns.
    pub xs: Vec<usize>,
    /// Top edges of the patch rows.
    pub ys: Vec<usize>,
}

impl PatchLayout {
    pub fn rows(&self) -> usize {
        self.ys.len()
    }

    pub fn cols(&self) -> usize {
        self.xs.len()
    }

    pub fn len(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rect(&self, row: usize, col: usize) -> Rect {
        Rect::new(self.xs[col], self.ys[row], self.patch, self.patch)
    }

    pub fn center(&self, row: usize, col: usize) -> Point2<f64> {
        let half = (self.patch as f64 - 1.0) / 2.0;
        Point2::new(self.xs[col] as f64 + half, self.ys[row] as f64 + half)
    }

    /// Patch rectangles in row-major order.
    pub fn rects(&self) -> impl Iterator<Item = Rect> + '_ {
        (0..self.rows()).flat_map(move |r| (0..self.cols()).map(move |c| self.rect(r, c)))
    }
}

fn starts(dim: usize, patch: usize, stride: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..).map(|i| i * stride).take_while(|s| s + patch < dim).collect();
    out.push(dim - patch);
    out
}

pub fn patch_layout(w: usize, h: usize, patch: usize, overlap: f64) -> Result<PatchLayout> {
    if patch == 0 || patch > w.min(h) {
        return Err(Error::PatchTooLarge {
            patch,
            width: w,
            height: h,
        });
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::OutOfRange {
            what: "overlap",
            value: overlap,
        });
    }
    let stride = ((patch as f64 * (1.0 - overlap)).round() as usize).clamp(1, patch);
    Ok(PatchLayout {
        width: w,
        height: h,
        patch,
        stride,
        xs: starts(w, patch, stride),
        ys: starts(h, patch, stride),
    })
}

/// Odd-sized, nonnegative, unit-sum kernel. `weights` is row-major and the
/// center tap is at `(size / 2, size / 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurKernel {
    size: usize,
    weights: Vec<f64>,
}

impl BlurKernel {
    pub fn new(size: usize, weights: Vec<f64>) -> Result<Self> {
        if size == 0 || size % 2 == 0 {
            return Err(Error::InvalidKernelSize(size));
        }
        if weights.len() != size * size {
            return Err(Error::DimensionMismatch(format!(
                "kernel {size}x{size} with {} weights",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::OutOfRange {
                what: "kernel weight",
                value: weights.iter().copied().fold(f64::NAN, f64::min),
            });
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::OutOfRange {
                what: "kernel sum",
                value: sum,
            });
        }
        Ok(Self { size, weights })
    }

    pub fn delta(size: usize) -> Result<Self> {
        if size == 0 || size % 2 == 0 {
            return Err(Error::InvalidKernelSize(size));
        }
        let mut weights = vec![0.0; size * size];
        weights[(size / 2) * size + size / 2] = 1.0;
        Ok(Self { size, weights })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at displacement `(dx, dy)` from the center.
    pub fn at(&self, dx: isize, dy: isize) -> f64 {
        let r = self.radius() as isize;
        if dx.abs() > r || dy.abs() > r {
            return 0.0;
        }
        self.weights[((dy + r) as usize) * self.size + (dx + r) as usize]
    }

    pub fn is_delta(&self) -> bool {
        self.at(0, 0) == 1.0
    }
}

/// Rasterizes the trajectory of `center` under the homographies: the polyline
/// of displacements `H_i(center) - center` is sampled uniformly in arc length
/// and each sample is splatted bilinearly.
pub fn render_kernel(homographies: &[Homography], center: Point2<f64>, ksize: usize) -> Result<BlurKernel> {
    if ksize == 0 || ksize % 2 == 0 {
        return Err(Error::InvalidKernelSize(ksize));
    }
    if homographies.is_empty() {
        return Err(Error::EmptyHomographies);
    }
    let pts = homographies
        .iter()
        .map(|h| warp_point(h, center).map(|q| q - center))
        .collect::<Result<Vec<_>>>()?;
    let seg_len: Vec<f64> = pts.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let total: f64 = seg_len.iter().sum();

    let mut weights = vec![0.0; ksize * ksize];
    let r = (ksize / 2) as f64;
    let mut splat = |x: f64, y: f64, wgt: f64| -> Result<()> {
        let outside = || Error::TrajectoryOutsideSupport { x, y, ksize };
        let gx = x + r;
        let gy = y + r;
        if !(gx >= 0.0 && gy >= 0.0 && gx <= 2.0 * r && gy <= 2.0 * r) {
            return Err(outside());
        }
        let x0 = gx.floor();
        let y0 = gy.floor();
        let fx = gx - x0;
        let fy = gy - y0;
        for (dy, wy) in [(0usize, 1.0 - fy), (1, fy)] {
            for (dx, wx) in [(0usize, 1.0 - fx), (1, fx)] {
                let w = wgt * wx * wy;
                if w == 0.0 {
                    continue;
                }
                let (xi, yi) = (x0 as usize + dx, y0 as usize + dy);
                if xi >= ksize || yi >= ksize {
                    return Err(outside());
                }
                weights[yi * ksize + xi] += w;
            }
        }
        Ok(())
    };

    if total < 1e-12 {
        splat(pts[0].x, pts[0].y, 1.0)?;
    } else {
        let n = ((total * SAMPLES_PER_PX).ceil() as usize).max(1);
        let step = total / n as f64;
        let mut seg = 0;
        let mut seg_start = 0.0;
        for j in 0..n {
            let s = (j as f64 + 0.5) * step;
            while seg + 1 < seg_len.len() && s > seg_start + seg_len[seg] {
                seg_start += seg_len[seg];
                seg += 1;
            }
            let u = if seg_len[seg] > 0.0 {
                ((s - seg_start) / seg_len[seg]).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let p = pts[seg] + (pts[seg + 1] - pts[seg]) * u;
            splat(p.x, p.y, 1.0 / n as f64)?;
        }
    }

    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    Ok(BlurKernel {
        size: ksize,
        weights,
    })
}

/// Kernels for every patch of a layout, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrid {
    pub rows: usize,
    pub cols: usize,
    pub ksize: usize,
    pub kernels: Vec<BlurKernel>,
}

impl KernelGrid {
    pub fn get(&self, row: usize, col: usize) -> &BlurKernel {
        &self.kernels[row * self.cols + col]
    }

    pub fn uniform(rows: usize, cols: usize, kernel: BlurKernel) -> Self {
        Self {
            rows,
            cols,
            ksize: kernel.size(),
            kernels: vec![kernel; rows * cols],
        }
    }

    pub fn matches(&self, layout: &PatchLayout) -> bool {
        self.rows == layout.rows() && self.cols == layout.cols()
    }
}

pub fn render_all_from_homographies(
    homographies: &[Homography],
    layout: &PatchLayout,
    ksize: usize,
) -> Result<KernelGrid> {
    let centers: Vec<Point2<f64>> = (0..layout.rows())
        .flat_map(|r| (0..layout.cols()).map(move |c| (r, c)))
        .map(|(r, c)| layout.center(r, c))
        .collect();
    let kernels = centers
        .par_iter()
        .map(|c| render_kernel(homographies, *c, ksize))
        .collect::<Result<Vec<_>>>()?;
    Ok(KernelGrid {
        rows: layout.rows(),
        cols: layout.cols(),
        ksize,
        kernels,
    })
}

/// Kernels from a gyro window: the window is integrated over its own exposure
/// with [`KERNEL_INTERP`] homography steps per gyro interval.
pub fn render_all(
    seq: &GyroSequence,
    k: &CameraIntrinsics,
    layout: &PatchLayout,
    ksize: usize,
) -> Result<KernelGrid> {
    let steps = (seq.len() - 1) * KERNEL_INTERP;
    let hs = homography_chain(seq, k, steps + steps % 2, seq.exposure())?;
    render_all_from_homographies(&hs, layout, ksize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gyro::{homography, rotation_matrix};
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;

    fn translation_chain(dx: f64, dy: f64, n: usize) -> Vec<Homography> {
        (0..=n)
            .map(|i| Homography::translation(dx * i as f64 / n as f64, dy * i as f64 / n as f64))
            .collect()
    }

    #[test]
    fn layout_cases() {
        let l = patch_layout(1280, 720, 160, 0.5).unwrap();
        assert_eq!(l.stride, 80);
        let l = patch_layout(720, 1280, 160, 0.5).unwrap();
        assert_eq!((l.cols(), l.rows()), (8, 15));
        assert_eq!(*l.xs.last().unwrap(), 560);
        assert_eq!(*l.ys.last().unwrap(), 1120);
        let l = patch_layout(160, 160, 160, 0.5).unwrap();
        assert_eq!(l.len(), 1);
        let l = patch_layout(300, 170, 160, 0.5).unwrap();
        assert_eq!(l.xs, vec![0, 80, 140]);
        assert_eq!(l.ys, vec![0, 10]);
        assert!(matches!(patch_layout(100, 200, 160, 0.5), Err(Error::PatchTooLarge { .. })));
        assert!(patch_layout(200, 200, 160, 1.0).is_err());
    }

    #[test]
    fn layout_covers_every_pixel() {
        for (w, h, p, o) in [(333, 211, 64, 0.5), (100, 100, 30, 0.0), (97, 180, 97, 0.25)] {
            let l = patch_layout(w, h, p, o).unwrap();
            let mut cover = vec![0u32; w * h];
            for r in l.rects() {
                for y in r.y..r.y + r.h {
                    for x in r.x..r.x + r.w {
                        cover[y * w + x] += 1;
                    }
                }
            }
            assert!(cover.iter().all(|c| *c >= 1));
        }
    }

    #[test]
    fn identity_gives_delta() {
        let k = render_kernel(&[Homography::identity(); 5], Point2::new(40.0, 30.0), 7).unwrap();
        assert!(k.is_delta());
        assert_eq!(k, BlurKernel::delta(7).unwrap());
    }

    #[test]
    fn horizontal_segment_matches_line_integral() {
        let k = render_kernel(&translation_chain(10.0, 0.0, 64), Point2::new(50.0, 50.0), 25).unwrap();
        // Oracle: integral of the unit tent around each tap over the segment [0, 10].
        let tent_integral = |j: f64| -> f64 {
            let n = 100_000;
            (0..n)
                .map(|i| {
                    let s = 10.0 * (i as f64 + 0.5) / n as f64;
                    (1.0 - (s - j).abs()).max(0.0)
                })
                .sum::<f64>()
                / n as f64
        };
        for dy in -12..=12isize {
            for dx in -12..=12isize {
                let w = k.at(dx, dy);
                if dy != 0 || !(0..=10).contains(&dx) {
                    assert_eq!(w, 0.0, "tap ({dx},{dy})");
                } else {
                    assert_abs_diff_eq!(w, tent_integral(dx as f64), epsilon = 1e-6);
                }
            }
        }
        assert_abs_diff_eq!(k.at(5, 0), 0.1, epsilon = 1e-9);
        assert_abs_diff_eq!(k.at(0, 0), 0.05, epsilon = 1e-9);
        assert_abs_diff_eq!(k.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn translation_kernel_is_shift_equivariant() {
        let hs = translation_chain(3.7, -2.2, 20);
        let a = render_kernel(&hs, Point2::new(10.0, 10.0), 11).unwrap();
        let b = render_kernel(&hs, Point2::new(500.5, -33.25), 11).unwrap();
        for (x, y) in a.weights().iter().zip(b.weights()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn kernel_errors() {
        let hs = translation_chain(10.0, 0.0, 10);
        assert!(matches!(
            render_kernel(&hs, Point2::origin(), 9),
            Err(Error::TrajectoryOutsideSupport { .. })
        ));
        assert!(matches!(render_kernel(&hs, Point2::origin(), 8), Err(Error::InvalidKernelSize(8))));
        assert!(matches!(render_kernel(&[], Point2::origin(), 9), Err(Error::EmptyHomographies)));
        assert!(BlurKernel::new(3, vec![0.5; 9]).is_err());
    }

    #[test]
    fn render_all_zero_gyro_and_rotation() {
        let zero = GyroSequence::constant(Vector3::zeros(), 10, 200.0).unwrap();
        let k = CameraIntrinsics::centered(800.0, 640, 480).unwrap();
        let layout = patch_layout(640, 480, 160, 0.5).unwrap();
        let grid = render_all(&zero, &k, &layout, 31).unwrap();
        assert_eq!(grid.kernels.len(), layout.len());
        assert_eq!((grid.rows, grid.cols), (5, 7));
        assert!(grid.kernels.iter().all(|k| k.is_delta()));

        let spin = GyroSequence::constant(Vector3::new(0.0, 0.0, 0.8), 10, 200.0).unwrap();
        let grid = render_all(&spin, &k, &layout, 61).unwrap();
        let spread = |kern: &BlurKernel| -> f64 {
            // second moment about the centroid
            let r = kern.radius() as isize;
            let (mut mx, mut my) = (0.0, 0.0);
            for dy in -r..=r {
                for dx in -r..=r {
                    mx += kern.at(dx, dy) * dx as f64;
                    my += kern.at(dx, dy) * dy as f64;
                }
            }
            let mut v = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    v += kern.at(dx, dy) * ((dx as f64 - mx).powi(2) + (dy as f64 - my).powi(2));
                }
            }
            v
        };
        // arc-length oracle: the trajectory of each patch center
        let hs = homography_chain(&spin, &k, 72, spin.exposure()).unwrap();
        let arc = |p: Point2<f64>| -> f64 {
            let q: Vec<_> = hs.iter().map(|h| warp_point(h, p).unwrap()).collect();
            q.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
        };
        let center_cell = (2, 3);
        let corner_cell = (0, 0);
        let mid = (1, 2);
        assert!(arc(layout.center(corner_cell.0, corner_cell.1)) > arc(layout.center(mid.0, mid.1)));
        assert!(arc(layout.center(mid.0, mid.1)) > arc(layout.center(center_cell.0, center_cell.1)));
        let s = |(r, c): (usize, usize)| spread(grid.get(r, c));
        assert!(s(corner_cell) > s(mid));
        assert!(s(mid) > s(center_cell));
        for kern in &grid.kernels {
            assert_abs_diff_eq!(kern.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-9);
            assert!(kern.weights().iter().all(|w| *w >= 0.0));
        }
    }

    #[test]
    fn rotation_about_patch_center_is_delta() {
        let k = CameraIntrinsics::new(500.0, 500.0, 79.5, 79.5).unwrap();
        let hs: Vec<_> = (0..9)
            .map(|i| homography(&k, &rotation_matrix(&Vector3::new(0.0, 0.0, 0.001 * i as f64))).unwrap())
            .collect();
        let kern = render_kernel(&hs, Point2::new(79.5, 79.5), 5).unwrap();
        assert!((kern.at(0, 0) - 1.0).abs() < 1e-9);
    }
}
