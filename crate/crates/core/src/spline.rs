//! Natural cubic spline through scalar samples.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct NaturalCubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots; zero at both ends.
    m: Vec<f64>,
}

impl NaturalCubicSpline {
    /// Fits the spline. `xs` must be strictly increasing and have at least two entries.
    pub fn new(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n < 2 {
            return Err(Error::TooFewSamples { need: 2, got: n });
        }
        if ys.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} knots but {} values",
                n,
                ys.len()
            )));
        }
        for i in 1..n {
            if !(xs[i] > xs[i - 1]) {
                return Err(Error::NonMonotoneTimestamps { index: i });
            }
        }

        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior knots.
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for j in 0..k {
                let i = j + 1;
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                diag[j] = 2.0 * (h0 + h1);
                upper[j] = h1;
                rhs[j] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
            }
            for j in 1..k {
                let lower = xs[j + 1] - xs[j];
                let w = lower / diag[j - 1];
                diag[j] -= w * upper[j - 1];
                rhs[j] -= w * rhs[j - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for j in (0..k - 1).rev() {
                m[j + 1] = (rhs[j] - upper[j] * m[j + 2]) / diag[j];
            }
        }

        Ok(Self {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            m,
        })
    }

    /// Evaluates at `x`. Outside the knot range the end segments are extended.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = match self.xs.binary_search_by(|k| k.total_cmp(&x)) {
            Ok(i) => return self.ys[i],
            Err(0) => 0,
            Err(i) if i >= n => n - 2,
            Err(i) => i - 1,
        };
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn reproduces_constants_and_lines() {
        let xs = [0.0, 0.3, 0.5, 1.2, 2.0];
        let c = NaturalCubicSpline::new(&xs, &[0.7; 5]).unwrap();
        let l = NaturalCubicSpline::new(&xs, &xs.map(|x| 2.0 * x - 1.0)).unwrap();
        for i in 0..=40 {
            let x = i as f64 * 0.05;
            assert_abs_diff_eq!(c.eval(x), 0.7, epsilon = 1e-14);
            assert_abs_diff_eq!(l.eval(x), 2.0 * x - 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn interpolates_knots_exactly() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, -2.0, 0.5, 4.0];
        let s = NaturalCubicSpline::new(&xs, &ys).unwrap();
        for (x, y) in xs.iter().zip(ys) {
            assert_eq!(s.eval(*x), y);
        }
    }

    #[test]
    fn natural_end_conditions() {
        // Known solution for equally spaced knots (0,0),(1,1),(2,0):
        // interior second derivative is -3.
        let s = NaturalCubicSpline::new(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(s.m[1], -3.0, epsilon = 1e-14);
        assert_eq!(s.m[0], 0.0);
        assert_eq!(s.m[2], 0.0);
        // S(0.5) = 0.5 + (0.125 - 0.5) * (-3) / 6
        assert_abs_diff_eq!(s.eval(0.5), 0.6875, epsilon = 1e-14);
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(NaturalCubicSpline::new(&[0.0], &[1.0]).is_err());
        assert!(matches!(
            NaturalCubicSpline::new(&[0.0, 1.0, 1.0], &[0.0; 3]),
            Err(Error::NonMonotoneTimestamps { index: 2 })
        ));
    }
}
