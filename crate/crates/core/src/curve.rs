//! Sampled scalar curves with cubic Hermite evaluation.
//!
//! Integrator output arrives as `(x, y, y')` triples on a non-uniform grid.
//! Since the derivative is part of the state, piecewise cubic Hermite
//! interpolation is available for free and carries an `O(h^4)` error, which
//! keeps interpolation noise far below the integration tolerances used here.

use alloc::vec::Vec;

/// A sampled function together with its first derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCurve {
    /// Strictly increasing abscissas.
    pub x: Vec<f64>,
    /// Function values.
    pub y: Vec<f64>,
    /// First derivatives.
    pub dy: Vec<f64>,
}

impl SampledCurve {
    /// Builds a curve from `(x, y, dy)` triples; panics on unsorted input.
    pub fn from_triples(samples: impl IntoIterator<Item = (f64, f64, f64)>) -> Self {
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut dy = Vec::new();
        for (a, b, c) in samples {
            if let Some(&last) = x.last() {
                assert!(a > last, "sample abscissas must be strictly increasing");
            }
            x.push(a);
            y.push(b);
            dy.push(c);
        }
        Self { x, y, dy }
    }

    /// Domain of definition `[x_first, x_last]`.
    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    /// Cubic Hermite evaluation of `(y, y')` at `xq`; `None` outside the domain.
    pub fn eval(&self, xq: f64) -> Option<(f64, f64)> {
        let (lo, hi) = self.domain();
        if xq < lo || xq > hi {
            return None;
        }
        // partition_point returns the first index with x > xq
        let j = self.x.partition_point(|&v| v <= xq);
        if j == 0 {
            return Some((self.y[0], self.dy[0]));
        }
        if j == self.x.len() {
            let n = self.x.len() - 1;
            return Some((self.y[n], self.dy[n]));
        }
        let (i0, i1) = (j - 1, j);
        let h = self.x[i1] - self.x[i0];
        let s = (xq - self.x[i0]) / h;
        let (y0, y1) = (self.y[i0], self.y[i1]);
        let (d0, d1) = (self.dy[i0] * h, self.dy[i1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let v = h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1;
        let dh00 = 6.0 * s2 - 6.0 * s;
        let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
        let dh01 = -dh00;
        let dh11 = 3.0 * s2 - 2.0 * s;
        let dv = (dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1) / h;
        Some((v, dv))
    }

    /// Function value only.
    pub fn value(&self, xq: f64) -> Option<f64> {
        self.eval(xq).map(|(v, _)| v)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    #[cfg_attr(test, allow(unused_imports))]
    use num_traits::Float;

    #[test]
    fn reproduces_cubics_exactly() {
        // Hermite cubics are exact on cubic polynomials.
        let f = |x: f64| 2.0 * x * x * x - x * x + 0.5 * x - 3.0;
        let df = |x: f64| 6.0 * x * x - 2.0 * x + 0.5;
        let curve = SampledCurve::from_triples((0..7).map(|i| {
            let x = i as f64 * 0.37;
            (x, f(x), df(x))
        }));
        for k in 0..50 {
            let xq = 0.01 + k as f64 * 0.044;
            let (v, dv) = curve.eval(xq).unwrap();
            assert!((v - f(xq)).abs() < 1e-12, "value at {xq}");
            assert!((dv - df(xq)).abs() < 1e-10, "slope at {xq}");
        }
    }

    #[test]
    fn fourth_order_on_smooth_functions() {
        let sample = |h: f64| {
            SampledCurve::from_triples((0..=((2.0 / h) as usize)).map(|i| {
                let x = i as f64 * h;
                (x, x.sin(), x.cos())
            }))
        };
        let err = |c: &SampledCurve| {
            let mut worst: f64 = 0.0;
            for k in 0..500 {
                let xq = 1e-3 + k as f64 * (1.9 / 500.0);
                worst = worst.max((c.value(xq).unwrap() - xq.sin()).abs());
            }
            worst
        };
        let e1 = err(&sample(0.1));
        let e2 = err(&sample(0.05));
        assert!(e1 / e2 > 12.0, "expected ~16x error drop, got {}", e1 / e2);
    }

    #[test]
    fn outside_domain_is_none() {
        let c = SampledCurve::from_triples([(0.0, 0.0, 1.0), (1.0, 1.0, 1.0)]);
        assert!(c.eval(-0.1).is_none());
        assert!(c.eval(1.1).is_none());
        assert_eq!(c.value(0.0), Some(0.0));
        assert_eq!(c.value(1.0), Some(1.0));
    }
}
