//! Monotone piecewise-cubic Hermite interpolation (Fritsch-Carlson).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl MonotoneCubic {
    /// Interpolant through `(xs, ys)` with derivative estimates from the data.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        assert!(n >= 2 && ys.len() == n);
        let secants: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])).collect();
        let mut ds = vec![0.0; n];
        ds[0] = secants[0];
        ds[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            ds[i] = if secants[i - 1] * secants[i] <= 0.0 { 0.0 } else { 0.5 * (secants[i - 1] + secants[i]) };
        }
        Self::limited(xs, ys, ds, &secants)
    }

    /// Interpolant through `(xs, ys)` with known derivatives `ds`. Intervals
    /// whose end slopes agree in sign with the secant are kept monotone;
    /// intervals holding a smooth extremum keep the exact slopes.
    pub fn with_slopes(xs: Vec<f64>, ys: Vec<f64>, mut ds: Vec<f64>) -> Self {
        let n = xs.len();
        assert!(n >= 2 && ys.len() == n && ds.len() == n);
        for i in 0..n - 1 {
            let s = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
            if s == 0.0 || ds[i] * s < 0.0 || ds[i + 1] * s < 0.0 {
                continue;
            }
            let a = ds[i] / s;
            let b = ds[i + 1] / s;
            let r2 = a * a + b * b;
            if r2 > 9.0 {
                let t = 3.0 / r2.sqrt();
                ds[i] = t * a * s;
                ds[i + 1] = t * b * s;
            }
        }
        Self { xs, ys, ds }
    }

    fn limited(xs: Vec<f64>, ys: Vec<f64>, mut ds: Vec<f64>, secants: &[f64]) -> Self {
        for (i, &s) in secants.iter().enumerate() {
            if s == 0.0 {
                ds[i] = 0.0;
                ds[i + 1] = 0.0;
                continue;
            }
            if ds[i] * s < 0.0 {
                ds[i] = 0.0;
            }
            if ds[i + 1] * s < 0.0 {
                ds[i + 1] = 0.0;
            }
            let a = ds[i] / s;
            let b = ds[i + 1] / s;
            let r2 = a * a + b * b;
            if r2 > 9.0 {
                let t = 3.0 / r2.sqrt();
                ds[i] = t * a * s;
                ds[i + 1] = t * b * s;
            }
        }
        Self { xs, ys, ds }
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn slopes(&self) -> &[f64] {
        &self.ds
    }

    pub fn x_min(&self) -> f64 {
        self.xs[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    fn interval(&self, x: f64) -> usize {
        let n = self.xs.len();
        match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// Value at `x`; linear extrapolation with the end slopes outside the data.
    pub fn eval(&self, x: f64) -> f64 {
        let i = self.interval(x);
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (y0, y1, d0, d1) = (self.ys[i], self.ys[i + 1], self.ds[i], self.ds[i + 1]);
        if t < 0.0 {
            return y0 + d0 * (x - x0);
        }
        if t > 1.0 {
            return y1 + d1 * (x - x1);
        }
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * d1
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let i = self.interval(x);
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let t = ((x - x0) / h).clamp(0.0, 1.0);
        let (y0, y1, d0, d1) = (self.ys[i], self.ys[i + 1], self.ds[i], self.ds[i + 1]);
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * y0 + (-6.0 * t2 + 6.0 * t) * y1) / h
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (3.0 * t2 - 2.0 * t) * d1
    }
}
