use crate::data::min_max;
use crate::error::{Error, Result};

/// Clamped B-spline basis on the range of a training sample.
///
/// The basis has `size` functions of degree `min(3, size - 1)`, with
/// interior knots at equispaced sample quantiles.
#[derive(Debug, Clone, PartialEq)]
pub struct BSplineBasis {
    degree: usize,
    size: usize,
    knots: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl BSplineBasis {
    pub fn from_sample(x: &[f64], size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::Input(format!("spline basis needs at least 2 functions, got {size}")));
        }
        let (lo, hi) = min_max(x);
        if !(hi > lo) {
            return Err(Error::Input("spline predictor is constant".into()));
        }
        let degree = size.saturating_sub(1).min(3);
        let n_interior = size - degree - 1;
        let mut sorted = x.to_vec();
        sorted.sort_by(f64::total_cmp);
        let interior: Vec<f64> = (1..=n_interior)
            .map(|j| quantile(&sorted, j as f64 / (n_interior + 1) as f64))
            .collect();
        let mut knots = vec![lo; degree + 1];
        knots.extend(interior);
        knots.extend(std::iter::repeat_n(hi, degree + 1));
        Ok(Self {
            degree,
            size,
            knots,
            lo,
            hi,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn interior_knots(&self) -> &[f64] {
        &self.knots[self.degree + 1..self.knots.len() - self.degree - 1]
    }

    /// Values of all basis functions at `x` (Cox–de Boor recursion).
    pub fn eval(&self, x: f64) -> Result<Vec<f64>> {
        let slack = 1e-9 * (self.hi - self.lo).abs().max(1.0);
        if !(x >= self.lo - slack && x <= self.hi + slack) {
            return Err(Error::OutOfRange {
                value: x,
                lo: self.lo,
                hi: self.hi,
            });
        }
        let x = x.clamp(self.lo, self.hi);
        let t = &self.knots;
        let p = self.degree;
        // Knot span: largest mu with t[mu] <= x < t[mu+1], restricted to the
        // valid range so the right end belongs to the last span.
        let mut mu = p;
        while mu + 1 < self.size && t[mu + 1] <= x {
            mu += 1;
        }
        let mut n = vec![0.0; p + 1];
        n[0] = 1.0;
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        for j in 1..=p {
            left[j] = x - t[mu + 1 - j];
            right[j] = t[mu + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let tmp = if denom > 0.0 { n[r] / denom } else { 0.0 };
                n[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            n[j] = saved;
        }
        let mut out = vec![0.0; self.size];
        for (r, v) in n.into_iter().enumerate() {
            out[mu - p + r] = v;
        }
        Ok(out)
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin() * 2.0).collect();
        for size in [2, 3, 4, 6, 10] {
            let b = BSplineBasis::from_sample(&x, size).unwrap();
            for q in [-1.99f64, -0.5, 0.0, 0.7, 1.2, 1.9999] {
                let v = b.eval(q.clamp(b.range().0, b.range().1)).unwrap();
                assert_eq!(v.len(), size);
                assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(v.iter().all(|w| *w >= -1e-15));
            }
            let (_, hi) = b.range();
            assert!((b.eval(hi).unwrap()[size - 1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degree_follows_size() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        assert_eq!(BSplineBasis::from_sample(&x, 3).unwrap().degree(), 2);
        assert_eq!(BSplineBasis::from_sample(&x, 10).unwrap().degree(), 3);
        assert_eq!(BSplineBasis::from_sample(&x, 10).unwrap().interior_knots().len(), 6);
    }

    #[test]
    fn outside_range_fails() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let b = BSplineBasis::from_sample(&x, 5).unwrap();
        assert!(b.eval(25.0).is_err());
    }
}
