//! Dense reference implementations used as oracles by the integration and
//! acceptance tests. They share no code with the library beyond its public
//! types.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semiiv::smoothers::{Kernel, SmootherConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(r: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(lo..hi)).collect()
}

fn kernel_weight(kernel: Kernel, u: f64) -> f64 {
    if u >= 1.0 {
        return 0.0;
    }
    match kernel {
        Kernel::Tricube => (1.0 - u.powi(3)).powi(3),
        Kernel::Epanechnikov => 1.0 - u.powi(2),
        Kernel::Uniform => 1.0,
    }
}

fn sample_sd(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Weighted least squares by SVD; returns the coefficient vector.
fn wls(design: DMatrix<f64>, w: &[f64], y: &[f64]) -> DVector<f64> {
    let mut a = design;
    let mut b = DVector::from_column_slice(y);
    for (i, wi) in w.iter().enumerate() {
        let s = wi.sqrt();
        a.row_mut(i).scale_mut(s);
        b[i] *= s;
    }
    a.svd(true, true).solve(&b, 1e-13).expect("svd solve")
}

/// Local polynomial prediction at `q` from `points` (each a coordinate
/// vector in the neighbourhood metric) with the monomial basis in raw
/// offsets from `q`.
fn local_fit(points: &[Vec<f64>], y: &[f64], q: &[f64], cfg: &SmootherConfig) -> f64 {
    let n = points.len();
    let dist: Vec<f64> = points
        .iter()
        .map(|p| p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .collect();
    let mut sorted = dist.clone();
    sorted.sort_by(f64::total_cmp);
    let k = ((cfg.span * n as f64).ceil() as usize).min(n);
    let dk = sorted[k - 1];
    let h = dk * 1.001;
    let members: Vec<usize> = (0..n).filter(|&i| dist[i] <= dk).collect();
    let terms = |p: &[f64]| -> Vec<f64> {
        let d: Vec<f64> = p.iter().zip(q).map(|(a, b)| a - b).collect();
        let mut t = vec![1.0];
        if cfg.degree >= 1 {
            t.extend(d.iter().copied());
        }
        if cfg.degree >= 2 {
            for i in 0..d.len() {
                for j in i..d.len() {
                    t.push(d[i] * d[j]);
                }
            }
        }
        t
    };
    let p = terms(q).len();
    let design = DMatrix::from_fn(members.len(), p, |r, c| terms(&points[members[r]])[c]);
    let w: Vec<f64> = members.iter().map(|&i| kernel_weight(cfg.kernel, dist[i] / h)).collect();
    let ys: Vec<f64> = members.iter().map(|&i| y[i]).collect();
    wls(design, &w, &ys)[0]
}

pub fn oracle_line(x: &[f64], y: &[f64], cfg: &SmootherConfig, q: f64) -> f64 {
    let pts: Vec<Vec<f64>> = x.iter().map(|&v| vec![v]).collect();
    local_fit(&pts, y, &[q], cfg)
}

pub fn oracle_plane(x1: &[f64], x2: &[f64], y: &[f64], cfg: &SmootherConfig, q: (f64, f64)) -> f64 {
    let (s1, s2) = (sample_sd(x1), sample_sd(x2));
    let pts: Vec<Vec<f64>> = x1.iter().zip(x2).map(|(a, b)| vec![a / s1, b / s2]).collect();
    local_fit(&pts, y, &[q.0 / s1, q.1 / s2], cfg)
}

/// Trace of the smoother matrix whose columns are dense-oracle fits to unit
/// responses.
pub fn materialized_trace(x: &[f64], cfg: &SmootherConfig) -> f64 {
    let n = x.len();
    (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            oracle_line(x, &e, cfg, x[j])
        })
        .sum()
}

/// Least-squares fitted values for an additive cubic spline model written in
/// the truncated power basis with the given interior knots per predictor.
pub fn truncated_power_fit(predictors: &[&[f64]], knots: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
    for (x, ks) in predictors.iter().zip(knots) {
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let t = |v: f64| (v - lo) / (hi - lo);
        for p in 1..=3 {
            cols.push(x.iter().map(|&v| t(v).powi(p)).collect());
        }
        for &k in ks {
            cols.push(x.iter().map(|&v| (t(v) - t(k)).max(0.0).powi(3)).collect());
        }
    }
    let design = DMatrix::from_fn(n, cols.len(), |r, c| cols[c][r]);
    let beta = wls(design.clone(), &vec![1.0; n], y);
    (design * beta).iter().copied().collect()
}

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

pub fn centred(v: &[f64]) -> Vec<f64> {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - m).collect()
}
