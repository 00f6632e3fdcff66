//! Small least-squares kernels shared by the smoothers and additive fits.

use nalgebra::{DMatrix, DVector};

/// Relative tolerance used to decide that a column of a local design adds
/// no new direction.
pub(crate) const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LocalSolveError {
    /// Even the constant column carries no weight.
    ConstantUnsupported,
}

/// Weighted least squares at one query point, returning the linear map from
/// the neighbourhood responses to the fitted intercept.
///
/// `design` is column-major with `k` rows and `p` columns; the first column
/// must be the constant. Columns that are numerically dependent on earlier
/// ones are dropped in order, so higher-order terms go first. The returned
/// row `l` satisfies `fit = sum_j l[j] * y[j]` and the second value is the
/// number of columns kept.
pub(crate) fn local_intercept_row(
    design: &mut [f64],
    weights: &[f64],
    k: usize,
    p: usize,
) -> Result<(Vec<f64>, usize), LocalSolveError> {
    debug_assert_eq!(design.len(), k * p);
    debug_assert_eq!(weights.len(), k);

    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    for j in 0..p {
        let col = &mut design[j * k..(j + 1) * k];
        for (a, s) in col.iter_mut().zip(&sqrt_w) {
            *a *= s;
        }
    }

    // Householder vectors (stored over rows r..k) and R columns.
    let mut reflectors: Vec<(usize, Vec<f64>, f64)> = Vec::with_capacity(p);
    let mut r_cols: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut rank = 0usize;

    for j in 0..p {
        let col = &mut design[j * k..(j + 1) * k];
        let original_norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (start, v, beta) in &reflectors {
            apply_reflector(col, *start, v, *beta);
        }
        if rank >= k {
            if j == 0 {
                return Err(LocalSolveError::ConstantUnsupported);
            }
            continue;
        }
        let sub_norm = col[rank..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if original_norm == 0.0 || sub_norm <= RANK_TOL * original_norm {
            if j == 0 {
                return Err(LocalSolveError::ConstantUnsupported);
            }
            continue;
        }
        let alpha = if col[rank] > 0.0 { -sub_norm } else { sub_norm };
        let mut v: Vec<f64> = col[rank..].to_vec();
        v[0] -= alpha;
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        let beta = if vtv > 0.0 { 2.0 / vtv } else { 0.0 };
        let mut rc = col[..rank].to_vec();
        rc.push(alpha);
        r_cols.push(rc);
        reflectors.push((rank, v, beta));
        rank += 1;
    }

    // Solve R^T a = e_0 by forward substitution.
    let mut a = vec![0.0; rank];
    for i in 0..rank {
        let mut s = if i == 0 { 1.0 } else { 0.0 };
        for (m, am) in a.iter().enumerate().take(i) {
            s -= r_cols[i][m] * am;
        }
        a[i] = s / r_cols[i][i];
    }

    // row = sqrt(W) * Q [a; 0]
    let mut v = vec![0.0; k];
    v[..rank].copy_from_slice(&a);
    for (start, h, beta) in reflectors.iter().rev() {
        apply_reflector(&mut v, *start, h, *beta);
    }
    for (x, s) in v.iter_mut().zip(&sqrt_w) {
        *x *= s;
    }
    Ok((v, rank))
}

fn apply_reflector(x: &mut [f64], start: usize, v: &[f64], beta: f64) {
    let seg = &mut x[start..];
    let dot: f64 = seg.iter().zip(v).map(|(a, b)| a * b).sum();
    let s = beta * dot;
    for (a, b) in seg.iter_mut().zip(v) {
        *a -= s * b;
    }
}

/// Minimum-norm least squares via SVD.
#[derive(Debug, Clone)]
pub(crate) struct LeastSquares {
    pub coefficients: Vec<f64>,
    pub rank: usize,
}

pub(crate) fn min_norm_lstsq(design: &DMatrix<f64>, y: &[f64]) -> LeastSquares {
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = RANK_TOL * smax.max(f64::MIN_POSITIVE);
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    let rhs = DVector::from_column_slice(y);
    let coefficients = svd
        .solve(&rhs, tol)
        .map(|c| c.iter().cloned().collect())
        .unwrap_or_else(|_| vec![0.0; design.ncols()]);
    LeastSquares { coefficients, rank }
}

/// Simple linear regression `y ~ a + b x`, returning `(a, b, fitted)`.
pub(crate) fn simple_ols(x: &[f64], y: &[f64]) -> (f64, f64, Vec<f64>) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let fitted = x.iter().map(|v| intercept + slope * v).collect();
    (intercept, slope, fitted)
}
