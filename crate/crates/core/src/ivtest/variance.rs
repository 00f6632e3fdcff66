use serde::{Deserialize, Serialize};

use super::{combine_instruments, StructuralRoles, TestConfig};
use crate::error::{Error, Result};
use crate::Dataset;

/// Binned estimate of `E Var(Y | Zc) - E Var(Y | Z1, Z2)` where `Zc` is the
/// combined first stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceGap {
    pub given_combined: f64,
    pub given_pair: f64,
    pub difference: f64,
    pub std_error: f64,
}

impl VarianceGap {
    /// Difference in units of its standard error.
    pub fn z_score(&self) -> f64 {
        self.difference / self.std_error
    }
}

/// Conditional variances are estimated within equal-count bins: `bins`
/// bins along the combined instrument, and a `grid x grid` layout of
/// instrument-pair cells (quantile strips of `Z1`, split by quantiles of
/// `Z2`). Within each bin a linear trend is removed so the estimate is not
/// inflated by variation of the conditional mean across the bin.
///
/// The standard error treats the two averages as independent means of
/// per-observation squared residuals.
pub fn conditional_variance_gap(
    data: &Dataset,
    roles: &StructuralRoles,
    cfg: &TestConfig,
    bins: usize,
    grid: usize,
) -> Result<VarianceGap> {
    let combined = combine_instruments(data, roles, cfg)?;
    let (a, b) = roles.instrument_pair()?;
    let z1 = data.column(a)?;
    let z2 = data.column(b)?;
    let y = data.column(&roles.outcome)?;
    let n = y.len();
    if bins == 0 || grid == 0 || n < 8 * bins.max(grid * grid) {
        return Err(Error::Input(format!(
            "{n} rows are too few for {bins} bins and a {grid}x{grid} grid"
        )));
    }

    let mut c1 = vec![0.0; n];
    let order = sorted_by(&combined.values, (0..n).collect());
    for chunk in split_even(&order, bins) {
        detrended_squares(chunk, &[&combined.values], y, &mut c1)?;
    }

    let mut c2 = vec![0.0; n];
    let order = sorted_by(z1, (0..n).collect());
    for strip in split_even(&order, grid) {
        let strip = sorted_by(z2, strip.to_vec());
        for cell in split_even(&strip, grid) {
            detrended_squares(cell, &[z1, z2], y, &mut c2)?;
        }
    }

    let (m1, v1) = mean_var(&c1);
    let (m2, v2) = mean_var(&c2);
    Ok(VarianceGap {
        given_combined: m1,
        given_pair: m2,
        difference: m1 - m2,
        std_error: (v1 / n as f64 + v2 / n as f64).sqrt(),
    })
}

fn sorted_by(key: &[f64], mut idx: Vec<usize>) -> Vec<usize> {
    idx.sort_by(|&i, &j| key[i].total_cmp(&key[j]).then(i.cmp(&j)));
    idx
}

fn split_even(idx: &[usize], parts: usize) -> Vec<&[usize]> {
    let n = idx.len();
    (0..parts)
        .map(|p| &idx[p * n / parts..(p + 1) * n / parts])
        .collect()
}

/// Writes `r_i^2 * m / (m - p)` for the residuals of an OLS fit of `y` on
/// an intercept plus `xs` within the bin.
fn detrended_squares(bin: &[usize], xs: &[&[f64]], y: &[f64], out: &mut [f64]) -> Result<()> {
    let m = bin.len();
    let p = xs.len() + 1;
    if m <= p {
        return Err(Error::Input(format!("bin with {m} rows cannot hold {p} parameters")));
    }
    let design = nalgebra::DMatrix::from_fn(m, p, |r, c| if c == 0 { 1.0 } else { xs[c - 1][bin[r]] });
    let ys: Vec<f64> = bin.iter().map(|&i| y[i]).collect();
    let ls = crate::linalg::min_norm_lstsq(&design, &ys);
    let scale = m as f64 / (m - ls.rank) as f64;
    for (r, &i) in bin.iter().enumerate() {
        let fit: f64 = (0..p).map(|c| design[(r, c)] * ls.coefficients[c]).sum();
        let res = ys[r] - fit;
        out[i] = res * res * scale;
    }
    Ok(())
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var)
}
