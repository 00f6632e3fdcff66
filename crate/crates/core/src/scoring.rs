//! Model scores: Gaussian-profile BIC, residual sums of squares and the
//! residual-permutation bootstrap for the measurability statistic.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::additive::AdditiveFit;
use crate::data::variance;
use crate::error::{Error, Result};
use crate::ivtest::{control_function_residual, StructuralRoles, TestConfig};
use crate::smoothers::{surface_matrix, SmootherFit, SurfaceFit, UnivariateFit};
use crate::Dataset;

/// Anything with a sample size, residuals and an effective number of
/// parameters.
pub trait ScoredFit {
    fn n(&self) -> usize;
    fn residuals(&self) -> &[f64];
    fn response(&self) -> &[f64];
    fn df(&self) -> f64;
}

impl ScoredFit for UnivariateFit {
    fn n(&self) -> usize {
        SmootherFit::n(self)
    }
    fn residuals(&self) -> &[f64] {
        SmootherFit::residuals(self)
    }
    fn response(&self) -> &[f64] {
        SmootherFit::response(self)
    }
    fn df(&self) -> f64 {
        self.effective_df()
    }
}

impl ScoredFit for SurfaceFit {
    fn n(&self) -> usize {
        SmootherFit::n(self)
    }
    fn residuals(&self) -> &[f64] {
        SmootherFit::residuals(self)
    }
    fn response(&self) -> &[f64] {
        SmootherFit::response(self)
    }
    fn df(&self) -> f64 {
        self.effective_df()
    }
}

impl ScoredFit for AdditiveFit {
    fn n(&self) -> usize {
        AdditiveFit::n(self)
    }
    fn residuals(&self) -> &[f64] {
        AdditiveFit::residuals(self)
    }
    fn response(&self) -> &[f64] {
        AdditiveFit::response(self)
    }
    fn df(&self) -> f64 {
        self.effective_df()
    }
}

/// Ordinary least-squares line `y = a + b x` with two parameters.
#[derive(Debug, Clone)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    response: Vec<f64>,
    residuals: Vec<f64>,
}

impl LinearFit {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Input("linear regression inputs differ in length".into()));
        }
        let (intercept, slope, fitted) = crate::linalg::simple_ols(x, y);
        let residuals = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
        Ok(Self {
            intercept,
            slope,
            response: y.to_vec(),
            residuals,
        })
    }
}

impl ScoredFit for LinearFit {
    fn n(&self) -> usize {
        self.response.len()
    }
    fn residuals(&self) -> &[f64] {
        &self.residuals
    }
    fn response(&self) -> &[f64] {
        &self.response
    }
    fn df(&self) -> f64 {
        2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitScore {
    pub n: usize,
    pub rss: f64,
    pub df: f64,
    pub bic: f64,
}

impl FitScore {
    /// `bic = n ln(rss / n) + df ln(n)`.
    ///
    /// `floor` is the smallest admissible residual sum of squares; at or
    /// below it the fit interpolates and the score is undefined.
    pub fn new(n: usize, rss: f64, df: f64, floor: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::Input(format!("BIC needs at least 3 observations, got {n}")));
        }
        if !(rss.is_finite() && rss >= 0.0) || !(df.is_finite() && df >= 0.0) {
            return Err(Error::Input(format!("invalid rss {rss} or df {df}")));
        }
        if rss <= floor {
            return Err(Error::Interpolation { rss, floor });
        }
        let nf = n as f64;
        Ok(Self {
            n,
            rss,
            df,
            bic: nf * (rss / nf).ln() + df * nf.ln(),
        })
    }
}

/// Interpolation floor `1e-12 * var(y) * n`.
pub fn rss_floor(y: &[f64]) -> f64 {
    1e-12 * variance(y) * y.len() as f64
}

/// Residual sum of squares.
///
/// The measurability comparison is phrased in terms of a "sum of the
/// residuals"; a raw sum is close to zero for any least-squares-type fit,
/// so the sum of squares is used throughout.
pub fn residual_sum<F: ScoredFit + ?Sized>(fit: &F) -> f64 {
    fit.residuals().iter().map(|r| r * r).sum()
}

pub fn bic_score<F: ScoredFit + ?Sized>(fit: &F) -> Result<FitScore> {
    FitScore::new(fit.n(), residual_sum(fit), fit.df(), rss_floor(fit.response()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Resampling {
    /// Uniformly random permutation per replicate.
    #[default]
    Permutation,
    /// Every replicate reuses the residuals in their original order.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub resampling: Resampling,
}

impl BootstrapOptions {
    pub const MIN_REPLICATES: usize = 100;

    pub fn new(replicates: usize, seed: u64) -> Self {
        Self {
            replicates,
            seed,
            resampling: Resampling::Permutation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub observed: f64,
    pub replicates: Vec<f64>,
    pub p_value: f64,
    pub count: usize,
    pub tail: Tail,
}

impl BootstrapResult {
    /// p-value as the fraction of replicates at least as extreme as the
    /// observed value. Differences within `tie_tol` count as ties, which
    /// are extreme.
    pub fn from_replicates(observed: f64, replicates: Vec<f64>, tail: Tail, tie_tol: f64) -> Self {
        let hits = replicates
            .iter()
            .filter(|&&r| match tail {
                Tail::Upper => r >= observed - tie_tol,
                Tail::Lower => r <= observed + tie_tol,
            })
            .count();
        let count = replicates.len();
        let p_value = if count == 0 { 1.0 } else { hits as f64 / count as f64 };
        Self {
            observed,
            replicates,
            p_value,
            count,
            tail,
        }
    }
}

/// Residual-permutation bootstrap of `R_N - R_A`.
///
/// `R_A` and `R_N` are the residual sums of squares of surface fits of `Y`
/// on `(Z, e_X)` and on `(E[X|Z], e_X)`. Replicate responses add permuted
/// null-fit residuals to the null-fit fitted values. The first stage only
/// involves `Z` and `X`, so both surface smoothers are fixed linear maps
/// and each replicate costs two matrix-vector products.
///
/// Replicate `b` draws its permutation from its own ChaCha stream, so the
/// replicate list does not depend on evaluation order.
pub fn bootstrap_measurability(
    data: &Dataset,
    roles: &StructuralRoles,
    cfg: &TestConfig,
    opts: &BootstrapOptions,
) -> Result<BootstrapResult> {
    if opts.replicates < BootstrapOptions::MIN_REPLICATES {
        return Err(Error::Input(format!(
            "bootstrap needs at least {} replicates, got {}",
            BootstrapOptions::MIN_REPLICATES,
            opts.replicates
        )));
    }
    let first = control_function_residual(data, roles, cfg)?;
    let z = data.column(roles.instrument()?)?;
    let y = data.column(&roles.outcome)?;
    let alt = surface_matrix(z, &first.e_x, &cfg.smoother)?;
    let null = surface_matrix(&first.x_hat, &first.e_x, &cfg.smoother)?;
    Ok(permutation_bootstrap(&alt, &null, y, opts))
}

pub(crate) fn permutation_bootstrap(
    alt: &crate::smoothers::SmootherMatrix,
    null: &crate::smoothers::SmootherMatrix,
    y: &[f64],
    opts: &BootstrapOptions,
) -> BootstrapResult {
    let r_a = alt.rss(y);
    let r_n = null.rss(y);
    let observed = r_n - r_a;
    let fitted = null.apply(y);
    let resid: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let replicates: Vec<f64> = (0..opts.replicates)
        .into_par_iter()
        .map(|b| {
            let mut idx: Vec<usize> = (0..y.len()).collect();
            if opts.resampling == Resampling::Permutation {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(b as u64);
                idx.shuffle(&mut rng);
            }
            let y_star: Vec<f64> = fitted.iter().zip(&idx).map(|(f, &i)| f + resid[i]).collect();
            null.rss(&y_star) - alt.rss(&y_star)
        })
        .collect();
    let tie_tol = 1e-9 * r_a.abs().max(r_n.abs()).max(f64::MIN_POSITIVE);
    BootstrapResult::from_replicates(observed, replicates, Tail::Upper, tie_tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bic_formula() {
        let s = FitScore::new(100, 100.0, 3.0, 0.0).unwrap();
        assert!((s.bic - 3.0 * 100f64.ln()).abs() < 1e-12);
        assert!((s.bic - 13.815510557964274).abs() < 1e-12);
        let s0 = FitScore::new(100, 100.0, 0.0, 0.0).unwrap();
        assert_eq!(s0.bic, 0.0);
    }

    #[test]
    fn bic_monotone() {
        let a = FitScore::new(50, 10.0, 2.0, 0.0).unwrap();
        let b = FitScore::new(50, 12.0, 4.0, 0.0).unwrap();
        assert!(a.bic < b.bic);
    }

    #[test]
    fn interpolation_floor() {
        assert!(matches!(FitScore::new(10, 0.0, 2.0, 0.0), Err(Error::Interpolation { .. })));
        assert!(matches!(FitScore::new(10, 1e-20, 2.0, 1e-15), Err(Error::Interpolation { .. })));
        assert!(FitScore::new(2, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn residual_sum_is_sum_of_squares() {
        let fit = LinearFit {
            intercept: 0.0,
            slope: 0.0,
            response: vec![1.0, -1.0, 2.0],
            residuals: vec![1.0, -1.0, 2.0],
        };
        assert_eq!(residual_sum(&fit), 6.0);
        assert_eq!(bic_score(&fit).unwrap().rss, residual_sum(&fit));
    }

    #[test]
    fn perfect_fit_has_zero_residual_sum() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        let fit = LinearFit::new(&x, &y).unwrap();
        assert!(residual_sum(&fit) < 1e-20);
        assert!(matches!(bic_score(&fit), Err(Error::Interpolation { .. })));
    }

    #[test]
    fn p_value_counts_ties() {
        let r = BootstrapResult::from_replicates(1.0, vec![0.5, 1.0, 2.0, 0.0], Tail::Upper, 0.0);
        assert_eq!(r.p_value, 0.5);
        assert_eq!(r.count, 4);
        let r = BootstrapResult::from_replicates(1.0, vec![0.5, 1.0, 2.0, 0.0], Tail::Lower, 0.0);
        assert_eq!(r.p_value, 0.75);
    }
}
