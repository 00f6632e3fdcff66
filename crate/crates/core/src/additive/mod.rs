//! Additive regression `E[y | x_1, ..., x_m] = c + f_1(x_1) + ... + f_m(x_m)`.
//!
//! Two engines are provided. [`backfit`] alternately smooths partial
//! residuals with the local polynomial smoother; [`direct_ls_additive`]
//! expands every predictor in a B-spline basis and solves a single joint
//! least-squares problem. Both return an [`AdditiveFit`] whose components
//! are mean-zero over the training sample.

mod backfit;
mod bspline;
mod direct;

pub use backfit::{backfit, BACKFIT_MAX_ITER, BACKFIT_TOL};
pub use bspline::BSplineBasis;
pub use direct::{direct_ls_additive, spline_design, DEFAULT_BASIS_SIZE};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smoothers::{predict_line, SmootherConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdditiveMethod {
    Backfitting,
    DirectLeastSquares,
}

/// Outcome of the backfitting sweeps. Direct fits report a single
/// converged iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub iterations: usize,
    pub final_change: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankDiagnostic {
    pub rank: usize,
    pub columns: usize,
}

impl RankDiagnostic {
    pub fn deficient(&self) -> bool {
        self.rank < self.columns
    }
}

#[derive(Debug, Clone)]
enum ComponentRepr {
    Spline {
        basis: BSplineBasis,
        coefficients: Vec<f64>,
        column_means: Vec<f64>,
    },
    Smooth {
        x: Vec<f64>,
        partial_residuals: Vec<f64>,
        config: SmootherConfig,
        offset: f64,
    },
}

/// One additive term: its values at the training points and a way to
/// evaluate it inside the training range.
#[derive(Debug, Clone)]
pub struct Component {
    values: Vec<f64>,
    repr: ComponentRepr,
}

impl Component {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, q: f64) -> Result<f64> {
        match &self.repr {
            ComponentRepr::Spline {
                basis,
                coefficients,
                column_means,
            } => {
                let b = basis.eval(q)?;
                Ok(b.iter()
                    .zip(column_means)
                    .zip(coefficients)
                    .map(|((v, m), c)| (v - m) * c)
                    .sum())
            }
            ComponentRepr::Smooth {
                x,
                partial_residuals,
                config,
                offset,
            } => Ok(predict_line(x, partial_residuals, config, q)? - offset),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdditiveFit {
    intercept: f64,
    components: Vec<Component>,
    response: Vec<f64>,
    fitted: Vec<f64>,
    residuals: Vec<f64>,
    effective_df: f64,
    method: AdditiveMethod,
    convergence: Convergence,
    rank: Option<RankDiagnostic>,
}

impl AdditiveFit {
    fn assemble(
        intercept: f64,
        components: Vec<Component>,
        y: &[f64],
        effective_df: f64,
        method: AdditiveMethod,
        convergence: Convergence,
        rank: Option<RankDiagnostic>,
    ) -> Self {
        let mut fitted = vec![intercept; y.len()];
        for c in &components {
            for (f, v) in fitted.iter_mut().zip(&c.values) {
                *f += v;
            }
        }
        let residuals = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
        Self {
            intercept,
            components,
            response: y.to_vec(),
            fitted,
            residuals,
            effective_df,
            method,
            convergence,
            rank,
        }
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn component(&self, j: usize) -> &Component {
        &self.components[j]
    }

    pub fn fitted(&self) -> &[f64] {
        &self.fitted
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn effective_df(&self) -> f64 {
        self.effective_df
    }

    pub fn method(&self) -> AdditiveMethod {
        self.method
    }

    pub fn convergence(&self) -> Convergence {
        self.convergence
    }

    /// Rank of the joint spline design; `None` for backfitted fits.
    pub fn rank(&self) -> Option<RankDiagnostic> {
        self.rank
    }

    pub fn n(&self) -> usize {
        self.fitted.len()
    }

    pub fn rss(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }

    /// Evaluates `intercept + sum_j f_j(q_j)`.
    pub fn predict(&self, q: &[f64]) -> Result<f64> {
        if q.len() != self.components.len() {
            return Err(Error::Input(format!(
                "expected {} predictor values, got {}",
                self.components.len(),
                q.len()
            )));
        }
        let mut v = self.intercept;
        for (c, &x) in self.components.iter().zip(q) {
            v += c.eval(x)?;
        }
        Ok(v)
    }
}

/// Engine used wherever a procedure needs an additive fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "engine", rename_all = "kebab-case")]
pub enum AdditiveEngine {
    Backfit {
        smoother: SmootherConfig,
        tol: f64,
        max_iter: usize,
    },
    DirectLs {
        basis_size: usize,
    },
}

impl Default for AdditiveEngine {
    fn default() -> Self {
        AdditiveEngine::DirectLs {
            basis_size: DEFAULT_BASIS_SIZE,
        }
    }
}

impl AdditiveEngine {
    pub fn backfit_default() -> Self {
        AdditiveEngine::Backfit {
            smoother: SmootherConfig::default(),
            tol: BACKFIT_TOL,
            max_iter: BACKFIT_MAX_ITER,
        }
    }

    pub fn fit(&self, predictors: &[&[f64]], y: &[f64]) -> Result<AdditiveFit> {
        match *self {
            AdditiveEngine::Backfit {
                ref smoother,
                tol,
                max_iter,
            } => backfit(predictors, y, smoother, tol, max_iter),
            AdditiveEngine::DirectLs { basis_size } => direct_ls_additive(predictors, y, basis_size),
        }
    }
}

pub(crate) fn check_inputs(predictors: &[&[f64]], y: &[f64]) -> Result<()> {
    if predictors.is_empty() {
        return Err(Error::Input("additive fit needs at least one predictor".into()));
    }
    for (j, x) in predictors.iter().enumerate() {
        if x.len() != y.len() {
            return Err(Error::Input(format!(
                "predictor {j} has {} rows but response has {}",
                x.len(),
                y.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input(format!("predictor {j} has non-finite values")));
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("response has non-finite values".into()));
    }
    Ok(())
}
