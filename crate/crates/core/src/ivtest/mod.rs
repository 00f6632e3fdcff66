//! Instrument admissibility procedures.
//!
//! * [`control_function_residual`] and [`estimate_causal_effect`]: the
//!   first-stage residual `e_X = X - E[X|Z]` and the additive regression of
//!   `Y` on `(X, e_X)` that recovers the effect of `X` up to a constant.
//! * [`semi_instrument_test`]: additivity test followed by measurability
//!   test for a single candidate instrument.
//! * [`double_instrument_test`] and [`linear_double_instrument_test`]:
//!   whether two candidates share the same linear coefficient.
//!
//! All procedures are pure functions of the dataset and configuration.

mod double;
mod semi;
mod variance;

pub use double::{
    combine_instruments, double_instrument_test, linear_double_instrument_test, CombineMethod, CombinedInstrument,
    ComponentSummary, DoubleInstrumentReport, GeneralDoubleReport, WEAK_EVIDENCE_BAND,
};
pub use semi::{
    additivity_test, compare_residual_sums, measurability_test, semi_instrument_test, AdditivityStage,
    MeasurabilityStage, SemiInstrumentReport, Stage,
};
pub use variance::{conditional_variance_gap, VarianceGap};

use serde::{Deserialize, Serialize};

use crate::additive::{AdditiveEngine, Component, Convergence};
use crate::data::{mean, min_max};
use crate::error::{Error, Result};
use crate::scoring::BootstrapOptions;
use crate::smoothers::{fit_univariate, SmootherConfig, SmootherFit};
use crate::Dataset;

/// Minimum sample size for the first-stage regression.
pub const MIN_FIRST_STAGE_ROWS: usize = 30;

/// Significance level for bootstrap decisions.
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Column bindings: candidate instrument(s), treatment `X`, outcome `Y`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralRoles {
    pub instruments: Vec<String>,
    pub treatment: String,
    pub outcome: String,
}

impl StructuralRoles {
    pub fn single(instrument: &str, treatment: &str, outcome: &str) -> Self {
        Self {
            instruments: vec![instrument.to_string()],
            treatment: treatment.to_string(),
            outcome: outcome.to_string(),
        }
    }

    pub fn pair(first: &str, second: &str, treatment: &str, outcome: &str) -> Self {
        Self {
            instruments: vec![first.to_string(), second.to_string()],
            treatment: treatment.to_string(),
            outcome: outcome.to_string(),
        }
    }

    /// Checks that names are distinct and present in `data`.
    pub fn validate(&self, data: &Dataset) -> Result<()> {
        if self.instruments.is_empty() {
            return Err(Error::Input("at least one instrument column is required".into()));
        }
        let mut names: Vec<&str> = self.instruments.iter().map(String::as_str).collect();
        names.push(&self.treatment);
        names.push(&self.outcome);
        for (i, a) in names.iter().enumerate() {
            if names[i + 1..].contains(a) {
                return Err(Error::Input(format!("column `{a}` is bound to more than one role")));
            }
        }
        for name in names {
            data.column(name)?;
        }
        Ok(())
    }

    /// The single instrument name, or an error when more than one is bound.
    pub fn instrument(&self) -> Result<&str> {
        match self.instruments.as_slice() {
            [z] => Ok(z),
            _ => Err(Error::Input(format!(
                "expected exactly one instrument, got {}",
                self.instruments.len()
            ))),
        }
    }

    pub fn instrument_pair(&self) -> Result<(&str, &str)> {
        match self.instruments.as_slice() {
            [a, b] => Ok((a, b)),
            _ => Err(Error::Input(format!(
                "expected exactly two instruments, got {}",
                self.instruments.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    /// First-stage and surface smoother.
    pub smoother: SmootherConfig,
    /// Additive smoother for `Y` on `(X, e_X)` and the double-instrument fits.
    pub engine: AdditiveEngine,
    pub combine: CombineMethod,
    pub bootstrap: Option<BootstrapOptions>,
    pub alpha: f64,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            smoother: SmootherConfig::default(),
            engine: AdditiveEngine::default(),
            combine: CombineMethod::Joint,
            bootstrap: None,
            alpha: DEFAULT_ALPHA,
        }
    }
}

impl TestConfig {
    pub fn with_engine(mut self, engine: AdditiveEngine) -> Self {
        self.engine = engine;
        self
    }

    pub fn with_bootstrap(mut self, opts: BootstrapOptions) -> Self {
        self.bootstrap = Some(opts);
        self
    }
}

/// First-stage output.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstStage {
    pub e_x: Vec<f64>,
    pub x_hat: Vec<f64>,
}

/// Smooths `X` on the single instrument `Z`.
///
/// The residual is re-centred to mean zero and the shift moved into
/// `x_hat`, so `x_hat + e_x == X` still holds.
pub fn control_function_residual(data: &Dataset, roles: &StructuralRoles, cfg: &TestConfig) -> Result<FirstStage> {
    let z = roles.instrument()?;
    let z = data.column(z)?;
    let x = data.column(&roles.treatment)?;
    first_stage(z, x, &cfg.smoother)
}

pub(crate) fn first_stage(z: &[f64], x: &[f64], smoother: &SmootherConfig) -> Result<FirstStage> {
    if z.len() < MIN_FIRST_STAGE_ROWS {
        return Err(Error::Input(format!(
            "first stage needs at least {MIN_FIRST_STAGE_ROWS} rows, got {}",
            z.len()
        )));
    }
    let fit = fit_univariate(z, x, smoother)?;
    let shift = mean(fit.residuals());
    let e_x: Vec<f64> = fit.residuals().iter().map(|r| r - shift).collect();
    let x_hat: Vec<f64> = x.iter().zip(&e_x).map(|(a, e)| a - e).collect();
    Ok(FirstStage { e_x, x_hat })
}

/// Additive decomposition `E[Y | X, e_X] = c + s(X) + h(e_X)`.
#[derive(Debug, Clone)]
pub struct CausalEffectEstimate {
    pub intercept: f64,
    effect: Component,
    control: Component,
    pub e_x: Vec<f64>,
    pub convergence: Convergence,
    x_range: (f64, f64),
    e_range: (f64, f64),
}

impl CausalEffectEstimate {
    /// Mean-centred effect of `X`, evaluable on the observed range of `X`.
    pub fn effect(&self, x: f64) -> Result<f64> {
        self.effect.eval(x)
    }

    /// Mean-centred control term, evaluable on the observed range of `e_X`.
    pub fn control(&self, e: f64) -> Result<f64> {
        self.control.eval(e)
    }

    pub fn effect_values(&self) -> &[f64] {
        self.effect.values()
    }

    pub fn control_values(&self) -> &[f64] {
        self.control.values()
    }

    pub fn x_range(&self) -> (f64, f64) {
        self.x_range
    }

    pub fn e_range(&self) -> (f64, f64) {
        self.e_range
    }
}

/// Control-function estimate of the effect of `X` on `Y`. The instrument is
/// assumed valid here, not tested.
pub fn estimate_causal_effect(data: &Dataset, roles: &StructuralRoles, cfg: &TestConfig) -> Result<CausalEffectEstimate> {
    roles.validate(data)?;
    let first = control_function_residual(data, roles, cfg)?;
    let x = data.column(&roles.treatment)?;
    let y = data.column(&roles.outcome)?;
    let fit = cfg.engine.fit(&[x, &first.e_x], y)?;
    Ok(CausalEffectEstimate {
        intercept: fit.intercept(),
        effect: fit.component(0).clone(),
        control: fit.component(1).clone(),
        convergence: fit.convergence(),
        x_range: min_max(x),
        e_range: min_max(&first.e_x),
        e_x: first.e_x,
    })
}
