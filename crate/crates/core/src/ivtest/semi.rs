use serde::{Deserialize, Serialize};

use super::{control_function_residual, first_stage, StructuralRoles, TestConfig};
use crate::additive::{AdditiveMethod, Convergence};
use crate::error::Result;
use crate::scoring::{bic_score, permutation_bootstrap, residual_sum, BootstrapOptions, BootstrapResult, FitScore};
use crate::smoothers::{fit_surface, surface_matrix, SmootherConfig};
use crate::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Additivity,
    Measurability,
}

/// Surface fit of `Y` on `(X, Z)` against additive fit of `Y` on `(X, e_X)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditivityStage {
    pub surface: FitScore,
    pub additive: FitScore,
    pub additive_method: AdditiveMethod,
    pub convergence: Convergence,
    /// `additive.bic < surface.bic`
    pub accepted: bool,
}

impl AdditivityStage {
    /// `additive.bic - surface.bic`; negative values favour additivity.
    pub fn bic_gap(&self) -> f64 {
        self.additive.bic - self.surface.bic
    }
}

/// Residual sums of squares of `Y` on `(Z, e_X)` (`r_a`) and on
/// `(E[X|Z], e_X)` (`r_n`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurabilityStage {
    pub r_a: f64,
    pub r_n: f64,
    pub bootstrap: Option<BootstrapResult>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiInstrumentReport {
    pub instrument: String,
    pub n: usize,
    pub additivity: AdditivityStage,
    pub measurability: MeasurabilityStage,
    pub accepted: bool,
    pub failed_stages: Vec<Stage>,
}

pub fn additivity_test(data: &Dataset, roles: &StructuralRoles, cfg: &TestConfig) -> Result<AdditivityStage> {
    roles.validate(data)?;
    let z = data.column(roles.instrument()?)?;
    let x = data.column(&roles.treatment)?;
    let y = data.column(&roles.outcome)?;
    let first = control_function_residual(data, roles, cfg)?;
    let surface = fit_surface(x, z, y, &cfg.smoother)?;
    let additive = cfg.engine.fit(&[x, &first.e_x], y)?;
    let surface = bic_score(&surface)?;
    let additive_score = bic_score(&additive)?;
    Ok(AdditivityStage {
        accepted: additive_score.bic < surface.bic,
        surface,
        additive: additive_score,
        additive_method: additive.method(),
        convergence: additive.convergence(),
    })
}

/// Compares surface fits of `y` on `(alt, e_x)` and `(null, e_x)`.
///
/// Without a bootstrap the null is rejected iff `r_a < r_n`. With one, it
/// is rejected iff the upper-tail p-value of `r_n - r_a` is below `alpha`.
pub fn compare_residual_sums(
    alt: &[f64],
    null: &[f64],
    e_x: &[f64],
    y: &[f64],
    smoother: &SmootherConfig,
    bootstrap: Option<&BootstrapOptions>,
    alpha: f64,
) -> Result<MeasurabilityStage> {
    match bootstrap {
        None => {
            let r_a = residual_sum(&fit_surface(alt, e_x, y, smoother)?);
            let r_n = residual_sum(&fit_surface(null, e_x, y, smoother)?);
            Ok(MeasurabilityStage {
                r_a,
                r_n,
                bootstrap: None,
                accepted: r_a >= r_n,
            })
        }
        Some(opts) => {
            if opts.replicates < BootstrapOptions::MIN_REPLICATES {
                return Err(crate::Error::Input(format!(
                    "bootstrap needs at least {} replicates, got {}",
                    BootstrapOptions::MIN_REPLICATES,
                    opts.replicates
                )));
            }
            let alt_m = surface_matrix(alt, e_x, smoother)?;
            let null_m = surface_matrix(null, e_x, smoother)?;
            let boot = permutation_bootstrap(&alt_m, &null_m, y, opts);
            Ok(MeasurabilityStage {
                r_a: alt_m.rss(y),
                r_n: null_m.rss(y),
                accepted: boot.p_value >= alpha,
                bootstrap: Some(boot),
            })
        }
    }
}

pub fn measurability_test(data: &Dataset, roles: &StructuralRoles, cfg: &TestConfig) -> Result<MeasurabilityStage> {
    roles.validate(data)?;
    let z = data.column(roles.instrument()?)?;
    let x = data.column(&roles.treatment)?;
    let y = data.column(&roles.outcome)?;
    let first = first_stage(z, x, &cfg.smoother)?;
    compare_residual_sums(z, &first.x_hat, &first.e_x, y, &cfg.smoother, cfg.bootstrap.as_ref(), cfg.alpha)
}

/// Additivity test followed by measurability test; the candidate is
/// accepted as a semi-instrument iff both stages accept. Both stages always
/// run so the report carries every score.
pub fn semi_instrument_test(data: &Dataset, roles: &StructuralRoles, cfg: &TestConfig) -> Result<SemiInstrumentReport> {
    let additivity = additivity_test(data, roles, cfg)?;
    let measurability = measurability_test(data, roles, cfg)?;
    let mut failed_stages = Vec::new();
    if !additivity.accepted {
        failed_stages.push(Stage::Additivity);
    }
    if !measurability.accepted {
        failed_stages.push(Stage::Measurability);
    }
    Ok(SemiInstrumentReport {
        instrument: roles.instrument()?.to_string(),
        n: data.n_rows(),
        accepted: failed_stages.is_empty(),
        additivity,
        measurability,
        failed_stages,
    })
}
