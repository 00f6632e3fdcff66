use serde::{Deserialize, Serialize};

use super::semi::{semi_instrument_test, SemiInstrumentReport};
use super::{StructuralRoles, TestConfig};
use crate::additive::Convergence;
use crate::data::{correlation, mean, min_max, std_dev};
use crate::error::{Error, Result};
use crate::scoring::{bic_score, LinearFit};
use crate::smoothers::{fit_univariate, SmootherFit};
use crate::Dataset;

/// Statistics closer than this to zero are flagged as weak evidence.
pub const WEAK_EVIDENCE_BAND: f64 = 2.0;

/// Name of the combined instrument column handed to the semi-instrument test.
const COMBINED_COLUMN: &str = "combined_instrument";

/// How the two first-stage functions are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CombineMethod {
    /// One additive regression of `X` on both instruments.
    #[default]
    Joint,
    /// Two separate univariate smooths of `X`.
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub sd: f64,
}

impl ComponentSummary {
    fn of(v: &[f64]) -> Self {
        let (min, max) = min_max(v);
        Self {
            min,
            max,
            mean: mean(v),
            sd: std_dev(v),
        }
    }
}

/// `f1(Z1) + f2(Z2)` together with the pieces it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedInstrument {
    pub method: CombineMethod,
    pub instruments: (String, String),
    pub first: ComponentSummary,
    pub second: ComponentSummary,
    pub convergence: Option<Convergence>,
    #[serde(skip)]
    pub values: Vec<f64>,
    #[serde(skip)]
    pub first_values: Vec<f64>,
    #[serde(skip)]
    pub second_values: Vec<f64>,
}

fn check_pair<'a>(data: &'a Dataset, roles: &StructuralRoles) -> Result<(&'a [f64], &'a [f64])> {
    let (a, b) = roles.instrument_pair()?;
    if a == b {
        return Err(Error::Input(format!("instrument `{a}` is bound twice")));
    }
    roles.validate(data)?;
    let z1 = data.column(a)?;
    let z2 = data.column(b)?;
    if z1 == z2 || correlation(z1, z2).abs() >= 1.0 - 1e-12 {
        return Err(Error::Input(format!(
            "instruments `{a}` and `{b}` are perfectly dependent; two independent instruments are required"
        )));
    }
    Ok((z1, z2))
}

/// Builds `f1(Z1) + f2(Z2)` with `f1`, `f2` the mean-centred components of
/// the first-stage regression of `X`.
pub fn combine_instruments(data: &Dataset, roles: &StructuralRoles, cfg: &TestConfig) -> Result<CombinedInstrument> {
    let (z1, z2) = check_pair(data, roles)?;
    let x = data.column(&roles.treatment)?;
    let (first, second, convergence) = match cfg.combine {
        CombineMethod::Joint => {
            let fit = cfg.engine.fit(&[z1, z2], x)?;
            (
                fit.component(0).values().to_vec(),
                fit.component(1).values().to_vec(),
                Some(fit.convergence()),
            )
        }
        CombineMethod::Marginal => {
            let centred = |z: &[f64]| -> Result<Vec<f64>> {
                let fit = fit_univariate(z, x, &cfg.smoother)?;
                let m = mean(fit.fitted());
                Ok(fit.fitted().iter().map(|v| v - m).collect())
            };
            (centred(z1)?, centred(z2)?, None)
        }
    };
    let values = first.iter().zip(&second).map(|(a, b)| a + b).collect();
    let (a, b) = roles.instrument_pair()?;
    Ok(CombinedInstrument {
        method: cfg.combine,
        instruments: (a.to_string(), b.to_string()),
        first: ComponentSummary::of(&first),
        second: ComponentSummary::of(&second),
        convergence,
        values,
        first_values: first,
        second_values: second,
    })
}

/// Semi-instrument test applied to the combined instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralDoubleReport {
    pub combination: CombinedInstrument,
    pub semi: SemiInstrumentReport,
    pub accepted: bool,
}

/// Tests whether two semi-instruments share a linear coefficient by
/// testing their combination for semi-instrumentality. A rejection does not
/// say which of the two is at fault.
pub fn double_instrument_test(data: &Dataset, roles: &StructuralRoles, cfg: &TestConfig) -> Result<GeneralDoubleReport> {
    let combination = combine_instruments(data, roles, cfg)?;
    let ds = Dataset::new()
        .with_column(COMBINED_COLUMN, combination.values.clone())?
        .with_column(roles.treatment.clone(), data.column(&roles.treatment)?.to_vec())?
        .with_column(roles.outcome.clone(), data.column(&roles.outcome)?.to_vec())?;
    let semi_roles = StructuralRoles::single(COMBINED_COLUMN, &roles.treatment, &roles.outcome);
    let semi = semi_instrument_test(&ds, &semi_roles, cfg)?;
    Ok(GeneralDoubleReport {
        accepted: semi.accepted,
        combination,
        semi,
    })
}

/// Linear-effect variant comparing a linear regression of `Y` on the
/// combined first stage with an additive regression of `Y` on both
/// instruments.
///
/// A `None` BIC marks an exact fit (residual sum of squares at the
/// interpolation floor), which beats any finite score; two exact fits are
/// ordered by their degrees of freedom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleInstrumentReport {
    pub instruments: (String, String),
    pub n: usize,
    pub first: ComponentSummary,
    pub second: ComponentSummary,
    pub first_stage_convergence: Convergence,
    pub outcome_convergence: Convergence,
    pub slope: f64,
    pub rss_l: f64,
    pub rss_a: f64,
    pub df_l: f64,
    pub df_a: f64,
    pub bic_l: Option<f64>,
    pub bic_a: Option<f64>,
    /// `bic_a - bic_l`; positive values favour equal coefficients.
    pub statistic: Option<f64>,
    pub weak_evidence: bool,
    pub accepted: bool,
}

fn optional_bic<F: crate::scoring::ScoredFit>(fit: &F) -> Result<Option<f64>> {
    match bic_score(fit) {
        Ok(s) => Ok(Some(s.bic)),
        Err(Error::Interpolation { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn linear_double_instrument_test(
    data: &Dataset,
    roles: &StructuralRoles,
    cfg: &TestConfig,
) -> Result<DoubleInstrumentReport> {
    let (z1, z2) = check_pair(data, roles)?;
    let x = data.column(&roles.treatment)?;
    let y = data.column(&roles.outcome)?;

    let first_stage = cfg.engine.fit(&[z1, z2], x)?;
    let combined = first_stage.fitted();
    let linear = LinearFit::new(combined, y)?;
    let additive = cfg.engine.fit(&[z1, z2], y)?;

    let bic_l = optional_bic(&linear)?;
    let bic_a = optional_bic(&additive)?;
    let df_l = 2.0;
    let df_a = additive.effective_df();
    let statistic = match (bic_l, bic_a) {
        (Some(l), Some(a)) => Some(a - l),
        _ => None,
    };
    let accepted = match (bic_l, bic_a) {
        (Some(l), Some(a)) => l < a,
        (None, Some(_)) => true,
        (Some(_), None) => false,
        (None, None) => df_l < df_a,
    };
    let (a, b) = roles.instrument_pair()?;
    Ok(DoubleInstrumentReport {
        instruments: (a.to_string(), b.to_string()),
        n: y.len(),
        first: ComponentSummary::of(first_stage.component(0).values()),
        second: ComponentSummary::of(first_stage.component(1).values()),
        first_stage_convergence: first_stage.convergence(),
        outcome_convergence: additive.convergence(),
        slope: linear.slope,
        rss_l: crate::scoring::residual_sum(&linear),
        rss_a: additive.rss(),
        df_l,
        df_a,
        bic_l,
        bic_a,
        weak_evidence: statistic.is_some_and(|s| s.abs() < WEAK_EVIDENCE_BAND),
        statistic,
        accepted,
    })
}
