//! Versioned JSON envelopes and plain-text summaries for test reports.

use std::fmt::Write as _;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ivtest::{
    DoubleInstrumentReport, GeneralDoubleReport, SemiInstrumentReport, Stage, TestConfig,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema_version: u32,
    pub kind: String,
    pub config: TestConfig,
    pub report: T,
}

impl<T: Serialize + DeserializeOwned> Envelope<T> {
    pub fn new(kind: &str, config: TestConfig, report: T) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: kind.to_string(),
            config,
            report,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let env: Self = serde_json::from_str(text).map_err(|e| Error::Input(format!("malformed report: {e}")))?;
        if env.schema_version != SCHEMA_VERSION {
            return Err(Error::Input(format!(
                "unsupported report schema version {} (expected {SCHEMA_VERSION})",
                env.schema_version
            )));
        }
        Ok(env)
    }
}

fn verdict(accepted: bool) -> &'static str {
    if accepted {
        "ACCEPT"
    } else {
        "REJECT"
    }
}

pub fn semi_summary(r: &SemiInstrumentReport) -> String {
    let mut s = String::new();
    let a = &r.additivity;
    let m = &r.measurability;
    let _ = writeln!(s, "semi-instrument test for `{}` (n = {})", r.instrument, r.n);
    let _ = writeln!(
        s,
        "  additivity:    surface BIC {:.3} (df {:.2}) vs additive BIC {:.3} (df {:.2}) -> {}",
        a.surface.bic,
        a.surface.df,
        a.additive.bic,
        a.additive.df,
        verdict(a.accepted)
    );
    if !a.convergence.converged {
        let _ = writeln!(
            s,
            "                 additive fit did not converge ({} sweeps, last change {:.3e})",
            a.convergence.iterations, a.convergence.final_change
        );
    }
    let _ = write!(
        s,
        "  measurability: R_A {:.4} vs R_N {:.4}",
        m.r_a, m.r_n
    );
    if let Some(b) = &m.bootstrap {
        let _ = write!(s, ", bootstrap p = {:.4} ({} replicates)", b.p_value, b.count);
    }
    let _ = writeln!(s, " -> {}", verdict(m.accepted));
    let failed: Vec<&str> = r
        .failed_stages
        .iter()
        .map(|st| match st {
            Stage::Additivity => "additivity",
            Stage::Measurability => "measurability",
        })
        .collect();
    if failed.is_empty() {
        let _ = writeln!(s, "  decision: {} (semi-instrument)", verdict(true));
    } else {
        let _ = writeln!(s, "  decision: {} (failed: {})", verdict(false), failed.join(", "));
    }
    s
}

pub fn general_double_summary(r: &GeneralDoubleReport) -> String {
    let mut s = String::new();
    let (a, b) = &r.combination.instruments;
    let _ = writeln!(
        s,
        "double-instrument test for `{a}` + `{b}` ({:?} first stage)",
        r.combination.method
    );
    s.push_str(&semi_summary(&r.semi));
    let _ = writeln!(
        s,
        "  same linear coefficient: {}",
        verdict(r.accepted)
    );
    s
}

fn fmt_bic(b: Option<f64>) -> String {
    b.map_or_else(|| "exact fit".to_string(), |v| format!("{v:.3}"))
}

pub fn linear_double_summary(r: &DoubleInstrumentReport) -> String {
    let mut s = String::new();
    let (a, b) = &r.instruments;
    let _ = writeln!(s, "linear double-instrument test for `{a}` + `{b}` (n = {})", r.n);
    let _ = writeln!(s, "  BIC_l (linear, df {:.0}): {}", r.df_l, fmt_bic(r.bic_l));
    let _ = writeln!(s, "  BIC_a (additive, df {:.2}): {}", r.df_a, fmt_bic(r.bic_a));
    match r.statistic {
        Some(v) => {
            let _ = writeln!(s, "  BIC_a - BIC_l = {v:.3}{}", if r.weak_evidence { " (weak evidence)" } else { "" });
        }
        None => {
            let _ = writeln!(s, "  BIC_a - BIC_l undefined (exact fit)");
        }
    }
    let _ = writeln!(s, "  decision: {} (same linear coefficients)", verdict(r.accepted));
    s
}
