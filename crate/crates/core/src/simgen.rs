//! Seeded generators for additive structural models
//!
//! ```text
//! X = sum_j f_j(Z_j) + e_X,   e_X = a(T) + N(0, sd_x^2)
//! Y = s(X) + sum_j g_j(Z_j) + e_Y,   e_Y = b(T) + k e_X + N(0, sd_y^2)
//! ```
//!
//! with a latent confounder `T`. Every random column draws from its own
//! ChaCha20 stream of the seed (see [`stream`]), so a column's draws do not
//! depend on which other columns are generated or in what order. Two specs
//! that differ only in their structural functions therefore share every
//! noise draw.
//!
//! The latent and noise columns are returned separately from the observed
//! data, under the `truth.` prefix, so procedures never see them by
//! accident.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};
use crate::Dataset;

/// Prefix for latent and noise columns.
pub const TRUTH_PREFIX: &str = "truth.";

/// Stream ids of the random columns.
pub mod stream {
    /// Instrument `j` (0-based) uses stream `INSTRUMENT + j`.
    pub const INSTRUMENT: u64 = 1;
    pub const LATENT: u64 = 100;
    pub const X_NOISE: u64 = 101;
    pub const Y_NOISE: u64 = 102;
}

fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dist {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
}

impl Dist {
    fn check(&self) -> Result<()> {
        match *self {
            Dist::Uniform { lo, hi } if lo < hi && lo.is_finite() && hi.is_finite() => Ok(()),
            Dist::Normal { mean, sd } if mean.is_finite() && sd.is_finite() && sd >= 0.0 => Ok(()),
            d => Err(Error::Spec(format!("invalid distribution {d:?}"))),
        }
    }

    fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<f64> {
        match *self {
            Dist::Uniform { lo, hi } => {
                let d = Uniform::new(lo, hi);
                (0..n).map(|_| d.sample(rng)).collect()
            }
            Dist::Normal { mean, sd } => normal(mean, sd, n, rng),
        }
    }
}

fn normal(mean: f64, sd: f64, n: usize, rng: &mut impl Rng) -> Vec<f64> {
    if sd == 0.0 {
        return vec![mean; n];
    }
    let d = Normal::new(mean, sd).expect("finite non-negative sd");
    (0..n).map(|_| d.sample(rng)).collect()
}

/// A named univariate structural function.
#[derive(Clone)]
pub struct StructuralFn {
    label: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl StructuralFn {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn zero() -> Self {
        Self::new("0", |_| 0.0)
    }

    pub fn linear(a: f64, b: f64) -> Self {
        Self::new(format!("{a}*t + {b}"), move |t| a * t + b)
    }

    pub fn power(c: f64, p: i32) -> Self {
        Self::new(format!("{c}*t^{p}"), move |t| c * t.powi(p))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    fn eval_all(&self, what: &str, t: &[f64]) -> Result<Vec<f64>> {
        t.iter()
            .map(|&v| {
                let r = self.eval(v);
                if r.is_finite() {
                    Ok(r)
                } else {
                    Err(Error::Spec(format!("{what} = {} is not finite at {v}", self.label)))
                }
            })
            .collect()
    }
}

impl fmt::Debug for StructuralFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("StructuralFn").field(&self.label).finish()
    }
}

#[derive(Debug, Clone)]
pub struct InstrumentSpec {
    pub name: String,
    pub dist: Dist,
    /// Effect on `X`.
    pub f: StructuralFn,
    /// Direct effect on `Y`.
    pub g: StructuralFn,
}

#[derive(Debug, Clone)]
pub struct StructuralSpec {
    pub n: usize,
    pub seed: u64,
    pub instruments: Vec<InstrumentSpec>,
    pub latent: Dist,
    pub x_latent: StructuralFn,
    pub x_noise_sd: f64,
    pub y_latent: StructuralFn,
    /// Loading of `e_X` in `e_Y`.
    pub y_from_x_noise: f64,
    pub y_noise_sd: f64,
    /// Effect of `X` on `Y`.
    pub s: StructuralFn,
}

/// Observed columns plus the hidden truth.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSample {
    pub data: Dataset,
    /// `truth.T`, `truth.eps_x`, `truth.eps_y`.
    pub truth: Dataset,
}

impl GeneratedSample {
    /// Observed and truth columns in one dataset.
    pub fn with_truth(&self) -> Dataset {
        let mut ds = self.data.clone();
        for c in self.truth.columns() {
            ds.push(c.name.clone(), c.values.clone())
                .expect("truth columns are distinct and row-aligned");
        }
        ds
    }

    pub fn truth_column(&self, name: &str) -> &[f64] {
        self.truth
            .column(&format!("{TRUTH_PREFIX}{name}"))
            .expect("generated samples carry every truth column")
    }
}

pub fn gen_custom(spec: &StructuralSpec) -> Result<GeneratedSample> {
    if spec.n == 0 {
        return Err(Error::Spec("sample size must be at least 1".into()));
    }
    if spec.instruments.is_empty() {
        return Err(Error::Spec("at least one instrument is required".into()));
    }
    for sd in [spec.x_noise_sd, spec.y_noise_sd] {
        if !(sd.is_finite() && sd >= 0.0) {
            return Err(Error::Spec(format!("invalid noise sd {sd}")));
        }
    }
    spec.latent.check()?;
    let n = spec.n;

    let mut data = Dataset::new();
    let mut x_part = vec![0.0; n];
    let mut y_part = vec![0.0; n];
    for (j, inst) in spec.instruments.iter().enumerate() {
        inst.dist.check()?;
        let z = inst.dist.sample(n, &mut rng_for(spec.seed, stream::INSTRUMENT + j as u64));
        for (acc, v) in x_part.iter_mut().zip(inst.f.eval_all("f", &z)?) {
            *acc += v;
        }
        for (acc, v) in y_part.iter_mut().zip(inst.g.eval_all("g", &z)?) {
            *acc += v;
        }
        data.push(inst.name.clone(), z)?;
    }

    let t = spec.latent.sample(n, &mut rng_for(spec.seed, stream::LATENT));
    let nx = normal(0.0, spec.x_noise_sd, n, &mut rng_for(spec.seed, stream::X_NOISE));
    let ny = normal(0.0, spec.y_noise_sd, n, &mut rng_for(spec.seed, stream::Y_NOISE));
    let ax = spec.x_latent.eval_all("x_latent", &t)?;
    let ay = spec.y_latent.eval_all("y_latent", &t)?;
    let eps_x: Vec<f64> = ax.iter().zip(&nx).map(|(a, b)| a + b).collect();
    let eps_y: Vec<f64> = (0..n)
        .map(|i| ay[i] + spec.y_from_x_noise * eps_x[i] + ny[i])
        .collect();
    let x: Vec<f64> = x_part.iter().zip(&eps_x).map(|(a, b)| a + b).collect();
    let sx = spec.s.eval_all("s", &x)?;
    let y: Vec<f64> = (0..n).map(|i| sx[i] + y_part[i] + eps_y[i]).collect();
    data.push("X", x)?;
    data.push("Y", y)?;

    let truth = Dataset::new()
        .with_column(format!("{TRUTH_PREFIX}T"), t)?
        .with_column(format!("{TRUTH_PREFIX}eps_x"), eps_x)?
        .with_column(format!("{TRUTH_PREFIX}eps_y"), eps_y)?;
    Ok(GeneratedSample { data, truth })
}

/// Shared confounding structure of both simulation studies:
/// `T ~ U(0, 2)`, `e_X = T + N(0, 0.5^2)`, `e_Y = T^2 + N(0, 0.5^2)`.
fn confounded(n: usize, seed: u64, instruments: Vec<InstrumentSpec>, s: StructuralFn) -> StructuralSpec {
    StructuralSpec {
        n,
        seed,
        instruments,
        latent: Dist::Uniform { lo: 0.0, hi: 2.0 },
        x_latent: StructuralFn::linear(1.0, 0.0),
        x_noise_sd: 0.5,
        y_latent: StructuralFn::power(1.0, 2),
        y_from_x_noise: 0.0,
        y_noise_sd: 0.5,
        s,
    }
}

/// Spec for `Z ~ U(0, 5)`, `X = Z^2 + e_X`, `Y = X^2 + c Z^3 + e_Y`.
pub fn single_instrument_spec(c: f64, n: usize, seed: u64) -> StructuralSpec {
    confounded(
        n,
        seed,
        vec![InstrumentSpec {
            name: "Z".into(),
            dist: Dist::Uniform { lo: 0.0, hi: 5.0 },
            f: StructuralFn::power(1.0, 2),
            g: StructuralFn::power(c, 3),
        }],
        StructuralFn::power(1.0, 2),
    )
}

/// Spec for `Z1, Z2 ~ U(0, 4)`, `X = Z1^2 + Z2^2 + e_X`, `Y = X + c Z2^2 + e_Y`.
pub fn double_instrument_spec(c: f64, n: usize, seed: u64) -> StructuralSpec {
    let inst = |name: &str, g: StructuralFn| InstrumentSpec {
        name: name.into(),
        dist: Dist::Uniform { lo: 0.0, hi: 4.0 },
        f: StructuralFn::power(1.0, 2),
        g,
    };
    confounded(
        n,
        seed,
        vec![inst("Z1", StructuralFn::zero()), inst("Z2", StructuralFn::power(c, 2))],
        StructuralFn::linear(1.0, 0.0),
    )
}

pub fn gen_single_instrument(c: f64, n: usize, seed: u64) -> Result<GeneratedSample> {
    gen_custom(&single_instrument_spec(c, n, seed))
}

pub fn gen_double_instrument(c: f64, n: usize, seed: u64) -> Result<GeneratedSample> {
    gen_custom(&double_instrument_spec(c, n, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::mean;

    #[test]
    fn single_instrument_structure() {
        let s = gen_single_instrument(0.0, 500, 3).unwrap();
        let z = s.data.column("Z").unwrap();
        let x = s.data.column("X").unwrap();
        let y = s.data.column("Y").unwrap();
        let ex = s.truth_column("eps_x");
        let ey = s.truth_column("eps_y");
        for i in 0..500 {
            assert!((x[i] - z[i] * z[i] - ex[i]).abs() < 1e-12);
            assert!((y[i] - x[i] * x[i] - ey[i]).abs() <= 1e-12 * y[i].abs().max(1.0));
        }
        assert!(!s.data.names().any(|n| n.starts_with(TRUTH_PREFIX)));
    }

    #[test]
    fn determinism() {
        let a = gen_double_instrument(0.2, 100, 42).unwrap();
        let b = gen_double_instrument(0.2, 100, 42).unwrap();
        assert_eq!(a, b);
        let c = gen_double_instrument(0.2, 100, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn models_share_noise_draws() {
        let a = gen_double_instrument(0.0, 50, 7).unwrap();
        let b = gen_double_instrument(1.0, 50, 7).unwrap();
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.data.column("X").unwrap(), b.data.column("X").unwrap());
    }

    #[test]
    fn single_row() {
        let s = gen_single_instrument(1.0, 1, 1).unwrap();
        assert_eq!(s.data.n_rows(), 1);
    }

    #[test]
    fn zero_noise_is_deterministic_in_instruments() {
        let mut spec = single_instrument_spec(1.0, 20, 5);
        spec.latent = Dist::Normal { mean: 0.0, sd: 0.0 };
        spec.x_noise_sd = 0.0;
        spec.y_noise_sd = 0.0;
        let s = gen_custom(&spec).unwrap();
        let z = s.data.column("Z").unwrap();
        let y = s.data.column("Y").unwrap();
        for i in 0..20 {
            assert!((y[i] - (z[i].powi(4) + z[i].powi(3))).abs() < 1e-9);
        }
    }

    #[test]
    fn unevaluable_function_is_a_spec_error() {
        let mut spec = single_instrument_spec(0.0, 10, 1);
        spec.instruments[0].dist = Dist::Uniform { lo: -1.0, hi: 1.0 };
        spec.instruments[0].f = StructuralFn::new("ln", f64::ln);
        assert!(matches!(gen_custom(&spec), Err(Error::Spec(_))));
    }

    #[test]
    fn first_moment_of_double_model() {
        let s = gen_double_instrument(0.0, 100_000, 11).unwrap();
        assert!((mean(s.data.column("X").unwrap()) - (32.0 / 3.0 + 1.0)).abs() < 0.1);
    }
}
