//! Local polynomial regression in one and two predictors.
//!
//! Every fitted value is a weighted least-squares polynomial fit over the
//! `k = ceil(span * n)` nearest training points, so the fit is a linear map
//! of the response. The trace of that map is the effective degrees of
//! freedom used by the BIC score.
//!
//! Neighbourhoods are plain nearest-neighbour windows with no boundary
//! correction, so fits near the edges of the data carry the usual boundary
//! bias. Two-predictor neighbourhoods use Euclidean distance after scaling
//! each predictor to unit sample standard deviation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{correlation, min_max, std_dev};
use crate::error::{Error, Result};
use crate::linalg::{local_intercept_row, LocalSolveError};

/// The bandwidth is the distance to the k-th neighbour inflated by this
/// factor, so every point of the window keeps a strictly positive weight.
const BANDWIDTH_INFLATION: f64 = 1.0 + 1e-3;

/// Relative slack when checking that a query lies inside the training range.
const RANGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    #[default]
    Tricube,
    Epanechnikov,
    Uniform,
}

impl Kernel {
    /// Weight at normalized distance `u >= 0`.
    pub fn weight(self, u: f64) -> f64 {
        if u >= 1.0 {
            return 0.0;
        }
        match self {
            Kernel::Tricube => {
                let t = 1.0 - u * u * u;
                t * t * t
            }
            Kernel::Epanechnikov => 1.0 - u * u,
            Kernel::Uniform => 1.0,
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tricube" => Ok(Kernel::Tricube),
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            "uniform" => Ok(Kernel::Uniform),
            other => Err(Error::Input(format!("unknown kernel `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmootherConfig {
    pub degree: usize,
    pub span: f64,
    pub kernel: Kernel,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        Self {
            degree: 2,
            span: 0.75,
            kernel: Kernel::Tricube,
        }
    }
}

impl SmootherConfig {
    pub fn new(degree: usize, span: f64, kernel: Kernel) -> Result<Self> {
        let cfg = Self { degree, span, kernel };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if self.degree > 2 {
            return Err(Error::Input(format!(
                "local polynomial degree must be 0, 1 or 2 (got {})",
                self.degree
            )));
        }
        if !(self.span > 0.0 && self.span <= 1.0) {
            return Err(Error::Input(format!(
                "span must lie in (0, 1] (got {})",
                self.span
            )));
        }
        Ok(())
    }

    /// Number of local polynomial terms for `dims` predictors.
    pub fn basis_size(&self, dims: usize) -> usize {
        match dims {
            1 => self.degree + 1,
            _ => (self.degree + 1) * (self.degree + 2) / 2,
        }
    }

    /// Neighbourhood size for a sample of `n` points.
    pub fn window(&self, n: usize) -> usize {
        ((self.span * n as f64).ceil() as usize).clamp(1, n.max(1))
    }

    fn check_sample(&self, n: usize, dims: usize) -> Result<usize> {
        self.check()?;
        let p = self.basis_size(dims);
        if n < p {
            return Err(Error::Input(format!(
                "need at least {p} observations for a degree-{} fit, got {n}",
                self.degree
            )));
        }
        let k = self.window(n);
        if k < p {
            return Err(Error::Input(format!(
                "span {} gives {k} points per window, fewer than the {p} local basis terms",
                self.span
            )));
        }
        Ok(k)
    }
}

/// Training predictors in the metric used for neighbourhoods.
#[derive(Debug, Clone)]
enum Geometry {
    Line(Vec<f64>),
    Plane {
        u: Vec<f64>,
        v: Vec<f64>,
        scale: [f64; 2],
    },
}

impl Geometry {
    fn len(&self) -> usize {
        match self {
            Geometry::Line(x) => x.len(),
            Geometry::Plane { u, .. } => u.len(),
        }
    }

    fn dims(&self) -> usize {
        match self {
            Geometry::Line(_) => 1,
            Geometry::Plane { .. } => 2,
        }
    }

    /// Maps a raw query into the neighbourhood metric.
    fn to_metric(&self, q: [f64; 2]) -> [f64; 2] {
        match self {
            Geometry::Line(_) => [q[0], 0.0],
            Geometry::Plane { scale, .. } => [q[0] / scale[0], q[1] / scale[1]],
        }
    }

    fn distance(&self, i: usize, q: [f64; 2]) -> f64 {
        match self {
            Geometry::Line(x) => (x[i] - q[0]).abs(),
            Geometry::Plane { u, v, .. } => {
                let a = u[i] - q[0];
                let b = v[i] - q[1];
                (a * a + b * b).sqrt()
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn fill_basis(&self, i: usize, q: [f64; 2], h: f64, degree: usize, out: &mut [f64], k: usize, row: usize) {
        match self {
            Geometry::Line(x) => {
                let t = (x[i] - q[0]) / h;
                let mut pw = 1.0;
                for d in 0..=degree {
                    out[d * k + row] = pw;
                    pw *= t;
                }
            }
            Geometry::Plane { u, v, .. } => {
                let a = (u[i] - q[0]) / h;
                let b = (v[i] - q[1]) / h;
                out[row] = 1.0;
                if degree >= 1 {
                    out[k + row] = a;
                    out[2 * k + row] = b;
                }
                if degree >= 2 {
                    out[3 * k + row] = a * a;
                    out[4 * k + row] = a * b;
                    out[5 * k + row] = b * b;
                }
            }
        }
    }
}

/// One row of the smoother operator: `fit(q) = sum weights[j] * y[index[j]]`.
#[derive(Debug, Clone)]
pub(crate) struct OperatorRow {
    pub index: Vec<usize>,
    pub weights: Vec<f64>,
}

impl OperatorRow {
    fn apply(&self, y: &[f64]) -> f64 {
        self.index
            .iter()
            .zip(&self.weights)
            .map(|(&i, w)| w * y[i])
            .sum()
    }

    fn weight_on(&self, i: usize) -> f64 {
        self.index
            .iter()
            .zip(&self.weights)
            .filter(|(&j, _)| j == i)
            .map(|(_, w)| *w)
            .sum()
    }
}

fn local_row(
    geom: &Geometry,
    q: [f64; 2],
    k: usize,
    cfg: &SmootherConfig,
    label: impl Fn() -> String,
) -> Result<OperatorRow> {
    let n = geom.len();
    let mut dist: Vec<(f64, usize)> = (0..n).map(|i| (geom.distance(i, q), i)).collect();
    let (_, kth, _) = dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
    let dk = kth.0;
    if dk <= 0.0 {
        return Err(Error::SingularFit {
            window: label(),
            reason: format!("all {k} neighbours coincide with the query point"),
        });
    }
    // Ties at the boundary all join the window so the result does not depend
    // on row order.
    let mut members: Vec<usize> = dist
        .iter()
        .filter(|(d, _)| *d <= dk)
        .map(|(_, i)| *i)
        .collect();
    members.sort_unstable();
    let h = dk * BANDWIDTH_INFLATION;
    let m = members.len();
    let p = cfg.basis_size(geom.dims());
    let mut design = vec![0.0; m * p];
    let mut weights = Vec::with_capacity(m);
    for (row, &i) in members.iter().enumerate() {
        geom.fill_basis(i, q, h, cfg.degree, &mut design, m, row);
        weights.push(cfg.kernel.weight(geom.distance(i, q) / h));
    }
    match local_intercept_row(&mut design, &weights, m, p) {
        Ok((w, _rank)) => Ok(OperatorRow {
            index: members,
            weights: w,
        }),
        Err(LocalSolveError::ConstantUnsupported) => Err(Error::SingularFit {
            window: label(),
            reason: "no positive kernel weight in the window".into(),
        }),
    }
}

fn operator_rows(geom: &Geometry, queries: &[[f64; 2]], k: usize, cfg: &SmootherConfig) -> Result<Vec<OperatorRow>> {
    queries
        .par_iter()
        .enumerate()
        .map(|(i, q)| {
            local_row(geom, *q, k, cfg, || match geom {
                Geometry::Line(x) => format!("window around training point {i} (x = {})", x[i]),
                Geometry::Plane { .. } => format!("window around training point {i}"),
            })
        })
        .collect()
}

/// Shared read access to any local polynomial fit.
pub trait SmootherFit {
    fn fitted(&self) -> &[f64];
    fn residuals(&self) -> &[f64];
    fn effective_df(&self) -> f64;
    fn response(&self) -> &[f64];

    fn n(&self) -> usize {
        self.fitted().len()
    }

    fn rss(&self) -> f64 {
        self.residuals().iter().map(|r| r * r).sum()
    }
}

/// Trace of the smoother map of a fit.
pub fn effective_df<F: SmootherFit + ?Sized>(fit: &F) -> f64 {
    fit.effective_df()
}

#[derive(Debug, Clone)]
pub struct UnivariateFit {
    x: Vec<f64>,
    y: Vec<f64>,
    fitted: Vec<f64>,
    residuals: Vec<f64>,
    effective_df: f64,
    config: SmootherConfig,
    range: (f64, f64),
}

impl UnivariateFit {
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn config(&self) -> &SmootherConfig {
        &self.config
    }

    /// Smallest and largest training value of the predictor.
    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    /// Evaluates the fitted curve at `q`, which must lie inside the
    /// training range.
    pub fn predict(&self, q: f64) -> Result<f64> {
        predict_line(&self.x, &self.y, &self.config, q)
    }

    pub fn predict_many(&self, q: &[f64]) -> Result<Vec<f64>> {
        q.iter().map(|&v| self.predict(v)).collect()
    }
}

impl SmootherFit for UnivariateFit {
    fn fitted(&self) -> &[f64] {
        &self.fitted
    }
    fn residuals(&self) -> &[f64] {
        &self.residuals
    }
    fn effective_df(&self) -> f64 {
        self.effective_df
    }
    fn response(&self) -> &[f64] {
        &self.y
    }
}

/// Local polynomial fit of `(x, y)` evaluated at `q` inside the range of `x`.
pub(crate) fn predict_line(x: &[f64], y: &[f64], cfg: &SmootherConfig, q: f64) -> Result<f64> {
    let (lo, hi) = min_max(x);
    let slack = RANGE_SLACK * (hi - lo).abs().max(1.0);
    if !(q >= lo - slack && q <= hi + slack) {
        return Err(Error::OutOfRange { value: q, lo, hi });
    }
    let geom = Geometry::Line(x.to_vec());
    let k = cfg.check_sample(x.len(), 1)?;
    let row = local_row(&geom, [q, 0.0], k, cfg, || format!("window around query x = {q}"))?;
    Ok(row.apply(y))
}

/// Precomputed univariate smoother for repeated application to different
/// responses over the same predictor.
///
/// Windows are contiguous in sorted order, so each row is stored as a start
/// offset plus its weights. Rows are kept only while the total number of
/// weights stays under [`LineOperator::CACHE_LIMIT`]; larger problems
/// recompute them on every application.
#[derive(Debug, Clone)]
pub(crate) struct LineOperator {
    x: Vec<f64>,
    order: Vec<usize>,
    sorted_x: Vec<f64>,
    geom: Geometry,
    cfg: SmootherConfig,
    k: usize,
    trace: f64,
    rows: Option<Vec<(usize, usize, usize)>>,
    weights: Vec<f64>,
}

impl LineOperator {
    pub const CACHE_LIMIT: usize = 20_000_000;

    pub fn new(x: &[f64], cfg: &SmootherConfig) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite value in smoother input".into()));
        }
        line_geometry(x)?;
        let k = cfg.check_sample(x.len(), 1)?;
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
        let sorted_x: Vec<f64> = order.iter().map(|&i| x[i]).collect();
        let mut op = Self {
            x: x.to_vec(),
            order,
            geom: Geometry::Line(sorted_x.clone()),
            sorted_x,
            cfg: *cfg,
            k,
            trace: 0.0,
            rows: None,
            weights: Vec::new(),
        };
        let cache = x.len().saturating_mul(k) <= Self::CACHE_LIMIT;
        let mut rows = Vec::with_capacity(if cache { x.len() } else { 0 });
        let mut trace = 0.0;
        for i in 0..x.len() {
            let row = op.row(i)?;
            let start = row.index[0];
            trace += row.weights[i - start];
            if cache {
                rows.push((start, op.weights.len(), row.weights.len()));
                op.weights.extend_from_slice(&row.weights);
            }
        }
        op.trace = trace;
        if cache {
            op.rows = Some(rows);
        }
        Ok(op)
    }

    /// Row for the i-th point in sorted order, with indices in sorted order.
    fn row(&self, i: usize) -> Result<OperatorRow> {
        local_row(&self.geom, [self.sorted_x[i], 0.0], self.k, &self.cfg, || {
            format!(
                "window around training point {} (x = {})",
                self.order[i], self.sorted_x[i]
            )
        })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn config(&self) -> &SmootherConfig {
        &self.cfg
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        let ys: Vec<f64> = self.order.iter().map(|&i| y[i]).collect();
        let mut out = vec![0.0; y.len()];
        match &self.rows {
            Some(rows) => {
                for (pos, &(start, off, len)) in rows.iter().enumerate() {
                    let w = &self.weights[off..off + len];
                    out[self.order[pos]] =
                        w.iter().zip(&ys[start..start + len]).map(|(a, b)| a * b).sum();
                }
            }
            None => {
                for pos in 0..y.len() {
                    let row = self.row(pos)?;
                    out[self.order[pos]] = row.apply(&ys);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct SurfaceFit {
    x1: Vec<f64>,
    x2: Vec<f64>,
    y: Vec<f64>,
    fitted: Vec<f64>,
    residuals: Vec<f64>,
    effective_df: f64,
    config: SmootherConfig,
    geom: Geometry,
    bounds: [(f64, f64); 2],
}

impl SurfaceFit {
    pub fn config(&self) -> &SmootherConfig {
        &self.config
    }

    pub fn predictors(&self) -> (&[f64], &[f64]) {
        (&self.x1, &self.x2)
    }

    /// Evaluates the fitted surface at `(q1, q2)` inside the bounding box of
    /// the training predictors.
    pub fn predict(&self, q1: f64, q2: f64) -> Result<f64> {
        for (q, (lo, hi)) in [(q1, self.bounds[0]), (q2, self.bounds[1])] {
            let slack = RANGE_SLACK * (hi - lo).abs().max(1.0);
            if !(q >= lo - slack && q <= hi + slack) {
                return Err(Error::OutOfRange { value: q, lo, hi });
            }
        }
        let k = self.config.window(self.y.len());
        let q = self.geom.to_metric([q1, q2]);
        let row = local_row(&self.geom, q, k, &self.config, || {
            format!("window around query ({q1}, {q2})")
        })?;
        Ok(row.apply(&self.y))
    }
}

impl SmootherFit for SurfaceFit {
    fn fitted(&self) -> &[f64] {
        &self.fitted
    }
    fn residuals(&self) -> &[f64] {
        &self.residuals
    }
    fn effective_df(&self) -> f64 {
        self.effective_df
    }
    fn response(&self) -> &[f64] {
        &self.y
    }
}

fn check_lengths(y: &[f64], xs: &[&[f64]]) -> Result<()> {
    for x in xs {
        if x.len() != y.len() {
            return Err(Error::Input(format!(
                "predictor has {} rows but response has {}",
                x.len(),
                y.len()
            )));
        }
    }
    if y.iter().chain(xs.iter().flat_map(|x| x.iter())).any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite value in smoother input".into()));
    }
    Ok(())
}

fn line_geometry(x: &[f64]) -> Result<Geometry> {
    let (lo, hi) = min_max(x);
    if !(hi > lo) {
        return Err(Error::Input("predictor is constant".into()));
    }
    Ok(Geometry::Line(x.to_vec()))
}

fn plane_geometry(x1: &[f64], x2: &[f64]) -> Result<Geometry> {
    let s1 = std_dev(x1);
    let s2 = std_dev(x2);
    if !(s1 > 0.0) || !(s2 > 0.0) {
        return Err(Error::Input("surface predictor is constant".into()));
    }
    if correlation(x1, x2).abs() >= 1.0 - 1e-10 {
        return Err(Error::Input(
            "surface predictors are collinear; the two-dimensional fit is degenerate".into(),
        ));
    }
    Ok(Geometry::Plane {
        u: x1.iter().map(|v| v / s1).collect(),
        v: x2.iter().map(|v| v / s2).collect(),
        scale: [s1, s2],
    })
}

fn training_queries(geom: &Geometry) -> Vec<[f64; 2]> {
    match geom {
        Geometry::Line(x) => x.iter().map(|&v| [v, 0.0]).collect(),
        Geometry::Plane { u, v, .. } => u.iter().zip(v).map(|(&a, &b)| [a, b]).collect(),
    }
}

fn fit_rows(geom: &Geometry, y: &[f64], cfg: &SmootherConfig) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let k = cfg.check_sample(y.len(), geom.dims())?;
    let rows = operator_rows(geom, &training_queries(geom), k, cfg)?;
    let fitted: Vec<f64> = rows.iter().map(|r| r.apply(y)).collect();
    let residuals = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let df = rows.iter().enumerate().map(|(i, r)| r.weight_on(i)).sum();
    Ok((fitted, residuals, df))
}

/// Local polynomial regression of `y` on a single predictor.
pub fn fit_univariate(x: &[f64], y: &[f64], cfg: &SmootherConfig) -> Result<UnivariateFit> {
    check_lengths(y, &[x])?;
    let geom = line_geometry(x)?;
    let (fitted, residuals, effective_df) = fit_rows(&geom, y, cfg)?;
    Ok(UnivariateFit {
        x: x.to_vec(),
        y: y.to_vec(),
        fitted,
        residuals,
        effective_df,
        config: *cfg,
        range: min_max(x),
    })
}

/// Local polynomial regression of `y` on two predictors jointly.
pub fn fit_surface(x1: &[f64], x2: &[f64], y: &[f64], cfg: &SmootherConfig) -> Result<SurfaceFit> {
    check_lengths(y, &[x1, x2])?;
    let geom = plane_geometry(x1, x2)?;
    let (fitted, residuals, effective_df) = fit_rows(&geom, y, cfg)?;
    Ok(SurfaceFit {
        x1: x1.to_vec(),
        x2: x2.to_vec(),
        y: y.to_vec(),
        fitted,
        residuals,
        effective_df,
        config: *cfg,
        geom,
        bounds: [min_max(x1), min_max(x2)],
    })
}

/// The dense smoother matrix `L` with `fitted = L y` at the training points.
///
/// Materializing `L` is quadratic in `n`; it pays off when the same
/// predictors are smoothed against many responses, as in the residual
/// bootstrap.
#[derive(Debug, Clone)]
pub struct SmootherMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SmootherMatrix {
    fn from_rows(n: usize, rows: &[OperatorRow]) -> Self {
        let mut data = vec![0.0; n * n];
        for (i, r) in rows.iter().enumerate() {
            for (&j, &w) in r.index.iter().zip(&r.weights) {
                data[i * n + j] += w;
            }
        }
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        self.data
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(y).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Residual sum of squares of smoothing `y`.
    pub fn rss(&self, y: &[f64]) -> f64 {
        self.data
            .chunks_exact(self.n)
            .zip(y)
            .map(|(row, yi)| {
                let f: f64 = row.iter().zip(y).map(|(a, b)| a * b).sum();
                (yi - f) * (yi - f)
            })
            .sum()
    }
}

pub fn univariate_matrix(x: &[f64], cfg: &SmootherConfig) -> Result<SmootherMatrix> {
    let geom = line_geometry(x)?;
    let k = cfg.check_sample(x.len(), 1)?;
    let rows = operator_rows(&geom, &training_queries(&geom), k, cfg)?;
    Ok(SmootherMatrix::from_rows(x.len(), &rows))
}

pub fn surface_matrix(x1: &[f64], x2: &[f64], cfg: &SmootherConfig) -> Result<SmootherMatrix> {
    if x1.len() != x2.len() {
        return Err(Error::Input("surface predictors differ in length".into()));
    }
    let geom = plane_geometry(x1, x2)?;
    let k = cfg.check_sample(x1.len(), 2)?;
    let rows = operator_rows(&geom, &training_queries(&geom), k, cfg)?;
    Ok(SmootherMatrix::from_rows(x1.len(), &rows))
}
