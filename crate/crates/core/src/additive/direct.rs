use nalgebra::DMatrix;

use super::{check_inputs, AdditiveFit, AdditiveMethod, BSplineBasis, Component, ComponentRepr, Convergence, RankDiagnostic};
use crate::data::mean;
use crate::error::{Error, Result};
use crate::linalg::min_norm_lstsq;

pub const DEFAULT_BASIS_SIZE: usize = 5;

/// Expanded design for the joint additive solve.
///
/// Column 0 is the intercept. Each predictor contributes `basis_size - 1`
/// mean-centred B-spline columns; the first basis function is dropped
/// because the basis sums to one and the intercept already spans constants.
pub struct SplineDesign {
    pub matrix: DMatrix<f64>,
    pub bases: Vec<BSplineBasis>,
    pub column_means: Vec<Vec<f64>>,
}

pub fn spline_design(predictors: &[&[f64]], basis_size: usize) -> Result<SplineDesign> {
    if basis_size < 3 {
        return Err(Error::Input(format!("basis_size must be at least 3 (got {basis_size})")));
    }
    let n = predictors.first().map_or(0, |x| x.len());
    let per = basis_size - 1;
    let cols = 1 + per * predictors.len();
    let mut matrix = DMatrix::zeros(n, cols);
    let mut bases = Vec::with_capacity(predictors.len());
    let mut column_means = Vec::with_capacity(predictors.len());
    for i in 0..n {
        matrix[(i, 0)] = 1.0;
    }
    for (j, x) in predictors.iter().enumerate() {
        let basis = BSplineBasis::from_sample(x, basis_size)?;
        let mut raw = vec![vec![0.0; n]; per];
        for (i, &v) in x.iter().enumerate() {
            let b = basis.eval(v)?;
            for (c, col) in raw.iter_mut().enumerate() {
                col[i] = b[c + 1];
            }
        }
        let means: Vec<f64> = raw.iter().map(|c| mean(c)).collect();
        for (c, col) in raw.iter().enumerate() {
            for i in 0..n {
                matrix[(i, 1 + j * per + c)] = col[i] - means[c];
            }
        }
        bases.push(basis);
        column_means.push(means);
    }
    Ok(SplineDesign {
        matrix,
        bases,
        column_means,
    })
}

/// Additive fit by one joint least-squares solve on a B-spline expansion.
///
/// Rank-deficient designs (for example collinear predictors) do not fail:
/// the minimum-norm solution is returned and [`AdditiveFit::rank`] records
/// the deficiency. The effective degrees of freedom equal the numerical
/// rank of the design, i.e. the number of identifiable coefficients.
pub fn direct_ls_additive(predictors: &[&[f64]], y: &[f64], basis_size: usize) -> Result<AdditiveFit> {
    check_inputs(predictors, y)?;
    let design = spline_design(predictors, basis_size)?;
    let ls = min_norm_lstsq(&design.matrix, y);
    let per = basis_size - 1;
    let n = y.len();
    let mut components = Vec::with_capacity(predictors.len());
    for (j, (basis, means)) in design.bases.into_iter().zip(design.column_means).enumerate() {
        let beta = &ls.coefficients[1 + j * per..1 + (j + 1) * per];
        let mut values = vec![0.0; n];
        for (c, b) in beta.iter().enumerate() {
            let col = design.matrix.column(1 + j * per + c);
            for (v, x) in values.iter_mut().zip(col.iter()) {
                *v += b * x;
            }
        }
        // Padded coefficient vectors line up with the full basis; the dropped
        // first function gets coefficient 0.
        let mut coefficients = vec![0.0];
        coefficients.extend_from_slice(beta);
        let mut column_means = vec![0.0];
        column_means.extend(means);
        components.push(Component {
            values,
            repr: ComponentRepr::Spline {
                basis,
                coefficients,
                column_means,
            },
        });
    }
    let rank = RankDiagnostic {
        rank: ls.rank,
        columns: design.matrix.ncols(),
    };
    Ok(AdditiveFit::assemble(
        ls.coefficients[0],
        components,
        y,
        ls.rank as f64,
        AdditiveMethod::DirectLeastSquares,
        Convergence {
            iterations: 1,
            final_change: 0.0,
            converged: true,
        },
        Some(rank),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect()
    }

    #[test]
    fn affine_additive_data_recovered() {
        let u = lcg(200, 1);
        let v = lcg(200, 2);
        let y: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 2.0 * a + 3.0 * b).collect();
        let fit = direct_ls_additive(&[&u, &v], &y, DEFAULT_BASIS_SIZE).unwrap();
        assert!(fit.residuals().iter().all(|r| r.abs() < 1e-9));
        let mu = mean(&u);
        let mv = mean(&v);
        for i in 0..u.len() {
            assert!((fit.component(0).values()[i] - 2.0 * (u[i] - mu)).abs() < 1e-9);
            assert!((fit.component(1).values()[i] - 3.0 * (v[i] - mv)).abs() < 1e-9);
        }
        assert!(!fit.rank().unwrap().deficient());
        assert_eq!(fit.effective_df(), (1 + 2 * (DEFAULT_BASIS_SIZE - 1)) as f64);
    }

    #[test]
    fn components_are_mean_zero() {
        let u = lcg(150, 3);
        let v = lcg(150, 4);
        let y: Vec<f64> = u.iter().zip(&v).map(|(a, b)| (6.0 * a).sin() + b * b * 4.0).collect();
        let fit = direct_ls_additive(&[&u, &v], &y, 8).unwrap();
        for c in fit.components() {
            assert!(mean(c.values()).abs() < 1e-12);
        }
        // evaluation reproduces training values
        for i in [0, 17, 99] {
            assert!((fit.component(0).eval(u[i]).unwrap() - fit.component(0).values()[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn small_basis_cannot_fit_a_cubic() {
        let u: Vec<f64> = (0..10).map(|i| i as f64 / 9.0).collect();
        let v = lcg(10, 5);
        let y: Vec<f64> = u.iter().map(|a| a * a * a).collect();
        let fit = direct_ls_additive(&[&u, &v], &y, 3).unwrap();
        assert!(fit.rss() > 1e-8);
    }

    #[test]
    fn collinear_predictors_report_rank_deficiency() {
        let u = lcg(100, 6);
        let y: Vec<f64> = u.iter().map(|a| a * a).collect();
        let fit = direct_ls_additive(&[&u, &u], &y, 6).unwrap();
        let rank = fit.rank().unwrap();
        assert!(rank.deficient());
        assert_eq!(rank.rank, 6);
        assert!(fit.rss() < 1e-10);
    }

    #[test]
    fn zero_response() {
        let u = lcg(50, 7);
        let v = lcg(50, 8);
        let fit = direct_ls_additive(&[&u, &v], &vec![0.0; 50], 6).unwrap();
        assert_eq!(fit.intercept(), 0.0);
        assert!(fit.components().iter().all(|c| c.values().iter().all(|x| x.abs() < 1e-14)));
    }

    #[test]
    fn tiny_basis_rejected() {
        let u = lcg(20, 9);
        assert!(direct_ls_additive(&[&u], &u, 2).is_err());
    }
}
