use super::{check_inputs, AdditiveFit, AdditiveMethod, Component, ComponentRepr, Convergence};
use crate::data::mean;
use crate::error::Result;
use crate::smoothers::{LineOperator, SmootherConfig};

pub const BACKFIT_TOL: f64 = 1e-6;
pub const BACKFIT_MAX_ITER: usize = 100;

/// Backfitting with a local polynomial smoother for every term.
///
/// Each sweep smooths the partial residuals `y - c - sum_{k != j} f_k`
/// against predictor `j` and re-centres the result. Sweeps stop once the
/// largest elementwise change of any component falls below `tol`, or after
/// `max_iter` sweeps. Hitting `max_iter` is not an error: the returned
/// [`Convergence`] says whether `tol` was met.
///
/// The effective degrees of freedom are the sum of the component smoother
/// traces plus one for the intercept.
pub fn backfit(
    predictors: &[&[f64]],
    y: &[f64],
    cfg: &SmootherConfig,
    tol: f64,
    max_iter: usize,
) -> Result<AdditiveFit> {
    check_inputs(predictors, y)?;
    let operators: Vec<LineOperator> = predictors
        .iter()
        .map(|x| LineOperator::new(x, cfg))
        .collect::<Result<_>>()?;
    let n = y.len();
    let m = predictors.len();
    let intercept = mean(y);
    let mut components = vec![vec![0.0; n]; m];
    let mut total = vec![0.0; n];
    let mut partial = vec![0.0; n];

    let mut iterations = 0;
    let mut final_change = f64::INFINITY;
    let mut converged = false;
    while iterations < max_iter.max(1) {
        iterations += 1;
        let mut change: f64 = 0.0;
        for j in 0..m {
            for i in 0..n {
                partial[i] = y[i] - intercept - (total[i] - components[j][i]);
            }
            let mut next = operators[j].apply(&partial)?;
            let c = mean(&next);
            next.iter_mut().for_each(|v| *v -= c);
            for i in 0..n {
                change = change.max((next[i] - components[j][i]).abs());
                total[i] += next[i] - components[j][i];
            }
            components[j] = next;
        }
        final_change = change;
        if change < tol {
            converged = true;
            break;
        }
    }

    let df = operators.iter().map(LineOperator::trace).sum::<f64>() + 1.0;
    let components = operators
        .into_iter()
        .zip(components)
        .map(|(op, values)| {
            // The term is the smooth of its final partial residuals, shifted
            // by the centring constant.
            let partial: Vec<f64> = (0..n).map(|i| y[i] - intercept - (total[i] - values[i])).collect();
            let raw = op.apply(&partial)?;
            let offset = mean(&raw);
            Ok(Component {
                values,
                repr: ComponentRepr::Smooth {
                    x: op.x().to_vec(),
                    partial_residuals: partial,
                    config: *op.config(),
                    offset,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(AdditiveFit::assemble(
        intercept,
        components,
        y,
        df,
        AdditiveMethod::Backfitting,
        Convergence {
            iterations,
            final_change,
            converged,
        },
        None,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothers::{fit_univariate, SmootherFit};

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
    fn single_effect_isolated() {
        let u: Vec<f64> = lcg(120, 11).iter().map(|v| v * 4.0 - 2.0).collect();
        let v = lcg(120, 12);
        let y: Vec<f64> = u.iter().map(|a| a * a).collect();
        let cfg = SmootherConfig::default();
        let fit = backfit(&[&u, &v], &y, &cfg, BACKFIT_TOL, BACKFIT_MAX_ITER).unwrap();
        assert!(fit.convergence().converged);
        assert!(fit.component(1).values().iter().all(|x| x.abs() <= 1e-6));
        let uni = fit_univariate(&u, &y, &cfg).unwrap();
        let centre = mean(uni.fitted());
        for (a, b) in fit.component(0).values().iter().zip(uni.fitted()) {
            assert!((a - (b - centre)).abs() <= 1e-6);
        }
    }

    #[test]
    fn zero_response_gives_zero_fit() {
        let u = lcg(60, 13);
        let v = lcg(60, 14);
        let fit = backfit(&[&u, &v], &vec![0.0; 60], &SmootherConfig::default(), 1e-6, 100).unwrap();
        assert_eq!(fit.intercept(), 0.0);
        assert!(fit.components().iter().all(|c| c.values().iter().all(|x| *x == 0.0)));
    }

    #[test]
    fn component_eval_matches_training_values() {
        let u = lcg(80, 15);
        let v = lcg(80, 16);
        let y: Vec<f64> = u.iter().zip(&v).map(|(a, b)| (3.0 * a).sin() + b).collect();
        let fit = backfit(&[&u, &v], &y, &SmootherConfig::default(), 1e-10, 200).unwrap();
        for i in [0, 5, 40] {
            let e = fit.component(0).eval(u[i]).unwrap();
            assert!((e - fit.component(0).values()[i]).abs() < 1e-8);
        }
        assert!(fit.component(0).eval(2.0).is_err());
    }

    #[test]
    fn non_convergence_is_recorded() {
        let u = lcg(80, 17);
        let v: Vec<f64> = u.iter().zip(lcg(80, 18)).map(|(a, e)| a + 0.05 * e).collect();
        let y: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a * a + b).collect();
        let fit = backfit(&[&u, &v], &y, &SmootherConfig::default(), 1e-14, 2).unwrap();
        let c = fit.convergence();
        assert_eq!(c.iterations, 2);
        assert!(!c.converged);
        assert!(c.final_change >= 1e-14);
    }
}
