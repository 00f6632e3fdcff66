use proptest::prelude::*;

use semiiv::additive::direct_ls_additive;
use semiiv::scoring::FitScore;
use semiiv::simgen::{gen_double_instrument, gen_single_instrument};
use semiiv::smoothers::{fit_univariate, Kernel, SmootherConfig, SmootherFit};
use semiiv::Dataset;

fn kernel() -> impl Strategy<Value = Kernel> {
    prop_oneof![Just(Kernel::Tricube), Just(Kernel::Epanechnikov), Just(Kernel::Uniform)]
}

/// Distinct-enough predictor values with matching responses.
fn sample(min: usize, max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (min..=max).prop_flat_map(|n| {
        (
            prop::collection::vec(-10.0f64..10.0, n),
            prop::collection::vec(-5.0f64..5.0, n),
            prop::collection::vec(-5.0f64..5.0, n),
        )
    })
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-8 * scale.max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smoother_is_linear_in_the_response(
        (x, y1, y2) in sample(10, 40),
        degree in 0usize..=2,
        span in 0.5f64..=1.0,
        k in kernel(),
        a in -3.0f64..3.0,
    ) {
        let cfg = SmootherConfig::new(degree, span, k).unwrap();
        let combo: Vec<f64> = y1.iter().zip(&y2).map(|(p, q)| a * p + q).collect();
        let f1 = fit_univariate(&x, &y1, &cfg).unwrap();
        let f2 = fit_univariate(&x, &y2, &cfg).unwrap();
        let fc = fit_univariate(&x, &combo, &cfg).unwrap();
        for i in 0..x.len() {
            prop_assert!(close(fc.fitted()[i], a * f1.fitted()[i] + f2.fitted()[i], 10.0));
        }
        prop_assert!(close(fc.effective_df(), f1.effective_df(), 1.0));
    }

    #[test]
    fn affine_responses_are_reproduced(
        (x, _, _) in sample(8, 40),
        degree in 1usize..=2,
        span in 0.4f64..=1.0,
        k in kernel(),
        slope in -5.0f64..5.0,
        icept in -5.0f64..5.0,
    ) {
        let cfg = SmootherConfig::new(degree, span, k).unwrap();
        prop_assume!(cfg.window(x.len()) >= degree + 2);
        let y: Vec<f64> = x.iter().map(|v| slope * v + icept).collect();
        let fit = fit_univariate(&x, &y, &cfg).unwrap();
        for (f, t) in fit.fitted().iter().zip(&y) {
            prop_assert!(close(*f, *t, 50.0));
        }
    }

    #[test]
    fn fits_do_not_depend_on_row_order(
        (x, y, _) in sample(10, 30),
        degree in 0usize..=2,
        span in 0.5f64..=1.0,
        shift in 1usize..9,
    ) {
        let cfg = SmootherConfig::new(degree, span, Kernel::Tricube).unwrap();
        let n = x.len();
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + shift) % n).collect();
        prop_assume!({ let mut p = perm.clone(); p.sort(); p.dedup(); p.len() == n });
        let xp: Vec<f64> = perm.iter().map(|&i| x[i]).collect();
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let a = fit_univariate(&x, &y, &cfg).unwrap();
        let b = fit_univariate(&xp, &yp, &cfg).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            prop_assert!(close(b.fitted()[j], a.fitted()[i], 10.0));
        }
    }

    #[test]
    fn direct_fit_decomposes_the_response(
        (u, v, y) in sample(30, 80),
        size in 4usize..=7,
    ) {
        let fit = direct_ls_additive(&[&u, &v], &y, size).unwrap();
        for c in fit.components() {
            let m = c.values().iter().sum::<f64>() / c.values().len() as f64;
            prop_assert!(m.abs() <= 1e-9);
        }
        for (i, yi) in y.iter().enumerate() {
            let parts = fit.intercept() + fit.component(0).values()[i] + fit.component(1).values()[i];
            prop_assert!(close(parts, fit.fitted()[i], 10.0));
            prop_assert!(close(fit.fitted()[i] + fit.residuals()[i], *yi, 10.0));
        }
        // Least-squares residuals are orthogonal to the constant.
        prop_assert!(fit.residuals().iter().sum::<f64>().abs() <= 1e-8 * y.len() as f64);
        prop_assert!(fit.effective_df() <= (1 + 2 * (size - 1)) as f64);
    }

    #[test]
    fn bic_increases_with_rss_and_df(
        n in 10usize..1000,
        rss in 0.1f64..1e4,
        extra in 0.01f64..100.0,
        df in 1.0f64..20.0,
    ) {
        let a = FitScore::new(n, rss, df, 1e-12).unwrap();
        let b = FitScore::new(n, rss + extra, df, 1e-12).unwrap();
        let c = FitScore::new(n, rss, df + 1.0, 1e-12).unwrap();
        prop_assert!(b.bic > a.bic);
        prop_assert!(c.bic > a.bic);
    }

    #[test]
    fn csv_round_trip_preserves_values(
        cols in prop::collection::vec(prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 1..20), 1..4),
    ) {
        let n = cols.iter().map(Vec::len).min().unwrap();
        let mut ds = Dataset::new();
        for (j, c) in cols.iter().enumerate() {
            ds.push(format!("c{j}"), c[..n].to_vec()).unwrap();
        }
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn simulated_samples_follow_their_equations(c in -2.0f64..2.0, n in 1usize..200, seed in any::<u64>()) {
        let s = gen_single_instrument(c, n, seed).unwrap();
        let z = s.data.column("Z").unwrap();
        let x = s.data.column("X").unwrap();
        let y = s.data.column("Y").unwrap();
        let ex = s.truth_column("eps_x");
        let ey = s.truth_column("eps_y");
        for i in 0..n {
            prop_assert!(close(x[i], z[i] * z[i] + ex[i], 1e-4 * x[i].abs()));
            let want = x[i] * x[i] + c * z[i].powi(3) + ey[i];
            prop_assert!((y[i] - want).abs() <= 1e-12 * want.abs().max(1.0));
            prop_assert!((0.0..5.0).contains(&z[i]));
        }
        prop_assert_eq!(gen_single_instrument(c, n, seed).unwrap(), s);
    }

    #[test]
    fn double_samples_share_everything_but_y(c in 0.0f64..2.0, seed in any::<u64>()) {
        let a = gen_double_instrument(0.0, 50, seed).unwrap();
        let b = gen_double_instrument(c, 50, seed).unwrap();
        for name in ["Z1", "Z2", "X"] {
            prop_assert_eq!(a.data.column(name).unwrap(), b.data.column(name).unwrap());
        }
        let z2 = a.data.column("Z2").unwrap();
        let ya = a.data.column("Y").unwrap();
        let yb = b.data.column("Y").unwrap();
        for ((p, q), z) in ya.iter().zip(yb).zip(z2) {
            prop_assert!((q - p - c * z * z).abs() <= 1e-9);
        }
    }
}
