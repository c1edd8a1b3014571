use fracspde::accel::{aitken, weighted_average, AitkenVariant, EstimateSequence};
use fracspde::exact::{exact_coefficients, exact_theta};
use fracspde::fbm::{FbmMethod, FbmSampler};
use fracspde::grid::TimeGrid;
use fracspde::mkernel::KernelTransform;
use fracspde::mle::mle_geometric;
use fracspde::solution::LogPaths;
use fracspde::specmodel::{builtin_model, BuiltinModel, ModelParams, ParamValue};
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn path(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, len).prop_map(|mut v| {
        v[0] = 0.0;
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transform_is_linear(h in 0.05..0.95f64, x in path(33), y in path(33), a in -3.0..3.0f64, b in -3.0..3.0f64, i in 1usize..=32) {
        let grid = TimeGrid::new(1.5, 32).unwrap();
        let w = KernelTransform::new(h).unwrap().weights(grid, i).unwrap();
        let z: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let lhs = w.apply(&z).unwrap();
        let rhs = a * w.apply(&x).unwrap() + b * w.apply(&y).unwrap();
        prop_assert!(close(lhs, rhs, 1e-12), "{lhs} vs {rhs}");
    }

    #[test]
    fn geometric_mle_shifts_with_drift(h in 0.05..0.95f64, v in path(65), c in -2.0..2.0f64, sigma in 0.1..2.0f64) {
        // adding c·t to the log-path adds exactly c to the estimate
        let grid = TimeGrid::new(2.0, 64).unwrap();
        let shifted: Vec<f64> = v.iter().zip(grid.points()).map(|(x, t)| x + c * t).collect();
        let a = mle_geometric(&v, grid, sigma, h, 64).unwrap().value.primary();
        let b = mle_geometric(&shifted, grid, sigma, h, 64).unwrap().value.primary();
        prop_assert!(close(b - a, c, 1e-9), "{} vs {c}", b - a);
    }

    #[test]
    fn weighted_average_is_affine(vals in prop::collection::vec(-10.0..10.0f64, 6), shift in -5.0..5.0f64, scale in 0.1..5.0f64, n in 1usize..=6) {
        let base = weighted_average(&EstimateSequence::new(vals.clone(), 1.0), n).unwrap().value.primary();
        let moved: Vec<f64> = vals.iter().map(|x| shift + scale * x).collect();
        let got = weighted_average(&EstimateSequence::new(moved, 1.0), n).unwrap().value.primary();
        prop_assert!(close(got, shift + scale * base, 1e-12));
    }

    #[test]
    fn standard_aitken_is_affine(vals in prop::collection::vec(-10.0..10.0f64, 5), shift in -5.0..5.0f64, scale in prop_oneof![-4.0..-0.25f64, 0.25..4.0f64], k in 1usize..=3) {
        let (a0, b0, c0) = (vals[k - 1], vals[k], vals[k + 1]);
        prop_assume!((c0 - 2.0 * b0 + a0).abs() > 1e-2);
        let seq = EstimateSequence::new(vals.clone(), 1.0);
        let moved = EstimateSequence::new(vals.iter().map(|x| shift + scale * x).collect(), 1.0);
        if let (Ok(a), Ok(b)) = (aitken(&seq, k, AitkenVariant::Standard), aitken(&moved, k, AitkenVariant::Standard)) {
            let want = shift + scale * a.value.primary();
            prop_assert!(close(b.value.primary(), want, 1e-8), "{} vs {want}", b.value.primary());
        }
    }

    #[test]
    fn printed_aitken_scales(vals in prop::collection::vec(-10.0..10.0f64, 5), scale in prop_oneof![-4.0..-0.25f64, 0.25..4.0f64], k in 1usize..=3) {
        let (a0, b0, c0) = (vals[k - 1], vals[k], vals[k + 1]);
        prop_assume!((c0 + 2.0 * b0 - a0).abs() > 1e-2);
        let seq = EstimateSequence::new(vals.clone(), 1.0);
        let scaled = EstimateSequence::new(vals.iter().map(|x| scale * x).collect(), 1.0);
        if let (Ok(a), Ok(b)) = (aitken(&seq, k, AitkenVariant::AsPrinted), aitken(&scaled, k, AitkenVariant::AsPrinted)) {
            prop_assert!(close(b.value.primary(), scale * a.value.primary(), 1e-8));
        }
    }

    #[test]
    fn exact_estimators_are_symmetric(seed in 0u64..1000, h in 0.1..0.9f64, theta in -2.0..2.0f64) {
        let params: ModelParams = [("K", 3.0), ("theta", theta), ("H", h), ("r", 0.25)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), ParamValue::Number(v)))
            .collect();
        let model = builtin_model(BuiltinModel::LaplacianPower, &params).unwrap();
        let grid = TimeGrid::new(2.0, 32).unwrap();
        let driver = FbmSampler::new(grid, h, FbmMethod::Circulant).unwrap().sample(seed, 0);
        let logs = LogPaths::from_driver(&model, &driver).unwrap();
        for (k, m) in [(1, 2), (1, 3), (2, 3)] {
            let a = exact_coefficients(&logs, k, m, 32).unwrap();
            let b = exact_coefficients(&logs, m, k, 32).unwrap();
            prop_assert!(close(a.alpha, -b.alpha, 1e-12) && close(a.beta, -b.beta, 1e-12) && close(a.delta, -b.delta, 1e-12));
            let x = exact_theta(&logs, k, m, 32, h).unwrap().value.primary();
            let y = exact_theta(&logs, m, k, 32, h).unwrap().value.primary();
            prop_assert!(close(x, y, 1e-10));
            prop_assert!(close(x, theta, 1e-8), "{x} vs {theta}");
        }
    }
}
