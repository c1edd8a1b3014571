//! Closed-form estimators that cancel the common noise between modes.
//!
//! For modes `k, m` the combination `μ_m v_k − μ_k v_m` is free of `W^H`:
//!
//! `δ_{k,m} = θ α_{k,m} + β_{k,m} t^{2H}` with
//! `α_{k,m} = (ν_k μ_m − ν_m μ_k) t`, `β_{k,m} = ½(μ_m² μ_k − μ_k² μ_m)` and
//! `δ_{k,m} = v_k μ_m − v_m μ_k − (ρ_k μ_m − ρ_m μ_k) t`.
//!
//! One pair gives θ (knowing H) or H (knowing θ); two pairs give both.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mle::{EstimateReport, EstimateValue, EstimatorKind};
use crate::solution::LogPaths;
use crate::specmodel::SpectralModel;

/// Relative size below which a coefficient combination counts as zero.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactCoefficients {
    pub k: usize,
    pub m: usize,
    pub t: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
}

fn nearly_zero(x: f64, a: f64, b: f64) -> bool {
    x.abs() <= DEGENERACY_TOLERANCE * (a.abs() + b.abs())
}

fn alpha_rate(model: &SpectralModel, k: usize, m: usize) -> (f64, bool) {
    let (a, b) = (model.nu[k - 1] * model.mu[m - 1], model.nu[m - 1] * model.mu[k - 1]);
    (a - b, nearly_zero(a - b, a, b))
}

fn beta_coef(model: &SpectralModel, k: usize, m: usize) -> (f64, bool) {
    let (mk, mm) = (model.mu[k - 1], model.mu[m - 1]);
    let (a, b) = (mm * mm * mk, mk * mk * mm);
    (0.5 * (a - b), mk == 0.0 || mm == 0.0 || nearly_zero(a - b, a, b))
}

fn check_pair(logs: &LogPaths, k: usize, m: usize) -> Result<()> {
    let model = &logs.model;
    for j in [k, m] {
        let i = model.check_mode(j)?;
        if model.forcing_f[i] != 0.0 || model.forcing_g[i] != 0.0 {
            return Err(Error::Mode {
                mode: j,
                reason: "exact estimators assume an unforced mode".into(),
            });
        }
        logs.mode(j)?;
    }
    if k == m {
        return Err(Error::degenerate(format!("pair ({k},{m}) repeats a mode")));
    }
    Ok(())
}

fn time_at(logs: &LogPaths, t_index: usize) -> Result<f64> {
    if t_index == 0 {
        return Err(Error::invalid("exact estimators need t > 0"));
    }
    logs.grid.check_index(t_index)?;
    Ok(logs.grid.point(t_index))
}

pub fn exact_coefficients(logs: &LogPaths, k: usize, m: usize, t_index: usize) -> Result<ExactCoefficients> {
    check_pair(logs, k, m)?;
    let t = time_at(logs, t_index)?;
    let model = &logs.model;
    let (mk, mm) = (model.mu[k - 1], model.mu[m - 1]);
    let vk = logs.value(k, t_index)?;
    let vm = logs.value(m, t_index)?;
    Ok(ExactCoefficients {
        k,
        m,
        t,
        alpha: alpha_rate(model, k, m).0 * t,
        beta: beta_coef(model, k, m).0,
        delta: vk * mm - vm * mk - (model.rho[k - 1] * mm - model.rho[m - 1] * mk) * t,
    })
}

fn suggest(list: &[(usize, usize)]) -> String {
    if list.is_empty() {
        return "the model has no usable pair".into();
    }
    let shown: Vec<String> = list.iter().take(5).map(|(a, b)| format!("({a},{b})")).collect();
    format!("usable pairs include {}", shown.join(", "))
}

/// θ from modes `k, m` at `t_index`, with `H` known.
pub fn exact_theta(logs: &LogPaths, k: usize, m: usize, t_index: usize, hurst: f64) -> Result<EstimateReport> {
    crate::fbm::check_hurst(hurst)?;
    check_pair(logs, k, m)?;
    if alpha_rate(&logs.model, k, m).1 {
        return Err(Error::degenerate(format!(
            "pair ({k},{m}) has ν_kμ_m = ν_mμ_k, so θ cancels; {}",
            suggest(&pair_feasibility(&logs.model).theta_pairs)
        )));
    }
    let c = exact_coefficients(logs, k, m, t_index)?;
    let value = (c.delta - c.beta * c.t.powf(2.0 * hurst)) / c.alpha;
    if !value.is_finite() {
        return Err(Error::degenerate(format!("θ from pair ({k},{m}) is not finite")));
    }
    Ok(EstimateReport::scalar(
        EstimatorKind::ExactTheta,
        value,
        vec![k, m],
        c.t,
    ))
}

fn hurst_from_power(tau: f64, t: f64, what: &str) -> Result<f64> {
    if t == 1.0 {
        return Err(Error::degenerate(format!("{what}: t = 1 carries no information on H")));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::degenerate(format!(
            "{what}: logarithm argument {tau:e} is not positive and finite at t = {t}"
        )));
    }
    Ok(tau.ln() / (2.0 * t.ln()))
}

/// H from modes `k, m` at `t_index`, with θ known.
pub fn exact_hurst(logs: &LogPaths, k: usize, m: usize, t_index: usize, theta: f64) -> Result<EstimateReport> {
    check_pair(logs, k, m)?;
    if beta_coef(&logs.model, k, m).1 {
        return Err(Error::degenerate(format!(
            "pair ({k},{m}) needs distinct non-zero μ_k, μ_m; H is not identifiable from it; {}",
            suggest(&pair_feasibility(&logs.model).hurst_pairs)
        )));
    }
    let c = exact_coefficients(logs, k, m, t_index)?;
    let value = hurst_from_power((c.delta - theta * c.alpha) / c.beta, c.t, "H from one pair")?;
    Ok(EstimateReport::scalar(
        EstimatorKind::ExactHurst,
        value,
        vec![k, m],
        c.t,
    ))
}

/// [`exact_hurst`] at the final time, retrying at half the horizon when the
/// estimate is unidentifiable there.
pub fn exact_hurst_auto(logs: &LogPaths, k: usize, m: usize, theta: f64) -> Result<EstimateReport> {
    let n = logs.grid.steps();
    match exact_hurst(logs, k, m, n, theta) {
        Err(Error::Degenerate(first)) if beta_coef(&logs.model, k, m).1 => Err(Error::Degenerate(first)),
        Err(Error::Degenerate(first)) if n.is_multiple_of(2) && n >= 2 => {
            let mut r = exact_hurst(logs, k, m, n / 2, theta)
                .map_err(|e| Error::degenerate(format!("{first}; retry at T/2: {e}")))?;
            r.notes = "fell back to t = T/2".into();
            Ok(r)
        }
        other => other,
    }
}

/// θ and H from two mode pairs at `t_index`.
///
/// θ needs `α_{k,m}β_{i,j} ≠ α_{i,j}β_{k,m}`; H additionally needs a positive
/// power `t^{2H}` and `t ≠ 1`. When only θ is identifiable the report
/// carries `hurst = None` and says why in its notes.
pub fn exact_joint(
    logs: &LogPaths,
    first: (usize, usize),
    second: (usize, usize),
    t_index: usize,
) -> Result<EstimateReport> {
    let a = exact_coefficients(logs, first.0, first.1, t_index)?;
    let b = exact_coefficients(logs, second.0, second.1, t_index)?;
    let (p, q) = (a.alpha * b.beta, b.alpha * a.beta);
    let det = p - q;
    if nearly_zero(det, p, q) {
        return Err(Error::degenerate(format!(
            "pairs ({},{}) and ({},{}) give a singular system (α_kmβ_ij = α_ijβ_km)",
            first.0, first.1, second.0, second.1
        )));
    }
    let theta = (a.delta * b.beta - b.delta * a.beta) / det;
    let tau = (a.alpha * b.delta - b.alpha * a.delta) / det;
    let mut modes = vec![first.0, first.1, second.0, second.1];
    modes.sort_unstable();
    modes.dedup();
    let (hurst, notes) = match hurst_from_power(tau, a.t, "H from two pairs") {
        Ok(h) => (Some(h), String::new()),
        Err(e) => (None, e.to_string()),
    };
    Ok(EstimateReport {
        kind: EstimatorKind::ExactJoint,
        value: EstimateValue::Pair { theta, hurst },
        modes,
        horizon: a.t,
        asymptotic_variance: None,
        asymptotic_variance_k: None,
        notes,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PairFeasibility {
    /// Pairs `k < m` usable by [`exact_theta`].
    pub theta_pairs: Vec<(usize, usize)>,
    /// Pairs usable by [`exact_hurst`].
    pub hurst_pairs: Vec<(usize, usize)>,
    /// Mode triples `k < m < j` whose pairs `(k,m), (m,j)` give a regular
    /// system for [`exact_joint`].
    pub joint_triples: Vec<(usize, usize, usize)>,
}

/// Pairs of observable, unforced modes satisfying each estimator's
/// non-degeneracy condition. None of the conditions depend on the data or
/// on `t`.
pub fn pair_feasibility(model: &SpectralModel) -> PairFeasibility {
    let usable: Vec<usize> = (1..=model.num_modes)
        .filter(|&k| model.u0[k - 1] != 0.0 && model.forcing_f[k - 1] == 0.0 && model.forcing_g[k - 1] == 0.0)
        .collect();
    let mut out = PairFeasibility::default();
    for (x, &k) in usable.iter().enumerate() {
        for &m in &usable[x + 1..] {
            if !alpha_rate(model, k, m).1 {
                out.theta_pairs.push((k, m));
            }
            if !beta_coef(model, k, m).1 {
                out.hurst_pairs.push((k, m));
            }
        }
    }
    for (x, &k) in usable.iter().enumerate() {
        for (y, &m) in usable.iter().enumerate().skip(x + 1) {
            for &j in &usable[y + 1..] {
                let (a1, b1) = (alpha_rate(model, k, m).0, beta_coef(model, k, m).0);
                let (a2, b2) = (alpha_rate(model, m, j).0, beta_coef(model, m, j).0);
                let (p, q) = (a1 * b2, a2 * b1);
                if !nearly_zero(p - q, p, q) {
                    out.joint_triples.push((k, m, j));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::{FbmMethod, FbmSampler};
    use crate::grid::TimeGrid;
    use crate::specmodel::{builtin_model, BuiltinModel, ModelParams, ParamValue};

    fn model(kind: BuiltinModel, k: usize, theta: f64, h: f64, r: f64) -> SpectralModel {
        let mut p: ModelParams = [("K", k as f64), ("theta", theta), ("H", h), ("r", r)]
            .iter()
            .map(|(n, v)| (n.to_string(), ParamValue::Number(*v)))
            .collect();
        if kind == BuiltinModel::Heat1d {
            p.remove("r");
        }
        builtin_model(kind, &p).unwrap()
    }

    fn logs(m: &SpectralModel, horizon: f64, seed: u64) -> LogPaths {
        let grid = TimeGrid::new(horizon, 64).unwrap();
        let d = FbmSampler::new(grid, m.hurst, FbmMethod::Circulant)
            .unwrap()
            .sample(seed, 0);
        LogPaths::from_driver(m, &d).unwrap()
    }

    #[test]
    fn heat_theta_matches_log_ratio() {
        let m = model(BuiltinModel::Heat1d, 3, 1.7, 0.3, 0.0);
        for seed in 0..5 {
            let l = logs(&m, 1.0, seed);
            let r = exact_theta(&l, 1, 2, 64, 0.3).unwrap();
            assert!((r.value.primary() - 1.7).abs() < 1e-10 * 1.7);
            // the same number through ln(u_k(T)u_m(0)/(u_m(T)u_k(0)))
            let direct = (l.value(1, 64).unwrap() - l.value(2, 64).unwrap()) / (4.0 - 1.0);
            assert!((r.value.primary() - direct).abs() < 1e-12);
            // antisymmetry
            let swapped = exact_theta(&l, 2, 1, 64, 0.3).unwrap();
            assert!((swapped.value.primary() - r.value.primary()).abs() < 1e-13);
        }
        // heat H is unidentifiable
        let l = logs(&m, 2.0, 0);
        assert!(matches!(exact_hurst(&l, 1, 2, 64, 1.7), Err(Error::Degenerate(_))));
    }

    #[test]
    fn example_two_theta_round_trip() {
        let m = model(BuiltinModel::LaplacianPower, 3, 0.8, 0.3, 0.25);
        let l = logs(&m, 1.0, 7);
        let r = exact_theta(&l, 1, 3, 64, 0.3).unwrap();
        assert!((r.value.primary() - 0.8).abs() < 1e-9 * 0.8);
    }

    #[test]
    fn example_two_hurst_round_trip() {
        let m = model(BuiltinModel::LaplacianPower, 2, 1.0, 0.6, -1.0);
        let l = logs(&m, 2.0, 3);
        let r = exact_hurst(&l, 1, 2, 64, 1.0).unwrap();
        assert!((r.value.primary() - 0.6).abs() < 1e-9);
        // consistent with the joint estimator
        let m3 = model(BuiltinModel::LaplacianPower, 3, 1.5, 0.35, -1.0);
        let l = logs(&m3, 2.0, 4);
        let joint = exact_joint(&l, (1, 2), (2, 3), 64).unwrap();
        let th = exact_theta(&l, 1, 2, 64, 0.35).unwrap().value.primary();
        let h = exact_hurst(&l, 1, 2, 64, th).unwrap().value.primary();
        assert!((joint.value.primary() - 1.5).abs() < 1e-8);
        assert!((joint.value.secondary().unwrap() - 0.35).abs() < 1e-8);
        assert!((h - joint.value.secondary().unwrap()).abs() < 1e-8);
        assert_eq!(joint.modes, vec![1, 2, 3]);
    }

    #[test]
    fn joint_degeneracies() {
        let m = model(BuiltinModel::LaplacianPower, 3, 1.5, 0.35, -1.0);
        let l = logs(&m, 2.0, 4);
        assert!(matches!(exact_joint(&l, (1, 2), (1, 2), 64), Err(Error::Degenerate(_))));
        // t = 1 leaves θ but not H
        let grid = TimeGrid::new(2.0, 64).unwrap();
        let r = exact_joint(&l, (1, 2), (2, 3), grid.index_of(1.0).unwrap()).unwrap();
        assert!((r.value.primary() - 1.5).abs() < 1e-8);
        assert_eq!(r.value.secondary(), None);
        assert!(!r.notes.is_empty());
    }

    #[test]
    fn noise_and_scale_invariance() {
        let m = model(BuiltinModel::LaplacianPower, 3, 0.5, 0.6, 0.25);
        let a = exact_theta(&logs(&m, 2.0, 1), 1, 3, 64, 0.6).unwrap().value.primary();
        let b = exact_theta(&logs(&m, 2.0, 99), 1, 3, 64, 0.6).unwrap().value.primary();
        assert!((a - b).abs() < 1e-12);
        let mut scaled = m.clone();
        scaled.u0 = vec![5.0; 3];
        let c = exact_theta(&logs(&scaled, 2.0, 1), 1, 3, 64, 0.6)
            .unwrap()
            .value
            .primary();
        assert_eq!(a, c);
    }

    #[test]
    fn hurst_preconditions() {
        let m = model(BuiltinModel::LaplacianPower, 2, 1.0, 0.6, -1.0);
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let l = logs(&m, 1.0, 3);
        assert!(matches!(exact_hurst(&l, 1, 2, 64, 1.0), Err(Error::Degenerate(_))));
        // T = 1 falls back to T/2
        let r = exact_hurst_auto(&l, 1, 2, 1.0).unwrap();
        assert_eq!(r.horizon, grid.point(32));
        assert!((r.value.primary() - 0.6).abs() < 1e-8);
        // a wildly wrong θ drives the log argument negative
        assert!(exact_hurst(&logs(&m, 2.0, 3), 1, 2, 64, 1e6).is_err());
    }

    #[test]
    fn feasibility() {
        let heat = model(BuiltinModel::Heat1d, 3, 1.0, 0.5, 0.0);
        let f = pair_feasibility(&heat);
        assert_eq!(f.theta_pairs, vec![(1, 2), (1, 3), (2, 3)]);
        assert!(f.hurst_pairs.is_empty());
        assert!(f.joint_triples.is_empty());

        let ex2 = model(BuiltinModel::LaplacianPower, 3, 1.0, 0.5, 0.25);
        let f = pair_feasibility(&ex2);
        assert_eq!(f.hurst_pairs.len(), 3);
        assert_eq!(f.joint_triples, vec![(1, 2, 3)]);

        let single = model(BuiltinModel::Heat1d, 1, 1.0, 0.5, 0.0);
        assert_eq!(pair_feasibility(&single), PairFeasibility::default());

        let flat = model(BuiltinModel::LaplacianPower, 2, 1.0, 0.5, 0.0);
        assert!(pair_feasibility(&flat).theta_pairs.is_empty());
    }

    #[test]
    fn degenerate_theta_pair_suggests_alternatives() {
        let flat = model(BuiltinModel::LaplacianPower, 3, 1.0, 0.5, 0.0);
        let l = logs(&flat, 1.0, 0);
        let err = exact_theta(&l, 1, 2, 64, 0.5).unwrap_err();
        assert!(err.to_string().contains("no usable pair"), "{err}");
    }
}
