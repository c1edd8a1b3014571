//! Maximum-likelihood estimators of the drift parameter.
//!
//! For geometric fBM `v(t) = θt − ½σ²t^{2H} + σW^H(t)` the transformed
//! observation is `ṽ(t) = θ b1 t^{2−2H} − σ² H b2 t + σ M_t` with
//! `⟨M⟩_t = t^{2−2H}`, and the likelihood is maximized in closed form.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::format_float;
use crate::grid::TimeGrid;
use crate::mkernel::{kernel_constants, KernelConstants, KernelTransform, TransformWeights, TransformedPath};
use crate::solution::LogPaths;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    MleGeometric,
    MleMode,
    WeightedAvg,
    Aitken,
    ExactTheta,
    ExactHurst,
    ExactJoint,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::MleGeometric => "mle_geometric",
            EstimatorKind::MleMode => "mle_mode",
            EstimatorKind::WeightedAvg => "weighted_avg",
            EstimatorKind::Aitken => "aitken",
            EstimatorKind::ExactTheta => "exact_theta",
            EstimatorKind::ExactHurst => "exact_hurst",
            EstimatorKind::ExactJoint => "exact_joint",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mle_geometric" => EstimatorKind::MleGeometric,
            "mle_mode" => EstimatorKind::MleMode,
            "weighted_avg" => EstimatorKind::WeightedAvg,
            "aitken" => EstimatorKind::Aitken,
            "exact_theta" => EstimatorKind::ExactTheta,
            "exact_hurst" => EstimatorKind::ExactHurst,
            "exact_joint" => EstimatorKind::ExactJoint,
            other => return Err(Error::invalid(format!("unknown estimator '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EstimateValue {
    Scalar(f64),
    /// Joint estimate; `hurst` is `None` when only θ was identifiable.
    Pair {
        theta: f64,
        hurst: Option<f64>,
    },
}

impl EstimateValue {
    /// The scalar, or θ of a pair.
    pub fn primary(&self) -> f64 {
        match *self {
            EstimateValue::Scalar(x) => x,
            EstimateValue::Pair { theta, .. } => theta,
        }
    }

    pub fn secondary(&self) -> Option<f64> {
        match *self {
            EstimateValue::Scalar(_) => None,
            EstimateValue::Pair { hurst, .. } => hurst,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub kind: EstimatorKind,
    pub value: EstimateValue,
    pub modes: Vec<usize>,
    /// Observation time `t` the estimate uses.
    pub horizon: f64,
    /// Limit variance of `t^{1−H}(θ̂ − θ)` as `t → ∞`.
    pub asymptotic_variance: Option<f64>,
    /// Limit variance of `|ν_k/μ_k|(θ̂ − θ)` as `k → ∞` at fixed `t`.
    pub asymptotic_variance_k: Option<f64>,
    pub notes: String,
}

pub const REPORT_CSV_HEADER: [&str; 9] = [
    "kind",
    "value",
    "value2",
    "modes",
    "t",
    "asymptotic_variance",
    "asymptotic_variance_k",
    "status",
    "notes",
];

fn opt_float(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

fn mode_list(modes: &[usize]) -> String {
    modes.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

impl EstimateReport {
    pub(crate) fn scalar(kind: EstimatorKind, value: f64, modes: Vec<usize>, horizon: f64) -> Self {
        Self {
            kind,
            value: EstimateValue::Scalar(value),
            modes,
            horizon,
            asymptotic_variance: None,
            asymptotic_variance_k: None,
            notes: String::new(),
        }
    }

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.kind.to_string(),
            format_float(self.value.primary()),
            opt_float(self.value.secondary()),
            mode_list(&self.modes),
            format_float(self.horizon),
            opt_float(self.asymptotic_variance),
            opt_float(self.asymptotic_variance_k),
            "ok".into(),
            self.notes.clone(),
        ]
    }

    /// Row for an estimator that failed; the value columns stay empty.
    pub fn failed_record(kind: &str, modes: &[usize], horizon: f64, err: &Error) -> Vec<String> {
        vec![
            kind.to_string(),
            String::new(),
            String::new(),
            mode_list(modes),
            format_float(horizon),
            String::new(),
            String::new(),
            "failed".into(),
            err.to_string(),
        ]
    }

    pub fn write_csv<W: Write>(reports: &[EstimateReport], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(REPORT_CSV_HEADER)?;
        for r in reports {
            w.write_record(r.csv_record())?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_time(grid: TimeGrid, t_index: usize) -> Result<f64> {
    if t_index == 0 {
        return Err(Error::invalid("estimators need t > 0"));
    }
    grid.check_index(t_index)?;
    Ok(grid.point(t_index))
}

fn geometric_value(k: &KernelConstants, v_tilde: f64, sigma: f64, t: f64) -> f64 {
    let h = k.hurst;
    v_tilde / (k.b1 * t.powf(2.0 - 2.0 * h)) + sigma * sigma * h * k.b2 / (k.b1 * t.powf(1.0 - 2.0 * h))
}

/// `θ̂_t = ṽ(t)/(b1 t^{2−2H}) + σ² H b2/(b1 t^{1−2H})` for a geometric fBM
/// log-path `v` on `grid`.
pub fn mle_geometric(v: &[f64], grid: TimeGrid, sigma: f64, hurst: f64, t_index: usize) -> Result<EstimateReport> {
    check_time(grid, t_index)?;
    let weights = KernelTransform::new(hurst)?.weights(grid, t_index)?;
    mle_geometric_with(&weights, v, sigma)
}

/// [`mle_geometric`] with precomputed transform weights.
pub fn mle_geometric_with(weights: &TransformWeights, v: &[f64], sigma: f64) -> Result<EstimateReport> {
    if !sigma.is_finite() {
        return Err(Error::invalid("sigma must be finite"));
    }
    if v.first().copied() != Some(0.0) {
        return Err(Error::invalid("log-path must start at 0"));
    }
    let t = check_time(weights.grid, weights.t_index)?;
    let k = kernel_constants(weights.hurst)?;
    let value = geometric_value(&k, weights.apply(v)?, sigma, t);
    let mut r = EstimateReport::scalar(EstimatorKind::MleGeometric, value, vec![], t);
    r.asymptotic_variance = Some(sigma * sigma / (k.b1 * k.b1));
    Ok(r)
}

fn check_mode_estimable(logs: &LogPaths, k: usize) -> Result<()> {
    let m = &logs.model;
    let i = m.check_mode(k)?;
    if m.forcing_f[i] != 0.0 || m.forcing_g[i] != 0.0 {
        return Err(Error::Mode {
            mode: k,
            reason: "estimators assume an unforced mode".into(),
        });
    }
    if m.nu[i] == 0.0 {
        return Err(Error::Mode {
            mode: k,
            reason: "ν_k = 0, so θ is not identifiable from this mode".into(),
        });
    }
    logs.mode(k)?;
    Ok(())
}

/// Mode MLE `ṽ_k(t)/(ν_k b1 t^{2−2H}) + H b2 μ_k²/(ν_k b1 t^{1−2H}) − ρ_k/ν_k`.
pub fn mle_mode(logs: &LogPaths, k: usize, t_index: usize) -> Result<EstimateReport> {
    check_mode_estimable(logs, k)?;
    check_time(logs.grid, t_index)?;
    let weights = KernelTransform::new(logs.hurst())?.weights(logs.grid, t_index)?;
    mle_mode_with(logs, k, &weights)
}

/// [`mle_mode`] with precomputed transform weights.
pub fn mle_mode_with(logs: &LogPaths, k: usize, weights: &TransformWeights) -> Result<EstimateReport> {
    check_mode_estimable(logs, k)?;
    if weights.grid != logs.grid || weights.hurst != logs.hurst() {
        return Err(Error::invalid("transform weights do not match the observations"));
    }
    let t = check_time(logs.grid, weights.t_index)?;
    let consts = kernel_constants(logs.hurst())?;
    let m = &logs.model;
    let (rho, nu, mu) = (m.rho[k - 1], m.nu[k - 1], m.mu[k - 1]);
    let v_tilde = weights.apply(logs.mode(k)?)?;
    // the mode is geometric fBM with drift ρ_k + θν_k and volatility μ_k
    let value = (geometric_value(&consts, v_tilde, mu, t) - rho) / nu;
    let b1 = consts.b1;
    let mut r = EstimateReport::scalar(EstimatorKind::MleMode, value, vec![k], t);
    r.asymptotic_variance = Some(mu * mu / (b1 * b1 * nu * nu));
    r.asymptotic_variance_k = Some(t.powf(2.0 * consts.hurst - 2.0) / (b1 * b1));
    Ok(r)
}

/// Log of the likelihood ratio of drift `θ` against the driftless law of
/// `σM`, given the transformed observation `ṽ` at every grid point up to
/// `t_index`.
///
/// The stochastic integral `∫ s^{2H−1} dṽ` uses the exact interval means of
/// `s^{2H−1}`; the `ds` integrals are evaluated in closed form. The result
/// is concave in `θ` with curvature `−b1² t^{2−2H}/σ²` and is maximized at
/// the [`mle_geometric`] value.
pub fn log_likelihood_ratio(v_tilde: &TransformedPath, t_index: usize, theta: f64, sigma: f64) -> Result<f64> {
    if !(sigma != 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("sigma must be non-zero"));
    }
    let grid = v_tilde.grid;
    let t = check_time(grid, t_index)?;
    if v_tilde.values.len() <= t_index {
        return Err(Error::invalid("transformed path is shorter than t_index"));
    }
    let k = kernel_constants(v_tilde.hurst)?;
    let h = k.hurst;
    let h2 = 2.0 * h;
    let s2 = sigma * sigma;
    let c = s2 * h * k.b2 / (2.0 - h2);
    let dt = grid.dt();
    let mut j = 0.0;
    for i in 1..=t_index {
        let mean = (grid.point(i).powf(h2) - grid.point(i - 1).powf(h2)) / (h2 * dt);
        j += mean * (v_tilde.values[i] - v_tilde.values[i - 1]);
    }
    let y = v_tilde.values[t_index];
    let quad = theta * theta * k.b1 * k.b1 * t.powf(2.0 - h2) - 2.0 * theta * k.b1 * s2 * h * k.b2 * t
        + c * c * (2.0 - h2) * t.powf(h2) / h2;
    Ok(theta * k.b1 * y / s2 - c * j / s2 - quad / (2.0 * s2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::{FbmMethod, FbmSampler};
    use crate::mkernel::kernel_constants;
    use crate::specmodel::{builtin_model, BuiltinModel, ModelParams, ParamValue, SpectralModel};

    fn geometric(grid: TimeGrid, theta: f64, sigma: f64, h: f64, w: &[f64]) -> Vec<f64> {
        grid.points()
            .iter()
            .zip(w)
            .map(|(&t, &w)| theta * t - 0.5 * sigma * sigma * t.powf(2.0 * h) + sigma * w)
            .collect()
    }

    #[test]
    fn brownian_case_is_classical() {
        let grid = TimeGrid::new(2.0, 64).unwrap();
        let d = FbmSampler::new(grid, 0.5, FbmMethod::Circulant).unwrap().sample(4, 0);
        let v = geometric(grid, 0.9, 0.4, 0.5, &d.values);
        let r = mle_geometric(&v, grid, 0.4, 0.5, 64).unwrap();
        let classical = v[64] / 2.0 + 0.08;
        assert!((r.value.primary() - classical).abs() < 1e-14);
        assert_eq!(r.asymptotic_variance, Some(0.16000000000000003));
    }

    #[test]
    fn noise_free_recovers_theta() {
        for h in [0.2, 0.45, 0.7] {
            let grid = TimeGrid::new(1.5, 256).unwrap();
            let v = geometric(grid, 1.3, 0.5, h, &vec![0.0; 257]);
            let r = mle_geometric(&v, grid, 0.5, h, 256).unwrap();
            assert!((r.value.primary() - 1.3).abs() < 1e-8, "H={h}: {}", r.value.primary());
        }
    }

    #[test]
    fn rejects_time_zero() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        assert!(mle_geometric(&[0.0; 5], grid, 1.0, 0.3, 0).is_err());
    }

    fn heat(theta: f64, h: f64) -> SpectralModel {
        let p: ModelParams = [("K", 2.0), ("theta", theta), ("H", h)]
            .iter()
            .map(|(n, v)| (n.to_string(), ParamValue::Number(*v)))
            .collect();
        builtin_model(BuiltinModel::Heat1d, &p).unwrap()
    }

    #[test]
    fn heat_mode_formula() {
        let h = 0.35;
        let grid = TimeGrid::new(1.0, 128).unwrap();
        let d = FbmSampler::new(grid, h, FbmMethod::Circulant).unwrap().sample(8, 1);
        let logs = LogPaths::from_driver(&heat(1.0, h), &d).unwrap();
        let k = kernel_constants(h).unwrap();
        let w = KernelTransform::new(h).unwrap().weights(grid, 128).unwrap();
        for mode in [1usize, 2] {
            let kk = (mode * mode) as f64;
            let r = mle_mode_with(&logs, mode, &w).unwrap();
            let vt = w.apply(logs.mode(mode).unwrap()).unwrap();
            let expected = -vt / (kk * k.b1) - h * k.b2 / (kk * k.b1);
            assert!((r.value.primary() - expected).abs() < 1e-12 * expected.abs().max(1.0));
            assert_eq!(r.modes, vec![mode]);
            assert!((r.asymptotic_variance.unwrap() - 1.0 / (k.b1 * k.b1 * kk * kk)).abs() < 1e-15);
        }
    }

    #[test]
    fn noise_free_mode_is_exact() {
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let m = SpectralModel::new(vec![1.0], vec![0.2], vec![-3.0], vec![0.0], 0.7, 0.3, vec![1.0], 1.0).unwrap();
        let d = FbmSampler::new(grid, 0.3, FbmMethod::Circulant).unwrap().sample(0, 0);
        let logs = LogPaths::from_driver(&m, &d).unwrap();
        let r = mle_mode(&logs, 1, 32).unwrap();
        assert!((r.value.primary() - 0.7).abs() < 1e-9);
    }

    #[test]
    fn mode_preconditions() {
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let m = SpectralModel::new(
            vec![1.0, 2.0],
            vec![0.2, 0.0],
            vec![0.0, -1.0],
            vec![1.0, 1.0],
            0.7,
            0.5,
            vec![1.0, 0.0],
            1.0,
        )
        .unwrap();
        let d = FbmSampler::new(grid, 0.5, FbmMethod::Circulant).unwrap().sample(0, 0);
        let logs = LogPaths::from_driver(&m, &d).unwrap();
        assert!(matches!(mle_mode(&logs, 1, 8), Err(Error::Mode { mode: 1, .. })));
        assert!(matches!(mle_mode(&logs, 2, 8), Err(Error::Mode { mode: 2, .. })));
        assert!(mle_mode(&logs, 3, 8).is_err());
    }

    #[test]
    fn likelihood_maximizer_and_curvature() {
        let h = 0.3;
        let sigma = 0.6;
        let grid = TimeGrid::new(1.0, 256).unwrap();
        let d = FbmSampler::new(grid, h, FbmMethod::Circulant).unwrap().sample(12, 3);
        let v = geometric(grid, 0.8, sigma, h, &d.values);
        let kt = KernelTransform::new(h).unwrap();
        let path = kt.transform_series(grid, &v).unwrap();
        let mle = mle_geometric(&v, grid, sigma, h, 256).unwrap().value.primary();
        let f = |th: f64| log_likelihood_ratio(&path, 256, th, sigma).unwrap();
        let eps = 1e-3;
        let score = (f(mle + eps) - f(mle - eps)) / (2.0 * eps);
        let curv = (f(mle + eps) - 2.0 * f(mle) + f(mle - eps)) / (eps * eps);
        let b1 = kernel_constants(h).unwrap().b1;
        assert!(score.abs() < 1e-6, "{score}");
        assert!((curv + b1 * b1 / (sigma * sigma)).abs() < 1e-4, "{curv}");
        assert!(f(mle) > f(mle + 0.1) && f(mle) > f(mle - 0.1));
    }
}
