//! Diagonalizable SPDE in spectral coordinates.
//!
//! Mode `k` (numbered from 1 throughout the public API) carries the
//! eigenvalues `λ_k` of Λ, `ρ_k` of A₀, `ν_k` of A₁ and `μ_k` of M, and
//! evolves as `du_k = (ρ_k + θν_k) u_k dt + μ_k u_k dW^H`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::check_hurst;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    pub num_modes: usize,
    pub lambda: Vec<f64>,
    pub rho: Vec<f64>,
    pub nu: Vec<f64>,
    pub mu: Vec<f64>,
    pub theta: f64,
    pub hurst: f64,
    pub u0: Vec<f64>,
    pub order_m: f64,
    pub forcing_f: Vec<f64>,
    pub forcing_g: Vec<f64>,
}

impl SpectralModel {
    /// Validates and builds a model without forcing.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        lambda: Vec<f64>,
        rho: Vec<f64>,
        nu: Vec<f64>,
        mu: Vec<f64>,
        theta: f64,
        hurst: f64,
        u0: Vec<f64>,
        order_m: f64,
    ) -> Result<Self> {
        let k = lambda.len();
        let model = Self {
            num_modes: k,
            lambda,
            rho,
            nu,
            mu,
            theta,
            hurst,
            u0,
            order_m,
            forcing_f: vec![0.0; k],
            forcing_g: vec![0.0; k],
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_forcing(mut self, f: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        self.forcing_f = f;
        self.forcing_g = g;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.num_modes;
        if k == 0 {
            return Err(Error::invalid("model has no modes"));
        }
        for (name, seq) in [
            ("lambda", &self.lambda),
            ("rho", &self.rho),
            ("nu", &self.nu),
            ("mu", &self.mu),
            ("u0", &self.u0),
            ("forcing_f", &self.forcing_f),
            ("forcing_g", &self.forcing_g),
        ] {
            if seq.len() != k {
                return Err(Error::invalid(format!(
                    "{name} has {} entries, expected {k}",
                    seq.len()
                )));
            }
            if seq.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("{name} has non-finite entries")));
            }
        }
        if self.lambda.iter().any(|&l| l <= 0.0) {
            return Err(Error::invalid("lambda entries must be positive"));
        }
        check_hurst(self.hurst)?;
        if !self.theta.is_finite() {
            return Err(Error::invalid("theta must be finite"));
        }
        if !(self.order_m.is_finite() && self.order_m > 0.0) {
            return Err(Error::invalid("order m must be positive"));
        }
        Ok(())
    }

    pub(crate) fn check_mode(&self, k: usize) -> Result<usize> {
        if k == 0 || k > self.num_modes {
            return Err(Error::invalid(format!("mode {k} outside 1..={}", self.num_modes)));
        }
        Ok(k - 1)
    }

    /// `α_k(θ) = ρ_k + θ ν_k` for mode `k` (1-based) at the model's θ.
    pub fn alpha(&self, k: usize) -> f64 {
        self.alpha_at(k, self.theta)
    }

    pub fn alpha_at(&self, k: usize, theta: f64) -> f64 {
        self.rho[k - 1] + theta * self.nu[k - 1]
    }

    pub fn has_forcing(&self) -> bool {
        self.forcing_f.iter().chain(&self.forcing_g).any(|&x| x != 0.0)
    }

    pub fn with_hurst(&self, hurst: f64) -> Result<Self> {
        check_hurst(hurst)?;
        Ok(Self { hurst, ..self.clone() })
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        Self { theta, ..self.clone() }
    }

    /// Parses a model document (`schema = 1`), either explicit sequences or
    /// a builtin name plus `[params]`.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: ModelDocument = toml::from_str(text).map_err(|e| Error::ModelFile(e.to_string()))?;
        match raw.schema {
            Some(MODEL_SCHEMA_VERSION) => {}
            Some(v) => return Err(Error::ModelFile(format!("unsupported schema version {v}"))),
            None => return Err(Error::ModelFile("missing `schema = 1`".into())),
        }
        raw.into_model()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Explicit-sequence model document.
    pub fn to_toml_string(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Out<'a> {
            schema: u32,
            #[serde(flatten)]
            model: &'a SpectralModel,
        }
        toml::to_string(&Out {
            schema: MODEL_SCHEMA_VERSION,
            model: self,
        })
        .map_err(|e| Error::ModelFile(e.to_string()))
    }
}

/// Scalar or list parameter of a builtin model; scalars broadcast over modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    List(Vec<f64>),
}

impl FromStr for ParamValue {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("cannot parse '{x}' as a number")))
        };
        if s.contains(',') {
            Ok(ParamValue::List(s.split(',').map(parse).collect::<Result<_>>()?))
        } else {
            Ok(ParamValue::Number(parse(s)?))
        }
    }
}

pub type ModelParams = BTreeMap<String, ParamValue>;

/// Model description as stored in files and experiment plans.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ModelParams>,
    pub num_modes: Option<usize>,
    pub lambda: Option<Vec<f64>>,
    pub rho: Option<Vec<f64>>,
    pub nu: Option<Vec<f64>>,
    pub mu: Option<Vec<f64>>,
    pub theta: Option<f64>,
    pub hurst: Option<f64>,
    pub u0: Option<Vec<f64>>,
    pub order_m: Option<f64>,
    pub forcing_f: Option<Vec<f64>>,
    pub forcing_g: Option<Vec<f64>>,
}

impl ModelDocument {
    pub fn builtin(name: &str, params: ModelParams) -> Self {
        Self {
            builtin: Some(name.to_string()),
            params: Some(params),
            ..Default::default()
        }
    }

    pub fn into_model(self) -> Result<SpectralModel> {
        if let Some(name) = self.builtin {
            let explicit = self.lambda.is_some()
                || self.rho.is_some()
                || self.nu.is_some()
                || self.mu.is_some()
                || self.u0.is_some();
            if explicit {
                return Err(Error::ModelFile(
                    "give either a builtin model or explicit sequences, not both".into(),
                ));
            }
            let kind: BuiltinModel = name.parse()?;
            return builtin_model(kind, &self.params.unwrap_or_default());
        }
        let need =
            |name: &str, v: Option<Vec<f64>>| v.ok_or_else(|| Error::ModelFile(format!("missing field `{name}`")));
        let lambda = need("lambda", self.lambda)?;
        let k = lambda.len();
        if let Some(n) = self.num_modes {
            if n != k {
                return Err(Error::ModelFile(format!("num_modes = {n} but lambda has {k} entries")));
            }
        }
        let model = SpectralModel::new(
            lambda,
            need("rho", self.rho)?,
            need("nu", self.nu)?,
            need("mu", self.mu)?,
            self.theta
                .ok_or_else(|| Error::ModelFile("missing field `theta`".into()))?,
            self.hurst
                .ok_or_else(|| Error::ModelFile("missing field `hurst`".into()))?,
            need("u0", self.u0)?,
            self.order_m.unwrap_or(1.0),
        )?;
        model.with_forcing(
            self.forcing_f.unwrap_or_else(|| vec![0.0; k]),
            self.forcing_g.unwrap_or_else(|| vec![0.0; k]),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinModel {
    /// `du = θ u_xx dt + u dW^H` on (0,1) with Dirichlet conditions.
    Heat1d,
    /// `du = (Δu + θu) dt + (1−Δ)^r u dW^H` in `d` dimensions.
    LaplacianPower,
}

impl FromStr for BuiltinModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heat_1d" => Ok(BuiltinModel::Heat1d),
            "laplacian_power" => Ok(BuiltinModel::LaplacianPower),
            other => Err(Error::invalid(format!("unknown builtin model '{other}'"))),
        }
    }
}

impl fmt::Display for BuiltinModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BuiltinModel::Heat1d => "heat_1d",
            BuiltinModel::LaplacianPower => "laplacian_power",
        })
    }
}

fn scalar_param(params: &ModelParams, name: &str, default: Option<f64>) -> Result<f64> {
    match params.get(name) {
        Some(ParamValue::Number(x)) => Ok(*x),
        Some(ParamValue::List(_)) => Err(Error::invalid(format!("parameter {name} must be a scalar"))),
        None => default.ok_or_else(|| Error::invalid(format!("missing parameter {name}"))),
    }
}

fn mode_count(params: &ModelParams) -> Result<usize> {
    let k = scalar_param(params, "K", None)?;
    if !(k >= 1.0 && k.fract() == 0.0 && k <= 1e7) {
        return Err(Error::invalid(format!("K must be a positive integer, got {k}")));
    }
    Ok(k as usize)
}

fn initial_values(params: &ModelParams, k: usize) -> Result<Vec<f64>> {
    let u0 = match params.get("u0") {
        Some(ParamValue::Number(x)) => vec![*x; k],
        Some(ParamValue::List(v)) if v.len() == k => v.clone(),
        Some(ParamValue::List(v)) => return Err(Error::invalid(format!("u0 has {} entries, expected {k}", v.len()))),
        None => vec![1.0; k],
    };
    if u0.iter().all(|&x| x == 0.0) {
        return Err(Error::invalid("initial condition u0 is identically zero"));
    }
    Ok(u0)
}

/// Builds one of the builtin spectra.
///
/// `heat_1d` takes `K, theta, H, u0`; `laplacian_power` takes
/// `K, theta, H, r, d, u0` (with `d` defaulting to 1). `u0` may be a scalar
/// (broadcast) or a list of `K` values and defaults to all ones.
pub fn builtin_model(kind: BuiltinModel, params: &ModelParams) -> Result<SpectralModel> {
    let k = mode_count(params)?;
    let theta = scalar_param(params, "theta", None)?;
    let hurst = scalar_param(params, "H", None)?;
    check_hurst(hurst)?;
    let u0 = initial_values(params, k)?;
    let idx = (1..=k).map(|i| i as f64);
    match kind {
        BuiltinModel::Heat1d => SpectralModel::new(
            idx.clone().collect(),
            vec![0.0; k],
            idx.map(|i| -i * i).collect(),
            vec![1.0; k],
            theta,
            hurst,
            u0,
            1.0,
        ),
        BuiltinModel::LaplacianPower => {
            let r = scalar_param(params, "r", None)?;
            let d = scalar_param(params, "d", Some(1.0))?;
            if !(d >= 1.0 && d.fract() == 0.0) {
                return Err(Error::invalid(format!(
                    "dimension d must be a positive integer, got {d}"
                )));
            }
            let sigma: Vec<f64> = idx.map(|i| -i.powf(2.0 / d)).collect();
            SpectralModel::new(
                sigma.iter().map(|s| (1.0 - s).sqrt()).collect(),
                sigma.clone(),
                vec![1.0; k],
                sigma.iter().map(|s| (1.0 - s).powf(r)).collect(),
                theta,
                hurst,
                u0,
                1.0,
            )
        }
    }
}

/// Behaviour of a checked expression over the last three carried modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    /// Fewer than three modes.
    Unknown,
    Decreasing,
    Flat,
    /// Increasing with shrinking steps.
    Saturating,
    /// Increasing with non-shrinking steps: no finite bound survives k → ∞.
    Diverging,
}

fn classify_trend(values: &[f64]) -> Trend {
    let n = values.len();
    if n < 3 {
        return Trend::Unknown;
    }
    let (a, b, c) = (values[n - 3], values[n - 2], values[n - 1]);
    let scale = a.abs().max(b.abs()).max(c.abs()).max(1e-300);
    let d1 = b - a;
    let d2 = c - b;
    if d2.abs() <= 1e-12 * scale {
        Trend::Flat
    } else if d2 < 0.0 {
        Trend::Decreasing
    } else if d2 >= d1 {
        Trend::Diverging
    } else {
        Trend::Saturating
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicityReport {
    pub holds: bool,
    /// The margin δ that was checked, or 0 when the conditions fail.
    pub delta: f64,
    /// Mode (1-based) and value of the largest `λ_k^{-2m} |ρ_k + θν_k|`.
    pub worst_mode_c1: (usize, f64),
    /// Mode and value of the largest `2(ρ_k + θν_k) + μ_k² + δλ_k^{2m}`.
    pub worst_mode_c2: (usize, f64),
    pub c1_bound: f64,
    pub c2_bound: f64,
    pub trend_c1: Trend,
    pub trend_c2: Trend,
    pub bounds_supplied: bool,
}

impl fmt::Display for ParabolicityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "parabolic: {}", self.holds)?;
        writeln!(f, "delta: {}", self.delta)?;
        writeln!(
            f,
            "condition 1: worst mode {} value {:.6e} bound {:.6e} trend {:?}",
            self.worst_mode_c1.0, self.worst_mode_c1.1, self.c1_bound, self.trend_c1
        )?;
        write!(
            f,
            "condition 2: worst mode {} value {:.6e} bound {:.6e} trend {:?}",
            self.worst_mode_c2.0, self.worst_mode_c2.1, self.c2_bound, self.trend_c2
        )
    }
}

/// Checks `λ_k^{-2m}|ρ_k+θν_k| ≤ C₁` and `2(ρ_k+θν_k) + μ_k² + δλ_k^{2m} ≤ C₂`
/// over the carried modes and both ends of `theta_range` (both sides are
/// affine in θ).
///
/// With `bounds = Some((C₁, C₂))` the verdict is a plain comparison. Without
/// bounds the constants are taken from the data: a condition whose tail is
/// [`Trend::Diverging`] fails, and its recorded bound is then the supremum
/// over the modes before the last one (which the last mode exceeds).
pub fn validate_parabolicity(
    model: &SpectralModel,
    delta: f64,
    theta_range: (f64, f64),
    bounds: Option<(f64, f64)>,
) -> Result<ParabolicityReport> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    if model.num_modes == 0 {
        return Err(Error::invalid("model has no modes"));
    }
    let (lo, hi) = theta_range;
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid("theta range is empty"));
    }
    let k = model.num_modes;
    let mut c1 = Vec::with_capacity(k);
    let mut c2 = Vec::with_capacity(k);
    for i in 0..k {
        let l2m = model.lambda[i].powf(2.0 * model.order_m);
        let e = |theta: f64| {
            let alpha = model.rho[i] + theta * model.nu[i];
            (alpha.abs() / l2m, 2.0 * alpha + model.mu[i] * model.mu[i] + delta * l2m)
        };
        let (a1, a2) = e(lo);
        let (b1, b2) = e(hi);
        c1.push(a1.max(b1));
        c2.push(a2.max(b2));
    }
    let argmax = |v: &[f64]| {
        v.iter().enumerate().fold(
            (1, f64::NEG_INFINITY),
            |best, (i, &x)| if x > best.1 { (i + 1, x) } else { best },
        )
    };
    let worst1 = argmax(&c1);
    let worst2 = argmax(&c2);
    let trend_c1 = classify_trend(&c1);
    let trend_c2 = classify_trend(&c2);

    let (c1_bound, c2_bound) = match bounds {
        Some(b) => b,
        None => {
            let auto = |v: &[f64], trend: Trend, worst: f64| {
                if trend == Trend::Diverging {
                    v[..v.len() - 1].iter().copied().fold(f64::NEG_INFINITY, f64::max)
                } else {
                    worst
                }
            };
            (auto(&c1, trend_c1, worst1.1), auto(&c2, trend_c2, worst2.1))
        }
    };
    let holds = worst1.1 <= c1_bound && worst2.1 <= c2_bound;
    Ok(ParabolicityReport {
        holds,
        delta: if holds { delta } else { 0.0 },
        worst_mode_c1: worst1,
        worst_mode_c2: worst2,
        c1_bound,
        c2_bound,
        trend_c1,
        trend_c2,
        bounds_supplied: bounds.is_some(),
    })
}
