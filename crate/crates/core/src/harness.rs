//! Replicated Monte Carlo experiments.
//!
//! Replication `r` samples one driver from stream `(seed, r)` for each
//! Hurst value of the plan, simulates every mode from it and evaluates the
//! whole roster on the same data, so estimator comparisons are paired.
//! Replications run on the rayon pool; results are collected and reduced in
//! replication order, so tables are bit-identical across runs and thread
//! counts.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accel::{aitken, weighted_average, AitkenVariant, EstimateSequence};
use crate::error::{Error, Result};
use crate::exact::{exact_hurst, exact_joint, exact_theta};
use crate::fbm::{format_float, FbmMethod, FbmSampler};
use crate::grid::TimeGrid;
use crate::mkernel::{kernel_constants, KernelTransform, TransformWeights};
use crate::mle::mle_mode_with;
use crate::solution::LogPaths;
use crate::specmodel::{ModelDocument, SpectralModel};
use crate::stats::{self, KsResult};

/// Failure share above which a roster entry is flagged.
pub const FAILURE_FLAG_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RosterKind {
    MleMode,
    WeightedAvg,
    Aitken,
    ExactTheta,
    ExactHurst,
    ExactJoint,
    /// Transform of the driver itself: the fundamental martingale `M_t`.
    Martingale,
}

impl RosterKind {
    pub fn name(self) -> &'static str {
        match self {
            RosterKind::MleMode => "mle_mode",
            RosterKind::WeightedAvg => "weighted_avg",
            RosterKind::Aitken => "aitken",
            RosterKind::ExactTheta => "exact_theta",
            RosterKind::ExactHurst => "exact_hurst",
            RosterKind::ExactJoint => "exact_joint",
            RosterKind::Martingale => "martingale",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RosterEntry {
    pub kind: RosterKind,
    /// Mode indices (`mle_mode`, `aitken`).
    #[serde(default)]
    pub modes: Vec<usize>,
    /// Mode pairs (`exact_*`; `exact_joint` takes exactly two).
    #[serde(default)]
    pub pairs: Vec<[usize; 2]>,
    /// Prefix lengths `N` (`weighted_avg`).
    #[serde(default)]
    pub prefixes: Vec<usize>,
    /// Weights `β_k` (`weighted_avg`); unit weights when absent.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub variant: AitkenVariant,
    /// Observation times; each must be a grid point. Defaults to the horizon.
    #[serde(default)]
    pub t: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub name: String,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_method")]
    pub method: FbmMethod,
    /// Hurst values to sweep; empty means the model's own H.
    #[serde(default)]
    pub hurst: Vec<f64>,
    /// Also keep every per-replication estimate.
    #[serde(default)]
    pub raw: bool,
    /// Summary CSV path used by the command-line runner.
    #[serde(default)]
    pub output: Option<String>,
    pub model: ModelDocument,
    pub grid: GridSpec,
    pub roster: Vec<RosterEntry>,
}

fn default_method() -> FbmMethod {
    FbmMethod::Circulant
}

const BUNDLED: [(&str, &str); 6] = [
    ("heat_unbiasedness", include_str!("../plans/heat_unbiasedness.toml")),
    ("heat_t_rate", include_str!("../plans/heat_t_rate.toml")),
    (
        "example2_kconsistency",
        include_str!("../plans/example2_kconsistency.toml"),
    ),
    (
        "example2_acceleration",
        include_str!("../plans/example2_acceleration.toml"),
    ),
    ("martingale_variance", include_str!("../plans/martingale_variance.toml")),
    ("exact_recovery", include_str!("../plans/exact_recovery.toml")),
];

/// Names of the plans shipped with the library.
pub fn bundled_plan_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

pub fn bundled_plan(name: &str) -> Option<ExperimentPlan> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| ExperimentPlan::from_toml_str(text).expect("bundled plans parse"))
}

impl ExperimentPlan {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let plan: ExperimentPlan = toml::from_str(text).map_err(|e| Error::invalid(format!("experiment plan: {e}")))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.prepare().map(|_| ())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.grid.horizon, self.grid.steps)
    }

    /// The model at every Hurst value of the sweep.
    pub fn models(&self) -> Result<Vec<SpectralModel>> {
        let base = self.model.clone().into_model()?;
        if self.hurst.is_empty() {
            return Ok(vec![base]);
        }
        self.hurst.iter().map(|&h| base.with_hurst(h)).collect()
    }

    fn prepare(&self) -> Result<Vec<Row>> {
        if self.replications < 2 {
            return Err(Error::invalid(format!(
                "plan {}: replications must be at least 2, got {}",
                self.name, self.replications
            )));
        }
        if self.roster.is_empty() {
            return Err(Error::invalid(format!("plan {}: roster is empty", self.name)));
        }
        let grid = self.grid()?;
        let models = self.models()?;
        let mut rows = Vec::new();
        for (g, model) in models.iter().enumerate() {
            for entry in &self.roster {
                expand(entry, g, model, grid, &mut rows)
                    .map_err(|e| Error::invalid(format!("plan {}: {}: {e}", self.name, entry.kind.name())))?;
            }
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Theta,
    Hurst,
    Martingale,
}

impl Quantity {
    fn name(self) -> &'static str {
        match self {
            Quantity::Theta => "theta",
            Quantity::Hurst => "hurst",
            Quantity::Martingale => "martingale",
        }
    }
}

#[derive(Debug, Clone)]
enum Eval {
    Mle(usize),
    Weighted(usize, Option<Vec<f64>>),
    Aitken(usize, AitkenVariant),
    Theta(usize, usize),
    Hurst(usize, usize),
    Joint((usize, usize), (usize, usize), Quantity),
    Martingale,
}

#[derive(Debug, Clone)]
struct Row {
    group: usize,
    kind: RosterKind,
    quantity: Quantity,
    hurst: f64,
    t_index: usize,
    t: f64,
    modes: Vec<usize>,
    target: f64,
    theoretical_variance: Option<f64>,
    eval: Eval,
}

fn time_indices(entry: &RosterEntry, grid: TimeGrid) -> Result<Vec<(usize, f64)>> {
    if entry.t.is_empty() {
        return Ok(vec![(grid.steps(), grid.horizon())]);
    }
    entry
        .t
        .iter()
        .map(|&t| match grid.index_of(t) {
            Some(i) if i > 0 => Ok((i, grid.point(i))),
            _ => Err(Error::invalid(format!("t = {t} is not a positive grid point"))),
        })
        .collect()
}

fn ratio(model: &SpectralModel, k: usize) -> f64 {
    model.mu[k - 1] / model.nu[k - 1]
}

fn check_modes(model: &SpectralModel, modes: &[usize]) -> Result<()> {
    for &k in modes {
        model.check_mode(k)?;
        if model.nu[k - 1] == 0.0 {
            return Err(Error::Mode {
                mode: k,
                reason: "ν_k = 0".into(),
            });
        }
    }
    Ok(())
}

fn expand(entry: &RosterEntry, group: usize, model: &SpectralModel, grid: TimeGrid, rows: &mut Vec<Row>) -> Result<()> {
    let h = model.hurst;
    let b1 = kernel_constants(h)?.b1;
    let times = time_indices(entry, grid)?;
    // variance of M_t/(b1 t^{2−2H}), the common factor of all MLE errors
    let base = |t: f64| t.powf(2.0 * h - 2.0) / (b1 * b1);
    let mut push = |t_index: usize, t: f64, quantity, modes: Vec<usize>, target, var: Option<f64>, eval| {
        rows.push(Row {
            group,
            kind: entry.kind,
            quantity,
            hurst: h,
            t_index,
            t,
            modes,
            target,
            theoretical_variance: var,
            eval,
        })
    };
    let need = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(what.to_string()))
        }
    };
    match entry.kind {
        RosterKind::MleMode => {
            need(!entry.modes.is_empty(), "needs `modes`")?;
            check_modes(model, &entry.modes)?;
            for &(i, t) in &times {
                for &k in &entry.modes {
                    let var = ratio(model, k).powi(2) * base(t);
                    push(i, t, Quantity::Theta, vec![k], model.theta, Some(var), Eval::Mle(k));
                }
            }
        }
        RosterKind::WeightedAvg => {
            need(!entry.prefixes.is_empty(), "needs `prefixes`")?;
            let max = *entry.prefixes.iter().max().unwrap();
            check_modes(model, &(1..=max).collect::<Vec<_>>())?;
            if let Some(w) = &entry.weights {
                need(w.len() >= max, "needs a weight for every mode up to the largest prefix")?;
                need(
                    w.iter().all(|&b| b >= 0.0 && b.is_finite()),
                    "weights must be non-negative",
                )?;
            }
            for &(i, t) in &times {
                for &n in &entry.prefixes {
                    need(n >= 1, "prefixes start at 1")?;
                    let beta = |k: usize| entry.weights.as_ref().map_or(1.0, |w| w[k - 1]);
                    let den: f64 = (1..=n).map(beta).sum();
                    need(den > 0.0, "weights sum to zero on a prefix")?;
                    let r: f64 = (1..=n).map(|k| beta(k) * ratio(model, k)).sum::<f64>() / den;
                    push(
                        i,
                        t,
                        Quantity::Theta,
                        (1..=n).collect(),
                        model.theta,
                        Some(r * r * base(t)),
                        Eval::Weighted(n, entry.weights.clone()),
                    );
                }
            }
        }
        RosterKind::Aitken => {
            need(!entry.modes.is_empty(), "needs `modes`")?;
            for &k in &entry.modes {
                need(k >= 1, "modes start at 1")?;
                check_modes(model, &[k, k + 1, k + 2])?;
            }
            for &(i, t) in &times {
                for &k in &entry.modes {
                    // all mode errors are X·μ_k/ν_k for a common X, so the
                    // standard Δ² output error is X·g with g below
                    let var = match entry.variant {
                        AitkenVariant::Standard => {
                            let (a, b, c) = (ratio(model, k), ratio(model, k + 1), ratio(model, k + 2));
                            let g = a - (b - a) * (b - a) / (c - 2.0 * b + a);
                            g.is_finite().then(|| g * g * base(t))
                        }
                        AitkenVariant::AsPrinted => None,
                    };
                    push(
                        i,
                        t,
                        Quantity::Theta,
                        vec![k, k + 1, k + 2],
                        model.theta,
                        var,
                        Eval::Aitken(k, entry.variant),
                    );
                }
            }
        }
        RosterKind::ExactTheta | RosterKind::ExactHurst => {
            need(!entry.pairs.is_empty(), "needs `pairs`")?;
            for &[k, m] in &entry.pairs {
                model.check_mode(k)?;
                model.check_mode(m)?;
            }
            for &(i, t) in &times {
                for &[k, m] in &entry.pairs {
                    if entry.kind == RosterKind::ExactTheta {
                        push(i, t, Quantity::Theta, vec![k, m], model.theta, None, Eval::Theta(k, m));
                    } else {
                        push(i, t, Quantity::Hurst, vec![k, m], h, None, Eval::Hurst(k, m));
                    }
                }
            }
        }
        RosterKind::ExactJoint => {
            need(entry.pairs.len() == 2, "needs exactly two `pairs`")?;
            let a = (entry.pairs[0][0], entry.pairs[0][1]);
            let b = (entry.pairs[1][0], entry.pairs[1][1]);
            for k in [a.0, a.1, b.0, b.1] {
                model.check_mode(k)?;
            }
            let modes = vec![a.0, a.1, b.0, b.1];
            for &(i, t) in &times {
                push(
                    i,
                    t,
                    Quantity::Theta,
                    modes.clone(),
                    model.theta,
                    None,
                    Eval::Joint(a, b, Quantity::Theta),
                );
                push(
                    i,
                    t,
                    Quantity::Hurst,
                    modes.clone(),
                    h,
                    None,
                    Eval::Joint(a, b, Quantity::Hurst),
                );
            }
        }
        RosterKind::Martingale => {
            for &(i, t) in &times {
                let var = t.powf(2.0 - 2.0 * h);
                push(i, t, Quantity::Martingale, vec![], 0.0, Some(var), Eval::Martingale);
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub kind: RosterKind,
    pub quantity: Quantity,
    pub hurst: f64,
    pub t: f64,
    pub modes: Vec<usize>,
    pub target: f64,
    pub successes: usize,
    pub failures: usize,
    pub flagged: bool,
    pub mean: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub bias: f64,
    pub mse: f64,
    pub se: f64,
    /// KS test of `(value − target)/sqrt(theoretical_variance)` against N(0,1).
    pub ks: Option<KsResult>,
    pub theoretical_variance: Option<f64>,
    /// First failure message, if any.
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub name: String,
    pub seed: u64,
    pub replications: usize,
    pub hurst: Vec<f64>,
    pub rows: Vec<SummaryRow>,
    /// `raw[row][replication]`, kept when the plan asks for it.
    pub raw: Option<Vec<Vec<Option<f64>>>>,
}

pub const SUMMARY_CSV_HEADER: [&str; 21] = [
    "label",
    "kind",
    "quantity",
    "hurst",
    "t",
    "modes",
    "target",
    "successes",
    "failures",
    "flagged",
    "mean",
    "variance",
    "variance_se",
    "bias",
    "mse",
    "se",
    "ks_distance",
    "ks_p",
    "theoretical_variance",
    "variance_ratio",
    "first_failure",
];

fn label(row: &Row) -> String {
    let modes = row.modes.iter().map(usize::to_string).collect::<Vec<_>>().join(";");
    let variant = match row.eval {
        Eval::Aitken(_, v) => format!("[{v}]"),
        Eval::Joint(_, _, q) => format!("[{}]", q.name()),
        _ => String::new(),
    };
    format!(
        "{}{} modes={} t={} H={}",
        row.kind.name(),
        variant,
        modes,
        format_float(row.t),
        format_float(row.hurst)
    )
}

/// `# fracspde <version> seed=<seed> H=<h1;h2;…>`
pub fn provenance_comment(seed: Option<u64>, hurst: &[f64]) -> String {
    let hs = hurst.iter().map(|&h| format_float(h)).collect::<Vec<_>>().join(";");
    let seed = seed.map_or("none".to_string(), |s| s.to_string());
    format!("# fracspde {} seed={} H={}", env!("CARGO_PKG_VERSION"), seed, hs)
}

fn fmt_opt(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format_float(v),
        _ => String::new(),
    }
}

impl SummaryTable {
    /// Row matching kind, quantity, H, t and mode list.
    pub fn find(
        &self,
        kind: RosterKind,
        quantity: Quantity,
        hurst: f64,
        t: f64,
        modes: &[usize],
    ) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| {
            r.kind == kind
                && r.quantity == quantity
                && r.hurst == hurst
                && (r.t - t).abs() <= 1e-12 * t.max(1.0)
                && r.modes == modes
        })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", provenance_comment(Some(self.seed), &self.hurst))?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SUMMARY_CSV_HEADER)?;
        for r in &self.rows {
            let modes = r.modes.iter().map(usize::to_string).collect::<Vec<_>>().join(";");
            let ratio = r.theoretical_variance.filter(|&v| v > 0.0).map(|v| r.variance / v);
            w.write_record([
                r.label.clone(),
                r.kind.name().to_string(),
                r.quantity.name().to_string(),
                format_float(r.hurst),
                format_float(r.t),
                modes,
                format_float(r.target),
                r.successes.to_string(),
                r.failures.to_string(),
                r.flagged.to_string(),
                fmt_opt(Some(r.mean)),
                fmt_opt(Some(r.variance)),
                fmt_opt(Some(r.variance_se)),
                fmt_opt(Some(r.bias)),
                fmt_opt(Some(r.mse)),
                fmt_opt(Some(r.se)),
                fmt_opt(r.ks.map(|k| k.distance)),
                fmt_opt(r.ks.map(|k| k.p_value)),
                fmt_opt(r.theoretical_variance),
                fmt_opt(ratio),
                r.first_failure.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Per-replication estimates: `replication,<label>,…`, empty cells for
    /// failed replications.
    pub fn write_raw_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let raw = self
            .raw
            .as_ref()
            .ok_or_else(|| Error::invalid("raw estimates were not kept for this experiment"))?;
        writeln!(out, "{}", provenance_comment(Some(self.seed), &self.hurst))?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["replication".to_string()];
        header.extend(self.rows.iter().map(|r| r.label.clone()));
        w.write_record(&header)?;
        for rep in 0..self.replications {
            let mut rec = vec![rep.to_string()];
            rec.extend(raw.iter().map(|col| fmt_opt(col[rep])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Group {
    model: SpectralModel,
    sampler: FbmSampler,
    weights: HashMap<usize, TransformWeights>,
}

type Outcome = std::result::Result<f64, String>;

fn evaluate(
    row: &Row,
    group: &Group,
    logs: &LogPaths,
    driver: &[f64],
    mle_cache: &mut HashMap<(usize, usize), Outcome>,
) -> Outcome {
    let weights = &group.weights[&row.t_index];
    let mut mle = |k: usize| -> Outcome {
        mle_cache
            .entry((k, row.t_index))
            .or_insert_with(|| {
                mle_mode_with(logs, k, weights)
                    .map(|r| r.value.primary())
                    .map_err(|e| e.to_string())
            })
            .clone()
    };
    let seq = |values: Vec<f64>| EstimateSequence::new(values, row.t);
    let err = |e: Error| e.to_string();
    match &row.eval {
        Eval::Mle(k) => mle(*k),
        Eval::Weighted(n, w) => {
            let values = (1..=*n).map(&mut mle).collect::<std::result::Result<Vec<_>, _>>()?;
            let mut s = seq(values);
            if let Some(w) = w {
                s = s.with_weights(w[..*n].to_vec()).map_err(err)?;
            }
            weighted_average(&s, *n).map(|r| r.value.primary()).map_err(err)
        }
        Eval::Aitken(k, variant) => {
            let values = (*k..=*k + 2)
                .map(&mut mle)
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let mut padded = vec![0.0; k - 1];
            padded.extend(values);
            aitken(&seq(padded), *k, *variant)
                .map(|r| r.value.primary())
                .map_err(err)
        }
        Eval::Theta(k, m) => exact_theta(logs, *k, *m, row.t_index, group.model.hurst)
            .map(|r| r.value.primary())
            .map_err(err),
        Eval::Hurst(k, m) => exact_hurst(logs, *k, *m, row.t_index, group.model.theta)
            .map(|r| r.value.primary())
            .map_err(err),
        Eval::Joint(a, b, q) => {
            let r = exact_joint(logs, *a, *b, row.t_index).map_err(err)?;
            match q {
                Quantity::Hurst => r.value.secondary().ok_or(r.notes),
                _ => Ok(r.value.primary()),
            }
        }
        Eval::Martingale => Ok(weights.apply_unchecked(driver)),
    }
}

fn summarize(row: &Row, values: &[Option<f64>], first_failure: Option<String>) -> SummaryRow {
    let ok: Vec<f64> = values.iter().flatten().copied().collect();
    let failures = values.len() - ok.len();
    let nan = f64::NAN;
    let (mean, variance, variance_se, mse, se) = if ok.len() >= 2 {
        (
            stats::mean(&ok),
            stats::variance(&ok),
            stats::variance_standard_error(&ok),
            stats::mse(&ok, row.target),
            stats::standard_error(&ok),
        )
    } else {
        (nan, nan, nan, nan, nan)
    };
    let ks = row.theoretical_variance.filter(|&v| v > 0.0).and_then(|v| {
        let errors: Vec<f64> = ok.iter().map(|x| x - row.target).collect();
        stats::normality_check(&errors, v.sqrt()).ok()
    });
    SummaryRow {
        label: label(row),
        kind: row.kind,
        quantity: row.quantity,
        hurst: row.hurst,
        t: row.t,
        modes: row.modes.clone(),
        target: row.target,
        successes: ok.len(),
        failures,
        flagged: failures as f64 > FAILURE_FLAG_FRACTION * values.len() as f64,
        mean,
        variance,
        variance_se,
        bias: mean - row.target,
        mse,
        se,
        ks,
        theoretical_variance: row.theoretical_variance,
        first_failure,
    }
}

pub fn run_experiment(plan: &ExperimentPlan) -> Result<SummaryTable> {
    let rows = plan.prepare()?;
    let grid = plan.grid()?;
    let models = plan.models()?;
    let groups = models
        .into_iter()
        .enumerate()
        .map(|(g, model)| {
            let sampler = FbmSampler::new(grid, model.hurst, plan.method)?;
            let transform = KernelTransform::new(model.hurst)?;
            let mut weights = HashMap::new();
            for row in rows.iter().filter(|r| r.group == g) {
                if let std::collections::hash_map::Entry::Vacant(e) = weights.entry(row.t_index) {
                    e.insert(transform.weights(grid, row.t_index)?);
                }
            }
            Ok(Group {
                model,
                sampler,
                weights,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let per_rep: Vec<Vec<Outcome>> = (0..plan.replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut out = Vec::with_capacity(rows.len());
            for (g, group) in groups.iter().enumerate() {
                let driver = group.sampler.sample(plan.seed, r);
                let logs = LogPaths::from_driver(&group.model, &driver);
                let mut cache = HashMap::new();
                for row in rows.iter().filter(|row| row.group == g) {
                    out.push(match &logs {
                        Ok(l) => evaluate(row, group, l, &driver.values, &mut cache),
                        Err(e) => Err(e.to_string()),
                    });
                }
            }
            out
        })
        .collect();

    // rows are grouped by H in `prepare`, so the per-replication order above
    // matches `rows`
    let mut summary = Vec::with_capacity(rows.len());
    let mut raw = Vec::with_capacity(rows.len());
    for (j, row) in rows.iter().enumerate() {
        let column: Vec<Option<f64>> = per_rep.iter().map(|rep| rep[j].as_ref().ok().copied()).collect();
        let first_failure = per_rep.iter().find_map(|rep| rep[j].as_ref().err().cloned());
        summary.push(summarize(row, &column, first_failure));
        raw.push(column);
    }
    Ok(SummaryTable {
        name: plan.name.clone(),
        seed: plan.seed,
        replications: plan.replications,
        hurst: groups.iter().map(|g| g.model.hurst).collect(),
        rows: summary,
        raw: plan.raw.then_some(raw),
    })
}
