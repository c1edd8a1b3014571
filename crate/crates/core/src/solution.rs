//! Exact Fourier-mode paths from the closed-form solution.
//!
//! With constant forcing `f_k, g_k` every mode is a geometric fBM driven by
//! the common path `W^H`:
//!
//! `u_k(t) = u_k(0) exp((α_k + f_k) t − ½(μ_k + g_k)² t^{2H} + (μ_k + g_k) W^H(t))`.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::fbm::{format_float, FbmPath};
use crate::grid::TimeGrid;
use crate::specmodel::SpectralModel;

fn check_driver(model: &SpectralModel, grid: TimeGrid, driver: &FbmPath) -> Result<()> {
    if driver.grid != grid {
        return Err(Error::invalid("driver path was sampled on a different grid"));
    }
    if driver.values.len() != grid.steps() + 1 {
        return Err(Error::invalid("driver path length does not match its grid"));
    }
    if driver.hurst != model.hurst {
        return Err(Error::invalid(format!(
            "driver has H = {} but the model has H = {}",
            driver.hurst, model.hurst
        )));
    }
    Ok(())
}

/// Exponent of `u_k(t)/u_k(0)` for every mode and grid point.
fn log_growth(model: &SpectralModel, grid: TimeGrid, driver: &FbmPath) -> Vec<Vec<f64>> {
    let h2 = 2.0 * model.hurst;
    let times = grid.points();
    let powers: Vec<f64> = times.iter().map(|t| t.powf(h2)).collect();
    (1..=model.num_modes)
        .map(|k| {
            let drift = model.alpha(k) + model.forcing_f[k - 1];
            let vol = model.mu[k - 1] + model.forcing_g[k - 1];
            times
                .iter()
                .zip(&powers)
                .zip(&driver.values)
                .map(|((&t, &p), &w)| drift * t - 0.5 * vol * vol * p + vol * w)
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModePaths {
    pub model: SpectralModel,
    pub grid: TimeGrid,
    /// `u[k-1][i] = u_k(t_i)`.
    pub u: Vec<Vec<f64>>,
    pub driver: FbmPath,
    log_growth: Vec<Vec<f64>>,
}

/// Evaluates the solution formula pointwise on the driver's grid.
pub fn simulate_modes(model: &SpectralModel, grid: TimeGrid, driver: &FbmPath) -> Result<ModePaths> {
    model.validate()?;
    check_driver(model, grid, driver)?;
    let growth = log_growth(model, grid, driver);
    let u = growth
        .iter()
        .zip(&model.u0)
        .map(|(x, &u0)| x.iter().map(|&e| u0 * e.exp()).collect())
        .collect();
    Ok(ModePaths {
        model: model.clone(),
        grid,
        u,
        driver: driver.clone(),
        log_growth: growth,
    })
}

impl ModePaths {
    /// CSV with header `t,u_1,...,u_K`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.model.num_modes).map(|k| format!("u_{k}")));
        w.write_record(&header)?;
        for i in 0..=self.grid.steps() {
            let mut row = vec![format_float(self.grid.point(i))];
            row.extend(self.u.iter().map(|uk| format_float(uk[i])));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn log_paths(&self) -> Result<LogPaths> {
        log_paths(self)
    }
}

/// `v_k(t_i) = ln(u_k(t_i)/u_k(0))` for the observable modes.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPaths {
    pub grid: TimeGrid,
    pub model: SpectralModel,
    /// `None` for modes that cannot be observed (zero initial value).
    pub v: Vec<Option<Vec<f64>>>,
}

pub fn log_paths(paths: &ModePaths) -> Result<LogPaths> {
    LogPaths::build(
        &paths.model,
        paths.grid,
        paths
            .log_growth
            .iter()
            .zip(&paths.model.u0)
            .map(|(x, &u0)| (u0 != 0.0).then(|| x.clone()))
            .collect(),
    )
}

impl LogPaths {
    fn build(model: &SpectralModel, grid: TimeGrid, v: Vec<Option<Vec<f64>>>) -> Result<Self> {
        if v.iter().all(Option::is_none) {
            return Err(Error::invalid("no observable modes: every initial value is zero"));
        }
        Ok(Self {
            grid,
            model: model.clone(),
            v,
        })
    }

    /// Log-paths straight from a driver, without forming `u`.
    pub fn from_driver(model: &SpectralModel, driver: &FbmPath) -> Result<Self> {
        check_driver(model, driver.grid, driver)?;
        let growth = log_growth(model, driver.grid, driver);
        Self::build(
            model,
            driver.grid,
            growth
                .into_iter()
                .zip(&model.u0)
                .map(|(x, &u0)| (u0 != 0.0).then_some(x))
                .collect(),
        )
    }

    /// Log-paths from observed coefficients `u[k-1][i]`. A mode is dropped
    /// when its initial value is zero or a later value has left its sign
    /// class (including underflow to zero).
    pub fn from_observed(model: &SpectralModel, grid: TimeGrid, u: &[Vec<f64>]) -> Result<Self> {
        if u.len() != model.num_modes {
            return Err(Error::invalid(format!(
                "observed {} modes, model has {}",
                u.len(),
                model.num_modes
            )));
        }
        let mut v = Vec::with_capacity(u.len());
        for uk in u {
            if uk.len() != grid.steps() + 1 {
                return Err(Error::invalid("observed path length does not match the grid"));
            }
            let u0 = uk[0];
            if u0 == 0.0 || !u0.is_finite() {
                v.push(None);
                continue;
            }
            let path: Vec<f64> = uk.iter().map(|&x| (x / u0).ln()).collect();
            v.push(path.iter().all(|x| x.is_finite()).then_some(path));
        }
        Self::build(model, grid, v)
    }

    pub fn hurst(&self) -> f64 {
        self.model.hurst
    }

    /// Modes (1-based) with a usable log-path.
    pub fn valid_modes(&self) -> Vec<usize> {
        (1..=self.v.len()).filter(|&k| self.v[k - 1].is_some()).collect()
    }

    pub fn mode(&self, k: usize) -> Result<&[f64]> {
        let i = self.model.check_mode(k)?;
        self.v[i].as_deref().ok_or_else(|| Error::Mode {
            mode: k,
            reason: "mode is unobservable (zero initial value or lost sign)".into(),
        })
    }

    pub fn value(&self, k: usize, t_index: usize) -> Result<f64> {
        self.grid.check_index(t_index)?;
        Ok(self.mode(k)?[t_index])
    }
}

/// Reads a `t,u_1..u_K` table (lines starting with `#` are skipped) and
/// recovers the uniform grid from the time column.
pub fn read_mode_csv<R: Read>(input: R) -> Result<(TimeGrid, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.get(0) != Some("t") || headers.len() < 2 {
        return Err(Error::invalid("mode CSV must start with columns t,u_1,..."));
    }
    let k = headers.len() - 1;
    let mut times = Vec::new();
    let mut u = vec![Vec::new(); k];
    for record in reader.records() {
        let record = record?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("cannot parse '{s}' in mode CSV")))
        };
        times.push(parse(&record[0])?);
        for j in 0..k {
            u[j].push(parse(&record[j + 1])?);
        }
    }
    if times.len() < 2 || times[0] != 0.0 {
        return Err(Error::invalid("mode CSV needs rows starting at t = 0"));
    }
    let steps = times.len() - 1;
    let grid = TimeGrid::new(*times.last().unwrap(), steps)?;
    for (i, &t) in times.iter().enumerate() {
        if (t - grid.point(i)).abs() > 1e-9 * grid.horizon() {
            return Err(Error::invalid("mode CSV time column is not a uniform grid"));
        }
    }
    Ok((grid, u))
}
