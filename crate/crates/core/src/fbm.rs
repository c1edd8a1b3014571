//! Fractional Brownian motion on uniform grids.
//!
//! Both samplers draw the increments (fractional Gaussian noise) from their
//! exact joint Gaussian law and cumulate them:
//!
//! * [`FbmMethod::Cholesky`] factors the dense increment covariance. It is
//!   `O(n^3)` to set up and is the correctness reference.
//! * [`FbmMethod::Circulant`] embeds the Toeplitz covariance in a circulant of
//!   size `2n` and samples through one FFT per path (Davies–Harte / Wood–Chan).
//!
//! A sampler is built once per `(grid, H, method)` and then shared read-only;
//! each path is a pure function of `(seed, path_index)`.

use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use rand::RngCore;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::rng::{path_rng, standard_normal};

pub const DEFAULT_CHOLESKY_CAP: usize = 4096;

/// Eigenvalues of the circulant embedding below this abort sampling.
pub const CIRCULANT_EIGEN_TOLERANCE: f64 = -1e-10;

pub(crate) fn check_hurst(hurst: f64) -> Result<()> {
    if hurst.is_finite() && hurst > 0.0 && hurst < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "Hurst parameter must lie in (0,1), got {hurst}"
        )))
    }
}

/// `E[W^H(t) W^H(s)] = ½(t^{2H} + s^{2H} − |t−s|^{2H})`.
pub fn fbm_covariance(t: f64, s: f64, hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    if !(t >= 0.0 && s >= 0.0) {
        return Err(Error::invalid("fBM covariance needs t, s >= 0"));
    }
    let h2 = 2.0 * hurst;
    Ok(0.5 * (t.powf(h2) + s.powf(h2) - (t - s).abs().powf(h2)))
}

/// Autocovariance of unit-spaced fractional Gaussian noise at `lag`.
pub fn fgn_autocovariance(lag: usize, hurst: f64) -> f64 {
    let k = lag as f64;
    let h2 = 2.0 * hurst;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FbmMethod {
    Cholesky,
    Circulant,
}

impl FromStr for FbmMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cholesky" => Ok(FbmMethod::Cholesky),
            "circulant" => Ok(FbmMethod::Circulant),
            other => Err(Error::invalid(format!("unknown fBM method '{other}'"))),
        }
    }
}

impl std::fmt::Display for FbmMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FbmMethod::Cholesky => "cholesky",
            FbmMethod::Circulant => "circulant",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    pub grid: TimeGrid,
    pub hurst: f64,
    /// `values[i] = W^H(t_i)`, with `values[0] = 0`.
    pub values: Vec<f64>,
}

impl FbmPath {
    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("path has n+1 values")
    }

    /// CSV with header `t,w` and one row per grid point.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "w"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([format_float(self.grid.point(i)), format_float(*v)])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn format_float(x: f64) -> String {
    // shortest repr that round-trips
    format!("{x:?}")
}

enum Backend {
    Cholesky {
        /// Row-major lower triangle of the increment covariance factor.
        factor: Vec<f64>,
    },
    Circulant {
        sqrt_eigen: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
}

/// Prepared sampler for one `(grid, H, method)`.
pub struct FbmSampler {
    grid: TimeGrid,
    hurst: f64,
    method: FbmMethod,
    backend: Backend,
}

impl std::fmt::Debug for FbmSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FbmSampler")
            .field("grid", &self.grid)
            .field("hurst", &self.hurst)
            .field("method", &self.method)
            .finish()
    }
}

impl FbmSampler {
    pub fn new(grid: TimeGrid, hurst: f64, method: FbmMethod) -> Result<Self> {
        Self::with_cholesky_cap(grid, hurst, method, DEFAULT_CHOLESKY_CAP)
    }

    pub fn with_cholesky_cap(grid: TimeGrid, hurst: f64, method: FbmMethod, cholesky_cap: usize) -> Result<Self> {
        check_hurst(hurst)?;
        let n = grid.steps();
        let backend = match method {
            FbmMethod::Cholesky => {
                if n > cholesky_cap {
                    return Err(Error::invalid(format!(
                        "cholesky sampler limited to {cholesky_cap} steps, grid has {n}"
                    )));
                }
                Backend::Cholesky {
                    factor: cholesky_fgn(n, hurst)?,
                }
            }
            FbmMethod::Circulant => {
                let (sqrt_eigen, fft) = circulant_setup(n, hurst)?;
                Backend::Circulant { sqrt_eigen, fft }
            }
        };
        Ok(Self {
            grid,
            hurst,
            method,
            backend,
        })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn method(&self) -> FbmMethod {
        self.method
    }

    /// Path number `path_index` under master seed `seed`.
    pub fn sample(&self, seed: u64, path_index: u64) -> FbmPath {
        let mut rng = path_rng(seed, path_index);
        self.sample_with(&mut rng)
    }

    pub fn sample_with<R: RngCore + ?Sized>(&self, rng: &mut R) -> FbmPath {
        let n = self.grid.steps();
        let scale = self.grid.dt().powf(self.hurst);
        let increments = match &self.backend {
            Backend::Cholesky { factor } => {
                let z: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
                (0..n)
                    .map(|i| {
                        let row = &factor[i * n..i * n + i + 1];
                        row.iter().zip(&z).map(|(l, z)| l * z).sum::<f64>()
                    })
                    .collect::<Vec<_>>()
            }
            Backend::Circulant { sqrt_eigen, fft } => {
                let mut buf: Vec<Complex<f64>> = sqrt_eigen
                    .iter()
                    .map(|&s| {
                        let re = standard_normal(rng);
                        let im = standard_normal(rng);
                        Complex::new(s * re, s * im)
                    })
                    .collect();
                fft.process(&mut buf);
                buf[..n].iter().map(|c| c.re).collect()
            }
        };
        let mut values = Vec::with_capacity(n + 1);
        values.push(0.0);
        let mut acc = 0.0;
        for dw in increments {
            acc += scale * dw;
            values.push(acc);
        }
        FbmPath {
            grid: self.grid,
            hurst: self.hurst,
            values,
        }
    }
}

/// Convenience wrapper: build a sampler and draw path 0 of `seed`.
pub fn sample_fbm(grid: TimeGrid, hurst: f64, seed: u64, method: FbmMethod) -> Result<FbmPath> {
    Ok(FbmSampler::new(grid, hurst, method)?.sample(seed, 0))
}

fn cholesky_fgn(n: usize, hurst: f64) -> Result<Vec<f64>> {
    let gamma: Vec<f64> = (0..n).map(|k| fgn_autocovariance(k, hurst)).collect();
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut diag = gamma[0];
        for k in 0..j {
            diag -= l[j * n + k] * l[j * n + k];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::CholeskyFailure {
                minor: j + 1,
                pivot: diag,
            });
        }
        let d = diag.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = gamma[i - j];
            let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
            for k in 0..j {
                s -= ri[k] * rj[k];
            }
            l[i * n + j] = s / d;
        }
    }
    Ok(l)
}

fn circulant_setup(n: usize, hurst: f64) -> Result<(Vec<f64>, Arc<dyn Fft<f64>>)> {
    let m = 2 * n;
    let mut row: Vec<Complex<f64>> = Vec::with_capacity(m);
    for k in 0..=n {
        row.push(Complex::new(fgn_autocovariance(k, hurst), 0.0));
    }
    for k in (1..n).rev() {
        row.push(Complex::new(fgn_autocovariance(k, hurst), 0.0));
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut row);
    let mut sqrt_eigen = Vec::with_capacity(m);
    for (index, c) in row.iter().enumerate() {
        let value = c.re;
        if value < CIRCULANT_EIGEN_TOLERANCE {
            return Err(Error::NegativeEigenvalue { index, value });
        }
        sqrt_eigen.push((value.max(0.0) / m as f64).sqrt());
    }
    Ok((sqrt_eigen, fft))
}
