//! Fundamental-martingale kernel and the pathwise transform
//! `ṽ(t) = ∫₀ᵗ l_H(t,s) dv(s)`.
//!
//! The kernel is `l_H(t,s) = C_H s^{½−H} (t−s)^{½−H}` on `0 < s < t` with
//!
//! ```text
//! C_H = sqrt( Γ(3−2H) / (2H Γ(3/2−H)^3 Γ(1/2+H)) )
//! b1  = C_H B(3/2−H, 3/2−H)        ∫₀ᵗ l_H(t,s) ds           = b1 t^{2−2H}
//! b2  = C_H B(1/2+H, 3/2−H)        ∫₀ᵗ l_H(t,s) 2H s^{2H−1} ds = 2H b2 t
//! ```
//!
//! # Discretization
//!
//! Only grid values of `v` are available. On every interval the path is
//! replaced by a local interpolant from `span{1, s, ψ(s)}` through three
//! consecutive grid points, where `ψ(s) = (s^{2H} − s)/(2H − 1)` (tending to
//! `s ln s` at `H = ½`). The kernel moments against the interpolant's
//! derivative are integrated with Gauss–Jacobi rules that absorb the
//! `s^{½−H}` singularity on the first interval and `(t−s)^{½−H}` on the last.
//!
//! The rule is linear in the increments of `v`, so it reduces to a weight
//! vector, and it is exact (up to quadrature round-off) for both `v(s) = s`
//! and `v(s) = s^{2H}`, i.e. for the whole deterministic part of a
//! geometric-fBM log-path. A plain average of the kernel over each interval
//! only reaches `O(Δ^{½+H})` on `s^{2H}`.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::fbm::{check_hurst, format_float};
use crate::grid::TimeGrid;
use crate::quadrature::AdaptiveJacobi;

/// Relative convergence tolerance for every per-interval kernel moment.
pub const QUADRATURE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConstants {
    pub hurst: f64,
    pub c_h: f64,
    pub b1: f64,
    pub b2: f64,
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

pub fn kernel_constants(hurst: f64) -> Result<KernelConstants> {
    check_hurst(hurst)?;
    let h = hurst;
    let ln_c = 0.5 * (ln_gamma(3.0 - 2.0 * h) - (2.0 * h).ln() - 3.0 * ln_gamma(1.5 - h) - ln_gamma(0.5 + h));
    Ok(KernelConstants {
        hurst,
        c_h: ln_c.exp(),
        b1: (ln_c + ln_beta(1.5 - h, 1.5 - h)).exp(),
        b2: (ln_c + ln_beta(0.5 + h, 1.5 - h)).exp(),
    })
}

impl KernelConstants {
    /// `b1 t^{2−2H}`, the kernel mass on `[0, t]`.
    pub fn kernel_mass(&self, t: f64) -> f64 {
        self.b1 * t.powf(2.0 - 2.0 * self.hurst)
    }
}

/// `l_H(t,s)`; zero outside `0 < s < t`.
pub fn kernel_eval(t: f64, s: f64, hurst: f64) -> Result<f64> {
    let k = kernel_constants(hurst)?;
    if !(t > 0.0) {
        return Err(Error::invalid(format!("kernel needs t > 0, got {t}")));
    }
    if !(s > 0.0 && s < t) {
        return Ok(0.0);
    }
    let a = 0.5 - hurst;
    Ok(k.c_h * s.powf(a) * (t - s).powf(a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    /// `H = ½`: the kernel is identically one and the transform telescopes.
    Identity,
    /// Kernel averaged over the single interval `[0, t_1]`.
    SingleInterval,
    /// Three-point `{1, s, ψ(s)}` product rule with Gauss–Jacobi moments.
    CurvatureCorrected,
}

/// Weights `w_i` with `ṽ(t) ≈ Σ_i w_i (v(t_i) − v(t_{i−1}))`, `i = 1..=t_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformWeights {
    pub grid: TimeGrid,
    pub hurst: f64,
    pub t_index: usize,
    pub rule: QuadratureRule,
    pub weights: Vec<f64>,
}

impl TransformWeights {
    /// Applies the weights to a path sampled on the grid (`v[0]` is the
    /// value at time zero; only `v[..=t_index]` is read).
    pub fn apply(&self, v: &[f64]) -> Result<f64> {
        if v.len() <= self.t_index {
            return Err(Error::invalid(format!(
                "path has {} points, transform at index {} needs {}",
                v.len(),
                self.t_index,
                self.t_index + 1
            )));
        }
        Ok(self.apply_unchecked(v))
    }

    pub(crate) fn apply_unchecked(&self, v: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(v.windows(2))
            .map(|(w, p)| w * (p[1] - p[0]))
            .sum()
    }

    pub fn time(&self) -> f64 {
        self.t_index as f64 * self.grid.dt()
    }

    /// Debug dump with header `i,w_i`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "w_i"])?;
        for (i, x) in self.weights.iter().enumerate() {
            w.write_record([(i + 1).to_string(), format_float(*x)])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Rules {
    legendre: AdaptiveJacobi,
    /// `(s − lo)^{½−H}` on the first interval.
    left: AdaptiveJacobi,
    /// `(s − lo)^{H−½}` for the `s^{2H−1}` part of ψ' on the first interval.
    left_neg: AdaptiveJacobi,
    /// `(hi − s)^{½−H}` on the last interval.
    right: AdaptiveJacobi,
    /// Both singularities when `t_index = 1`.
    both: AdaptiveJacobi,
}

/// Kernel transform for one Hurst parameter; the Gauss–Jacobi ladders are
/// built once and reused for every grid and time index.
pub struct KernelTransform {
    constants: KernelConstants,
    rules: Option<Rules>,
}

impl std::fmt::Debug for KernelTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelTransform")
            .field("constants", &self.constants)
            .finish()
    }
}

fn rel_expm1(eps: f64, x: f64) -> f64 {
    if eps == 0.0 {
        x
    } else {
        (eps * x).exp_m1() / eps
    }
}

impl KernelTransform {
    pub fn new(hurst: f64) -> Result<Self> {
        let constants = kernel_constants(hurst)?;
        let rules = if hurst == 0.5 {
            None
        } else {
            let a = 0.5 - hurst;
            Some(Rules {
                legendre: AdaptiveJacobi::legendre()?,
                left: AdaptiveJacobi::new(0.0, a)?,
                left_neg: AdaptiveJacobi::new(0.0, -a)?,
                right: AdaptiveJacobi::new(a, 0.0)?,
                both: AdaptiveJacobi::new(a, a)?,
            })
        };
        Ok(Self { constants, rules })
    }

    pub fn constants(&self) -> KernelConstants {
        self.constants
    }

    pub fn hurst(&self) -> f64 {
        self.constants.hurst
    }

    fn eps(&self) -> f64 {
        2.0 * self.constants.hurst - 1.0
    }

    fn psi(&self, s: f64) -> f64 {
        if s == 0.0 {
            0.0
        } else {
            s * rel_expm1(self.eps(), s.ln())
        }
    }

    fn dpsi(&self, s: f64) -> f64 {
        1.0 + 2.0 * self.constants.hurst * rel_expm1(self.eps(), s.ln())
    }

    pub fn weights(&self, grid: TimeGrid, t_index: usize) -> Result<TransformWeights> {
        grid.check_index(t_index)?;
        let hurst = self.constants.hurst;
        let Some(rules) = &self.rules else {
            return Ok(TransformWeights {
                grid,
                hurst,
                t_index,
                rule: QuadratureRule::Identity,
                weights: vec![1.0; t_index],
            });
        };
        let dt = grid.dt();
        let t = t_index as f64 * dt;
        let a = 0.5 - hurst;
        let c = self.constants.c_h;
        let tol = QUADRATURE_TOLERANCE;

        if t_index == 1 {
            let mass = rules.both.integrate(0.0, t, |_| c, tol)?;
            return Ok(TransformWeights {
                grid,
                hurst,
                t_index,
                rule: QuadratureRule::SingleInterval,
                weights: vec![mass / dt],
            });
        }

        let mut w = vec![0.0; t_index];
        let two_h = 2.0 * hurst;
        let eps = self.eps();
        for i in 1..=t_index {
            let lo = (i - 1) as f64 * dt;
            let hi = i as f64 * dt;
            let slope = (self.psi(hi) - self.psi(lo)) / dt;
            let (mass, correction) = if i == 1 {
                let mass = rules.left.integrate(lo, hi, |s| c * (t - s).powf(a), tol)?;
                let neg = rules.left_neg.integrate(lo, hi, |s| c * (t - s).powf(a), tol)?;
                // ∫ l (ψ' − slope) with ψ' = (2H s^{2H−1} − 1)/(2H−1)
                let corr = (two_h * neg - mass) / eps - slope * mass;
                (mass, corr)
            } else if i == t_index {
                let mass = rules.right.integrate(lo, hi, |s| c * s.powf(a), tol)?;
                let corr = rules
                    .right
                    .integrate(lo, hi, |s| c * s.powf(a) * (self.dpsi(s) - slope), tol)?;
                (mass, corr)
            } else {
                let kern = |s: f64| c * (s * (t - s)).powf(a);
                let mass = rules.legendre.integrate(lo, hi, kern, tol)?;
                let corr = rules
                    .legendre
                    .integrate(lo, hi, |s| kern(s) * (self.dpsi(s) - slope), tol)?;
                (mass, corr)
            };
            w[i - 1] += mass / dt;

            // stencil points x0 < x1 < x2 around interval i
            let x0 = if i == 1 { 0 } else { i - 2 };
            let (p0, p1, p2) = (x0 as f64 * dt, (x0 + 1) as f64 * dt, (x0 + 2) as f64 * dt);
            let psi_dd = (self.psi(p2) - 2.0 * self.psi(p1) + self.psi(p0)) / (2.0 * dt * dt);
            let coef = correction / (2.0 * dt * dt * psi_dd);
            // second divided difference of v = (Δv_{x0+2} − Δv_{x0+1}) / 2Δ²
            w[x0 + 1] += coef;
            w[x0] -= coef;
        }
        Ok(TransformWeights {
            grid,
            hurst,
            t_index,
            rule: QuadratureRule::CurvatureCorrected,
            weights: w,
        })
    }

    /// `ṽ(t_i)` for every grid point.
    pub fn transform_series(&self, grid: TimeGrid, v: &[f64]) -> Result<TransformedPath> {
        if v.len() != grid.steps() + 1 {
            return Err(Error::invalid("path length does not match grid"));
        }
        let mut values = Vec::with_capacity(v.len());
        values.push(0.0);
        let mut rule = QuadratureRule::Identity;
        for i in 1..=grid.steps() {
            let w = self.weights(grid, i)?;
            rule = w.rule;
            values.push(w.apply_unchecked(v));
        }
        Ok(TransformedPath {
            grid,
            hurst: self.hurst(),
            values,
            quadrature: rule,
        })
    }
}

pub fn transform_weights(grid: TimeGrid, t_index: usize, hurst: f64) -> Result<TransformWeights> {
    KernelTransform::new(hurst)?.weights(grid, t_index)
}

/// `ṽ(t_{t_index})` for a single path. Linear in `v`.
pub fn transform_path(v: &[f64], grid: TimeGrid, t_index: usize, hurst: f64) -> Result<f64> {
    if v.first().copied() != Some(0.0) {
        return Err(Error::invalid("log-path must start at 0"));
    }
    transform_weights(grid, t_index, hurst)?.apply(v)
}

/// The transformed observation `ṽ(t_i)` at every grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedPath {
    pub grid: TimeGrid,
    pub hurst: f64,
    pub values: Vec<f64>,
    pub quadrature: QuadratureRule,
}
