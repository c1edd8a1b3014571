//! Gauss–Jacobi quadrature for integrands with algebraic endpoint
//! singularities.
//!
//! A rule of degree `n` with exponents `(alpha, beta)` integrates
//! `(1 - x)^alpha (1 + x)^beta f(x)` on `[-1, 1]` exactly for polynomial `f`
//! of degree `< 2n`. Mapped onto `[lo, hi]` the weight becomes
//! `(hi - s)^alpha (s - lo)^beta`, so the right exponent sits on `alpha` and
//! the left one on `beta`. `alpha = beta = 0` is Gauss–Legendre.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const NEWTON_MAX_ITER: usize = 100;
const NEWTON_EPS: f64 = 1e-15;

/// Node counts tried in turn by [`AdaptiveJacobi`].
pub const ADAPTIVE_LEVELS: [usize; 6] = [8, 16, 32, 64, 128, 256];

#[derive(Debug, Clone, PartialEq)]
pub struct GaussJacobi {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    alpha: f64,
    beta: f64,
}

impl GaussJacobi {
    /// Nodes by Newton iteration on the three-term recurrence, with the
    /// classical asymptotic starting guesses for the extreme roots.
    #[allow(clippy::approx_constant)] // empirical starting-guess coefficients
    pub fn new(n: usize, alpha: f64, beta: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::invalid("Gauss-Jacobi rule needs at least 4 nodes"));
        }
        if !(alpha > -1.0 && beta > -1.0) {
            return Err(Error::invalid(format!(
                "Gauss-Jacobi exponents must exceed -1, got ({alpha}, {beta})"
            )));
        }
        let nf = n as f64;
        let ab = alpha + beta;
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let mut z = 0.0_f64;
        for i in 0..n {
            z = match i {
                0 => {
                    let an = alpha / nf;
                    let bn = beta / nf;
                    let r1 = (1.0 + alpha) * (2.78 / (4.0 + nf * nf) + 0.768 * an / nf);
                    let r2 = 1.0 + 1.48 * an + 0.96 * bn + 0.452 * an * an + 0.83 * an * bn;
                    1.0 - r1 / r2
                }
                1 => {
                    let r1 = (4.1 + alpha) / ((1.0 + alpha) * (1.0 + 0.156 * alpha));
                    let r2 = 1.0 + 0.06 * (nf - 8.0) * (1.0 + 0.12 * alpha) / nf;
                    let r3 = 1.0 + 0.012 * beta * (1.0 + 0.25 * alpha.abs()) / nf;
                    z - (1.0 - z) * r1 * r2 * r3
                }
                2 => {
                    let r1 = (1.67 + 0.28 * alpha) / (1.0 + 0.37 * alpha);
                    let r2 = 1.0 + 0.22 * (nf - 8.0) / nf;
                    let r3 = 1.0 + 8.0 * beta / ((6.28 + beta) * nf * nf);
                    z - (x[0] - z) * r1 * r2 * r3
                }
                _ if i == n - 2 => {
                    let r1 = (1.0 + 0.235 * beta) / (0.766 + 0.119 * beta);
                    let r2 = 1.0 / (1.0 + 0.639 * (nf - 4.0) / (1.0 + 0.71 * (nf - 4.0)));
                    let r3 = 1.0 / (1.0 + 20.0 * alpha / ((7.5 + alpha) * nf * nf));
                    z + (z - x[n - 4]) * r1 * r2 * r3
                }
                _ if i == n - 1 => {
                    let r1 = (1.0 + 0.37 * beta) / (1.67 + 0.28 * beta);
                    let r2 = 1.0 / (1.0 + 0.22 * (nf - 8.0) / nf);
                    let r3 = 1.0 / (1.0 + 8.0 * alpha / ((6.28 + alpha) * nf * nf));
                    z + (z - x[n - 3]) * r1 * r2 * r3
                }
                _ => 3.0 * x[i - 1] - 3.0 * x[i - 2] + x[i - 3],
            };
            let mut converged = false;
            let mut pp = 0.0;
            let mut p2 = 0.0;
            let mut temp = 0.0;
            for _ in 0..NEWTON_MAX_ITER {
                let (p1, q2, t, d) = jacobi_with_derivative(n, alpha, beta, z);
                pp = d;
                p2 = q2;
                temp = t;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= NEWTON_EPS {
                    converged = true;
                    break;
                }
            }
            if !converged || !z.is_finite() {
                return Err(Error::QuadratureNonConvergence {
                    lo: -1.0,
                    hi: 1.0,
                    estimate: f64::NAN,
                });
            }
            x[i] = z;
            w[i] = (ln_gamma(alpha + nf) + ln_gamma(beta + nf) - ln_gamma(nf + 1.0) - ln_gamma(nf + ab + 1.0)).exp()
                * temp
                * 2f64.powf(ab)
                / (pp * p2);
        }
        // recurrence converges from +1 downwards; store ascending
        x.reverse();
        w.reverse();
        if x.windows(2).any(|p| p[1] <= p[0]) || x[0] <= -1.0 || x[n - 1] >= 1.0 {
            return Err(Error::QuadratureNonConvergence {
                lo: -1.0,
                hi: 1.0,
                estimate: f64::NAN,
            });
        }
        Ok(Self {
            nodes: x,
            weights: w,
            alpha,
            beta,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫_lo^hi (hi-s)^alpha (s-lo)^beta f(s) ds`, plus the same sum taken
    /// over `|f|` (used as the scale for convergence tests).
    pub fn integrate<F: Fn(f64) -> f64>(&self, lo: f64, hi: f64, f: F) -> (f64, f64) {
        let half = 0.5 * (hi - lo);
        let jac = half.powf(self.alpha + self.beta + 1.0);
        let mut sum = 0.0;
        let mut abs = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let fx = f(lo + (x + 1.0) * half);
            sum += w * fx;
            abs += w * fx.abs();
        }
        (jac * sum, jac * abs)
    }
}

/// Returns `(P_n(z), P_{n-1}(z), 2n + alpha + beta, P_n'(z))`.
fn jacobi_with_derivative(n: usize, alpha: f64, beta: f64, z: f64) -> (f64, f64, f64, f64) {
    let ab = alpha + beta;
    let mut temp = 2.0 + ab;
    let mut p1 = (alpha - beta + temp * z) / 2.0;
    let mut p2 = 1.0;
    for j in 2..=n {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        temp = 2.0 * jf + ab;
        let a = 2.0 * jf * (jf + ab) * (temp - 2.0);
        let b = (temp - 1.0) * (alpha * alpha - beta * beta + temp * (temp - 2.0) * z);
        let c = 2.0 * (jf - 1.0 + alpha) * (jf - 1.0 + beta) * temp;
        p1 = (b * p2 - c * p3) / a;
    }
    let nf = n as f64;
    let pp = (nf * (alpha - beta - temp * z) * p1 + 2.0 * (nf + alpha) * (nf + beta) * p2) / (temp * (1.0 - z * z));
    (p1, p2, temp, pp)
}

/// A ladder of Gauss–Jacobi rules of increasing degree; integration stops at
/// the first pair of consecutive degrees that agree to the tolerance.
#[derive(Debug, Clone)]
pub struct AdaptiveJacobi {
    levels: Vec<GaussJacobi>,
}

impl AdaptiveJacobi {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let levels = ADAPTIVE_LEVELS
            .iter()
            .map(|&n| GaussJacobi::new(n, alpha, beta))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { levels })
    }

    pub fn legendre() -> Result<Self> {
        Self::new(0.0, 0.0)
    }

    /// Integrates `(hi-s)^alpha (s-lo)^beta f(s)` over `[lo, hi]` until two
    /// successive degrees agree to `rel_tol` relative to `∫|…|`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, lo: f64, hi: f64, f: F, rel_tol: f64) -> Result<f64> {
        let (mut prev, _) = self.levels[0].integrate(lo, hi, &f);
        let mut estimate = f64::INFINITY;
        for rule in &self.levels[1..] {
            let (cur, abs) = rule.integrate(lo, hi, &f);
            estimate = (cur - prev).abs();
            if estimate <= rel_tol * abs || estimate == 0.0 {
                return Ok(cur);
            }
            prev = cur;
        }
        Err(Error::QuadratureNonConvergence { lo, hi, estimate })
    }
}
