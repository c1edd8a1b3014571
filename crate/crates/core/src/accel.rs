//! Acceleration of mode-indexed estimator sequences `θ̂_{1,T}, θ̂_{2,T}, …`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mle::{EstimateReport, EstimatorKind};

/// Denominators smaller than this (relative to the sequence scale) are
/// refused.
pub const AITKEN_DENOMINATOR_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSequence {
    /// `values[k-1] = θ̂_{k,T}`.
    pub values: Vec<f64>,
    pub horizon: f64,
    pub weights: Option<Vec<f64>>,
}

impl EstimateSequence {
    pub fn new(values: Vec<f64>, horizon: f64) -> Self {
        Self {
            values,
            horizon,
            weights: None,
        }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.values.len() {
            return Err(Error::invalid(format!(
                "{} weights for {} estimates",
                weights.len(),
                self.values.len()
            )));
        }
        if weights.iter().any(|&b| !(b >= 0.0 && b.is_finite())) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
        self.weights = Some(weights);
        Ok(self)
    }
}

/// `Σ_{k≤N} β_k θ̂_{k,T} / Σ_{k≤N} β_k` (unit weights when none are set).
pub fn weighted_average(seq: &EstimateSequence, n: usize) -> Result<EstimateReport> {
    if n == 0 || n > seq.values.len() {
        return Err(Error::invalid(format!(
            "prefix length {n} outside 1..={}",
            seq.values.len()
        )));
    }
    let (num, den) = match &seq.weights {
        None => (seq.values[..n].iter().sum::<f64>(), n as f64),
        Some(w) => seq.values[..n]
            .iter()
            .zip(&w[..n])
            .fold((0.0, 0.0), |(a, b), (x, beta)| (a + beta * x, b + beta)),
    };
    if den <= 0.0 {
        return Err(Error::degenerate(format!(
            "weights sum to zero over the first {n} modes"
        )));
    }
    Ok(EstimateReport::scalar(
        EstimatorKind::WeightedAvg,
        num / den,
        (1..=n).collect(),
        seq.horizon,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AitkenVariant {
    /// Denominator `θ̂_{k+2} + 2θ̂_{k+1} − θ̂_k`.
    #[default]
    AsPrinted,
    /// Textbook Δ² denominator `θ̂_{k+2} − 2θ̂_{k+1} + θ̂_k`.
    Standard,
}

impl FromStr for AitkenVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as_printed" => Ok(AitkenVariant::AsPrinted),
            "standard" => Ok(AitkenVariant::Standard),
            other => Err(Error::invalid(format!("unknown Aitken variant '{other}'"))),
        }
    }
}

impl fmt::Display for AitkenVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AitkenVariant::AsPrinted => "as_printed",
            AitkenVariant::Standard => "standard",
        })
    }
}

/// `θ̃_k = θ̂_k − (θ̂_{k+1} − θ̂_k)² / D` for mode index `k` (1-based).
pub fn aitken(seq: &EstimateSequence, k: usize, variant: AitkenVariant) -> Result<EstimateReport> {
    if k == 0 || k + 2 > seq.values.len() {
        return Err(Error::invalid(format!(
            "Aitken at k = {k} needs k ≥ 1 and k + 2 ≤ {}",
            seq.values.len()
        )));
    }
    let (a, b, c) = (seq.values[k - 1], seq.values[k], seq.values[k + 1]);
    let den = match variant {
        AitkenVariant::AsPrinted => c + 2.0 * b - a,
        AitkenVariant::Standard => c - 2.0 * b + a,
    };
    let scale = a.abs().max(b.abs()).max(c.abs());
    if !(den.abs() > AITKEN_DENOMINATOR_TOLERANCE * scale) {
        return Err(Error::degenerate(format!(
            "Aitken denominator {den:e} is zero to tolerance at k = {k} ({variant})"
        )));
    }
    let mut r = EstimateReport::scalar(
        EstimatorKind::Aitken,
        a - (b - a) * (b - a) / den,
        vec![k, k + 1, k + 2],
        seq.horizon,
    );
    r.notes = variant.to_string();
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_average_basics() {
        let s = EstimateSequence::new(vec![1.5, 0.9, 1.1], 1.0);
        assert_eq!(weighted_average(&s, 1).unwrap().value.primary(), 1.5);
        assert!((weighted_average(&s, 3).unwrap().value.primary() - 3.5 / 3.0).abs() < 1e-15);
        let c = EstimateSequence::new(vec![2.0; 4], 1.0)
            .with_weights(vec![0.1, 3.0, 0.0, 7.0])
            .unwrap();
        assert_eq!(weighted_average(&c, 4).unwrap().value.primary(), 2.0);
        let z = EstimateSequence::new(vec![1.0, 2.0], 1.0)
            .with_weights(vec![0.0, 1.0])
            .unwrap();
        assert!(matches!(weighted_average(&z, 1), Err(Error::Degenerate(_))));
        assert!(weighted_average(&s, 0).is_err());
        assert!(EstimateSequence::new(vec![1.0], 1.0).with_weights(vec![-1.0]).is_err());
    }

    #[test]
    fn point_mass_weights() {
        let s = EstimateSequence::new(vec![1.0, 2.0, 3.0], 1.0)
            .with_weights(vec![0.0, 1.0, 0.0])
            .unwrap();
        assert_eq!(weighted_average(&s, 3).unwrap().value.primary(), 2.0);
    }

    #[test]
    fn constant_sequence() {
        let s = EstimateSequence::new(vec![0.7; 3], 1.0);
        assert_eq!(aitken(&s, 1, AitkenVariant::AsPrinted).unwrap().value.primary(), 0.7);
        assert!(matches!(
            aitken(&s, 1, AitkenVariant::Standard),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn geometric_sequences_are_exact() {
        for (theta, a, r) in [(1.0, 0.5, 0.3), (-2.0, 3.0, -0.6), (0.25, -0.1, 0.9)] {
            let vals: Vec<f64> = (1..=6).map(|k| theta + a * f64::powi(r, k)).collect();
            let s = EstimateSequence::new(vals, 1.0);
            for k in 1..=4 {
                let got = aitken(&s, k, AitkenVariant::Standard).unwrap().value.primary();
                assert!((got - theta).abs() < 1e-12, "{got} vs {theta}");
            }
        }
    }

    #[test]
    fn index_bounds() {
        let s = EstimateSequence::new(vec![1.0, 2.0, 4.0], 1.0);
        assert!(aitken(&s, 2, AitkenVariant::Standard).is_err());
        assert!(aitken(&s, 0, AitkenVariant::Standard).is_err());
        assert_eq!(aitken(&s, 1, AitkenVariant::Standard).unwrap().modes, vec![1, 2, 3]);
    }
}
