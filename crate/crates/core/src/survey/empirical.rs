use crate::error::{Error, Result};

/// Slack applied when comparing cumulative mass against a quantile level;
/// normalised masses only sum to one up to rounding.
pub const CUMULATIVE_TOLERANCE: f64 = 1e-12;

/// A discrete probability distribution on the reals, optionally with an atom at `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEmpirical {
    atoms: Vec<(f64, f64)>,
    mass_at_infinity: f64,
}

impl WeightedEmpirical {
    /// Normalises `masses` to total one and sorts atoms by value.
    pub fn new(values: &[f64], masses: &[f64]) -> Result<Self> {
        Self::with_infinity(values, masses, 0.0)
    }

    /// As [`WeightedEmpirical::new`] with an extra unnormalised mass placed at `+∞`.
    pub fn with_infinity(values: &[f64], masses: &[f64], infinity_mass: f64) -> Result<Self> {
        if values.len() != masses.len() {
            return Err(Error::DimensionMismatch { expected: values.len(), got: masses.len() });
        }
        if values.is_empty() {
            return Err(Error::invalid("empirical distribution has no atoms"));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("atom values must not be NaN"));
        }
        if masses.iter().chain([&infinity_mass]).any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::invalid("masses must be finite and nonnegative"));
        }
        let total: f64 = masses.iter().sum::<f64>() + infinity_mass;
        if total <= 0.0 {
            return Err(Error::invalid("empirical distribution has zero total mass"));
        }
        let mut atoms: Vec<(f64, f64)> = values.iter().zip(masses).map(|(&v, &m)| (v, m / total)).collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(WeightedEmpirical { atoms, mass_at_infinity: infinity_mass / total })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn mass_at_infinity(&self) -> f64 {
        self.mass_at_infinity
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum::<f64>() + self.mass_at_infinity
    }

    /// Left-continuous inverse CDF: the smallest atom whose cumulative mass reaches `level`.
    pub fn quantile(&self, level: f64) -> Result<f64> {
        if !(level > 0.0) {
            return Err(Error::invalid(format!("quantile level must be positive, got {level}")));
        }
        let mut cum = 0.0;
        for &(v, m) in &self.atoms {
            cum += m;
            if cum >= level - CUMULATIVE_TOLERANCE {
                return Ok(v);
            }
        }
        if self.mass_at_infinity > 0.0 || level > 1.0 {
            Ok(f64::INFINITY)
        } else {
            Ok(self.atoms[self.atoms.len() - 1].0)
        }
    }
}

pub fn weighted_quantile(dist: &WeightedEmpirical, level: f64) -> Result<f64> {
    dist.quantile(level)
}

/// Masses `p_i = w_i / (Σ_j w_j + w_test)` for the training points followed by
/// the test point's own share.
pub fn covariate_shift_weights(train_weights: &[f64], test_weight: f64) -> Result<Vec<f64>> {
    if train_weights.iter().chain([&test_weight]).any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::invalid("likelihood-ratio weights must be positive and finite"));
    }
    let total: f64 = train_weights.iter().sum::<f64>() + test_weight;
    Ok(train_weights.iter().chain([&test_weight]).map(|w| w / total).collect())
}

/// Quadratic-time reference implementation of the weighted quantile.
pub mod oracle {
    use super::CUMULATIVE_TOLERANCE;

    /// For every atom value, sums the mass of all atoms at or below it and keeps
    /// the smallest value whose cumulative mass reaches `level`.
    pub fn brute_force_quantile(values: &[f64], masses: &[f64], infinity_mass: f64, level: f64) -> f64 {
        let total: f64 = masses.iter().sum::<f64>() + infinity_mass;
        let normalized: Vec<f64> = masses.iter().map(|m| m / total).collect();
        let mut best: Option<f64> = None;
        for &v in values {
            let cdf: f64 = values.iter().zip(&normalized).filter(|(u, _)| **u <= v).map(|(_, m)| m).sum();
            if cdf >= level - CUMULATIVE_TOLERANCE && best.is_none_or(|b| v < b) {
                best = Some(v);
            }
        }
        match best {
            Some(v) => v,
            None if infinity_mass > 0.0 || level > 1.0 => f64::INFINITY,
            None => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}
