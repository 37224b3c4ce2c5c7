use crate::error::{Error, Result};

/// Horvitz–Thompson mean `(1/N) Σ y_i / π_i` over the observed units.
pub fn ht_mean(values: &[f64], inclusion_probs: &[f64], population_size: usize) -> Result<f64> {
    if values.len() != inclusion_probs.len() {
        return Err(Error::DimensionMismatch { expected: values.len(), got: inclusion_probs.len() });
    }
    if population_size == 0 || values.len() > population_size {
        return Err(Error::invalid(format!(
            "population size {population_size} must be positive and at least the sample size {}",
            values.len()
        )));
    }
    let mut total = 0.0;
    for (&y, &p) in values.iter().zip(inclusion_probs) {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::invalid(format!("inclusion probability must lie in (0,1], got {p}")));
        }
        if !y.is_finite() {
            return Err(Error::invalid("values must be finite"));
        }
        total += y / p;
    }
    Ok(total / population_size as f64)
}

/// Horvitz–Thompson estimate of the population CDF at `t`.
pub fn ht_cdf(values: &[f64], weights: &[f64], population_size: usize, t: f64) -> f64 {
    values.iter().zip(weights).filter(|(v, _)| **v <= t).map(|(_, w)| w).sum::<f64>() / population_size as f64
}
