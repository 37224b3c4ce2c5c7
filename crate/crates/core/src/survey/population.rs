use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClusterLabel, Dataset};
use crate::error::{Error, Result};
use crate::seeds::stream_rng;

pub const COVARIATE_DIM: usize = 10;

/// The two binary-response generative models of the simulation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    A,
    B,
}

impl Scenario {
    /// `P(Y = 1 | X = x)`.
    pub fn probability(self, x: &[f64]) -> f64 {
        let eta = match self {
            Scenario::A => -3.0 + x.iter().take(10).sum::<f64>(),
            Scenario::B => -2.0 + x[..3].iter().sum::<f64>() + x[6..10].iter().product::<f64>(),
        };
        1.0 / (1.0 + eta.exp())
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::A => "a",
            Scenario::B => "b",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "A" => Ok(Scenario::A),
            "b" | "B" => Ok(Scenario::B),
            other => Err(Error::Config(format!("unknown scenario `{other}` (expected a or b)"))),
        }
    }
}

/// How synthetic populations are split into states and cities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterLayout {
    pub units_per_city: usize,
    pub min_cities_per_state: usize,
    pub max_cities_per_state: usize,
}

impl Default for ClusterLayout {
    fn default() -> Self {
        ClusterLayout { units_per_city: 25, min_cities_per_state: 3, max_cities_per_state: 8 }
    }
}

impl ClusterLayout {
    pub fn validate(&self) -> Result<()> {
        if self.units_per_city == 0
            || self.min_cities_per_state == 0
            || self.min_cities_per_state > self.max_cities_per_state
        {
            return Err(Error::Config("invalid cluster layout".into()));
        }
        Ok(())
    }
}

/// Draws a superpopulation of `n` units: `X ~ N(0, I_10)`, `Y | X ~ Bernoulli(π(X))`,
/// with state/city labels attached for the cluster sampler.
///
/// Cities hold `units_per_city` units (sizes differ by at most one); states get a
/// uniformly drawn number of consecutive cities, the last state taking the remainder.
pub fn generate_population(scenario: Scenario, n: usize, seed: u64, layout: &ClusterLayout) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("population size must be at least 1"));
    }
    layout.validate()?;
    let mut rng = stream_rng(seed, 0, 1);
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..COVARIATE_DIM).map(|_| rng.sample(StandardNormal)).collect();
        let p = scenario.probability(&x);
        labels.push(u8::from(rng.random::<f64>() < p));
        features.push(x);
    }

    let n_cities = n.div_ceil(layout.units_per_city);
    let mut state_of_city = Vec::with_capacity(n_cities);
    let mut state = 0u32;
    while state_of_city.len() < n_cities {
        let size = rng.random_range(layout.min_cities_per_state..=layout.max_cities_per_state);
        for _ in 0..size.min(n_cities - state_of_city.len()) {
            state_of_city.push(state);
        }
        state += 1;
    }
    let clusters = (0..n)
        .map(|j| {
            let city = (j % n_cities) as u32;
            ClusterLabel { state: state_of_city[city as usize], city }
        })
        .collect();

    let columns = (1..=COVARIATE_DIM).map(|i| format!("x{i}")).collect();
    let ids = (0..n).map(|i| i.to_string()).collect();
    Dataset::new(columns, features, Some(labels), vec![1.0; n], ids)?.with_clusters(clusters)
}
