//! Seeded random measurement matrices.
//!
//! Both models draw from ChaCha8 seeded with `seed_from_u64(seed)` in
//! row-major order. The stream is stable for a given build of this crate;
//! other implementations only need to match the distributions.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    /// Model 1: entries i.i.d. N(0, 1).
    Gaussian,
    /// Model 2: entries i.i.d. in {0, 1} with P(1) = 0.5.
    Bernoulli,
}

impl Model {
    pub fn id(self) -> u8 {
        match self {
            Model::Gaussian => 1,
            Model::Bernoulli => 2,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Model::Gaussian),
            2 => Ok(Model::Bernoulli),
            other => Err(Error::InvalidSpec(format!(
                "unknown model {other}, expected 1 (Gaussian) or 2 (Bernoulli)"
            ))),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "gaussian" => Ok(Model::Gaussian),
            "2" | "bernoulli" => Ok(Model::Bernoulli),
            other => Err(Error::InvalidSpec(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub model: Model,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(model: Model, n: usize, k: usize, seed: u64) -> Result<Self> {
        let spec = Self { model, n, k, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n < self.k {
            return Err(Error::InvalidSpec(format!(
                "need n >= k >= 1, got n = {}, k = {}",
                self.n, self.k
            )));
        }
        Ok(())
    }
}

pub fn generate(spec: &ModelSpec) -> Result<Matrix> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let len = spec.n * spec.k;
    let data: Vec<f64> = match spec.model {
        Model::Gaussian => (0..len).map(|_| rng.sample(StandardNormal)).collect(),
        Model::Bernoulli => (0..len)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 })
            .collect(),
    };
    Matrix::new(spec.n, spec.k, data)
}
