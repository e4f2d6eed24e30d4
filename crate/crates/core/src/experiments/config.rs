//! TOML files for single runs and custom sweeps.
//!
//! Every key is optional; missing keys take the experiment defaults.

use std::path::Path;

use serde::Deserialize;

use super::{default_truth, GridPoint, Param, SweepSpec, DEFAULT_EPSILON, DEFAULT_REPLICATES};
use crate::error::{Error, Result};
use crate::linalg::{try_from_rows, Matrix};
use crate::sde::DEFAULT_DT;
use crate::stabilizer::StabilizationConfig;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Fields of [`StabilizationConfig`]. `r` sets `R = r·I` unless `r_weight` is given.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub tau: Option<f64>,
    pub n_periods: Option<usize>,
    pub sigma_l: Option<f64>,
    pub sigma_eta: Option<f64>,
    pub epsilon: Option<f64>,
    pub dt: Option<f64>,
    pub r: Option<f64>,
    pub q_weight: Option<Vec<Vec<f64>>>,
    pub r_weight: Option<Vec<Vec<f64>>>,
    pub seed: Option<u64>,
    pub overflow_bound: Option<f64>,
    pub x0: Option<Vec<f64>>,
}

impl RunFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&read(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Applies the file on top of `base`.
    pub fn apply(&self, mut base: StabilizationConfig) -> Result<StabilizationConfig> {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field { base.$field = v; }
            )*};
        }
        set!(tau, n_periods, sigma_l, sigma_eta, epsilon, dt, seed, overflow_bound);
        if let Some(r) = self.r {
            let q = base.r_weight.nrows();
            base.r_weight = Matrix::identity(q, q) * r;
        }
        if let Some(rows) = &self.q_weight {
            base.q_weight = try_from_rows(rows)?;
        }
        if let Some(rows) = &self.r_weight {
            base.r_weight = try_from_rows(rows)?;
        }
        if let Some(x0) = &self.x0 {
            base.x0 = Some(x0.clone());
        }
        Ok(base)
    }
}

/// A one-dimensional sweep: `swept` takes each of `values`, repeated for
/// every entry of `n`, with the remaining parameters held fixed.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    #[serde(default = "default_name")]
    pub name: String,
    pub swept: Param,
    pub values: Vec<f64>,
    #[serde(default = "default_periods")]
    pub n: Vec<usize>,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "one")]
    pub sigma_l: f64,
    #[serde(default = "one")]
    pub sigma_eta: f64,
    #[serde(default = "one")]
    pub r: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
}

fn default_name() -> String {
    "custom".into()
}
fn default_periods() -> Vec<usize> {
    vec![1, 2, 3, 4]
}
fn default_tau() -> f64 {
    10.0
}
fn one() -> f64 {
    1.0
}
fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn default_dt() -> f64 {
    DEFAULT_DT
}

impl SweepFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&read(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_spec(&self) -> Result<SweepSpec> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep needs at least one value".into()));
        }
        let base = GridPoint {
            tau: self.tau,
            sigma_l: self.sigma_l,
            sigma_eta: self.sigma_eta,
            n: 1,
            r: self.r,
            epsilon: self.epsilon,
            dt: self.dt,
        };
        let ns: Vec<usize> = if self.swept == Param::N { vec![0] } else { self.n.clone() };
        let mut points = Vec::new();
        for &n in &ns {
            for &v in &self.values {
                let mut pt = GridPoint { n, ..base };
                match self.swept {
                    Param::Tau => pt.tau = v,
                    Param::SigmaL => pt.sigma_l = v,
                    Param::SigmaEta => pt.sigma_eta = v,
                    Param::R => pt.r = v,
                    Param::N => {
                        if v < 1.0 || v.fract() != 0.0 {
                            return Err(Error::Config(format!("n values must be positive integers, got {v}")));
                        }
                        pt.n = v as usize;
                    }
                }
                points.push(pt);
            }
        }
        let spec = SweepSpec {
            name: self.name.clone(),
            swept: self.swept,
            panel: None,
            points,
            replicates: self.replicates.unwrap_or(DEFAULT_REPLICATES),
            base_seed: self.seed.unwrap_or(0),
            truth: default_truth(),
        };
        spec.validate()?;
        Ok(spec)
    }
}
