//! TOML run configuration.
//!
//! ```toml
//! [domain]
//! dim = 1
//! nodes = 31
//! horizon = 1.0
//!
//! [phi]
//! kind = "power"
//! m = 2.0
//!
//! [coefficients]
//! epsilon = 0.01
//! sigma = 0.5
//! nu = [{ kind = "const", params = [0.5] }]
//!
//! [noise]
//! seed = 7
//! dt = 1e-3
//!
//! [data]
//! xi = { kind = "sine", params = [1.0, 1.0] }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::Statistic;
use crate::func::{BoxDomain, FnSpec, TimeFn};
use crate::model::{CoefficientSet, Exponent, InitialData, NoiseConvention, ProblemSpec};
use crate::phi::PhiSpec;
use crate::solver::{Scheme, SolverConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSection,
    pub phi: PhiSpec,
    #[serde(default)]
    pub coefficients: CoefficientSection,
    #[serde(default)]
    pub noise: NoiseSection,
    pub data: DataSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Nodes {
    Uniform(usize),
    PerAxis(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub dim: usize,
    /// Interior nodes, one value for all axes or one per axis.
    pub nodes: Nodes,
    pub horizon: f64,
    #[serde(default)]
    pub lower: Option<Vec<f64>>,
    #[serde(default)]
    pub upper: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sigma {
    Constant(f64),
    Modulated(TimeFn),
}

impl Default for Sigma {
    fn default() -> Self {
        Sigma::Constant(0.0)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSection {
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub convention: NoiseConvention,
    #[serde(default)]
    pub sigma: Sigma,
    /// One entry per axis; missing axes are zero.
    #[serde(default)]
    pub b: Vec<FnSpec>,
    #[serde(default)]
    pub c: Option<FnSpec>,
    #[serde(default)]
    pub f: Option<FnSpec>,
    #[serde(default)]
    pub nu: Vec<FnSpec>,
    #[serde(default)]
    pub g: Vec<FnSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            seed: 0,
            dt: default_dt(),
        }
    }
}

fn default_dt() -> f64 {
    1e-3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub xi: InitialData,
    #[serde(default = "infinite")]
    pub mu: Exponent,
    #[serde(default = "two")]
    pub alpha: f64,
}

fn infinite() -> Exponent {
    Exponent::Infinite
}

fn two() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_max_iter")]
    pub newton_max_iter: usize,
    #[serde(default = "default_floor")]
    pub jacobian_floor: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "one_usize")]
    pub record_every: usize,
    #[serde(default = "default_p_list")]
    pub p_list: Vec<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            newton_tol: default_tol(),
            newton_max_iter: default_max_iter(),
            jacobian_floor: default_floor(),
            scheme: default_scheme(),
            record_every: 1,
            p_list: default_p_list(),
        }
    }
}

fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    50
}
fn default_floor() -> f64 {
    1e-12
}
fn default_scheme() -> Scheme {
    Scheme::FiniteDifference
}
fn one_usize() -> usize {
    1
}
fn default_p_list() -> Vec<f64> {
    vec![2.0]
}

/// Fields fed to the embedding check.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GnMode {
    /// Recorded states of path 0.
    #[default]
    Trajectory,
    /// The initial datum held constant on `(0, T)`.
    Frozen,
}

/// Parameters of the experiment subcommands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_statistic")]
    pub statistic: Statistic,
    #[serde(default = "default_eps")]
    pub eps_list: Vec<f64>,
    #[serde(default = "default_rho")]
    pub rho_list: Vec<f64>,
    /// `L_p` exponent of the Itô and Gronwall checks.
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default = "default_lambda")]
    pub lambda: Vec<f64>,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub gn_mode: GnMode,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    /// Stand-in for the unspecified constant in the ladder table.
    #[serde(default)]
    pub n_free: Option<f64>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            paths: default_paths(),
            statistic: default_statistic(),
            eps_list: default_eps(),
            rho_list: default_rho(),
            p: 2.0,
            lambda: default_lambda(),
            eta: default_eta(),
            gn_mode: GnMode::Trajectory,
            pairs: default_pairs(),
            n_free: None,
        }
    }
}

fn default_paths() -> usize {
    100
}
fn default_statistic() -> Statistic {
    Statistic::SupInf
}
fn default_eps() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3, 1e-4]
}
fn default_rho() -> Vec<f64> {
    vec![0.02, 0.05, 0.1, 0.2, 0.4]
}
fn default_lambda() -> Vec<f64> {
    vec![1.0, 1.5, 2.0]
}
fn default_eta() -> f64 {
    0.05
}
fn default_pairs() -> usize {
    500
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        RunConfig::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        let d = self.domain.dim;
        let nodes = match &self.domain.nodes {
            Nodes::Uniform(n) => vec![*n; d],
            Nodes::PerAxis(v) => v.clone(),
        };
        let lower = self.domain.lower.clone().unwrap_or_else(|| vec![0.0; d]);
        let upper = self.domain.upper.clone().unwrap_or_else(|| vec![1.0; d]);
        if lower.len() != d || upper.len() != d {
            return Err(Error::Config(format!("domain bounds need {d} entries")));
        }
        let co = &self.coefficients;
        let mut b = co.b.clone();
        if b.len() > d {
            return Err(Error::Config(format!("coefficients.b has {} entries for d = {d}", b.len())));
        }
        b.resize(d, FnSpec::zero());
        let mut spec = ProblemSpec::new(d, 1, self.domain.horizon, self.phi.clone(), self.data.xi.clone());
        spec.domain = BoxDomain { lower, upper };
        spec.nodes = nodes;
        spec.coeffs = CoefficientSet {
            b,
            c: co.c.clone().unwrap_or_else(FnSpec::zero),
            sigma: match &co.sigma {
                Sigma::Constant(v) => TimeFn::constant(*v),
                Sigma::Modulated(t) => t.clone(),
            },
            nu: co.nu.clone(),
            f: co.f.clone().unwrap_or_else(FnSpec::zero),
            g: co.g.clone(),
        };
        spec.epsilon = co.epsilon;
        spec.convention = co.convention;
        spec.mu = self.data.mu;
        spec.alpha = self.data.alpha;
        spec.check_shape()?;
        Ok(spec)
    }

    pub fn solver(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            dt: self.noise.dt,
            newton_tol: s.newton_tol,
            newton_max_iter: s.newton_max_iter,
            jacobian_floor: s.jacobian_floor,
            scheme: s.scheme,
            record_every: s.record_every,
            p_list: s.p_list.clone(),
            record_hminus1: true,
            record_increments: false,
            seed: self.noise.seed,
        }
    }
}
