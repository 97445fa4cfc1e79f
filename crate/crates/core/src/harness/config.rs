//! TOML experiment configuration.
//!
//! ```toml
//! [experiment]
//! nodes = 5
//! rounds = 256
//! sigma = 0.1
//! seeds = [1, 2, 3, 4, 5]
//! algorithms = ["mono-dmfw", "dobga"]
//! topologies = ["complete", "cycle"]
//!
//! [region]
//! n = 20
//! upper = 1.0
//! budget = 3.0
//!
//! [objective]
//! kind = "facility"
//! users_per_round = 10
//!
//! [mono_dmfw]
//! phases = 32
//! blocks = 8
//!
//! [dobga]
//! grad_samples = 1
//!
//! [eval]
//! fw_steps = 200
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgorithmKind, DmfwConfig, DobgaConfig, MonoDmfwConfig, StepRule};
use crate::boosting::ONE_MINUS_INV_E;
use crate::error::{invalid, Result};
use crate::network::{Graph, Topology};
use crate::region::FeasibleRegion;

use super::data::{all_levels, SYNTH_RATE_PROB};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub region: RegionSection,
    pub objective: ObjectiveSection,
    #[serde(default)]
    pub mono_dmfw: MonoDmfwSection,
    #[serde(default)]
    pub dobga: DobgaSection,
    #[serde(default)]
    pub dmfw: DmfwSection,
    #[serde(default)]
    pub eval: EvalSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_name")]
    pub name: String,
    pub nodes: usize,
    pub rounds: usize,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub algorithms: Vec<String>,
    /// `complete`, `cycle`, `erdos-renyi` or `file:<edge list path>`.
    #[serde(default = "default_topologies")]
    pub topologies: Vec<String>,
    #[serde(default = "default_edge_prob")]
    pub edge_prob: f64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Caps {
    Uniform(f64),
    PerCoordinate(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSection {
    pub n: usize,
    #[serde(default = "default_upper")]
    pub upper: Caps,
    pub budget: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    Facility,
    Quadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSection {
    pub kind: ObjectiveKind,
    /// `b`: users per round (facility).
    #[serde(default)]
    pub users_per_round: Option<usize>,
    /// Ratings CSV; synthetic ratings when absent.
    #[serde(default)]
    pub ratings: Option<PathBuf>,
    #[serde(default = "all_levels")]
    pub levels: Vec<f64>,
    #[serde(default = "default_rate_prob")]
    pub rate_prob: f64,
    /// Seed of the synthetic data, fixed across run seeds.
    #[serde(default)]
    pub data_seed: u64,
    /// Entry magnitude of random quadratic Hessians.
    #[serde(default = "default_scale")]
    pub scale: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonoDmfwSection {
    pub phases: Option<usize>,
    pub blocks: Option<usize>,
    pub gamma: Option<f64>,
    pub oracle_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DobgaSection {
    #[serde(default = "default_grad_samples")]
    pub grad_samples: usize,
    /// Constant step; `1/sqrt(t)` when absent.
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default)]
    pub initial_point: Option<Vec<f64>>,
}

impl Default for DobgaSection {
    fn default() -> Self {
        Self {
            grad_samples: default_grad_samples(),
            step: None,
            initial_point: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DmfwSection {
    pub phases: Option<usize>,
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    pub oracle_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// Continuous-greedy steps; `max(200, 10 n)` when absent.
    #[serde(default)]
    pub fw_steps: Option<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            fw_steps: None,
            alpha: default_alpha(),
        }
    }
}

fn default_name() -> String {
    "experiment".to_string()
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_topologies() -> Vec<String> {
    vec!["complete".to_string()]
}
fn default_edge_prob() -> f64 {
    0.5
}
fn default_upper() -> Caps {
    Caps::Uniform(1.0)
}
fn default_rate_prob() -> f64 {
    SYNTH_RATE_PROB
}
fn default_scale() -> f64 {
    1.0
}
fn default_grad_samples() -> usize {
    1
}
fn default_alpha() -> f64 {
    ONE_MINUS_INV_E
}

/// A topology from the config: built in, or an edge-list file.
#[derive(Debug, Clone, PartialEq)]
pub enum TopologySpec {
    Builtin(Topology),
    File(PathBuf),
}

impl TopologySpec {
    pub fn parse(name: &str, edge_prob: f64) -> Result<Self> {
        Ok(match name {
            "complete" => TopologySpec::Builtin(Topology::Complete),
            "cycle" => TopologySpec::Builtin(Topology::Cycle),
            "erdos-renyi" => TopologySpec::Builtin(Topology::ErdosRenyi { edge_prob }),
            other => match other.strip_prefix("file:") {
                Some(path) => TopologySpec::File(PathBuf::from(path)),
                None => return Err(invalid(format!("unknown topology '{other}'"))),
            },
        })
    }

    /// Label used in file names and CSV rows.
    pub fn label(&self) -> String {
        match self {
            TopologySpec::Builtin(t) => t.name().to_string(),
            TopologySpec::File(p) => p
                .file_stem()
                .map_or_else(|| "custom".to_string(), |s| s.to_string_lossy().into_owned()),
        }
    }

    pub fn build(&self, nodes: usize, seed: u64) -> Result<Graph> {
        match self {
            TopologySpec::Builtin(t) => Graph::build(*t, nodes, seed),
            TopologySpec::File(path) => {
                let graph = Graph::parse_edge_list(&std::fs::read_to_string(path)?)?;
                if graph.node_count() != nodes {
                    return Err(invalid(format!(
                        "edge list {} has {} nodes, config asks for {nodes}",
                        path.display(),
                        graph.node_count()
                    )));
                }
                Ok(graph)
            }
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config; relative data and graph paths resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(r) = &cfg.objective.ratings {
            if r.is_relative() {
                cfg.objective.ratings = Some(base.join(r));
            }
        }
        for t in &mut cfg.experiment.topologies {
            if let Some(p) = t.strip_prefix("file:") {
                if Path::new(p).is_relative() {
                    *t = format!("file:{}", base.join(p).display());
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| invalid(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.nodes == 0 || e.rounds == 0 {
            return Err(invalid("experiment.nodes and experiment.rounds must be positive"));
        }
        if !(e.sigma.is_finite() && e.sigma >= 0.0) {
            return Err(invalid("experiment.sigma must be >= 0"));
        }
        if e.seeds.is_empty() {
            return Err(invalid("experiment.seeds must list at least one seed"));
        }
        if e.algorithms.is_empty() {
            return Err(invalid("experiment.algorithms must list at least one algorithm"));
        }
        for a in self.algorithms()? {
            match a {
                AlgorithmKind::MonoDmfw => {
                    self.mono_config()?;
                }
                AlgorithmKind::Dobga => {
                    self.dobga_config();
                    if self.dobga.grad_samples == 0 {
                        return Err(invalid("dobga.grad_samples must be at least 1"));
                    }
                }
                AlgorithmKind::Dmfw => {
                    self.dmfw_config()?;
                }
            }
        }
        self.topologies()?;
        self.region()?;
        if self.objective.kind == ObjectiveKind::Facility {
            let b = self.users_per_round()?;
            if b % e.nodes != 0 {
                return Err(invalid(format!(
                    "objective.users_per_round = {b} is not divisible by experiment.nodes = {}",
                    e.nodes
                )));
            }
            if self.region_upper().iter().any(|u| *u > 1.0) {
                return Err(invalid("facility objectives live on [0, 1]^n; region.upper must be <= 1"));
            }
        }
        if self.fw_steps() < 10 {
            return Err(invalid("eval.fw_steps must be at least 10"));
        }
        if !(self.eval.alpha > 0.0 && self.eval.alpha <= 1.0) {
            return Err(invalid("eval.alpha must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn algorithms(&self) -> Result<Vec<AlgorithmKind>> {
        self.experiment.algorithms.iter().map(|a| AlgorithmKind::parse(a)).collect()
    }

    pub fn topologies(&self) -> Result<Vec<TopologySpec>> {
        self.experiment
            .topologies
            .iter()
            .map(|t| TopologySpec::parse(t, self.experiment.edge_prob))
            .collect()
    }

    pub fn users_per_round(&self) -> Result<usize> {
        self.objective
            .users_per_round
            .filter(|b| *b > 0)
            .ok_or_else(|| invalid("facility objectives need objective.users_per_round > 0"))
    }

    fn region_upper(&self) -> Vec<f64> {
        match &self.region.upper {
            Caps::Uniform(u) => vec![*u; self.region.n],
            Caps::PerCoordinate(v) => v.clone(),
        }
    }

    pub fn region(&self) -> Result<FeasibleRegion> {
        if self.region.n == 0 {
            return Err(invalid("region.n must be positive"));
        }
        let upper = self.region_upper();
        if upper.len() != self.region.n {
            return Err(invalid(format!(
                "region.upper lists {} caps for n = {}",
                upper.len(),
                self.region.n
            )));
        }
        FeasibleRegion::new(upper, self.region.budget)
    }

    pub fn fw_steps(&self) -> usize {
        self.eval.fw_steps.unwrap_or_else(|| (10 * self.region.n).max(200))
    }

    pub fn mono_config(&self) -> Result<MonoDmfwConfig> {
        let s = &self.mono_dmfw;
        let t = self.experiment.rounds;
        let mut cfg = match (s.phases, s.blocks) {
            (None, None) => MonoDmfwConfig::for_horizon(t)?,
            (Some(k), None) if k > 0 && t.is_multiple_of(k) => MonoDmfwConfig::new(k, t / k, default_gamma(t))?,
            (None, Some(q)) if q > 0 && t.is_multiple_of(q) => MonoDmfwConfig::new(t / q, q, default_gamma(t))?,
            (Some(k), Some(q)) => MonoDmfwConfig::new(k, q, default_gamma(t))?,
            _ => return Err(invalid(format!("mono_dmfw blocking does not divide T = {t}"))),
        };
        if let Some(g) = s.gamma {
            cfg.gamma = g;
        }
        cfg.oracle_scale = s.oracle_scale;
        cfg.validate()?;
        if cfg.rounds() != t {
            return Err(invalid(format!(
                "mono_dmfw.phases * mono_dmfw.blocks = {} but T = {t}",
                cfg.rounds()
            )));
        }
        Ok(cfg)
    }

    pub fn dobga_config(&self) -> DobgaConfig {
        DobgaConfig {
            step: self.dobga.step.map_or(StepRule::InvSqrt, StepRule::Constant),
            grad_samples: self.dobga.grad_samples,
            initial_point: self.dobga.initial_point.clone(),
        }
    }

    pub fn dmfw_config(&self) -> Result<DmfwConfig> {
        let s = &self.dmfw;
        let mut cfg = match s.phases {
            Some(k) => DmfwConfig::with_phases(k)?,
            None => DmfwConfig::for_horizon(self.experiment.rounds)?,
        };
        if let Some(eta) = s.eta {
            cfg.eta = eta;
        }
        if let Some(g) = s.gamma {
            cfg.gamma = g;
        }
        cfg.oracle_scale = s.oracle_scale;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `T^{-1/5}`
fn default_gamma(rounds: usize) -> f64 {
    (rounds as f64).powf(-0.2)
}
