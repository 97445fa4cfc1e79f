//! Mono-DMFW, DOBGA and the DMFW baseline.
//!
//! Every run is synchronous: within a phase or round each node reads only
//! the previous snapshot of its neighbors' vectors. Results are
//! bit-reproducible from the seed.

mod dobga;
mod meta_fw;
mod schedule;

pub use dobga::run_dobga;
pub use meta_fw::{run_dmfw, run_mono_dmfw};
pub use schedule::{dobga_eta, mono_dmfw_eta, suggest_blocking};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::network::WeightMatrix;
use crate::objectives::ObjectiveStream;
use crate::region::{FeasibleRegion, Geometry, Region};

/// Random `(lo, hi)` pairs per cell used to spot-check monotone
/// DR-submodularity before a run.
const ASSUMPTION_PAIRS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmKind {
    MonoDmfw,
    Dobga,
    Dmfw,
}

impl AlgorithmKind {
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::MonoDmfw => "mono-dmfw",
            AlgorithmKind::Dobga => "dobga",
            AlgorithmKind::Dmfw => "dmfw",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "mono-dmfw" => Ok(AlgorithmKind::MonoDmfw),
            "dobga" => Ok(AlgorithmKind::Dobga),
            "dmfw" => Ok(AlgorithmKind::Dmfw),
            other => Err(invalid(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// Blocking `T = K Q` and the gradient-tracking consensus weight `gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonoDmfwConfig {
    /// `K`: block length and number of phases per block.
    pub phases: usize,
    /// `Q`: number of blocks.
    pub blocks: usize,
    pub gamma: f64,
    /// Oracle step scale; `None` uses `diam(K)`.
    #[serde(default)]
    pub oracle_scale: Option<f64>,
}

impl MonoDmfwConfig {
    pub fn new(phases: usize, blocks: usize, gamma: f64) -> Result<Self> {
        let cfg = Self {
            phases,
            blocks,
            gamma,
            oracle_scale: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `K = 2^ceil(0.6 log2 T)`, `Q = T / K`, `gamma = T^{-1/5}`.
    pub fn for_horizon(rounds: usize) -> Result<Self> {
        let (k, q) = suggest_blocking(rounds)?;
        Self::new(k, q, (rounds as f64).powf(-0.2))
    }

    pub fn rounds(&self) -> usize {
        self.phases * self.blocks
    }

    pub fn validate(&self) -> Result<()> {
        if self.phases == 0 || self.blocks == 0 {
            return Err(invalid("K and Q must be positive"));
        }
        check_gamma(self.gamma)?;
        check_scale(self.oracle_scale)
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(invalid(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    Ok(())
}

fn check_scale(scale: Option<f64>) -> Result<()> {
    match scale {
        Some(c) if !(c.is_finite() && c > 0.0) => {
            Err(invalid(format!("oracle scale must be positive, got {c}")))
        }
        _ => Ok(()),
    }
}

/// DOBGA step sizes; all rules are nonincreasing in `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    /// `1 / sqrt(t)`
    InvSqrt,
    Constant(f64),
    /// Explicit `eta_1, eta_2, ...`; must cover the horizon.
    Custom(Vec<f64>),
}

impl StepRule {
    /// Step for round `t >= 1`.
    pub fn eta(&self, t: usize) -> Result<f64> {
        match self {
            StepRule::InvSqrt => dobga_eta(t),
            StepRule::Constant(c) => Ok(*c),
            StepRule::Custom(steps) => steps
                .get(t.wrapping_sub(1))
                .copied()
                .ok_or_else(|| invalid(format!("custom schedule has no step for round {t}"))),
        }
    }

    fn validate(&self, rounds: usize) -> Result<()> {
        let steps: Vec<f64> = (1..=rounds).map(|t| self.eta(t)).collect::<Result<_>>()?;
        if let Some(e) = steps.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return Err(invalid(format!("step sizes must be positive, got {e}")));
        }
        if steps.windows(2).any(|w| w[1] > w[0]) {
            return Err(invalid("step sizes must be nonincreasing"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DobgaConfig {
    pub step: StepRule,
    /// Boosted gradients averaged per node per round.
    pub grad_samples: usize,
    /// `x_i(1)` for every node; `None` is the origin.
    #[serde(default)]
    pub initial_point: Option<Vec<f64>>,
}

impl Default for DobgaConfig {
    fn default() -> Self {
        Self {
            step: StepRule::InvSqrt,
            grad_samples: 1,
            initial_point: None,
        }
    }
}

/// `K` phases per round with constant tracking step `eta` and consensus
/// weight `gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmfwConfig {
    pub phases: usize,
    pub eta: f64,
    pub gamma: f64,
    #[serde(default)]
    pub oracle_scale: Option<f64>,
}

impl DmfwConfig {
    /// `eta = 2 / K^{2/3}` and `gamma = 1 / sqrt(K)`.
    pub fn with_phases(phases: usize) -> Result<Self> {
        let k = phases as f64;
        let cfg = Self {
            phases,
            eta: (2.0 / k.powf(2.0 / 3.0)).min(1.0),
            gamma: 1.0 / k.sqrt(),
            oracle_scale: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `K = ceil(T^{3/2})`.
    pub fn for_horizon(rounds: usize) -> Result<Self> {
        Self::with_phases(((rounds as f64).powf(1.5) - 1e-9).ceil() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if self.phases == 0 {
            return Err(invalid("DMFW needs at least one phase"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(invalid(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        check_gamma(self.gamma)?;
        check_scale(self.oracle_scale)
    }
}

/// Consensus snapshot after phase `phase` of block `block` (both from 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub block: usize,
    pub phase: usize,
    /// `x_bar^{(k)}`
    pub mean: Vec<f64>,
    /// `||x_bar^{(k)} - x_bar^{(k-1)}||`
    pub drift: f64,
    /// `sqrt(sum_i ||x_i^{(k)} - x_bar^{(k)}||^2)`
    pub deviation: f64,
}

/// DOBGA diagnostics for round `round` (from 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub round: usize,
    pub eta: f64,
    /// `max_i ||x_i(t+1) - y_i(t+1)||`
    pub residual: f64,
    /// Running maximum of observed stochastic-gradient norms.
    pub g1: f64,
    /// `sqrt(sum_i ||x_i(t) - x_bar(t)||^2)`
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub seed: u64,
    pub nodes: usize,
    pub rounds: usize,
    pub dim: usize,
    pub beta: f64,
    pub radius: f64,
    pub diameter: f64,
    pub diameter_is_bound: bool,
    pub sigma: f64,
    pub gradient_bound: f64,
    /// Oracle step scale, for the Frank-Wolfe variants.
    pub oracle_scale: Option<f64>,
    /// `K` for the Frank-Wolfe variants.
    pub phases: Option<usize>,
    pub gamma: Option<f64>,
    pub grad_samples: usize,
    /// Vectors carried by one exchange.
    pub vectors_per_exchange: usize,
    /// Payload bytes sent per node per round.
    pub bytes_per_round: u64,
}

/// Everything a run produced. Per-round tables are indexed `[t][i]` with `t`
/// from 0; counters are cumulative through the end of round `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub algorithm: AlgorithmKind,
    pub actions: Vec<Vec<Vec<f64>>>,
    pub rewards: Vec<Vec<f64>>,
    pub grad_queries: Vec<Vec<u64>>,
    pub exchanges: Vec<Vec<u64>>,
    pub phases: Vec<PhaseRecord>,
    pub steps: Vec<StepRecord>,
    pub meta: TraceMeta,
}

impl Trace {
    pub fn rounds(&self) -> usize {
        self.actions.len()
    }

    pub fn nodes(&self) -> usize {
        self.meta.nodes
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Per-round counter increments, turned into cumulative tables at the end.
pub(crate) struct Counters {
    grads: Vec<Vec<u64>>,
    exchanges: Vec<Vec<u64>>,
}

impl Counters {
    pub(crate) fn new(rounds: usize, nodes: usize) -> Self {
        Self {
            grads: vec![vec![0; nodes]; rounds],
            exchanges: vec![vec![0; nodes]; rounds],
        }
    }

    pub(crate) fn grad(&mut self, round: usize, node: usize, count: u64) {
        self.grads[round][node] += count;
    }

    pub(crate) fn exchange(&mut self, round: usize, node: usize) {
        self.exchanges[round][node] += 1;
    }

    pub(crate) fn cumulative(self) -> (Vec<Vec<u64>>, Vec<Vec<u64>>) {
        fn accumulate(mut table: Vec<Vec<u64>>) -> Vec<Vec<u64>> {
            for t in 1..table.len() {
                let (done, rest) = table.split_at_mut(t);
                rest[0].iter_mut().zip(&done[t - 1]).for_each(|(a, b)| *a += b);
            }
            table
        }
        (accumulate(self.grads), accumulate(self.exchanges))
    }
}

/// Checks shared by every algorithm: shapes agree, the weight matrix has
/// `beta < 1`, and every local objective passes a monotone DR-submodular
/// spot check on the region's box.
pub(crate) fn validate_inputs(
    stream: &ObjectiveStream,
    weights: &WeightMatrix,
    region: &FeasibleRegion,
    seed: u64,
) -> Result<Geometry> {
    if weights.size() != stream.nodes() {
        return Err(invalid(format!(
            "weight matrix is {0}x{0} but the stream has {1} nodes",
            weights.size(),
            stream.nodes()
        )));
    }
    if region.dim() != stream.dim() {
        return Err(invalid(format!(
            "region has dimension {}, objectives have {}",
            region.dim(),
            stream.dim()
        )));
    }
    if !(weights.beta() < 1.0) {
        return Err(Error::AssumptionViolated(format!(
            "weight matrix has beta = {}, need beta < 1",
            weights.beta()
        )));
    }
    stream.check_dr_monotone(region.upper(), ASSUMPTION_PAIRS, seed)?;
    Ok(region.geometry())
}

pub(crate) fn base_meta(
    stream: &ObjectiveStream,
    weights: &WeightMatrix,
    geometry: &Geometry,
    seed: u64,
) -> TraceMeta {
    TraceMeta {
        seed,
        nodes: stream.nodes(),
        rounds: stream.rounds(),
        dim: stream.dim(),
        beta: weights.beta(),
        radius: geometry.radius,
        diameter: geometry.diameter,
        diameter_is_bound: geometry.diameter_is_bound,
        sigma: stream.sigma(),
        gradient_bound: stream.gradient_bound(),
        oracle_scale: None,
        phases: None,
        gamma: None,
        grad_samples: 1,
        vectors_per_exchange: 1,
        bytes_per_round: 0,
    }
}
