//! Benchmark, `alpha`-regret, counter audits and bound probes.

use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgorithmKind, Trace};
use crate::boosting::ONE_MINUS_INV_E;
use crate::error::{invalid, Error, Result};
use crate::objectives::ObjectiveStream;
use crate::region::{FeasibleRegion, Region};
use crate::vecops::axpy;

pub const BENCHMARK_METHOD: &str = "continuous-greedy";

/// Slack allowed on the Frank-Wolfe probes.
pub const FW_PROBE_TOL: f64 = 1e-9;
/// Slack allowed on the DOBGA residual probe.
pub const RESIDUAL_PROBE_TOL: f64 = 1e-9;
/// Slack allowed on the DOBGA deviation probe.
pub const DOBGA_DEVIATION_TOL: f64 = 1e-6;

/// Approximate hindsight maximizer of `Phi = (1/NT) sum f_{t,i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub point: Vec<f64>,
    pub value: f64,
    pub steps: usize,
    pub method: String,
}

/// Continuous greedy on `Phi` with exact gradients:
/// `x <- x + lmo(grad Phi(x)) / steps`, `steps` times from the origin.
pub fn offline_opt(stream: &ObjectiveStream, region: &FeasibleRegion, steps: usize) -> Result<Benchmark> {
    if steps < 10 {
        return Err(invalid(format!("continuous greedy needs at least 10 steps, got {steps}")));
    }
    if region.dim() != stream.dim() {
        return Err(invalid("region and objectives have different dimensions"));
    }
    let mut x = vec![0.0; stream.dim()];
    let h = 1.0 / steps as f64;
    for _ in 0..steps {
        let v = region.lmo(&stream.average_gradient(&x)?);
        axpy(h, &v, &mut x);
    }
    // Clear rounding overshoot of the caps.
    let x = region.project(&x)?;
    Ok(Benchmark {
        value: stream.average_value(&x)?,
        point: x,
        steps,
        method: BENCHMARK_METHOD.to_string(),
    })
}

/// Per-node `alpha`-regret curves, indexed `[t][j]` with `t` from 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub alpha: f64,
    pub benchmark: Benchmark,
    /// `(1/N) sum_i f_{t,i}(x*)`
    pub benchmark_rounds: Vec<f64>,
    /// `(1/N) sum_i f_{t,i}(x_j(t))`
    pub earned: Vec<Vec<f64>>,
    pub cum_regret: Vec<Vec<f64>>,
    pub ratio: Vec<Vec<f64>>,
}

impl RegretReport {
    pub fn rounds(&self) -> usize {
        self.cum_regret.len()
    }

    /// Ratio after `t` rounds (from 1), averaged over nodes.
    pub fn mean_ratio(&self, t: usize) -> f64 {
        let row = &self.ratio[t - 1];
        row.iter().sum::<f64>() / row.len() as f64
    }

    pub fn final_ratio(&self) -> f64 {
        self.mean_ratio(self.rounds())
    }

    /// Rebuild the curves from the per-round values and compare exactly.
    pub fn is_consistent(&self) -> bool {
        let nodes = self.earned.first().map_or(0, Vec::len);
        let mut running = vec![0.0; nodes];
        for t in 0..self.rounds() {
            for j in 0..nodes {
                running[j] += self.alpha * self.benchmark_rounds[t] - self.earned[t][j];
                if running[j] != self.cum_regret[t][j]
                    || running[j] / (t + 1) as f64 != self.ratio[t][j]
                {
                    return false;
                }
            }
        }
        true
    }
}

/// `R(t, j) = sum_{s<=t} [alpha (1/N) sum_i f_{s,i}(x*) - (1/N) sum_i f_{s,i}(x_j(s))]`
/// with exact objective values.
pub fn alpha_regret(
    trace: &Trace,
    stream: &ObjectiveStream,
    region: &FeasibleRegion,
    benchmark: &Benchmark,
    alpha: f64,
) -> Result<RegretReport> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if !region.contains(&benchmark.point, 1e-9)? {
        return Err(invalid("benchmark point lies outside the feasible region"));
    }
    if trace.rounds() != stream.rounds() || trace.nodes() != stream.nodes() {
        return Err(invalid("trace and objective stream have different shapes"));
    }
    let n = stream.nodes() as f64;
    let mut benchmark_rounds = Vec::with_capacity(trace.rounds());
    let mut earned = Vec::with_capacity(trace.rounds());
    for (t, actions) in trace.actions.iter().enumerate() {
        benchmark_rounds.push(stream.round_value(t, &benchmark.point)? / n);
        earned.push(
            actions
                .iter()
                .map(|x| Ok(stream.round_value(t, x)? / n))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let nodes = stream.nodes();
    let mut running = vec![0.0; nodes];
    let mut cum_regret = Vec::with_capacity(trace.rounds());
    let mut ratio = Vec::with_capacity(trace.rounds());
    for t in 0..trace.rounds() {
        for j in 0..nodes {
            running[j] += alpha * benchmark_rounds[t] - earned[t][j];
        }
        ratio.push(running.iter().map(|r| r / (t + 1) as f64).collect());
        cum_regret.push(running.clone());
    }
    Ok(RegretReport {
        alpha,
        benchmark: benchmark.clone(),
        benchmark_rounds,
        earned,
        cum_regret,
        ratio,
    })
}

/// Whether `Phi(x*)` beats every played action's `Phi` up to `1e-6`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dominance {
    pub benchmark_value: f64,
    pub best_action_value: f64,
    pub holds: bool,
}

pub fn benchmark_dominance(trace: &Trace, stream: &ObjectiveStream, benchmark: &Benchmark) -> Result<Dominance> {
    let mut best = f64::NEG_INFINITY;
    let mut seen: Vec<Option<&Vec<f64>>> = vec![None; trace.nodes()];
    for actions in &trace.actions {
        for (j, x) in actions.iter().enumerate() {
            if seen[j] == Some(x) {
                continue;
            }
            seen[j] = Some(x);
            best = best.max(stream.average_value(x)?);
        }
    }
    Ok(Dominance {
        benchmark_value: benchmark.value,
        best_action_value: best,
        holds: benchmark.value >= best - 1e-6,
    })
}

/// Per-node-per-round gradient queries and exchanges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterAudit {
    pub algorithm: AlgorithmKind,
    pub expected: (u64, u64),
    pub observed: (u64, u64),
}

/// Expected counts: Mono-DMFW `(1, 1)`, DOBGA `(grad_samples, 1)`, DMFW `(K, K)`.
pub fn expected_counts(trace: &Trace) -> Result<(u64, u64)> {
    Ok(match trace.algorithm {
        AlgorithmKind::MonoDmfw => (1, 1),
        AlgorithmKind::Dobga => (trace.meta.grad_samples as u64, 1),
        AlgorithmKind::Dmfw => {
            let k = trace
                .meta
                .phases
                .ok_or_else(|| invalid("DMFW trace is missing its phase count"))? as u64;
            (k, k)
        }
    })
}

/// Every node must spend exactly the expected counts in every round.
pub fn audit_counters(trace: &Trace) -> Result<CounterAudit> {
    let expected = expected_counts(trace)?;
    let per_round = |table: &[Vec<u64>]| -> (u64, bool) {
        let mut prev = vec![0u64; trace.nodes()];
        let mut worst = None;
        let mut uniform = true;
        for row in table {
            for (p, c) in prev.iter_mut().zip(row) {
                if c < p {
                    uniform = false;
                }
                let step = c.saturating_sub(*p);
                *p = *c;
                match worst {
                    None => worst = Some(step),
                    Some(w) if w != step => {
                        uniform = false;
                        worst = Some(w.max(step));
                    }
                    _ => {}
                }
            }
        }
        (worst.unwrap_or(0), uniform)
    };
    let (grads, grads_uniform) = per_round(&trace.grad_queries);
    let (exchanges, exchanges_uniform) = per_round(&trace.exchanges);
    let observed = (grads, exchanges);
    if observed != expected || !grads_uniform || !exchanges_uniform {
        return Err(Error::AuditFailure {
            algorithm: trace.algorithm.name().to_string(),
            expected,
            observed,
        });
    }
    Ok(CounterAudit {
        algorithm: trace.algorithm,
        expected,
        observed,
    })
}

/// One bound checked at every phase or round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub name: String,
    pub checks: usize,
    pub max_observed: f64,
    /// Bound at the tightest check.
    pub bound: f64,
    /// Smallest `bound - observed` over all checks.
    pub margin: f64,
    pub passed: bool,
}

impl Probe {
    fn collect(name: &str, pairs: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut probe = Probe {
            name: name.to_string(),
            checks: 0,
            max_observed: 0.0,
            bound: f64::INFINITY,
            margin: f64::INFINITY,
            passed: true,
        };
        for (observed, bound) in pairs {
            probe.checks += 1;
            probe.max_observed = probe.max_observed.max(observed);
            let margin = bound - observed;
            if margin < probe.margin {
                probe.margin = margin;
                probe.bound = bound;
            }
            probe.passed &= margin >= 0.0;
        }
        probe
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub algorithm: AlgorithmKind,
    pub probes: Vec<Probe>,
}

impl ProbeReport {
    pub fn passed(&self) -> bool {
        self.probes.iter().all(|p| p.passed)
    }
}

/// Consensus deviation bound of the Frank-Wolfe variants:
/// `sqrt(N) r / (K (1 - beta))`.
pub fn fw_deviation_bound(nodes: usize, radius: f64, phases: usize, beta: f64) -> f64 {
    (nodes as f64).sqrt() * radius / (phases as f64 * (1.0 - beta))
}

/// Average-iterate drift and consensus deviation for the Frank-Wolfe
/// variants; projection residual and consensus deviation for DOBGA.
pub fn probe_report(trace: &Trace) -> Result<ProbeReport> {
    let m = &trace.meta;
    let probes = match trace.algorithm {
        AlgorithmKind::MonoDmfw | AlgorithmKind::Dmfw => {
            let k = m.phases.ok_or_else(|| invalid("trace is missing its phase count"))?;
            if trace.phases.is_empty() {
                return Err(invalid("trace has no consensus snapshots"));
            }
            let drift_bound = m.radius / k as f64 + FW_PROBE_TOL;
            let deviation_bound = fw_deviation_bound(m.nodes, m.radius, k, m.beta) + FW_PROBE_TOL;
            vec![
                Probe::collect("average-iterate drift", trace.phases.iter().map(|p| (p.drift, drift_bound))),
                Probe::collect(
                    "consensus deviation",
                    trace.phases.iter().map(|p| (p.deviation, deviation_bound)),
                ),
            ]
        }
        AlgorithmKind::Dobga => {
            if trace.steps.is_empty() {
                return Err(invalid("trace has no step records"));
            }
            let residual = Probe::collect(
                "projection residual",
                trace
                    .steps
                    .iter()
                    .map(|s| (s.residual, s.eta * ONE_MINUS_INV_E * s.g1 + RESIDUAL_PROBE_TOL)),
            );
            // At round t: 2 (1 - 1/e) G1 sqrt(N) sum_{k<t} beta^{t-1-k} eta_k.
            let scale = 2.0 * ONE_MINUS_INV_E * (m.nodes as f64).sqrt();
            let mut weighted = 0.0;
            let mut g1 = 0.0;
            let mut pairs = Vec::with_capacity(trace.steps.len());
            for s in &trace.steps {
                pairs.push((s.deviation, scale * g1 * weighted + DOBGA_DEVIATION_TOL));
                weighted = m.beta * weighted + s.eta;
                g1 = s.g1;
            }
            vec![residual, Probe::collect("consensus deviation", pairs)]
        }
    };
    Ok(ProbeReport {
        algorithm: trace.algorithm,
        probes,
    })
}
