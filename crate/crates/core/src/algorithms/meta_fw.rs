//! Decentralized meta Frank-Wolfe: Mono-DMFW and the DMFW baseline.
//!
//! Both run blocks of `K` phases. In each block every node builds phase
//! points `x^{(k)} = sum_j a_ij x_j^{(k-1)} + v^{(k)} / K` from `x^{(0)} = 0`,
//! plays `x^{(K)}`, then replays the phase points to feed gradient-tracked,
//! consensus-mixed directions back into one online linear oracle per phase.
//! Mono-DMFW spreads the `K` gradient queries of a block over its `K` rounds
//! through a random permutation; DMFW spends all `K` on a single round.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::{
    base_meta, mono_dmfw_eta, validate_inputs, AlgorithmKind, Counters, DmfwConfig,
    MonoDmfwConfig, PhaseRecord, Trace,
};
use crate::error::{invalid, Result};
use crate::network::WeightMatrix;
use crate::objectives::{NoisyGradient, ObjectiveStream};
use crate::oracle::OnlineLinearOracle;
use crate::region::FeasibleRegion;
use crate::rng::{self, Purpose};
use crate::vecops::{consensus_deviation, dist, row_mean};

/// Payload of one exchange: the phase point and the tracked direction.
const VECTORS_PER_EXCHANGE: usize = 2;

struct Plan<'a> {
    kind: AlgorithmKind,
    phases: usize,
    /// Rounds covered by one block: `K` for Mono-DMFW, 1 for DMFW.
    block_len: usize,
    gamma: f64,
    eta: &'a dyn Fn(usize) -> Result<f64>,
    oracle_scale: Option<f64>,
}

/// Mono-DMFW: blocked phases with the phase-dependent tracking step of
/// [`mono_dmfw_eta`].
pub fn run_mono_dmfw(
    stream: &ObjectiveStream,
    weights: &WeightMatrix,
    region: &FeasibleRegion,
    cfg: &MonoDmfwConfig,
    seed: u64,
) -> Result<Trace> {
    cfg.validate()?;
    if cfg.rounds() != stream.rounds() {
        return Err(invalid(format!(
            "K * Q = {} * {} does not match the horizon T = {}",
            cfg.phases,
            cfg.blocks,
            stream.rounds()
        )));
    }
    let eta = |k| mono_dmfw_eta(k, cfg.phases);
    let plan = Plan {
        kind: AlgorithmKind::MonoDmfw,
        phases: cfg.phases,
        block_len: cfg.phases,
        gamma: cfg.gamma,
        eta: &eta,
        oracle_scale: cfg.oracle_scale,
    };
    run(stream, weights, region, &plan, seed)
}

/// The DMFW baseline: `K` phases on every round with constant steps.
pub fn run_dmfw(
    stream: &ObjectiveStream,
    weights: &WeightMatrix,
    region: &FeasibleRegion,
    cfg: &DmfwConfig,
    seed: u64,
) -> Result<Trace> {
    cfg.validate()?;
    let eta = |_| Ok(cfg.eta);
    let plan = Plan {
        kind: AlgorithmKind::Dmfw,
        phases: cfg.phases,
        block_len: 1,
        gamma: cfg.gamma,
        eta: &eta,
        oracle_scale: cfg.oracle_scale,
    };
    run(stream, weights, region, &plan, seed)
}

fn run(
    stream: &ObjectiveStream,
    weights: &WeightMatrix,
    region: &FeasibleRegion,
    plan: &Plan<'_>,
    seed: u64,
) -> Result<Trace> {
    let geometry = validate_inputs(stream, weights, region, seed)?;
    let (nodes, rounds, dim) = (stream.nodes(), stream.rounds(), stream.dim());
    let big_k = plan.phases;
    let blocks = rounds / plan.block_len;

    let etas: Vec<f64> = (1..=big_k).map(plan.eta).collect::<Result<_>>()?;
    let proto = OnlineLinearOracle::new(region, Some(plan.oracle_scale.unwrap_or(geometry.diameter)))?;
    let oracle_scale = proto.scale();
    // oracles[i][k - 1] is node i's oracle for phase k; they persist across blocks.
    let mut oracles = vec![vec![proto; big_k]; nodes];
    let mut noise: Vec<NoisyGradient> = (0..nodes)
        .map(|i| NoisyGradient::for_node(stream.sigma(), seed, i))
        .collect();
    let mut shufflers: Vec<ChaCha8Rng> = (0..nodes)
        .map(|i| rng::stream(seed, Purpose::Permutation, i as u64))
        .collect();

    let mut counters = Counters::new(rounds, nodes);
    let mut actions = Vec::with_capacity(rounds);
    let mut rewards = Vec::with_capacity(rounds);
    let mut phase_log = Vec::with_capacity(blocks * big_k);

    // points[k] holds every node's x^{(k)} for the current block.
    let mut points = vec![vec![vec![0.0; dim]; nodes]; big_k + 1];
    let mut mixed = vec![vec![0.0; dim]; nodes];
    let mut g = vec![vec![0.0; dim]; nodes];
    let mut d = vec![vec![0.0; dim]; nodes];
    let inv_k = 1.0 / big_k as f64;

    for q in 0..blocks {
        let start = q * plan.block_len;
        let exchange_round = |k: usize| start + (k - 1) * plan.block_len / big_k;

        let mut prev_mean = vec![0.0; dim];
        for k in 1..=big_k {
            let (before, after) = points.split_at_mut(k);
            weights.mix_into(&before[k - 1], &mut after[0])?;
            for (i, x) in after[0].iter_mut().enumerate() {
                let v = oracles[i][k - 1].predict();
                x.iter_mut().zip(v).for_each(|(xi, vi)| *xi += vi * inv_k);
                counters.exchange(exchange_round(k), i);
            }
            let mean = row_mean(&after[0]);
            phase_log.push(PhaseRecord {
                block: q + 1,
                phase: k,
                drift: dist(&mean, &prev_mean),
                deviation: consensus_deviation(&after[0]),
                mean: mean.clone(),
            });
            prev_mean = mean;
        }

        let played = &points[big_k];
        for t in start..start + plan.block_len {
            let reward = (0..nodes)
                .map(|i| stream.value(t, i, &played[i]))
                .collect::<Result<Vec<_>>>()?;
            actions.push(played.clone());
            rewards.push(reward);
        }

        // Round offset within the block queried at each phase, per node.
        let offsets: Vec<Vec<usize>> = shufflers
            .iter_mut()
            .map(|r| {
                if plan.block_len == 1 {
                    vec![0; big_k]
                } else {
                    let mut order: Vec<usize> = (0..plan.block_len).collect();
                    order.shuffle(r);
                    order
                }
            })
            .collect();

        g.iter_mut().for_each(|row| row.fill(0.0));
        d.iter_mut().for_each(|row| row.fill(0.0));
        for k in 1..=big_k {
            let eta = etas[k - 1];
            for i in 0..nodes {
                let t = start + offsets[i][k - 1];
                let before = noise[i].queries();
                let grad = noise[i].query(stream.cell(t, i)?, &points[k][i])?;
                counters.grad(t, i, noise[i].queries() - before);
                g[i].iter_mut()
                    .zip(&grad)
                    .for_each(|(gi, v)| *gi = (1.0 - eta) * *gi + eta * v);
            }
            weights.mix_into(&d, &mut mixed)?;
            for i in 0..nodes {
                d[i].iter_mut()
                    .zip(&mixed[i])
                    .zip(&g[i])
                    .for_each(|((di, m), gi)| *di = (1.0 - plan.gamma) * m + plan.gamma * gi);
                oracles[i][k - 1].feedback(region, &d[i])?;
            }
        }
    }

    let (grad_queries, exchanges) = counters.cumulative();
    let mut meta = base_meta(stream, weights, &geometry, seed);
    meta.oracle_scale = Some(oracle_scale);
    meta.phases = Some(big_k);
    meta.gamma = Some(plan.gamma);
    meta.vectors_per_exchange = VECTORS_PER_EXCHANGE;
    let exchanges_per_round = (big_k / plan.block_len) as u64;
    meta.bytes_per_round = exchanges_per_round * (VECTORS_PER_EXCHANGE * dim * 8) as u64;
    Ok(Trace {
        algorithm: plan.kind,
        actions,
        rewards,
        grad_queries,
        exchanges,
        phases: phase_log,
        steps: Vec::new(),
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Graph, WeightMatrix};
    use crate::objectives::{LocalObjective, QuadraticObjective};
    use crate::region::Region;

    fn quadratic_stream(rounds: usize, nodes: usize, sigma: f64) -> ObjectiveStream {
        ObjectiveStream::random_quadratic(rounds, nodes, 4, 0.5, sigma, 11).unwrap()
    }

    fn region4() -> FeasibleRegion {
        FeasibleRegion::uniform(4, 1.0, 2.0).unwrap()
    }

    #[test]
    fn single_node_single_round_plays_origin() {
        let s = quadratic_stream(1, 1, 0.0);
        let w = WeightMatrix::from_rows(&[vec![1.0]]).unwrap();
        let cfg = MonoDmfwConfig::new(1, 1, 1.0).unwrap();
        let tr = run_mono_dmfw(&s, &w, &region4(), &cfg, 0).unwrap();
        assert_eq!(tr.actions[0][0], vec![0.0; 4]);
        assert_eq!(tr.rewards[0][0], 0.0);
    }

    #[test]
    fn horizon_must_factor() {
        let s = quadratic_stream(8, 2, 0.0);
        let w = WeightMatrix::metropolis(&Graph::complete(2).unwrap()).unwrap();
        let cfg = MonoDmfwConfig::new(3, 2, 0.5).unwrap();
        assert!(run_mono_dmfw(&s, &w, &region4(), &cfg, 0).is_err());
    }

    #[test]
    fn identical_objectives_give_identical_nodes() {
        let q = QuadraticObjective::random(4, 0.5, &mut rng::stream(3, Purpose::Objective, 0)).unwrap();
        let s = ObjectiveStream::constant(LocalObjective::Quadratic(q), 16, 4, 0.0).unwrap();
        let w = WeightMatrix::metropolis(&Graph::cycle(4).unwrap()).unwrap();
        let tr = run_mono_dmfw(&s, &w, &region4(), &MonoDmfwConfig::new(4, 4, 0.5).unwrap(), 2).unwrap();
        for round in &tr.actions {
            for x in round {
                assert_eq!(x, &round[0]);
            }
        }
        let tr = run_dmfw(&s, &w, &region4(), &DmfwConfig::with_phases(6).unwrap(), 2).unwrap();
        for round in &tr.actions {
            assert!(round.iter().all(|x| x == &round[0]));
        }
    }

    #[test]
    fn actions_are_feasible_and_counters_exact() {
        let s = quadratic_stream(16, 3, 0.2);
        let k = region4();
        let w = WeightMatrix::metropolis(&Graph::cycle(3).unwrap()).unwrap();
        let tr = run_mono_dmfw(&s, &w, &k, &MonoDmfwConfig::new(4, 4, 0.5).unwrap(), 5).unwrap();
        for round in &tr.actions {
            for x in round {
                assert!(k.contains(x, 1e-9).unwrap());
            }
        }
        for (t, row) in tr.grad_queries.iter().enumerate() {
            assert!(row.iter().all(|c| *c == (t + 1) as u64));
        }
        for (t, row) in tr.exchanges.iter().enumerate() {
            assert!(row.iter().all(|c| *c == (t + 1) as u64));
        }

        let tr = run_dmfw(&s, &w, &k, &DmfwConfig::with_phases(5).unwrap(), 5).unwrap();
        assert_eq!(tr.grad_queries[15], vec![80; 3]);
        assert_eq!(tr.exchanges[15], vec![80; 3]);
        assert_eq!(tr.meta.bytes_per_round, 5 * 2 * 4 * 8);
    }

    #[test]
    fn dmfw_single_phase_first_action_is_origin() {
        let s = quadratic_stream(3, 2, 0.0);
        let w = WeightMatrix::metropolis(&Graph::complete(2).unwrap()).unwrap();
        let tr = run_dmfw(&s, &w, &region4(), &DmfwConfig::with_phases(1).unwrap(), 0).unwrap();
        assert_eq!(tr.actions[0], vec![vec![0.0; 4]; 2]);
        assert!(tr.actions[1][0].iter().any(|v| *v > 0.0));
    }

    #[test]
    fn drift_and_deviation_within_appendix_bounds() {
        let s = quadratic_stream(16, 4, 0.3);
        let k = region4();
        let geo = k.geometry();
        let w = WeightMatrix::metropolis(&Graph::cycle(4).unwrap()).unwrap();
        let tr = run_mono_dmfw(&s, &w, &k, &MonoDmfwConfig::new(4, 4, 0.5).unwrap(), 1).unwrap();
        let big_k = 4.0;
        for p in &tr.phases {
            assert!(p.drift <= geo.radius / big_k + 1e-9);
            assert!(p.deviation <= 2.0 * geo.radius / (big_k * (1.0 - w.beta())) + 1e-9);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let s = quadratic_stream(8, 3, 0.5);
        let w = WeightMatrix::metropolis(&Graph::cycle(3).unwrap()).unwrap();
        let cfg = MonoDmfwConfig::new(4, 2, 0.7).unwrap();
        let a = run_mono_dmfw(&s, &w, &region4(), &cfg, 9).unwrap();
        let b = run_mono_dmfw(&s, &w, &region4(), &cfg, 9).unwrap();
        assert_eq!(a, b);
        let c = run_mono_dmfw(&s, &w, &region4(), &cfg, 10).unwrap();
        assert_ne!(a.actions, c.actions);
    }
}
