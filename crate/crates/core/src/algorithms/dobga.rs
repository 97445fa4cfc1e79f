//! Decentralized online boosting gradient ascent.
//!
//! Each round every node plays `x_i(t)`, draws boosted gradient samples at
//! its own action, averages its neighbors' actions and takes a projected
//! step: `x_i(t+1) = P_K(sum_j a_ij x_j(t) + eta_t g_i)`.

use super::{base_meta, validate_inputs, AlgorithmKind, Counters, DobgaConfig, StepRecord, Trace};
use crate::boosting::{boosted_gradient, ZSampler, ONE_MINUS_INV_E};
use crate::error::{invalid, Result};
use crate::network::WeightMatrix;
use crate::objectives::{NoisyGradient, ObjectiveStream};
use crate::region::{FeasibleRegion, Region};
use crate::vecops::{axpy, consensus_deviation, dist, norm};

pub fn run_dobga(
    stream: &ObjectiveStream,
    weights: &WeightMatrix,
    region: &FeasibleRegion,
    cfg: &DobgaConfig,
    seed: u64,
) -> Result<Trace> {
    let geometry = validate_inputs(stream, weights, region, seed)?;
    let (nodes, rounds, dim) = (stream.nodes(), stream.rounds(), stream.dim());
    if cfg.grad_samples == 0 {
        return Err(invalid("grad_samples must be at least 1"));
    }
    cfg.step.validate(rounds)?;
    let start = match &cfg.initial_point {
        Some(x) if !region.contains(x, 1e-9)? => {
            return Err(invalid("initial point lies outside the feasible region"))
        }
        Some(x) => x.clone(),
        None => vec![0.0; dim],
    };

    let mut noise: Vec<NoisyGradient> = (0..nodes)
        .map(|i| NoisyGradient::for_node(stream.sigma(), seed, i))
        .collect();
    let mut samplers: Vec<ZSampler> = (0..nodes).map(|i| ZSampler::for_node(seed, i)).collect();
    let mut counters = Counters::new(rounds, nodes);
    let mut actions = Vec::with_capacity(rounds);
    let mut rewards = Vec::with_capacity(rounds);
    let mut steps = Vec::with_capacity(rounds);

    let mut x = vec![start; nodes];
    let mut y = vec![vec![0.0; dim]; nodes];
    let mut g1 = 0.0_f64;
    let inv_samples = 1.0 / cfg.grad_samples as f64;

    for t in 0..rounds {
        let eta = cfg.step.eta(t + 1)?;
        rewards.push(
            (0..nodes)
                .map(|i| stream.value(t, i, &x[i]))
                .collect::<Result<Vec<_>>>()?,
        );
        let deviation = consensus_deviation(&x);

        weights.mix_into(&x, &mut y)?;
        for i in 0..nodes {
            let f = stream.cell(t, i)?;
            let before = noise[i].queries();
            for _ in 0..cfg.grad_samples {
                let est = boosted_gradient(f, &x[i], &mut noise[i], &mut samplers[i])?;
                g1 = g1.max(norm(&est) / ONE_MINUS_INV_E);
                axpy(eta * inv_samples, &est, &mut y[i]);
            }
            counters.grad(t, i, noise[i].queries() - before);
            counters.exchange(t, i);
        }

        let next = y.iter().map(|yi| region.project(yi)).collect::<Result<Vec<_>>>()?;
        let residual = next.iter().zip(&y).map(|(a, b)| dist(a, b)).fold(0.0, f64::max);
        steps.push(StepRecord {
            round: t + 1,
            eta,
            residual,
            g1,
            deviation,
        });
        actions.push(std::mem::replace(&mut x, next));
    }

    let (grad_queries, exchanges) = counters.cumulative();
    let mut meta = base_meta(stream, weights, &geometry, seed);
    meta.grad_samples = cfg.grad_samples;
    meta.bytes_per_round = (dim * 8) as u64;
    Ok(Trace {
        algorithm: AlgorithmKind::Dobga,
        actions,
        rewards,
        grad_queries,
        exchanges,
        phases: Vec::new(),
        steps,
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::super::StepRule;
    use super::*;
    use crate::network::Graph;
    use crate::objectives::{LocalObjective, QuadraticObjective};
    use crate::vecops::dot;

    fn linear(h: Vec<f64>) -> LocalObjective {
        let n = h.len();
        LocalObjective::Quadratic(
            QuadraticObjective::new(vec![vec![0.0; n]; n], Some(h), vec![1.0; n]).unwrap(),
        )
    }

    #[test]
    fn single_node_linear_converges_to_lmo() {
        let h = vec![0.5, 2.0, 1.0, 0.1];
        let k = FeasibleRegion::uniform(4, 1.0, 2.0).unwrap();
        let s = ObjectiveStream::constant(linear(h.clone()), 10_000, 1, 0.0).unwrap();
        let w = WeightMatrix::from_rows(&[vec![1.0]]).unwrap();
        let tr = run_dobga(&s, &w, &k, &DobgaConfig::default(), 0).unwrap();
        let target = dot(&h, &k.lmo(&h));
        let values: Vec<f64> = tr.actions.iter().map(|a| dot(&h, &a[0])).collect();
        assert!((values[9_999] - target).abs() <= 1e-3);
        for pair in values[3..].windows(2) {
            assert!(pair[1] >= pair[0] - 1e-9);
        }
    }

    #[test]
    fn symmetric_start_stays_symmetric() {
        let s = ObjectiveStream::constant(linear(vec![1.0, 0.5, 0.2]), 20, 3, 0.0).unwrap();
        let w = WeightMatrix::metropolis(&Graph::cycle(3).unwrap()).unwrap();
        let k = FeasibleRegion::uniform(3, 1.0, 1.5).unwrap();
        let tr = run_dobga(&s, &w, &k, &DobgaConfig::default(), 4).unwrap();
        for round in &tr.actions {
            assert!(round.iter().all(|x| x == &round[0]));
        }
    }

    #[test]
    fn residual_probe_and_counters() {
        let s = ObjectiveStream::random_quadratic(30, 4, 3, 0.5, 0.5, 2).unwrap();
        let w = WeightMatrix::metropolis(&Graph::cycle(4).unwrap()).unwrap();
        let k = FeasibleRegion::uniform(3, 1.0, 1.0).unwrap();
        let cfg = DobgaConfig {
            grad_samples: 3,
            ..DobgaConfig::default()
        };
        let tr = run_dobga(&s, &w, &k, &cfg, 8).unwrap();
        for st in &tr.steps {
            assert!(st.residual <= st.eta * ONE_MINUS_INV_E * st.g1 + 1e-9);
        }
        assert_eq!(tr.grad_queries[29], vec![90; 4]);
        assert_eq!(tr.exchanges[29], vec![30; 4]);
        for round in &tr.actions {
            for x in round {
                assert!(k.contains(x, 1e-9).unwrap());
            }
        }
    }

    #[test]
    fn rejects_increasing_steps_and_bad_start() {
        let s = ObjectiveStream::random_quadratic(3, 2, 2, 0.5, 0.0, 2).unwrap();
        let w = WeightMatrix::metropolis(&Graph::complete(2).unwrap()).unwrap();
        let k = FeasibleRegion::uniform(2, 1.0, 1.0).unwrap();
        let up = DobgaConfig {
            step: StepRule::Custom(vec![0.1, 0.2, 0.3]),
            ..DobgaConfig::default()
        };
        assert!(run_dobga(&s, &w, &k, &up, 0).is_err());
        let short = DobgaConfig {
            step: StepRule::Custom(vec![0.1]),
            ..DobgaConfig::default()
        };
        assert!(run_dobga(&s, &w, &k, &short, 0).is_err());
        let outside = DobgaConfig {
            initial_point: Some(vec![1.0, 1.0]),
            ..DobgaConfig::default()
        };
        assert!(run_dobga(&s, &w, &k, &outside, 0).is_err());
    }

    #[test]
    fn deterministic() {
        let s = ObjectiveStream::random_quadratic(10, 3, 3, 0.5, 0.3, 2).unwrap();
        let w = WeightMatrix::metropolis(&Graph::complete(3).unwrap()).unwrap();
        let k = FeasibleRegion::uniform(3, 1.0, 1.0).unwrap();
        let cfg = DobgaConfig::default();
        assert_eq!(run_dobga(&s, &w, &k, &cfg, 1).unwrap(), run_dobga(&s, &w, &k, &cfg, 1).unwrap());
    }
}
