//! No-regret online linear maximization over the feasible region.
//!
//! Projected online gradient ascent with step `c / (G_t sqrt(t))`, where `G_t`
//! is the running maximum payoff norm. With `c = diam(K)` the regret against
//! the best fixed point after `t` rounds is at most `1.5 diam(K) G sqrt(t)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::region::Region;
use crate::vecops::{axpy, norm};

/// Floor on the running payoff-norm maximum.
const NORM_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineLinearOracle {
    point: Vec<f64>,
    rounds: u64,
    scale: f64,
    max_norm: f64,
}

impl OnlineLinearOracle {
    /// Starts at the origin. `scale = None` uses the region's diameter.
    pub fn new(region: &impl Region, scale: Option<f64>) -> Result<Self> {
        let scale = scale.unwrap_or_else(|| region.geometry().diameter);
        if !(scale.is_finite() && scale > 0.0) {
            return Err(invalid(format!("oracle step scale must be positive, got {scale}")));
        }
        Ok(Self {
            point: vec![0.0; region.dim()],
            rounds: 0,
            scale,
            max_norm: NORM_FLOOR,
        })
    }

    pub fn predict(&self) -> &[f64] {
        &self.point
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Receive the linear payoff `<d, .>` for the last prediction.
    pub fn feedback(&mut self, region: &impl Region, d: &[f64]) -> Result<()> {
        if d.len() != self.point.len() || d.iter().any(|v| !v.is_finite()) {
            return Err(invalid("oracle payoff must be finite and match the region dimension"));
        }
        self.rounds += 1;
        self.max_norm = self.max_norm.max(norm(d));
        let eta = self.scale / (self.max_norm * (self.rounds as f64).sqrt());
        let mut y = self.point.clone();
        axpy(eta, d, &mut y);
        self.point = region.project(&y)?;
        Ok(())
    }
}

/// Regret curve of an oracle against the best fixed point in hindsight,
/// found by the region's linear maximization oracle on the cumulative payoff.
/// Entry `t - 1` is the regret after `t` rounds.
pub fn measure_regret(
    region: &impl Region,
    oracle: &mut OnlineLinearOracle,
    payoffs: impl IntoIterator<Item = Vec<f64>>,
) -> Result<Vec<f64>> {
    let mut cumulative = vec![0.0; region.dim()];
    let mut earned = 0.0;
    let mut regret = Vec::new();
    for d in payoffs {
        earned += crate::vecops::dot(&d, oracle.predict());
        oracle.feedback(region, &d)?;
        axpy(1.0, &d, &mut cumulative);
        let best = region.lmo(&cumulative);
        regret.push(crate::vecops::dot(&cumulative, &best) - earned);
    }
    Ok(regret)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::FeasibleRegion;
    use crate::rng::{self, Purpose};
    use rand::Rng;

    fn unit2() -> FeasibleRegion {
        FeasibleRegion::uniform(2, 1.0, 1.0).unwrap()
    }

    #[test]
    fn init_and_first_step() {
        let k = unit2();
        let mut o = OnlineLinearOracle::new(&k, Some(2f64.sqrt())).unwrap();
        assert_eq!(o.predict(), &[0.0, 0.0]);
        assert_eq!(o.rounds(), 0);
        assert_eq!(o, OnlineLinearOracle::new(&k, Some(2f64.sqrt())).unwrap());
        o.feedback(&k, &[1.0, 0.0]).unwrap();
        assert_eq!(o.predict(), &[1.0, 0.0]);
        assert_eq!(o.rounds(), 1);
        assert!(OnlineLinearOracle::new(&k, Some(0.0)).is_err());
    }

    #[test]
    fn default_scale_is_diameter() {
        let k = unit2();
        let o = OnlineLinearOracle::new(&k, None).unwrap();
        assert!((o.scale() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_payoffs_keep_origin() {
        let k = unit2();
        let mut o = OnlineLinearOracle::new(&k, None).unwrap();
        for _ in 0..50 {
            o.feedback(&k, &[0.0, 0.0]).unwrap();
        }
        assert_eq!(o.predict(), &[0.0, 0.0]);
    }

    #[test]
    fn constant_payoff_average_approaches_lmo() {
        let k = unit2();
        let mut o = OnlineLinearOracle::new(&k, None).unwrap();
        let regret = measure_regret(&k, &mut o, (0..200).map(|_| vec![1.0, 0.0])).unwrap();
        let average = (200.0 - regret[199]) / 200.0;
        assert!((average - 1.0).abs() <= 0.15);
    }

    fn within_bound(k: &FeasibleRegion, payoffs: Vec<Vec<f64>>) {
        let g = payoffs.iter().map(|d| norm(d)).fold(0.0, f64::max);
        let diam = k.geometry().diameter;
        let mut o = OnlineLinearOracle::new(k, None).unwrap();
        let regret = measure_regret(k, &mut o, payoffs).unwrap();
        for (t, r) in regret.iter().enumerate() {
            let bound = 1.5 * diam * g * ((t + 1) as f64).sqrt();
            assert!(*r <= bound + 1e-9, "t = {}: {r} > {bound}", t + 1);
        }
    }

    #[test]
    fn regret_bound_on_adversarial_and_random_payoffs() {
        let k = FeasibleRegion::new(vec![1.0, 0.5, 2.0, 1.0], 2.5).unwrap();
        let flip: Vec<Vec<f64>> = (0..10_000)
            .map(|t| if t % 2 == 0 { vec![1.0, 0.0, 0.0, 0.0] } else { vec![-1.0, 0.0, 0.0, 0.0] })
            .collect();
        within_bound(&k, flip);
        let mut rng = rng::stream(5, Purpose::Synthetic, 0);
        let random: Vec<Vec<f64>> = (0..10_000)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        within_bound(&k, random);
    }

    #[test]
    fn alternating_payoffs_stay_below_three_diameters() {
        let k = unit2();
        let diam = k.geometry().diameter;
        let mut o = OnlineLinearOracle::new(&k, None).unwrap();
        let payoffs = (0..10_000).map(|t| vec![if t % 2 == 0 { 1.0 } else { -1.0 }, 0.0]);
        let regret = measure_regret(&k, &mut o, payoffs).unwrap();
        for (t, r) in regret.iter().enumerate() {
            assert!(*r <= 3.0 * diam * ((t + 1) as f64).sqrt());
        }
    }

    #[test]
    fn predictions_stay_feasible() {
        let k = FeasibleRegion::new(vec![0.3, 1.0, 0.7], 1.1).unwrap();
        let mut o = OnlineLinearOracle::new(&k, Some(5.0)).unwrap();
        let mut rng = rng::stream(6, Purpose::Synthetic, 0);
        for _ in 0..500 {
            let d: Vec<f64> = (0..3).map(|_| rng.random_range(-4.0..4.0)).collect();
            o.feedback(&k, &d).unwrap();
            assert!(k.contains(o.predict(), 1e-9).unwrap());
        }
    }
}
