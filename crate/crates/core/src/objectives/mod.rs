//! Monotone continuous DR-submodular local objectives `f_{t,i}`.

mod facility;
mod quadratic;

pub use facility::{facility_set_value, FacilityLocation, RatingsBlock};
pub use quadratic::{QuadraticObjective, MONOTONE_MARGIN};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{self, Purpose};

/// A differentiable objective on a box containing the origin.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
}

impl Objective for FacilityLocation {
    fn dim(&self) -> usize {
        FacilityLocation::dim(self)
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        FacilityLocation::value(self, x)
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        FacilityLocation::gradient(self, x)
    }
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        QuadraticObjective::dim(self)
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        QuadraticObjective::value(self, x)
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        QuadraticObjective::gradient(self, x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalObjective {
    Facility(FacilityLocation),
    Quadratic(QuadraticObjective),
}

impl LocalObjective {
    /// Certified bound on `||grad f||` over the unit box.
    pub fn gradient_bound(&self) -> f64 {
        match self {
            // Sum of the users' rating-vector norms.
            LocalObjective::Facility(f) => f.user_norm_sum(),
            LocalObjective::Quadratic(q) => q.gradient_bound(),
        }
    }

    /// Bound on the gradient Lipschitz constant.
    pub fn smoothness(&self) -> f64 {
        match self {
            // Top rating per user, Gershgorin over n columns.
            LocalObjective::Facility(f) => f.rating_mass() * f.dim() as f64,
            LocalObjective::Quadratic(q) => q.smoothness(),
        }
    }
}

impl Objective for LocalObjective {
    fn dim(&self) -> usize {
        match self {
            LocalObjective::Facility(f) => f.dim(),
            LocalObjective::Quadratic(q) => q.dim(),
        }
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        match self {
            LocalObjective::Facility(f) => f.value(x),
            LocalObjective::Quadratic(q) => q.value(x),
        }
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            LocalObjective::Facility(f) => f.gradient(x),
            LocalObjective::Quadratic(q) => q.gradient(x),
        }
    }
}

/// The `T x N` grid of local objectives plus the gradient noise level.
///
/// Values are reported relative to `f_{t,i}(0)`, so every local function is
/// zero at the origin whatever the underlying family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveStream {
    rounds: usize,
    nodes: usize,
    dim: usize,
    /// Round-major: cell `(t, i)` sits at `t * nodes + i`.
    cells: Vec<LocalObjective>,
    offsets: Vec<f64>,
    sigma: f64,
    smoothness: f64,
    gradient_bound: f64,
}

impl ObjectiveStream {
    /// `cells[t][i]` is the objective of node `i` at round `t` (0-based).
    pub fn new(cells: Vec<Vec<LocalObjective>>, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(invalid(format!("noise level must be >= 0, got {sigma}")));
        }
        let rounds = cells.len();
        let nodes = cells.first().map_or(0, Vec::len);
        if rounds == 0 || nodes == 0 {
            return Err(invalid("objective stream needs at least one round and one node"));
        }
        if cells.iter().any(|r| r.len() != nodes) {
            return Err(invalid("every round needs one objective per node"));
        }
        let cells: Vec<LocalObjective> = cells.into_iter().flatten().collect();
        let dim = cells[0].dim();
        if cells.iter().any(|c| c.dim() != dim) {
            return Err(invalid("local objectives have different dimensions"));
        }
        let zero = vec![0.0; dim];
        let offsets = cells
            .iter()
            .map(|c| c.value(&zero))
            .collect::<Result<Vec<_>>>()?;
        let smoothness = cells.iter().map(LocalObjective::smoothness).fold(0.0, f64::max);
        let gradient_bound = cells
            .iter()
            .map(LocalObjective::gradient_bound)
            .fold(0.0, f64::max);
        Ok(Self {
            rounds,
            nodes,
            dim,
            cells,
            offsets,
            sigma,
            smoothness,
            gradient_bound,
        })
    }

    /// Facility-location stream from `ratings[t][i]` = user rating vectors
    /// held by node `i` at round `t`.
    pub fn facility(ratings: &[Vec<Vec<Vec<f64>>>], sigma: f64) -> Result<Self> {
        let cells = ratings
            .iter()
            .map(|round| {
                round
                    .iter()
                    .map(|users| FacilityLocation::new(users).map(LocalObjective::Facility))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(cells, sigma)
    }

    /// Independent random quadratics per cell, seeded.
    pub fn random_quadratic(
        rounds: usize,
        nodes: usize,
        dim: usize,
        scale: f64,
        sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = rng::stream(seed, Purpose::Objective, 0);
        let cells = (0..rounds)
            .map(|_| {
                (0..nodes)
                    .map(|_| QuadraticObjective::random(dim, scale, &mut rng).map(LocalObjective::Quadratic))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(cells, sigma)
    }

    /// The same objective at every `(t, i)`.
    pub fn constant(objective: LocalObjective, rounds: usize, nodes: usize, sigma: f64) -> Result<Self> {
        Self::new(vec![vec![objective; nodes]; rounds], sigma)
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn gradient_bound(&self) -> f64 {
        self.gradient_bound
    }

    fn index(&self, round: usize, node: usize) -> Result<usize> {
        if round >= self.rounds || node >= self.nodes {
            return Err(invalid(format!(
                "cell ({round}, {node}) outside a {}x{} stream",
                self.rounds, self.nodes
            )));
        }
        Ok(round * self.nodes + node)
    }

    pub fn cell(&self, round: usize, node: usize) -> Result<&LocalObjective> {
        Ok(&self.cells[self.index(round, node)?])
    }

    /// `f_{t,i}(x) - f_{t,i}(0)`
    pub fn value(&self, round: usize, node: usize, x: &[f64]) -> Result<f64> {
        let k = self.index(round, node)?;
        Ok(self.cells[k].value(x)? - self.offsets[k])
    }

    pub fn gradient(&self, round: usize, node: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.cells[self.index(round, node)?].gradient(x)
    }

    /// `sum_i f_{t,i}(x)` for one round.
    pub fn round_value(&self, round: usize, x: &[f64]) -> Result<f64> {
        (0..self.nodes).map(|i| self.value(round, i, x)).sum()
    }

    /// `Phi(x) = (1 / NT) sum_{t,i} f_{t,i}(x)`
    pub fn average_value(&self, x: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for t in 0..self.rounds {
            total += self.round_value(t, x)?;
        }
        Ok(total / (self.rounds * self.nodes) as f64)
    }

    pub fn average_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut total = vec![0.0; self.dim];
        for cell in &self.cells {
            crate::vecops::axpy(1.0, &cell.gradient(x)?, &mut total);
        }
        let count = self.cells.len() as f64;
        total.iter_mut().for_each(|g| *g /= count);
        Ok(total)
    }

    /// Numeric spot-check of monotonicity and gradient antitonicity at a few
    /// random ordered pairs per cell; `Err` names the first failing cell.
    pub fn check_dr_monotone(&self, upper: &[f64], pairs: usize, seed: u64) -> Result<()> {
        let mut rng = rng::stream(seed, Purpose::Objective, 1);
        for (k, cell) in self.cells.iter().enumerate() {
            for _ in 0..pairs {
                let (lo, hi) = ordered_pair(upper, &mut rng);
                let (glo, ghi) = (cell.gradient(&lo)?, cell.gradient(&hi)?);
                let mono = cell.value(&lo)? <= cell.value(&hi)? + 1e-10;
                let anti = glo.iter().zip(&ghi).all(|(a, b)| *a >= b - 1e-8);
                let nonneg = ghi.iter().all(|g| *g >= -1e-9);
                if !(mono && anti && nonneg) {
                    return Err(Error::AssumptionViolated(format!(
                        "objective at round {}, node {} is not monotone DR-submodular",
                        k / self.nodes,
                        k % self.nodes
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Random `lo <= hi` inside the box `[0, upper]`.
pub(crate) fn ordered_pair(upper: &[f64], rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>) {
    let hi: Vec<f64> = upper.iter().map(|&u| rng.random_range(0.0..=u)).collect();
    let lo: Vec<f64> = hi.iter().map(|&h| rng.random_range(0.0..=h)).collect();
    (lo, hi)
}

/// Unbiased gradient oracle: exact gradient plus `sigma` times a standard
/// normal vector. Owns one node's random stream and counts its queries.
#[derive(Debug, Clone)]
pub struct NoisyGradient {
    sigma: f64,
    rng: ChaCha8Rng,
    queries: u64,
}

impl NoisyGradient {
    pub fn new(sigma: f64, rng: ChaCha8Rng) -> Self {
        Self {
            sigma,
            rng,
            queries: 0,
        }
    }

    /// The oracle for node `node` under master seed `seed`.
    pub fn for_node(sigma: f64, seed: u64, node: usize) -> Self {
        Self::new(sigma, rng::stream(seed, Purpose::GradientNoise, node as u64))
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }

    pub fn query(&mut self, f: &(impl Objective + ?Sized), x: &[f64]) -> Result<Vec<f64>> {
        let mut g = f.gradient(x)?;
        self.queries += 1;
        if self.sigma > 0.0 {
            for gi in &mut g {
                let z: f64 = self.rng.sample(StandardNormal);
                *gi += self.sigma * z;
            }
        }
        Ok(g)
    }
}
