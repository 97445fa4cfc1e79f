//! Facility location over user ratings and its multilinear extension.
//!
//! For one user with ratings sorted descending `r_(1) >= r_(2) >= ...`, the
//! multilinear extension is the expected best rating among independently
//! selected items:
//!
//! ```text
//! f(x) = sum_j r_(j) * x_(j) * prod_{l<j} (1 - x_(l))
//! ```
//!
//! and the partial derivative for the item at sorted position `p` is
//! `prod_{l<p}(1 - x_(l)) * (r_(p) - S_p)`, where `S_p` is the expected best
//! rating among the items after `p`. Both are linear in the number of rated
//! items once the order is known.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

const DOMAIN_TOL: f64 = 1e-9;

/// Ratings of the users held by node `node` at round `round`; one
/// `n`-vector per user, zero where the user did not rate the item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingsBlock {
    pub round: usize,
    pub node: usize,
    pub ratings: Vec<Vec<f64>>,
}

/// `sum_u max_{m in set} r_{u,m}`, with an empty set worth zero.
pub fn facility_set_value(ratings: &[Vec<f64>], set: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for user in ratings {
        let mut best = 0.0_f64;
        for &m in set {
            let r = *user
                .get(m)
                .ok_or_else(|| invalid(format!("item {m} out of range for {} items", user.len())))?;
            best = best.max(r);
        }
        total += best;
    }
    Ok(total)
}

/// Multilinear extension of a facility-location function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacilityLocation {
    dim: usize,
    /// Per user: nonzero `(item, rating)` pairs sorted by rating descending,
    /// ties by ascending item index.
    sorted: Vec<Vec<(usize, f64)>>,
}

impl FacilityLocation {
    pub fn new(ratings: &[Vec<f64>]) -> Result<Self> {
        let dim = ratings
            .first()
            .map(Vec::len)
            .ok_or_else(|| invalid("a ratings block needs at least one user"))?;
        if dim == 0 {
            return Err(invalid("ratings must cover at least one item"));
        }
        let mut sorted = Vec::with_capacity(ratings.len());
        for user in ratings {
            if user.len() != dim {
                return Err(invalid("users rate different numbers of items"));
            }
            if let Some(r) = user.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
                return Err(invalid(format!("ratings must be finite and nonnegative, got {r}")));
            }
            let mut items: Vec<(usize, f64)> = user
                .iter()
                .copied()
                .enumerate()
                .filter(|&(_, r)| r > 0.0)
                .collect();
            items.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            sorted.push(items);
        }
        Ok(Self { dim, sorted })
    }

    pub fn from_block(block: &RatingsBlock) -> Result<Self> {
        Self::new(&block.ratings)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn user_count(&self) -> usize {
        self.sorted.len()
    }

    /// `sum_u max_m r_{u,m}`: bounds every gradient coordinate sum, hence
    /// the gradient norm.
    pub fn rating_mass(&self) -> f64 {
        self.sorted
            .iter()
            .map(|items| items.first().map_or(0.0, |&(_, r)| r))
            .sum()
    }

    /// `sum_u ||r_u||`: each user's gradient is dominated coordinate-wise by
    /// its rating vector.
    pub fn user_norm_sum(&self) -> f64 {
        self.sorted
            .iter()
            .map(|items| items.iter().map(|(_, r)| r * r).sum::<f64>().sqrt())
            .sum()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(invalid(format!(
                "point has dimension {}, objective has {}",
                x.len(),
                self.dim
            )));
        }
        if x
            .iter()
            .any(|v| !(v.is_finite() && *v >= -DOMAIN_TOL && *v <= 1.0 + DOMAIN_TOL))
        {
            return Err(invalid("multilinear extension is defined on [0, 1]^n"));
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let mut total = 0.0;
        for items in &self.sorted {
            let mut none_before = 1.0;
            for &(m, r) in items {
                let p = x[m].clamp(0.0, 1.0);
                total += r * p * none_before;
                none_before *= 1.0 - p;
            }
        }
        Ok(total)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut grad = vec![0.0; self.dim];
        let mut prefix = Vec::new();
        for items in &self.sorted {
            prefix.clear();
            let mut none_before = 1.0;
            for &(m, _) in items {
                prefix.push(none_before);
                none_before *= 1.0 - x[m].clamp(0.0, 1.0);
            }
            // Walk backwards carrying the expected best rating after position p.
            let mut after = 0.0;
            for (p, &(m, r)) in items.iter().enumerate().rev() {
                grad[m] += prefix[p] * (r - after);
                let q = x[m].clamp(0.0, 1.0);
                after = r * q + (1.0 - q) * after;
            }
        }
        Ok(grad)
    }
}
