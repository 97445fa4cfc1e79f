//! The constraint set `{x : 0 <= x <= u, sum(x) <= b}`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Budget residual at which the projection bisection stops.
pub const PROJECTION_TOL: f64 = 1e-10;
pub const PROJECTION_MAX_ITERS: usize = 200;
/// Vertex-pair enumeration for the diameter is skipped above this count.
pub const MAX_DIAMETER_VERTICES: usize = 10_000;

/// Operations the online algorithms need from a compact convex set that
/// contains the origin.
pub trait Region {
    fn dim(&self) -> usize;
    fn contains(&self, x: &[f64], tol: f64) -> Result<bool>;
    /// Euclidean projection onto the set.
    fn project(&self, y: &[f64]) -> Result<Vec<f64>>;
    /// A maximizer of `<d, v>` over the set.
    fn lmo(&self, d: &[f64]) -> Vec<f64>;
    fn geometry(&self) -> Geometry;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// `max ||x||` over the set.
    pub radius: f64,
    /// `max ||x - y||` over pairs in the set, or an upper bound on it.
    pub diameter: f64,
    pub diameter_is_bound: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeasibleRegion {
    upper: Vec<f64>,
    budget: f64,
    #[serde(skip)]
    geometry: OnceLock<Geometry>,
}

impl PartialEq for FeasibleRegion {
    fn eq(&self, other: &Self) -> bool {
        self.upper == other.upper && self.budget == other.budget
    }
}

impl FeasibleRegion {
    pub fn new(upper: Vec<f64>, budget: f64) -> Result<Self> {
        if upper.is_empty() {
            return Err(invalid("region dimension must be positive"));
        }
        if let Some(u) = upper.iter().find(|u| !(u.is_finite() && **u > 0.0)) {
            return Err(invalid(format!("coordinate caps must be positive and finite, got {u}")));
        }
        if !(budget.is_finite() && budget > 0.0) {
            return Err(invalid(format!("budget must be positive and finite, got {budget}")));
        }
        Ok(Self {
            upper,
            budget,
            geometry: OnceLock::new(),
        })
    }

    /// Equal caps `cap` on every coordinate.
    pub fn uniform(dim: usize, cap: f64, budget: f64) -> Result<Self> {
        Self::new(vec![cap; dim], budget)
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.upper.len() {
            return Err(invalid(format!(
                "vector has dimension {}, region has {}",
                x.len(),
                self.upper.len()
            )));
        }
        Ok(())
    }

    fn clamped<'a>(&'a self, y: &'a [f64], shift: f64) -> impl Iterator<Item = f64> + 'a {
        self.upper
            .iter()
            .zip(y)
            .map(move |(&u, &yi)| (yi - shift).clamp(0.0, u))
    }

    /// Solve for the multiplier exactly on the active set found at `lambda`,
    /// keeping `lambda` if the solve would change that set.
    fn refine(&self, y: &[f64], lambda: f64) -> f64 {
        let (mut free_sum, mut free, mut capped) = (0.0, 0usize, 0.0);
        for (&u, &yi) in self.upper.iter().zip(y) {
            let v = yi - lambda;
            if v >= u {
                capped += u;
            } else if v > 0.0 {
                free_sum += yi;
                free += 1;
            }
        }
        if free == 0 {
            return lambda;
        }
        let exact = (free_sum + capped - self.budget) / free as f64;
        let same_set = self.upper.iter().zip(y).all(|(&u, &yi)| {
            let (a, b) = (yi - lambda, yi - exact);
            (a >= u) == (b >= u) && (a > 0.0) == (b > 0.0)
        });
        if same_set {
            exact
        } else {
            lambda
        }
    }

    /// Vertices: caps on a subset of coordinates, optionally one more
    /// coordinate filled with the leftover budget. `None` past `limit`.
    fn vertices(&self, limit: usize) -> Option<Vec<Vec<f64>>> {
        let n = self.upper.len();
        let mut out = Vec::new();
        let mut current = vec![0.0; n];
        let ok = self.enumerate(0, 0.0, &mut current, &mut out, limit);
        ok.then_some(out)
    }

    fn enumerate(
        &self,
        from: usize,
        used: f64,
        current: &mut Vec<f64>,
        out: &mut Vec<Vec<f64>>,
        limit: usize,
    ) -> bool {
        out.push(current.clone());
        if out.len() > limit {
            return false;
        }
        let left = self.budget - used;
        for j in from..self.upper.len() {
            let u = self.upper[j];
            if u <= left {
                current[j] = u;
                if !self.enumerate(j + 1, used + u, current, out, limit) {
                    return false;
                }
                current[j] = 0.0;
            }
        }
        // Fractional completions on any coordinate still at zero.
        if left > 0.0 {
            for j in 0..self.upper.len() {
                if current[j] == 0.0 && self.upper[j] > left {
                    let mut v = current.clone();
                    v[j] = left;
                    out.push(v);
                    if out.len() > limit {
                        return false;
                    }
                }
            }
        }
        true
    }
}

impl Region for FeasibleRegion {
    fn dim(&self) -> usize {
        self.upper.len()
    }

    fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        self.check_dim(x)?;
        if x.iter().any(|v| !v.is_finite()) || !(tol >= 0.0) {
            return Err(invalid("membership test needs finite x and tol >= 0"));
        }
        let in_box = x
            .iter()
            .zip(&self.upper)
            .all(|(&xi, &u)| xi >= -tol && xi <= u + tol);
        Ok(in_box && x.iter().sum::<f64>() <= self.budget + tol)
    }

    /// Clamp to the box; if the budget is violated, bisect on the multiplier
    /// `lambda` of `x_i(lambda) = clamp(y_i - lambda, 0, u_i)` until the budget
    /// residual is within [`PROJECTION_TOL`].
    fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(y)?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(invalid("cannot project a non-finite vector"));
        }
        let boxed: Vec<f64> = self.clamped(y, 0.0).collect();
        if boxed.iter().sum::<f64>() <= self.budget {
            return Ok(boxed);
        }
        let mut lo = 0.0;
        let mut hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for _ in 0..PROJECTION_MAX_ITERS {
            let mid = 0.5 * (lo + hi);
            let sum: f64 = self.clamped(y, mid).sum();
            if (sum - self.budget).abs() <= PROJECTION_TOL {
                return Ok(self.clamped(y, self.refine(y, mid)).collect());
            }
            if sum > self.budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // `hi` always keeps the sum within budget.
        Ok(self.clamped(y, hi).collect())
    }

    /// Fill coordinates with positive weight in descending order (ties by
    /// ascending index) until the budget runs out.
    fn lmo(&self, d: &[f64]) -> Vec<f64> {
        let mut order: Vec<usize> = (0..d.len()).filter(|&i| d[i] > 0.0).collect();
        order.sort_by(|&a, &b| d[b].total_cmp(&d[a]).then(a.cmp(&b)));
        let mut v = vec![0.0; self.upper.len()];
        let mut left = self.budget;
        for i in order {
            if left <= 0.0 {
                break;
            }
            v[i] = self.upper[i].min(left);
            left -= v[i];
        }
        v
    }

    /// Computed once and cached; the diameter enumerates vertex pairs.
    fn geometry(&self) -> Geometry {
        *self.geometry.get_or_init(|| self.compute_geometry())
    }
}

impl FeasibleRegion {
    fn compute_geometry(&self) -> Geometry {
        // Farthest point: fill the largest caps first.
        let mut caps = self.upper.clone();
        caps.sort_by(|a, b| b.total_cmp(a));
        let mut left = self.budget;
        let mut radius_sq = 0.0;
        for u in caps {
            let take = u.min(left);
            radius_sq += take * take;
            left -= take;
            if left <= 0.0 {
                break;
            }
        }
        let radius = radius_sq.sqrt();

        match self.vertices(MAX_DIAMETER_VERTICES) {
            Some(vertices) => {
                let mut diam_sq = 0.0_f64;
                for (a, va) in vertices.iter().enumerate() {
                    for vb in &vertices[a + 1..] {
                        let d: f64 = va.iter().zip(vb).map(|(p, q)| (p - q) * (p - q)).sum();
                        diam_sq = diam_sq.max(d);
                    }
                }
                Geometry {
                    radius,
                    diameter: diam_sq.sqrt(),
                    diameter_is_bound: false,
                }
            }
            None => Geometry {
                radius,
                diameter: (2.0 * radius_sq).sqrt(),
                diameter_is_bound: true,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Purpose};
    use crate::vecops::{dist, dot};
    use proptest::prelude::*;
    use rand::Rng;

    fn unit(n: usize, b: f64) -> FeasibleRegion {
        FeasibleRegion::uniform(n, 1.0, b).unwrap()
    }

    fn sample_member(region: &FeasibleRegion, rng: &mut impl Rng) -> Vec<f64> {
        // Uniform in the box, then shrink toward the origin onto the budget.
        let x: Vec<f64> = region
            .upper()
            .iter()
            .map(|&u| rng.random_range(0.0..=u))
            .collect();
        let s: f64 = x.iter().sum();
        if s <= region.budget() {
            x
        } else {
            let f = region.budget() / s * rng.random_range(0.5..=1.0);
            x.iter().map(|v| v * f).collect()
        }
    }

    #[test]
    fn membership() {
        let k = unit(2, 1.0);
        assert!(k.contains(&[0.0, 0.0], 0.0).unwrap());
        assert!(!k.contains(&[1.0, 1.0], 0.0).unwrap());
        assert!(k.contains(&[0.2, 0.3], 0.0).unwrap());
        assert!(k.contains(&[-1e-10, 0.5], 1e-9).unwrap());
        assert!(k.contains(&[0.2], 0.0).is_err());
    }

    #[test]
    fn rejects_degenerate_regions() {
        assert!(FeasibleRegion::new(vec![], 1.0).is_err());
        assert!(FeasibleRegion::new(vec![1.0, 0.0], 1.0).is_err());
        assert!(FeasibleRegion::new(vec![1.0], 0.0).is_err());
        assert!(FeasibleRegion::new(vec![1.0], f64::NAN).is_err());
    }

    #[test]
    fn projection_fixes_members() {
        let k = unit(3, 2.0);
        let y = [0.1, 0.9, 0.7];
        let p = k.project(&y).unwrap();
        assert!(dist(&p, &y) <= 1e-12);
    }

    #[test]
    fn projection_onto_budget_face() {
        let k = unit(2, 1.0);
        let p = k.project(&[1.5, 1.5]).unwrap();
        assert!(dist(&p, &[0.5, 0.5]) <= 1e-9);
        let p = k.project(&[2.0, 0.0]).unwrap();
        assert!(dist(&p, &[1.0, 0.0]) <= 1e-12);
        assert!(k.project(&[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn projection_matches_grid_search() {
        let k = unit(2, 1.0);
        let step = 1e-3;
        for y in [[1.5, 1.5], [0.9, 0.6], [-0.3, 2.0], [1.2, 0.1]] {
            let p = k.project(&y).unwrap();
            let mut best = (f64::INFINITY, [0.0, 0.0]);
            for a in 0..=1000 {
                for b in 0..=(1000 - a) {
                    let z = [a as f64 * step, b as f64 * step];
                    let d = dist(&z, &y);
                    if d < best.0 {
                        best = (d, z);
                    }
                }
            }
            assert!(dist(&p, &best.1) <= 2e-3, "{y:?}: {p:?} vs {:?}", best.1);
        }
    }

    #[test]
    fn lmo_examples() {
        let k = unit(3, 2.0);
        assert_eq!(k.lmo(&[3.0, 1.0, 2.0]), vec![1.0, 0.0, 1.0]);
        assert_eq!(k.lmo(&[-1.0, 0.0, -2.0]), vec![0.0; 3]);
        assert_eq!(unit(2, 1.0).lmo(&[2.0, 2.0]), vec![1.0, 0.0]);
        let frac = FeasibleRegion::uniform(3, 1.0, 1.5).unwrap();
        assert_eq!(frac.lmo(&[1.0, 3.0, 2.0]), vec![0.0, 1.0, 0.5]);
    }

    #[test]
    fn lmo_beats_every_vertex() {
        // Brute force over the enumerated vertices of the polytope.
        let k = FeasibleRegion::new(vec![1.0, 0.5, 2.0, 0.7], 1.8).unwrap();
        let verts = k.vertices(usize::MAX).unwrap();
        let mut rng = rng::stream(5, Purpose::Synthetic, 0);
        for _ in 0..200 {
            let d: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..2.0)).collect();
            let best = verts.iter().map(|v| dot(&d, v)).fold(f64::MIN, f64::max);
            assert!((dot(&d, &k.lmo(&d)) - best).abs() <= 1e-12);
        }
    }

    #[test]
    fn geometry_examples() {
        let g = unit(2, 1.0).geometry();
        assert!((g.radius - 1.0).abs() < 1e-12);
        assert!((g.diameter - 2f64.sqrt()).abs() < 1e-12);
        assert!(!g.diameter_is_bound);

        let g = unit(4, 2.0).geometry();
        assert!((g.radius - 2f64.sqrt()).abs() < 1e-12);
        assert!((g.diameter - 2.0).abs() < 1e-12);

        let g = unit(1, 1.0).geometry();
        assert!((g.radius - 1.0).abs() < 1e-12);
        assert!((g.diameter - 1.0).abs() < 1e-12);
    }

    #[test]
    fn geometry_with_heterogeneous_caps() {
        // Vertices by hand: the farthest point fills cap 3 then 1 of cap 2.
        let k = FeasibleRegion::new(vec![2.0, 3.0, 2.0], 4.0).unwrap();
        let g = k.geometry();
        assert!((g.radius - 10f64.sqrt()).abs() < 1e-12);
        // (0,3,0) vs (2,0,2): 4 + 9 + 4.
        assert!((g.diameter - 17f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn large_regions_fall_back_to_a_bound() {
        let g = unit(200, 10.0).geometry();
        assert!(g.diameter_is_bound);
        assert!((g.radius - 10f64.sqrt()).abs() < 1e-12);
        assert!((g.diameter - 20f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn variational_inequality_sweep() {
        let k = FeasibleRegion::new(vec![1.0, 0.6, 1.0, 0.8, 1.0], 2.2).unwrap();
        let mut rng = rng::stream(17, Purpose::Synthetic, 2);
        let zs: Vec<Vec<f64>> = (0..100).map(|_| sample_member(&k, &mut rng)).collect();
        for _ in 0..300 {
            let y: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..2.5)).collect();
            let p = k.project(&y).unwrap();
            assert!(k.contains(&p, 1e-9).unwrap());
            let r: Vec<f64> = y.iter().zip(&p).map(|(a, b)| a - b).collect();
            for z in &zs {
                let dz: Vec<f64> = z.iter().zip(&p).map(|(a, b)| a - b).collect();
                assert!(dot(&r, &dz) <= 1e-8);
            }
        }
    }

    proptest! {
        #[test]
        fn projection_is_idempotent_and_nonexpansive(
            y1 in proptest::collection::vec(-2.0f64..3.0, 6),
            y2 in proptest::collection::vec(-2.0f64..3.0, 6),
            budget in 0.3f64..4.0,
        ) {
            let k = FeasibleRegion::new(vec![1.0, 0.5, 2.0, 1.0, 0.8, 1.5], budget).unwrap();
            let p1 = k.project(&y1).unwrap();
            let p2 = k.project(&y2).unwrap();
            prop_assert!(dist(&k.project(&p1).unwrap(), &p1) <= 1e-10);
            prop_assert!(dist(&p1, &p2) <= dist(&y1, &y2) + 1e-10);
        }

        #[test]
        fn lmo_dominates_members(
            d in proptest::collection::vec(-1.0f64..1.0, 5),
            seed in any::<u64>(),
        ) {
            let k = FeasibleRegion::uniform(5, 1.0, 2.5).unwrap();
            let best = dot(&d, &k.lmo(&d));
            let mut rng = rng::stream(seed, Purpose::Synthetic, 3);
            for _ in 0..50 {
                let x = sample_member(&k, &mut rng);
                prop_assert!(best >= dot(&d, &x) - 1e-12);
            }
        }
    }
}
