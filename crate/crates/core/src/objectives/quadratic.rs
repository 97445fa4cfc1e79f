//! `f(x) = <h, x> + x^T H x / 2` with `H <= 0` entrywise, monotone on a box.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Added to the auto-completed linear term so the gradient stays strictly
/// positive on the whole box.
pub const MONOTONE_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticObjective {
    /// Row-major symmetric `n x n` matrix, all entries `<= 0`.
    hessian: Vec<f64>,
    linear: Vec<f64>,
    upper: Vec<f64>,
}

impl QuadraticObjective {
    /// `linear = None` fills `h_i = sum_j |H_ij| u_j + 0.1`. A supplied `h`
    /// must satisfy `h + H u >= 0`, i.e. the gradient is nonnegative at the
    /// far corner of the box and hence everywhere on it.
    pub fn new(hessian: Vec<Vec<f64>>, linear: Option<Vec<f64>>, upper: Vec<f64>) -> Result<Self> {
        let n = hessian.len();
        if n == 0 || hessian.iter().any(|r| r.len() != n) {
            return Err(invalid("hessian must be a nonempty square matrix"));
        }
        if upper.len() != n || upper.iter().any(|u| !(u.is_finite() && *u > 0.0)) {
            return Err(invalid("box caps must be positive and match the hessian size"));
        }
        for i in 0..n {
            for j in 0..n {
                let v = hessian[i][j];
                if !v.is_finite() || v > 0.0 {
                    return Err(invalid(format!(
                        "hessian entry ({i}, {j}) = {v} breaks DR-submodularity"
                    )));
                }
                if v != hessian[j][i] {
                    return Err(invalid("hessian must be symmetric"));
                }
            }
        }
        let hu: Vec<f64> = hessian
            .iter()
            .map(|row| row.iter().zip(&upper).map(|(a, u)| a * u).sum())
            .collect();
        let linear = match linear {
            Some(h) => {
                if h.len() != n {
                    return Err(invalid("linear term has the wrong dimension"));
                }
                if let Some(i) = (0..n).find(|&i| !(h[i] + hu[i] >= 0.0)) {
                    return Err(invalid(format!(
                        "objective is not monotone on the box: gradient coordinate {i} is {} at the upper corner",
                        h[i] + hu[i]
                    )));
                }
                h
            }
            None => hu.iter().map(|v| -v + MONOTONE_MARGIN).collect(),
        };
        Ok(Self {
            hessian: hessian.concat(),
            linear,
            upper,
        })
    }

    /// Symmetric `H` with entries uniform in `[-scale, 0]` and auto-completed
    /// `h` on the unit box.
    pub fn random(dim: usize, scale: f64, rng: &mut impl Rng) -> Result<Self> {
        let mut h = vec![vec![0.0; dim]; dim];
        for i in 0..dim {
            for j in i..dim {
                let v = -scale * rng.random::<f64>();
                h[i][j] = v;
                h[j][i] = v;
            }
        }
        Self::new(h, None, vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn hessian_entry(&self, i: usize, j: usize) -> f64 {
        self.hessian[i * self.dim() + j]
    }

    /// `H x`
    pub fn hessian_times(&self, x: &[f64]) -> Vec<f64> {
        self.hessian
            .chunks(self.dim())
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(invalid(format!(
                "point has dimension {}, objective has {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let hx = self.hessian_times(x);
        Ok(self
            .linear
            .iter()
            .zip(x)
            .zip(&hx)
            .map(|((h, xi), hxi)| h * xi + 0.5 * xi * hxi)
            .sum())
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut g = self.hessian_times(x);
        g.iter_mut().zip(&self.linear).for_each(|(gi, h)| *gi += h);
        Ok(g)
    }

    /// Operator norm of `H`: the gradient Lipschitz constant.
    pub fn smoothness(&self) -> f64 {
        let n = self.dim();
        let m = DMatrix::from_row_slice(n, n, &self.hessian);
        SymmetricEigen::new(m)
            .eigenvalues
            .iter()
            .fold(0.0_f64, |a, l| a.max(l.abs()))
    }

    /// Largest gradient norm on the box: `||h||`, attained at 0.
    pub fn gradient_bound(&self) -> f64 {
        crate::vecops::norm(&self.linear)
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }
}
