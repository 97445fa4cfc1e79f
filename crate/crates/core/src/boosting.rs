//! The boosting auxiliary function and its one-query gradient estimator.
//!
//! For monotone DR-submodular `f` with `f(0) = 0`,
//!
//! ```text
//! F(x)      = int_0^1 (e^{z-1} / z) f(z x) dz
//! grad F(x) = int_0^1  e^{z-1} grad f(z x) dz
//! ```
//!
//! Drawing `z` from the density `e^{z-1} / (1 - 1/e)` on `[0, 1]` and returning
//! `(1 - 1/e) * grad~f(z x)` estimates `grad F(x)` without bias, at the cost of
//! a single stochastic gradient. Stationary points of `F` are
//! `(1 - 1/e)`-approximate maximizers of `f`, which is what lifts projected
//! gradient ascent above its usual `1/2` guarantee.
//!
//! The quadrature routines here are references for tests and diagnostics; the
//! online algorithms only ever use [`boosted_gradient`].

use std::f64::consts::E;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::objectives::{NoisyGradient, Objective};
use crate::rng::{self, Purpose};
use crate::vecops::{axpy, dot, scale};

/// `1 - 1/e`, the approximation ratio and the estimator's scale factor.
pub const ONE_MINUS_INV_E: f64 = 1.0 - 1.0 / E;

/// Nodes closer to zero than this use the `z -> 0` limit of the integrand.
const SINGULAR_CUTOFF: f64 = 1e-8;

/// `Z` on `[0, 1]` with `P(Z <= z) = (e^{z-1} - 1/e) / (1 - 1/e)`.
#[derive(Debug, Clone)]
pub struct ZSampler {
    rng: ChaCha8Rng,
}

impl ZSampler {
    pub fn new(rng: ChaCha8Rng) -> Self {
        Self { rng }
    }

    pub fn for_node(seed: u64, node: usize) -> Self {
        Self::new(rng::stream(seed, Purpose::BoostingSample, node as u64))
    }

    pub fn sample(&mut self) -> f64 {
        inverse_cdf(self.rng.random::<f64>())
    }
}

/// Inverse of the `Z` distribution function: `1 + ln(1/e + (1 - 1/e) u)`.
pub fn inverse_cdf(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    (1.0 + (1.0 / E + ONE_MINUS_INV_E * u).ln()).clamp(0.0, 1.0)
}

pub fn cdf(z: f64) -> f64 {
    let z = z.clamp(0.0, 1.0);
    ((z - 1.0).exp() - 1.0 / E) / ONE_MINUS_INV_E
}

/// One unbiased sample of `grad F(x)`: `(1 - 1/e) * grad~f(z x)` with `z ~ Z`.
/// Consumes exactly one query of `oracle`.
pub fn boosted_gradient(
    f: &(impl Objective + ?Sized),
    x: &[f64],
    oracle: &mut NoisyGradient,
    sampler: &mut ZSampler,
) -> Result<Vec<f64>> {
    let z = sampler.sample();
    let g = oracle.query(f, &scale(x, z))?;
    Ok(scale(&g, ONE_MINUS_INV_E))
}

/// Gauss-Legendre nodes and weights mapped to `[0, 1]`.
pub fn gauss_legendre(points: usize) -> (Vec<f64>, Vec<f64>) {
    let n = points;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut deriv = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn_1 = if n == 1 { 1.0 } else { p0 };
            deriv = n as f64 * (x * pn - pn_1) / (x * x - 1.0);
            let dx = pn / deriv;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * deriv * deriv);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn check_points(points: usize) -> Result<()> {
    if points < 16 {
        return Err(Error::InvalidParameter(format!(
            "quadrature needs at least 16 points, got {points}"
        )));
    }
    Ok(())
}

/// `grad F(x) = int_0^1 e^{z-1} grad f(z x) dz` by Gauss-Legendre quadrature.
pub fn reference_boosted_gradient(
    f: &(impl Objective + ?Sized),
    x: &[f64],
    points: usize,
) -> Result<Vec<f64>> {
    check_points(points)?;
    let (nodes, weights) = gauss_legendre(points);
    let mut total = vec![0.0; x.len()];
    for (z, w) in nodes.iter().zip(&weights) {
        let g = f.gradient(&scale(x, *z))?;
        axpy(w * (z - 1.0).exp(), &g, &mut total);
    }
    Ok(total)
}

/// `F(x) = int_0^1 (e^{z-1} / z) f(z x) dz`. Requires `f(0) = 0`; near
/// `z = 0` the integrand is replaced by its limit `e^{-1} <grad f(0), x>`.
pub fn auxiliary_value(f: &(impl Objective + ?Sized), x: &[f64], points: usize) -> Result<f64> {
    check_points(points)?;
    let zero = vec![0.0; x.len()];
    let at_zero = f.value(&zero)?;
    if at_zero.abs() > 1e-9 {
        return Err(Error::PreconditionViolation(format!(
            "auxiliary function needs f(0) = 0, got {at_zero}; shift the objective first"
        )));
    }
    let slope = dot(&f.gradient(&zero)?, x);
    let (nodes, weights) = gauss_legendre(points);
    let mut total = 0.0;
    for (z, w) in nodes.iter().zip(&weights) {
        let integrand = if *z < SINGULAR_CUTOFF {
            (-1.0f64).exp() * slope
        } else {
            (z - 1.0).exp() / z * f.value(&scale(x, *z))?
        };
        total += w * integrand;
    }
    Ok(total)
}

/// `<y - x, grad F(x)> - [(1 - 1/e) f(y) - f(x)]`, nonnegative for monotone
/// DR-submodular `f` with `f(0) = 0`.
pub fn check_boosting_inequality(
    f: &(impl Objective + ?Sized),
    x: &[f64],
    y: &[f64],
    points: usize,
) -> Result<f64> {
    let grad = reference_boosted_gradient(f, x, points)?;
    let step: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
    Ok(dot(&step, &grad) - (ONE_MINUS_INV_E * f.value(y)? - f.value(x)?))
}
