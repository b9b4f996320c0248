//! The isotropic pairwise Gaussian-Markov random field.
//!
//! Each site is conditionally Gaussian given its neighbourhood:
//! `x_i | η_i ~ N(μ + β Σ_j (x_j − μ), σ²)`. The product of these local
//! conditional densities is the pseudo-likelihood, which is also a curved
//! exponential family with five sufficient statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Configuration;
use crate::scalar::Scalar;

/// Neighbourhood supports accepted by [`ModelParams`].
pub const SUPPORTED_DELTAS: [usize; 5] = [4, 8, 12, 20, 24];

/// θ = (μ, σ², β) together with the neighbourhood support Δ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<F> {
    pub mu: F,
    pub sigma2: F,
    pub beta: F,
    pub delta: usize,
}

impl<F: Scalar> ModelParams<F> {
    pub fn new(mu: F, sigma2: F, beta: F, delta: usize) -> Result<Self> {
        let p = Self {
            mu,
            sigma2,
            beta,
            delta,
        };
        p.validate()?;
        Ok(p)
    }

    /// Second-order (Moore, Δ = 8) parameters.
    pub fn moore(mu: F, sigma2: F, beta: F) -> Result<Self> {
        Self::new(mu, sigma2, beta, 8)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > F::zero()) || !self.sigma2.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma2 must be positive and finite, got {}",
                self.sigma2
            )));
        }
        if !self.mu.is_finite() || !self.beta.is_finite() {
            return Err(Error::InvalidParameter("mu and beta must be finite".into()));
        }
        if !SUPPORTED_DELTAS.contains(&self.delta) {
            return Err(Error::InvalidParameter(format!(
                "neighbourhood support {} not in {SUPPORTED_DELTAS:?}",
                self.delta
            )));
        }
        Ok(())
    }

    pub fn with_beta(self, beta: F) -> Self {
        Self { beta, ..self }
    }

    pub fn delta_f(&self) -> F {
        F::from_count(self.delta)
    }

    /// Mean of the local conditional density given the neighbour sum
    /// `Σ_j x_j` over `delta` neighbours.
    #[inline]
    pub fn conditional_mean(&self, neighbor_sum: F) -> F {
        self.mu + self.beta * (neighbor_sum - self.delta_f() * self.mu)
    }
}

/// The five natural sufficient statistics
/// (Σx_i, Σx_i², ΣΣ x_i x_j, ΣΣ x_j, Σ (Σ_j x_j)²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaturalStatistics<F> {
    pub t1: F,
    pub t2: F,
    pub t3: F,
    pub t4: F,
    pub t5: F,
}

impl<F: Scalar> NaturalStatistics<F> {
    pub fn as_array(&self) -> [F; 5] {
        [self.t1, self.t2, self.t3, self.t4, self.t5]
    }
}

#[inline]
fn half_log_two_pi_var<F: Scalar>(sigma2: F) -> F {
    F::of(0.5) * (F::TAU() * sigma2).ln()
}

/// Log of the local conditional density at `x` given the neighbour values.
pub fn lcdf_log_density<F: Scalar>(x: F, neighbor_values: &[F], params: &ModelParams<F>) -> F {
    let dev = neighbor_values
        .iter()
        .fold(F::zero(), |acc, &v| acc + (v - params.mu));
    let resid = x - params.mu - params.beta * dev;
    -half_log_two_pi_var(params.sigma2) - resid * resid / (F::of(2.0) * params.sigma2)
}

/// Same density, parameterised by the neighbour sum. Used by the samplers.
#[inline]
pub(crate) fn lcdf_log_density_from_sum<F: Scalar>(x: F, neighbor_sum: F, params: &ModelParams<F>) -> F {
    let resid = x - params.conditional_mean(neighbor_sum);
    -half_log_two_pi_var(params.sigma2) - resid * resid / (F::of(2.0) * params.sigma2)
}

pub fn natural_statistics<F: Scalar>(config: &Configuration<F>) -> NaturalStatistics<F> {
    let cells = config.cells();
    let (mut t1, mut t2, mut t3, mut t4, mut t5) = (F::zero(), F::zero(), F::zero(), F::zero(), F::zero());
    for row in 0..config.rows() {
        for col in 0..config.cols() {
            let x = cells[row * config.cols() + col];
            let s = config.neighbor_sum(row, col);
            t1 = t1 + x;
            t2 = t2 + x * x;
            t3 = t3 + x * s;
            t4 = t4 + s;
            t5 = t5 + s * s;
        }
    }
    NaturalStatistics { t1, t2, t3, t4, t5 }
}

/// Natural parameters c(θ) paired with [`NaturalStatistics`].
pub fn natural_parameters<F: Scalar>(params: &ModelParams<F>) -> [F; 5] {
    let ModelParams { mu, sigma2, beta, .. } = *params;
    let one_minus = F::one() - beta * params.delta_f();
    [
        mu / sigma2 * one_minus,
        -F::one() / (F::of(2.0) * sigma2),
        beta / sigma2,
        -(beta * mu / sigma2) * one_minus,
        -(beta * beta) / (F::of(2.0) * sigma2),
    ]
}

/// The parameter-only term d(θ) of the exponential-family form for `n` sites.
pub fn log_normalizer<F: Scalar>(params: &ModelParams<F>, n: usize) -> F {
    let ModelParams { mu, sigma2, beta, .. } = *params;
    let n = F::from_count(n);
    let delta = params.delta_f();
    let half = F::of(0.5);
    -n * half * ((F::TAU() * sigma2).ln() + mu * mu / sigma2)
        + beta * delta * mu * mu * n / sigma2 * (F::one() - beta * delta * half)
}

/// Σ_i log p(x_i | η_i, θ), summed site by site.
pub fn log_pseudo_likelihood<F: Scalar>(config: &Configuration<F>, params: &ModelParams<F>) -> F {
    let cells = config.cells();
    let mut total = F::zero();
    for row in 0..config.rows() {
        for col in 0..config.cols() {
            let x = cells[row * config.cols() + col];
            total = total + lcdf_log_density_from_sum(x, config.neighbor_sum(row, col), params);
        }
    }
    total
}

/// ⟨c(θ), T(X)⟩ + d(θ): the pseudo-likelihood through its exponential-family form.
pub fn log_pseudo_likelihood_exp_family<F: Scalar>(config: &Configuration<F>, params: &ModelParams<F>) -> F {
    let t = natural_statistics(config).as_array();
    let c = natural_parameters(params);
    c.iter().zip(t).fold(F::zero(), |acc, (&ci, ti)| acc + ci * ti) + log_normalizer(params, config.len())
}
