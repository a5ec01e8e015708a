//! The joint posterior of `(xi, sigma2)`:
//!
//! ```text
//! log pi = -(n/2 + alpha + 1) ln sigma2 - (E'E/2 + beta)/sigma2 - gamma E'E
//! ```
//!
//! with `E = R(xi) - r_obs`. The `gamma` term is a data-dependent prior on
//! `xi` and enters every acceptance ratio as written. Note that it reuses the
//! observation, so the data are effectively counted twice.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ForwardModel;
use crate::types::{Hyperparameters, Observation, ParameterVector, ReparamMap};

/// Which acceptance expression drives the noise-variance update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sigma2Rule {
    /// Exact full-conditional ratio of the joint posterior.
    #[default]
    Exact,
    /// The gradient-descent sampler's printed ratio, whose exponent drops the
    /// `E'E` factor. Kept for comparison runs only.
    LiteralMgdg,
}

/// Log of the `sigma2` full-conditional ratio `pi(sigma2_new | .) / pi(sigma2_old | .)`,
/// inverse-gamma prior included.
pub fn sigma2_log_ratio(
    sigma2_new: f64,
    sigma2_old: f64,
    ete: f64,
    n: usize,
    alpha: f64,
    beta: f64,
    rule: Sigma2Rule,
) -> Result<f64> {
    if !(sigma2_new > 0.0) || !(sigma2_old > 0.0) {
        return Err(Error::DomainViolation(format!(
            "variances must be positive, got {sigma2_new} and {sigma2_old}"
        )));
    }
    if !(ete >= 0.0) {
        return Err(Error::DomainViolation(format!("E'E = {ete} must be >= 0")));
    }
    let shape = n as f64 / 2.0 + alpha + 1.0;
    let scale = match rule {
        Sigma2Rule::Exact => ete / 2.0 + beta,
        Sigma2Rule::LiteralMgdg => 0.5 + beta,
    };
    Ok(-shape * (sigma2_new / sigma2_old).ln() - scale * (1.0 / sigma2_new - 1.0 / sigma2_old))
}

/// Unnormalized log posterior from the residual sum of squares.
pub fn log_posterior_from_ete(ete: f64, n: usize, sigma2: f64, psi: &Hyperparameters) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::DomainViolation(format!("sigma2 = {sigma2} must be > 0")));
    }
    let shape = n as f64 / 2.0 + psi.alpha + 1.0;
    Ok(-shape * sigma2.ln() - (ete / 2.0 + psi.beta) / sigma2 - psi.gamma * ete)
}

/// Log acceptance ratio contributed by a change of residual sum of squares at
/// fixed `sigma2`: likelihood plus the `gamma` prior.
pub fn ete_log_ratio(ete_new: f64, ete_old: f64, sigma2: f64, gamma: f64) -> f64 {
    -(1.0 / (2.0 * sigma2) + gamma) * (ete_new - ete_old)
}

/// Central-difference step for the drift: relative 1e-5 with floor 1e-7.
pub fn drift_step(x: f64) -> f64 {
    (1e-5 * x.abs()).max(1e-7)
}

/// Central-difference gradient of `f` using [`drift_step`]. Falls back to a
/// one-sided difference when a probe would cross `lower`.
pub fn fd_gradient<F>(mut f: F, x: &[f64], lower: Option<f64>) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut f0 = None;
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let h = drift_step(x[i]);
        let below = x[i] - h;
        probe[i] = x[i] + h;
        let up = f(&probe)?;
        let g = if lower.is_some_and(|lo| below <= lo) {
            let centre = match f0 {
                Some(v) => v,
                None => *f0.insert(f(x)?),
            };
            (up - centre) / h
        } else {
            probe[i] = below;
            let down = f(&probe)?;
            (up - down) / (2.0 * h)
        };
        probe[i] = x[i];
        if !g.is_finite() {
            return Err(Error::NonFiniteValue);
        }
        grad.push(g);
    }
    Ok(grad)
}

/// Everything needed to evaluate the posterior: model, reduction map,
/// observation and hyperparameters. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorContext {
    pub model: ForwardModel,
    pub map: ReparamMap,
    pub obs: Observation,
    pub psi: Hyperparameters,
}

impl PosteriorContext {
    pub fn new(model: ForwardModel, map: ReparamMap, obs: Observation, psi: Hyperparameters) -> Result<Self> {
        if model.dimension() != map.dimension {
            return Err(Error::DimensionMismatch {
                expected: model.dimension(),
                got: map.dimension,
            });
        }
        psi.validate()?;
        Ok(Self { model, map, obs, psi })
    }

    pub fn n(&self) -> usize {
        self.obs.len()
    }

    /// `E = R(xi) - r_obs`.
    pub fn residual(&self, xi: &ParameterVector) -> Result<Vec<f64>> {
        let r = self.model.evaluate(xi, self.obs.times())?;
        Ok(r.iter().zip(self.obs.values()).map(|(a, b)| a - b).collect())
    }

    /// `E'E` at `xi`.
    pub fn ete(&self, xi: &ParameterVector) -> Result<f64> {
        let ete: f64 = self.residual(xi)?.iter().map(|e| e * e).sum();
        if !ete.is_finite() {
            return Err(Error::NonFiniteValue);
        }
        Ok(ete)
    }

    pub fn ete_parts(&self, eta: &[f64], nu: &[f64]) -> Result<f64> {
        self.ete(&self.map.restore_parts(eta, nu)?)
    }

    /// `||r_obs - R(g(eta, nu))||_2`.
    pub fn loss(&self, eta: &[f64], nu: &[f64]) -> Result<f64> {
        Ok(self.ete_parts(eta, nu)?.sqrt())
    }

    pub fn log_posterior(&self, xi: &ParameterVector, sigma2: f64) -> Result<f64> {
        if !(sigma2 > 0.0) {
            return Err(Error::DomainViolation(format!("sigma2 = {sigma2} must be > 0")));
        }
        log_posterior_from_ete(self.ete(xi)?, self.n(), sigma2, &self.psi)
    }

    /// `grad_nu E'E` by central differences.
    pub fn ete_gradient_nu(&self, eta: &[f64], nu: &[f64]) -> Result<Vec<f64>> {
        fd_gradient(|v| self.ete_parts(eta, v), nu, Some(0.0))
    }

    /// `grad_nu log pi(nu | eta, sigma2, r_obs) = -(1/(2 sigma2) + gamma) grad_nu E'E`.
    pub fn mala_drift(&self, eta: &[f64], nu: &[f64], sigma2: f64) -> Result<Vec<f64>> {
        if !(sigma2 > 0.0) {
            return Err(Error::DomainViolation(format!("sigma2 = {sigma2} must be > 0")));
        }
        let c = 1.0 / (2.0 * sigma2) + self.psi.gamma;
        Ok(self.ete_gradient_nu(eta, nu)?.into_iter().map(|g| -c * g).collect())
    }
}
