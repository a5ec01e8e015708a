use rand::Rng;
use serde::{Deserialize, Serialize};

use super::proposals::inverse_gamma;
use crate::error::{Error, Result};
use crate::optim::{gradient_descent, nu_init, GdSettings};
use crate::posterior::PosteriorContext;

/// Starting point of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub eta: Vec<f64>,
    pub nu: Vec<f64>,
    /// `E'E` at `g(eta, nu)`.
    pub ete: f64,
    pub sigma2: f64,
}

/// Best of `m` uniform candidates on `[0, 1]^d`, each scored by the loss after
/// restoring `nu_hat`. Candidates whose restoration fails are skipped.
pub fn init_eta<R: Rng + ?Sized>(
    ctx: &PosteriorContext,
    gd: &GdSettings,
    nu_fallback: &[f64],
    m: usize,
    rng: &mut R,
) -> Result<InitialState> {
    if m == 0 {
        return Err(Error::InvalidConfig("need at least one initial candidate".into()));
    }
    let d = ctx.map.eta_dim();
    let mut best: Option<InitialState> = None;
    let mut last_err = None;
    for _ in 0..m {
        let eta: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let (nu0, _) = nu_init(&eta, &ctx.model, &ctx.map, &ctx.obs, nu_fallback);
        match gradient_descent(ctx, &eta, &nu0, gd) {
            Ok((out, _)) => {
                if best.as_ref().is_none_or(|b| out.objective < b.ete) {
                    best = Some(InitialState {
                        eta,
                        nu: out.nu,
                        ete: out.objective,
                        sigma2: f64::NAN,
                    });
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(Error::NonFiniteValue))
}

/// Draw from the inverse-gamma prior of the noise variance.
pub fn init_sigma2<R: Rng + ?Sized>(alpha: f64, beta: f64, rng: &mut R) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::InvalidConfig("alpha and beta must be > 0".into()));
    }
    inverse_gamma(alpha, beta, rng)
}
