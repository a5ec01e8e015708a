//! Metropolis on `eta` and `sigma2` with a Metropolis-adjusted Langevin
//! sub-chain on `nu`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::proposals::{tn_log_hastings, TruncatedNormal};
use super::{accept, record, sigma2_step, stream, Chain, EtaUpdate, InitialState, SamplerSettings};
use super::{STREAM_ETA, STREAM_NU, STREAM_SIGMA2};
use crate::error::{Error, Result};
use crate::posterior::{ete_log_ratio, PosteriorContext};
use crate::types::{apply_sort_rule, eta_from_unconstrained, eta_to_unconstrained};

/// Form of the Langevin transition density `q(y | x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QldForm {
    /// `exp(-||y - x - tau grad||^2 / (4 tau))`, the Gaussian kernel of the
    /// proposal.
    #[default]
    Squared,
    /// `exp(-||y - x - tau grad|| / (4 tau))` with an unsquared norm, as the
    /// algorithm is sometimes printed. Not a valid proposal density.
    Literal,
}

fn ln_q(to: &[f64], from: &[f64], grad_from: &[f64], tau: f64, form: QldForm) -> f64 {
    let sq: f64 = to
        .iter()
        .zip(from)
        .zip(grad_from)
        .map(|((y, x), g)| (y - x - tau * g).powi(2))
        .sum();
    match form {
        QldForm::Squared => -sq / (4.0 * tau),
        QldForm::Literal => -sq.sqrt() / (4.0 * tau),
    }
}

/// Log target and its gradient at a point.
pub type TargetValue = (f64, Vec<f64>);

/// One Metropolis-adjusted Langevin step on `x`. `current` holds the log
/// target and gradient at `x` and is updated on acceptance. `target` returns
/// an error for points outside the support, which are rejected.
pub fn mala_step<F, R>(
    x: &mut Vec<f64>,
    current: &mut TargetValue,
    mut target: F,
    tau: f64,
    form: QldForm,
    rng: &mut R,
) -> bool
where
    F: FnMut(&[f64]) -> Result<TargetValue>,
    R: Rng + ?Sized,
{
    let scale = (2.0 * tau).sqrt();
    let cand: Vec<f64> = x
        .iter()
        .zip(&current.1)
        .map(|(xi, g)| {
            let z: f64 = rng.sample(StandardNormal);
            xi + tau * g + scale * z
        })
        .collect();
    let proposed = target(&cand)
        .ok()
        .filter(|(v, g)| v.is_finite() && g.iter().all(|gi| gi.is_finite()));
    let log_ratio = match &proposed {
        Some((value, grad)) => {
            value - current.0 + ln_q(x, &cand, grad, tau, form) - ln_q(&cand, x, &current.1, tau, form)
        }
        None => f64::NEG_INFINITY,
    };
    if accept(log_ratio, rng) {
        if let Some(p) = proposed {
            *x = cand;
            *current = p;
            return true;
        }
    }
    false
}

/// `sum ln(2 eta (1 - eta))`, the log-Jacobian of `eta = (tanh(t) + 1)/2`.
fn eta_log_jacobian(eta: &[f64]) -> f64 {
    eta.iter().map(|e| (2.0 * e * (1.0 - e)).ln()).sum()
}

pub(super) fn run(ctx: &PosteriorContext, settings: &SamplerSettings, seed: u64, start: InitialState) -> Result<Chain> {
    let d = ctx.map.eta_dim();
    let psi = &ctx.psi;
    if psi.proposal_sd.len() != 1 && psi.proposal_sd.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: psi.proposal_sd.len(),
        });
    }
    let free = settings.unconstrained;
    let mut eta_rng = stream(seed, STREAM_ETA);
    let mut nu_rng = stream(seed, STREAM_NU);
    let mut s2_rng = stream(seed, STREAM_SIGMA2);

    let mut eta = start.eta.clone();
    let mut nu = start.nu.clone();
    if free {
        // The transform needs interior points.
        for e in eta.iter_mut() {
            *e = e.clamp(1e-12, 1.0 - 1e-12);
        }
        for v in nu.iter_mut() {
            *v = v.max(ctx.map.nu_floor());
        }
    }
    let mut ete = ctx.ete_parts(&eta, &nu)?;
    let mut sigma2 = start.sigma2;
    let eta_blocks = match settings.eta_update {
        EtaUpdate::Block => 1,
        EtaUpdate::PerCoordinate => d,
    };
    let mut records = Vec::with_capacity(psi.chain_length);

    for k in 0..psi.chain_length {
        let mut accepts = vec![0u32; 2 + eta_blocks];
        let (s2, ok) = sigma2_step(ctx, settings.sigma2_rule, sigma2, ete, &mut s2_rng)?;
        sigma2 = s2;
        accepts[0] = ok as u32;

        // Langevin sub-chain on nu (or ln nu).
        if !nu.is_empty() {
            let c = 1.0 / (2.0 * sigma2) + psi.gamma;
            let eta_now = eta.clone();
            let target = |x: &[f64]| -> Result<TargetValue> {
                if free {
                    let v: Vec<f64> = x.iter().map(|t| t.exp()).collect();
                    let e = ctx.ete_parts(&eta_now, &v)?;
                    let g = ctx.ete_gradient_nu(&eta_now, &v)?;
                    let value = -c * e + x.iter().sum::<f64>();
                    let grad = g.iter().zip(&v).map(|(gi, vi)| -c * gi * vi + 1.0).collect();
                    Ok((value, grad))
                } else {
                    let e = ctx.ete_parts(&eta_now, x)?;
                    let g = ctx.ete_gradient_nu(&eta_now, x)?;
                    Ok((-c * e, g.iter().map(|gi| -c * gi).collect()))
                }
            };
            let mut x: Vec<f64> = if free {
                nu.iter().map(|v| v.ln()).collect()
            } else {
                nu.clone()
            };
            let mut current = target(&x)?;
            for _ in 0..psi.m {
                if mala_step(&mut x, &mut current, target, psi.tau, settings.qld, &mut nu_rng) {
                    accepts[1] += 1;
                }
            }
            nu = if free { x.iter().map(|t| t.exp()).collect() } else { x };
            ete = ctx.ete_parts(&eta, &nu)?;
        }

        // Metropolis on eta.
        let groups: Vec<Vec<usize>> = match settings.eta_update {
            EtaUpdate::Block => vec![(0..d).collect()],
            EtaUpdate::PerCoordinate => (0..d).map(|j| vec![j]).collect(),
        };
        for (b, group) in groups.iter().enumerate() {
            let mut cand = eta.clone();
            let mut log_q = 0.0;
            for &j in group {
                if free {
                    let t = eta_to_unconstrained(eta[j])?;
                    let z: f64 = eta_rng.sample(StandardNormal);
                    cand[j] = eta_from_unconstrained(t + settings.unconstrained_sd * z);
                } else {
                    let sd = psi.sd(j);
                    cand[j] = TruncatedNormal::new(eta[j], sd, 0.0, 1.0)?.sample(&mut eta_rng);
                    log_q += tn_log_hastings(eta[j], cand[j], sd, 0.0, 1.0)?;
                }
            }
            if free {
                log_q += eta_log_jacobian(&cand) - eta_log_jacobian(&eta);
            }
            let ete_c = if log_q.is_finite() {
                ctx.ete_parts(&cand, &nu).ok()
            } else {
                None
            };
            let log_ratio = match ete_c {
                Some(e) => ete_log_ratio(e, ete, sigma2, psi.gamma) + log_q,
                None => f64::NEG_INFINITY,
            };
            if accept(log_ratio, &mut eta_rng) {
                if let Some(e) = ete_c {
                    eta = cand;
                    ete = e;
                    accepts[2 + b] = 1;
                }
            }
        }

        apply_sort_rule(psi.sort_rule, &mut eta, &mut nu);
        let xi = ctx.map.restore_parts(&eta, &nu)?;
        records.push(record(ctx, &eta, &nu, xi, sigma2, ete, accepts, k));
    }

    let mut blocks = vec!["sigma2".to_string(), "nu".to_string()];
    let mut attempts = vec![1u32, psi.m as u32];
    match settings.eta_update {
        EtaUpdate::Block => blocks.push("eta".into()),
        EtaUpdate::PerCoordinate => blocks.extend((1..=d).map(|j| format!("eta_{j}"))),
    }
    attempts.extend(std::iter::repeat_n(1, eta_blocks));
    Ok(Chain {
        seed,
        kind: settings.kind,
        blocks,
        attempts,
        beta: psi.beta,
        init: start,
        gd: Default::default(),
        records,
    })
}
