//! Metropolis on `eta` with `nu` restored by gradient descent at every
//! proposal, plus a Metropolis step on `sigma2`.

use super::proposals::{tn_log_hastings, TruncatedNormal};
use super::{accept, record, sigma2_step, stream, Chain, GdStats, InitialState, RestoreMode, SamplerSettings};
use super::{STREAM_ETA, STREAM_SIGMA2};
use crate::error::{Error, Result};
use crate::optim::{gradient_descent, GdOutcome, GdStatus};
use crate::posterior::{ete_log_ratio, PosteriorContext};
use crate::types::apply_sort_rule;

/// Current state of the restored block.
struct Restored {
    nu: Vec<f64>,
    ete: f64,
    /// The descent that produced `nu` ended at a fixed point for the current
    /// `eta`, so rerunning it from `nu` would return the same values.
    settled: bool,
}

impl Restored {
    fn from_outcome(out: GdOutcome) -> Self {
        Self {
            settled: out.status != GdStatus::MaxIter,
            ete: out.objective,
            nu: out.nu,
        }
    }
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
    let mut eta_rng = stream(seed, STREAM_ETA);
    let mut s2_rng = stream(seed, STREAM_SIGMA2);
    let mut stats = GdStats::default();

    let mut eta = start.eta.clone();
    let mut state = Restored {
        nu: start.nu.clone(),
        ete: start.ete,
        settled: false,
    };
    let mut sigma2 = start.sigma2;
    let mut records = Vec::with_capacity(psi.chain_length);

    let restore = |eta: &[f64], warm: &[f64], stats: &mut GdStats| -> Result<Restored> {
        let (out, _) = gradient_descent(ctx, eta, warm, &settings.gd)?;
        stats.add(&out);
        Ok(Restored::from_outcome(out))
    };

    for k in 0..psi.chain_length {
        let mut accepts = vec![0u32; d + 1];
        let (s2, ok) = sigma2_step(ctx, settings.sigma2_rule, sigma2, state.ete, &mut s2_rng)?;
        sigma2 = s2;
        accepts[0] = ok as u32;

        for j in 0..d {
            let sd = psi.sd(j);
            let proposal = TruncatedNormal::new(eta[j], sd, 0.0, 1.0)?.sample(&mut eta_rng);
            let mut cand = eta.clone();
            cand[j] = proposal;
            let restored = restore(&cand, &state.nu, &mut stats).ok();
            let log_ratio = match &restored {
                Some(r) => {
                    ete_log_ratio(r.ete, state.ete, sigma2, psi.gamma)
                        + tn_log_hastings(eta[j], proposal, sd, 0.0, 1.0)?
                }
                None => f64::NEG_INFINITY,
            };
            if accept(log_ratio, &mut eta_rng) {
                if let Some(r) = restored {
                    eta = cand;
                    state = r;
                    accepts[j + 1] = 1;
                }
            }
            if settings.restore == RestoreMode::PerCoordinate && !state.settled {
                state = restore(&eta, &state.nu, &mut stats)?;
            }
        }
        if !state.settled {
            state = restore(&eta, &state.nu, &mut stats)?;
        }

        let before = eta.clone();
        apply_sort_rule(psi.sort_rule, &mut eta, &mut state.nu);
        if eta != before {
            state.settled = false;
        }
        let xi = ctx.map.restore_parts(&eta, &state.nu)?;
        records.push(record(ctx, &eta, &state.nu, xi, sigma2, state.ete, accepts, k));
    }

    let mut blocks = vec!["sigma2".to_string()];
    blocks.extend((1..=d).map(|j| format!("eta_{j}")));
    Ok(Chain {
        seed,
        kind: settings.kind,
        blocks,
        attempts: vec![1; d + 1],
        beta: psi.beta,
        init: start,
        gd: stats,
        records,
    })
}
