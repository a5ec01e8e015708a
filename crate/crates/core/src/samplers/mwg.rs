//! Coordinate-wise Metropolis-within-Gibbs on `(xi, sigma2)`.

use super::proposals::{tn_log_hastings, TruncatedNormal};
use super::{accept, record, sigma2_step, stream, Chain, InitialState, SamplerSettings};
use super::{STREAM_ETA, STREAM_SIGMA2};
use crate::error::{Error, Result};
use crate::posterior::{ete_log_ratio, PosteriorContext};
use crate::types::{apply_sort_rule, ParameterVector};

pub(super) fn run(ctx: &PosteriorContext, settings: &SamplerSettings, seed: u64, start: InitialState) -> Result<Chain> {
    let dim = ctx.map.dimension;
    let psi = &ctx.psi;
    if psi.proposal_sd.len() != 1 && psi.proposal_sd.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: psi.proposal_sd.len(),
        });
    }
    let mut xi_rng = stream(seed, STREAM_ETA);
    let mut s2_rng = stream(seed, STREAM_SIGMA2);

    let mut xi = ctx.map.restore_parts(&start.eta, &start.nu)?.into_inner();
    let mut ete = start.ete;
    let mut sigma2 = start.sigma2;
    let mut records = Vec::with_capacity(psi.chain_length);

    for k in 0..psi.chain_length {
        let mut accepts = vec![0u32; dim + 1];
        for j in 0..dim {
            let sd = psi.sd(j);
            let cand_j = TruncatedNormal::new(xi[j], sd, 0.0, f64::INFINITY)?.sample(&mut xi_rng);
            let mut cand = xi.clone();
            cand[j] = cand_j;
            let ete_c = ParameterVector::new(cand.clone()).and_then(|p| ctx.ete(&p)).ok();
            let log_ratio = match ete_c {
                Some(e) => {
                    ete_log_ratio(e, ete, sigma2, psi.gamma) + tn_log_hastings(xi[j], cand_j, sd, 0.0, f64::INFINITY)?
                }
                None => f64::NEG_INFINITY,
            };
            if accept(log_ratio, &mut xi_rng) {
                if let Some(e) = ete_c {
                    ete = e;
                    xi = cand;
                    accepts[j] = 1;
                }
            }
        }
        let (s2, ok) = sigma2_step(ctx, settings.sigma2_rule, sigma2, ete, &mut s2_rng)?;
        sigma2 = s2;
        accepts[dim] = ok as u32;

        let mut reduced = ctx.map.split(&ParameterVector::new(xi.clone())?)?;
        apply_sort_rule(psi.sort_rule, &mut reduced.eta, &mut reduced.nu);
        let xi_sorted = ctx.map.restore(&reduced)?;
        xi = xi_sorted.as_slice().to_vec();
        records.push(record(
            ctx,
            &reduced.eta,
            &reduced.nu,
            xi_sorted,
            sigma2,
            ete,
            accepts,
            k,
        ));
    }

    let mut blocks: Vec<String> = (1..=dim).map(|j| format!("xi_{j}")).collect();
    blocks.push("sigma2".into());
    Ok(Chain {
        seed,
        kind: settings.kind,
        blocks,
        attempts: vec![1; dim + 1],
        beta: psi.beta,
        init: start,
        gd: Default::default(),
        records,
    })
}
