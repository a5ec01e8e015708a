//! Metropolis-within-Gibbs (`Mwg`), gradient-descent-within-Gibbs (`Mgdg`)
//! and Langevin-within-Gibbs (`Malg`) kernels.

mod init;
mod malg;
mod mgdg;
mod mwg;
pub mod proposals;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::GdSettings;
use crate::posterior::{sigma2_log_ratio, PosteriorContext, Sigma2Rule};
use crate::types::{ChainRecord, ParameterVector};

pub use init::{init_eta, init_sigma2, InitialState};
pub use malg::{mala_step, QldForm};
pub use proposals::{inverse_gamma, lognormal_step, tn_log_hastings, TruncatedNormal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Mwg,
    Mgdg,
    Malg,
}

impl SamplerKind {
    pub fn name(&self) -> &'static str {
        match self {
            SamplerKind::Mwg => "mwg",
            SamplerKind::Mgdg => "mgdg",
            SamplerKind::Malg => "malg",
        }
    }
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mwg" => Ok(SamplerKind::Mwg),
            "mgdg" => Ok(SamplerKind::Mgdg),
            "malg" => Ok(SamplerKind::Malg),
            other => Err(Error::InvalidConfig(format!("unknown sampler {other}"))),
        }
    }
}

/// How the Langevin sampler proposes the bounded block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaUpdate {
    /// One joint proposal for all coordinates.
    #[default]
    Block,
    PerCoordinate,
}

/// When the gradient-descent sampler recomputes `xi_hat` for the stored state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestoreMode {
    /// Once after the coordinate sweep.
    #[default]
    PerSweep,
    /// After every coordinate.
    PerCoordinate,
}

/// Kernel options beyond the prior hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSettings {
    pub kind: SamplerKind,
    pub gd: GdSettings,
    /// Descent settings for the initial candidate search; defaults to `gd`.
    pub init_gd: Option<GdSettings>,
    pub sigma2_rule: Sigma2Rule,
    /// Sets `beta = ||R(g(eta0, nu_hat(eta0))) - r_obs||^2 / n` after the
    /// initial search instead of using the configured value.
    pub beta_auto: bool,
    pub qld: QldForm,
    pub eta_update: EtaUpdate,
    pub restore: RestoreMode,
    /// Langevin sampler on `(atanh(2 eta - 1), ln nu)`.
    pub unconstrained: bool,
    /// Random-walk sd of the unconstrained `eta` proposal.
    pub unconstrained_sd: f64,
    /// Starting `nu` when the observation gives no usable hint.
    pub nu_fallback: Vec<f64>,
}

impl SamplerSettings {
    pub fn new(kind: SamplerKind) -> Self {
        Self {
            kind,
            gd: GdSettings::default(),
            init_gd: None,
            sigma2_rule: Sigma2Rule::Exact,
            beta_auto: true,
            qld: QldForm::Squared,
            eta_update: EtaUpdate::Block,
            restore: RestoreMode::PerSweep,
            unconstrained: false,
            unconstrained_sd: 0.05,
            nu_fallback: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.gd.validate()?;
        if let Some(g) = &self.init_gd {
            g.validate()?;
        }
        if !(self.unconstrained_sd > 0.0) {
            return Err(Error::InvalidConfig("unconstrained sd must be > 0".into()));
        }
        Ok(())
    }
}

/// A complete run: stored draws plus what is needed to interpret them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub seed: u64,
    pub kind: SamplerKind,
    /// Names of the update blocks, aligned with `ChainRecord::accepts`.
    pub blocks: Vec<String>,
    /// Proposals attempted per block in each iteration.
    pub attempts: Vec<u32>,
    /// Effective `beta` (after the automatic rule, when enabled).
    pub beta: f64,
    pub init: InitialState,
    pub gd: GdStats,
    pub records: Vec<ChainRecord>,
}

impl Chain {
    /// Records after burn-in.
    pub fn kept(&self) -> impl Iterator<Item = &ChainRecord> {
        self.records.iter().filter(|r| !r.burn_in)
    }
}

/// Counters over every restoration run of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GdStats {
    pub runs: u64,
    pub iterations: u64,
    pub converged: u64,
    pub max_iter: u64,
    /// Runs that stopped without finding a decrease.
    pub stalled: u64,
}

impl GdStats {
    pub(crate) fn add(&mut self, out: &crate::optim::GdOutcome) {
        use crate::optim::GdStatus;
        self.runs += 1;
        self.iterations += out.iterations as u64;
        match out.status {
            GdStatus::Converged => self.converged += 1,
            GdStatus::MaxIter => self.max_iter += 1,
            GdStatus::NoDescentDirection => self.stalled += 1,
        }
    }
}

/// Independent generator for one block of one chain.
pub(crate) fn stream(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

pub(crate) const STREAM_INIT: u64 = 1;
pub(crate) const STREAM_SIGMA2: u64 = 2;
pub(crate) const STREAM_ETA: u64 = 3;
pub(crate) const STREAM_NU: u64 = 4;

/// Metropolis accept/reject on a log ratio.
pub(crate) fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    // The uniform is always drawn so stream consumption does not depend on
    // the ratio.
    let u: f64 = rng.random();
    if log_ratio.is_nan() {
        false
    } else {
        log_ratio >= 0.0 || u.ln() < log_ratio
    }
}

/// Log-normal random-walk update of the noise variance. Returns the new value
/// and whether the proposal was accepted.
pub(crate) fn sigma2_step<R: Rng + ?Sized>(
    ctx: &PosteriorContext,
    rule: Sigma2Rule,
    sigma2: f64,
    ete: f64,
    rng: &mut R,
) -> Result<(f64, bool)> {
    let (cand, hastings) = lognormal_step(sigma2, ctx.psi.sigma2_log_sd, rng);
    let log_ratio = sigma2_log_ratio(cand, sigma2, ete, ctx.n(), ctx.psi.alpha, ctx.psi.beta, rule)? + hastings;
    Ok(if accept(log_ratio, rng) {
        (cand, true)
    } else {
        (sigma2, false)
    })
}

/// Runs the configured kernel for `psi.chain_length` iterations.
pub fn run(ctx: &PosteriorContext, settings: &SamplerSettings, seed: u64) -> Result<Chain> {
    settings.validate()?;
    ctx.psi.validate()?;
    let mut init_rng = stream(seed, STREAM_INIT);
    let init_gd = settings.init_gd.unwrap_or(settings.gd);
    let start = init_eta(
        ctx,
        &init_gd,
        &settings.nu_fallback,
        ctx.psi.init_candidates,
        &mut init_rng,
    )?;
    let mut ctx = ctx.clone();
    if settings.beta_auto {
        ctx.psi.beta = (start.ete / ctx.n() as f64).max(f64::MIN_POSITIVE);
    }
    let sigma2 = init_sigma2(ctx.psi.alpha, ctx.psi.beta, &mut init_rng)?;
    let start = InitialState { sigma2, ..start };
    match settings.kind {
        SamplerKind::Mwg => mwg::run(&ctx, settings, seed, start),
        SamplerKind::Mgdg => mgdg::run(&ctx, settings, seed, start),
        SamplerKind::Malg => malg::run(&ctx, settings, seed, start),
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn record(
    ctx: &PosteriorContext,
    eta: &[f64],
    nu: &[f64],
    xi: ParameterVector,
    sigma2: f64,
    ete: f64,
    accepts: Vec<u32>,
    iteration: usize,
) -> ChainRecord {
    ChainRecord {
        eta: eta.to_vec(),
        nu: nu.to_vec(),
        xi_hat: xi,
        sigma2,
        loss: ete.sqrt(),
        accepts,
        burn_in: iteration < ctx.psi.burn_in,
    }
}
