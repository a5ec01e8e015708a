//! Case 1 fixtures shared by the integration tests.
#![allow(dead_code)]

use isofit_core::mixtures::{equally_spaced, MixtureModel};
use isofit_core::{
    ForwardModel, Hyperparameters, Observation, ParameterVector, PosteriorContext, ReparamKind, ReparamMap, SortRule,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const CASE1_TRUTH: [f64; 4] = [1.0 / 3.0, 2.0 / 3.0, 8.0 / 3.0, 4.0 / 3.0];
pub const CASE1_ETA: [f64; 2] = [1.0 / 3.0, 2.0 / 3.0];
pub const CASE1_NU: [f64; 2] = [1.0, 4.0];

pub fn case1_model() -> ForwardModel {
    ForwardModel::Mixture(MixtureModel::gaussian(2).unwrap())
}

pub fn case1_clean(n: usize) -> (Vec<f64>, Vec<f64>) {
    let grid = equally_spaced(-2.0, 7.0, n);
    let clean = case1_model()
        .evaluate(&ParameterVector::new(CASE1_TRUTH.to_vec()).unwrap(), &grid)
        .unwrap();
    (grid, clean)
}

/// Case 1 observation with `N(0, sigma2)` noise drawn from `seed`.
pub fn case1_observation(n: usize, sigma2: f64, seed: u64) -> Observation {
    let (grid, clean) = case1_clean(n);
    let values = if sigma2 == 0.0 {
        clean
    } else {
        let noise = Normal::new(0.0, sigma2.sqrt()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        clean.iter().map(|c| c + noise.sample(&mut rng)).collect()
    };
    Observation::on_grid(grid, values).unwrap()
}

pub fn case1_psi(chain_length: usize, burn_in: usize) -> Hyperparameters {
    Hyperparameters {
        alpha: 2.0,
        beta: 0.001,
        gamma: 8.0,
        proposal_sd: vec![0.02],
        sigma2_log_sd: 0.1,
        tau: 0.001,
        m: 200,
        burn_in,
        chain_length,
        init_candidates: 100,
        sort_rule: SortRule::SortAscending,
    }
}

pub fn case1_context(obs: Observation, chain_length: usize, burn_in: usize) -> PosteriorContext {
    PosteriorContext::new(
        case1_model(),
        ReparamMap::new(ReparamKind::WeightSum, 4).unwrap(),
        obs,
        case1_psi(chain_length, burn_in),
    )
    .unwrap()
}
