//! Shared domain types: parameter vectors, the reduction maps that split a
//! parameter vector into a bounded block `eta` and a complementary block
//! `nu`, observations, hyperparameters and chain records.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Non-negative parameter vector of a forward model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::DomainViolation(format!(
                "parameter {i} = {v} must be finite and non-negative"
            )));
        }
        Ok(Self(values))
    }

    pub fn with_dimension(values: Vec<f64>, dim: usize) -> Result<Self> {
        if values.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: values.len(),
            });
        }
        Self::new(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for ParameterVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ParameterVector> for Vec<f64> {
    fn from(p: ParameterVector) -> Self {
        p.0
    }
}

impl std::ops::Index<usize> for ParameterVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A parameter vector split into the sampled block `eta` and the restored
/// block `nu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedParameters {
    pub eta: Vec<f64>,
    pub nu: Vec<f64>,
}

impl ReducedParameters {
    pub fn new(eta: Vec<f64>, nu: Vec<f64>) -> Self {
        Self { eta, nu }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReparamKind {
    /// `eta_i = xi_{2i-1} / (xi_{2i-1} + xi_{2i})`, `nu_i = xi_{2i-1} + xi_{2i}`:
    /// mixture weights and means.
    WeightSum,
    /// `eta_i = xi_{2i}`, `nu_i = xi_{2i-1}`: Gamma scales and shapes.
    ShapeScale,
    /// Ratio/sum split of the bi-Langmuir `(a_I, a_II, b_I, b_II)` blocks:
    /// `eta = (a_I/(a_I+a_II), b_I/(b_I+b_II))`, `nu = (a_I+a_II, b_I+b_II)`.
    ChromaRatioSum,
    /// Every coordinate is sampled directly (`eta = xi`, empty `nu`).
    /// Used for one-parameter test targets.
    Direct,
}

/// One-to-one map between a parameter vector and its reduced form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReparamMap {
    pub kind: ReparamKind,
    pub dimension: usize,
}

impl ReparamMap {
    pub fn new(kind: ReparamKind, dimension: usize) -> Result<Self> {
        let ok = match kind {
            ReparamKind::WeightSum | ReparamKind::ShapeScale => dimension >= 2 && dimension.is_multiple_of(2),
            ReparamKind::ChromaRatioSum => dimension == 4 || dimension == 8,
            ReparamKind::Direct => dimension >= 1,
        };
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "{kind:?} map cannot have dimension {dimension}"
            )));
        }
        Ok(Self { kind, dimension })
    }

    /// Dimension of the sampled block `eta`.
    pub fn eta_dim(&self) -> usize {
        match self.kind {
            ReparamKind::Direct => self.dimension,
            _ => self.dimension / 2,
        }
    }

    pub fn nu_dim(&self) -> usize {
        self.dimension - self.eta_dim()
    }

    /// Ratio-type maps confine `eta` to `[0, 1]` and `nu` to `(0, inf)`.
    pub fn is_ratio(&self) -> bool {
        matches!(self.kind, ReparamKind::WeightSum | ReparamKind::ChromaRatioSum)
    }

    pub fn split(&self, xi: &ParameterVector) -> Result<ReducedParameters> {
        if xi.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: xi.len(),
            });
        }
        let x = xi.as_slice();
        Ok(match self.kind {
            ReparamKind::WeightSum | ReparamKind::ChromaRatioSum => {
                let pairs = self.dimension / 2;
                let mut eta = Vec::with_capacity(pairs);
                let mut nu = Vec::with_capacity(pairs);
                for i in 0..pairs {
                    let sum = x[2 * i] + x[2 * i + 1];
                    if sum <= 0.0 {
                        return Err(Error::DegeneratePair { pair: i });
                    }
                    eta.push(x[2 * i] / sum);
                    nu.push(sum);
                }
                ReducedParameters { eta, nu }
            }
            ReparamKind::ShapeScale => {
                let pairs = self.dimension / 2;
                ReducedParameters {
                    eta: (0..pairs).map(|i| x[2 * i + 1]).collect(),
                    nu: (0..pairs).map(|i| x[2 * i]).collect(),
                }
            }
            ReparamKind::Direct => ReducedParameters {
                eta: x.to_vec(),
                nu: Vec::new(),
            },
        })
    }

    /// Checks that `(eta, nu)` lies in the map's domain.
    pub fn check_domain(&self, eta: &[f64], nu: &[f64]) -> Result<()> {
        if eta.len() != self.eta_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.eta_dim(),
                got: eta.len(),
            });
        }
        if nu.len() != self.nu_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.nu_dim(),
                got: nu.len(),
            });
        }
        let bounded = self.is_ratio() || self.kind == ReparamKind::Direct;
        for (i, &e) in eta.iter().enumerate() {
            if !e.is_finite() || (bounded && !(0.0..=1.0).contains(&e)) || e < 0.0 {
                return Err(Error::DomainViolation(format!("eta[{i}] = {e}")));
            }
        }
        for (i, &v) in nu.iter().enumerate() {
            let bad = !v.is_finite() || v < 0.0 || (self.is_ratio() && v <= 0.0);
            if bad {
                return Err(Error::DomainViolation(format!("nu[{i}] = {v}")));
            }
        }
        Ok(())
    }

    pub fn restore(&self, reduced: &ReducedParameters) -> Result<ParameterVector> {
        self.restore_parts(&reduced.eta, &reduced.nu)
    }

    pub fn restore_parts(&self, eta: &[f64], nu: &[f64]) -> Result<ParameterVector> {
        self.check_domain(eta, nu)?;
        let mut xi = vec![0.0; self.dimension];
        match self.kind {
            ReparamKind::WeightSum | ReparamKind::ChromaRatioSum => {
                for i in 0..eta.len() {
                    xi[2 * i] = eta[i] * nu[i];
                    xi[2 * i + 1] = (1.0 - eta[i]) * nu[i];
                }
            }
            ReparamKind::ShapeScale => {
                for i in 0..eta.len() {
                    xi[2 * i] = nu[i];
                    xi[2 * i + 1] = eta[i];
                }
            }
            ReparamKind::Direct => xi.copy_from_slice(eta),
        }
        ParameterVector::new(xi)
    }

    /// Lower bound used when projecting `nu` back into the domain.
    pub fn nu_floor(&self) -> f64 {
        1e-8
    }
}

/// Relabelling applied to exchangeable `(eta_i, nu_i)` pairs after each sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortRule {
    #[default]
    None,
    /// Sort all pairs by ascending `eta`.
    SortAscending,
    /// Move the pair with the smallest `eta` to the front.
    SwapSmallerFirst,
}

/// Reorders `eta` by the rule and permutes `nu` with the same permutation.
/// When `nu` is shorter than `eta` only `eta` is permuted.
pub fn apply_sort_rule(rule: SortRule, eta: &mut [f64], nu: &mut [f64]) {
    let paired = nu.len() == eta.len();
    match rule {
        SortRule::None => {}
        SortRule::SortAscending => {
            let mut idx: Vec<usize> = (0..eta.len()).collect();
            idx.sort_by(|&a, &b| eta[a].total_cmp(&eta[b]));
            let e: Vec<f64> = idx.iter().map(|&i| eta[i]).collect();
            eta.copy_from_slice(&e);
            if paired {
                let n: Vec<f64> = idx.iter().map(|&i| nu[i]).collect();
                nu.copy_from_slice(&n);
            }
        }
        SortRule::SwapSmallerFirst => {
            if let Some(min) = (0..eta.len()).min_by(|&a, &b| eta[a].total_cmp(&eta[b])) {
                if eta[min] < eta[0] {
                    eta.swap(0, min);
                    if paired {
                        nu.swap(0, min);
                    }
                }
            }
        }
    }
}

/// `eta = (tanh(t) + 1) / 2`.
pub fn eta_from_unconstrained(t: f64) -> f64 {
    0.5 * (t.tanh() + 1.0)
}

/// Inverse of [`eta_from_unconstrained`]; `eta` must lie strictly inside (0, 1).
pub fn eta_to_unconstrained(eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::DomainViolation(format!(
            "eta = {eta} has no unconstrained image"
        )));
    }
    Ok((2.0 * eta - 1.0).atanh())
}

pub fn nu_from_unconstrained(t: f64) -> f64 {
    t.exp()
}

pub fn nu_to_unconstrained(nu: f64) -> Result<f64> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::DomainViolation(format!("nu = {nu} has no unconstrained image")));
    }
    Ok(nu.ln())
}

/// Maps `(eta, nu)` to the real-line coordinates sampled by the unconstrained
/// Langevin kernel.
pub fn to_unconstrained(reduced: &ReducedParameters) -> Result<ReducedParameters> {
    Ok(ReducedParameters {
        eta: reduced
            .eta
            .iter()
            .map(|&e| eta_to_unconstrained(e))
            .collect::<Result<_>>()?,
        nu: reduced
            .nu
            .iter()
            .map(|&v| nu_to_unconstrained(v))
            .collect::<Result<_>>()?,
    })
}

pub fn from_unconstrained(free: &ReducedParameters) -> ReducedParameters {
    ReducedParameters {
        eta: free.eta.iter().map(|&t| eta_from_unconstrained(t)).collect(),
        nu: free.nu.iter().map(|&t| nu_from_unconstrained(t)).collect(),
    }
}

/// A noisy response recorded on a strictly increasing time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    times: Vec<f64>,
    values: Vec<f64>,
    window: (f64, f64),
}

impl Observation {
    pub fn new(times: Vec<f64>, values: Vec<f64>, window: (f64, f64)) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                got: values.len(),
            });
        }
        if times.is_empty() {
            return Err(Error::InvalidConfig("observation has no points".into()));
        }
        if !(window.0 <= window.1) {
            return Err(Error::InvalidConfig(format!("bad window {window:?}")));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidConfig(
                "observation times must be strictly increasing".into(),
            ));
        }
        if times.iter().any(|t| !t.is_finite() || *t < window.0 || *t > window.1) {
            return Err(Error::InvalidConfig(
                "observation times must lie inside the recording window".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::DomainViolation("non-finite observation value".into()));
        }
        Ok(Self { times, values, window })
    }

    /// Observation whose window is the span of its own time grid.
    pub fn on_grid(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let window = match (times.first(), times.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => (0.0, 0.0),
        };
        Self::new(times, values, window)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Prior hyperparameters `(alpha, beta, gamma)` with the proposal and chain
/// settings shared by every sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Proposal standard deviations of the sampled block; a single entry is
    /// broadcast to every coordinate.
    pub proposal_sd: Vec<f64>,
    /// Standard deviation of the log-normal random walk on the noise variance.
    pub sigma2_log_sd: f64,
    /// Langevin step size.
    pub tau: f64,
    /// Langevin sub-chain length.
    pub m: usize,
    pub burn_in: usize,
    pub chain_length: usize,
    pub init_candidates: usize,
    pub sort_rule: SortRule,
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.alpha > 0.0) {
            return bad("alpha must be > 0");
        }
        if !(self.beta > 0.0) {
            return bad("beta must be > 0");
        }
        if !(self.gamma >= 0.0) {
            return bad("gamma must be >= 0");
        }
        if self.proposal_sd.is_empty() || self.proposal_sd.iter().any(|s| !(*s > 0.0)) {
            return bad("proposal sd must be > 0");
        }
        if !(self.sigma2_log_sd > 0.0) {
            return bad("sigma2 proposal sd must be > 0");
        }
        if !(self.tau > 0.0) {
            return bad("tau must be > 0");
        }
        if self.m == 0 {
            return bad("m must be positive");
        }
        if self.chain_length == 0 {
            return bad("chain length K must be positive");
        }
        if self.burn_in >= self.chain_length {
            return bad("burn-in B must be smaller than chain length K");
        }
        if self.init_candidates == 0 {
            return bad("init candidates M must be positive");
        }
        Ok(())
    }

    /// Proposal sd for coordinate `j` of the sampled block.
    pub fn sd(&self, j: usize) -> f64 {
        if self.proposal_sd.len() == 1 {
            self.proposal_sd[0]
        } else {
            self.proposal_sd[j]
        }
    }
}

/// One stored posterior draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub eta: Vec<f64>,
    pub nu: Vec<f64>,
    pub xi_hat: ParameterVector,
    pub sigma2: f64,
    /// `||R(xi_hat) - r_obs||_2`.
    pub loss: f64,
    /// Accepted proposals per block in this iteration.
    pub accepts: Vec<u32>,
    pub burn_in: bool,
}
