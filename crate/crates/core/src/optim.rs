//! Restoration of the complementary block: `nu_hat(eta) = argmin_nu L(eta, nu)`
//! by normalized gradient descent with shrinking backtracking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ForwardModel;
use crate::posterior::PosteriorContext;
use crate::types::{Observation, ParameterVector, ReparamKind, ReparamMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdSettings {
    pub max_iter: usize,
    /// Absolute length of the first trial step.
    pub step: f64,
    pub grad_tol: f64,
    pub backtrack_limit: usize,
    pub shrink: f64,
}

impl Default for GdSettings {
    fn default() -> Self {
        Self {
            max_iter: 500,
            step: 0.1,
            grad_tol: 1e-5,
            backtrack_limit: 100,
            shrink: 0.9,
        }
    }
}

impl GdSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 || self.backtrack_limit == 0 {
            return Err(Error::InvalidConfig("GD iteration limits must be positive".into()));
        }
        if !(self.step > 0.0) || !(self.grad_tol > 0.0) {
            return Err(Error::InvalidConfig("GD step and tolerance must be > 0".into()));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidConfig("GD shrink factor must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GdStatus {
    Converged,
    MaxIter,
    /// No shrunken step decreased the loss; the last point is returned.
    NoDescentDirection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdOutcome {
    pub nu: Vec<f64>,
    /// Final squared loss `||R - r_obs||^2`.
    pub objective: f64,
    pub initial_objective: f64,
    pub iterations: usize,
    pub status: GdStatus,
}

fn fd_probe(x: f64) -> f64 {
    1e-5 * x.abs().max(1.0)
}

/// Central-difference gradient with coordinate step `1e-5 max(1, |x_i|)`.
pub fn numerical_gradient<F>(mut f: F, x: &[f64]) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let h = fd_probe(x[i]);
        probe[i] = x[i] + h;
        let up = f(&probe)?;
        probe[i] = x[i] - h;
        let down = f(&probe)?;
        probe[i] = x[i];
        let g = (up - down) / (2.0 * h);
        if !g.is_finite() {
            return Err(Error::NonFiniteValue);
        }
        grad.push(g);
    }
    Ok(grad)
}

/// Gradient used inside the descent: central where both probes stay above
/// `floor` and evaluate, one-sided otherwise.
fn projected_gradient<F>(f: &mut F, x: &[f64], fx: f64, floor: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let h = fd_probe(x[i]);
        probe[i] = x[i] + h;
        let up = f(&probe).ok().filter(|v| v.is_finite());
        let down = if x[i] - h > floor {
            probe[i] = x[i] - h;
            f(&probe).ok().filter(|v| v.is_finite())
        } else {
            None
        };
        probe[i] = x[i];
        let g = match (up, down) {
            (Some(u), Some(d)) => (u - d) / (2.0 * h),
            (Some(u), None) => (u - fx) / h,
            (None, Some(d)) => (fx - d) / h,
            (None, None) => return Err(Error::NonFiniteValue),
        };
        grad.push(g);
    }
    Ok(grad)
}

/// Normalized gradient descent on an arbitrary objective, with iterates
/// projected onto `nu >= floor`. Points where the objective fails count as
/// non-improving during backtracking.
pub fn gradient_descent_with<F>(mut objective: F, nu0: &[f64], floor: f64, settings: &GdSettings) -> Result<GdOutcome>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    settings.validate()?;
    let mut nu: Vec<f64> = nu0.iter().map(|v| v.max(floor)).collect();
    let mut current = objective(&nu)?;
    if !current.is_finite() {
        return Err(Error::NonFiniteValue);
    }
    let initial = current;
    let mut status = GdStatus::MaxIter;
    let mut iterations = 0;
    let mut trial = vec![0.0; nu.len()];
    for _ in 0..settings.max_iter {
        let g = projected_gradient(&mut objective, &nu, current, floor)?;
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < settings.grad_tol {
            status = GdStatus::Converged;
            break;
        }
        iterations += 1;
        let mut scale = settings.step;
        let mut improved = None;
        for _ in 0..settings.backtrack_limit {
            for ((t, v), gi) in trial.iter_mut().zip(&nu).zip(&g) {
                *t = (v - scale * gi / norm).max(floor);
            }
            if let Ok(value) = objective(&trial) {
                if value < current {
                    improved = Some(value);
                    break;
                }
            }
            scale *= settings.shrink;
        }
        match improved {
            Some(value) => {
                nu.copy_from_slice(&trial);
                current = value;
            }
            None => {
                status = GdStatus::NoDescentDirection;
                break;
            }
        }
    }
    Ok(GdOutcome {
        nu,
        objective: current,
        initial_objective: initial,
        iterations,
        status,
    })
}

/// Restores `nu_hat(eta)` starting from `nu0` and returns it with
/// `xi_hat = g(eta, nu_hat)`.
pub fn gradient_descent(
    ctx: &PosteriorContext,
    eta: &[f64],
    nu0: &[f64],
    settings: &GdSettings,
) -> Result<(GdOutcome, ParameterVector)> {
    ctx.map.check_domain(eta, &vec![1.0; ctx.map.nu_dim()])?;
    let outcome = gradient_descent_with(|nu| ctx.ete_parts(eta, nu), nu0, ctx.map.nu_floor(), settings)?;
    let xi = ctx.map.restore_parts(eta, &outcome.nu)?;
    Ok((outcome, xi))
}

/// Starting `b_I + b_II` when nothing better is configured.
const CHROMA_NONLINEARITY_GUESS: f64 = 0.1;

/// Deterministic starting point for the descent. The flag is set when the
/// heuristic could not read the observation and the fallback was used.
pub fn nu_init(
    eta: &[f64],
    model: &ForwardModel,
    map: &ReparamMap,
    obs: &Observation,
    fallback: &[f64],
) -> (Vec<f64>, bool) {
    let k = map.nu_dim();
    let default = || -> Vec<f64> { (0..k).map(|i| fallback.get(i).copied().unwrap_or(1.0)).collect() };
    match map.kind {
        ReparamKind::Direct => (Vec::new(), false),
        ReparamKind::ChromaRatioSum => match (model, peak_locations(obs, 1)) {
            // Linear retention `t_R = T0 (1 + F a)` read at the tallest peak.
            (ForwardModel::Chroma(c), Some(peak)) if c.column.phase_ratio > 0.0 => {
                let t0 = c.column.dead_time();
                let a = (peak[0].0 / t0 - 1.0) / c.column.phase_ratio;
                if a > 0.0 {
                    let mut nu = default();
                    nu[0] = a;
                    if fallback.len() < 2 {
                        nu[1] = CHROMA_NONLINEARITY_GUESS;
                    }
                    (nu, false)
                } else {
                    (default(), true)
                }
            }
            _ => (default(), true),
        },
        ReparamKind::WeightSum => match peak_locations(obs, k) {
            Some(peaks) => {
                // Heavier weights go with taller peaks.
                let mut by_eta: Vec<usize> = (0..k).collect();
                by_eta.sort_by(|&a, &b| eta[a].total_cmp(&eta[b]));
                let mut by_height = peaks;
                by_height.sort_by(|a, b| a.1.total_cmp(&b.1));
                let mut nu = vec![0.0; k];
                for (slot, peak) in by_eta.iter().zip(&by_height) {
                    nu[*slot] = peak.0.max(map.nu_floor());
                }
                (nu, false)
            }
            None => (default(), true),
        },
        ReparamKind::ShapeScale => match mean_time(obs) {
            Some(mean) => {
                let start: Vec<f64> = eta
                    .iter()
                    .map(|&scale| (mean / scale.max(1e-3)).clamp(1.0, 50.0))
                    .collect();
                (shape_search(start, eta, model, map, obs), false)
            }
            None => (default(), true),
        },
    }
}

/// The `k` tallest well-separated local maxima of a lightly smoothed
/// observation as `(time, height)`, or `None` when fewer are found.
fn peak_locations(obs: &Observation, k: usize) -> Option<Vec<(f64, f64)>> {
    let v = obs.values();
    let t = obs.times();
    let n = v.len();
    if n < 3 {
        return None;
    }
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            v[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let top = smooth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(top > 0.0) {
        return None;
    }
    let radius = (n / 50).max(1);
    let mut peaks: Vec<(f64, f64)> = (0..n)
        .filter(|&i| {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(n - 1);
            smooth[i] > 0.1 * top
                && (lo..=hi).all(|j| j == i || smooth[j] < smooth[i] || (smooth[j] == smooth[i] && j > i))
        })
        .map(|i| (t[i], smooth[i]))
        .collect();
    // Tallest first, skipping maxima closer than span/(2k) to a kept one so
    // that noise splitting one peak does not hide a smaller separate peak.
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    let gap = (t[n - 1] - t[0]) / (2 * k) as f64;
    let mut kept: Vec<(f64, f64)> = Vec::with_capacity(k);
    for p in peaks {
        if kept.len() == k {
            break;
        }
        if kept.iter().all(|q| (q.0 - p.0).abs() >= gap) {
            kept.push(p);
        }
    }
    (kept.len() == k).then_some(kept)
}

/// Shapes tried per component by [`shape_search`].
const SHAPE_GRID: [f64; 12] = [1.1, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.5, 8.0, 11.0, 16.0, 25.0];

/// Lowest squared loss over `start` and every combination of
/// [`SHAPE_GRID`] values. Overlapping unweighted components leave no
/// separate peaks to read, and the moment guess alone can sit in the wrong
/// basin.
fn shape_search(start: Vec<f64>, eta: &[f64], model: &ForwardModel, map: &ReparamMap, obs: &Observation) -> Vec<f64> {
    let loss = |nu: &[f64]| -> f64 {
        map.restore_parts(eta, nu)
            .and_then(|xi| model.evaluate(&xi, obs.times()))
            .map(|r| r.iter().zip(obs.values()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .ok()
            .filter(|v| v.is_finite())
            .unwrap_or(f64::INFINITY)
    };
    let k = start.len();
    let mut best_loss = loss(&start);
    let mut best = start;
    let mut trial = vec![0.0; k];
    for code in 0..SHAPE_GRID.len().pow(k as u32) {
        let mut c = code;
        for slot in trial.iter_mut() {
            *slot = SHAPE_GRID[c % SHAPE_GRID.len()];
            c /= SHAPE_GRID.len();
        }
        let l = loss(&trial);
        if l < best_loss {
            best_loss = l;
            best.copy_from_slice(&trial);
        }
    }
    best
}

/// First moment of the observation treated as a non-negative density.
fn mean_time(obs: &Observation) -> Option<f64> {
    let (mut mass, mut moment) = (0.0, 0.0);
    for (t, r) in obs.times().iter().zip(obs.values()) {
        let w = r.max(0.0);
        mass += w;
        moment += w * t;
    }
    (mass > 0.0).then(|| moment / mass).filter(|m| *m > 0.0)
}
