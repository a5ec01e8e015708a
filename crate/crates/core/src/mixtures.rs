//! Closed-form mixture surrogates of the chromatography response.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::types::ParameterVector;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MixtureModel {
    /// `sum_i w_i phi(t - mu_i)` with `w_i = xi_{2i-1}/(xi_{2i-1}+xi_{2i})`
    /// and `mu_i = xi_{2i-1}+xi_{2i}`; unit-variance components.
    GaussianMixture { components: usize },
    /// Sum of two unweighted Gamma densities with shapes `xi_{2i-1}` and
    /// scales `xi_{2i}`.
    GammaMixture,
}

impl MixtureModel {
    pub fn gaussian(components: usize) -> Result<Self> {
        if components == 0 {
            return Err(Error::InvalidConfig("mixture needs components".into()));
        }
        Ok(Self::GaussianMixture { components })
    }

    pub fn dimension(&self) -> usize {
        match *self {
            MixtureModel::GaussianMixture { components } => 2 * components,
            MixtureModel::GammaMixture => 4,
        }
    }

    pub fn signal(&self, xi: &ParameterVector, t: f64) -> Result<f64> {
        self.check(xi)?;
        match self {
            MixtureModel::GaussianMixture { .. } => gaussian_mixture_signal(xi, t),
            MixtureModel::GammaMixture => gamma_mixture_signal(xi, t),
        }
    }

    fn check(&self, xi: &ParameterVector) -> Result<()> {
        if xi.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: xi.len(),
            });
        }
        Ok(())
    }

    /// Evaluates the signal at every grid time. Deterministic.
    pub fn evaluate(&self, xi: &ParameterVector, grid: &[f64]) -> Result<Vec<f64>> {
        self.check(xi)?;
        match self {
            MixtureModel::GaussianMixture { .. } => {
                let comps = gaussian_components(xi)?;
                if let Some((t0, h)) = uniform_spacing(grid) {
                    return Ok(gaussian_on_uniform_grid(&comps, t0, h, grid.len()));
                }
                Ok(grid
                    .iter()
                    .map(|&t| {
                        comps
                            .iter()
                            .map(|&(w, mu)| w * FRAC_1_SQRT_2PI * (-0.5 * (t - mu).powi(2)).exp())
                            .sum()
                    })
                    .collect())
            }
            MixtureModel::GammaMixture => {
                let comps = gamma_components(xi)?;
                grid.iter()
                    .map(|&t| {
                        if t > 0.0 {
                            let lt = t.ln();
                            Ok(comps.iter().map(|c| c.density_at_log(t, lt)).sum())
                        } else {
                            comps.iter().map(|c| c.density(t)).sum()
                        }
                    })
                    .collect()
            }
        }
    }
}

fn gaussian_components(xi: &ParameterVector) -> Result<Vec<(f64, f64)>> {
    let x = xi.as_slice();
    if !x.len().is_multiple_of(2) {
        return Err(Error::DimensionMismatch {
            expected: x.len() + 1,
            got: x.len(),
        });
    }
    x.chunks_exact(2)
        .enumerate()
        .map(|(i, p)| {
            let sum = p[0] + p[1];
            if sum <= 0.0 {
                Err(Error::DegeneratePair { pair: i })
            } else {
                Ok((p[0] / sum, sum))
            }
        })
        .collect()
}

/// `(t_0, h)` when `grid` has three or more points at spacing `h` up to
/// rounding.
fn uniform_spacing(grid: &[f64]) -> Option<(f64, f64)> {
    let n = grid.len();
    if n < 3 {
        return None;
    }
    let h = (grid[n - 1] - grid[0]) / (n - 1) as f64;
    let tol = 1e-12 * grid[0].abs().max(grid[n - 1].abs()).max(h.abs());
    (h > 0.0
        && grid
            .iter()
            .enumerate()
            .all(|(i, &t)| (t - (grid[0] + h * i as f64)).abs() <= tol))
    .then_some((grid[0], h))
}

/// Unit-variance Gaussian mixture on `t_i = t_0 + i h` with two `exp` calls
/// per component: walking away from the node nearest `mu`, consecutive
/// values differ by the factor `exp(-d h - h^2/2)`, which itself shrinks by
/// `exp(-h^2)` per node. Factors never exceed one, so nothing overflows and
/// the relative error grows like `n^2` ulps.
fn gaussian_on_uniform_grid(comps: &[(f64, f64)], t0: f64, h: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let q = (-h * h).exp();
    for &(w, mu) in comps {
        let a = w * FRAC_1_SQRT_2PI;
        if a == 0.0 {
            continue;
        }
        let c = ((mu - t0) / h).round().clamp(0.0, (n - 1) as f64) as usize;
        let d = t0 + h * c as f64 - mu;
        let peak = (-0.5 * d * d).exp();
        out[c] += a * peak;
        let (mut e, mut r) = (peak, (-d * h - 0.5 * h * h).exp());
        for slot in &mut out[c + 1..] {
            e *= r;
            if e == 0.0 {
                break;
            }
            r *= q;
            *slot += a * e;
        }
        let (mut e, mut r) = (peak, (d * h - 0.5 * h * h).exp());
        for slot in out[..c].iter_mut().rev() {
            e *= r;
            if e == 0.0 {
                break;
            }
            r *= q;
            *slot += a * e;
        }
    }
    out
}

pub fn gaussian_mixture_signal(xi: &ParameterVector, t: f64) -> Result<f64> {
    Ok(gaussian_components(xi)?
        .iter()
        .map(|&(w, mu)| w * FRAC_1_SQRT_2PI * (-0.5 * (t - mu).powi(2)).exp())
        .sum())
}

struct GammaComponent {
    shape: f64,
    scale: f64,
    log_norm: f64,
}

impl GammaComponent {
    fn density(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::DomainViolation(format!("gamma density at t = {t}")));
        }
        if t == 0.0 {
            return if self.shape > 1.0 {
                Ok(0.0)
            } else if self.shape == 1.0 {
                Ok(1.0 / self.scale)
            } else {
                Err(Error::DomainViolation(format!(
                    "gamma density with shape {} is unbounded at t = 0",
                    self.shape
                )))
            };
        }
        Ok(self.density_at_log(t, t.ln()))
    }

    /// Density at `t > 0` given `lt = ln t`.
    fn density_at_log(&self, t: f64, lt: f64) -> f64 {
        ((self.shape - 1.0) * lt - t / self.scale - self.log_norm).exp()
    }
}

fn gamma_components(xi: &ParameterVector) -> Result<Vec<GammaComponent>> {
    if xi.len() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: xi.len(),
        });
    }
    xi.as_slice()
        .chunks_exact(2)
        .map(|p| {
            let (shape, scale) = (p[0], p[1]);
            if !(shape > 0.0 && scale > 0.0) {
                return Err(Error::DomainViolation(format!(
                    "gamma shape {shape} and scale {scale} must be positive"
                )));
            }
            Ok(GammaComponent {
                shape,
                scale,
                log_norm: ln_gamma(shape) + shape * scale.ln(),
            })
        })
        .collect()
}

pub fn gamma_mixture_signal(xi: &ParameterVector, t: f64) -> Result<f64> {
    gamma_components(xi)?.iter().map(|c| c.density(t)).sum()
}

/// `n` equally spaced points on `[start, end]`, both endpoints included.
pub fn equally_spaced(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let h = (end - start) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { end } else { start + h * i as f64 })
                .collect()
        }
    }
}
