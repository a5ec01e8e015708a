//! Proposal and prior distributions shared by the samplers.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Upper tail `P(Z > x)` of the standard normal.
fn upper_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Inverse of [`upper_tail`].
fn upper_tail_inv(p: f64) -> f64 {
    std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Normal `N(mu, sd^2)` restricted to `[lo, hi]`; `hi` may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNormal {
    pub mu: f64,
    pub sd: f64,
    pub lo: f64,
    pub hi: f64,
}

impl TruncatedNormal {
    pub fn new(mu: f64, sd: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !(sd > 0.0) || !mu.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "truncated normal needs lo < hi and sd > 0 (mu {mu}, sd {sd}, [{lo}, {hi}])"
            )));
        }
        Ok(Self { mu, sd, lo, hi })
    }

    fn bounds(&self) -> (f64, f64) {
        ((self.lo - self.mu) / self.sd, (self.hi - self.mu) / self.sd)
    }

    /// Log of the probability mass of `[lo, hi]` under the untruncated normal.
    pub fn ln_mass(&self) -> f64 {
        let (a, b) = self.bounds();
        let mass = if a > 0.0 {
            upper_tail(a) - upper_tail(b)
        } else if b < 0.0 {
            upper_tail(-b) - upper_tail(-a)
        } else {
            1.0 - upper_tail(b) - upper_tail(-a)
        };
        mass.ln()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            return f64::NEG_INFINITY;
        }
        let z = (x - self.mu) / self.sd;
        -0.5 * z * z - LN_SQRT_2PI - self.sd.ln() - self.ln_mass()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (a, b) = self.bounds();
        if self.ln_mass() > (0.25f64).ln() {
            loop {
                let z: f64 = rng.sample(StandardNormal);
                if z >= a && z <= b {
                    return self.mu + self.sd * z;
                }
            }
        }
        let u: f64 = rng.random();
        let z = if a >= 0.0 {
            let (qa, qb) = (upper_tail(a), upper_tail(b));
            upper_tail_inv(qa - u * (qa - qb))
        } else if b <= 0.0 {
            let (qa, qb) = (upper_tail(-b), upper_tail(-a));
            -upper_tail_inv(qa - u * (qa - qb))
        } else {
            let (pa, pb) = (upper_tail(-a), upper_tail(-b));
            -upper_tail_inv(pa + u * (pb - pa))
        };
        (self.mu + self.sd * z).clamp(self.lo, self.hi)
    }
}

/// Log Hastings ratio `ln q(x | x') - ln q(x' | x)` of a truncated-normal
/// random walk with fixed sd: only the normalizers differ.
pub fn tn_log_hastings(x: f64, x_new: f64, sd: f64, lo: f64, hi: f64) -> Result<f64> {
    let forward = TruncatedNormal::new(x, sd, lo, hi)?;
    let backward = TruncatedNormal::new(x_new, sd, lo, hi)?;
    Ok(forward.ln_mass() - backward.ln_mass())
}

/// Inverse-gamma `IG(shape, scale)` draw: the reciprocal of a Gamma draw with
/// rate `scale`.
pub fn inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    let g = Gamma::new(shape, 1.0 / scale).map_err(|e| Error::InvalidConfig(format!("inverse gamma: {e}")))?;
    Ok(1.0 / g.sample(rng))
}

/// Log-normal random walk on a positive scalar. Returns the proposal and the
/// log Hastings term `ln x' - ln x`.
pub fn lognormal_step<R: Rng + ?Sized>(x: f64, sd: f64, rng: &mut R) -> (f64, f64) {
    let z: f64 = rng.sample(StandardNormal);
    let step = sd * z;
    (x * step.exp(), step)
}
