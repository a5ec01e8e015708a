//! Chain post-processing: summaries, acceptance rates, credible bands, the
//! relative-error metric and repeated-trial aggregation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ForwardModel;
use crate::samplers::Chain;
use crate::types::ParameterVector;

/// Probability levels reported by [`ChainSummary`].
pub const SUMMARY_LEVELS: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

/// Type-7 (linear interpolation) quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Type-7 quantile by selection, without sorting the whole sample.
pub fn quantile_select(data: &[f64], p: f64) -> f64 {
    let n = data.len();
    let mut work = data.to_vec();
    if n == 1 {
        return work[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let (_, &mut a, upper) = work.select_nth_unstable_by(lo, f64::total_cmp);
    let b = if lo + 1 < n {
        upper.iter().copied().fold(f64::INFINITY, f64::min)
    } else {
        a
    };
    a + (h - lo as f64) * (b - a)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (`n - 1` denominator; 0 for a single value).
pub fn sd(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// Batch-means estimate of the Monte Carlo standard error of the mean, with
/// `floor(sqrt(n))` batches.
pub fn batch_means_mcse(x: &[f64]) -> f64 {
    let n = x.len();
    let batches = (n as f64).sqrt().floor() as usize;
    if batches < 2 {
        return f64::NAN;
    }
    let size = n / batches;
    let means: Vec<f64> = (0..batches).map(|b| mean(&x[b * size..(b + 1) * size])).collect();
    let var_batch = sd(&means).powi(2);
    (var_batch / batches as f64).sqrt()
}

/// Effective sample size from batch means: `n * var / (size * var_batch)`.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    let mcse = batch_means_mcse(x);
    let s = sd(x);
    if !(mcse > 0.0) {
        return n as f64;
    }
    (s * s / (mcse * mcse)).min(n as f64)
}

/// Per-coordinate summary of the post-burn-in draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    /// At [`SUMMARY_LEVELS`].
    pub quantiles: [f64; 5],
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub kept: usize,
    pub coordinates: Vec<CoordinateSummary>,
    pub acceptance: Vec<(String, f64)>,
}

impl ChainSummary {
    pub fn get(&self, name: &str) -> Option<&CoordinateSummary> {
        self.coordinates.iter().find(|c| c.name == name)
    }
}

/// Named traces of the post-burn-in draws: `eta_*`, `nu_*`, `xi_*`, `sigma2`,
/// `loss`.
pub fn traces(chain: &Chain) -> Vec<(String, Vec<f64>)> {
    let kept: Vec<_> = chain.kept().collect();
    let mut out = Vec::new();
    let Some(first) = kept.first() else {
        return out;
    };
    for j in 0..first.eta.len() {
        out.push((format!("eta_{}", j + 1), kept.iter().map(|r| r.eta[j]).collect()));
    }
    for j in 0..first.nu.len() {
        out.push((format!("nu_{}", j + 1), kept.iter().map(|r| r.nu[j]).collect()));
    }
    for j in 0..first.xi_hat.len() {
        out.push((format!("xi_{}", j + 1), kept.iter().map(|r| r.xi_hat[j]).collect()));
    }
    out.push(("sigma2".into(), kept.iter().map(|r| r.sigma2).collect()));
    out.push(("loss".into(), kept.iter().map(|r| r.loss).collect()));
    out
}

pub fn summarize(chain: &Chain) -> Result<ChainSummary> {
    let acceptance = acceptance_rates(chain)?;
    let coordinates = traces(chain)
        .into_iter()
        .map(|(name, x)| {
            let mut sorted = x.clone();
            sorted.sort_by(f64::total_cmp);
            CoordinateSummary {
                mean: mean(&x),
                sd: sd(&x),
                quantiles: SUMMARY_LEVELS.map(|p| quantile_sorted(&sorted, p)),
                ess: effective_sample_size(&x),
                name,
            }
        })
        .collect();
    Ok(ChainSummary {
        kept: chain.kept().count(),
        coordinates,
        acceptance,
    })
}

/// Fraction of accepted proposals per block over the post-burn-in records.
pub fn acceptance_rates(chain: &Chain) -> Result<Vec<(String, f64)>> {
    let kept: Vec<_> = chain.kept().collect();
    if kept.is_empty() {
        return Err(Error::EmptyChain);
    }
    Ok(chain
        .blocks
        .iter()
        .enumerate()
        .map(|(b, name)| {
            let accepted: u64 = kept.iter().map(|r| r.accepts[b] as u64).sum();
            let tried = kept.len() as u64 * chain.attempts[b].max(1) as u64;
            (name.clone(), accepted as f64 / tried as f64)
        })
        .collect())
}

/// Pointwise credible band of a set of curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub times: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Pointwise `(1 - level)/2` and `(1 + level)/2` quantiles across curves.
pub fn band_from_curves(times: &[f64], curves: &[Vec<f64>], level: f64) -> Result<Band> {
    if curves.is_empty() {
        return Err(Error::EmptyChain);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!("band level {level} outside (0, 1)")));
    }
    let (lo_p, hi_p) = ((1.0 - level) / 2.0, (1.0 + level) / 2.0);
    let mut lower = Vec::with_capacity(times.len());
    let mut upper = Vec::with_capacity(times.len());
    let mut column = vec![0.0; curves.len()];
    for i in 0..times.len() {
        for (c, curve) in column.iter_mut().zip(curves) {
            *c = curve[i];
        }
        column.sort_by(f64::total_cmp);
        lower.push(quantile_sorted(&column, lo_p));
        upper.push(quantile_sorted(&column, hi_p));
    }
    Ok(Band {
        times: times.to_vec(),
        lower,
        upper,
    })
}

/// `R(xi_hat, t)` on `grid` for every post-burn-in record. Consecutive repeats
/// of the same parameters reuse the previous curve.
pub fn posterior_curves(chain: &Chain, model: &ForwardModel, grid: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut curves: Vec<Vec<f64>> = Vec::new();
    let mut last: Option<&ParameterVector> = None;
    for r in chain.kept() {
        if last == Some(&r.xi_hat) {
            let c = curves.last().cloned().unwrap_or_default();
            curves.push(c);
        } else {
            curves.push(model.evaluate(&r.xi_hat, grid)?);
        }
        last = Some(&r.xi_hat);
    }
    if curves.is_empty() {
        return Err(Error::EmptyChain);
    }
    Ok(curves)
}

pub fn credible_band(chain: &Chain, model: &ForwardModel, grid: &[f64], level: f64) -> Result<Band> {
    band_from_curves(grid, &posterior_curves(chain, model, grid)?, level)
}

/// `||a - b||_2 / ||b||_2`.
pub fn relative_error_curves(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: b.len(),
            got: a.len(),
        });
    }
    let den = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let num = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    Ok(num / den)
}

pub fn relative_error(
    xi_hat: &ParameterVector,
    xi_star: &ParameterVector,
    model: &ForwardModel,
    grid: &[f64],
) -> Result<f64> {
    relative_error_curves(&model.evaluate(xi_hat, grid)?, &model.evaluate(xi_star, grid)?)
}

/// Largest relative error of the band's two bounding curves.
pub fn band_max_relative_error(band: &Band, truth: &[f64]) -> Result<f64> {
    Ok(relative_error_curves(&band.lower, truth)?.max(relative_error_curves(&band.upper, truth)?))
}

/// One repetition's headline numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub seed: u64,
    pub eta_mean: Vec<f64>,
    pub nu_mean: Vec<f64>,
    /// Max relative error of the 95% band, when a truth is known.
    pub max_re: Option<f64>,
}

impl TrialSummary {
    pub fn from_chain(chain: &Chain, max_re: Option<f64>) -> Result<Self> {
        let kept: Vec<_> = chain.kept().collect();
        let first = kept.first().ok_or(Error::EmptyChain)?;
        let col = |f: &dyn Fn(&crate::types::ChainRecord) -> f64| mean(&kept.iter().map(|r| f(r)).collect::<Vec<_>>());
        Ok(Self {
            seed: chain.seed,
            eta_mean: (0..first.eta.len()).map(|j| col(&|r| r.eta[j])).collect(),
            nu_mean: (0..first.nu.len()).map(|j| col(&|r| r.nu[j])).collect(),
            max_re,
        })
    }
}

/// Outcome of one repetition; failures keep their seed and message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrialOutcome {
    Ok(TrialSummary),
    Failed { seed: u64, kind: String, message: String },
}

impl TrialOutcome {
    pub fn seed(&self) -> u64 {
        match self {
            TrialOutcome::Ok(s) => s.seed,
            TrialOutcome::Failed { seed, .. } => *seed,
        }
    }
}

/// Across-trial mean and sd of each headline quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialAggregate {
    pub succeeded: usize,
    pub failed: Vec<u64>,
    pub eta: Vec<(f64, f64)>,
    pub nu: Vec<(f64, f64)>,
    pub max_re: Option<(f64, f64)>,
}

/// Runs `trial` once per seed, keeping going after failures.
pub fn repeated_trials<F>(seeds: &[u64], trial: F) -> Vec<TrialOutcome>
where
    F: Fn(u64) -> Result<TrialSummary>,
{
    seeds
        .iter()
        .map(|&seed| match trial(seed) {
            Ok(s) => TrialOutcome::Ok(s),
            Err(e) => TrialOutcome::Failed {
                seed,
                kind: e.kind().to_string(),
                message: e.to_string(),
            },
        })
        .collect()
}

/// Aggregates trial outcomes. Trials are ordered by seed first, so the result
/// does not depend on completion order.
pub fn aggregate_trials(outcomes: &[TrialOutcome]) -> Result<TrialAggregate> {
    let mut sorted: Vec<&TrialOutcome> = outcomes.iter().collect();
    sorted.sort_by_key(|o| o.seed());
    let ok: Vec<&TrialSummary> = sorted
        .iter()
        .filter_map(|o| match o {
            TrialOutcome::Ok(s) => Some(s),
            TrialOutcome::Failed { .. } => None,
        })
        .collect();
    let failed = sorted
        .iter()
        .filter(|o| matches!(o, TrialOutcome::Failed { .. }))
        .map(|o| o.seed())
        .collect();
    let first = ok.first().ok_or(Error::EmptyChain)?;
    let stat = |values: Vec<f64>| (mean(&values), sd(&values));
    let eta = (0..first.eta_mean.len())
        .map(|j| stat(ok.iter().map(|s| s.eta_mean[j]).collect()))
        .collect();
    let nu = (0..first.nu_mean.len())
        .map(|j| stat(ok.iter().map(|s| s.nu_mean[j]).collect()))
        .collect();
    let res: Vec<f64> = ok.iter().filter_map(|s| s.max_re).collect();
    Ok(TrialAggregate {
        succeeded: ok.len(),
        failed,
        eta,
        nu,
        max_re: (!res.is_empty()).then(|| stat(res)),
    })
}

/// Table with one row per labelled aggregate and `mean(sd)` cells.
pub fn aggregate_table(rows: &[(String, TrialAggregate)]) -> String {
    let Some((_, first)) = rows.first() else {
        return String::new();
    };
    let mut header = vec!["sampler".to_string()];
    header.extend((1..=first.eta.len()).map(|j| format!("eta_{j}")));
    header.extend((1..=first.nu.len()).map(|j| format!("nu_{j}")));
    header.push("max_re_95".into());
    header.push("trials".into());
    let cell = |(m, s): (f64, f64)| format!("{m:.4}({s:.4})");
    let mut out = header.join(",");
    out.push('\n');
    for (label, agg) in rows {
        let mut line = vec![label.clone()];
        line.extend(agg.eta.iter().copied().map(cell));
        line.extend(agg.nu.iter().copied().map(cell));
        line.push(agg.max_re.map(cell).unwrap_or_else(|| "NA".into()));
        line.push(format!("{}/{}", agg.succeeded, agg.succeeded + agg.failed.len()));
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quantile_methods_agree() {
        let data = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        let mut sorted = data.to_vec();
        sorted.sort_by(f64::total_cmp);
        for p in [0.0, 0.025, 0.25, 0.5, 0.75, 0.975, 1.0] {
            assert_abs_diff_eq!(quantile_sorted(&sorted, p), quantile_select(&data, p), epsilon = 1e-12);
        }
        assert_eq!(quantile_sorted(&sorted, 0.5), 3.5);
    }

    #[test]
    fn relative_error_basics() {
        assert_eq!(relative_error_curves(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(relative_error_curves(&[1.0], &[0.0]), Err(Error::ZeroSignal));
        let a = [1.0, 2.0, 2.5];
        let b = [1.5, 2.0, 2.0];
        let r = relative_error_curves(&a, &b).unwrap();
        let scaled: Vec<f64> = a.iter().map(|v| 7.0 * v).collect();
        let scaled_b: Vec<f64> = b.iter().map(|v| 7.0 * v).collect();
        assert_abs_diff_eq!(relative_error_curves(&scaled, &scaled_b).unwrap(), r, epsilon = 1e-15);
    }

    #[test]
    fn identical_curves_give_zero_width_band() {
        let curve = vec![0.1, 0.5, 0.2];
        let band = band_from_curves(&[0.0, 1.0, 2.0], &vec![curve.clone(); 10], 0.95).unwrap();
        assert_eq!(band.lower, curve);
        assert_eq!(band.upper, curve);
        assert!(band_from_curves(&[0.0], &[], 0.95).is_err());
    }

    #[test]
    fn single_trial_has_zero_sd() {
        let t = TrialOutcome::Ok(TrialSummary {
            seed: 1,
            eta_mean: vec![0.4, 0.6],
            nu_mean: vec![3.0, 0.15],
            max_re: Some(0.03),
        });
        let agg = aggregate_trials(&[t]).unwrap();
        assert!(agg.eta.iter().chain(&agg.nu).all(|(_, s)| *s == 0.0));
        assert_eq!(agg.max_re, Some((0.03, 0.0)));
    }

    #[test]
    fn batch_means_on_iid_data() {
        // Alternating values: batch means are nearly constant.
        let x: Vec<f64> = (0..10_000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(batch_means_mcse(&x) < 1e-3);
    }
}
