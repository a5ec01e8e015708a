//! Run configuration: a sectioned TOML file with units in the key names where
//! a physical unit applies, plus the shipped presets.

use std::path::{Path, PathBuf};

use isofit_core::chroma::{ChromaModel, ColumnConfig};
use isofit_core::mixtures::{equally_spaced, MixtureModel};
use isofit_core::optim::GdSettings;
use isofit_core::posterior::Sigma2Rule;
use isofit_core::samplers::{EtaUpdate, QldForm, RestoreMode, SamplerKind, SamplerSettings};
use isofit_core::{ForwardModel, Hyperparameters, Observation, PosteriorContext, ReparamKind, ReparamMap, SortRule};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    GaussianMixture,
    GammaMixture,
    Chromatography,
    /// `R = xi_1 t`; useful for checking samplers against a closed form.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub family: ModelFamily,
    /// Mixture components, or solutes for the column (1 or 2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<usize>,
    pub reparam: ReparamKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<ColumnConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Generating parameters for synthetic data; also the reference curve for
    /// relative errors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<f64>>,
    #[serde(default)]
    pub noise_variance: f64,
    pub grid_start: f64,
    pub grid_end: f64,
    pub grid_points: usize,
    pub window_start: f64,
    pub window_end: f64,
    /// Seed of the synthetic noise, separate from the sampler seed so that
    /// repeated fits see the same observation.
    pub seed: u64,
    /// Observation file with header `t,r`; replaces the synthetic data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    pub alpha: f64,
    /// Fixed `beta`; when absent it is set from the initial fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub gamma: f64,
}

fn default_sigma2_log_sd() -> f64 {
    0.1
}

fn default_unconstrained_sd() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub kind: SamplerKind,
    pub chain_length: usize,
    pub burn_in: usize,
    pub init_candidates: usize,
    pub proposal_sd: Vec<f64>,
    #[serde(default = "default_sigma2_log_sd")]
    pub sigma2_log_sd: f64,
    pub tau: f64,
    pub m: usize,
    #[serde(default)]
    pub sort_rule: SortRule,
    #[serde(default)]
    pub eta_update: EtaUpdate,
    #[serde(default)]
    pub restore: RestoreMode,
    #[serde(default)]
    pub qld: QldForm,
    #[serde(default)]
    pub sigma2_rule: Sigma2Rule,
    #[serde(default)]
    pub unconstrained: bool,
    #[serde(default = "default_unconstrained_sd")]
    pub unconstrained_sd: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nu_fallback: Vec<f64>,
}

fn default_band_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    #[serde(default = "default_band_level")]
    pub band_level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub data: DataSection,
    pub prior: PriorSection,
    pub sampler: SamplerSection,
    #[serde(default = "GdSettings::default")]
    pub gd: GdSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_gd: Option<GdSettings>,
    pub run: RunSection,
}

/// Shipped experiment presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Case1,
    Case2,
    Case3,
    Chroma,
}

impl std::str::FromStr for Preset {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "case1" => Ok(Preset::Case1),
            "case2" => Ok(Preset::Case2),
            "case3" => Ok(Preset::Case3),
            "chroma" => Ok(Preset::Chroma),
            other => Err(CliError::Config(format!("unknown preset {other}"))),
        }
    }
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Case1 => "case1",
            Preset::Case2 => "case2",
            Preset::Case3 => "case3",
            Preset::Chroma => "chroma",
        }
    }

    /// The preset configured for `kind`. Settings that differ between samplers
    /// (proposal sds, Langevin step, unconstrained moves) follow the kind.
    pub fn config(&self, kind: SamplerKind) -> RunConfig {
        let malg = kind == SamplerKind::Malg;
        let mut sampler = SamplerSection {
            kind,
            chain_length: 10_000,
            burn_in: 500,
            init_candidates: 1000,
            proposal_sd: vec![0.02],
            sigma2_log_sd: default_sigma2_log_sd(),
            tau: 0.001,
            m: 200,
            sort_rule: SortRule::SortAscending,
            eta_update: EtaUpdate::Block,
            restore: RestoreMode::PerSweep,
            qld: QldForm::Squared,
            sigma2_rule: Sigma2Rule::Exact,
            unconstrained: false,
            unconstrained_sd: default_unconstrained_sd(),
            nu_fallback: Vec::new(),
        };
        let prior = |gamma| PriorSection {
            alpha: 2.0,
            beta: None,
            gamma,
        };
        let run = RunSection {
            seed: 1,
            band_level: default_band_level(),
        };
        match self {
            Preset::Case1 => RunConfig {
                model: ModelSection {
                    family: ModelFamily::GaussianMixture,
                    components: Some(2),
                    reparam: ReparamKind::WeightSum,
                    column: None,
                },
                data: synthetic(
                    vec![1.0 / 3.0, 2.0 / 3.0, 8.0 / 3.0, 4.0 / 3.0],
                    (-2.0, 7.0),
                    50,
                    (-2.0, 7.0),
                ),
                prior: prior(8.0),
                sampler,
                gd: GdSettings::default(),
                init_gd: None,
                run,
            },
            Preset::Case2 => RunConfig {
                model: ModelSection {
                    family: ModelFamily::GaussianMixture,
                    components: Some(4),
                    reparam: ReparamKind::WeightSum,
                    column: None,
                },
                data: synthetic(
                    vec![1.0 / 6.0, 5.0 / 6.0, 2.5, 2.5, 16.0 / 3.0, 8.0 / 3.0, 9.0, 3.0],
                    (-4.0, 15.0),
                    100,
                    (-4.0, 15.0),
                ),
                prior: prior(10.0),
                sampler,
                gd: GdSettings::default(),
                init_gd: None,
                run,
            },
            Preset::Case3 => {
                sampler.sort_rule = SortRule::None;
                sampler.tau = 0.0002;
                sampler.proposal_sd = match kind {
                    SamplerKind::Mgdg => vec![0.08, 0.33],
                    SamplerKind::Malg => vec![0.05, 0.15],
                    SamplerKind::Mwg => vec![0.02],
                };
                RunConfig {
                    model: ModelSection {
                        family: ModelFamily::GammaMixture,
                        components: None,
                        reparam: ReparamKind::ShapeScale,
                        column: None,
                    },
                    data: synthetic(vec![4.0, 0.75, 2.0, 0.25], (0.0, 10.0), 200, (0.0, 10.0)),
                    prior: prior(8.0),
                    sampler,
                    // The steep loss stops most descents on the backtracking
                    // limit after ~100 slow iterations; by 40 the remaining
                    // decrease is below 1e-4 of E'E.
                    gd: GdSettings {
                        max_iter: 40,
                        ..GdSettings::default()
                    },
                    init_gd: None,
                    run,
                }
            }
            Preset::Chroma => {
                sampler.sort_rule = SortRule::None;
                sampler.chain_length = 3000;
                sampler.init_candidates = 600;
                sampler.tau = 1e-8;
                sampler.m = 20;
                sampler.unconstrained = malg;
                sampler.unconstrained_sd = 0.05;
                RunConfig {
                    model: ModelSection {
                        family: ModelFamily::Chromatography,
                        components: Some(1),
                        reparam: ReparamKind::ChromaRatioSum,
                        column: Some(ColumnConfig::experiment()),
                    },
                    data: synthetic(vec![2.0, 1.0, 0.1, 0.05], (300.0, 500.0), 100, (0.0, 750.0)),
                    prior: prior(8.0),
                    sampler,
                    // The loss valley in (a_I + a_II, b_I + b_II) is long and
                    // narrow; a few descent steps reach the noise floor while
                    // a full run would spend thousands of solves crawling.
                    gd: GdSettings {
                        max_iter: 10,
                        ..GdSettings::default()
                    },
                    init_gd: None,
                    run,
                }
            }
        }
    }
}

fn synthetic(truth: Vec<f64>, grid: (f64, f64), n: usize, window: (f64, f64)) -> DataSection {
    DataSection {
        truth: Some(truth),
        noise_variance: 0.001,
        grid_start: grid.0,
        grid_end: grid.1,
        grid_points: n,
        window_start: window.0,
        window_end: window.1,
        seed: 7,
        observation_csv: None,
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let mut cfg = Self::from_toml_str(&text)?;
        // Observation paths are relative to the config file.
        if let (Some(obs), Some(dir)) = (&cfg.data.observation_csv, path.parent()) {
            if obs.is_relative() {
                cfg.data.observation_csv = Some(dir.join(obs));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn sha256(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml_string()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn model(&self) -> Result<ForwardModel> {
        let m = &self.model;
        Ok(match m.family {
            ModelFamily::GaussianMixture => {
                let k = m
                    .components
                    .ok_or_else(|| CliError::Config("gaussian mixture needs components".into()))?;
                ForwardModel::Mixture(MixtureModel::gaussian(k)?)
            }
            ModelFamily::GammaMixture => ForwardModel::Mixture(MixtureModel::GammaMixture),
            ModelFamily::Chromatography => {
                let column = m
                    .column
                    .clone()
                    .ok_or_else(|| CliError::Config("chromatography needs a [model.column] table".into()))?;
                let solutes = m.components.unwrap_or(1);
                ForwardModel::Chroma(ChromaModel::new(column, 4 * solutes)?)
            }
            ModelFamily::Linear => ForwardModel::Linear,
        })
    }

    pub fn map(&self) -> Result<ReparamMap> {
        Ok(ReparamMap::new(self.model.reparam, self.model()?.dimension())?)
    }

    pub fn grid(&self) -> Vec<f64> {
        equally_spaced(self.data.grid_start, self.data.grid_end, self.data.grid_points)
    }

    pub fn hyperparameters(&self) -> Hyperparameters {
        let s = &self.sampler;
        Hyperparameters {
            alpha: self.prior.alpha,
            // Placeholder until the automatic rule runs.
            beta: self.prior.beta.unwrap_or(1.0),
            gamma: self.prior.gamma,
            proposal_sd: s.proposal_sd.clone(),
            sigma2_log_sd: s.sigma2_log_sd,
            tau: s.tau,
            m: s.m,
            burn_in: s.burn_in,
            chain_length: s.chain_length,
            init_candidates: s.init_candidates,
            sort_rule: s.sort_rule,
        }
    }

    pub fn settings(&self) -> SamplerSettings {
        let s = &self.sampler;
        SamplerSettings {
            kind: s.kind,
            gd: self.gd,
            init_gd: self.init_gd,
            sigma2_rule: s.sigma2_rule,
            beta_auto: self.prior.beta.is_none(),
            qld: s.qld,
            eta_update: s.eta_update,
            restore: s.restore,
            unconstrained: s.unconstrained,
            unconstrained_sd: s.unconstrained_sd,
            nu_fallback: s.nu_fallback.clone(),
        }
    }

    /// Checks everything that can be checked without running a model.
    pub fn validate(&self) -> Result<()> {
        let model = self.model()?;
        let map = self.map()?;
        self.hyperparameters().validate()?;
        self.settings().validate()?;
        let d = &self.data;
        if let Some(truth) = &d.truth {
            if truth.len() != model.dimension() {
                return Err(CliError::Config(format!(
                    "truth has {} entries, model has {} parameters",
                    truth.len(),
                    model.dimension()
                )));
            }
        }
        match &d.observation_csv {
            Some(path) if !path.is_file() => {
                return Err(CliError::Config(format!(
                    "observation file {} not found",
                    path.display()
                )));
            }
            Some(_) => {}
            None => {
                if d.truth.is_none() {
                    return Err(CliError::Config("need a truth or an observation file".into()));
                }
                if d.grid_points < 2 || !(d.grid_start < d.grid_end) {
                    return Err(CliError::Config("grid needs two or more increasing points".into()));
                }
                if d.grid_start < d.window_start || d.grid_end > d.window_end {
                    return Err(CliError::Config("grid must lie inside the recording window".into()));
                }
                if !(d.noise_variance >= 0.0) || !d.noise_variance.is_finite() {
                    return Err(CliError::Config("noise variance must be >= 0".into()));
                }
            }
        }
        let sampled = match self.sampler.kind {
            SamplerKind::Mwg => model.dimension(),
            _ => map.eta_dim(),
        };
        let sds = self.sampler.proposal_sd.len();
        if sds != 1 && sds != sampled {
            return Err(CliError::Config(format!(
                "proposal_sd has {sds} entries; need 1 or {sampled}"
            )));
        }
        let fallback = self.sampler.nu_fallback.len();
        if fallback != 0 && fallback != map.nu_dim() {
            return Err(CliError::Config(format!(
                "nu_fallback has {fallback} entries; need {}",
                map.nu_dim()
            )));
        }
        if !(self.run.band_level > 0.0 && self.run.band_level < 1.0) {
            return Err(CliError::Config("band level must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// The observation the fit runs on, read from file or synthesized.
    pub fn observation(&self) -> Result<Observation> {
        match &self.data.observation_csv {
            Some(path) => {
                let (t, r) = crate::data::read_observation(path)?;
                Ok(Observation::new(t, r, (self.data.window_start, self.data.window_end))?)
            }
            None => Ok(crate::data::simulate(self)?.0),
        }
    }

    /// Noise-free reference curve on the observation times, when a truth is
    /// configured.
    pub fn clean_curve(&self, times: &[f64]) -> Result<Option<Vec<f64>>> {
        match &self.data.truth {
            Some(truth) => {
                let xi = isofit_core::ParameterVector::new(truth.clone())?;
                Ok(Some(self.model()?.evaluate(&xi, times)?))
            }
            None => Ok(None),
        }
    }

    pub fn context(&self, obs: Observation) -> Result<PosteriorContext> {
        Ok(PosteriorContext::new(
            self.model()?,
            self.map()?,
            obs,
            self.hyperparameters(),
        )?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for preset in [Preset::Case1, Preset::Case2, Preset::Case3, Preset::Chroma] {
            for kind in [SamplerKind::Mwg, SamplerKind::Mgdg, SamplerKind::Malg] {
                preset.config(kind).validate().unwrap();
            }
        }
    }

    #[test]
    fn burn_in_must_be_below_chain_length() {
        let mut cfg = Preset::Case1.config(SamplerKind::Mgdg);
        cfg.sampler.burn_in = cfg.sampler.chain_length;
        assert_eq!(cfg.validate().unwrap_err().kind(), "InvalidConfig");
    }

    #[test]
    fn case3_sds_follow_the_sampler() {
        assert_eq!(
            Preset::Case3.config(SamplerKind::Mgdg).sampler.proposal_sd,
            vec![0.08, 0.33]
        );
        assert_eq!(
            Preset::Case3.config(SamplerKind::Malg).sampler.proposal_sd,
            vec![0.05, 0.15]
        );
        assert!(Preset::Chroma.config(SamplerKind::Malg).sampler.unconstrained);
        assert!(!Preset::Chroma.config(SamplerKind::Mgdg).sampler.unconstrained);
    }
}
