//! The `simulate`, `fit`, `repeat` and `summarize` operations, callable
//! without the command-line wrapper.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use isofit_core::diagnostics::{
    aggregate_table, aggregate_trials, band_max_relative_error, credible_band, effective_sample_size, mean,
    quantile_select, relative_error_curves, sd, summarize as summarize_chain, Band, ChainSummary, TrialAggregate,
    TrialOutcome, TrialSummary, SUMMARY_LEVELS,
};
use isofit_core::samplers::{self, Chain};
use isofit_core::Observation;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::data;
use crate::error::{CliError, Result};
use crate::output::{self, FitReport, Manifest};

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn manifest(cfg: &RunConfig, command: &str, files: &[&str]) -> Result<Manifest> {
    Ok(Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        config_sha256: cfg.sha256()?,
        seed: cfg.run.seed,
        data_seed: cfg.data.seed,
        sampler: cfg.sampler.kind.name().to_string(),
        files: files.iter().map(|f| f.to_string()).collect(),
    })
}

fn write_config_and_manifest(dir: &Path, cfg: &RunConfig, command: &str, files: &[&str]) -> Result<()> {
    output::write_text(&dir.join(output::CONFIG_FILE), &cfg.to_toml_string()?)?;
    let mut all: Vec<&str> = files.to_vec();
    all.push(output::CONFIG_FILE);
    output::write_json(&dir.join(output::MANIFEST_FILE), &manifest(cfg, command, &all)?)
}

/// Writes the synthetic observation, the config and a manifest into `out`.
pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<Observation> {
    cfg.validate()?;
    let (obs, _) = data::simulate(cfg)?;
    create_dir(out)?;
    data::write_observation(&out.join(output::OBSERVATION_FILE), &obs)?;
    write_config_and_manifest(out, cfg, "simulate", &[output::OBSERVATION_FILE])?;
    Ok(obs)
}

/// Everything a fit produces.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub observation: Observation,
    pub clean: Option<Vec<f64>>,
    pub chain: Chain,
    pub summary: ChainSummary,
    pub band: Band,
    pub report: FitReport,
}

/// Validates the config, builds the observation and runs the sampler.
pub fn fit(cfg: &RunConfig) -> Result<FitOutput> {
    cfg.validate()?;
    let observation = cfg.observation()?;
    let clean = cfg.clean_curve(observation.times())?;
    fit_on(cfg, observation, clean)
}

/// Runs the sampler on a prepared observation.
pub fn fit_on(cfg: &RunConfig, observation: Observation, clean: Option<Vec<f64>>) -> Result<FitOutput> {
    let ctx = cfg.context(observation.clone())?;
    let chain = samplers::run(&ctx, &cfg.settings(), cfg.run.seed)?;
    let summary = summarize_chain(&chain)?;
    let band = credible_band(&chain, &ctx.model, observation.times(), cfg.run.band_level)?;
    let (observation_re, band_max_re) = match &clean {
        Some(c) => (
            Some(relative_error_curves(observation.values(), c)?),
            Some(band_max_relative_error(&band, c)?),
        ),
        None => (None, None),
    };
    let report = FitReport {
        sampler: cfg.sampler.kind.name().to_string(),
        seed: cfg.run.seed,
        kept: summary.kept,
        beta: chain.beta,
        acceptance: summary.acceptance.clone(),
        gd: chain.gd,
        observation_re,
        band_max_re,
        band_level: cfg.run.band_level,
    };
    Ok(FitOutput {
        observation,
        clean,
        chain,
        summary,
        band,
        report,
    })
}

/// Writes chain, summary, band, report, config and manifest into `out`.
pub fn write_fit(out: &Path, cfg: &RunConfig, fit: &FitOutput) -> Result<()> {
    create_dir(out)?;
    output::write_chain(&out.join(output::CHAIN_FILE), &fit.chain)?;
    output::write_summary(&out.join(output::SUMMARY_FILE), &fit.summary)?;
    output::write_band(&out.join(output::BAND_FILE), &fit.band)?;
    output::write_text(&out.join(output::REPORT_FILE), &fit.report.render(&fit.summary))?;
    write_config_and_manifest(
        out,
        cfg,
        "fit",
        &[
            output::CHAIN_FILE,
            output::SUMMARY_FILE,
            output::BAND_FILE,
            output::REPORT_FILE,
        ],
    )
}

/// Runs `trial` for every seed on a pool of `workers` threads. A failing
/// trial becomes a `Failed` outcome; the others still run. Outcomes are in
/// seed order.
pub fn run_trials<F>(seeds: &[u64], workers: usize, trial: F) -> Result<Vec<TrialOutcome>>
where
    F: Fn(u64) -> Result<TrialSummary> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| match trial(seed) {
                Ok(s) => TrialOutcome::Ok(s),
                Err(e) => TrialOutcome::Failed {
                    seed,
                    kind: e.kind().to_string(),
                    message: e.to_string(),
                },
            })
            .collect()
    }))
}

/// Label used for a sampler row in aggregate tables.
pub fn row_label(cfg: &RunConfig) -> String {
    cfg.sampler.kind.name().to_ascii_uppercase()
}

/// `reps` fits per config with seeds `run.seed, run.seed + 1, ...`, all on
/// the same observation. Each trial writes its chain and summary under
/// `out/<sampler>/seed_<seed>/`; the aggregate table has one row per config.
pub fn repeat(configs: &[RunConfig], reps: usize, workers: usize, out: &Path) -> Result<Vec<(String, TrialAggregate)>> {
    let first = configs
        .first()
        .ok_or_else(|| CliError::Config("nothing to repeat".into()))?;
    if reps == 0 {
        return Err(CliError::Config("need at least one repetition".into()));
    }
    for cfg in configs {
        cfg.validate()?;
    }
    let observation = first.observation()?;
    let clean = first.clean_curve(observation.times())?;
    create_dir(out)?;
    data::write_observation(&out.join(output::OBSERVATION_FILE), &observation)?;

    let mut rows = Vec::new();
    let mut trial_lines = String::from("sampler,seed,status,eta_mean,nu_mean,max_re,error\n");
    for cfg in configs {
        let label = row_label(cfg);
        let seeds: Vec<u64> = (0..reps as u64).map(|i| cfg.run.seed + i).collect();
        let dir = out.join(cfg.sampler.kind.name());
        let outcomes = run_trials(&seeds, workers, |seed| {
            let mut trial_cfg = cfg.clone();
            trial_cfg.run.seed = seed;
            let fit = fit_on(&trial_cfg, observation.clone(), clean.clone())?;
            let trial_dir = dir.join(format!("seed_{seed}"));
            create_dir(&trial_dir)?;
            output::write_chain(&trial_dir.join(output::CHAIN_FILE), &fit.chain)?;
            output::write_summary(&trial_dir.join(output::SUMMARY_FILE), &fit.summary)?;
            Ok(TrialSummary::from_chain(&fit.chain, fit.report.band_max_re)?)
        })?;
        for o in &outcomes {
            let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
            let line = match o {
                TrialOutcome::Ok(s) => format!(
                    "{label},{},ok,{},{},{},\n",
                    s.seed,
                    join(&s.eta_mean),
                    join(&s.nu_mean),
                    s.max_re.map(|v| v.to_string()).unwrap_or_default()
                ),
                TrialOutcome::Failed { seed, kind, message } => {
                    format!(
                        "{label},{seed},failed,,,,{kind}: {}\n",
                        message.replace([',', '\n'], ";")
                    )
                }
            };
            trial_lines.push_str(&line);
        }
        output::write_text(&out.join(output::TRIALS_FILE), &trial_lines)?;
        rows.push((label, aggregate_trials(&outcomes)?));
    }
    output::write_text(&out.join(output::AGGREGATE_FILE), &aggregate_table(&rows))?;
    for cfg in configs {
        let dir = out.join(cfg.sampler.kind.name());
        write_config_and_manifest(&dir, cfg, "repeat", &[])?;
    }
    write_config_and_manifest(
        out,
        first,
        "repeat",
        &[output::OBSERVATION_FILE, output::TRIALS_FILE, output::AGGREGATE_FILE],
    )?;
    Ok(rows)
}

fn is_parameter(name: &str) -> bool {
    !matches!(name, "seed" | "iter") && !name.starts_with("accept_")
}

/// Post-burn-in summary of each chain file, followed by an across-chain
/// table of the `eta`/`nu` means when more than one file is given.
pub fn summarize(paths: &[PathBuf]) -> Result<String> {
    if paths.is_empty() {
        return Err(CliError::Config("no chain files given".into()));
    }
    let mut text = String::new();
    let mut outcomes = Vec::new();
    for path in paths {
        let table = output::read_chain(path)?;
        let kept = table.burn_in.iter().filter(|b| !**b).count();
        if kept == 0 {
            return Err(isofit_core::Error::EmptyChain.into());
        }
        let _ = writeln!(text, "{} ({kept} kept draws)", path.display());
        let _ = writeln!(
            text,
            "{:<10} {:>12} {:>12} {:>12} {:>12} {:>12} {:>8}",
            "name", "mean", "sd", "q2.5", "q50", "q97.5", "ess"
        );
        for (name, _) in table.columns.iter().filter(|(n, _)| is_parameter(n)) {
            let x = table.kept(name).unwrap_or_default();
            let q = |p: f64| quantile_select(&x, p);
            let _ = writeln!(
                text,
                "{:<10} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>8.0}",
                name,
                mean(&x),
                sd(&x),
                q(SUMMARY_LEVELS[0]),
                q(SUMMARY_LEVELS[2]),
                q(SUMMARY_LEVELS[4]),
                effective_sample_size(&x)
            );
        }
        for (name, _) in table.columns.iter().filter(|(n, _)| n.starts_with("accept_")) {
            let x = table.kept(name).unwrap_or_default();
            let _ = writeln!(text, "{name:<10} {:>12.4} per iteration", mean(&x));
        }
        let _ = writeln!(text);

        let means = |prefix: &str| -> Vec<f64> {
            (1..)
                .map_while(|j| table.kept(&format!("{prefix}_{j}")))
                .map(|x| mean(&x))
                .collect()
        };
        let seed = table.column("seed").and_then(|s| s.first()).copied().unwrap_or(0.0) as u64;
        outcomes.push(TrialOutcome::Ok(TrialSummary {
            seed,
            eta_mean: means("eta"),
            nu_mean: means("nu"),
            max_re: None,
        }));
    }
    if outcomes.len() > 1 {
        let agg = aggregate_trials(&outcomes)?;
        text.push_str(&aggregate_table(&[("chains".to_string(), agg)]));
    }
    Ok(text)
}
