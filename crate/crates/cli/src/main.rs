use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use isofit::commands;
use isofit::output::{self, ErrorRecord};
use isofit::{CliError, Preset, Result, RunConfig};
use isofit_core::samplers::SamplerKind;

#[derive(Parser)]
#[command(name = "isofit", version, about = "Bayesian isotherm parameter estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic observation `t,r` for the configured truth.
    Simulate {
        #[command(flatten)]
        source: Source,
        /// Noise seed (overrides data.seed).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one chain and write chain, summary, band and report files.
    Fit {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        sampler: Option<SamplerKind>,
        /// Sampler seed (overrides run.seed).
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        length: Length,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeat the fit over consecutive seeds and aggregate the trials.
    Repeat {
        #[command(flatten)]
        source: Source,
        /// Sampler rows of the aggregate table; repeat the flag for several.
        #[arg(long)]
        sampler: Vec<SamplerKind>,
        /// First sampler seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        /// Concurrent trials; defaults to the available cores.
        #[arg(long, env = "ISOFIT_WORKERS")]
        workers: Option<usize>,
        #[command(flatten)]
        length: Length,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize chain files written by `fit` or `repeat`.
    Summarize {
        #[arg(required = true)]
        chains: Vec<PathBuf>,
        /// Also write the summary text to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<Preset>,
}

#[derive(Args)]
struct Length {
    /// Chain length K (overrides the config).
    #[arg(long)]
    chain_length: Option<usize>,
    /// Burn-in B (overrides the config).
    #[arg(long)]
    burn_in: Option<usize>,
}

impl Length {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(k) = self.chain_length {
            cfg.sampler.chain_length = k;
        }
        if let Some(b) = self.burn_in {
            cfg.sampler.burn_in = b;
        }
    }
}

/// Loads the source for `kind`: presets are rebuilt for the sampler so its
/// sampler-specific settings apply; config files only change the kind.
fn load(source: &Source, kind: Option<SamplerKind>) -> Result<RunConfig> {
    match (&source.config, source.preset) {
        (Some(path), _) => {
            let mut cfg = RunConfig::load(path)?;
            if let Some(k) = kind {
                cfg.sampler.kind = k;
            }
            Ok(cfg)
        }
        (None, Some(preset)) => Ok(preset.config(kind.unwrap_or(SamplerKind::Mgdg))),
        (None, None) => Err(CliError::Config("need --config or --preset".into())),
    }
}

fn record_failure(out: &Path, err: &CliError) {
    if std::fs::create_dir_all(out).is_ok() {
        let _ = output::write_json(&out.join(output::ERROR_FILE), &ErrorRecord::from_error(err));
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let result = match cli.command {
        Command::Simulate { source, seed, out } => {
            let result = load(&source, None).and_then(|mut cfg| {
                if let Some(s) = seed {
                    cfg.data.seed = s;
                }
                commands::simulate(&cfg, &out).map(|obs| {
                    println!("wrote {} points to {}", obs.len(), out.display());
                })
            });
            result
        }
        Command::Fit {
            source,
            sampler,
            seed,
            length,
            out,
        } => {
            let result = load(&source, sampler).and_then(|mut cfg| {
                if let Some(s) = seed {
                    cfg.run.seed = s;
                }
                length.apply(&mut cfg);
                // Invalid configs fail before any file is written.
                cfg.validate()?;
                let outcome = commands::fit(&cfg).and_then(|fit| {
                    commands::write_fit(&out, &cfg, &fit)?;
                    Ok(fit)
                });
                match outcome {
                    Ok(fit) => {
                        print!("{}", fit.report.render(&fit.summary));
                        Ok(())
                    }
                    Err(e) => {
                        record_failure(&out, &e);
                        Err(e)
                    }
                }
            });
            result
        }
        Command::Repeat {
            source,
            sampler,
            seed,
            reps,
            workers,
            length,
            out,
        } => {
            let kinds: Vec<Option<SamplerKind>> = if sampler.is_empty() {
                vec![None]
            } else {
                sampler.into_iter().map(Some).collect()
            };
            let workers = workers
                .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
                .unwrap_or(1);
            let result = kinds
                .into_iter()
                .map(|k| {
                    let mut cfg = load(&source, k)?;
                    if let Some(s) = seed {
                        cfg.run.seed = s;
                    }
                    length.apply(&mut cfg);
                    cfg.validate()?;
                    Ok(cfg)
                })
                .collect::<Result<Vec<_>>>()
                .and_then(|configs| {
                    commands::repeat(&configs, reps, workers, &out).inspect_err(|e| record_failure(&out, e))
                })
                .map(|rows| print!("{}", isofit_core::diagnostics::aggregate_table(&rows)));
            result
        }
        Command::Summarize { chains, out } => {
            let result = commands::summarize(&chains).and_then(|text| {
                print!("{text}");
                match &out {
                    Some(path) => output::write_text(path, &text),
                    None => Ok(()),
                }
            });
            result
        }
    };
    match result {
        Ok(()) => {
            eprintln!("done in {:.1?}", started.elapsed());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let record = ErrorRecord::from_error(&e);
            eprintln!("{}", serde_json::to_string(&record).unwrap_or_else(|_| e.to_string()));
            ExitCode::FAILURE
        }
    }
}
