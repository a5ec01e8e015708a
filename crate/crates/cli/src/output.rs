//! Files written by `fit` and `repeat`, and the chain reader used by
//! `summarize`.

use std::fmt::Write as _;
use std::path::Path;

use isofit_core::diagnostics::{Band, ChainSummary, SUMMARY_LEVELS};
use isofit_core::samplers::{Chain, GdStats};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const CHAIN_FILE: &str = "chain.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const BAND_FILE: &str = "band.csv";
pub const REPORT_FILE: &str = "report.txt";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const ERROR_FILE: &str = "error.json";
pub const OBSERVATION_FILE: &str = "observation.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const TRIALS_FILE: &str = "trials.csv";

pub fn chain_header(chain: &Chain) -> Vec<String> {
    let Some(first) = chain.records.first() else {
        return Vec::new();
    };
    let mut h: Vec<String> = vec!["seed".into(), "iter".into(), "burn_in".into()];
    h.extend((1..=first.eta.len()).map(|j| format!("eta_{j}")));
    h.extend((1..=first.nu.len()).map(|j| format!("nu_{j}")));
    h.extend((1..=first.xi_hat.len()).map(|j| format!("xi_{j}")));
    h.push("sigma2".into());
    h.push("loss".into());
    h.extend(chain.blocks.iter().map(|b| format!("accept_{b}")));
    h
}

/// One row per iteration; floats use shortest round-trip formatting so the
/// file is byte-identical for a fixed seed.
pub fn write_chain(path: &Path, chain: &Chain) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(chain_header(chain))?;
    for (k, r) in chain.records.iter().enumerate() {
        let mut row: Vec<String> = vec![chain.seed.to_string(), k.to_string(), (r.burn_in as u8).to_string()];
        row.extend(r.eta.iter().map(f64::to_string));
        row.extend(r.nu.iter().map(f64::to_string));
        row.extend(r.xi_hat.as_slice().iter().map(f64::to_string));
        row.push(r.sigma2.to_string());
        row.push(r.loss.to_string());
        row.extend(r.accepts.iter().map(u32::to_string));
        w.write_record(&row)?;
    }
    w.flush().map_err(CliError::io(path))?;
    Ok(())
}

/// Columns of a chain file, with the burn-in flag split out.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTable {
    pub columns: Vec<(String, Vec<f64>)>,
    pub burn_in: Vec<bool>,
}

impl ChainTable {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// Values of `name` after burn-in.
    pub fn kept(&self, name: &str) -> Option<Vec<f64>> {
        self.column(name).map(|v| {
            v.iter()
                .zip(&self.burn_in)
                .filter(|(_, b)| !**b)
                .map(|(x, _)| *x)
                .collect()
        })
    }
}

pub fn read_chain(path: &Path) -> Result<ChainTable> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let burn_col = headers
        .iter()
        .position(|h| h == "burn_in")
        .ok_or_else(|| CliError::Config(format!("{}: no burn_in column", path.display())))?;
    let mut columns: Vec<(String, Vec<f64>)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != burn_col)
        .map(|(_, h)| (h.to_string(), Vec::new()))
        .collect();
    let mut burn_in = Vec::new();
    for row in reader.records() {
        let row = row?;
        let mut slot = 0;
        for (i, field) in row.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|e| CliError::Config(format!("{}: {field}: {e}", path.display())))?;
            if i == burn_col {
                burn_in.push(v != 0.0);
            } else {
                columns[slot].1.push(v);
                slot += 1;
            }
        }
    }
    Ok(ChainTable { columns, burn_in })
}

pub fn write_summary(path: &Path, summary: &ChainSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["name".to_string(), "mean".into(), "sd".into()];
    header.extend(SUMMARY_LEVELS.iter().map(|p| format!("q{}", p * 100.0)));
    header.push("ess".into());
    w.write_record(&header)?;
    for c in &summary.coordinates {
        let mut row = vec![c.name.clone(), c.mean.to_string(), c.sd.to_string()];
        row.extend(c.quantiles.iter().map(f64::to_string));
        row.push(c.ess.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(CliError::io(path))?;
    Ok(())
}

pub fn write_band(path: &Path, band: &Band) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "lower", "upper"])?;
    for ((t, lo), hi) in band.times.iter().zip(&band.lower).zip(&band.upper) {
        w.write_record([t.to_string(), lo.to_string(), hi.to_string()])?;
    }
    w.flush().map_err(CliError::io(path))?;
    Ok(())
}

/// Headline numbers of one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub sampler: String,
    pub seed: u64,
    pub kept: usize,
    pub beta: f64,
    pub acceptance: Vec<(String, f64)>,
    pub gd: GdStats,
    /// Relative error of the observation against the clean curve.
    pub observation_re: Option<f64>,
    /// Largest relative error of the band bounds against the clean curve.
    pub band_max_re: Option<f64>,
    pub band_level: f64,
}

impl FitReport {
    pub fn render(&self, summary: &ChainSummary) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "sampler      {}", self.sampler);
        let _ = writeln!(s, "seed         {}", self.seed);
        let _ = writeln!(s, "kept draws   {}", self.kept);
        let _ = writeln!(s, "beta         {}", self.beta);
        for (block, rate) in &self.acceptance {
            let _ = writeln!(s, "accept {block:<10} {rate:.4}");
        }
        if self.gd.runs > 0 {
            let _ = writeln!(
                s,
                "descent runs {} (converged {}, capped {}, stalled {}), {} iterations",
                self.gd.runs, self.gd.converged, self.gd.max_iter, self.gd.stalled, self.gd.iterations
            );
        }
        if let Some(re) = self.observation_re {
            let _ = writeln!(s, "RE observation      {re:.4}");
        }
        if let Some(re) = self.band_max_re {
            let _ = writeln!(s, "RE band max ({:.0}%)   {re:.4}", self.band_level * 100.0);
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<8} {:>12} {:>12} {:>12} {:>12} {:>8}",
            "name", "mean", "sd", "q2.5", "q97.5", "ess"
        );
        for c in &summary.coordinates {
            let _ = writeln!(
                s,
                "{:<8} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>8.0}",
                c.name, c.mean, c.sd, c.quantiles[0], c.quantiles[4], c.ess
            );
        }
        s
    }
}

/// Enough to rerun a command byte-for-byte: the config (stored next to the
/// manifest), its hash, the seeds and the tool version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub data_seed: u64,
    pub sampler: String,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
}

impl ErrorRecord {
    pub fn from_error(e: &CliError) -> Self {
        Self {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(CliError::io(path))
}
