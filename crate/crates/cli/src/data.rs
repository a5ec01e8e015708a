//! Synthetic observations and the `t,r` observation file.

use std::path::Path;

use isofit_core::{Observation, ParameterVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

/// `r = R(xi*, t) + eps` on the configured grid with i.i.d. normal noise of
/// the configured variance, seeded by `data.seed`. Returns the observation and
/// the clean curve.
pub fn simulate(cfg: &RunConfig) -> Result<(Observation, Vec<f64>)> {
    let d = &cfg.data;
    let truth = d
        .truth
        .clone()
        .ok_or_else(|| CliError::Config("simulation needs data.truth".into()))?;
    let grid = cfg.grid();
    let clean = cfg.model()?.evaluate(&ParameterVector::new(truth)?, &grid)?;
    let values = if d.noise_variance == 0.0 {
        clean.clone()
    } else {
        let noise = Normal::new(0.0, d.noise_variance.sqrt()).map_err(|e| CliError::Config(format!("noise: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(d.seed);
        clean.iter().map(|c| c + noise.sample(&mut rng)).collect()
    };
    let obs = Observation::new(grid, values, (d.window_start, d.window_end))?;
    Ok((obs, clean))
}

/// Writes `t,r` rows with shortest round-trip formatting.
pub fn write_observation(path: &Path, obs: &Observation) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "r"])?;
    for (t, r) in obs.times().iter().zip(obs.values()) {
        w.write_record([t.to_string(), r.to_string()])?;
    }
    w.flush().map_err(CliError::io(path))?;
    Ok(())
}

pub fn read_observation(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "r" {
        return Err(CliError::Config(format!("{}: expected header t,r", path.display())));
    }
    let (mut t, mut r) = (Vec::new(), Vec::new());
    for row in reader.records() {
        let row = row?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("{}: {s}: {e}", path.display())))
        };
        t.push(parse(&row[0])?);
        r.push(parse(&row[1])?);
    }
    Ok((t, r))
}
