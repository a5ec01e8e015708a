//! Forward-model dispatch: every sampler sees a model only through
//! [`ForwardModel::evaluate`].

use serde::{Deserialize, Serialize};

use crate::chroma::ChromaModel;
use crate::error::{Error, Result};
use crate::mixtures::MixtureModel;
use crate::types::ParameterVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ForwardModel {
    Mixture(MixtureModel),
    Chroma(ChromaModel),
    /// `R(xi, t) = xi_1 t`, a one-parameter model with a closed-form posterior.
    Linear,
}

impl ForwardModel {
    pub fn dimension(&self) -> usize {
        match self {
            ForwardModel::Mixture(m) => m.dimension(),
            ForwardModel::Chroma(c) => c.dimension,
            ForwardModel::Linear => 1,
        }
    }

    pub fn evaluate(&self, xi: &ParameterVector, grid: &[f64]) -> Result<Vec<f64>> {
        match self {
            ForwardModel::Mixture(m) => m.evaluate(xi, grid),
            ForwardModel::Chroma(c) => c.evaluate(xi, grid),
            ForwardModel::Linear => {
                if xi.len() != 1 {
                    return Err(Error::DimensionMismatch {
                        expected: 1,
                        got: xi.len(),
                    });
                }
                Ok(grid.iter().map(|t| xi[0] * t).collect())
            }
        }
    }
}
