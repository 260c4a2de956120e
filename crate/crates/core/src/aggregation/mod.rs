//! Combining promoted factors into one score per stock and date.
//!
//! Three aggregators share a [`FeatureMatrix`]: the equal-weight z-score
//! average, a ridge-capable linear model, and an exact-greedy gradient-boosted
//! tree ensemble. [`walk_forward`] refits a model on a rolling window so that
//! every score is produced by a model trained strictly on earlier data.

mod features;
mod gbdt;
mod linear;
mod walk;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use features::{equal_weight_composite, FeatureMatrix, TARGET_WINSOR};
pub use gbdt::{feature_importance, fit_gbdt, split_gain, GbdtModel, GbdtParams, Importance, Node, Split, Tree};
pub use linear::{fit_linear, LinearModel};
pub use walk::{mean_rank_ic, tune_gbdt, walk_forward, ModelKind, Segment, TuneRow, WalkForward, WalkForwardPlan};

/// Version of the JSON model file layout.
pub const MODEL_SCHEMA: u32 = 1;

#[derive(Debug, Error)]
pub enum AggregationError {
    #[error("no factor columns")]
    NoFactors,
    #[error("factor grids disagree in shape")]
    ShapeMismatch,
    #[error("feature columns {got:?} do not match the model's {expected:?}")]
    Schema {
        expected: Vec<String>,
        got: Vec<String>,
    },
    #[error("need at least {need} complete rows, have {have}")]
    TooFewRows { need: usize, have: usize },
    #[error("design matrix is singular; set a positive ridge penalty")]
    Singular,
    #[error("invalid hyperparameter: {0}")]
    InvalidParams(String),
    #[error("invalid walk-forward plan: {0}")]
    InvalidPlan(String),
    #[error("model file schema {0} is not supported")]
    UnsupportedSchema(u32),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A fitted aggregator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Linear(LinearModel),
    Gbdt(GbdtModel),
}

impl Model {
    pub fn feature_names(&self) -> &[String] {
        match self {
            Model::Linear(m) => &m.names,
            Model::Gbdt(m) => &m.names,
        }
    }

    pub fn predict(&self, fm: &FeatureMatrix) -> Result<Vec<f64>, AggregationError> {
        match self {
            Model::Linear(m) => m.predict(fm),
            Model::Gbdt(m) => m.predict(fm),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFile {
            schema: MODEL_SCHEMA,
            model: self.clone(),
        })
        .expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Model, AggregationError> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.schema != MODEL_SCHEMA {
            return Err(AggregationError::UnsupportedSchema(file.schema));
        }
        Ok(file.model)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema: u32,
    model: Model,
}

fn check_schema(expected: &[String], fm: &FeatureMatrix) -> Result<(), AggregationError> {
    if expected != fm.names.as_slice() {
        return Err(AggregationError::Schema {
            expected: expected.to_vec(),
            got: fm.names.clone(),
        });
    }
    Ok(())
}
