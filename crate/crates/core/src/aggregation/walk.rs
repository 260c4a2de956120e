//! Rolling refits and hyperparameter selection.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{equal_weight_composite, fit_gbdt, fit_linear, AggregationError, FeatureMatrix, GbdtParams, Model};
use crate::metrics::rank_ic;
use crate::stats::mean;

/// Positions are counted in dates of the feature matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkForwardPlan {
    /// Dates in each training window.
    pub train_window: usize,
    /// Dates between refits.
    pub refit_every: usize,
    /// Dates between the last training date and the first prediction date.
    pub embargo: usize,
}

impl Default for WalkForwardPlan {
    fn default() -> Self {
        Self {
            train_window: 252,
            refit_every: 63,
            embargo: 1,
        }
    }
}

impl WalkForwardPlan {
    pub fn validate(&self) -> Result<(), AggregationError> {
        if self.train_window == 0 || self.refit_every == 0 || self.embargo == 0 {
            return Err(AggregationError::InvalidPlan(
                "train_window, refit_every and embargo must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelKind {
    EqualWeight,
    Linear { ridge: f64 },
    Gbdt(GbdtParams),
}

impl ModelKind {
    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::EqualWeight => "equal_weight",
            ModelKind::Linear { .. } => "linear",
            ModelKind::Gbdt(_) => "gbdt",
        }
    }

    /// `None` for the equal-weight composite, which has nothing to fit.
    pub fn fit(&self, fm: &FeatureMatrix) -> Result<Option<Model>, AggregationError> {
        Ok(match self {
            ModelKind::EqualWeight => None,
            ModelKind::Linear { ridge } => Some(Model::Linear(fit_linear(fm, *ridge)?)),
            ModelKind::Gbdt(p) => Some(Model::Gbdt(fit_gbdt(fm, p)?)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Date positions used for fitting.
    pub train: Range<usize>,
    /// Date positions scored by this fit.
    pub predict: Range<usize>,
    pub n_train_rows: usize,
    pub model: Option<Model>,
    /// Why the fit failed; the segment's scores are then missing.
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct WalkForward {
    /// One score per feature-matrix row; missing before the first full window.
    pub scores: Vec<f64>,
    pub segments: Vec<Segment>,
}

/// For each block of `refit_every` dates starting at `b`, fits on positions
/// `[b - embargo - train_window + 1, b - embargo]` and scores the block.
pub fn walk_forward(fm: &FeatureMatrix, plan: &WalkForwardPlan, kind: &ModelKind) -> Result<WalkForward, AggregationError> {
    plan.validate()?;
    if let ModelKind::Gbdt(p) = kind {
        p.validate()?;
    }
    let n = fm.dates.len();
    let mut scores = vec![f64::NAN; fm.n_rows()];
    let mut segments = Vec::new();
    let mut b = plan.train_window + plan.embargo - 1;
    while b < n {
        let train = b + 1 - plan.embargo - plan.train_window..b + 1 - plan.embargo;
        let predict = b..(b + plan.refit_every).min(n);
        let target = fm.slice(predict.clone());
        let rows = fm.rows_of(predict.clone());
        let (model, error, n_train_rows) = match kind {
            ModelKind::EqualWeight => {
                scores[rows].copy_from_slice(&equal_weight_composite(&target));
                (None, None, 0)
            }
            _ => {
                let sample = fm.slice(train.clone());
                let n_train_rows = sample.y.iter().filter(|v| v.is_finite()).count();
                match kind.fit(&sample) {
                    Ok(model) => {
                        let model = model.expect("fitted kinds return a model");
                        scores[rows].copy_from_slice(&model.predict(&target)?);
                        (Some(model), None, n_train_rows)
                    }
                    Err(e @ AggregationError::InvalidParams(_)) => return Err(e),
                    Err(e) => (None, Some(e.to_string()), n_train_rows),
                }
            }
        };
        segments.push(Segment {
            train,
            predict,
            n_train_rows,
            model,
            error,
        });
        b += plan.refit_every;
    }
    Ok(WalkForward { scores, segments })
}

/// Mean per-date rank IC of `scores` against the feature matrix target over
/// date `positions`. Dates with fewer than `min_names` pairs are skipped.
pub fn mean_rank_ic(fm: &FeatureMatrix, scores: &[f64], positions: Range<usize>, min_names: usize) -> Option<f64> {
    let ics: Vec<f64> = positions
        .filter_map(|p| {
            let r = fm.date_rows[p].clone();
            rank_ic(&scores[r.clone()], &fm.y[r], min_names)
        })
        .collect();
    (!ics.is_empty()).then(|| mean(&ics))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneRow {
    pub params: GbdtParams,
    pub mean_ic: Option<f64>,
}

/// Fits each candidate on `train` and scores it by mean rank IC on `valid`.
/// Rows come back best first; candidates without a defined IC sort last.
pub fn tune_gbdt(
    fm: &FeatureMatrix,
    train: Range<usize>,
    valid: Range<usize>,
    grid: &[GbdtParams],
) -> Result<Vec<TuneRow>, AggregationError> {
    if train.is_empty() || valid.is_empty() || train.end > valid.start || valid.end > fm.dates.len() {
        return Err(AggregationError::InvalidPlan(format!(
            "training {train:?} must end before validation {valid:?}"
        )));
    }
    let sample = fm.slice(train);
    let mut rows = Vec::with_capacity(grid.len());
    for p in grid {
        let model = fit_gbdt(&sample, p)?;
        let preds = model.predict(fm)?;
        rows.push(TuneRow {
            params: p.clone(),
            mean_ic: mean_rank_ic(fm, &preds, valid.clone(), 5),
        });
    }
    rows.sort_by(|a, b| match (a.mean_ic, b.mean_ic) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(rows)
}
