//! Rank information coefficient and its aggregation.

use serde::{Deserialize, Serialize};

use crate::stats::{mean, sample_std, spearman};

/// Spearman correlation between scores and forward returns over the stocks
/// where both are finite. `None` when fewer than `min_names` pairs remain or
/// either side has no dispersion.
pub fn rank_ic(scores: &[f64], fwd: &[f64], min_names: usize) -> Option<f64> {
    let (x, y) = crate::stats::finite_pairs(scores, fwd);
    if x.len() < min_names.max(2) {
        return None;
    }
    spearman(&x, &y)
}

/// Rank IC restricted to the top `leg_fraction` of scores on the date.
///
/// The leg keeps `ceil(leg_fraction * n)` names of the finite universe, ties
/// at the cut broken by stock order. Names keep their original order so that
/// `leg_fraction = 1` reproduces [`rank_ic`] bit for bit.
pub fn long_only_ic(scores: &[f64], fwd: &[f64], leg_fraction: f64, min_names: usize) -> Option<f64> {
    let idx: Vec<usize> = (0..scores.len())
        .filter(|&i| scores[i].is_finite() && fwd[i].is_finite())
        .collect();
    let n = idx.len();
    let k = ((leg_fraction * n as f64).ceil() as usize).min(n);
    let mut by_score = idx.clone();
    by_score.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut keep = vec![false; scores.len()];
    for &i in &by_score[..k] {
        keep[i] = true;
    }
    let x: Vec<f64> = idx.iter().filter(|&&i| keep[i]).map(|&i| scores[i]).collect();
    let y: Vec<f64> = idx.iter().filter(|&&i| keep[i]).map(|&i| fwd[i]).collect();
    if x.len() < min_names.max(2) {
        return None;
    }
    spearman(&x, &y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcStats {
    pub mean: Option<f64>,
    /// `mean / (sd / sqrt(T))`; `None` when `sd = 0` or `T < 2`.
    pub t: Option<f64>,
    /// `mean / sd`, daily and unannualized.
    pub icir: Option<f64>,
    pub n: usize,
}

pub fn ic_tstat(ics: &[f64]) -> IcStats {
    let n = ics.len();
    let m = mean(ics);
    let sd = sample_std(ics);
    let defined = n >= 2 && sd > 0.0 && sd.is_finite();
    IcStats {
        mean: m.is_finite().then_some(m),
        t: defined.then(|| m / (sd / (n as f64).sqrt())),
        icir: defined.then(|| m / sd),
        n,
    }
}
