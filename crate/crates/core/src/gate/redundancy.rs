//! Redundancy against the promoted library.

use serde::{Deserialize, Serialize};

use crate::grid::Grid;
use crate::stats::{finite_pairs, mean, spearman};

/// Library members sharing fewer dates than this with the candidate are not compared.
pub const MIN_OVERLAP_DATES: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundancyReport {
    /// Largest `|average per-date rank correlation|` over compared members; 0 when none.
    pub max_abs_corr: f64,
    pub most_correlated: Option<String>,
    /// `(member, average correlation, overlapping dates)`.
    pub members: Vec<(String, Option<f64>, usize)>,
    pub pass: bool,
}

/// Average per-date Spearman correlation between `candidate` and each member
/// over `dates`; fails when any `|average| > max_abs_corr`.
pub fn redundancy_check(
    candidate: &Grid,
    library: &[(&str, &Grid)],
    dates: &[usize],
    max_abs_corr: f64,
) -> RedundancyReport {
    let mut members = Vec::with_capacity(library.len());
    let mut best: Option<(f64, &str)> = None;
    for &(name, g) in library {
        let per_date: Vec<f64> = dates
            .iter()
            .filter_map(|&d| {
                let (x, y) = finite_pairs(candidate.row(d), g.row(d));
                if x.len() < 3 {
                    return None;
                }
                spearman(&x, &y)
            })
            .collect();
        let overlap = per_date.len();
        let avg = (overlap >= MIN_OVERLAP_DATES).then(|| mean(&per_date));
        if let Some(a) = avg {
            if best.is_none_or(|(b, _)| a.abs() > b) {
                best = Some((a.abs(), name));
            }
        }
        members.push((name.to_string(), avg, overlap));
    }
    let max_abs = best.map(|b| b.0).unwrap_or(0.0);
    RedundancyReport {
        max_abs_corr: max_abs,
        most_correlated: best.map(|b| b.1.to_string()),
        members,
        pass: !(max_abs > max_abs_corr),
    }
}
