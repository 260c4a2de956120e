//! Per-date cross-sectional transforms. Missing entries pass through untouched.

use crate::stats::{mean, quantile_sorted, sample_std};

use super::PanelError;

/// Linear-interpolation quantiles of the finite entries; `None` when there are none.
pub fn winsorize_bounds(values: &[f64], p_low: f64, p_high: f64) -> Option<(f64, f64)> {
    let mut finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return None;
    }
    finite.sort_by(f64::total_cmp);
    Some((quantile_sorted(&finite, p_low), quantile_sorted(&finite, p_high)))
}

pub fn clip(values: &[f64], low: f64, high: f64) -> Vec<f64> {
    values
        .iter()
        .map(|&v| if v.is_finite() { v.clamp(low, high) } else { v })
        .collect()
}

/// Clips each finite entry to the `[p_low, p_high]` quantile range of the
/// date's finite entries. Returns an empty vector when nothing is finite.
pub fn winsorize_cross_section(
    values: &[f64],
    p_low: f64,
    p_high: f64,
) -> Result<Vec<f64>, PanelError> {
    if !(0.0..1.0).contains(&p_low) || !(p_low < p_high && p_high <= 1.0) {
        return Err(PanelError::InvalidQuantiles {
            low: p_low,
            high: p_high,
        });
    }
    Ok(match winsorize_bounds(values, p_low, p_high) {
        Some((lo, hi)) => clip(values, lo, hi),
        None => Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZScored {
    pub values: Vec<f64>,
    /// Fewer than two finite entries, or zero dispersion; finite entries were set to 0.
    pub degenerate: bool,
}

/// `(x - mean) / sample_std` over finite entries.
pub fn zscore_cross_section(values: &[f64]) -> ZScored {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let sd = sample_std(&finite);
    if finite.len() < 2 || !(sd > 0.0) || !sd.is_finite() {
        return ZScored {
            values: values
                .iter()
                .map(|&v| if v.is_finite() { 0.0 } else { v })
                .collect(),
            degenerate: true,
        };
    }
    let mu = mean(&finite);
    ZScored {
        values: values
            .iter()
            .map(|&v| if v.is_finite() { (v - mu) / sd } else { v })
            .collect(),
        degenerate: false,
    }
}

/// Winsorize at (1%, 99%) then z-score: the standard per-date normalization.
pub fn cs_normalize(values: &[f64]) -> ZScored {
    match winsorize_bounds(values, 0.01, 0.99) {
        Some((lo, hi)) => zscore_cross_section(&clip(values, lo, hi)),
        None => ZScored {
            values: values.to_vec(),
            degenerate: true,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn winsorize_all_equal_unchanged() {
        let v = vec![2.5; 7];
        assert_eq!(winsorize_cross_section(&v, 0.01, 0.99).unwrap(), v);
    }

    #[test]
    fn winsorize_percentile_oracle() {
        let v: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        let w = winsorize_cross_section(&v, 0.01, 0.99).unwrap();
        // sort-and-interpolate by hand: position 0.99 between 1 and 2
        let lo = 1.0 + 0.99 * (2.0 - 1.0);
        let min = w.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((min - lo).abs() < 1e-12);
    }

    #[test]
    fn winsorize_full_range_is_identity() {
        let v = vec![3.0, -1.0, f64::NAN, 10.0];
        let w = winsorize_cross_section(&v, 0.0, 1.0).unwrap();
        assert!(v.iter().zip(&w).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn winsorize_rejects_bad_bounds() {
        assert!(winsorize_cross_section(&[1.0], 0.5, 0.5).is_err());
        assert!(winsorize_cross_section(&[1.0], -0.1, 0.5).is_err());
    }

    #[test]
    fn winsorize_empty_finite() {
        assert!(winsorize_cross_section(&[f64::NAN], 0.01, 0.99).unwrap().is_empty());
    }

    #[test]
    fn zscore_hand() {
        let z = zscore_cross_section(&[1.0, 2.0, 3.0]);
        assert_eq!(z.values, vec![-1.0, 0.0, 1.0]);
        assert!(!z.degenerate);
        let z = zscore_cross_section(&[-4.0, 0.0, 4.0]);
        assert_eq!(z.values.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn zscore_constant_flags() {
        let z = zscore_cross_section(&[3.0, 3.0, f64::NAN]);
        assert!(z.degenerate);
        assert_eq!(&z.values[..2], &[0.0, 0.0]);
        assert!(z.values[2].is_nan());
    }

    proptest! {
        #[test]
        fn clipping_with_computed_bounds_is_idempotent(
            v in proptest::collection::vec(-1e6f64..1e6, 1..200)
        ) {
            let (lo, hi) = winsorize_bounds(&v, 0.01, 0.99).unwrap();
            let once = clip(&v, lo, hi);
            let twice = clip(&once, lo, hi);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn zscore_moments(v in proptest::collection::vec(-1e3f64..1e3, 3..300)) {
            let z = zscore_cross_section(&v);
            prop_assume!(!z.degenerate);
            let m = mean(&z.values);
            let s = sample_std(&z.values);
            prop_assert!(m.abs() < 1e-10);
            prop_assert!((s - 1.0).abs() < 1e-10);
        }
    }
}
