//! Quantile sorts and equal-weight bucket returns.

/// Per-date bucket labels: `0` for unscored names, otherwise `1..=q` with
/// `1` the lowest scores.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantileAssignment {
    pub q: usize,
    pub buckets: Vec<u16>,
}

impl QuantileAssignment {
    pub fn members(&self, bucket: u16) -> impl Iterator<Item = usize> + '_ {
        self.buckets
            .iter()
            .enumerate()
            .filter(move |(_, b)| **b == bucket)
            .map(|(i, _)| i)
    }

    pub fn size(&self, bucket: u16) -> usize {
        self.buckets.iter().filter(|b| **b == bucket).count()
    }
}

/// Sorts finite scores ascending into `q` near-equal buckets.
///
/// Ties keep stock order. With `n = q * k + r`, the lowest `r` buckets get
/// one extra name. Returns `None` when fewer than `q` names are scored.
pub fn quantile_sort(scores: &[f64], q: usize) -> Option<QuantileAssignment> {
    assert!(q >= 2, "need at least two quantiles");
    let mut idx: Vec<usize> = (0..scores.len()).filter(|&i| scores[i].is_finite()).collect();
    let n = idx.len();
    if n < q {
        return None;
    }
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let (base, rem) = (n / q, n % q);
    let mut buckets = vec![0u16; scores.len()];
    let mut pos = 0;
    for b in 0..q {
        let size = base + usize::from(b < rem);
        for &i in &idx[pos..pos + size] {
            buckets[i] = (b + 1) as u16;
        }
        pos += size;
    }
    Some(QuantileAssignment { q, buckets })
}

/// Equal-weight mean forward return of each bucket, index 0 = bucket 1.
pub fn bucket_means(assign: &QuantileAssignment, fwd: &[f64]) -> Vec<Option<f64>> {
    let mut sum = vec![0.0; assign.q];
    let mut cnt = vec![0usize; assign.q];
    for (i, &b) in assign.buckets.iter().enumerate() {
        if b > 0 && fwd[i].is_finite() {
            sum[b as usize - 1] += fwd[i];
            cnt[b as usize - 1] += 1;
        }
    }
    sum.iter()
        .zip(&cnt)
        .map(|(s, &c)| (c > 0).then(|| s / c as f64))
        .collect()
}

/// Top-bucket mean minus bottom-bucket mean; `None` if either leg is empty.
pub fn long_short_return(assign: &QuantileAssignment, fwd: &[f64]) -> Option<f64> {
    let m = bucket_means(assign, fwd);
    Some(m[assign.q - 1]? - m[0]?)
}

/// Scores masked to the names that also have a finite forward return.
pub fn tradable_scores(scores: &[f64], fwd: &[f64]) -> Vec<f64> {
    scores
        .iter()
        .zip(fwd)
        .map(|(&s, &r)| if s.is_finite() && r.is_finite() { s } else { f64::NAN })
        .collect()
}
