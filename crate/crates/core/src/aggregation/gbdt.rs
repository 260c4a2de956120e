//! Gradient-boosted regression trees under squared-error loss.
//!
//! With `l = (y - p)^2 / 2` every row has gradient `g = p - y` and hessian
//! `h = 1`. A leaf with sums `G`, `H` takes weight `-G / (H + lambda)`, and a
//! split of a node into `L` and `R` is worth
//!
//! ```text
//! gain = 1/2 [G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)] - gamma
//! ```
//!
//! Trees grow leaf-wise: the leaf whose best split has the highest positive
//! gain is split next, until `max_leaves` is reached or no leaf can improve.
//! Splits are found by exact enumeration over each node's sorted feature
//! values. Rows whose feature is missing go to whichever child gives the
//! larger gain; that choice is stored as the node's default direction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_schema, AggregationError, FeatureMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    /// Smallest number of training rows allowed in a child.
    pub min_leaf_rows: usize,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            learning_rate: 0.05,
            max_leaves: 31,
            max_depth: 6,
            lambda: 1.0,
            gamma: 0.0,
            min_leaf_rows: 20,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<(), AggregationError> {
        let bad = |m: &str| Err(AggregationError::InvalidParams(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if self.max_leaves < 1 || self.max_depth < 1 || self.min_leaf_rows < 1 {
            return bad("max_leaves, max_depth and min_leaf_rows must be positive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite() && self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("lambda and gamma must be finite and non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    /// Rows with `x <= threshold` go left.
    pub threshold: f64,
    /// Where rows with a missing value go.
    pub default_left: bool,
    pub gain: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub grad_sum: f64,
    pub hess_sum: f64,
    pub n_rows: usize,
    pub depth: usize,
    /// `-G / (H + lambda)`, unshrunk. Used for prediction at leaves.
    pub weight: f64,
    pub split: Option<Split>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Root first; children always follow their parent.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(&self, row: &[f64]) -> usize {
        let mut i = 0;
        while let Some(s) = &self.nodes[i].split {
            let x = row[s.feature];
            let left = if x.is_nan() { s.default_left } else { x <= s.threshold };
            i = if left { s.left } else { s.right };
        }
        i
    }

    /// Unshrunk leaf weight reached by `row`.
    pub fn value(&self, row: &[f64]) -> f64 {
        self.nodes[self.leaf(row)].weight
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.split.is_none()).count()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub names: Vec<String>,
    pub params: GbdtParams,
    /// Mean training target.
    pub base_score: f64,
    pub trees: Vec<Tree>,
    /// Regularized training objective before any tree and after each one.
    pub objective: Vec<f64>,
}

impl GbdtModel {
    /// `base + eta * sum_k tree_k(x)`.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.base_score + self.params.learning_rate * self.trees.iter().map(|t| t.value(row)).sum::<f64>()
    }

    pub fn predict(&self, fm: &FeatureMatrix) -> Result<Vec<f64>, AggregationError> {
        check_schema(&self.names, fm)?;
        Ok((0..fm.n_rows()).into_par_iter().map(|i| self.predict_row(fm.row(i))).collect())
    }
}

/// The split gain from child gradient and hessian sums.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    default_left: bool,
    gain: f64,
}

/// Training rows of one leaf: all rows, plus per feature the rows with a
/// finite value sorted ascending.
struct LeafRows {
    node: usize,
    rows: Vec<u32>,
    sorted: Vec<Vec<u32>>,
    best: Option<Candidate>,
}

struct Trainer<'a> {
    fm: &'a FeatureMatrix,
    params: &'a GbdtParams,
    grad: Vec<f64>,
}

impl Trainer<'_> {
    fn best_split(&self, leaf: &LeafRows, g_node: f64, n_node: usize) -> Option<Candidate> {
        let p = self.params;
        let min = p.min_leaf_rows;
        if n_node < 2 * min {
            return None;
        }
        let per_feature: Vec<Option<Candidate>> = leaf
            .sorted
            .par_iter()
            .enumerate()
            .map(|(j, order)| {
                let g_fin: f64 = order.iter().map(|&i| self.grad[i as usize]).sum();
                let n_fin = order.len();
                let (g_miss, n_miss) = (g_node - g_fin, n_node - n_fin);
                let mut best: Option<Candidate> = None;
                let mut gl = 0.0;
                for k in 0..n_fin.saturating_sub(1) {
                    let i = order[k] as usize;
                    gl += self.grad[i];
                    let (v, next) = (self.fm.get(i, j), self.fm.get(order[k + 1] as usize, j));
                    if v == next {
                        continue;
                    }
                    let nl = k + 1;
                    let nr = n_fin - nl;
                    let gr = g_fin - gl;
                    let mut consider = |default_left: bool| {
                        let (gl, nl, gr, nr) = if default_left {
                            (gl + g_miss, nl + n_miss, gr, nr)
                        } else {
                            (gl, nl, gr + g_miss, nr + n_miss)
                        };
                        if nl < min || nr < min {
                            return;
                        }
                        let gain = split_gain(gl, nl as f64, gr, nr as f64, p.lambda, p.gamma);
                        if best.is_none_or(|b| gain > b.gain) {
                            let mid = v + 0.5 * (next - v);
                            best = Some(Candidate {
                                feature: j,
                                threshold: if mid < next { mid } else { v },
                                default_left,
                                gain,
                            });
                        }
                    };
                    if n_miss == 0 {
                        consider(nl >= nr);
                    } else {
                        consider(true);
                        consider(false);
                    }
                }
                best
            })
            .collect();
        per_feature
            .into_iter()
            .flatten()
            .fold(None, |acc: Option<Candidate>, c| match acc {
                Some(a) if a.gain >= c.gain => Some(a),
                _ => Some(c),
            })
            .filter(|c| c.gain > 0.0)
    }

    fn node(&self, rows: &[u32], depth: usize) -> Node {
        let g: f64 = rows.iter().map(|&i| self.grad[i as usize]).sum();
        let h = rows.len() as f64;
        Node {
            grad_sum: g,
            hess_sum: h,
            n_rows: rows.len(),
            depth,
            weight: -g / (h + self.params.lambda),
            split: None,
        }
    }

    fn grow(&self, root_rows: &[u32], root_sorted: &[Vec<u32>], goes_left: &mut [bool]) -> (Tree, Vec<(usize, Vec<u32>)>) {
        let p = self.params;
        let mut nodes = vec![self.node(root_rows, 0)];
        let mut root = LeafRows {
            node: 0,
            rows: root_rows.to_vec(),
            sorted: root_sorted.to_vec(),
            best: None,
        };
        if p.max_depth > 0 {
            root.best = self.best_split(&root, nodes[0].grad_sum, nodes[0].n_rows);
        }
        let mut leaves = vec![root];
        while leaves.len() < p.max_leaves {
            let pick = leaves
                .iter()
                .enumerate()
                .filter_map(|(k, l)| l.best.map(|b| (k, b.gain)))
                .fold(None, |acc: Option<(usize, f64)>, (k, g)| match acc {
                    Some((_, best)) if best >= g => acc,
                    _ => Some((k, g)),
                });
            let Some((k, _)) = pick else { break };
            let leaf = leaves.swap_remove(k);
            let c = leaf.best.expect("picked leaf has a split");
            for &i in &leaf.rows {
                let x = self.fm.get(i as usize, c.feature);
                goes_left[i as usize] = if x.is_nan() { c.default_left } else { x <= c.threshold };
            }
            let (lrows, rrows): (Vec<u32>, Vec<u32>) = leaf.rows.iter().partition(|&&i| goes_left[i as usize]);
            let (lsorted, rsorted): (Vec<Vec<u32>>, Vec<Vec<u32>>) = leaf
                .sorted
                .par_iter()
                .map(|order| order.iter().partition::<Vec<u32>, _>(|&&i| goes_left[i as usize]))
                .unzip();
            let depth = nodes[leaf.node].depth + 1;
            let (li, ri) = (nodes.len(), nodes.len() + 1);
            nodes.push(self.node(&lrows, depth));
            nodes.push(self.node(&rrows, depth));
            nodes[leaf.node].split = Some(Split {
                feature: c.feature,
                threshold: c.threshold,
                default_left: c.default_left,
                gain: c.gain,
                left: li,
                right: ri,
            });
            for (node, rows, sorted) in [(li, lrows, lsorted), (ri, rrows, rsorted)] {
                let mut child = LeafRows {
                    node,
                    rows,
                    sorted,
                    best: None,
                };
                if depth < p.max_depth {
                    child.best = self.best_split(&child, nodes[node].grad_sum, nodes[node].n_rows);
                }
                leaves.push(child);
            }
        }
        let leaf_rows = leaves.into_iter().map(|l| (l.node, l.rows)).collect();
        (Tree { nodes }, leaf_rows)
    }
}

fn objective(y: &[f64], pred: &[f64], penalty: f64) -> f64 {
    0.5 * y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() + penalty
}

/// Fits `params.n_trees` rounds on the rows with a finite target.
///
/// The objective recorded after round `k` is the training loss plus, for
/// every tree so far, `gamma * leaves + lambda/2 * sum (eta * w)^2`, the
/// complexity of the tree as it enters the ensemble.
pub fn fit_gbdt(fm: &FeatureMatrix, params: &GbdtParams) -> Result<GbdtModel, AggregationError> {
    params.validate()?;
    if fm.n_features() == 0 {
        return Err(AggregationError::NoFactors);
    }
    let rows: Vec<usize> = (0..fm.n_rows()).filter(|&i| fm.y[i].is_finite()).collect();
    if rows.is_empty() {
        return Err(AggregationError::TooFewRows { need: 1, have: 0 });
    }
    // Compact copy of the training rows so indices fit in u32.
    let m = fm.n_features();
    let train = FeatureMatrix::from_rows(
        fm.names.clone(),
        &rows.iter().map(|&i| fm.row(i).to_vec()).collect::<Vec<_>>(),
        &rows.iter().map(|&i| fm.y[i]).collect::<Vec<_>>(),
    );
    let n = train.n_rows();
    let y = &train.y;
    let base = y.iter().sum::<f64>() / n as f64;
    let mut pred = vec![base; n];
    let root_rows: Vec<u32> = (0..n as u32).collect();
    let root_sorted: Vec<Vec<u32>> = (0..m)
        .into_par_iter()
        .map(|j| {
            let mut order: Vec<u32> = root_rows.iter().copied().filter(|&i| train.get(i as usize, j).is_finite()).collect();
            order.sort_by(|&a, &b| train.get(a as usize, j).total_cmp(&train.get(b as usize, j)).then(a.cmp(&b)));
            order
        })
        .collect();

    let eta = params.learning_rate;
    let mut penalty = 0.0;
    let mut history = vec![objective(y, &pred, penalty)];
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut goes_left = vec![false; n];
    for _ in 0..params.n_trees {
        let trainer = Trainer {
            fm: &train,
            params,
            grad: pred.iter().zip(y).map(|(p, t)| p - t).collect(),
        };
        let (tree, leaf_rows) = trainer.grow(&root_rows, &root_sorted, &mut goes_left);
        for (node, rows) in &leaf_rows {
            let step = eta * tree.nodes[*node].weight;
            for &i in rows {
                pred[i as usize] += step;
            }
            penalty += params.gamma + 0.5 * params.lambda * step * step;
        }
        history.push(objective(y, &pred, penalty));
        trees.push(tree);
    }
    Ok(GbdtModel {
        names: fm.names.clone(),
        params: params.clone(),
        base_score: base,
        trees,
        objective: history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    pub name: String,
    /// Sum of realized split gains.
    pub gain: f64,
    /// Number of splits.
    pub frequency: usize,
    /// Share of total gain; zero when no split was made.
    pub gain_share: f64,
}

/// Per-feature gain and split count, highest gain first. Empty for a model
/// without trees.
pub fn feature_importance(model: &GbdtModel) -> Vec<Importance> {
    if model.trees.is_empty() {
        return Vec::new();
    }
    let mut gain = vec![0.0; model.names.len()];
    let mut freq = vec![0usize; model.names.len()];
    for s in model.trees.iter().flat_map(|t| &t.nodes).filter_map(|n| n.split.as_ref()) {
        gain[s.feature] += s.gain;
        freq[s.feature] += 1;
    }
    let total: f64 = gain.iter().sum();
    let mut out: Vec<Importance> = model
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| Importance {
            name: name.clone(),
            gain: gain[j],
            frequency: freq[j],
            gain_share: if total > 0.0 { gain[j] / total } else { 0.0 },
        })
        .collect();
    out.sort_by(|a, b| b.gain.total_cmp(&a.gain));
    out
}
