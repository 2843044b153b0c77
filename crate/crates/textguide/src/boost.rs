//! Multiclass gradient boosting over sparse count features, with gain-based
//! feature importances.
//!
//! One regression tree per class per round is fit to the softmax
//! cross-entropy residuals. Splits maximize variance reduction, leaf values
//! are damped Newton steps, and every committed split's gain is accumulated
//! per feature. Training is deterministic: no subsampling, thresholds at
//! midpoints between consecutive distinct values, and first-best tie-breaks
//! in (feature, threshold) order, so results are invariant to row order.

use crate::error::{Error, Result};
use crate::features::CountVector;

const HESSIAN_REG: f64 = 1e-6;
const MIN_GAIN: f64 = 1e-12;

/// Boosting hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            rounds: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_samples_leaf: 5,
            seed: 42,
        }
    }
}

impl BoostParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if self.max_depth == 0 || self.max_depth > 6 {
            return Err(Error::InvalidConfig(format!(
                "max_depth must be in [1, 6], got {}",
                self.max_depth
            )));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig("min_samples_leaf must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn eval(&self, x: &CountVector) -> f64 {
        match self {
            Node::Leaf { value } => *value,
            Node::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                let v = x.get(feature).copied().unwrap_or(0) as f64;
                if v <= *threshold {
                    left.eval(x)
                } else {
                    right.eval(x)
                }
            }
        }
    }

    fn walk_gains(&self, out: &mut Vec<(usize, f64)>) {
        if let Node::Split {
            feature,
            gain,
            left,
            right,
            ..
        } = self
        {
            out.push((*feature, *gain));
            left.walk_gains(out);
            right.walk_gains(out);
        }
    }
}

/// Trained additive ensemble: `trees[round][class]`.
#[derive(Debug, Clone)]
pub struct BoostModel {
    pub classes: Vec<String>,
    trees: Vec<Vec<Node>>,
    /// Cumulative split gain per feature index.
    pub feature_gain: Vec<f64>,
    /// Mean training loss before each round, plus the final loss;
    /// length rounds + 1, non-increasing.
    pub loss_trace: Vec<f64>,
    pub n_features: usize,
    pub params: BoostParams,
}

impl BoostModel {
    /// Raw additive scores per class (before softmax).
    pub fn scores(&self, x: &CountVector) -> Vec<f64> {
        let mut scores = vec![0.0; self.classes.len()];
        for round in &self.trees {
            for (c, tree) in round.iter().enumerate() {
                scores[c] += tree.eval(x);
            }
        }
        scores
    }

    /// Every (feature, gain) pair recorded at a split, by walking all trees.
    pub fn split_gains(&self) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for round in &self.trees {
            for tree in round {
                tree.walk_gains(&mut out);
            }
        }
        out
    }
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

struct TrainState {
    /// Feature-major dense value matrix.
    cols: Vec<Vec<f64>>,
    /// Row indices sorted by (value, row) per feature.
    sorted: Vec<Vec<u32>>,
    n_rows: usize,
}

struct SplitCandidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn find_split(
    state: &TrainState,
    rows: &[u32],
    grad: &[f64],
    min_leaf: usize,
    in_node: &mut [bool],
) -> Option<SplitCandidate> {
    if rows.len() < 2 * min_leaf {
        return None;
    }
    in_node.iter_mut().for_each(|b| *b = false);
    for &r in rows {
        in_node[r as usize] = true;
    }
    let total_g: f64 = rows.iter().map(|&r| grad[r as usize]).sum();
    let total_n = rows.len() as f64;
    let parent = total_g * total_g / total_n;

    let mut best: Option<SplitCandidate> = None;
    for (feature, order) in state.sorted.iter().enumerate() {
        let col = &state.cols[feature];
        let mut left_g = 0.0;
        let mut left_n = 0usize;
        let mut prev_value: Option<f64> = None;
        for &r in order {
            if !in_node[r as usize] {
                continue;
            }
            let value = col[r as usize];
            if let Some(prev) = prev_value {
                if value > prev
                    && left_n >= min_leaf
                    && rows.len() - left_n >= min_leaf
                {
                    let right_g = total_g - left_g;
                    let right_n = total_n - left_n as f64;
                    let gain =
                        left_g * left_g / left_n as f64 + right_g * right_g / right_n - parent;
                    if gain > MIN_GAIN && best.as_ref().map_or(true, |b| gain > b.gain) {
                        best = Some(SplitCandidate {
                            feature,
                            threshold: (prev + value) / 2.0,
                            gain,
                        });
                    }
                }
            }
            left_g += grad[r as usize];
            left_n += 1;
            prev_value = Some(value);
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn fit_node(
    state: &TrainState,
    rows: Vec<u32>,
    grad: &[f64],
    hess: &[f64],
    depth: usize,
    params: &BoostParams,
    feature_gain: &mut [f64],
    in_node: &mut [bool],
) -> Node {
    let leaf = |rows: &[u32]| {
        let g: f64 = rows.iter().map(|&r| grad[r as usize]).sum();
        let h: f64 = rows.iter().map(|&r| hess[r as usize]).sum();
        Node::Leaf {
            value: params.learning_rate * g / (h + HESSIAN_REG),
        }
    };
    if depth >= params.max_depth {
        return leaf(&rows);
    }
    let Some(split) = find_split(state, &rows, grad, params.min_samples_leaf, in_node) else {
        return leaf(&rows);
    };
    feature_gain[split.feature] += split.gain;
    let col = &state.cols[split.feature];
    let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = rows
        .into_iter()
        .partition(|&r| col[r as usize] <= split.threshold);
    let left = fit_node(
        state, left_rows, grad, hess, depth + 1, params, feature_gain, in_node,
    );
    let right = fit_node(
        state, right_rows, grad, hess, depth + 1, params, feature_gain, in_node,
    );
    Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        gain: split.gain,
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// Train a multiclass boosted ensemble on count vectors in a feature space
/// of size `n_features`.
pub fn train_boost(
    x: &[CountVector],
    y: &[String],
    n_features: usize,
    params: &BoostParams,
) -> Result<BoostModel> {
    params.validate()?;
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "need matching |X| == |y| >= 2, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let mut classes: Vec<String> = y.to_vec();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::DegenerateTraining);
    }
    let class_of: Vec<usize> = y
        .iter()
        .map(|label| classes.iter().position(|c| c == label).unwrap())
        .collect();

    let n = x.len();
    let k = classes.len();
    let mut cols = vec![vec![0.0f64; n]; n_features];
    for (row, vec) in x.iter().enumerate() {
        for (&feature, &count) in vec {
            if feature < n_features {
                cols[feature][row] = count as f64;
            }
        }
    }
    let sorted = cols
        .iter()
        .map(|col| {
            let mut order: Vec<u32> = (0..n as u32).collect();
            order.sort_by(|&a, &b| {
                col[a as usize]
                    .partial_cmp(&col[b as usize])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            order
        })
        .collect();
    let state = TrainState {
        cols,
        sorted,
        n_rows: n,
    };

    let mut scores = vec![0.0f64; n * k];
    let mut feature_gain = vec![0.0f64; n_features];
    let mut trees: Vec<Vec<Node>> = Vec::with_capacity(params.rounds);
    let mut loss_trace = Vec::with_capacity(params.rounds + 1);
    let mut in_node = vec![false; state.n_rows];

    let mean_loss = |scores: &[f64]| -> f64 {
        let mut loss = 0.0;
        for row in 0..n {
            let probs = softmax(&scores[row * k..(row + 1) * k]);
            loss -= probs[class_of[row]].max(f64::MIN_POSITIVE).ln();
        }
        loss / n as f64
    };

    for _round in 0..params.rounds {
        loss_trace.push(mean_loss(&scores));
        let mut probs = vec![0.0f64; n * k];
        for row in 0..n {
            probs[row * k..(row + 1) * k]
                .copy_from_slice(&softmax(&scores[row * k..(row + 1) * k]));
        }
        let mut round_trees = Vec::with_capacity(k);
        for c in 0..k {
            let grad: Vec<f64> = (0..n)
                .map(|row| {
                    let target = if class_of[row] == c { 1.0 } else { 0.0 };
                    target - probs[row * k + c]
                })
                .collect();
            let hess: Vec<f64> = (0..n)
                .map(|row| {
                    let p = probs[row * k + c];
                    p * (1.0 - p)
                })
                .collect();
            let tree = fit_node(
                &state,
                (0..n as u32).collect(),
                &grad,
                &hess,
                0,
                params,
                &mut feature_gain,
                &mut in_node,
            );
            for row in 0..n {
                scores[row * k + c] += tree.eval(&x[row]);
            }
            round_trees.push(tree);
        }
        trees.push(round_trees);
    }
    loss_trace.push(mean_loss(&scores));

    Ok(BoostModel {
        classes,
        trees,
        feature_gain,
        loss_trace,
        n_features,
        params: params.clone(),
    })
}

/// Predicted label (argmax, ties to the earlier class) and softmax scores.
pub fn predict(model: &BoostModel, x: &CountVector) -> (String, Vec<f64>) {
    let probs = softmax(&model.scores(x));
    let mut best = 0;
    for (c, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = c;
        }
    }
    (model.classes[best].clone(), probs)
}
