//! Pairwise coreference classifier: a single-hidden-layer network over
//! fused mention vectors.
//!
//! For a candidate pair the feature vector is `[a ; b ; a⊙b]` — both fused
//! vectors plus their elementwise product, so the network sees alignment as
//! well as content. The network is deliberately small (tanh hidden layer of
//! 64 units, sigmoid output) because the heavy lifting happens in the
//! representations; it is trained with binary cross-entropy and plain
//! mini-batch gradient descent.
//!
//! Gradients are hand-derived; [`gradient_check`] compares every analytic
//! partial against a central finite difference and is exercised heavily in
//! the test suite.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::cluster::ScoredGraph;
use crate::corpus::Clustering;
use crate::math::{fabs, fmax, ln, sigmoid, sqrt, tanh};

/// Hidden layer width of the classifier.
pub const HIDDEN_SIZE: usize = 64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PairError {
    #[error("vectors have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("feature vector has length {got}, expected {expected}")]
    BadFeatureLength { expected: usize, got: usize },
    #[error("no usable training pairs (candidates empty or vectors missing)")]
    EmptyTrainingSet,
    #[error("no vector for mention `{0}`")]
    MissingVector(String),
}

/// `[a ; b ; a⊙b]` — concatenation plus elementwise product.
pub fn pair_features(a: &[f64], b: &[f64]) -> Result<Vec<f64>, PairError> {
    if a.len() != b.len() {
        return Err(PairError::LengthMismatch(a.len(), b.len()));
    }
    let mut out = Vec::with_capacity(3 * a.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out.extend(a.iter().zip(b).map(|(x, y)| x * y));
    Ok(out)
}

/// Training hyperparameters; defaults follow the reference configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many epochs without dev-loss improvement.
    pub patience: usize,
    /// Neighbors per mention when building training candidates.
    pub train_neighbor_size: usize,
    pub seed: u64,
}

impl Default for PairwiseConfig {
    fn default() -> Self {
        PairwiseConfig {
            learning_rate: 1e-3,
            batch_size: 16,
            epochs: 20,
            patience: 5,
            train_neighbor_size: 20,
            seed: 0,
        }
    }
}

/// One hidden tanh layer, one sigmoid output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct PairScorer {
    /// `w1[h][i]`: input `i` → hidden unit `h`.
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

/// Per-parameter gradients, same shapes as the scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradients {
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl PairGradients {
    fn zeros(input_dim: usize, hidden: usize) -> Self {
        PairGradients {
            w1: vec![vec![0.0; input_dim]; hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
        }
    }

    fn add_scaled(&mut self, other: &PairGradients, scale: f64) {
        for (row, orow) in self.w1.iter_mut().zip(&other.w1) {
            for (x, ox) in row.iter_mut().zip(orow) {
                *x += scale * ox;
            }
        }
        for (x, ox) in self.b1.iter_mut().zip(&other.b1) {
            *x += scale * ox;
        }
        for (x, ox) in self.w2.iter_mut().zip(&other.w2) {
            *x += scale * ox;
        }
        self.b2 += scale * other.b2;
    }
}

impl PairScorer {
    /// Fresh scorer with the standard hidden width; weights drawn uniformly
    /// from ±1/√fan_in, biases zero. Deterministic for a given seed.
    pub fn new(input_dim: usize, seed: u64) -> Self {
        Self::with_hidden(input_dim, HIDDEN_SIZE, seed)
    }

    pub fn with_hidden(input_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let bound1 = 1.0 / sqrt(input_dim.max(1) as f64);
        let w1 = (0..hidden)
            .map(|_| (0..input_dim).map(|_| rng.random_range(-bound1..bound1)).collect())
            .collect();
        let bound2 = 1.0 / sqrt(hidden.max(1) as f64);
        let w2 = (0..hidden).map(|_| rng.random_range(-bound2..bound2)).collect();
        PairScorer { w1, b1: vec![0.0; hidden], w2, b2: 0.0 }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.first().map_or(0, Vec::len)
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.len()
    }

    fn forward(&self, features: &[f64]) -> Result<(Vec<f64>, f64), PairError> {
        if features.len() != self.input_dim() {
            return Err(PairError::BadFeatureLength {
                expected: self.input_dim(),
                got: features.len(),
            });
        }
        let hidden: Vec<f64> = self
            .w1
            .iter()
            .zip(&self.b1)
            .map(|(row, b)| tanh(crate::math::dot(row, features) + b))
            .collect();
        let z = crate::math::dot(&self.w2, &hidden) + self.b2;
        Ok((hidden, sigmoid(z)))
    }

    /// Coreference probability, strictly inside (0, 1).
    pub fn score(&self, features: &[f64]) -> Result<f64, PairError> {
        Ok(self.forward(features)?.1)
    }

    pub fn score_pair(&self, a: &[f64], b: &[f64]) -> Result<f64, PairError> {
        self.score(&pair_features(a, b)?)
    }

    /// Binary cross-entropy against `label` ∈ {0, 1} and its gradients.
    pub fn loss_and_gradients(
        &self,
        features: &[f64],
        label: f64,
    ) -> Result<(f64, PairGradients), PairError> {
        let (hidden, p) = self.forward(features)?;
        let loss = -(label * ln(p) + (1.0 - label) * ln(1.0 - p));
        let dz2 = p - label;
        let mut grads = PairGradients::zeros(self.input_dim(), self.hidden_dim());
        grads.b2 = dz2;
        for (g2, h) in grads.w2.iter_mut().zip(&hidden) {
            *g2 = dz2 * h;
        }
        for h in 0..self.hidden_dim() {
            let dz1 = dz2 * self.w2[h] * (1.0 - hidden[h] * hidden[h]);
            grads.b1[h] = dz1;
            for (gx, x) in grads.w1[h].iter_mut().zip(features) {
                *gx = dz1 * x;
            }
        }
        Ok((loss, grads))
    }

    pub fn loss(&self, features: &[f64], label: f64) -> Result<f64, PairError> {
        let (_, p) = self.forward(features)?;
        Ok(-(label * ln(p) + (1.0 - label) * ln(1.0 - p)))
    }

    fn apply(&mut self, grads: &PairGradients, learning_rate: f64) {
        for (row, grow) in self.w1.iter_mut().zip(&grads.w1) {
            for (x, g) in row.iter_mut().zip(grow) {
                *x -= learning_rate * g;
            }
        }
        for (x, g) in self.b1.iter_mut().zip(&grads.b1) {
            *x -= learning_rate * g;
        }
        for (x, g) in self.w2.iter_mut().zip(&grads.w2) {
            *x -= learning_rate * g;
        }
        self.b2 -= learning_rate * grads.b2;
    }
}

/// Compare every analytic partial derivative against a central finite
/// difference with step `h`. Returns the worst relative error, falling back
/// to the absolute error when both derivatives are smaller than 1e-8 (a
/// saturated/zero-gradient point, where the ratio is meaningless).
pub fn gradient_check(
    scorer: &PairScorer,
    features: &[f64],
    label: f64,
    h: f64,
) -> Result<f64, PairError> {
    let (_, analytic) = scorer.loss_and_gradients(features, label)?;
    let mut worst = 0.0f64;
    let mut check = |analytic: f64, perturb: &mut dyn FnMut(&mut PairScorer, f64)| -> Result<(), PairError> {
        let mut plus = scorer.clone();
        perturb(&mut plus, h);
        let mut minus = scorer.clone();
        perturb(&mut minus, -h);
        let numeric = (plus.loss(features, label)? - minus.loss(features, label)?) / (2.0 * h);
        let denom = fmax(fabs(numeric), fabs(analytic));
        let err = if denom < 1e-8 { fabs(numeric - analytic) } else { fabs(numeric - analytic) / denom };
        worst = fmax(worst, err);
        Ok(())
    };
    for i in 0..scorer.hidden_dim() {
        for j in 0..scorer.input_dim() {
            check(analytic.w1[i][j], &mut |s, d| s.w1[i][j] += d)?;
        }
        check(analytic.b1[i], &mut |s, d| s.b1[i] += d)?;
        check(analytic.w2[i], &mut |s, d| s.w2[i] += d)?;
    }
    check(analytic.b2, &mut |s, d| s.b2 += d)?;
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseEpoch {
    pub epoch: usize,
    /// Mean BCE over the training pairs after this epoch's update was
    /// accepted; never increases from one accepted epoch to the next.
    pub train_loss: f64,
    pub dev_loss: Option<f64>,
    pub learning_rate: f64,
    /// True when the raw update regressed the train loss and was rolled
    /// back (the learning rate is halved in response).
    pub reverted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPairwise {
    pub scorer: PairScorer,
    pub history: Vec<PairwiseEpoch>,
    /// All training labels were identical; the model trains anyway but a
    /// probability threshold cannot separate anything it never saw.
    pub uniform_labels: bool,
    /// Candidate pairs dropped because a fused vector was missing.
    pub skipped_pairs: usize,
}

/// Train the classifier on candidate pairs labeled by the gold clustering
/// (positive iff both mentions share a gold cluster).
///
/// A small dev slice (one pair in ten, at least one) is carved off for
/// early stopping unless `dev` is supplied. Each epoch's update must not
/// regress the full-pass training loss; a regressing update is rolled back
/// and the learning rate halved, so the recorded loss curve is
/// non-increasing. The returned scorer is the one with the best dev loss.
pub fn train_pairwise(
    candidates: &BTreeSet<(String, String)>,
    vectors: &BTreeMap<String, Vec<f64>>,
    gold: &Clustering,
    dev: Option<&BTreeSet<(String, String)>>,
    config: &PairwiseConfig,
) -> Result<TrainedPairwise, PairError> {
    let assignment = gold.assignment();
    let mut skipped = 0usize;
    let mut build = |pairs: &BTreeSet<(String, String)>| -> Vec<(Vec<f64>, f64)> {
        let mut out = Vec::new();
        for (a, b) in pairs {
            let (Some(va), Some(vb)) = (vectors.get(a), vectors.get(b)) else {
                skipped += 1;
                continue;
            };
            let label = match (assignment.get(a), assignment.get(b)) {
                (Some(ca), Some(cb)) if ca == cb => 1.0,
                _ => 0.0,
            };
            // canonical order is already guaranteed by the BTreeSet key,
            // so identical pairs always produce identical features
            out.push((pair_features(va, vb).expect("equal-length fused vectors"), label));
        }
        out
    };
    let mut train_set = build(candidates);
    let mut dev_set = dev.map(|d| build(d));
    if train_set.is_empty() {
        return Err(PairError::EmptyTrainingSet);
    }

    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    if dev_set.is_none() && train_set.len() >= 2 {
        // deterministic 10% dev split (at least one pair)
        train_set.shuffle(&mut rng);
        let n_dev = (train_set.len() / 10).max(1);
        dev_set = Some(train_set.split_off(train_set.len() - n_dev));
    }

    let uniform_labels = {
        let first = train_set[0].1;
        train_set.iter().all(|(_, l)| *l == first)
    };

    let input_dim = train_set[0].0.len();
    let mut scorer = PairScorer::new(input_dim, config.seed);
    let mean_loss = |s: &PairScorer, set: &[(Vec<f64>, f64)]| -> Result<f64, PairError> {
        let mut sum = 0.0;
        for (f, l) in set {
            sum += s.loss(f, *l)?;
        }
        Ok(sum / set.len().max(1) as f64)
    };

    let mut learning_rate = config.learning_rate;
    let mut prev_train = mean_loss(&scorer, &train_set)?;
    let mut history = Vec::new();
    let mut best: Option<(f64, PairScorer)> = None;
    let mut stale = 0usize;

    for epoch in 1..=config.epochs {
        let snapshot = scorer.clone();
        train_set.shuffle(&mut rng);
        for batch in train_set.chunks(config.batch_size.max(1)) {
            let mut grads = PairGradients::zeros(input_dim, scorer.hidden_dim());
            for (f, l) in batch {
                let (_, g) = scorer.loss_and_gradients(f, *l)?;
                grads.add_scaled(&g, 1.0 / batch.len() as f64);
            }
            scorer.apply(&grads, learning_rate);
        }
        let mut train_loss = mean_loss(&scorer, &train_set)?;
        let mut reverted = false;
        if train_loss > prev_train {
            scorer = snapshot;
            learning_rate /= 2.0;
            train_loss = prev_train;
            reverted = true;
        }
        prev_train = train_loss;

        let dev_loss = match &dev_set {
            Some(d) if !d.is_empty() => Some(mean_loss(&scorer, d)?),
            _ => None,
        };
        history.push(PairwiseEpoch { epoch, train_loss, dev_loss, learning_rate, reverted });

        if let Some(dl) = dev_loss {
            let improved = best.as_ref().is_none_or(|(b, _)| dl < *b);
            if improved {
                best = Some((dl, scorer.clone()));
                stale = 0;
            } else {
                stale += 1;
                if stale > config.patience {
                    break;
                }
            }
        }
        if learning_rate < 1e-12 {
            break;
        }
    }

    let scorer = best.map(|(_, s)| s).unwrap_or(scorer);
    Ok(TrainedPairwise { scorer, history, uniform_labels, skipped_pairs: skipped })
}

/// Score every candidate pair and assemble the graph that clustering
/// consumes. The universe is the full vector set, so mentions without any
/// candidate edge still appear (as singletons after clustering).
pub fn score_candidates(
    scorer: &PairScorer,
    candidates: &BTreeSet<(String, String)>,
    vectors: &BTreeMap<String, Vec<f64>>,
) -> Result<ScoredGraph, PairError> {
    let mut graph = ScoredGraph::new(vectors.keys().cloned());
    for (a, b) in candidates {
        let va = vectors.get(a).ok_or_else(|| PairError::MissingVector(a.clone()))?;
        let vb = vectors.get(b).ok_or_else(|| PairError::MissingVector(b.clone()))?;
        let p = scorer.score_pair(va, vb)?;
        graph
            .insert(a, b, p)
            .expect("candidate pairs are canonical, deduplicated, and inside the universe");
    }
    Ok(graph)
}
