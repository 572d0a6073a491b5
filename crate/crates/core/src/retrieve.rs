//! Candidate retrieval: a trainable linear projection plus cosine k-NN.
//!
//! Scoring every mention pair is quadratic in corpus size, so the pipeline
//! first retrieves, for every mention, its k nearest neighbors in a
//! projected embedding space and only classifies those pairs. The
//! projection is a single linear map trained with a margin-based
//! contrastive loss: pull projected coreferent mentions together, push the
//! hardest in-batch non-coreferent mention away.
//!
//! The projection starts as a rectangular identity, so an untrained
//! retriever behaves exactly like k-NN on the raw fused vectors.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::corpus::{Clustering, Mention};
use crate::math::{cosine, norm};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RetrieveError {
    #[error("vector for `{id}` has length {got}, expected {expected}")]
    LengthMismatch { id: String, expected: usize, got: usize },
    #[error("no positive training pairs: gold clustering has no within-vector links")]
    NoPositivePairs,
    #[error("projection expects input length {expected}, got {got}")]
    BadInput { expected: usize, got: usize },
}

/// Retrieval hyperparameters. Defaults follow the reference configuration
/// (k=20 neighbors for building training pairs, k=10 at evaluation time).
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalConfig {
    pub train_neighbor_size: usize,
    pub eval_neighbor_size: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many epochs without dev-recall improvement.
    pub patience: usize,
    /// Contrastive margin between positive and hardest-negative cosine.
    pub margin: f64,
    /// Output dimension of the projection; `None` keeps the input size.
    pub projection_dim: Option<usize>,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            train_neighbor_size: 20,
            eval_neighbor_size: 10,
            learning_rate: 1e-2,
            batch_size: 16,
            epochs: 50,
            patience: 10,
            margin: 0.2,
            projection_dim: None,
        }
    }
}

/// A dense linear map, stored row-major (`weights[out][in]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub weights: Vec<Vec<f64>>,
}

impl Projection {
    /// Rectangular identity: copies (or truncates to) the first
    /// `output_dim` coordinates. With `output_dim == input_dim` this is a
    /// no-op map, which makes the untrained retriever equivalent to k-NN on
    /// the raw vectors.
    pub fn identity(output_dim: usize, input_dim: usize) -> Self {
        let weights = (0..output_dim)
            .map(|i| {
                let mut row = vec![0.0; input_dim];
                if i < input_dim {
                    row[i] = 1.0;
                }
                row
            })
            .collect();
        Projection { weights }
    }

    pub fn output_dim(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>, RetrieveError> {
        if v.len() != self.input_dim() {
            return Err(RetrieveError::BadInput { expected: self.input_dim(), got: v.len() });
        }
        Ok(self.weights.iter().map(|row| crate::math::dot(row, v)).collect())
    }

    pub fn project_all(
        &self,
        vectors: &BTreeMap<String, Vec<f64>>,
    ) -> Result<BTreeMap<String, Vec<f64>>, RetrieveError> {
        vectors.iter().map(|(id, v)| Ok((id.clone(), self.project(v)?))).collect()
    }
}

/// For every mention, pair it with its k nearest neighbors by cosine
/// similarity. `k` is clamped to `n - 1`; exact similarity ties break
/// toward the smaller mention id. The result is a set of canonical
/// (smaller-id-first) unordered pairs — a pair retrieved from either
/// endpoint appears once.
///
/// Fewer than two mentions yield an empty set.
pub fn knn_candidates(
    vectors: &BTreeMap<String, Vec<f64>>,
    k: usize,
) -> Result<BTreeSet<(String, String)>, RetrieveError> {
    let ids: Vec<&String> = vectors.keys().collect();
    let n = ids.len();
    if let Some(first) = ids.first() {
        let expected = vectors[*first].len();
        for id in &ids {
            if vectors[*id].len() != expected {
                return Err(RetrieveError::LengthMismatch {
                    id: (*id).clone(),
                    expected,
                    got: vectors[*id].len(),
                });
            }
        }
    }
    let mut out = BTreeSet::new();
    if n < 2 || k == 0 {
        return Ok(out);
    }
    let k = k.min(n - 1);
    for a in &ids {
        let mut scored: Vec<(f64, &String)> = ids
            .iter()
            .filter(|b| *b != a)
            .map(|b| (cosine(&vectors[*a], &vectors[*b]), *b))
            .collect();
        scored.sort_by(|x, y| y.0.total_cmp(&x.0).then_with(|| x.1.cmp(y.1)));
        for (_, b) in scored.into_iter().take(k) {
            out.insert(Mention::pair_key(a, b));
        }
    }
    Ok(out)
}

/// Fraction of gold coreferent links present in the candidate set. A gold
/// clustering without any links (all singletons) counts as fully recalled.
pub fn recall_at_k(candidates: &BTreeSet<(String, String)>, gold: &Clustering) -> f64 {
    let links = gold.links();
    if links.is_empty() {
        return 1.0;
    }
    let hit = links.iter().filter(|l| candidates.contains(*l)).count();
    hit as f64 / links.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalEpoch {
    pub epoch: usize,
    /// Mean hinge loss over contributing pairs.
    pub train_loss: f64,
    /// recall@eval_k on the dev vectors (train vectors when no dev given).
    pub dev_recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedRetrieval {
    pub projection: Projection,
    pub history: Vec<RetrievalEpoch>,
    pub best_epoch: usize,
    pub best_recall: f64,
}

/// ∂cos(u, v)/∂u.
fn d_cos_du(u: &[f64], v: &[f64]) -> Vec<f64> {
    let nu = norm(u);
    let nv = norm(v);
    let c = crate::math::dot(u, v) / (nu * nv);
    u.iter().zip(v).map(|(ui, vi)| vi / (nu * nv) - c * ui / (nu * nu)).collect()
}

/// Train the projection with the margin loss
/// `max(0, margin − cos(Wa, Wp) + cos(Wa, Wn*))`, where `n*` is the
/// hardest in-batch negative for the anchor. Gradients flow through both
/// arguments of each cosine. Deterministic given `seed`.
///
/// `dev` supplies held-out vectors and gold links for the early-stopping
/// recall; when absent the training split doubles as dev.
pub fn train_projection(
    vectors: &BTreeMap<String, Vec<f64>>,
    gold: &Clustering,
    dev: Option<(&BTreeMap<String, Vec<f64>>, &Clustering)>,
    config: &RetrievalConfig,
    seed: u64,
) -> Result<TrainedRetrieval, RetrieveError> {
    let input_dim = vectors.values().next().map_or(0, Vec::len);
    for (id, v) in vectors {
        if v.len() != input_dim {
            return Err(RetrieveError::LengthMismatch {
                id: id.clone(),
                expected: input_dim,
                got: v.len(),
            });
        }
    }
    let output_dim = config.projection_dim.unwrap_or(input_dim);
    let mut w = Projection::identity(output_dim, input_dim);

    // ordered (anchor, positive) pairs restricted to mentions we have
    // vectors for; cluster labels double as negative-sampling keys
    let assignment = gold.assignment();
    let mut positives: Vec<(String, String)> = Vec::new();
    for c in &gold.clusters {
        let ms: Vec<&String> = c.mentions.iter().filter(|m| vectors.contains_key(*m)).collect();
        for a in &ms {
            for p in &ms {
                if a != p {
                    positives.push(((*a).clone(), (*p).clone()));
                }
            }
        }
    }
    if positives.is_empty() {
        return Err(RetrieveError::NoPositivePairs);
    }

    let (dev_vectors, dev_gold) = match dev {
        Some((v, g)) => (v, g),
        None => (vectors, gold),
    };
    let eval_recall = |proj: &Projection| -> Result<f64, RetrieveError> {
        let projected = proj.project_all(dev_vectors)?;
        let candidates = knn_candidates(&projected, config.eval_neighbor_size)?;
        Ok(recall_at_k(&candidates, dev_gold))
    };

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut history = Vec::new();
    let mut best = (0usize, eval_recall(&w)?, w.clone());
    let mut stale = 0usize;

    for epoch in 1..=config.epochs {
        positives.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        for batch in positives.chunks(config.batch_size.max(1)) {
            let batch_ids: BTreeSet<String> =
                batch.iter().flat_map(|(a, p)| [a.clone(), p.clone()]).collect();
            let mut projected: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for m in &batch_ids {
                projected.insert(m.clone(), w.project(&vectors[m])?);
            }
            let mut grad = vec![vec![0.0; input_dim]; output_dim];
            let mut contributed = 0usize;
            for (a, p) in batch {
                let ua = projected[a].clone();
                let up = projected[p].clone();
                if norm(&ua) < 1e-12 || norm(&up) < 1e-12 {
                    continue;
                }
                // hardest negative: highest projected cosine to the anchor
                // among batch mentions from a different gold cluster
                let a_cluster = assignment.get(a);
                let mut neg: Option<(f64, &String)> = None;
                for m in &batch_ids {
                    if m == a || assignment.get(m) == a_cluster || norm(&projected[m]) < 1e-12 {
                        continue;
                    }
                    let c = cosine(&ua, &projected[m]);
                    let better = match neg {
                        None => true,
                        Some((bc, bm)) => c > bc || (c == bc && m < bm),
                    };
                    if better {
                        neg = Some((c, m));
                    }
                }
                let Some((cos_neg, n)) = neg else { continue };
                let n = n.clone();
                let cos_pos = cosine(&ua, &up);
                let hinge = config.margin - cos_pos + cos_neg;
                loss_sum += crate::math::fmax(0.0, hinge);
                loss_count += 1;
                if hinge <= 0.0 {
                    continue;
                }
                contributed += 1;
                let un = projected[&n].clone();
                // d loss = -d cos(ua, up) + d cos(ua, un)
                let ga = {
                    let gp = d_cos_du(&ua, &up);
                    let gn = d_cos_du(&ua, &un);
                    gp.iter().zip(&gn).map(|(x, y)| -x + y).collect::<Vec<f64>>()
                };
                let gp = d_cos_du(&up, &ua).iter().map(|x| -x).collect::<Vec<f64>>();
                let gn = d_cos_du(&un, &ua);
                for (gout, src) in [(&ga, a), (&gp, p), (&gn, &n)] {
                    let x = &vectors[src];
                    for i in 0..output_dim {
                        if gout[i] == 0.0 {
                            continue;
                        }
                        let gi = gout[i];
                        let row = &mut grad[i];
                        for (rj, xj) in row.iter_mut().zip(x) {
                            *rj += gi * xj;
                        }
                    }
                }
            }
            if contributed > 0 {
                let scale = config.learning_rate / contributed as f64;
                for i in 0..output_dim {
                    for j in 0..input_dim {
                        w.weights[i][j] -= scale * grad[i][j];
                    }
                }
            }
        }
        let train_loss = if loss_count > 0 { loss_sum / loss_count as f64 } else { 0.0 };
        let dev_recall = eval_recall(&w)?;
        history.push(RetrievalEpoch { epoch, train_loss, dev_recall });
        if dev_recall > best.1 {
            best = (epoch, dev_recall, w.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale > config.patience {
                break;
            }
        }
    }

    Ok(TrainedRetrieval {
        projection: best.2,
        history,
        best_epoch: best.0,
        best_recall: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Cluster;
    use alloc::string::ToString;

    fn vecs(entries: &[(&str, &[f64])]) -> BTreeMap<String, Vec<f64>> {
        entries.iter().map(|(id, v)| (id.to_string(), v.to_vec())).collect()
    }

    #[test]
    fn knn_pairs_nearest_neighbors_in_both_directions() {
        // c is far from everything, but still claims its nearest neighbor b
        let v = vecs(&[
            ("a", &[1.0, 0.0]),
            ("b", &[0.9, 0.1]),
            ("c", &[-1.0, 0.0]),
        ]);
        let pairs = knn_candidates(&v, 1).unwrap();
        let expect: BTreeSet<(String, String)> = [
            ("a".to_string(), "b".to_string()),
            ("b".to_string(), "c".to_string()),
        ]
        .into_iter()
        .collect();
        assert_eq!(pairs, expect);
    }

    #[test]
    fn knn_clamps_k_and_handles_tiny_inputs() {
        let v = vecs(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
        let all = knn_candidates(&v, 99).unwrap();
        assert_eq!(all.len(), 1);
        let one = vecs(&[("a", &[1.0, 0.0])]);
        assert!(knn_candidates(&one, 5).unwrap().is_empty());
        assert!(knn_candidates(&BTreeMap::new(), 5).unwrap().is_empty());
        assert!(knn_candidates(&v, 0).unwrap().is_empty());
    }

    #[test]
    fn knn_at_n_minus_1_returns_every_pair() {
        let v = vecs(&[
            ("a", &[1.0, 0.0]),
            ("b", &[0.5, 0.5]),
            ("c", &[0.0, 1.0]),
            ("d", &[-0.5, 0.5]),
        ]);
        let pairs = knn_candidates(&v, 3).unwrap();
        assert_eq!(pairs.len(), 6); // C(4,2)
    }

    #[test]
    fn knn_ties_break_toward_smaller_id() {
        // b and c are identical, both at the same cosine from a; with k=1
        // the anchor a must pick b
        let v = vecs(&[("a", &[1.0, 0.0]), ("b", &[1.0, 1.0]), ("c", &[1.0, 1.0])]);
        let pairs = knn_candidates(&v, 1).unwrap();
        assert!(pairs.contains(&("a".to_string(), "b".to_string())));
        assert!(!pairs.contains(&("a".to_string(), "c".to_string())));
    }

    #[test]
    fn knn_rejects_mismatched_lengths() {
        let mut v = vecs(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
        v.insert("c".to_string(), alloc::vec![1.0]);
        assert!(matches!(
            knn_candidates(&v, 1),
            Err(RetrieveError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn identity_projection_changes_nothing() {
        let v = vecs(&[("a", &[0.3, -0.7, 2.0]), ("b", &[1.0, 0.0, 0.5]), ("c", &[0.0, 1.0, -1.0])]);
        let p = Projection::identity(3, 3);
        let projected = p.project_all(&v).unwrap();
        assert_eq!(projected, v);
        assert_eq!(
            knn_candidates(&projected, 2).unwrap(),
            knn_candidates(&v, 2).unwrap()
        );
    }

    #[test]
    fn rectangular_identity_truncates() {
        let p = Projection::identity(2, 4);
        assert_eq!(p.project(&[1.0, 2.0, 3.0, 4.0]).unwrap(), alloc::vec![1.0, 2.0]);
        assert!(matches!(p.project(&[1.0]), Err(RetrieveError::BadInput { .. })));
    }

    #[test]
    fn recall_is_one_when_gold_has_no_links() {
        let gold = Clustering::new(alloc::vec![Cluster::new("g", ["a".to_string()])]);
        assert_eq!(recall_at_k(&BTreeSet::new(), &gold), 1.0);
    }

    #[test]
    fn recall_counts_recovered_links() {
        let gold = Clustering::new(alloc::vec![Cluster::new(
            "g",
            ["a".to_string(), "b".to_string(), "c".to_string()]
        )]);
        let candidates: BTreeSet<(String, String)> =
            [("a".to_string(), "b".to_string())].into_iter().collect();
        assert!((recall_at_k(&candidates, &gold) - 1.0 / 3.0).abs() < 1e-12);
    }

    /// Two clusters that raw cosine cannot separate (the informative
    /// coordinates are swamped by a shared one) but a linear projection can.
    fn separable_training_problem() -> (BTreeMap<String, Vec<f64>>, Clustering) {
        let mut vectors = BTreeMap::new();
        // coordinate 0: large shared noise; coordinates 1-2: cluster signal
        let specs: [(&str, f64, f64); 6] = [
            ("a1", 1.0, 0.05),
            ("a2", 1.0, -0.05),
            ("a3", 1.0, 0.1),
            ("b1", -1.0, 0.05),
            ("b2", -1.0, -0.05),
            ("b3", -1.0, 0.1),
        ];
        for (i, (id, signal, jitter)) in specs.iter().enumerate() {
            vectors.insert(
                id.to_string(),
                alloc::vec![10.0 + (i as f64) * 0.01, *signal, *jitter],
            );
        }
        let gold = Clustering::new(alloc::vec![
            Cluster::new("A", ["a1".to_string(), "a2".to_string(), "a3".to_string()]),
            Cluster::new("B", ["b1".to_string(), "b2".to_string(), "b3".to_string()]),
        ]);
        (vectors, gold)
    }

    #[test]
    fn training_improves_recall_on_a_separable_problem() {
        let (vectors, gold) = separable_training_problem();
        let config = RetrievalConfig {
            eval_neighbor_size: 2,
            epochs: 80,
            learning_rate: 0.05,
            batch_size: 8,
            ..RetrievalConfig::default()
        };
        let before = recall_at_k(&knn_candidates(&vectors, 2).unwrap(), &gold);
        let trained = train_projection(&vectors, &gold, None, &config, 3).unwrap();
        assert!(trained.best_recall >= before, "{} < {before}", trained.best_recall);
        assert!(trained.best_recall > 0.9, "recall stayed at {}", trained.best_recall);
        assert_eq!(trained.projection.input_dim(), 3);
    }

    #[test]
    fn training_is_deterministic_for_a_fixed_seed() {
        let (vectors, gold) = separable_training_problem();
        let config = RetrievalConfig { epochs: 5, ..RetrievalConfig::default() };
        let a = train_projection(&vectors, &gold, None, &config, 9).unwrap();
        let b = train_projection(&vectors, &gold, None, &config, 9).unwrap();
        assert_eq!(a.projection, b.projection);
        assert_eq!(a.history, b.history);
        let c = train_projection(&vectors, &gold, None, &config, 10).unwrap();
        assert_eq!(c.history.len(), a.history.len()); // same epochs, possibly different params
    }

    #[test]
    fn training_without_positive_pairs_fails() {
        let v = vecs(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
        let gold = Clustering::new(alloc::vec![
            Cluster::new("g1", ["a".to_string()]),
            Cluster::new("g2", ["b".to_string()]),
        ]);
        assert_eq!(
            train_projection(&v, &gold, None, &RetrievalConfig::default(), 0),
            Err(RetrieveError::NoPositivePairs)
        );
    }

    #[test]
    fn zero_epochs_returns_the_identity() {
        let (vectors, gold) = separable_training_problem();
        let config = RetrievalConfig { epochs: 0, ..RetrievalConfig::default() };
        let trained = train_projection(&vectors, &gold, None, &config, 0).unwrap();
        assert_eq!(trained.projection, Projection::identity(3, 3));
        assert_eq!(trained.best_epoch, 0);
    }
}
