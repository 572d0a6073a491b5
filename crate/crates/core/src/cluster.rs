//! Agglomerative clustering over pairwise coreference scores.
//!
//! The classifier produces probabilities for a sparse set of mention pairs
//! (the retrieval candidates). [`ScoredGraph`] holds those edges over an
//! explicit mention universe; absent edges count as score 0. Clusters are
//! grown greedily: repeatedly merge the pair of clusters with the highest
//! average pairwise score, while that average stays at or above the
//! threshold. Exact score ties break toward the lexicographically smallest
//! pair of cluster-minimum mention ids, so the procedure is deterministic.
//!
//! [`connected_components`] is a cruder diagnostic variant that links every
//! pair scoring at or above the threshold and takes components. Unlike
//! average-link merging, it is monotone in the threshold: raising it always
//! refines the partition.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::corpus::{Clustering, Mention};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("self edge on mention `{0}`")]
    SelfEdge(String),
    #[error("edge references mention `{0}` outside the graph universe")]
    UnknownMention(String),
    #[error("edge ({0}, {1}) inserted twice")]
    DuplicateEdge(String, String),
    #[error("score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
}

/// Pairwise scores over a fixed mention universe. Mentions without any
/// edge are perfectly valid; they simply end up as singletons.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoredGraph {
    mentions: BTreeSet<String>,
    edges: BTreeMap<(String, String), f64>,
}

impl ScoredGraph {
    pub fn new(mentions: impl IntoIterator<Item = String>) -> Self {
        ScoredGraph { mentions: mentions.into_iter().collect(), edges: BTreeMap::new() }
    }

    pub fn mentions(&self) -> &BTreeSet<String> {
        &self.mentions
    }

    pub fn edges(&self) -> &BTreeMap<(String, String), f64> {
        &self.edges
    }

    pub fn insert(&mut self, a: &str, b: &str, score: f64) -> Result<(), GraphError> {
        if a == b {
            return Err(GraphError::SelfEdge(a.to_string()));
        }
        for m in [a, b] {
            if !self.mentions.contains(m) {
                return Err(GraphError::UnknownMention(m.to_string()));
            }
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(GraphError::ScoreOutOfRange(score));
        }
        let key = Mention::pair_key(a, b);
        if self.edges.contains_key(&key) {
            return Err(GraphError::DuplicateEdge(key.0, key.1));
        }
        self.edges.insert(key, score);
        Ok(())
    }

    /// Score of an edge in either orientation; absent edges score 0.
    pub fn score(&self, a: &str, b: &str) -> f64 {
        self.edges.get(&Mention::pair_key(a, b)).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterConfig {
    /// Minimum average pairwise score for a merge (and for a link in the
    /// connected-components variant).
    pub threshold: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig { threshold: 0.5 }
    }
}

/// Greedy average-link agglomeration. Starts from singletons and merges the
/// best cluster pair while its average pairwise score (absent edges = 0) is
/// at or above the threshold. Returns a partition of the graph universe.
pub fn agglomerate(graph: &ScoredGraph, config: &ClusterConfig) -> Clustering {
    let ids: Vec<String> = graph.mentions.iter().cloned().collect();
    let n = ids.len();
    let mut members: Vec<BTreeSet<String>> =
        ids.iter().map(|m| BTreeSet::from([m.clone()])).collect();
    let mut active: Vec<bool> = alloc::vec![true; n];
    // cross-cluster score sums; kept exact under merges because the
    // average-link sum is additive: sum(A∪B, C) = sum(A, C) + sum(B, C)
    let mut sums: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for ((a, b), s) in &graph.edges {
        let i = ids.binary_search(a).expect("edge mention in universe");
        let j = ids.binary_search(b).expect("edge mention in universe");
        let key = (i.min(j), i.max(j));
        sums.insert(key, *s);
    }
    let cross_sum = |sums: &BTreeMap<(usize, usize), f64>, i: usize, j: usize| -> f64 {
        sums.get(&(i.min(j), i.max(j))).copied().unwrap_or(0.0)
    };

    loop {
        let mut best: Option<(f64, (String, String), usize, usize)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in i + 1..n {
                if !active[j] {
                    continue;
                }
                let avg = cross_sum(&sums, i, j) / (members[i].len() * members[j].len()) as f64;
                let min_i = members[i].iter().next().expect("non-empty cluster");
                let min_j = members[j].iter().next().expect("non-empty cluster");
                let tie = Mention::pair_key(min_i, min_j);
                let better = match &best {
                    None => true,
                    Some((bavg, btie, _, _)) => avg > *bavg || (avg == *bavg && tie < *btie),
                };
                if better {
                    best = Some((avg, tie, i, j));
                }
            }
        }
        match best {
            Some((avg, _, i, j)) if avg >= config.threshold => {
                // fold j into i, updating cross sums additively
                for k in 0..n {
                    if k == i || k == j || !active[k] {
                        continue;
                    }
                    let add = cross_sum(&sums, j, k);
                    if add != 0.0 {
                        let key = (i.min(k), i.max(k));
                        *sums.entry(key).or_insert(0.0) += add;
                    }
                }
                let moved = core::mem::take(&mut members[j]);
                members[i].extend(moved);
                active[j] = false;
            }
            _ => break,
        }
    }

    Clustering::from_groups(
        members
            .into_iter()
            .zip(active)
            .filter_map(|(m, keep)| keep.then_some(m))
            .collect(),
    )
}

/// Link every pair scoring at or above `threshold` and return the connected
/// components. Coarser than average-link merging; useful as a diagnostic
/// upper bound on cluster sizes.
pub fn connected_components(graph: &ScoredGraph, threshold: f64) -> Clustering {
    let ids: Vec<String> = graph.mentions.iter().cloned().collect();
    let mut parent: Vec<usize> = (0..ids.len()).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    for ((a, b), s) in &graph.edges {
        if *s >= threshold {
            let i = ids.binary_search(a).expect("edge mention in universe");
            let j = ids.binary_search(b).expect("edge mention in universe");
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri] = rj;
            }
        }
    }
    let mut groups: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
    for i in 0..ids.len() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().insert(ids[i].clone());
    }
    Clustering::from_groups(groups.into_values().collect())
}
