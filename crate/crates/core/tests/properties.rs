//! Randomized checks of the structural guarantees the scoring and
//! clustering layers promise: metric symmetry and range, closure
//! semantics, singleton-stripping behaviour, error-taxonomy accounting,
//! and threshold monotonicity of the diagnostic clustering variant.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use cdecr_core::analyze::analyze;
use cdecr_core::cluster::{agglomerate, connected_components, ClusterConfig, ScoredGraph};
use cdecr_core::corpus::{Cluster, Clustering};
use cdecr_core::metrics::{b_cubed, ceaf_e, conll, lea, muc, score_report, SingletonMode};
use cdecr_core::retrieve::knn_candidates;
use proptest::prelude::*;

/// A random partition of `m0..m{n-1}`, encoded as one cluster label per
/// mention. Labels are arbitrary; grouping by label yields the partition.
fn partition_strategy(max_mentions: usize) -> impl Strategy<Value = Clustering> {
    (1..=max_mentions).prop_flat_map(|n| {
        proptest::collection::vec(0..5usize, n).prop_map(|labels| {
            let mut groups: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
            for (i, label) in labels.iter().enumerate() {
                groups.entry(*label).or_default().insert(format!("m{i}"));
            }
            Clustering::from_groups(groups.into_values().collect())
        })
    })
}

/// Two partitions over the same universe.
fn pair_strategy() -> impl Strategy<Value = (Clustering, Clustering)> {
    (1..=12usize).prop_flat_map(|n| {
        (
            proptest::collection::vec(0..5usize, n),
            proptest::collection::vec(0..5usize, n),
        )
            .prop_map(|(ka, ra)| {
                let build = |labels: &[usize]| {
                    let mut groups: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
                    for (i, label) in labels.iter().enumerate() {
                        groups.entry(*label).or_default().insert(format!("m{i}"));
                    }
                    Clustering::from_groups(groups.into_values().collect())
                };
                (build(&ka), build(&ra))
            })
    })
}

fn has_link(c: &Clustering) -> bool {
    c.clusters.iter().any(|cl| cl.mentions.len() > 1)
}

proptest! {
    /// Scoring a partition against itself is perfect for every metric as
    /// soon as the partition carries at least one link.
    #[test]
    fn identity_scores_are_perfect(key in partition_strategy(12)) {
        prop_assume!(has_link(&key));
        for f in [muc, b_cubed, ceaf_e, lea] {
            let prf = f(&key, &key);
            prop_assert!((prf.recall - 1.0).abs() < 1e-12);
            prop_assert!((prf.precision - 1.0).abs() < 1e-12);
            prop_assert!((prf.f1 - 1.0).abs() < 1e-12);
            prop_assert!(!prf.degenerate);
        }
    }

    /// Swapping key and response swaps recall and precision exactly.
    #[test]
    fn role_swap_transposes_recall_and_precision((key, resp) in pair_strategy()) {
        for f in [muc, b_cubed, ceaf_e, lea] {
            let fwd = f(&key, &resp);
            let rev = f(&resp, &key);
            prop_assert!((fwd.recall - rev.precision).abs() < 1e-12);
            prop_assert!((fwd.precision - rev.recall).abs() < 1e-12);
        }
    }

    /// Every reported number is finite and inside [0, 1]; the CoNLL value
    /// is exactly the mean of the three F1s that define it.
    #[test]
    fn scores_are_bounded_and_conll_is_the_mean((key, resp) in pair_strategy()) {
        let report = score_report(&key, &resp, SingletonMode::With);
        for prf in [report.muc, report.b_cubed, report.ceaf_e, report.lea] {
            for v in [prf.recall, prf.precision, prf.f1] {
                prop_assert!(v.is_finite());
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
        let mean = conll(&report.muc, &report.b_cubed, &report.ceaf_e);
        prop_assert_eq!(report.conll_f1, mean);
    }

    /// Cluster ids are names, nothing more: the same partition under
    /// different ids and different cluster order scores identically.
    #[test]
    fn cluster_ids_and_order_do_not_matter((key, resp) in pair_strategy()) {
        let relabel = |c: &Clustering| {
            let mut clusters: Vec<Cluster> = c
                .clusters
                .iter()
                .enumerate()
                .map(|(i, cl)| Cluster::new(format!("zz-{}", 999 - i), cl.mentions.clone()))
                .collect();
            clusters.reverse();
            Clustering::new(clusters)
        };
        let base = score_report(&key, &resp, SingletonMode::With);
        let renamed = score_report(&relabel(&key), &relabel(&resp), SingletonMode::With);
        prop_assert_eq!(base, renamed);
    }

    /// Mentions missing from one side are implicit singletons there:
    /// closing the response explicitly over the key universe must not
    /// change any score.
    #[test]
    fn explicit_closure_matches_implicit((key, resp) in pair_strategy()) {
        // Drop a deterministic subset of response mentions so the two
        // sides genuinely cover different universes.
        let keep: BTreeSet<String> = resp
            .mention_ids()
            .into_iter()
            .enumerate()
            .filter(|(i, _)| i % 3 != 0)
            .map(|(_, m)| m)
            .collect();
        let partial = resp.restricted_to(&keep);
        let mut universe = key.mention_ids();
        universe.extend(partial.mention_ids());
        let closed = partial.closed_over(&universe);

        let implicit = score_report(&key, &partial, SingletonMode::With);
        let explicit = score_report(&key, &closed, SingletonMode::With);
        prop_assert_eq!(implicit, explicit);
    }

    /// MUC never counts singleton clusters, so stripping them is a no-op
    /// for it (mentions singleton on both sides vanish entirely; the rest
    /// are restored by closure).
    #[test]
    fn muc_ignores_singleton_stripping((key, resp) in pair_strategy()) {
        let with = score_report(&key, &resp, SingletonMode::With);
        let without = score_report(&key, &resp, SingletonMode::Without);
        prop_assert!((with.muc.recall - without.muc.recall).abs() < 1e-12);
        prop_assert!((with.muc.precision - without.muc.precision).abs() < 1e-12);
    }

    /// FPA and FPT partition the false-positive links, whatever the
    /// surfaces look like; false positives and false negatives never
    /// overlap because they come from disjoint set differences.
    #[test]
    fn taxonomy_counts_add_up((key, resp) in pair_strategy(), salt in 0..4usize) {
        // Surfaces recycled from a tiny vocabulary so synonym links occur.
        let vocab = ["blast", "quake", "vote", "crash"];
        let surfaces: BTreeMap<String, String> = key
            .mention_ids()
            .iter()
            .chain(resp.mention_ids().iter())
            .enumerate()
            .map(|(i, m)| (m.clone(), vocab[(i + salt) % vocab.len()].to_string()))
            .collect();
        let breakdown = analyze(&key, &resp, &surfaces, None);

        let key_links = key.links();
        let resp_links: BTreeSet<_> = resp.links();
        let fp: BTreeSet<_> = resp_links.difference(&key_links).collect();
        let fn_: BTreeSet<_> = key_links.difference(&resp_links).collect();
        prop_assert_eq!(breakdown.fpa + breakdown.fpt, fp.len());
        prop_assert_eq!(breakdown.false_negatives, fn_.len());
        prop_assert!(fp.intersection(&fn_).next().is_none());
    }
}

/// A random scored graph over n mentions with edge scores in [0, 1].
fn graph_strategy() -> impl Strategy<Value = ScoredGraph> {
    (2..=10usize).prop_flat_map(|n| {
        proptest::collection::vec(0.0..1.0f64, n * (n - 1) / 2).prop_map(move |scores| {
            let ids: Vec<String> = (0..n).map(|i| format!("m{i}")).collect();
            let mut graph = ScoredGraph::new(ids.clone());
            let mut it = scores.into_iter();
            for i in 0..n {
                for j in i + 1..n {
                    graph.insert(&ids[i], &ids[j], it.next().unwrap()).unwrap();
                }
            }
            graph
        })
    })
}

fn assignment_of(c: &Clustering) -> BTreeMap<String, String> {
    c.assignment()
}

/// Every cluster of the finer partition sits inside one cluster of the
/// coarser partition.
fn refines(finer: &Clustering, coarser: &Clustering) -> bool {
    let coarse = assignment_of(coarser);
    finer.clusters.iter().all(|cl| {
        let mut owners = cl.mentions.iter().map(|m| &coarse[m]);
        let first = owners.next();
        owners.all(|o| Some(o) == first)
    })
}

proptest! {
    /// Raising the threshold on the connected-components diagnostic only
    /// splits clusters, never merges them.
    #[test]
    fn components_refine_as_threshold_rises(graph in graph_strategy(), lo in 0.05..0.5f64, delta in 0.0..0.45f64) {
        let low = connected_components(&graph, lo);
        let high = connected_components(&graph, lo + delta);
        prop_assert!(refines(&high, &low));
    }

    /// Greedy agglomeration always returns a partition of exactly the
    /// input mentions, and twice the same input gives twice the same
    /// output.
    #[test]
    fn agglomeration_partitions_and_repeats(graph in graph_strategy(), threshold in 0.1..0.9f64) {
        let config = ClusterConfig { threshold };
        let a = agglomerate(&graph, &config);
        let b = agglomerate(&graph, &config);
        prop_assert_eq!(&a, &b);

        let mut seen = BTreeSet::new();
        for cl in &a.clusters {
            prop_assert!(!cl.mentions.is_empty());
            for m in &cl.mentions {
                prop_assert!(seen.insert(m.clone()), "mention {} appears twice", m);
            }
        }
        prop_assert_eq!(seen, graph.mentions().clone());
    }

    /// Cosine candidate sets ignore uniform positive rescaling, never
    /// contain self-pairs, and store each pair once in canonical order.
    #[test]
    fn knn_is_scale_invariant_and_irreflexive(
        vectors in proptest::collection::btree_map(
            "m[0-9]", proptest::collection::vec(-1.0..1.0f64, 4), 2..8),
        scale in 0.01..100.0f64,
        k in 1..6usize,
    ) {
        let scaled: BTreeMap<String, Vec<f64>> = vectors
            .iter()
            .map(|(m, v)| (m.clone(), v.iter().map(|x| x * scale).collect()))
            .collect();
        let a = knn_candidates(&vectors, k).unwrap();
        let b = knn_candidates(&scaled, k).unwrap();
        prop_assert_eq!(&a, &b);
        for (x, y) in &a {
            prop_assert!(x < y);
        }
        prop_assert!(a.len() <= vectors.len() * k);
    }

    /// k = n−1 yields the complete mention graph.
    #[test]
    fn knn_at_n_minus_one_is_complete(
        vectors in proptest::collection::btree_map(
            "m[0-9]", proptest::collection::vec(-1.0..1.0f64, 3), 2..8),
    ) {
        let n = vectors.len();
        let candidates = knn_candidates(&vectors, n - 1).unwrap();
        prop_assert_eq!(candidates.len(), n * (n - 1) / 2);
    }
}
