//! Stage glue: corpus → fused vectors → trained retrieval/classifier →
//! predicted clustering, plus the synthetic benchmark arms built on top.
//!
//! Each function is a pure data-in/data-out step so the CLI subcommands
//! and the tests compose the same code paths; only the CLI touches files.

use std::collections::{BTreeMap, BTreeSet};

use cdecr_core::cluster::{agglomerate, ClusterConfig, ScoredGraph};
use cdecr_core::corpus::{Cluster, Clustering, Corpus, SplitError};
use cdecr_core::metrics::{score_report, ScoreReport, SingletonMode};
use cdecr_core::pairscore::{
    score_candidates, train_pairwise, PairError, PairScorer, PairwiseConfig, TrainedPairwise,
};
use cdecr_core::represent::{
    assemble_joint_context, encode_mention, EmbeddingProvider, FusedVector, RepresentError,
};
use cdecr_core::retrieve::{
    knn_candidates, train_projection, Projection, RetrievalConfig, RetrieveError, TrainedRetrieval,
};
use cdecr_core::summarize::Summary;

use crate::engine::{EngineError, SummaryEngine, SummaryMode};
use crate::llm::{ChatParams, MockLlm, ResponseCache};
use crate::synth::{topic_splits, SyntheticOutput};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Represent(#[from] RepresentError),
    #[error(transparent)]
    Retrieve(#[from] RetrieveError),
    #[error(transparent)]
    Pair(#[from] PairError),
}

/// Encode every mention of the corpus, fusing in its summary when one is
/// present in `summaries`. Mentions without a summary fall back to
/// document-only encoding (the summary half duplicates the document half).
pub fn fuse_corpus(
    corpus: &Corpus,
    summaries: Option<&BTreeMap<String, Summary>>,
    provider: &dyn EmbeddingProvider,
) -> Result<BTreeMap<String, FusedVector>, PipelineError> {
    let mut out = BTreeMap::new();
    for doc in &corpus.documents {
        for mention in &doc.mentions {
            let text = summaries
                .and_then(|map| map.get(&mention.id))
                .map(|s| s.text.as_str());
            let context = assemble_joint_context(doc, mention, text)?;
            let fused = encode_mention(&context, provider)?;
            out.insert(mention.id.clone(), fused);
        }
    }
    Ok(out)
}

/// Strip fused vectors down to the raw value maps the numeric stages use.
pub fn fused_values(fused: &BTreeMap<String, FusedVector>) -> BTreeMap<String, Vec<f64>> {
    fused.iter().map(|(id, f)| (id.clone(), f.values.clone())).collect()
}

/// Both trained stages, in dependency order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedStages {
    pub retrieval: TrainedRetrieval,
    pub pairwise: TrainedPairwise,
}

/// Nearest-neighbor candidates over projected vectors. With `scope` given,
/// neighbors are searched within each scope (typically a topic) separately
/// and the pair sets merged; mentions outside every scope get no
/// candidates.
pub fn candidate_pairs(
    vectors: &BTreeMap<String, Vec<f64>>,
    projection: &Projection,
    neighbor_size: usize,
    scope: Option<&BTreeMap<String, BTreeSet<String>>>,
) -> Result<BTreeSet<(String, String)>, PipelineError> {
    match scope {
        None => Ok(knn_candidates(&projection.project_all(vectors)?, neighbor_size)?),
        Some(groups) => {
            let mut all = BTreeSet::new();
            for ids in groups.values() {
                let sub: BTreeMap<String, Vec<f64>> = vectors
                    .iter()
                    .filter(|(id, _)| ids.contains(*id))
                    .map(|(id, v)| (id.clone(), v.clone()))
                    .collect();
                if sub.len() < 2 {
                    continue;
                }
                all.extend(knn_candidates(&projection.project_all(&sub)?, neighbor_size)?);
            }
            Ok(all)
        }
    }
}

/// Train the retrieval projection, build candidate pairs with it, and
/// train the pairwise classifier on those candidates.
///
/// `dev` supplies held-out vectors and gold for early stopping in both
/// stages; without it each stage falls back to its internal dev policy.
/// `scope` (typically topic → mention ids) restricts candidate search for
/// both splits; see [`scoped_candidates`].
pub fn train_stages(
    train: &BTreeMap<String, Vec<f64>>,
    train_gold: &Clustering,
    dev: Option<(&BTreeMap<String, Vec<f64>>, &Clustering)>,
    scope: Option<&BTreeMap<String, BTreeSet<String>>>,
    retrieval: &RetrievalConfig,
    pairwise: &PairwiseConfig,
    seed: u64,
) -> Result<TrainedStages, PipelineError> {
    let trained_retrieval = train_projection(train, train_gold, dev, retrieval, seed)?;
    let projection = &trained_retrieval.projection;
    let train_candidates =
        candidate_pairs(train, projection, retrieval.train_neighbor_size, scope)?;

    let trained_pairwise = match dev {
        None => train_pairwise(&train_candidates, train, train_gold, None, pairwise)?,
        Some((dev_vectors, dev_gold)) => {
            let dev_candidates =
                candidate_pairs(dev_vectors, projection, retrieval.train_neighbor_size, scope)?;
            // the classifier scores train and dev pairs through one vector
            // map and one assignment; splits are disjoint by mention id
            let mut all_vectors = train.clone();
            all_vectors.extend(dev_vectors.clone());
            let mut all_clusters = train_gold.clusters.clone();
            all_clusters.extend(dev_gold.clusters.iter().cloned());
            let all_gold = Clustering { clusters: all_clusters };
            train_pairwise(&train_candidates, &all_vectors, &all_gold, Some(&dev_candidates), pairwise)?
        }
    };
    Ok(TrainedStages { retrieval: trained_retrieval, pairwise: trained_pairwise })
}

/// One prediction pass: candidates, the scored graph behind the decision,
/// and the final partition over every mention in `vectors`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub candidates: BTreeSet<(String, String)>,
    pub graph: ScoredGraph,
    pub clustering: Clustering,
}

/// Retrieve → score → cluster. With `scope` given, nearest neighbors are
/// searched within each scope (typically a topic) separately and the
/// candidate sets merged; mentions outside every scope get no candidates
/// and stay singletons.
pub fn predict(
    vectors: &BTreeMap<String, Vec<f64>>,
    projection: &Projection,
    scorer: &PairScorer,
    eval_neighbor_size: usize,
    cluster: &ClusterConfig,
    scope: Option<&BTreeMap<String, BTreeSet<String>>>,
) -> Result<Prediction, PipelineError> {
    let candidates = candidate_pairs(vectors, projection, eval_neighbor_size, scope)?;
    let graph = score_candidates(scorer, &candidates, vectors)?;
    let clustering = agglomerate(&graph, cluster);
    Ok(Prediction { candidates, graph, clustering })
}

/// Topic id → mention ids, for scoped candidate retrieval.
pub fn topic_scope(corpus: &Corpus) -> BTreeMap<String, BTreeSet<String>> {
    let mut out = BTreeMap::new();
    for (topic, subtopics) in corpus.effective_topics() {
        let mut ids = BTreeSet::new();
        for doc_id in subtopics.values().flatten() {
            if let Some(doc) = corpus.document(doc_id) {
                ids.extend(doc.mentions.iter().map(|m| m.id.clone()));
            }
        }
        out.insert(topic, ids);
    }
    out
}

/// Every mention its own cluster (degenerate baseline).
pub fn all_singletons(ids: &BTreeSet<String>) -> Clustering {
    Clustering {
        clusters: ids
            .iter()
            .enumerate()
            .map(|(i, m)| Cluster { id: format!("s{i}"), mentions: BTreeSet::from([m.clone()]) })
            .collect(),
    }
}

/// Everything in one cluster (degenerate baseline).
pub fn one_cluster(ids: &BTreeSet<String>) -> Clustering {
    if ids.is_empty() {
        return Clustering::default();
    }
    Clustering { clusters: vec![Cluster { id: "all".into(), mentions: ids.clone() }] }
}

// ------------------------------------------------------- benchmark arms

#[derive(Debug, thiserror::Error)]
pub enum BenchmarkError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error("benchmark corpus has no gold clustering")]
    NoGold,
    #[error("benchmark needs at least two topics (one to train on, one to test on)")]
    TooFewTopics,
}

/// One benchmark arm, end to end.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRun {
    pub report: ScoreReport,
    pub prediction: Prediction,
    pub test_gold: Clustering,
    pub stages: TrainedStages,
}

/// Training settings sized for generated benchmark corpora. The reference
/// defaults pace their schedules for realistic corpora with many thousands
/// of candidate pairs; on a few hundred pairs they stop long before the
/// classifier commits to any merge, so the benchmark arms train hotter and
/// longer (rollbacks halve the rate automatically if it overshoots).
pub fn benchmark_training_configs() -> (RetrievalConfig, PairwiseConfig) {
    let retrieval = RetrievalConfig::default();
    let pairwise = PairwiseConfig {
        learning_rate: 0.3,
        epochs: 300,
        patience: 50,
        ..PairwiseConfig::default()
    };
    (retrieval, pairwise)
}

/// Run the full pipeline over a generated corpus: split by topic, optionally
/// summarize every mention with the fact-bank mock client, fuse, train on
/// the train/dev topics, predict on the test topics, and score.
///
/// The two arms (`with_summaries` true/false) differ in nothing else, which
/// is what makes their score gap attributable to the summaries.
pub fn run_benchmark_arm(
    synthetic: &SyntheticOutput,
    with_summaries: bool,
    retrieval: &RetrievalConfig,
    pairwise: &PairwiseConfig,
    cluster: &ClusterConfig,
    mode: SingletonMode,
    seed: u64,
) -> Result<BenchmarkRun, BenchmarkError> {
    let corpus = &synthetic.corpus;
    if corpus.gold.is_none() {
        return Err(BenchmarkError::NoGold);
    }
    let splits = topic_splits(corpus.effective_topics().len());
    if !splits.contains_key("test") {
        return Err(BenchmarkError::TooFewTopics);
    }
    let mut parts = corpus.split(&splits)?;
    let test = parts.remove("test").expect("split spec declares test");
    let dev = parts.remove("dev");
    let train = parts.remove("train").expect("split spec declares train");

    let summaries = if with_summaries {
        let client = MockLlm::new(seed)
            .with_surfaces(corpus.surfaces())
            .with_facts(synthetic.facts.clone());
        let cache = ResponseCache::in_memory();
        let params = ChatParams { model: "mock-model".into(), temperature: 0.0, seed: Some(seed) };
        let engine = SummaryEngine::new(&client, &cache, params, 0, 4);
        Some(engine.summarize_corpus(corpus, SummaryMode::TwoStep)?.summaries)
    } else {
        None
    };

    let provider = &synthetic.provider;
    let fuse = |part: &Corpus| -> Result<BTreeMap<String, Vec<f64>>, PipelineError> {
        Ok(fused_values(&fuse_corpus(part, summaries.as_ref(), provider)?))
    };
    let train_vectors = fuse(&train)?;
    let test_vectors = fuse(&test)?;
    let dev_data = match &dev {
        Some(d) => Some((fuse(d)?, d.gold.clone().unwrap_or_default())),
        None => None,
    };

    let train_gold = train.gold.as_ref().ok_or(BenchmarkError::NoGold)?;
    let mut pairwise = pairwise.clone();
    pairwise.seed = seed;
    // topic-scoped candidates: cluster templates repeat across topics, so
    // unscoped search would pair template twins under contradictory labels
    let scope = topic_scope(corpus);
    let stages = train_stages(
        &train_vectors,
        train_gold,
        dev_data.as_ref().map(|(v, g)| (v, g)),
        Some(&scope),
        retrieval,
        &pairwise,
        seed,
    )?;

    let prediction = predict(
        &test_vectors,
        &stages.retrieval.projection,
        &stages.pairwise.scorer,
        retrieval.eval_neighbor_size,
        cluster,
        Some(&scope),
    )?;
    let test_gold = test.gold.clone().ok_or(BenchmarkError::NoGold)?;
    let report = score_report(&test_gold, &prediction.clustering, mode);
    Ok(BenchmarkRun { report, prediction, test_gold, stages })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SyntheticSpec};
    use cdecr_core::represent::HashFeatureProvider;

    fn spec(sigma: f64, signal: usize, seed: u64) -> SyntheticSpec {
        SyntheticSpec { topics: 3, sigma, signal, seed, ..Default::default() }
    }

    #[test]
    fn fusion_covers_every_mention_and_flags_fallbacks() {
        let out = generate(&spec(0.0, 3, 0)).unwrap();
        let provider = HashFeatureProvider::new(8, 1, 4, 0.7);
        let fused = fuse_corpus(&out.corpus, None, &provider).unwrap();
        assert_eq!(fused.len(), out.corpus.stats().mentions);
        assert!(fused.values().all(|f| f.fallback && f.values.len() == 32));
    }

    #[test]
    fn separable_corpus_scores_perfectly_end_to_end() {
        let out = generate(&spec(0.0, 3, 7)).unwrap();
        let (retrieval, pairwise) = benchmark_training_configs();
        let run = run_benchmark_arm(
            &out,
            false,
            &retrieval,
            &pairwise,
            &ClusterConfig::default(),
            SingletonMode::With,
            7,
        )
        .unwrap();
        assert!(
            run.report.conll_f1 > 0.99,
            "fully disambiguated documents should cluster perfectly, got {}",
            run.report.conll_f1
        );
    }

    #[test]
    fn scoped_retrieval_never_pairs_across_scopes() {
        let out = generate(&spec(0.0, 3, 3)).unwrap();
        let provider = &out.provider;
        let fused = fused_values(&fuse_corpus(&out.corpus, None, provider).unwrap());
        let projection = Projection::identity(64, 64);
        let scorer = PairScorer::new(3 * 64, 0);
        let scope = topic_scope(&out.corpus);
        let prediction = predict(&fused, &projection, &scorer, 5, &ClusterConfig::default(), Some(&scope)).unwrap();
        let topic_of = |id: &str| {
            scope.iter().find(|(_, ids)| ids.contains(id)).map(|(t, _)| t.clone()).unwrap()
        };
        assert!(!prediction.candidates.is_empty());
        for (a, b) in &prediction.candidates {
            assert_eq!(topic_of(a), topic_of(b), "candidate pair ({a}, {b}) crosses topics");
        }
    }

    #[test]
    fn degenerate_baselines_partition_the_universe() {
        let ids: BTreeSet<String> = ["m0", "m1", "m2"].iter().map(|s| s.to_string()).collect();
        let singles = all_singletons(&ids);
        assert_eq!(singles.clusters.len(), 3);
        assert_eq!(singles.mention_ids(), ids);
        let one = one_cluster(&ids);
        assert_eq!(one.clusters.len(), 1);
        assert_eq!(one.mention_ids(), ids);
        assert_eq!(one_cluster(&BTreeSet::new()).clusters.len(), 0);
    }

    #[test]
    fn benchmark_needs_a_test_topic() {
        let out = generate(&SyntheticSpec { topics: 1, ..Default::default() }).unwrap();
        let err = run_benchmark_arm(
            &out,
            false,
            &RetrievalConfig::default(),
            &PairwiseConfig::default(),
            &ClusterConfig::default(),
            SingletonMode::With,
            0,
        )
        .unwrap_err();
        assert!(matches!(err, BenchmarkError::TooFewTopics));
    }
}
