//! Synthetic benchmark generator.
//!
//! Builds corpora whose difficulty is controlled by two knobs:
//!
//! * `sigma` — document-side ambiguity. Event clusters come in confusable
//!   pairs that share their mention surface and local context and differ
//!   only in cluster-specific detail tokens; each sentence keeps its detail
//!   tokens with probability `1 / (1 + sigma)`. At `sigma = 0` every
//!   sentence is fully disambiguated; as `sigma` grows, confusable pairs
//!   become indistinguishable from document text alone.
//! * `signal` — how many cluster-specific fact tokens the paired fact bank
//!   contains. A mock chat client replays these facts as mention
//!   summaries, so `signal = 0` means summaries add nothing while larger
//!   values make the summary side cleanly separable.
//!
//! The two knobs together produce the regime the summarization pipeline is
//! supposed to win in: high `sigma` with positive `signal` is unsolvable
//! from documents alone but easy once summaries are fused in.
//!
//! Topics share one vocabulary: the cluster templates (surfaces, context,
//! details, facts) repeat across topics, so what a classifier learns on the
//! training topics carries over to the held-out test topic and the
//! benchmark measures information availability rather than
//! out-of-vocabulary generalization. The flip side is that the same event
//! template occurs once per topic as a *different* gold cluster; candidate
//! retrieval must therefore stay topic-scoped (see the pipeline stages),
//! exactly as evaluation topics are isolated in practice.
//!
//! Everything is deterministic in the spec (including its seed): documents,
//! gold clusters, topic structure, the fact bank, and the per-token vector
//! table exported for table-backed embedding.

use std::collections::BTreeMap;

use cdecr_core::corpus::{Cluster, Clustering, Corpus, Document, Mention};
use cdecr_core::represent::{EmbeddingProvider, HashFeatureProvider, JointContext};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("synthetic corpus needs at least one {0}")]
    Empty(&'static str),
    #[error("sigma must be non-negative and not NaN, got {0}")]
    BadSigma(f64),
}

/// Shape and difficulty of a generated corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub topics: usize,
    /// Clusters per topic; consecutive clusters pair up as confusable
    /// siblings (an odd final cluster stands alone).
    pub clusters_per_topic: usize,
    pub mentions_per_cluster: usize,
    /// Embedding width of the bundled hash provider.
    pub dim: usize,
    /// Document-side ambiguity (see module docs).
    pub sigma: f64,
    /// Cluster-specific fact tokens per summary (see module docs).
    pub signal: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            topics: 4,
            clusters_per_topic: 4,
            mentions_per_cluster: 4,
            dim: 16,
            sigma: 0.0,
            signal: 3,
            seed: 0,
        }
    }
}

/// A generated corpus with its embedding provider, an exportable
/// document-token vector table, and the fact bank the mock client replays.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticOutput {
    pub corpus: Corpus,
    pub provider: HashFeatureProvider,
    /// `(doc id, flat token index)` → vector, document tokens only.
    pub token_vectors: BTreeMap<(String, usize), Vec<f64>>,
    /// Mention id → fact phrase (identical within a cluster).
    pub facts: BTreeMap<String, String>,
}

struct ClusterPlan {
    id: String,
    /// Subtopic side: 0 = "a", 1 = "b".
    side: usize,
    surface: String,
    context: [String; 3],
    detail: [String; 2],
    fact_phrase: String,
    /// Per-mention decision: keep the detail tokens in the sentence.
    keep_detail: Vec<bool>,
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticOutput, SynthError> {
    if spec.topics == 0 {
        return Err(SynthError::Empty("topic"));
    }
    if spec.clusters_per_topic == 0 {
        return Err(SynthError::Empty("cluster per topic"));
    }
    if spec.mentions_per_cluster == 0 {
        return Err(SynthError::Empty("mention per cluster"));
    }
    if spec.dim == 0 {
        return Err(SynthError::Empty("embedding dimension"));
    }
    if spec.sigma.is_nan() || spec.sigma < 0.0 {
        return Err(SynthError::BadSigma(spec.sigma));
    }
    let keep_probability = 1.0 / (1.0 + spec.sigma);
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);

    // plan clusters in a fixed order so rng consumption is reproducible
    let mut plans: Vec<Vec<ClusterPlan>> = Vec::new();
    for t in 0..spec.topics {
        let mut topic_plans = Vec::new();
        for c in 0..spec.clusters_per_topic {
            let pair = c / 2;
            let lone = c + 1 == spec.clusters_per_topic && spec.clusters_per_topic % 2 == 1;
            let surface = if lone {
                "incident-solo".to_string()
            } else {
                format!("incident-p{pair}")
            };
            let context = if lone {
                ["near-solo".into(), "region-solo".into(), "during-solo".into()]
            } else {
                [
                    format!("near-p{pair}"),
                    format!("region-p{pair}"),
                    format!("during-p{pair}"),
                ]
            };
            let fact_phrase = if spec.signal == 0 {
                "an unspecified incident".to_string()
            } else {
                let toks: Vec<String> =
                    (0..spec.signal).map(|k| format!("fact-c{c}-{k}")).collect();
                format!("{} incident", toks.join(" "))
            };
            let keep_detail: Vec<bool> = (0..spec.mentions_per_cluster)
                .map(|_| rng.random::<f64>() < keep_probability)
                .collect();
            topic_plans.push(ClusterPlan {
                id: format!("t{t}c{c}"),
                side: if lone { 0 } else { c % 2 },
                surface,
                context,
                detail: [format!("site-c{c}"), format!("detail-c{c}")],
                fact_phrase,
                keep_detail,
            });
        }
        plans.push(topic_plans);
    }

    let mut documents = Vec::new();
    let mut gold = Vec::new();
    let mut topics = BTreeMap::new();
    let mut facts = BTreeMap::new();
    for (t, topic_plans) in plans.iter().enumerate() {
        let mut subtopics: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (side, side_name) in [(0usize, "a"), (1usize, "b")] {
            let side_clusters: Vec<&ClusterPlan> =
                topic_plans.iter().filter(|p| p.side == side).collect();
            if side_clusters.is_empty() {
                continue;
            }
            let mut doc_ids = Vec::new();
            // document j of this side holds the j-th mention of every
            // cluster on the side, one sentence per mention
            for j in 0..spec.mentions_per_cluster {
                let doc_id = format!("t{t}{side_name}-d{j}");
                let mut sentences = Vec::new();
                let mut mentions = Vec::new();
                for plan in &side_clusters {
                    let mut tokens: Vec<String> = vec![
                        "the".into(),
                        plan.surface.clone(),
                        "was".into(),
                        "reported".into(),
                    ];
                    tokens.extend(plan.context.iter().cloned());
                    if plan.keep_detail[j] {
                        tokens.extend(plan.detail.iter().cloned());
                    }
                    tokens.push(".".into());
                    let sentence_index = sentences.len();
                    sentences.push(tokens);
                    mentions.push(Mention {
                        id: format!("{}-m{j}", plan.id),
                        doc_id: doc_id.clone(),
                        sentence: sentence_index,
                        start: 1,
                        end: 2,
                        surface: plan.surface.clone(),
                    });
                }
                documents.push(Document {
                    // side "a" documents carry a date, side "b" ones do
                    // not, so both prompt-header paths stay exercised
                    id: doc_id.clone(),
                    date: if side == 0 { Some("2024-05-10".to_string()) } else { None },
                    sentences,
                    mentions,
                });
                doc_ids.push(doc_id);
            }
            subtopics.insert(format!("t{t}{side_name}"), doc_ids);
        }
        topics.insert(format!("t{t}"), subtopics);

        for plan in topic_plans {
            let mention_ids: Vec<String> =
                (0..spec.mentions_per_cluster).map(|j| format!("{}-m{j}", plan.id)).collect();
            for id in &mention_ids {
                facts.insert(id.clone(), plan.fact_phrase.clone());
            }
            gold.push(Cluster { id: plan.id.clone(), mentions: mention_ids.into_iter().collect() });
        }
    }

    let corpus = Corpus {
        documents,
        gold: Some(Clustering { clusters: gold }),
        topics,
    };
    debug_assert!(corpus.validate().is_ok(), "generator emitted an invalid corpus");

    let provider = HashFeatureProvider::new(spec.dim, spec.seed, 8, 0.7);
    let mut token_vectors = BTreeMap::new();
    for doc in &corpus.documents {
        let tokens = doc.flat_tokens();
        let context = JointContext {
            doc_id: doc.id.clone(),
            mention_id: String::new(),
            doc_len: tokens.len(),
            doc_span: (0, 1),
            summary_span: None,
            mention_missing_in_summary: false,
            tokens,
        };
        let vectors = provider.embed(&context).expect("hash provider embeds any tokens");
        for (i, v) in vectors.into_iter().enumerate() {
            token_vectors.insert((doc.id.clone(), i), v);
        }
    }

    Ok(SyntheticOutput { corpus, provider, token_vectors, facts })
}

/// Topic-level train/dev/test split for a generated corpus: the last topic
/// is the test set, the second-to-last (when present) the dev set, and the
/// rest train. Splits that would be empty are omitted.
pub fn topic_splits(topics: usize) -> BTreeMap<String, Vec<String>> {
    let names: Vec<String> = (0..topics).map(|t| format!("t{t}")).collect();
    let mut out = BTreeMap::new();
    match topics {
        0 => {}
        1 => {
            out.insert("train".to_string(), names);
        }
        2 => {
            out.insert("train".to_string(), names[..1].to_vec());
            out.insert("test".to_string(), names[1..].to_vec());
        }
        _ => {
            out.insert("train".to_string(), names[..topics - 2].to_vec());
            out.insert("dev".to_string(), names[topics - 2..topics - 1].to_vec());
            out.insert("test".to_string(), names[topics - 1..].to_vec());
        }
    }
    out
}
