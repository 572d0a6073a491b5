//! The canonical on-disk corpus format.
//!
//! One corpus per UTF-8 JSON file, top-level keys `documents`,
//! `gold_clusters`, `topics`. Documents carry `id`, `date` (nullable
//! `YYYY-MM-DD`), `sentences` as arrays of token arrays, and `mentions`
//! as `{id, sentence, start, end}` records — mention surfaces and owning
//! document ids are derived, never stored. Gold clusters are arrays of
//! mention-id arrays; topics map topic id → subtopic id → document ids.
//!
//! Parsing is loss-free: `parse(emit(parse(x))) == parse(x)` for every
//! valid input (cluster ids are not part of the format and are assigned
//! canonically on parse).

use std::collections::BTreeMap;

use cdecr_core::corpus::{Clustering, Corpus, Document, Mention, TopicMap, ValidationError};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    /// Malformed JSON or a missing/mistyped field; serde's message names
    /// the offending field, line and column point into the input.
    #[error("corpus file, line {line} column {column}: {message}")]
    Structure { line: usize, column: usize, message: String },
    /// Structurally fine, semantically broken.
    #[error("invalid corpus: {0}")]
    Invalid(#[from] ValidationError),
}

#[derive(Debug, Serialize, Deserialize)]
struct RawMention {
    id: String,
    sentence: usize,
    start: usize,
    end: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawDocument {
    id: String,
    #[serde(default)]
    date: Option<String>,
    sentences: Vec<Vec<String>>,
    #[serde(default)]
    mentions: Vec<RawMention>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawCorpus {
    documents: Vec<RawDocument>,
    #[serde(default)]
    gold_clusters: Vec<Vec<String>>,
    #[serde(default)]
    topics: TopicMap,
}

/// Join the span tokens into the mention surface. Out-of-range indices
/// yield an empty surface here and a precise span error from validation.
fn derive_surface(sentences: &[Vec<String>], m: &RawMention) -> String {
    sentences
        .get(m.sentence)
        .and_then(|s| s.get(m.start..m.end))
        .map(|tokens| tokens.join(" "))
        .unwrap_or_default()
}

/// Parse and validate a canonical corpus file.
pub fn parse_corpus(text: &str) -> Result<Corpus, FormatError> {
    let raw: RawCorpus = serde_json::from_str(text).map_err(|e| FormatError::Structure {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let documents = raw
        .documents
        .into_iter()
        .map(|d| {
            let mentions = d
                .mentions
                .iter()
                .map(|m| Mention {
                    id: m.id.clone(),
                    doc_id: d.id.clone(),
                    sentence: m.sentence,
                    start: m.start,
                    end: m.end,
                    surface: derive_surface(&d.sentences, m),
                })
                .collect();
            Document { id: d.id, date: d.date, sentences: d.sentences, mentions }
        })
        .collect();
    let gold = if raw.gold_clusters.is_empty() {
        None
    } else {
        Some(Clustering::from_groups(
            raw.gold_clusters.into_iter().map(|c| c.into_iter().collect()).collect(),
        ))
    };
    let corpus = Corpus { documents, gold, topics: raw.topics };
    corpus.validate()?;
    Ok(corpus)
}

/// Canonical emission: pretty-printed JSON, fixed key order, sorted
/// topics, cluster members sorted, trailing newline.
pub fn emit_corpus(corpus: &Corpus) -> String {
    let raw = RawCorpus {
        documents: corpus
            .documents
            .iter()
            .map(|d| RawDocument {
                id: d.id.clone(),
                date: d.date.clone(),
                sentences: d.sentences.clone(),
                mentions: d
                    .mentions
                    .iter()
                    .map(|m| RawMention {
                        id: m.id.clone(),
                        sentence: m.sentence,
                        start: m.start,
                        end: m.end,
                    })
                    .collect(),
            })
            .collect(),
        gold_clusters: corpus
            .gold
            .as_ref()
            .map(|g| g.clusters.iter().map(|c| c.mentions.iter().cloned().collect()).collect())
            .unwrap_or_default(),
        topics: corpus.topics.clone(),
    };
    let mut out = serde_json::to_string_pretty(&raw).expect("corpus serialization is infallible");
    out.push('\n');
    out
}

/// A mention-id → gold-cluster-id view, exported alongside predictions.
pub fn gold_assignment(corpus: &Corpus) -> BTreeMap<String, String> {
    corpus.gold.as_ref().map(|g| g.assignment()).unwrap_or_default()
}
