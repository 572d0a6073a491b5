//! Corpus data model: documents, event mentions, clusterings, topics.
//!
//! A corpus is a set of pre-tokenized documents, each carrying gold event
//! mentions identified by token spans, plus an optional gold clustering over
//! mention ids and a topic → subtopic → document grouping. Subtopics matter
//! because sibling subtopics of one topic describe confusable events of the
//! same kind; they are what makes cross-document coreference hard.
//!
//! Everything downstream (summarization, retrieval, scoring) works over
//! mention ids, so validation here is strict: ids must be unique, spans must
//! match their recorded surface strings, and gold clusters must partition a
//! subset of the known mentions.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// An event mention: a token span inside one sentence of one document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mention {
    /// Corpus-wide unique id.
    pub id: String,
    pub doc_id: String,
    /// Sentence index within the document.
    pub sentence: usize,
    /// Token span within the sentence, half-open `[start, end)`.
    pub start: usize,
    pub end: usize,
    /// The mention text; must equal the span tokens joined by single spaces.
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    /// Publication date as `YYYY-MM-DD`, when known.
    pub date: Option<String>,
    /// Sentences as token lists; tokenization is fixed at ingest.
    pub sentences: Vec<Vec<String>>,
    pub mentions: Vec<Mention>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub id: String,
    pub mentions: BTreeSet<String>,
}

/// A partition of some set of mention ids into disjoint clusters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Clustering {
    pub clusters: Vec<Cluster>,
}

/// topic id → subtopic id → document ids.
pub type TopicMap = BTreeMap<String, BTreeMap<String, Vec<String>>>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub gold: Option<Clustering>,
    /// May be empty, in which case the corpus is treated as one implicit
    /// topic with one subtopic covering every document.
    pub topics: TopicMap,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error("duplicate document id `{0}`")]
    DuplicateDocumentId(String),
    #[error("duplicate mention id `{0}`")]
    DuplicateMentionId(String),
    #[error("mention `{mention}` names sentence {sentence} but document `{doc}` has {len} sentences")]
    SentenceOutOfRange { mention: String, doc: String, sentence: usize, len: usize },
    #[error("mention `{mention}` has empty or inverted span {start}..{end}")]
    EmptySpan { mention: String, start: usize, end: usize },
    #[error("mention `{mention}` span {start}..{end} exceeds sentence length {len}")]
    SpanOutOfRange { mention: String, start: usize, end: usize, len: usize },
    #[error("mention `{mention}` surface `{surface}` does not match span text `{span_text}`")]
    SurfaceMismatch { mention: String, surface: String, span_text: String },
    #[error("mention `{mention}` records doc `{recorded}` but appears in doc `{actual}`")]
    DocIdMismatch { mention: String, recorded: String, actual: String },
    #[error("document `{0}` has invalid publication date `{1}` (expected YYYY-MM-DD)")]
    BadDate(String, String),
    #[error("gold cluster `{0}` is empty")]
    EmptyCluster(String),
    #[error("duplicate cluster id `{0}`")]
    DuplicateClusterId(String),
    #[error("mention `{mention}` appears in clusters `{first}` and `{second}`")]
    OverlappingClusters { mention: String, first: String, second: String },
    #[error("gold cluster `{cluster}` references unknown mention `{mention}`")]
    UnknownGoldMention { cluster: String, mention: String },
    #[error("topic map references unknown document `{0}`")]
    UnknownTopicDocument(String),
    #[error("document `{doc}` assigned to both `{first}` and `{second}` in the topic map")]
    DocumentInTwoTopics { doc: String, first: String, second: String },
    #[error("document `{0}` is missing from the topic map")]
    DocumentNotInTopics(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SplitError {
    #[error("split `{split}` references unknown topic `{topic}`")]
    UnknownTopic { split: String, topic: String },
    #[error("topic `{topic}` assigned to splits `{first}` and `{second}`")]
    TopicInTwoSplits { topic: String, first: String, second: String },
}

impl Mention {
    /// Unordered pair key: the lexicographically smaller id first. All link
    /// sets and candidate sets in the pipeline use this canonical order.
    pub fn pair_key(a: &str, b: &str) -> (String, String) {
        if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        }
    }
}

impl Document {
    /// All tokens of the document, sentences concatenated in order.
    pub fn flat_tokens(&self) -> Vec<String> {
        self.sentences.iter().flatten().cloned().collect()
    }

    /// Token offset of sentence `idx` within [`Self::flat_tokens`].
    pub fn sentence_offset(&self, idx: usize) -> usize {
        self.sentences[..idx].iter().map(Vec::len).sum()
    }

    pub fn sentence_text(&self, idx: usize) -> String {
        self.sentences[idx].join(" ")
    }

    /// Document text with sentences joined by single spaces.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.sentences.iter().enumerate() {
            if i > 0 && !s.is_empty() {
                if !out.is_empty() {
                    out.push(' ');
                }
            }
            out.push_str(&s.join(" "));
        }
        out
    }

    /// Span of `mention` within [`Self::flat_tokens`], half-open.
    pub fn flat_span(&self, mention: &Mention) -> (usize, usize) {
        let off = self.sentence_offset(mention.sentence);
        (off + mention.start, off + mention.end)
    }
}

impl Cluster {
    pub fn new(id: impl Into<String>, mentions: impl IntoIterator<Item = String>) -> Self {
        Cluster { id: id.into(), mentions: mentions.into_iter().collect() }
    }

    pub fn len(&self) -> usize {
        self.mentions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mentions.is_empty()
    }

    pub fn is_singleton(&self) -> bool {
        self.mentions.len() == 1
    }
}

impl Clustering {
    pub fn new(clusters: Vec<Cluster>) -> Self {
        Clustering { clusters }
    }

    /// Build from anonymous mention-id groups; cluster ids are assigned
    /// `c0, c1, …` in order of each group's smallest mention id.
    pub fn from_groups(groups: Vec<BTreeSet<String>>) -> Self {
        let mut groups: Vec<BTreeSet<String>> = groups.into_iter().filter(|g| !g.is_empty()).collect();
        groups.sort_by(|a, b| a.iter().next().cmp(&b.iter().next()));
        Clustering {
            clusters: groups
                .into_iter()
                .enumerate()
                .map(|(i, g)| Cluster { id: format!("c{i}"), mentions: g })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut cluster_ids = BTreeSet::new();
        let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
        for c in &self.clusters {
            if c.mentions.is_empty() {
                return Err(ValidationError::EmptyCluster(c.id.clone()));
            }
            if !cluster_ids.insert(c.id.as_str()) {
                return Err(ValidationError::DuplicateClusterId(c.id.clone()));
            }
            for m in &c.mentions {
                if let Some(first) = owner.insert(m, &c.id) {
                    return Err(ValidationError::OverlappingClusters {
                        mention: m.clone(),
                        first: first.to_string(),
                        second: c.id.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// All mention ids covered by the clustering.
    pub fn mention_ids(&self) -> BTreeSet<String> {
        self.clusters.iter().flat_map(|c| c.mentions.iter().cloned()).collect()
    }

    /// Mention id → cluster id.
    pub fn assignment(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        for c in &self.clusters {
            for m in &c.mentions {
                out.insert(m.clone(), c.id.clone());
            }
        }
        out
    }

    /// The set of unordered coreferent pairs implied by the clustering.
    pub fn links(&self) -> BTreeSet<(String, String)> {
        let mut out = BTreeSet::new();
        for c in &self.clusters {
            let ms: Vec<&String> = c.mentions.iter().collect();
            for i in 0..ms.len() {
                for j in i + 1..ms.len() {
                    out.insert(Mention::pair_key(ms[i], ms[j]));
                }
            }
        }
        out
    }

    /// Extend the clustering to cover `universe`: any universe mention not
    /// already assigned becomes an implicit singleton cluster. Mentions
    /// outside the universe are kept untouched.
    pub fn closed_over(&self, universe: &BTreeSet<String>) -> Clustering {
        let covered = self.mention_ids();
        let mut clusters = self.clusters.clone();
        for m in universe {
            if !covered.contains(m) {
                clusters.push(Cluster {
                    id: format!("singleton:{m}"),
                    mentions: BTreeSet::from([m.clone()]),
                });
            }
        }
        Clustering { clusters }
    }

    /// Drop singleton clusters from the partition.
    pub fn without_singletons(&self) -> Clustering {
        Clustering {
            clusters: self.clusters.iter().filter(|c| c.len() > 1).cloned().collect(),
        }
    }

    /// Restrict to mentions in `keep`, dropping clusters that become empty.
    pub fn restricted_to(&self, keep: &BTreeSet<String>) -> Clustering {
        Clustering {
            clusters: self
                .clusters
                .iter()
                .filter_map(|c| {
                    let ms: BTreeSet<String> =
                        c.mentions.iter().filter(|m| keep.contains(*m)).cloned().collect();
                    if ms.is_empty() {
                        None
                    } else {
                        Some(Cluster { id: c.id.clone(), mentions: ms })
                    }
                })
                .collect(),
        }
    }
}

/// Summary counts reported at ingest time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusStats {
    pub documents: usize,
    pub sentences: usize,
    pub mentions: usize,
    pub gold_clusters: usize,
    /// Within-cluster unordered pairs, summed over gold clusters.
    pub gold_links: u64,
    pub topics: usize,
    pub subtopics: usize,
}

fn valid_iso_date(s: &str) -> bool {
    let b = s.as_bytes();
    if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
        return false;
    }
    let digits = |r: core::ops::Range<usize>| b[r].iter().all(u8::is_ascii_digit);
    if !digits(0..4) || !digits(5..7) || !digits(8..10) {
        return false;
    }
    let month: u32 = s[5..7].parse().unwrap_or(0);
    let day: u32 = s[8..10].parse().unwrap_or(0);
    (1..=12).contains(&month) && (1..=31).contains(&day)
}

impl Corpus {
    /// Check every structural invariant, reporting the first violation.
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut doc_ids = BTreeSet::new();
        let mut mention_ids = BTreeSet::new();
        for doc in &self.documents {
            if !doc_ids.insert(doc.id.as_str()) {
                return Err(ValidationError::DuplicateDocumentId(doc.id.clone()));
            }
            if let Some(date) = &doc.date {
                if !valid_iso_date(date) {
                    return Err(ValidationError::BadDate(doc.id.clone(), date.clone()));
                }
            }
            for m in &doc.mentions {
                if !mention_ids.insert(m.id.as_str()) {
                    return Err(ValidationError::DuplicateMentionId(m.id.clone()));
                }
                if m.doc_id != doc.id {
                    return Err(ValidationError::DocIdMismatch {
                        mention: m.id.clone(),
                        recorded: m.doc_id.clone(),
                        actual: doc.id.clone(),
                    });
                }
                if m.sentence >= doc.sentences.len() {
                    return Err(ValidationError::SentenceOutOfRange {
                        mention: m.id.clone(),
                        doc: doc.id.clone(),
                        sentence: m.sentence,
                        len: doc.sentences.len(),
                    });
                }
                if m.start >= m.end {
                    return Err(ValidationError::EmptySpan {
                        mention: m.id.clone(),
                        start: m.start,
                        end: m.end,
                    });
                }
                let sent = &doc.sentences[m.sentence];
                if m.end > sent.len() {
                    return Err(ValidationError::SpanOutOfRange {
                        mention: m.id.clone(),
                        start: m.start,
                        end: m.end,
                        len: sent.len(),
                    });
                }
                let span_text = sent[m.start..m.end].join(" ");
                if span_text != m.surface {
                    return Err(ValidationError::SurfaceMismatch {
                        mention: m.id.clone(),
                        surface: m.surface.clone(),
                        span_text,
                    });
                }
            }
        }
        if let Some(gold) = &self.gold {
            gold.validate()?;
            for c in &gold.clusters {
                for m in &c.mentions {
                    if !mention_ids.contains(m.as_str()) {
                        return Err(ValidationError::UnknownGoldMention {
                            cluster: c.id.clone(),
                            mention: m.clone(),
                        });
                    }
                }
            }
        }
        if !self.topics.is_empty() {
            let mut seen: BTreeMap<&str, String> = BTreeMap::new();
            for (topic, subs) in &self.topics {
                for (sub, docs) in subs {
                    let label = format!("{topic}/{sub}");
                    for d in docs {
                        if !doc_ids.contains(d.as_str()) {
                            return Err(ValidationError::UnknownTopicDocument(d.clone()));
                        }
                        if let Some(first) = seen.insert(d, label.clone()) {
                            return Err(ValidationError::DocumentInTwoTopics {
                                doc: d.clone(),
                                first,
                                second: label,
                            });
                        }
                    }
                }
            }
            for doc in &self.documents {
                if !seen.contains_key(doc.id.as_str()) {
                    return Err(ValidationError::DocumentNotInTopics(doc.id.clone()));
                }
            }
        }
        Ok(())
    }

    /// The topic map, or an implicit single-topic map when none was given.
    pub fn effective_topics(&self) -> TopicMap {
        if !self.topics.is_empty() {
            return self.topics.clone();
        }
        let all: Vec<String> = self.documents.iter().map(|d| d.id.clone()).collect();
        BTreeMap::from([("all".to_string(), BTreeMap::from([("all".to_string(), all)]))])
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    /// Mention id → (document, mention) for every mention in the corpus.
    pub fn mention_index(&self) -> BTreeMap<&str, (&Document, &Mention)> {
        let mut out = BTreeMap::new();
        for d in &self.documents {
            for m in &d.mentions {
                out.insert(m.id.as_str(), (d, m));
            }
        }
        out
    }

    pub fn mention_ids(&self) -> BTreeSet<String> {
        self.documents.iter().flat_map(|d| d.mentions.iter().map(|m| m.id.clone())).collect()
    }

    /// Mention id → surface string.
    pub fn surfaces(&self) -> BTreeMap<String, String> {
        self.documents
            .iter()
            .flat_map(|d| d.mentions.iter().map(|m| (m.id.clone(), m.surface.clone())))
            .collect()
    }

    pub fn stats(&self) -> CorpusStats {
        CorpusStats {
            documents: self.documents.len(),
            sentences: self.documents.iter().map(|d| d.sentences.len()).sum(),
            mentions: self.documents.iter().map(|d| d.mentions.len()).sum(),
            gold_clusters: self.gold.as_ref().map_or(0, |g| g.clusters.len()),
            gold_links: self
                .gold
                .as_ref()
                .map_or(0, |g| g.clusters.iter().map(|c| crate::math::choose2(c.len())).sum()),
            topics: self.topics.len(),
            subtopics: self.topics.values().map(BTreeMap::len).sum(),
        }
    }

    /// Partition the corpus by topic. `spec` maps a split name to the topic
    /// ids it owns; every named topic must exist and belong to exactly one
    /// split. Documents keep their corpus order; the gold clustering is
    /// restricted to each split's mentions (a gold cluster spanning splits
    /// contributes its surviving part to each side).
    pub fn split(&self, spec: &BTreeMap<String, Vec<String>>) -> Result<BTreeMap<String, Corpus>, SplitError> {
        let topics = self.effective_topics();
        let mut topic_owner: BTreeMap<&str, &str> = BTreeMap::new();
        for (split, ts) in spec {
            for t in ts {
                if !topics.contains_key(t) {
                    return Err(SplitError::UnknownTopic { split: split.clone(), topic: t.clone() });
                }
                if let Some(first) = topic_owner.insert(t, split) {
                    return Err(SplitError::TopicInTwoSplits {
                        topic: t.clone(),
                        first: first.to_string(),
                        second: split.clone(),
                    });
                }
            }
        }
        let mut out = BTreeMap::new();
        for (split, ts) in spec {
            let doc_ids: BTreeSet<&str> = ts
                .iter()
                .flat_map(|t| topics[t].values().flatten().map(String::as_str))
                .collect();
            let documents: Vec<Document> =
                self.documents.iter().filter(|d| doc_ids.contains(d.id.as_str())).cloned().collect();
            let mention_ids: BTreeSet<String> =
                documents.iter().flat_map(|d| d.mentions.iter().map(|m| m.id.clone())).collect();
            let gold = self.gold.as_ref().map(|g| g.restricted_to(&mention_ids));
            let sub_topics: TopicMap =
                ts.iter().map(|t| (t.clone(), topics[t].clone())).collect();
            out.insert(
                split.clone(),
                Corpus { documents, gold, topics: sub_topics },
            );
        }
        Ok(out)
    }
}
