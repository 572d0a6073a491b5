//! CoNLL-2012 coreference emission (and a parse-back used to verify it).
//!
//! Output follows the reference-scorer conventions: each document wrapped
//! in `#begin document (<id>); part 000` / `#end document`, one token per
//! line with tab-separated columns `doc-id  part  word-index  token  coref`,
//! a blank line after every sentence. The coreference column uses
//! `(7` / `7)` / `(7)` open/close/unit annotations joined by `|`, `-` for
//! unannotated tokens. Cluster numbers follow the clustering's cluster
//! order.

use std::collections::BTreeMap;

use cdecr_core::corpus::{Clustering, Corpus};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConllError {
    #[error("clustering references mention `{0}` that the corpus does not contain")]
    UnknownMention(String),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("cluster {cluster} closed at line {line} without being open")]
    UnbalancedClose { cluster: usize, line: usize },
    #[error("document `{doc}` ends with cluster {cluster} still open")]
    UnclosedSpan { doc: String, cluster: usize },
}

/// One recovered annotation: a token span in a document's sentence tagged
/// with a cluster number.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ConllSpan {
    pub doc_id: String,
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
    pub cluster: usize,
}

/// Render `clustering` over `corpus` in CoNLL-2012 form. Every clustering
/// mention must exist in the corpus; corpus mentions outside the
/// clustering are simply unannotated.
pub fn emit_conll(corpus: &Corpus, clustering: &Clustering) -> Result<String, ConllError> {
    let index = corpus.mention_index();
    // (doc, sentence, token) → annotations, assembled mention by mention
    let mut opens: BTreeMap<(String, usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    let mut closes: BTreeMap<(String, usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    let mut units: BTreeMap<(String, usize, usize), Vec<usize>> = BTreeMap::new();
    for (number, cluster) in clustering.clusters.iter().enumerate() {
        for mention_id in &cluster.mentions {
            let (_, m) = index
                .get(mention_id.as_str())
                .ok_or_else(|| ConllError::UnknownMention(mention_id.clone()))?;
            if m.end - m.start == 1 {
                units.entry((m.doc_id.clone(), m.sentence, m.start)).or_default().push(number);
            } else {
                opens
                    .entry((m.doc_id.clone(), m.sentence, m.start))
                    .or_default()
                    .push((m.end, number));
                closes
                    .entry((m.doc_id.clone(), m.sentence, m.end - 1))
                    .or_default()
                    .push((m.start, number));
            }
        }
    }

    let mut out = String::new();
    for doc in &corpus.documents {
        out.push_str(&format!("#begin document ({}); part 000\n", doc.id));
        for (si, sentence) in doc.sentences.iter().enumerate() {
            for (ti, token) in sentence.iter().enumerate() {
                let key = (doc.id.clone(), si, ti);
                let mut parts: Vec<String> = Vec::new();
                // wider spans open first, so nesting reads outermost-first
                if let Some(mut o) = opens.get(&key).cloned() {
                    o.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
                    parts.extend(o.iter().map(|(_, n)| format!("({n}")));
                }
                if let Some(mut u) = units.get(&key).cloned() {
                    u.sort_unstable();
                    parts.extend(u.iter().map(|n| format!("({n})")));
                }
                // inner spans (larger start) close first
                if let Some(mut c) = closes.get(&key).cloned() {
                    c.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
                    parts.extend(c.iter().map(|(_, n)| format!("{n})")));
                }
                let coref = if parts.is_empty() { "-".to_string() } else { parts.join("|") };
                out.push_str(&format!("{}\t0\t{}\t{}\t{}\n", doc.id, ti, token, coref));
            }
            out.push('\n');
        }
        out.push_str("#end document\n");
    }
    Ok(out)
}

/// Recover the annotated spans from CoNLL text. Only the document header,
/// the word-index column, and the final coreference column are consulted,
/// so the parser also accepts files with richer middle columns.
pub fn parse_conll(text: &str) -> Result<Vec<ConllSpan>, ConllError> {
    let mut spans = Vec::new();
    let mut doc: Option<String> = None;
    let mut sentence = 0usize;
    // cluster number → stack of open starts (nesting is LIFO per cluster)
    let mut open: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut saw_token_in_sentence = false;

    for (ln, line) in text.lines().enumerate() {
        let lineno = ln + 1;
        if let Some(rest) = line.strip_prefix("#begin document (") {
            let id = rest.split(')').next().unwrap_or_default();
            doc = Some(id.to_string());
            sentence = 0;
            saw_token_in_sentence = false;
            continue;
        }
        if line.starts_with("#end document") {
            if let Some((cluster, _)) = open.iter().find(|(_, v)| !v.is_empty()) {
                return Err(ConllError::UnclosedSpan {
                    doc: doc.clone().unwrap_or_default(),
                    cluster: *cluster,
                });
            }
            doc = None;
            continue;
        }
        if line.trim().is_empty() {
            if saw_token_in_sentence {
                sentence += 1;
                saw_token_in_sentence = false;
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 4 {
            return Err(ConllError::Malformed {
                line: lineno,
                message: format!("expected ≥4 tab-separated columns, got {}", cols.len()),
            });
        }
        let doc_id = doc.clone().ok_or(ConllError::Malformed {
            line: lineno,
            message: "token line outside any document".to_string(),
        })?;
        let word: usize = cols[2].parse().map_err(|_| ConllError::Malformed {
            line: lineno,
            message: format!("bad word index `{}`", cols[2]),
        })?;
        saw_token_in_sentence = true;
        let coref = *cols.last().expect("split always yields at least one column");
        if coref == "-" || coref == "_" {
            continue;
        }
        for part in coref.split('|') {
            let opens_here = part.starts_with('(');
            let closes_here = part.ends_with(')');
            let digits = part.trim_start_matches('(').trim_end_matches(')');
            let cluster: usize = digits.parse().map_err(|_| ConllError::Malformed {
                line: lineno,
                message: format!("bad coreference annotation `{part}`"),
            })?;
            if opens_here {
                open.entry(cluster).or_default().push(word);
            }
            if closes_here {
                let start =
                    open.entry(cluster).or_default().pop().ok_or(ConllError::UnbalancedClose {
                        cluster,
                        line: lineno,
                    })?;
                spans.push(ConllSpan {
                    doc_id: doc_id.clone(),
                    sentence,
                    start,
                    end: word + 1,
                    cluster,
                });
            }
        }
    }
    spans.sort();
    Ok(spans)
}

/// Rebuild a Clustering from parsed spans by matching them back to corpus
/// mentions. Spans that match no known mention are an error — the emitter
/// never produces them.
pub fn clustering_from_spans(corpus: &Corpus, spans: &[ConllSpan]) -> Result<Clustering, ConllError> {
    let by_span: BTreeMap<(String, usize, usize, usize), String> = corpus
        .documents
        .iter()
        .flat_map(|d| {
            d.mentions
                .iter()
                .map(|m| ((d.id.clone(), m.sentence, m.start, m.end), m.id.clone()))
        })
        .collect();
    let mut groups: BTreeMap<usize, std::collections::BTreeSet<String>> = BTreeMap::new();
    for span in spans {
        let key = (span.doc_id.clone(), span.sentence, span.start, span.end);
        let mention = by_span.get(&key).ok_or_else(|| {
            ConllError::UnknownMention(format!(
                "{}:{}:{}..{}",
                span.doc_id, span.sentence, span.start, span.end
            ))
        })?;
        groups.entry(span.cluster).or_default().insert(mention.clone());
    }
    Ok(Clustering::from_groups(groups.into_values().collect()))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use cdecr_core::corpus::{Cluster, Document, Mention};
    use cdecr_core::math::splitmix64;

    use super::*;

    fn mention(id: &str, doc: &str, sentence: usize, start: usize, end: usize, s: &str) -> Mention {
        Mention {
            id: id.into(),
            doc_id: doc.into(),
            sentence,
            start,
            end,
            surface: s.into(),
        }
    }

    fn two_doc_corpus() -> Corpus {
        let d0 = Document {
            id: "d0".into(),
            date: None,
            sentences: vec![
                vec!["A".into(), "quake".into(), "hit".into(), ".".into()],
                vec!["People".into(), "fled".into(), ".".into()],
            ],
            mentions: vec![
                mention("m0", "d0", 0, 1, 2, "quake"),
                mention("m1", "d0", 1, 0, 2, "People fled"),
            ],
        };
        let d1 = Document {
            id: "d1".into(),
            date: None,
            sentences: vec![vec!["The".into(), "earthquake".into(), "struck".into()]],
            mentions: vec![mention("m2", "d1", 0, 1, 2, "earthquake")],
        };
        Corpus { documents: vec![d0, d1], gold: None, topics: BTreeMap::new() }
    }

    #[test]
    fn empty_clustering_emits_headers_and_dashes_only() {
        let corpus = two_doc_corpus();
        let text = emit_conll(&corpus, &Clustering::default()).unwrap();
        assert!(text.contains("#begin document (d0); part 000"));
        assert!(text.contains("#begin document (d1); part 000"));
        assert_eq!(text.matches("#end document").count(), 2);
        for line in text.lines().filter(|l| !l.is_empty() && !l.starts_with('#')) {
            assert!(line.ends_with("\t-"), "unexpected annotation in {line}");
        }
    }

    #[test]
    fn single_token_mentions_render_as_units() {
        let corpus = two_doc_corpus();
        let clustering = Clustering::new(vec![Cluster::new(
            "c0",
            ["m0".to_string(), "m2".to_string()],
        )]);
        let text = emit_conll(&corpus, &clustering).unwrap();
        assert_eq!(text.matches("(0)").count(), 2);
        assert!(text.contains("d0\t0\t1\tquake\t(0)"));
        assert!(text.contains("d1\t0\t1\tearthquake\t(0)"));
    }

    #[test]
    fn multi_token_span_opens_and_closes() {
        let corpus = two_doc_corpus();
        let clustering =
            Clustering::new(vec![Cluster::new("c0", ["m1".to_string(), "m2".to_string()])]);
        let text = emit_conll(&corpus, &clustering).unwrap();
        assert!(text.contains("d0\t0\t0\tPeople\t(0"));
        assert!(text.contains("d0\t0\t1\tfled\t0)"));
    }

    #[test]
    fn unknown_mention_is_rejected() {
        let corpus = two_doc_corpus();
        let clustering = Clustering::new(vec![Cluster::new("c0", ["ghost".to_string()])]);
        assert_eq!(
            emit_conll(&corpus, &clustering),
            Err(ConllError::UnknownMention("ghost".into()))
        );
    }

    #[test]
    fn parse_back_recovers_the_partition() {
        let corpus = two_doc_corpus();
        let clustering = Clustering::from_groups(vec![
            BTreeSet::from(["m0".to_string(), "m2".to_string()]),
            BTreeSet::from(["m1".to_string()]),
        ]);
        let text = emit_conll(&corpus, &clustering).unwrap();
        let spans = parse_conll(&text).unwrap();
        let recovered = clustering_from_spans(&corpus, &spans).unwrap();
        assert_eq!(recovered, clustering);
    }

    /// 50 seeded random partitions of a 10-mention corpus survive the
    /// emit → parse → rebuild round trip unchanged.
    #[test]
    fn random_partitions_round_trip() {
        let mut sentences = Vec::new();
        let mut mentions = Vec::new();
        for i in 0..10 {
            sentences.push(vec!["event".to_string(), format!("w{i}"), ".".to_string()]);
            mentions.push(mention(&format!("m{i}"), "d0", i, 0, 1, "event"));
        }
        let corpus = Corpus {
            documents: vec![Document { id: "d0".into(), date: None, sentences, mentions }],
            gold: None,
            topics: BTreeMap::new(),
        };

        let mut state = 0x5eed;
        for _ in 0..50 {
            let mut groups: BTreeMap<u64, BTreeSet<String>> = BTreeMap::new();
            for i in 0..10 {
                groups.entry(splitmix64(&mut state) % 4).or_default().insert(format!("m{i}"));
            }
            let clustering = Clustering::from_groups(groups.into_values().collect());
            let text = emit_conll(&corpus, &clustering).unwrap();
            let recovered =
                clustering_from_spans(&corpus, &parse_conll(&text).unwrap()).unwrap();
            assert_eq!(recovered, clustering);
        }
    }

    #[test]
    fn nested_spans_round_trip() {
        // one mention inside another, different clusters
        let doc = Document {
            id: "d0".into(),
            date: None,
            sentences: vec![vec![
                "big".into(),
                "storm".into(),
                "damage".into(),
                "report".into(),
            ]],
            mentions: vec![
                mention("outer", "d0", 0, 0, 4, "big storm damage report"),
                mention("inner", "d0", 0, 1, 3, "storm damage"),
            ],
        };
        let corpus = Corpus { documents: vec![doc], gold: None, topics: BTreeMap::new() };
        let clustering = Clustering::new(vec![
            Cluster::new("a", ["outer".to_string()]),
            Cluster::new("b", ["inner".to_string()]),
        ]);
        let text = emit_conll(&corpus, &clustering).unwrap();
        // outer (cluster 0) must open before inner (cluster 1)
        assert!(text.contains("big\t(0"));
        assert!(text.contains("storm\t(1"));
        assert!(text.contains("damage\t1)"));
        assert!(text.contains("report\t0)"));
        // the text carries only numeric cluster ids, so the rebuild recovers
        // the partition in canonical (from_groups) labeling
        let recovered = clustering_from_spans(&corpus, &parse_conll(&text).unwrap()).unwrap();
        let expected = Clustering::from_groups(vec![
            BTreeSet::from(["outer".to_string()]),
            BTreeSet::from(["inner".to_string()]),
        ]);
        assert_eq!(recovered, expected);
    }

    #[test]
    fn stray_close_is_reported() {
        let text = "#begin document (d0); part 000\nd0\t0\t0\tword\t3)\n\n#end document\n";
        assert!(matches!(
            parse_conll(text),
            Err(ConllError::UnbalancedClose { cluster: 3, line: 2 })
        ));
    }
}
