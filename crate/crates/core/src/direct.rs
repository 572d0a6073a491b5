//! Direct structure prediction: ask the model for the whole clustering in
//! one shot.
//!
//! Documents are rendered with every event mention tagged inline as
//! `[surface](mention_id)`; the system prompt fixes the task and demands a
//! compact JSON object mapping mention ids to cluster ids. Parsing is
//! total: whatever comes back, the result is a partition of exactly the
//! expected mention ids (mentions the model dropped become singletons, ids
//! it invented are ignored, a hopeless response degrades to all-singletons
//! with the failure recorded).
//!
//! The prompt builder enforces an input token budget by dropping whole
//! trailing documents — never slicing inside one — and reports what it cut.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::corpus::{Clustering, Document};
use crate::text::count_tokens;

/// System message for the structure-prediction request.
pub const DIRECT_SYSTEM_PROMPT: &str = "You are a helpful assistant tasked with clustering \
coreferential event mentions in the provided documents. The event mentions in the documents are \
marked as follows: [mention string](mention id). Please output the result in JSON format without \
whitespace. In the JSON structure, each 'mention id' is assigned a 'cluster id'.";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptMode {
    /// Include one worked demonstration (tagged documents + gold mapping).
    FewShot,
    ZeroShot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextMode {
    /// Render documents in full.
    FullDocuments,
    /// Render only sentences that contain at least one mention.
    MentionSentences,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectConfig {
    pub mode: PromptMode,
    pub context: ContextMode,
    /// Process each topic as its own request and merge the results.
    pub per_topic: bool,
    /// Whitespace-token budget for the assembled user prompt.
    pub input_token_budget: usize,
}

impl Default for DirectConfig {
    fn default() -> Self {
        DirectConfig {
            mode: PromptMode::FewShot,
            context: ContextMode::FullDocuments,
            per_topic: true,
            input_token_budget: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DirectError {
    #[error("few-shot prompt requested but no demonstration supplied")]
    MissingDemonstration,
    #[error("demonstration alone exceeds the input token budget ({used} > {budget})")]
    DemonstrationOverBudget { used: usize, budget: usize },
    #[error("no target document fits within the input token budget")]
    NothingFits,
}

/// Render a document with every mention tagged as `[surface](id)`.
///
/// Tags nest correctly for overlapping spans: at each position, opening
/// brackets appear for wider spans first and closing tags for inner spans
/// first, so an inner mention sits completely inside its enclosing tag.
pub fn tag_mentions(doc: &Document, context: ContextMode) -> String {
    let mut parts: Vec<String> = Vec::new();
    for (si, sentence) in doc.sentences.iter().enumerate() {
        let mentions: Vec<_> = doc.mentions.iter().filter(|m| m.sentence == si).collect();
        if matches!(context, ContextMode::MentionSentences) && mentions.is_empty() {
            continue;
        }
        // opens[t]: mentions whose span starts at t, widest first
        let mut opens: BTreeMap<usize, Vec<&crate::corpus::Mention>> = BTreeMap::new();
        // closes[t]: mentions whose span ends at t (exclusive), innermost first
        let mut closes: BTreeMap<usize, Vec<&crate::corpus::Mention>> = BTreeMap::new();
        for &m in &mentions {
            opens.entry(m.start).or_default().push(m);
            closes.entry(m.end).or_default().push(m);
        }
        for v in opens.values_mut() {
            v.sort_by(|a, b| b.end.cmp(&a.end).then(a.id.cmp(&b.id)));
        }
        for v in closes.values_mut() {
            v.sort_by(|a, b| b.start.cmp(&a.start).then(a.id.cmp(&b.id)));
        }
        let mut rendered: Vec<String> = Vec::new();
        for (t, token) in sentence.iter().enumerate() {
            let mut piece = String::new();
            if let Some(ms) = opens.get(&t) {
                for _ in ms {
                    piece.push('[');
                }
            }
            piece.push_str(token);
            rendered.push(piece);
            if let Some(ms) = closes.get(&(t + 1)) {
                let last = rendered.len() - 1;
                for m in ms {
                    rendered[last] = format!("{}]({})", rendered[last], m.id);
                }
            }
        }
        parts.push(rendered.join(" "));
    }
    parts.join(" ")
}

fn render_docs(docs: &[&Document], context: ContextMode) -> Vec<(String, String)> {
    docs.iter()
        .map(|d| (d.id.clone(), format!("Document {}:\n{}\n", d.id, tag_mentions(d, context))))
        .collect()
}

/// Compact `{"mention_id":"cluster_id"}` mapping for a demonstration.
fn gold_mapping_json(gold: &Clustering) -> String {
    let assignment = gold.assignment();
    let mut out = String::from("{");
    for (i, (m, c)) in assignment.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&serde_json::to_string(m).expect("string serializes"));
        out.push(':');
        out.push_str(&serde_json::to_string(c).expect("string serializes"));
    }
    out.push('}');
    out
}

/// The assembled request plus what the budget forced out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectPrompt {
    pub system: String,
    pub user: String,
    pub included_docs: Vec<String>,
    /// Documents dropped (whole) to respect the token budget. Their
    /// mentions are still expected in the output universe and will surface
    /// as singletons.
    pub truncated_docs: Vec<String>,
    /// Whitespace tokens in `system` + `user`.
    pub token_count: usize,
}

/// Build the one-shot clustering prompt over `target_docs`, optionally
/// preceded by a gold demonstration. Truncation drops whole documents from
/// the back of the target list until the budget holds.
pub fn build_direct_prompt(
    target_docs: &[&Document],
    demonstration: Option<(&[&Document], &Clustering)>,
    config: &DirectConfig,
) -> Result<DirectPrompt, DirectError> {
    if matches!(config.mode, PromptMode::FewShot) && demonstration.is_none() {
        return Err(DirectError::MissingDemonstration);
    }
    let mut fixed = String::new();
    if let (PromptMode::FewShot, Some((demo_docs, demo_gold))) = (config.mode, demonstration) {
        for (_, block) in render_docs(demo_docs, config.context) {
            fixed.push_str(&block);
        }
        fixed.push_str("Output:\n");
        fixed.push_str(&gold_mapping_json(demo_gold));
        fixed.push_str("\n\n");
    }
    let suffix = "Output:\n";
    let base_tokens =
        count_tokens(DIRECT_SYSTEM_PROMPT) + count_tokens(&fixed) + count_tokens(suffix);
    if base_tokens > config.input_token_budget {
        return Err(DirectError::DemonstrationOverBudget {
            used: base_tokens,
            budget: config.input_token_budget,
        });
    }

    let mut user = fixed;
    let mut included = Vec::new();
    let mut truncated = Vec::new();
    let mut used = base_tokens;
    for (id, block) in render_docs(target_docs, config.context) {
        let cost = count_tokens(&block);
        if used + cost > config.input_token_budget || !truncated.is_empty() {
            // keep document order intact: once one is dropped, drop the rest
            truncated.push(id);
            continue;
        }
        user.push_str(&block);
        included.push(id);
        used += cost;
    }
    if included.is_empty() {
        return Err(DirectError::NothingFits);
    }
    user.push_str(suffix);
    Ok(DirectPrompt {
        system: DIRECT_SYSTEM_PROMPT.to_string(),
        user,
        included_docs: included,
        truncated_docs: truncated,
        token_count: used,
    })
}

/// What happened while interpreting a model response.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DirectParseReport {
    /// A JSON object was found and decoded.
    pub parsed: bool,
    /// Expected mentions absent from the mapping (made singletons).
    pub missing_ids: Vec<String>,
    /// Mapping keys that are not expected mentions (ignored).
    pub unknown_ids: Vec<String>,
}

/// Interpret a model response as a clustering over exactly `expected`.
///
/// The first decodable JSON object in the response is used; values may be
/// strings or numbers. Cluster ids get `cluster_prefix` prepended so
/// responses from different per-topic requests can never collide when
/// merged. This function is total — on any failure every expected mention
/// becomes a singleton and the report says why nothing parsed.
pub fn parse_direct_output(
    raw: &str,
    expected: &[String],
    cluster_prefix: &str,
) -> (Clustering, DirectParseReport) {
    let mut report = DirectParseReport::default();
    let mapping = decode_mapping(raw);
    let mut groups: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let expected_set: BTreeSet<&String> = expected.iter().collect();
    match mapping {
        Some(map) => {
            report.parsed = true;
            for mention in map.keys() {
                if !expected_set.contains(mention) {
                    report.unknown_ids.push(mention.clone());
                }
            }
            for m in expected {
                match map.get(m) {
                    Some(label) => {
                        groups.entry(label.clone()).or_default().insert(m.clone());
                    }
                    None => {
                        report.missing_ids.push(m.clone());
                        groups.entry(format!("lone::{m}")).or_default().insert(m.clone());
                    }
                }
            }
        }
        None => {
            for m in expected {
                report.missing_ids.push(m.clone());
                groups.entry(format!("lone::{m}")).or_default().insert(m.clone());
            }
        }
    }
    let clusters = groups
        .into_iter()
        .map(|(label, mentions)| crate::corpus::Cluster {
            id: format!("{cluster_prefix}{label}"),
            mentions,
        })
        .collect();
    (Clustering::new(clusters), report)
}

/// Find and decode the first JSON object in free-form text, tolerating
/// code fences and surrounding prose. Values are normalized to strings.
fn decode_mapping(raw: &str) -> Option<BTreeMap<String, String>> {
    let start = raw.find('{')?;
    // try successively shorter suffixes ending at '}' so trailing prose
    // after the object does not break decoding
    let bytes = raw.as_bytes();
    let mut depth = 0usize;
    let mut end = None;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    end = Some(i);
                    break;
                }
            }
            _ => {}
        }
    }
    let end = end?;
    let value: serde_json::Value = serde_json::from_str(&raw[start..=end]).ok()?;
    let object = value.as_object()?;
    let mut out = BTreeMap::new();
    for (k, v) in object {
        let label = match v {
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Number(n) => n.to_string(),
            other => other.to_string(),
        };
        out.insert(k.clone(), label);
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Cluster, Mention};

    fn doc_with_mentions() -> Document {
        Document {
            id: "d0".to_string(),
            date: None,
            sentences: alloc::vec![
                alloc::vec!["A".into(), "quake".into(), "hit".into(), ".".into()],
                alloc::vec!["No".into(), "mentions".into(), "here".into(), ".".into()],
                alloc::vec!["Dozens".into(), "died".into(), ".".into()],
            ],
            mentions: alloc::vec![
                Mention {
                    id: "m0".into(),
                    doc_id: "d0".into(),
                    sentence: 0,
                    start: 1,
                    end: 2,
                    surface: "quake".into(),
                },
                Mention {
                    id: "m1".into(),
                    doc_id: "d0".into(),
                    sentence: 2,
                    start: 1,
                    end: 2,
                    surface: "died".into(),
                },
            ],
        }
    }

    #[test]
    fn tagging_marks_every_mention_inline() {
        let d = doc_with_mentions();
        let full = tag_mentions(&d, ContextMode::FullDocuments);
        assert_eq!(full, "A [quake](m0) hit . No mentions here . Dozens [died](m1) .");
        let sentences = tag_mentions(&d, ContextMode::MentionSentences);
        assert_eq!(sentences, "A [quake](m0) hit . Dozens [died](m1) .");
    }

    #[test]
    fn tagging_nests_overlapping_spans() {
        let mut d = doc_with_mentions();
        d.mentions = alloc::vec![
            Mention {
                id: "outer".into(),
                doc_id: "d0".into(),
                sentence: 0,
                start: 0,
                end: 3,
                surface: "A quake hit".into(),
            },
            Mention {
                id: "inner".into(),
                doc_id: "d0".into(),
                sentence: 0,
                start: 1,
                end: 2,
                surface: "quake".into(),
            },
        ];
        let tagged = tag_mentions(&d, ContextMode::MentionSentences);
        assert_eq!(tagged, "[A [quake](inner) hit](outer) .");
    }

    #[test]
    fn multiword_span_tags_wrap_the_whole_span() {
        let mut d = doc_with_mentions();
        d.mentions = alloc::vec![Mention {
            id: "m".into(),
            doc_id: "d0".into(),
            sentence: 0,
            start: 1,
            end: 3,
            surface: "quake hit".into(),
        }];
        assert_eq!(
            tag_mentions(&d, ContextMode::MentionSentences),
            "A [quake hit](m) ."
        );
    }

    fn gold() -> Clustering {
        Clustering::new(alloc::vec![Cluster::new("g0", ["m0".to_string(), "m1".to_string()])])
    }

    #[test]
    fn few_shot_prompt_contains_demo_target_and_output_slot() {
        let d = doc_with_mentions();
        let mut demo = doc_with_mentions();
        demo.id = "demo0".to_string();
        for m in &mut demo.mentions {
            m.doc_id = "demo0".to_string();
        }
        let g = gold();
        let prompt = build_direct_prompt(&[&d], Some((&[&demo], &g)), &DirectConfig::default()).unwrap();
        assert!(prompt.system.contains("clustering coreferential event mentions"));
        assert!(prompt.system.contains("[mention string](mention id)"));
        assert!(prompt.system.contains("JSON format without whitespace"));
        assert!(prompt.user.contains("Document demo0:"));
        assert!(prompt.user.contains("{\"m0\":\"g0\",\"m1\":\"g0\"}"));
        assert!(prompt.user.contains("Document d0:"));
        assert!(prompt.user.trim_end().ends_with("Output:"));
        assert_eq!(prompt.included_docs, alloc::vec!["d0".to_string()]);
        assert!(prompt.truncated_docs.is_empty());
    }

    #[test]
    fn zero_shot_needs_no_demo_but_few_shot_does() {
        let d = doc_with_mentions();
        let zero = DirectConfig { mode: PromptMode::ZeroShot, ..DirectConfig::default() };
        let prompt = build_direct_prompt(&[&d], None, &zero).unwrap();
        assert!(!prompt.user.contains("Output:\n{"));
        assert_eq!(
            build_direct_prompt(&[&d], None, &DirectConfig::default()),
            Err(DirectError::MissingDemonstration)
        );
    }

    #[test]
    fn truncation_drops_whole_trailing_documents_and_reports_them() {
        let d0 = doc_with_mentions();
        let mut d1 = doc_with_mentions();
        d1.id = "d1".to_string();
        for m in &mut d1.mentions {
            m.doc_id = "d1".to_string();
            m.id = format!("x{}", m.id);
        }
        let config = DirectConfig {
            mode: PromptMode::ZeroShot,
            // enough for the system prompt and one document, not two
            input_token_budget: count_tokens(DIRECT_SYSTEM_PROMPT) + 20,
            ..DirectConfig::default()
        };
        let prompt = build_direct_prompt(&[&d0, &d1], None, &config).unwrap();
        assert_eq!(prompt.included_docs, alloc::vec!["d0".to_string()]);
        assert_eq!(prompt.truncated_docs, alloc::vec!["d1".to_string()]);
        assert!(prompt.token_count <= config.input_token_budget);
        assert!(!prompt.user.contains("Document d1:"));

        let impossible = DirectConfig {
            mode: PromptMode::ZeroShot,
            input_token_budget: count_tokens(DIRECT_SYSTEM_PROMPT) + 2,
            ..DirectConfig::default()
        };
        assert_eq!(
            build_direct_prompt(&[&d0], None, &impossible),
            Err(DirectError::NothingFits)
        );
    }

    fn expected() -> Vec<String> {
        alloc::vec!["m0".to_string(), "m1".to_string(), "m2".to_string()]
    }

    #[test]
    fn parse_groups_by_cluster_id_with_prefix() {
        let (clustering, report) =
            parse_direct_output("{\"m0\":\"c1\",\"m1\":\"c1\",\"m2\":\"c2\"}", &expected(), "t0::");
        assert!(report.parsed);
        assert!(report.missing_ids.is_empty());
        assert!(report.unknown_ids.is_empty());
        let assignment = clustering.assignment();
        assert_eq!(assignment["m0"], "t0::c1");
        assert_eq!(assignment["m1"], "t0::c1");
        assert_eq!(assignment["m2"], "t0::c2");
        clustering.validate().unwrap();
    }

    #[test]
    fn parse_tolerates_fences_prose_and_numeric_ids() {
        let raw = "Here you go:\n```json\n{\"m0\": 1, \"m1\": 1, \"m2\": 2}\n```\nDone!";
        let (clustering, report) = parse_direct_output(raw, &expected(), "");
        assert!(report.parsed);
        assert_eq!(clustering.assignment()["m0"], "1");
        assert_eq!(clustering.clusters.len(), 2);
    }

    #[test]
    fn parse_makes_dropped_mentions_singletons_and_ignores_invented_ones() {
        let raw = "{\"m0\":\"a\",\"ghost\":\"a\"}";
        let (clustering, report) = parse_direct_output(raw, &expected(), "");
        assert!(report.parsed);
        assert_eq!(report.missing_ids, alloc::vec!["m1".to_string(), "m2".to_string()]);
        assert_eq!(report.unknown_ids, alloc::vec!["ghost".to_string()]);
        assert_eq!(clustering.mention_ids(), expected().into_iter().collect());
        assert_eq!(clustering.clusters.len(), 3);
    }

    #[test]
    fn garbage_degrades_to_all_singletons() {
        for raw in ["not json at all", "", "{broken", "[1,2,3]"] {
            let (clustering, report) = parse_direct_output(raw, &expected(), "t::");
            assert!(!report.parsed, "{raw:?} should not parse");
            assert_eq!(clustering.clusters.len(), 3);
            assert_eq!(clustering.mention_ids(), expected().into_iter().collect());
            clustering.validate().unwrap();
        }
    }

    #[test]
    fn prefix_keeps_per_topic_labels_apart() {
        let (a, _) = parse_direct_output("{\"m0\":\"c1\"}", &["m0".to_string()], "topicA::");
        let (b, _) = parse_direct_output("{\"m1\":\"c1\"}", &["m1".to_string()], "topicB::");
        let mut merged = a.clusters;
        merged.extend(b.clusters);
        let merged = Clustering::new(merged);
        merged.validate().unwrap(); // same raw label "c1", no id collision
        assert_eq!(merged.clusters.len(), 2);
    }
}
