//! Two-step mention summarization prompts and response parsing.
//!
//! Step 1 asks the model to elaborate each event mention in the context of
//! its news article (after dependency-parsing the mention's sentence); step
//! 2 feeds the first elaboration back and asks for entity details resolved
//! by coreference plus explicit or publication-date-inferred dates. Both
//! steps batch every mention of one document into a single prompt as
//! numbered questions, and both pin the answer shape to
//! `'Elaboration: <mention> refers to <placeholder>'` so answers can be
//! recovered mechanically.
//!
//! A paraphrase variant (used for ablations) asks for a three-sentence
//! paraphrase of the ±5-sentence window around the mention instead.
//!
//! Everything here is pure string work; the companion crate owns the HTTP
//! traffic, retries, and caching keyed by [`CacheKey`].

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use sha2::{Digest, Sha256};

use crate::corpus::{Document, Mention};
use crate::text::{find_token_span, tokenize};

/// Which generation pass produced a summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Step {
    One,
    Two,
    Paraphrase,
}

impl Step {
    pub fn as_str(&self) -> &'static str {
        match self {
            Step::One => "step1",
            Step::Two => "step2",
            Step::Paraphrase => "paraphrase",
        }
    }

    /// The marker that prefixes an answer for this step.
    pub fn marker(&self) -> &'static str {
        match self {
            Step::One | Step::Two => "Elaboration:",
            Step::Paraphrase => "Paraphrase:",
        }
    }
}

/// One parsed summary. `text` is the body after the marker — for
/// elaborations it reads `<mention> refers to …`, so the mention surface is
/// normally its first tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summary {
    pub mention_id: String,
    pub step: Step,
    pub text: String,
    /// Token span of the mention surface inside `text`, when found.
    pub located_span: Option<(usize, usize)>,
    /// The mention surface does not appear in the body (set together with
    /// `located_span = None`); downstream encoding will fall back to
    /// duplicating the document half.
    pub surface_missing: bool,
}

/// Per-mention outcome of parsing one model response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseOutcome {
    Parsed(Summary),
    /// No answer segment found for this mention; the caller may retry.
    Missing { mention_id: String },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PromptError {
    #[error("no mentions to summarize for document `{0}`")]
    NoMentions(String),
    #[error("mention `{mention}` belongs to document `{expected}`, not `{got}`")]
    ForeignMention { mention: String, expected: String, got: String },
    #[error("step-2 prompt needs one step-1 summary per mention ({mentions} mentions, {summaries} summaries)")]
    SummaryCountMismatch { mentions: usize, summaries: usize },
}

fn check_mentions(doc: &Document, mentions: &[&Mention]) -> Result<(), PromptError> {
    if mentions.is_empty() {
        return Err(PromptError::NoMentions(doc.id.clone()));
    }
    for m in mentions {
        if m.doc_id != doc.id {
            return Err(PromptError::ForeignMention {
                mention: m.id.clone(),
                expected: m.doc_id.clone(),
                got: doc.id.clone(),
            });
        }
    }
    Ok(())
}

fn prompt_header(doc: &Document) -> String {
    let date = doc.date.as_deref().unwrap_or("not available");
    format!("News: {}\nPublication date: {}\n", doc.text(), date)
}

fn question_line(index: usize, mention: &Mention, doc: &Document) -> String {
    format!(
        "Question {}: In this news, given \"{}\" mentioned in the sentence \"{}\".\n",
        index,
        mention.surface,
        doc.sentence_text(mention.sentence)
    )
}

/// First-pass prompt: every mention of the document as a numbered question,
/// preceded by the dependency-parsing instruction.
pub fn build_step1_prompt(doc: &Document, mentions: &[&Mention]) -> Result<String, PromptError> {
    check_mentions(doc, mentions)?;
    let mut out = prompt_header(doc);
    out.push_str(
        "Before answering each question, first perform dependency parsing on the sentence \
         containing the given event mention, and base your elaboration on the parsing result.\n",
    );
    for (i, m) in mentions.iter().enumerate() {
        out.push_str(&question_line(i + 1, m, doc));
        out.push_str(&format!(
            "Please elaborate {} in the context of the news article.\n",
            m.surface
        ));
        out.push_str(&format!(
            "Present the information in the following format: 'Elaboration: {} refers to <placeholder>'.\n",
            m.surface
        ));
    }
    Ok(out)
}

/// Second-pass prompt: feeds each step-1 elaboration back and asks for
/// entity details (via coreference) and dates, inferred from the
/// publication date when the text has none.
pub fn build_step2_prompt(
    doc: &Document,
    mentions: &[&Mention],
    step1_texts: &[&str],
) -> Result<String, PromptError> {
    check_mentions(doc, mentions)?;
    if mentions.len() != step1_texts.len() {
        return Err(PromptError::SummaryCountMismatch {
            mentions: mentions.len(),
            summaries: step1_texts.len(),
        });
    }
    let mut out = prompt_header(doc);
    for (i, (m, s1)) in mentions.iter().zip(step1_texts).enumerate() {
        out.push_str(&question_line(i + 1, m, doc));
        out.push_str(&format!("Elaboration: {}\n", s1));
        out.push_str(&format!(
            "Please further elaborate \"{}\" by providing details for entities in the elaboration \
             utilizing coreference resolution.\n",
            m.surface
        ));
        out.push_str(
            "Provide any available or approximate dates in the news for reference, which can be \
             inferred from the publication date of the news if available.\n",
        );
        out.push_str(&format!(
            "Present the information in the following format: 'Elaboration: {} refers to <placeholder>'.\n",
            m.surface
        ));
    }
    Ok(out)
}

/// Sentence window the paraphrase instruction denotes: the mention's
/// sentence plus up to five sentences on each side, clamped to the
/// document. Returned half-open.
pub fn paraphrase_window(doc: &Document, mention: &Mention) -> (usize, usize) {
    let start = mention.sentence.saturating_sub(5);
    let end = (mention.sentence + 6).min(doc.sentences.len());
    (start, end)
}

/// Paraphrase-variant prompt (ablation): paraphrase the ±5-sentence window
/// in at most three sentences, keeping the mention marked as `#mention#`.
pub fn build_paraphrase_prompt(doc: &Document, mentions: &[&Mention]) -> Result<String, PromptError> {
    check_mentions(doc, mentions)?;
    let mut out = prompt_header(doc);
    for (i, m) in mentions.iter().enumerate() {
        out.push_str(&question_line(i + 1, m, doc));
        out.push_str(&format!(
            "Concatenate the preceding five sentences of the current sentence (ignore if not \
             available), the current sentence, and the subsequent five sentences of the current \
             sentence (ignore if not available) into a single paragraph. Then, paraphrase the \
             concatenated paragraph while preserving the mention {m}. Attempt to express the \
             information differently while maintaining the meaning and key information. Ensure \
             that the mention {m} is preserved and marked as #{m}# in the paraphrased result. \
             Limit the paraphrased result to three sentences.\n",
            m = m.surface
        ));
        out.push_str("Present the information in the following format: 'Paraphrase: <placeholder>'.\n");
    }
    Ok(out)
}

/// Case-insensitive search for `pattern` in `text`; both are compared on
/// their lowercase forms, and the match is located by byte offset in the
/// lowercased string (safe here because we only use it to strip exact
/// `#mention#` markers, which lowercase without changing length for the
/// alphabets we care about).
fn replace_marked(text: &str, surface: &str) -> String {
    let marked = format!("#{surface}#");
    if text.contains(&marked) {
        return text.replace(&marked, surface);
    }
    let lower = text.to_lowercase();
    let marked_lower = marked.to_lowercase();
    if lower.len() == text.len() {
        if let Some(pos) = lower.find(&marked_lower) {
            let mut out = String::with_capacity(text.len());
            out.push_str(&text[..pos]);
            // keep the model's own casing, just drop the # marks
            out.push_str(&text[pos + 1..pos + marked.len() - 1]);
            out.push_str(&text[pos + marked.len()..]);
            return out;
        }
    }
    text.to_string()
}

/// Split a raw model response into per-mention summaries. The i-th
/// occurrence of the step marker answers the i-th mention, in prompt order;
/// a mention without a segment comes back as [`ParseOutcome::Missing`]
/// (extra segments are ignored). The pinned answer format is a single
/// line, so a segment runs from its marker to the end of that line (or the
/// next marker, for responses crammed onto one line).
///
/// Paraphrase responses additionally have their `#mention#` marking
/// stripped so the stored text is directly embeddable.
pub fn parse_response(raw: &str, mentions: &[&Mention], step: Step) -> Vec<ParseOutcome> {
    let marker = step.marker();
    let mut bodies: Vec<String> = Vec::new();
    let mut rest = raw;
    while let Some(pos) = rest.find(marker) {
        rest = &rest[pos + marker.len()..];
        let mut end = rest.len();
        if let Some(next) = rest.find(marker) {
            end = end.min(next);
        }
        if let Some(nl) = rest.find('\n') {
            end = end.min(nl);
        }
        let body = rest[..end].trim().trim_matches(['\'', '"', '`']).trim();
        bodies.push(body.to_string());
        rest = &rest[end..];
    }
    mentions
        .iter()
        .enumerate()
        .map(|(i, m)| match bodies.get(i) {
            Some(body) if !body.is_empty() => {
                let text = if step == Step::Paraphrase {
                    replace_marked(body, &m.surface)
                } else {
                    body.clone()
                };
                let tokens = tokenize(&text);
                let surface_tokens = tokenize(&m.surface);
                let located_span = find_token_span(&tokens, &surface_tokens);
                ParseOutcome::Parsed(Summary {
                    mention_id: m.id.clone(),
                    step,
                    surface_missing: located_span.is_none(),
                    located_span,
                    text,
                })
            }
            _ => ParseOutcome::Missing { mention_id: m.id.clone() },
        })
        .collect()
}

/// Content-addressed cache key for one summarization request: model, step,
/// document, mention set (order-insensitive) and the full prompt text. Any
/// change to the prompt template therefore invalidates old cache entries.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CacheKey(pub String);

impl CacheKey {
    pub fn compute(model: &str, step: Step, doc_id: &str, mention_ids: &[&str], prompt: &str) -> CacheKey {
        let mut sorted: Vec<&str> = mention_ids.to_vec();
        sorted.sort_unstable();
        let mut hasher = Sha256::new();
        // length-prefix every field so concatenation is unambiguous
        let mut feed = |bytes: &[u8]| {
            hasher.update((bytes.len() as u64).to_be_bytes());
            hasher.update(bytes);
        };
        feed(model.as_bytes());
        feed(step.as_str().as_bytes());
        feed(doc_id.as_bytes());
        for id in &sorted {
            feed(id.as_bytes());
        }
        feed(prompt.as_bytes());
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for b in digest {
            use core::fmt::Write;
            let _ = write!(hex, "{b:02x}");
        }
        CacheKey(hex)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc() -> Document {
        Document {
            id: "d0".to_string(),
            date: Some("2013-07-02".to_string()),
            sentences: alloc::vec![
                alloc::vec!["A".into(), "quake".into(), "hit".into(), "Aceh".into(), ".".into()],
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
                    sentence: 1,
                    start: 1,
                    end: 2,
                    surface: "died".into(),
                },
            ],
        }
    }

    #[test]
    fn step1_prompt_has_header_parsing_instruction_and_numbered_questions() {
        let d = doc();
        let ms: Vec<&Mention> = d.mentions.iter().collect();
        let p = build_step1_prompt(&d, &ms).unwrap();
        assert!(p.starts_with("News: A quake hit Aceh . Dozens died .\n"));
        assert!(p.contains("Publication date: 2013-07-02\n"));
        assert!(p.contains(
            "Before answering each question, first perform dependency parsing on the sentence \
             containing the given event mention, and base your elaboration on the parsing result."
        ));
        assert!(p.contains("Question 1: In this news, given \"quake\" mentioned in the sentence \"A quake hit Aceh .\"."));
        assert!(p.contains("Question 2: In this news, given \"died\" mentioned in the sentence \"Dozens died .\"."));
        assert!(p.contains("Please elaborate quake in the context of the news article."));
        assert!(p.contains("Present the information in the following format: 'Elaboration: quake refers to <placeholder>'."));
        // exactly one parsing instruction, shared by all questions
        assert_eq!(p.matches("dependency parsing").count(), 1);
    }

    #[test]
    fn missing_date_renders_as_not_available() {
        let mut d = doc();
        d.date = None;
        let ms: Vec<&Mention> = d.mentions.iter().collect();
        let p = build_step1_prompt(&d, &ms).unwrap();
        assert!(p.contains("Publication date: not available\n"));
    }

    #[test]
    fn step2_prompt_embeds_step1_output_and_asks_for_entities_and_dates() {
        let d = doc();
        let ms: Vec<&Mention> = d.mentions.iter().collect();
        let p = build_step2_prompt(
            &d,
            &ms,
            &["quake refers to a tremor", "died refers to dozens dying"],
        )
        .unwrap();
        assert!(p.contains("Elaboration: quake refers to a tremor\n"));
        assert!(p.contains(
            "Please further elaborate \"quake\" by providing details for entities in the \
             elaboration utilizing coreference resolution."
        ));
        assert!(p.contains(
            "Provide any available or approximate dates in the news for reference, which can be \
             inferred from the publication date of the news if available."
        ));
        assert!(!p.contains("dependency parsing"));
    }

    #[test]
    fn step2_rejects_count_mismatch() {
        let d = doc();
        let ms: Vec<&Mention> = d.mentions.iter().collect();
        assert!(matches!(
            build_step2_prompt(&d, &ms, &["only one"]),
            Err(PromptError::SummaryCountMismatch { mentions: 2, summaries: 1 })
        ));
    }

    #[test]
    fn prompts_reject_empty_and_foreign_mentions() {
        let d = doc();
        assert!(matches!(build_step1_prompt(&d, &[]), Err(PromptError::NoMentions(_))));
        let mut foreign = d.mentions[0].clone();
        foreign.doc_id = "other".to_string();
        assert!(matches!(
            build_step1_prompt(&d, &[&foreign]),
            Err(PromptError::ForeignMention { .. })
        ));
    }

    #[test]
    fn paraphrase_prompt_carries_window_marking_and_length_limit() {
        let d = doc();
        let ms: Vec<&Mention> = d.mentions.iter().collect();
        let p = build_paraphrase_prompt(&d, &ms).unwrap();
        assert!(p.contains("Concatenate the preceding five sentences of the current sentence"));
        assert!(p.contains("paraphrase the concatenated paragraph while preserving the mention quake"));
        assert!(p.contains("marked as #quake#"));
        assert!(p.contains("Limit the paraphrased result to three sentences."));
        assert!(p.contains("Present the information in the following format: 'Paraphrase: <placeholder>'."));
    }

    #[test]
    fn paraphrase_window_clamps_at_document_edges() {
        let mut d = doc();
        d.sentences = (0..12)
            .map(|i| alloc::vec![format!("s{i}"), "tok".to_string()])
            .collect();
        let mut m = d.mentions[0].clone();
        m.start = 0;
        m.end = 1;

        m.sentence = 0;
        assert_eq!(paraphrase_window(&d, &m), (0, 6)); // truncated head
        m.sentence = 6;
        assert_eq!(paraphrase_window(&d, &m), (1, 12)); // full ±5 window
        m.sentence = 11;
        assert_eq!(paraphrase_window(&d, &m), (6, 12)); // truncated tail
    }

    #[test]
    fn parse_recovers_bodies_in_order() {
        let d = doc();
        let ms: Vec<&Mention> = d.mentions.iter().collect();
        let raw = "Elaboration: quake refers to the seismic event in Aceh on July 2, 2013\n\
                   Elaboration: died refers to the deaths of dozens in the quake";
        let out = parse_response(raw, &ms, Step::One);
        match &out[0] {
            ParseOutcome::Parsed(s) => {
                assert_eq!(s.mention_id, "m0");
                assert_eq!(s.text, "quake refers to the seismic event in Aceh on July 2, 2013");
                assert_eq!(s.located_span, Some((0, 1)));
                assert!(!s.surface_missing);
            }
            other => panic!("expected parse, got {other:?}"),
        }
        match &out[1] {
            ParseOutcome::Parsed(s) => assert_eq!(s.located_span, Some((0, 1))),
            other => panic!("expected parse, got {other:?}"),
        }
    }

    #[test]
    fn parse_flags_missing_segments_and_mismatched_surfaces() {
        let d = doc();
        let ms: Vec<&Mention> = d.mentions.iter().collect();
        // only one answer for two questions, and it elaborates the wrong word
        let out = parse_response("Elaboration: tremor refers to something", &ms, Step::One);
        match &out[0] {
            ParseOutcome::Parsed(s) => {
                assert!(s.surface_missing);
                assert_eq!(s.located_span, None);
            }
            other => panic!("expected parse, got {other:?}"),
        }
        assert_eq!(out[1], ParseOutcome::Missing { mention_id: "m1".to_string() });
    }

    #[test]
    fn parse_handles_noise_and_quotes() {
        let d = doc();
        let ms: Vec<&Mention> = [&d.mentions[0]].to_vec();
        let raw = "Sure! Here are the answers.\nElaboration: 'quake refers to a tremor'\nHope that helps.";
        let out = parse_response(raw, &ms, Step::One);
        match &out[0] {
            ParseOutcome::Parsed(s) => assert_eq!(s.text, "quake refers to a tremor"),
            other => panic!("expected parse, got {other:?}"),
        }
    }

    #[test]
    fn empty_response_reports_every_mention_missing() {
        let d = doc();
        let ms: Vec<&Mention> = d.mentions.iter().collect();
        let out = parse_response("", &ms, Step::One);
        assert!(out.iter().all(|o| matches!(o, ParseOutcome::Missing { .. })));
    }

    #[test]
    fn paraphrase_parse_strips_hash_marking() {
        let d = doc();
        let ms: Vec<&Mention> = [&d.mentions[0]].to_vec();
        let raw = "Paraphrase: A strong #quake# rattled Aceh, leaving dozens dead.";
        let out = parse_response(raw, &ms, Step::Paraphrase);
        match &out[0] {
            ParseOutcome::Parsed(s) => {
                assert_eq!(s.text, "A strong quake rattled Aceh, leaving dozens dead.");
                assert_eq!(s.located_span, Some((2, 3)));
            }
            other => panic!("expected parse, got {other:?}"),
        }
    }

    #[test]
    fn cache_key_ignores_mention_order_but_not_content() {
        let k1 = CacheKey::compute("model-x", Step::One, "d0", &["m1", "m0"], "PROMPT");
        let k2 = CacheKey::compute("model-x", Step::One, "d0", &["m0", "m1"], "PROMPT");
        assert_eq!(k1, k2);
        assert_ne!(k1, CacheKey::compute("model-x", Step::Two, "d0", &["m0", "m1"], "PROMPT"));
        assert_ne!(k1, CacheKey::compute("model-x", Step::One, "d0", &["m0", "m1"], "PROMPT!"));
        assert_ne!(k1, CacheKey::compute("model-y", Step::One, "d0", &["m0", "m1"], "PROMPT"));
        assert_eq!(k1.0.len(), 64);
        assert!(k1.0.chars().all(|c| c.is_ascii_hexdigit()));
    }

    #[test]
    fn cache_key_is_length_prefix_safe() {
        // same concatenated bytes, different field boundaries
        let a = CacheKey::compute("m", Step::One, "ab", &["c"], "p");
        let b = CacheKey::compute("m", Step::One, "a", &["bc"], "p");
        assert_ne!(a, b);
    }
}
