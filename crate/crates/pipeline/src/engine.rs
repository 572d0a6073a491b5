//! Orchestration of model calls: two-step mention summarization (with the
//! paraphrase ablation) and direct cluster prediction.
//!
//! The engine owns the call policy around any [`ChatClient`]: cache lookup
//! before every request, a bounded retry budget for failed calls, one
//! format-reminder re-ask when a reply does not parse for every mention,
//! bounded worker-thread parallelism across documents, and call counting so
//! tests can assert that warm-cache runs make zero network calls.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use cdecr_core::corpus::{Clustering, Corpus, Document, Mention};
use cdecr_core::direct::{build_direct_prompt, parse_direct_output, DirectConfig, DirectError, PromptMode};
use cdecr_core::summarize::{
    build_paraphrase_prompt, build_step1_prompt, build_step2_prompt, parse_response, CacheKey,
    ParseOutcome, PromptError, Step, Summary,
};
use sha2::{Digest, Sha256};

use crate::llm::{request_digest, ChatClient, ChatParams, LlmError, RequestMeta, ResponseCache};

/// System message for all summarization requests.
pub const SUMMARY_SYSTEM_PROMPT: &str = "You are a helpful assistant.";

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Direct(#[from] DirectError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("cache write failed: {0}")]
    Cache(#[from] std::io::Error),
    #[error("few-shot direct prediction needs a gold clustering for the demonstration topics")]
    DemoNeedsGold,
    #[error("demonstration topic `{0}` is not in the corpus")]
    UnknownDemoTopic(String),
}

/// Which summarization flow to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SummaryMode {
    /// Elaboration, then entity/date enrichment of the elaboration.
    TwoStep,
    /// Single-pass paraphrase of the mention's sentence window (ablation).
    Paraphrase,
}

/// A mention that ended up with no summary at all.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryFailure {
    pub doc_id: String,
    pub mention_id: String,
    /// The stage that failed: `step1` or `paraphrase`.
    pub stage: String,
    pub reason: String,
}

/// Summaries for one corpus, plus what went wrong where.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusSummaries {
    /// Final summary per mention (the enriched pass when it parsed, its
    /// first-pass elaboration otherwise).
    pub summaries: BTreeMap<String, Summary>,
    /// Mentions whose enrichment pass failed and fell back to step 1.
    pub fallbacks: Vec<String>,
    /// Mentions with no summary at all.
    pub failures: Vec<SummaryFailure>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct DocSummaries {
    summaries: BTreeMap<String, Summary>,
    fallbacks: Vec<String>,
    failures: Vec<SummaryFailure>,
}

/// One direct-prediction request (one topic, unless scoping is off).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectCallLog {
    pub scope_id: String,
    /// Whitespace tokens in the assembled prompt.
    pub token_count: usize,
    pub included_docs: usize,
    /// Documents dropped whole to fit the input budget (their mentions
    /// surface as singletons).
    pub truncated_docs: Vec<String>,
    pub from_cache: bool,
    /// The request still had no reply after the retry budget; every
    /// expected mention became a singleton.
    pub transport_failed: bool,
    /// A JSON mapping was found in the reply.
    pub parsed: bool,
    pub missing_ids: usize,
    pub unknown_ids: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectRun {
    /// Merged prediction over every non-demonstration mention.
    pub clustering: Clustering,
    /// The mention universe the prediction covers.
    pub target_mentions: BTreeSet<String>,
    pub logs: Vec<DirectCallLog>,
    pub total_prompt_tokens: usize,
}

/// Call policy around a chat client. Cheap to construct; borrows the
/// client and cache.
pub struct SummaryEngine<'a> {
    client: &'a dyn ChatClient,
    cache: &'a ResponseCache,
    params: ChatParams,
    /// Extra attempts after the first failed call.
    retry_limit: usize,
    /// Worker threads for per-document summarization.
    max_concurrent: usize,
    network_calls: AtomicUsize,
    cache_hits: AtomicUsize,
}

impl<'a> SummaryEngine<'a> {
    pub fn new(
        client: &'a dyn ChatClient,
        cache: &'a ResponseCache,
        params: ChatParams,
        retry_limit: usize,
        max_concurrent: usize,
    ) -> Self {
        SummaryEngine {
            client,
            cache,
            params,
            retry_limit,
            max_concurrent: max_concurrent.max(1),
            network_calls: AtomicUsize::new(0),
            cache_hits: AtomicUsize::new(0),
        }
    }

    /// Client calls made so far (cache hits never count).
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn cache_hits(&self) -> usize {
        self.cache_hits.load(Ordering::SeqCst)
    }

    /// Cache-first fetch with the retry budget. `Ok((text, from_cache))`.
    fn fetch(
        &self,
        params: &ChatParams,
        key: &str,
        system: &str,
        user: &str,
        meta: &RequestMeta,
    ) -> Result<(String, bool), EngineError> {
        if let Some(hit) = self.cache.get(key) {
            self.cache_hits.fetch_add(1, Ordering::SeqCst);
            return Ok((hit, true));
        }
        let digest = request_digest(system, user);
        let mut last_err: Option<LlmError> = None;
        for _ in 0..=self.retry_limit {
            self.network_calls.fetch_add(1, Ordering::SeqCst);
            match self.client.complete(params, system, user, meta) {
                Ok(text) => {
                    self.cache.put(key, &digest, &text)?;
                    return Ok((text, false));
                }
                Err(LlmError::MissingApiKey) => return Err(LlmError::MissingApiKey.into()),
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.expect("loop body ran at least once").into())
    }

    fn fetch_step(
        &self,
        doc: &Document,
        step: Step,
        mention_ids: &[&str],
        prompt: &str,
    ) -> Result<String, EngineError> {
        let key = CacheKey::compute(&self.params.model, step, &doc.id, mention_ids, prompt);
        let meta = RequestMeta::Summarize {
            doc_id: doc.id.clone(),
            step,
            mention_ids: mention_ids.iter().map(|s| s.to_string()).collect(),
        };
        let (text, _) = self.fetch(&self.params, &key.0, SUMMARY_SYSTEM_PROMPT, prompt, &meta)?;
        Ok(text)
    }

    /// Parse a reply; when any mention is missing an answer, re-ask once
    /// with a format reminder appended and keep the better outcome per
    /// mention.
    fn parse_with_one_retry(
        &self,
        doc: &Document,
        mentions: &[&Mention],
        ids: &[&str],
        step: Step,
        prompt: &str,
        raw: &str,
    ) -> Result<Vec<ParseOutcome>, EngineError> {
        let mut outcomes = parse_response(raw, mentions, step);
        if outcomes.iter().any(|o| matches!(o, ParseOutcome::Missing { .. })) {
            let reminder = format!(
                "{prompt}\nReminder: answer every question on its own numbered line, in the \
                 exact format '<n>. {} <mention> refers to ...'.\n",
                step.marker()
            );
            let raw_retry = self.fetch_step(doc, step, ids, &reminder)?;
            let retried = parse_response(&raw_retry, mentions, step);
            for (slot, new) in outcomes.iter_mut().zip(retried) {
                if matches!(slot, ParseOutcome::Missing { .. }) {
                    *slot = new;
                }
            }
        }
        Ok(outcomes)
    }

    fn summarize_document(&self, doc: &Document, mode: SummaryMode) -> Result<DocSummaries, EngineError> {
        let mut out = DocSummaries::default();
        let mentions: Vec<&Mention> = doc.mentions.iter().collect();
        if mentions.is_empty() {
            return Ok(out);
        }
        let ids: Vec<&str> = mentions.iter().map(|m| m.id.as_str()).collect();

        if mode == SummaryMode::Paraphrase {
            let prompt = build_paraphrase_prompt(doc, &mentions)?;
            let raw = self.fetch_step(doc, Step::Paraphrase, &ids, &prompt)?;
            let outcomes =
                self.parse_with_one_retry(doc, &mentions, &ids, Step::Paraphrase, &prompt, &raw)?;
            for (m, o) in mentions.iter().zip(outcomes) {
                match o {
                    ParseOutcome::Parsed(s) => {
                        out.summaries.insert(m.id.clone(), s);
                    }
                    ParseOutcome::Missing { .. } => out.failures.push(SummaryFailure {
                        doc_id: doc.id.clone(),
                        mention_id: m.id.clone(),
                        stage: "paraphrase".into(),
                        reason: "no parseable answer after one format reminder".into(),
                    }),
                }
            }
            return Ok(out);
        }

        // first pass: elaborate every mention
        let prompt1 = build_step1_prompt(doc, &mentions)?;
        let raw1 = self.fetch_step(doc, Step::One, &ids, &prompt1)?;
        let outcomes1 = self.parse_with_one_retry(doc, &mentions, &ids, Step::One, &prompt1, &raw1)?;

        let mut step2_mentions: Vec<&Mention> = Vec::new();
        let mut step1_summaries: Vec<Summary> = Vec::new();
        for (m, o) in mentions.iter().zip(outcomes1) {
            match o {
                ParseOutcome::Parsed(s) => {
                    step2_mentions.push(m);
                    step1_summaries.push(s);
                }
                ParseOutcome::Missing { .. } => out.failures.push(SummaryFailure {
                    doc_id: doc.id.clone(),
                    mention_id: m.id.clone(),
                    stage: "step1".into(),
                    reason: "no parseable answer after one format reminder".into(),
                }),
            }
        }
        if step2_mentions.is_empty() {
            return Ok(out);
        }

        // second pass: enrich each elaboration; a mention whose second
        // pass fails keeps its first-pass summary
        let texts1: Vec<&str> = step1_summaries.iter().map(|s| s.text.as_str()).collect();
        let ids2: Vec<&str> = step2_mentions.iter().map(|m| m.id.as_str()).collect();
        let prompt2 = build_step2_prompt(doc, &step2_mentions, &texts1)?;
        let raw2 = self.fetch_step(doc, Step::Two, &ids2, &prompt2)?;
        let outcomes2 =
            self.parse_with_one_retry(doc, &step2_mentions, &ids2, Step::Two, &prompt2, &raw2)?;
        for ((m, s1), o2) in step2_mentions.iter().zip(step1_summaries).zip(outcomes2) {
            match o2 {
                ParseOutcome::Parsed(s2) => {
                    out.summaries.insert(m.id.clone(), s2);
                }
                ParseOutcome::Missing { .. } => {
                    out.fallbacks.push(m.id.clone());
                    out.summaries.insert(m.id.clone(), s1);
                }
            }
        }
        Ok(out)
    }

    /// Summarize every mention of the corpus, documents in parallel across
    /// at most `max_concurrent` worker threads. Output is independent of
    /// scheduling; the first hard error wins.
    pub fn summarize_corpus(
        &self,
        corpus: &Corpus,
        mode: SummaryMode,
    ) -> Result<CorpusSummaries, EngineError> {
        let docs: Vec<&Document> = corpus.documents.iter().collect();
        let next = AtomicUsize::new(0);
        let results: Mutex<Vec<(usize, Result<DocSummaries, EngineError>)>> =
            Mutex::new(Vec::with_capacity(docs.len()));
        let workers = self.max_concurrent.min(docs.len().max(1));
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= docs.len() {
                        break;
                    }
                    let r = self.summarize_document(docs[i], mode);
                    results.lock().expect("results lock").push((i, r));
                });
            }
        });
        let mut per_doc = results.into_inner().expect("worker threads joined");
        per_doc.sort_by_key(|(i, _)| *i);

        let mut out = CorpusSummaries::default();
        for (_, r) in per_doc {
            let doc = r?;
            out.summaries.extend(doc.summaries);
            out.fallbacks.extend(doc.fallbacks);
            out.failures.extend(doc.failures);
        }
        out.fallbacks.sort();
        out.failures.sort_by(|a, b| a.mention_id.cmp(&b.mention_id));
        Ok(out)
    }

    /// Ask the model to cluster mentions directly, one request per topic
    /// (or one global request), and merge the replies into a single
    /// partition over every non-demonstration mention.
    ///
    /// Sampling is pinned (temperature 0, fixed seed) regardless of the
    /// engine's summarization parameters. A request that still fails after
    /// the retry budget degrades to singletons for its mentions instead of
    /// aborting the run.
    pub fn run_direct(
        &self,
        corpus: &Corpus,
        config: &DirectConfig,
        demo_topics: &[String],
    ) -> Result<DirectRun, EngineError> {
        let topics = corpus.effective_topics();
        for t in demo_topics {
            if !topics.contains_key(t) {
                return Err(EngineError::UnknownDemoTopic(t.clone()));
            }
        }
        let demo_set: BTreeSet<&str> = demo_topics.iter().map(String::as_str).collect();

        let docs_of = |topic_ids: &[&str]| -> Vec<&Document> {
            let wanted: BTreeSet<&str> = topic_ids
                .iter()
                .flat_map(|t| topics[*t].values().flatten())
                .map(String::as_str)
                .collect();
            corpus.documents.iter().filter(|d| wanted.contains(d.id.as_str())).collect()
        };

        // demonstration block (few-shot only)
        let demo_topic_ids: Vec<&str> = demo_topics.iter().map(String::as_str).collect();
        let demo_docs = docs_of(&demo_topic_ids);
        let demo_gold;
        let demonstration: Option<(&[&Document], &Clustering)> = if config.mode == PromptMode::FewShot {
            if demo_docs.is_empty() {
                return Err(DirectError::MissingDemonstration.into());
            }
            let gold = corpus.gold.as_ref().ok_or(EngineError::DemoNeedsGold)?;
            let demo_mentions: BTreeSet<String> =
                demo_docs.iter().flat_map(|d| d.mentions.iter().map(|m| m.id.clone())).collect();
            demo_gold = gold.restricted_to(&demo_mentions);
            Some((demo_docs.as_slice(), &demo_gold))
        } else {
            None
        };

        // request scopes: per target topic, or one global request
        let target_topics: Vec<&str> =
            topics.keys().map(String::as_str).filter(|t| !demo_set.contains(t)).collect();
        let scopes: Vec<(String, Vec<&str>)> = if config.per_topic {
            target_topics.iter().map(|t| (t.to_string(), vec![*t])).collect()
        } else {
            vec![("all".to_string(), target_topics.clone())]
        };

        let direct_params = ChatParams {
            model: self.params.model.clone(),
            temperature: 0.0,
            seed: Some(0),
        };

        let mut clusters = Vec::new();
        let mut target_mentions = BTreeSet::new();
        let mut logs = Vec::new();
        let mut total_tokens = 0usize;
        for (scope_id, topic_ids) in &scopes {
            let docs = docs_of(topic_ids);
            let expected: Vec<String> =
                docs.iter().flat_map(|d| d.mentions.iter().map(|m| m.id.clone())).collect();
            if expected.is_empty() {
                continue;
            }
            target_mentions.extend(expected.iter().cloned());

            let prompt = build_direct_prompt(&docs, demonstration, config)?;
            total_tokens += prompt.token_count;
            let key = direct_cache_key(&direct_params.model, scope_id, &expected, &prompt.user);
            let meta = RequestMeta::Direct { scope_id: scope_id.clone(), mention_ids: expected.clone() };

            let mut transport_failed = false;
            let (raw, from_cache) =
                match self.fetch(&direct_params, &key, &prompt.system, &prompt.user, &meta) {
                    Ok(pair) => pair,
                    Err(EngineError::Llm(LlmError::MissingApiKey)) => {
                        return Err(LlmError::MissingApiKey.into())
                    }
                    Err(EngineError::Cache(e)) => return Err(EngineError::Cache(e)),
                    Err(_) => {
                        transport_failed = true;
                        (String::new(), false)
                    }
                };
            let (clustering, report) = parse_direct_output(&raw, &expected, &format!("{scope_id}::"));
            logs.push(DirectCallLog {
                scope_id: scope_id.clone(),
                token_count: prompt.token_count,
                included_docs: prompt.included_docs.len(),
                truncated_docs: prompt.truncated_docs.clone(),
                from_cache,
                transport_failed,
                parsed: report.parsed,
                missing_ids: report.missing_ids.len(),
                unknown_ids: report.unknown_ids.len(),
            });
            clusters.extend(clustering.clusters);
        }
        Ok(DirectRun {
            clustering: Clustering { clusters },
            target_mentions,
            logs,
            total_prompt_tokens: total_tokens,
        })
    }
}

/// Cache key for a direct-prediction request: model, scope, the sorted
/// mention universe, and the prompt, all length-prefixed.
fn direct_cache_key(model: &str, scope_id: &str, mention_ids: &[String], user: &str) -> String {
    let mut sorted: Vec<&str> = mention_ids.iter().map(String::as_str).collect();
    sorted.sort_unstable();
    let mut hasher = Sha256::new();
    let mut feed = |bytes: &[u8]| {
        hasher.update((bytes.len() as u64).to_be_bytes());
        hasher.update(bytes);
    };
    feed(b"direct");
    feed(model.as_bytes());
    feed(scope_id.as_bytes());
    for id in &sorted {
        feed(id.as_bytes());
    }
    feed(user.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use cdecr_core::corpus::Cluster;
    use cdecr_core::direct::ContextMode;
    use std::sync::atomic::AtomicUsize;

    fn sentence(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    fn mention(id: &str, doc: &str, sentence: usize, start: usize, end: usize, surface: &str) -> Mention {
        Mention {
            id: id.into(),
            doc_id: doc.into(),
            sentence,
            start,
            end,
            surface: surface.into(),
        }
    }

    /// Two documents, two mentions each, one shared event per document pair.
    fn corpus() -> Corpus {
        let d0 = Document {
            id: "d0".into(),
            date: Some("2024-01-02".into()),
            sentences: vec![sentence(&["the", "quake", "struck", "the", "coast"])],
            mentions: vec![mention("m0", "d0", 0, 1, 2, "quake")],
        };
        let d1 = Document {
            id: "d1".into(),
            date: None,
            sentences: vec![sentence(&["rescuers", "after", "the", "tremor"])],
            mentions: vec![mention("m1", "d1", 0, 3, 4, "tremor")],
        };
        let gold = Clustering {
            clusters: vec![Cluster {
                id: "g0".into(),
                mentions: BTreeSet::from(["m0".to_string(), "m1".to_string()]),
            }],
        };
        Corpus {
            documents: vec![d0, d1],
            gold: Some(gold),
            topics: BTreeMap::from([(
                "t0".to_string(),
                BTreeMap::from([("t0a".to_string(), vec!["d0".to_string(), "d1".to_string()])]),
            )]),
        }
    }

    fn params() -> ChatParams {
        ChatParams { model: "test-model".into(), temperature: 0.0, seed: Some(0) }
    }

    fn mock() -> crate::llm::MockLlm {
        crate::llm::MockLlm::new(3).with_surfaces(BTreeMap::from([
            ("m0".to_string(), "quake".to_string()),
            ("m1".to_string(), "tremor".to_string()),
        ]))
    }

    #[test]
    fn two_step_flow_prefers_the_enriched_pass() {
        let client = mock();
        let cache = ResponseCache::in_memory();
        let engine = SummaryEngine::new(&client, &cache, params(), 1, 2);
        let out = engine.summarize_corpus(&corpus(), SummaryMode::TwoStep).unwrap();
        assert_eq!(out.summaries.len(), 2);
        assert!(out.failures.is_empty());
        assert!(out.fallbacks.is_empty());
        let s = &out.summaries["m0"];
        assert_eq!(s.step, Step::Two);
        assert!(s.text.contains("entities and dates resolved"), "step-2 text: {}", s.text);
        // one step-1 and one step-2 call per document
        assert_eq!(engine.network_calls(), 4);
    }

    #[test]
    fn warm_cache_run_makes_zero_calls_and_identical_output() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let first = {
            let client = mock();
            let cache = ResponseCache::open(&path).unwrap();
            let engine = SummaryEngine::new(&client, &cache, params(), 1, 2);
            engine.summarize_corpus(&corpus(), SummaryMode::TwoStep).unwrap()
        };
        let client = mock();
        let cache = ResponseCache::open(&path).unwrap();
        let engine = SummaryEngine::new(&client, &cache, params(), 1, 2);
        let second = engine.summarize_corpus(&corpus(), SummaryMode::TwoStep).unwrap();
        assert_eq!(engine.network_calls(), 0);
        assert_eq!(client.calls(), 0);
        assert_eq!(engine.cache_hits(), 4);
        assert_eq!(first, second);
    }

    #[test]
    fn paraphrase_mode_uses_the_paraphrase_marker() {
        let client = mock();
        let cache = ResponseCache::in_memory();
        let engine = SummaryEngine::new(&client, &cache, params(), 0, 1);
        let out = engine.summarize_corpus(&corpus(), SummaryMode::Paraphrase).unwrap();
        assert_eq!(out.summaries["m1"].step, Step::Paraphrase);
        assert_eq!(engine.network_calls(), 2); // one call per document
    }

    /// Fails a fixed number of times, then delegates to the mock.
    struct Flaky {
        failures_left: AtomicUsize,
        inner: crate::llm::MockLlm,
        calls: AtomicUsize,
    }

    impl ChatClient for Flaky {
        fn name(&self) -> &'static str {
            "flaky"
        }
        fn complete(
            &self,
            params: &ChatParams,
            system: &str,
            user: &str,
            meta: &RequestMeta,
        ) -> Result<String, LlmError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            let left = self.failures_left.load(Ordering::SeqCst);
            if left > 0 {
                self.failures_left.store(left - 1, Ordering::SeqCst);
                return Err(LlmError::Transport { url: "x".into(), message: "boom".into() });
            }
            self.inner.complete(params, system, user, meta)
        }
        fn calls(&self) -> usize {
            self.calls.load(Ordering::SeqCst)
        }
    }

    #[test]
    fn transient_failures_consume_the_retry_budget() {
        let client = Flaky { failures_left: AtomicUsize::new(2), inner: mock(), calls: AtomicUsize::new(0) };
        let cache = ResponseCache::in_memory();
        let engine = SummaryEngine::new(&client, &cache, params(), 2, 1);
        let out = engine.summarize_corpus(&corpus(), SummaryMode::TwoStep).unwrap();
        assert_eq!(out.summaries.len(), 2);

        // a budget of 1 cannot absorb three consecutive failures (fresh
        // cache, so nothing is served from the earlier successful run)
        let client = Flaky { failures_left: AtomicUsize::new(3), inner: mock(), calls: AtomicUsize::new(0) };
        let cache = ResponseCache::in_memory();
        let engine = SummaryEngine::new(&client, &cache, params(), 1, 1);
        let err = engine.summarize_corpus(&corpus(), SummaryMode::TwoStep).unwrap_err();
        assert!(matches!(err, EngineError::Llm(LlmError::Transport { .. })));
    }

    #[test]
    fn direct_run_with_gold_replay_reproduces_gold() {
        let client = mock().with_direct_map(BTreeMap::from([
            ("m0".to_string(), "g0".to_string()),
            ("m1".to_string(), "g0".to_string()),
        ]));
        let cache = ResponseCache::in_memory();
        let engine = SummaryEngine::new(&client, &cache, params(), 0, 1);
        let config = DirectConfig {
            mode: PromptMode::ZeroShot,
            context: ContextMode::FullDocuments,
            per_topic: true,
            input_token_budget: 100_000,
        };
        let run = engine.run_direct(&corpus(), &config, &[]).unwrap();
        assert_eq!(run.clustering.clusters.len(), 1);
        assert_eq!(run.clustering.clusters[0].id, "t0::g0");
        assert_eq!(run.target_mentions.len(), 2);
        assert!(run.logs[0].parsed);
        assert!(run.total_prompt_tokens > 0);
    }

    #[test]
    fn direct_run_degrades_to_singletons_when_calls_keep_failing() {
        let client = Flaky { failures_left: AtomicUsize::new(99), inner: mock(), calls: AtomicUsize::new(0) };
        let cache = ResponseCache::in_memory();
        let engine = SummaryEngine::new(&client, &cache, params(), 1, 1);
        let config = DirectConfig {
            mode: PromptMode::ZeroShot,
            context: ContextMode::FullDocuments,
            per_topic: true,
            input_token_budget: 100_000,
        };
        let run = engine.run_direct(&corpus(), &config, &[]).unwrap();
        assert!(run.logs[0].transport_failed);
        assert_eq!(run.clustering.clusters.len(), 2); // all singletons
        assert_eq!(client.calls(), 2); // initial attempt + one retry
    }

    #[test]
    fn few_shot_needs_gold_and_a_known_demo_topic() {
        let client = mock();
        let cache = ResponseCache::in_memory();
        let engine = SummaryEngine::new(&client, &cache, params(), 0, 1);
        let config = DirectConfig::default(); // few-shot
        let err = engine.run_direct(&corpus(), &config, &["nope".to_string()]).unwrap_err();
        assert!(matches!(err, EngineError::UnknownDemoTopic(_)));

        let mut no_gold = corpus();
        no_gold.gold = None;
        let err = engine.run_direct(&no_gold, &config, &["t0".to_string()]).unwrap_err();
        assert!(matches!(err, EngineError::DemoNeedsGold));
    }
}
