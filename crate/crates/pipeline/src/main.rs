//! `cdecr` — command-line driver for the cross-document event coreference
//! pipeline.
//!
//! Each subcommand runs one stage and communicates with the others only
//! through its declared files under the configured output directory, so
//! every stage is individually re-runnable. Failures print one
//! machine-readable JSON record to stderr and exit nonzero.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use cdecr::config::{PipelineConfig, ProviderKind};
use cdecr::conll::emit_conll;
use cdecr::engine::{DirectCallLog, SummaryEngine, SummaryMode};
use cdecr::format::{emit_corpus, parse_corpus};
use cdecr::llm::{ChatClient, HttpClient, MockLlm, ResponseCache};
use cdecr::pipeline::{benchmark_training_configs, candidate_pairs, fuse_corpus, predict, run_benchmark_arm, topic_scope};
use cdecr::reports::{
    clustering_from_records, clustering_records, pair_records, read_jsonl, render_score_table,
    write_jsonl, ErrorRecord, ScoreRecord, StatsRecord, SummaryRecord,
};
use cdecr::synth::generate;
use cdecr::vectors::{
    read_fused, read_projection, read_scorer, read_token_vectors, write_fused, write_projection,
    write_scorer, write_token_vectors,
};
use cdecr_core::analyze::{build_type_graph, classify_errors, extract_link_errors};
use cdecr_core::corpus::{Clustering, Corpus};
use cdecr_core::metrics::{score_report, SingletonMode};
use cdecr_core::pairscore::train_pairwise;
use cdecr_core::represent::{EmbeddingProvider, HashFeatureProvider, TableProvider};
use cdecr_core::retrieve::train_projection;
use cdecr_core::summarize::Summary;

#[derive(Parser)]
#[command(
    name = "cdecr",
    version,
    about = "Cross-document event coreference: summarize, represent, retrieve, classify, cluster, score"
)]
struct Cli {
    /// Configuration file (TOML); every key has a default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the configured master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Repeat seed-dependent runs N times (seed, seed+1, …) and average
    /// where a command reports aggregate results.
    #[arg(long, global = true, default_value_t = 1)]
    repeats: usize,

    /// Singleton handling when scoring.
    #[arg(long, global = true, value_enum, default_value_t = SingletonChoice::Both)]
    singletons: SingletonChoice,

    /// Use the deterministic offline mock instead of the HTTP backend.
    #[arg(long, global = true)]
    mock_llm: bool,

    /// Override the response-cache location.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SingletonChoice {
    With,
    Without,
    Both,
}

impl SingletonChoice {
    fn modes(self) -> Vec<SingletonMode> {
        match self {
            SingletonChoice::With => vec![SingletonMode::With],
            SingletonChoice::Without => vec![SingletonMode::Without],
            SingletonChoice::Both => vec![SingletonMode::With, SingletonMode::Without],
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus file, write its stats, and emit gold CoNLL.
    Ingest,
    /// Generate per-mention summaries with the configured chat backend.
    Summarize {
        /// Run the single-pass paraphrase variant instead of the two-step flow.
        #[arg(long)]
        paraphrase: bool,
    },
    /// Encode every mention into a fused vector (document ⊕ summary).
    Represent {
        /// Ignore an existing summaries file and encode documents only.
        #[arg(long)]
        no_summaries: bool,
    },
    /// Train the retrieval projection on the train split.
    TrainRetrieval,
    /// Train the pairwise classifier on retrieved candidate pairs.
    TrainPairwise,
    /// Retrieve candidates, score pairs, and cluster.
    Predict,
    /// Score a predicted clustering against the corpus gold.
    Score {
        /// Clustering file to score (default: the predict stage output).
        #[arg(long)]
        response: Option<PathBuf>,
    },
    /// Break prediction errors down into FPA / FPT / FN link counts.
    Analyze {
        /// Clustering file to analyze (default: the predict stage output).
        #[arg(long)]
        response: Option<PathBuf>,
    },
    /// Ask the model to cluster mentions directly (baseline).
    Direct,
    /// Generate a synthetic corpus; optionally run the benchmark on it.
    Synth {
        /// Run both benchmark arms (with / without summaries) end to end.
        #[arg(long)]
        run: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::json!({ "error": true, "message": format!("{e:#}") });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}

/// Everything a subcommand needs, resolved from flags + config.
struct Ctx {
    config: PipelineConfig,
    seed: u64,
    repeats: usize,
    singletons: SingletonChoice,
    mock: bool,
    cache_path: PathBuf,
}

/// One fact-bank line: what the mock client should "know" about a mention.
#[derive(Debug, Serialize, Deserialize)]
struct FactRecord {
    mention_id: String,
    fact: String,
}

/// One direct-prediction request log line.
#[derive(Debug, Serialize, Deserialize)]
struct DirectLogRecord {
    scope_id: String,
    token_count: usize,
    included_docs: usize,
    truncated_docs: Vec<String>,
    from_cache: bool,
    transport_failed: bool,
    parsed: bool,
    missing_ids: usize,
    unknown_ids: usize,
}

impl From<&DirectCallLog> for DirectLogRecord {
    fn from(log: &DirectCallLog) -> Self {
        DirectLogRecord {
            scope_id: log.scope_id.clone(),
            token_count: log.token_count,
            included_docs: log.included_docs,
            truncated_docs: log.truncated_docs.clone(),
            from_cache: log.from_cache,
            transport_failed: log.transport_failed,
            parsed: log.parsed,
            missing_ids: log.missing_ids,
            unknown_ids: log.unknown_ids,
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let ctx = Ctx {
        seed: cli.seed.unwrap_or(config.seed),
        cache_path: cli.cache.clone().unwrap_or_else(|| config.paths.cache()),
        repeats: cli.repeats.max(1),
        singletons: cli.singletons,
        mock: cli.mock_llm,
        config,
    };
    std::fs::create_dir_all(&ctx.config.paths.out_dir).with_context(|| {
        format!("cannot create output directory `{}`", ctx.config.paths.out_dir.display())
    })?;

    match cli.command {
        Command::Ingest => cmd_ingest(&ctx),
        Command::Summarize { paraphrase } => cmd_summarize(&ctx, paraphrase),
        Command::Represent { no_summaries } => cmd_represent(&ctx, no_summaries),
        Command::TrainRetrieval => cmd_train_retrieval(&ctx),
        Command::TrainPairwise => cmd_train_pairwise(&ctx),
        Command::Predict => cmd_predict(&ctx),
        Command::Score { response } => cmd_score(&ctx, response),
        Command::Analyze { response } => cmd_analyze(&ctx, response),
        Command::Direct => cmd_direct(&ctx),
        Command::Synth { run } => cmd_synth(&ctx, run),
    }
}

// ---------------------------------------------------------------- helpers

fn load_corpus(ctx: &Ctx) -> Result<Corpus> {
    let path = &ctx.config.paths.corpus;
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read corpus `{}`", path.display()))?;
    Ok(parse_corpus(&text)?)
}

fn make_client(ctx: &Ctx, corpus: &Corpus) -> Result<Box<dyn ChatClient>> {
    if ctx.mock {
        let mut mock = MockLlm::new(ctx.seed).with_surfaces(corpus.surfaces());
        let bank = ctx.config.paths.fact_bank();
        if bank.exists() {
            let records: Vec<FactRecord> = read_jsonl(&bank)?;
            mock = mock.with_facts(records.into_iter().map(|r| (r.mention_id, r.fact)).collect());
        }
        if let Some(gold) = &corpus.gold {
            mock = mock.with_direct_map(gold.assignment());
        }
        Ok(Box::new(mock))
    } else {
        let key = ctx.config.llm.resolve_api_key()?;
        Ok(Box::new(HttpClient::new(&ctx.config.llm.base_url, key)?))
    }
}

fn make_provider(ctx: &Ctx) -> Result<Box<dyn EmbeddingProvider>> {
    let p = &ctx.config.provider;
    match p.kind {
        ProviderKind::Hash => {
            Ok(Box::new(HashFeatureProvider::new(p.dim, ctx.seed, p.window, p.decay)))
        }
        ProviderKind::Table => {
            let path = p.table_path.clone().unwrap_or_else(|| ctx.config.paths.token_vectors());
            let file = File::open(&path)
                .with_context(|| format!("cannot open token vectors `{}`", path.display()))?;
            let (dim, vectors) = read_token_vectors(BufReader::new(file))?;
            Ok(Box::new(TableProvider::new(dim, vectors)?))
        }
    }
}

fn read_summaries(ctx: &Ctx) -> Result<Option<BTreeMap<String, Summary>>> {
    let path = ctx.config.paths.summaries();
    if !path.exists() {
        return Ok(None);
    }
    let records: Vec<SummaryRecord> = read_jsonl(&path)?;
    let mut out = BTreeMap::new();
    for r in records {
        let step = r
            .step_enum()
            .with_context(|| format!("summary for `{}` has unknown step `{}`", r.mention_id, r.step))?;
        out.insert(
            r.mention_id.clone(),
            Summary {
                mention_id: r.mention_id,
                step,
                text: r.text,
                located_span: None,
                surface_missing: false,
            },
        );
    }
    Ok(Some(out))
}

fn read_fused_file(ctx: &Ctx) -> Result<BTreeMap<String, Vec<f64>>> {
    let path = ctx.config.paths.fused();
    let file = File::open(&path).with_context(|| {
        format!("cannot open fused vectors `{}` (run `represent` first)", path.display())
    })?;
    let (_, fused) = read_fused(BufReader::new(file))?;
    Ok(fused.into_iter().map(|(id, f)| (id, f.values)).collect())
}

fn read_clustering(path: &PathBuf) -> Result<Clustering> {
    Ok(clustering_from_records(read_jsonl(path)?))
}

/// Vectors restricted to one split's mentions (all vectors when the config
/// declares no splits). Returns the split corpus too when it exists.
fn split_vectors(
    corpus: &Corpus,
    vectors: &BTreeMap<String, Vec<f64>>,
    splits: &BTreeMap<String, Vec<String>>,
    name: &str,
) -> Result<Option<(Corpus, BTreeMap<String, Vec<f64>>)>> {
    if splits.is_empty() || !splits.contains_key(name) {
        return Ok(None);
    }
    let mut parts = corpus.split(splits)?;
    let part = parts.remove(name).expect("checked membership above");
    let ids = part.mention_ids();
    let sub: BTreeMap<String, Vec<f64>> = vectors
        .iter()
        .filter(|(id, _)| ids.contains(*id))
        .map(|(id, v)| (id.clone(), v.clone()))
        .collect();
    Ok(Some((part, sub)))
}

fn require_gold(corpus: &Corpus) -> Result<&Clustering> {
    corpus.gold.as_ref().context("this stage needs a corpus with gold clusters")
}

// ------------------------------------------------------------ subcommands

fn cmd_ingest(ctx: &Ctx) -> Result<()> {
    let corpus = load_corpus(ctx)?;
    let stats = corpus.stats();
    write_jsonl(&ctx.config.paths.stats(), &[StatsRecord::from(stats.clone())])?;
    if let Some(gold) = &corpus.gold {
        let conll = emit_conll(&corpus, gold)?;
        std::fs::write(ctx.config.paths.gold_conll(), conll)?;
    }
    println!(
        "corpus ok: {} documents, {} sentences, {} mentions, {} gold clusters ({} links), {} topics",
        stats.documents,
        stats.sentences,
        stats.mentions,
        stats.gold_clusters,
        stats.gold_links,
        corpus.effective_topics().len()
    );
    Ok(())
}

fn cmd_summarize(ctx: &Ctx, paraphrase: bool) -> Result<()> {
    let corpus = load_corpus(ctx)?;
    let client = make_client(ctx, &corpus)?;
    let cache = ResponseCache::open(&ctx.cache_path)?;
    let llm = &ctx.config.llm;
    let engine = SummaryEngine::new(
        client.as_ref(),
        &cache,
        llm.chat_params(),
        llm.retry_limit,
        llm.max_concurrent,
    );
    let mode = if paraphrase { SummaryMode::Paraphrase } else { SummaryMode::TwoStep };
    let out = engine.summarize_corpus(&corpus, mode)?;
    let records: Vec<SummaryRecord> = out.summaries.values().map(SummaryRecord::new).collect();
    write_jsonl(&ctx.config.paths.summaries(), &records)?;
    for failure in &out.failures {
        eprintln!(
            "warning: no summary for `{}` in `{}` ({} failed: {})",
            failure.mention_id, failure.doc_id, failure.stage, failure.reason
        );
    }
    println!(
        "summarized {} mentions ({} step-1 fallbacks, {} failures); {} calls, {} cache hits",
        out.summaries.len(),
        out.fallbacks.len(),
        out.failures.len(),
        engine.network_calls(),
        engine.cache_hits()
    );
    Ok(())
}

fn cmd_represent(ctx: &Ctx, no_summaries: bool) -> Result<()> {
    let corpus = load_corpus(ctx)?;
    let summaries = if no_summaries { None } else { read_summaries(ctx)? };
    let provider = make_provider(ctx)?;
    let fused = fuse_corpus(&corpus, summaries.as_ref(), provider.as_ref())?;
    let fallbacks = fused.values().filter(|f| f.fallback).count();
    let path = ctx.config.paths.fused();
    write_fused(BufWriter::new(File::create(&path)?), &fused)?;
    println!(
        "encoded {} mentions at width {} ({} document-only fallbacks) -> {}",
        fused.len(),
        4 * provider.dimension(),
        fallbacks,
        path.display()
    );
    Ok(())
}

fn cmd_train_retrieval(ctx: &Ctx) -> Result<()> {
    let corpus = load_corpus(ctx)?;
    let gold = require_gold(&corpus)?;
    let vectors = read_fused_file(ctx)?;
    let splits = &ctx.config.splits;

    let train = split_vectors(&corpus, &vectors, splits, "train")?;
    let dev = split_vectors(&corpus, &vectors, splits, "dev")?;
    let (train_gold, train_vectors) = match &train {
        Some((part, sub)) => (require_gold(part)?.clone(), sub.clone()),
        None => (gold.clone(), vectors),
    };
    let dev_data = match &dev {
        Some((part, sub)) => Some((sub, require_gold(part)?.clone())),
        None => None,
    };

    let config = ctx.config.retrieval.to_core();
    let trained = train_projection(
        &train_vectors,
        &train_gold,
        dev_data.as_ref().map(|(v, g)| (*v, g)),
        &config,
        ctx.seed,
    )?;
    let path = ctx.config.paths.projection();
    write_projection(BufWriter::new(File::create(&path)?), &trained.projection, ctx.seed)?;
    for epoch in &trained.history {
        println!(
            "epoch {:>3}  loss {:.6}  dev recall@{} {:.4}",
            epoch.epoch, epoch.train_loss, config.eval_neighbor_size, epoch.dev_recall
        );
    }
    println!(
        "projection {}x{} trained; best recall {:.4} at epoch {} -> {}",
        trained.projection.output_dim(),
        trained.projection.input_dim(),
        trained.best_recall,
        trained.best_epoch,
        path.display()
    );
    Ok(())
}

fn cmd_train_pairwise(ctx: &Ctx) -> Result<()> {
    let corpus = load_corpus(ctx)?;
    let gold = require_gold(&corpus)?;
    let vectors = read_fused_file(ctx)?;
    let file = File::open(ctx.config.paths.projection())
        .context("cannot open projection (run `train-retrieval` first)")?;
    let (projection, _) = read_projection(BufReader::new(file))?;
    let splits = &ctx.config.splits;

    let train = split_vectors(&corpus, &vectors, splits, "train")?;
    let dev = split_vectors(&corpus, &vectors, splits, "dev")?;
    let (train_gold, train_vectors) = match &train {
        Some((part, sub)) => (require_gold(part)?.clone(), sub.clone()),
        None => (gold.clone(), vectors.clone()),
    };

    let config = ctx.config.pairwise.to_core(ctx.seed);
    let scope = if ctx.config.retrieval.scope_by_topic {
        Some(topic_scope(&corpus))
    } else {
        None
    };
    let train_candidates =
        candidate_pairs(&train_vectors, &projection, config.train_neighbor_size, scope.as_ref())?;

    // dev pairs are labeled through the same map, so widen vectors and
    // gold to cover dev mentions when a dev split exists
    let trained = match &dev {
        Some((dev_part, dev_vectors)) => {
            let dev_candidates = candidate_pairs(
                dev_vectors,
                &projection,
                config.train_neighbor_size,
                scope.as_ref(),
            )?;
            let mut all_vectors = train_vectors.clone();
            all_vectors.extend(dev_vectors.clone());
            let mut all_gold = train_gold.clone();
            all_gold.clusters.extend(require_gold(dev_part)?.clusters.iter().cloned());
            train_pairwise(&train_candidates, &all_vectors, &all_gold, Some(&dev_candidates), &config)?
        }
        None => train_pairwise(&train_candidates, &train_vectors, &train_gold, None, &config)?,
    };

    let path = ctx.config.paths.scorer();
    write_scorer(BufWriter::new(File::create(&path)?), &trained.scorer, ctx.seed)?;
    for epoch in &trained.history {
        match epoch.dev_loss {
            Some(dev_loss) => println!(
                "epoch {:>3}  train {:.6}  dev {:.6}  lr {:.6}{}",
                epoch.epoch,
                epoch.train_loss,
                dev_loss,
                epoch.learning_rate,
                if epoch.reverted { "  (reverted)" } else { "" }
            ),
            None => println!(
                "epoch {:>3}  train {:.6}  lr {:.6}{}",
                epoch.epoch,
                epoch.train_loss,
                epoch.learning_rate,
                if epoch.reverted { "  (reverted)" } else { "" }
            ),
        }
    }
    if trained.uniform_labels {
        eprintln!("warning: all training pairs carried one label; the scorer cannot separate");
    }
    println!(
        "pairwise scorer trained on {} candidates ({} skipped) -> {}",
        train_candidates.len(),
        trained.skipped_pairs,
        path.display()
    );
    Ok(())
}

fn cmd_predict(ctx: &Ctx) -> Result<()> {
    let corpus = load_corpus(ctx)?;
    let vectors = read_fused_file(ctx)?;
    let file = File::open(ctx.config.paths.projection())
        .context("cannot open projection (run `train-retrieval` first)")?;
    let (projection, _) = read_projection(BufReader::new(file))?;
    let file = File::open(ctx.config.paths.scorer())
        .context("cannot open scorer (run `train-pairwise` first)")?;
    let (scorer, _) = read_scorer(BufReader::new(file))?;

    // predict over the test split when one is configured, else everything
    let (target_corpus, target_vectors) =
        match split_vectors(&corpus, &vectors, &ctx.config.splits, "test")? {
            Some((part, sub)) => (part, sub),
            None => (corpus.clone(), vectors),
        };
    let scope = if ctx.config.retrieval.scope_by_topic {
        Some(topic_scope(&target_corpus))
    } else {
        None
    };
    let prediction = predict(
        &target_vectors,
        &projection,
        &scorer,
        ctx.config.retrieval.eval_neighbor_size,
        &ctx.config.clustering.to_core(),
        scope.as_ref(),
    )?;

    write_jsonl(&ctx.config.paths.clusters(), &clustering_records(&prediction.clustering))?;
    let conll = emit_conll(&target_corpus, &prediction.clustering)?;
    std::fs::write(ctx.config.paths.conll(), conll)?;
    let non_singleton =
        prediction.clustering.clusters.iter().filter(|c| c.mentions.len() > 1).count();
    println!(
        "clustered {} mentions: {} candidate pairs -> {} clusters ({} non-singleton)",
        target_vectors.len(),
        prediction.candidates.len(),
        prediction.clustering.clusters.len(),
        non_singleton
    );
    Ok(())
}

fn cmd_score(ctx: &Ctx, response: Option<PathBuf>) -> Result<()> {
    let corpus = load_corpus(ctx)?;
    let key = require_gold(&corpus)?;
    let response_path = response.unwrap_or_else(|| ctx.config.paths.clusters());
    let predicted = read_clustering(&response_path)?;
    // score on the mentions the response actually covers (scoring closes
    // over the union, so a split prediction is judged on its split)
    let key = key.restricted_to(&predicted.mention_ids());

    let mut records = Vec::new();
    for mode in ctx.singletons.modes() {
        let report = score_report(&key, &predicted, mode);
        records.push(ScoreRecord::new("predict", &report));
    }
    write_jsonl(&ctx.config.paths.scores(), &records)?;
    print!("{}", render_score_table(&records));
    Ok(())
}

fn cmd_analyze(ctx: &Ctx, response: Option<PathBuf>) -> Result<()> {
    let corpus = load_corpus(ctx)?;
    let gold = require_gold(&corpus)?;
    let response_path = response.unwrap_or_else(|| ctx.config.paths.clusters());
    let predicted = read_clustering(&response_path)?;
    let key = gold.restricted_to(&predicted.mention_ids());

    let surfaces = corpus.surfaces();
    let mut universe = key.mention_ids();
    universe.extend(predicted.mention_ids());
    let closed_key = key.closed_over(&universe);
    let types = build_type_graph(&closed_key, &surfaces, None);
    let errors = extract_link_errors(&key, &predicted);
    let breakdown = classify_errors(&errors, &types);

    write_jsonl(&ctx.config.paths.errors(), &[ErrorRecord::new("predict", &breakdown)])?;
    write_jsonl(
        &ctx.config.paths.error_pairs(),
        &pair_records(&breakdown, &errors.false_negatives, &types),
    )?;
    println!(
        "link errors: fpa {}  fpt {}  fn {}",
        breakdown.fpa, breakdown.fpt, breakdown.false_negatives
    );
    Ok(())
}

fn cmd_direct(ctx: &Ctx) -> Result<()> {
    let corpus = load_corpus(ctx)?;
    let client = make_client(ctx, &corpus)?;
    let cache = ResponseCache::open(&ctx.cache_path)?;
    let llm = &ctx.config.llm;
    let engine = SummaryEngine::new(
        client.as_ref(),
        &cache,
        llm.chat_params(),
        llm.retry_limit,
        llm.max_concurrent,
    );
    let run = engine.run_direct(&corpus, &ctx.config.direct.to_core(), &ctx.config.direct.demo_topics)?;

    write_jsonl(&ctx.config.paths.direct_clusters(), &clustering_records(&run.clustering))?;
    let logs: Vec<DirectLogRecord> = run.logs.iter().map(DirectLogRecord::from).collect();
    write_jsonl(&ctx.config.paths.direct_log(), &logs)?;
    println!(
        "direct prediction over {} mentions in {} requests ({} prompt tokens): {} clusters",
        run.target_mentions.len(),
        run.logs.len(),
        run.total_prompt_tokens,
        run.clustering.clusters.len()
    );

    if let Some(gold) = &corpus.gold {
        let key = gold.restricted_to(&run.target_mentions);
        let mut records = Vec::new();
        for mode in ctx.singletons.modes() {
            let report = score_report(&key, &run.clustering, mode);
            records.push(ScoreRecord::new("direct", &report));
        }
        write_jsonl(&ctx.config.paths.direct_scores(), &records)?;
        print!("{}", render_score_table(&records));
    }
    Ok(())
}

fn cmd_synth(ctx: &Ctx, run: bool) -> Result<()> {
    let spec = ctx.config.synth.to_spec(ctx.seed);
    let output = generate(&spec)?;
    let corpus_path = &ctx.config.paths.corpus;
    if let Some(parent) = corpus_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(corpus_path, emit_corpus(&output.corpus))?;
    write_token_vectors(
        BufWriter::new(File::create(ctx.config.paths.token_vectors())?),
        spec.dim,
        &output.token_vectors,
    )?;
    let bank: Vec<FactRecord> = output
        .facts
        .iter()
        .map(|(m, f)| FactRecord { mention_id: m.clone(), fact: f.clone() })
        .collect();
    write_jsonl(&ctx.config.paths.fact_bank(), &bank)?;
    let stats = output.corpus.stats();
    println!(
        "synthetic corpus: {} topics, {} documents, {} mentions, {} clusters (sigma {}, signal {}) -> {}",
        output.corpus.topics.len(),
        stats.documents,
        stats.mentions,
        stats.gold_clusters,
        spec.sigma,
        spec.signal,
        corpus_path.display()
    );
    if !run {
        return Ok(());
    }

    // benchmark: both arms, repeated over consecutive seeds, averaged.
    // Training uses the benchmark schedule (sized for generated corpora);
    // the config's training sections govern the stage subcommands instead.
    let (retrieval, pairwise) = benchmark_training_configs();
    let clustering = ctx.config.clustering.to_core();
    let mode = match ctx.singletons {
        SingletonChoice::Without => SingletonMode::Without,
        _ => SingletonMode::With,
    };
    let mut records = Vec::new();
    let mut means = BTreeMap::from([("with-summaries", 0.0), ("without-summaries", 0.0)]);
    for k in 0..ctx.repeats {
        let seed = ctx.seed + k as u64;
        let arm_output = if k == 0 { output.clone() } else { generate(&ctx.config.synth.to_spec(seed))? };
        for (name, with_summaries) in [("with-summaries", true), ("without-summaries", false)] {
            let arm = run_benchmark_arm(
                &arm_output,
                with_summaries,
                &retrieval,
                &pairwise,
                &clustering,
                mode,
                seed,
            )?;
            *means.get_mut(name).expect("fixed keys") += arm.report.conll_f1;
            records.push(ScoreRecord::new(&format!("{name}.seed{seed}"), &arm.report));
        }
    }
    write_jsonl(&ctx.config.paths.scores(), &records)?;
    print!("{}", render_score_table(&records));
    let with = means["with-summaries"] / ctx.repeats as f64;
    let without = means["without-summaries"] / ctx.repeats as f64;
    println!(
        "mean CoNLL over {} seed(s): with summaries {:.1}, without {:.1}, gap {:+.1}",
        ctx.repeats,
        100.0 * with,
        100.0 * without,
        100.0 * (with - without)
    );
    Ok(())
}
