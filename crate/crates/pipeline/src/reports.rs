//! Stable report and export record formats.
//!
//! Every report is a JSONL file — one self-describing JSON object per
//! line — so runs diff cleanly and downstream tooling needs no schema
//! negotiation. The score record mirrors the usual coreference results
//! table (R/P/F1 for MUC, B³, CEAF_e, LEA, plus the CoNLL average and a
//! singleton-mode tag); the error record mirrors the FPA/FPT/FN breakdown.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use cdecr_core::analyze::{ErrorBreakdown, FpKind, TypeGraph};
use cdecr_core::corpus::{Cluster, Clustering, Corpus, CorpusStats};
use cdecr_core::metrics::{Prf, ScoreReport, SingletonMode};
use cdecr_core::summarize::{Step, Summary};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path} line {line}: {source}")]
    Record { path: String, line: usize, source: serde_json::Error },
}

/// Write one serializable record per line.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), ReportError> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r).expect("report records serialize infallibly");
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, ReportError> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| ReportError::Record {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

// ---------------------------------------------------------------- scores

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrfRecord {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub degenerate: bool,
}

impl From<Prf> for PrfRecord {
    fn from(p: Prf) -> Self {
        PrfRecord { recall: p.recall, precision: p.precision, f1: p.f1, degenerate: p.degenerate }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    /// Which run produced this row (e.g. "predict.seed1", "direct").
    pub run: String,
    pub singletons: String,
    pub muc: PrfRecord,
    pub b_cubed: PrfRecord,
    pub ceaf_e: PrfRecord,
    pub lea: PrfRecord,
    pub conll_f1: f64,
}

impl ScoreRecord {
    pub fn new(run: &str, report: &ScoreReport) -> Self {
        ScoreRecord {
            run: run.to_string(),
            singletons: match report.singleton_mode {
                SingletonMode::With => "with".to_string(),
                SingletonMode::Without => "without".to_string(),
            },
            muc: report.muc.into(),
            b_cubed: report.b_cubed.into(),
            ceaf_e: report.ceaf_e.into(),
            lea: report.lea.into(),
            conll_f1: report.conll_f1,
        }
    }
}

/// Fixed-width table for terminals; percentages with one decimal.
pub fn render_score_table(records: &[ScoreRecord]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<20} {:<9} {:>6} {:>6} {:>6}  {:>6} {:>6} {:>6}  {:>6} {:>6} {:>6}  {:>6} {:>6} {:>6}  {:>6}\n",
        "run", "single.", "MUC-R", "MUC-P", "MUC-F", "B3-R", "B3-P", "B3-F", "CEAF-R", "CEAF-P",
        "CEAF-F", "LEA-R", "LEA-P", "LEA-F", "CoNLL"
    ));
    let pct = |v: f64| format!("{:.1}", v * 100.0);
    for r in records {
        out.push_str(&format!(
            "{:<20} {:<9} {:>6} {:>6} {:>6}  {:>6} {:>6} {:>6}  {:>6} {:>6} {:>6}  {:>6} {:>6} {:>6}  {:>6}\n",
            r.run,
            r.singletons,
            pct(r.muc.recall),
            pct(r.muc.precision),
            pct(r.muc.f1),
            pct(r.b_cubed.recall),
            pct(r.b_cubed.precision),
            pct(r.b_cubed.f1),
            pct(r.ceaf_e.recall),
            pct(r.ceaf_e.precision),
            pct(r.ceaf_e.f1),
            pct(r.lea.recall),
            pct(r.lea.precision),
            pct(r.lea.f1),
            pct(r.conll_f1),
        ));
    }
    out
}

// ---------------------------------------------------------------- errors

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub method: String,
    pub fpa: usize,
    pub fpt: usize,
    #[serde(rename = "fn")]
    pub false_negatives: usize,
}

impl ErrorRecord {
    pub fn new(method: &str, breakdown: &ErrorBreakdown) -> Self {
        ErrorRecord {
            method: method.to_string(),
            fpa: breakdown.fpa,
            fpt: breakdown.fpt,
            false_negatives: breakdown.false_negatives,
        }
    }
}

/// One classified link for the per-pair dump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRecord {
    pub m1: String,
    pub m2: String,
    /// `FPA`, `FPT`, or `FN`.
    pub kind: String,
    pub type1: Option<usize>,
    pub type2: Option<usize>,
}

pub fn pair_records(
    breakdown: &ErrorBreakdown,
    false_negatives: &BTreeSet<(String, String)>,
    types: &TypeGraph,
) -> Vec<PairRecord> {
    let mut out: Vec<PairRecord> = breakdown
        .pairs
        .iter()
        .map(|p| PairRecord {
            m1: p.a.clone(),
            m2: p.b.clone(),
            kind: match p.kind {
                FpKind::Ambiguous => "FPA".to_string(),
                FpKind::CrossType => "FPT".to_string(),
            },
            type1: types.type_of(&p.a),
            type2: types.type_of(&p.b),
        })
        .collect();
    out.extend(false_negatives.iter().map(|(a, b)| PairRecord {
        m1: a.clone(),
        m2: b.clone(),
        kind: "FN".to_string(),
        type1: types.type_of(a),
        type2: types.type_of(b),
    }));
    out
}

// ----------------------------------------------------------------- stats

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsRecord {
    pub documents: usize,
    pub sentences: usize,
    pub mentions: usize,
    pub gold_clusters: usize,
    pub gold_links: u64,
    pub topics: usize,
    pub subtopics: usize,
}

impl From<CorpusStats> for StatsRecord {
    fn from(s: CorpusStats) -> Self {
        StatsRecord {
            documents: s.documents,
            sentences: s.sentences,
            mentions: s.mentions,
            gold_clusters: s.gold_clusters,
            gold_links: s.gold_links,
            topics: s.topics,
            subtopics: s.subtopics,
        }
    }
}

// ------------------------------------------------------------- summaries

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub mention_id: String,
    /// `step1`, `step2`, or `paraphrase` — whichever produced the text.
    pub step: String,
    pub text: String,
}

impl SummaryRecord {
    pub fn new(s: &Summary) -> Self {
        SummaryRecord {
            mention_id: s.mention_id.clone(),
            step: s.step.as_str().to_string(),
            text: s.text.clone(),
        }
    }

    pub fn step_enum(&self) -> Option<Step> {
        match self.step.as_str() {
            "step1" => Some(Step::One),
            "step2" => Some(Step::Two),
            "paraphrase" => Some(Step::Paraphrase),
            _ => None,
        }
    }
}

// ------------------------------------------------------------ clusterings

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub cluster_id: String,
    pub mention_ids: Vec<String>,
}

pub fn clustering_records(clustering: &Clustering) -> Vec<ClusterRecord> {
    clustering
        .clusters
        .iter()
        .map(|c| ClusterRecord {
            cluster_id: c.id.clone(),
            mention_ids: c.mentions.iter().cloned().collect(),
        })
        .collect()
}

pub fn clustering_from_records(records: Vec<ClusterRecord>) -> Clustering {
    Clustering::new(
        records.into_iter().map(|r| Cluster::new(r.cluster_id, r.mention_ids)).collect(),
    )
}

/// Convenience: the gold clustering of a corpus, or every mention as a
/// singleton when the corpus carries no gold annotation.
pub fn gold_or_singletons(corpus: &Corpus) -> Clustering {
    match &corpus.gold {
        Some(g) => g.clone(),
        None => Clustering::from_groups(
            corpus.mention_ids().into_iter().map(|m| BTreeSet::from([m])).collect(),
        ),
    }
}
