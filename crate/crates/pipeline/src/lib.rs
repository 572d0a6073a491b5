//! Cross-document event coreference pipeline.
//!
//! This crate wraps the numeric core (`cdecr-core`) with everything a run
//! needs: the canonical corpus file format and CoNLL emission, chat-model
//! clients (HTTP and a deterministic mock) with an append-only response
//! cache, the two-step mention-summarization engine, text formats for
//! vectors and trained checkpoints, JSONL report files, stage orchestration,
//! a synthetic benchmark generator, and the `cdecr` command-line interface.

pub mod config;
pub mod conll;
pub mod engine;
pub mod format;
pub mod llm;
pub mod pipeline;
pub mod reports;
pub mod synth;
pub mod vectors;
