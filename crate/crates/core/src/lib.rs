//! Core algorithms for cross-document event coreference resolution.
//!
//! This crate contains everything that does not touch the filesystem or the
//! network: the corpus data model, prompt construction for the two-step
//! summarization scheme, mention representation, candidate retrieval, the
//! pairwise classifier, agglomerative clustering, the coreference metric
//! suite, and the link-error taxonomy. The companion `cdecr` crate layers
//! file formats, an LLM client, and a CLI on top.
//!
//! The crate is `no_std` (with `alloc`) so the algorithmic core stays free
//! of platform dependencies. All collections are ordered (`BTreeMap`,
//! `BTreeSet`) and all randomness flows through explicitly seeded ChaCha20
//! generators, so every operation here is deterministic given its inputs.

#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod analyze;
pub mod assignment;
pub mod cluster;
pub mod corpus;
pub mod direct;
pub mod math;
pub mod metrics;
pub mod pairscore;
pub mod represent;
pub mod retrieve;
pub mod summarize;
pub mod text;
