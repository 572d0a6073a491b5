//! Joint mention representation: document context fused with the mention's
//! generated summary.
//!
//! Each mention is encoded twice — once inside its document and once inside
//! its summary — and the two encodings are concatenated. A mention encoding
//! is the concatenation of its boundary token vectors (first and last token
//! of the span), so for an embedding dimension `d` the document half has
//! length `2d` and the fused vector `4d`. When the mention string cannot be
//! found in the summary (or there is no summary at all), the document half
//! is duplicated and the vector flagged, keeping dimensions stable.
//!
//! Embeddings come from an [`EmbeddingProvider`]. The built-in
//! [`HashFeatureProvider`] derives deterministic pseudo-embeddings from the
//! tokens themselves (a seeded feature hash with a decaying context
//! window): good enough to make geometry follow token overlap, with zero
//! model dependencies. [`TableProvider`] serves real vectors precomputed
//! elsewhere and loaded from a file by the companion crate.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::corpus::{Document, Mention};
use crate::math::{concat, fnv1a64, normalize, splitmix64, unit_interval_signed};
use crate::text::{find_token_span, tokenize};

/// Separator token spliced between document and summary tokens.
pub const SUMMARY_SEPARATOR: &str = "[SEP]";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RepresentError {
    #[error("mention `{mention}` belongs to document `{expected}`, not `{got}`")]
    MentionDocMismatch { mention: String, expected: String, got: String },
    #[error("no vector for document `{doc_id}` token {index}")]
    MissingVector { doc_id: String, index: usize },
    #[error("provider `{provider}` cannot embed joint contexts (summary tokens present)")]
    JointUnsupported { provider: String },
    #[error("vector for document `{doc_id}` token {index} has length {got}, expected {expected}")]
    WrongDimension { doc_id: String, index: usize, expected: usize, got: usize },
}

/// The token sequence a mention is encoded in: document tokens, then the
/// separator, then summary tokens (when a summary is attached).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointContext {
    pub doc_id: String,
    pub mention_id: String,
    pub tokens: Vec<String>,
    /// How many leading tokens belong to the document.
    pub doc_len: usize,
    /// Mention span inside the document part, half-open.
    pub doc_span: (usize, usize),
    /// Mention span inside the summary part (absolute indices into
    /// `tokens`), when a summary is attached and the mention was found.
    pub summary_span: Option<(usize, usize)>,
    /// A summary was attached but the mention string was not found in it.
    pub mention_missing_in_summary: bool,
}

/// Splice `summary` (already parsed model output, marker stripped) onto the
/// document and locate the mention on both sides. The summary-side location
/// is a case-insensitive token-level search for the mention surface; a miss
/// is recorded, not fatal — encoding falls back to duplicating the document
/// half.
pub fn assemble_joint_context(
    doc: &Document,
    mention: &Mention,
    summary: Option<&str>,
) -> Result<JointContext, RepresentError> {
    if mention.doc_id != doc.id {
        return Err(RepresentError::MentionDocMismatch {
            mention: mention.id.clone(),
            expected: mention.doc_id.clone(),
            got: doc.id.clone(),
        });
    }
    let mut tokens = doc.flat_tokens();
    let doc_len = tokens.len();
    let doc_span = doc.flat_span(mention);
    let mut summary_span = None;
    let mut missing = false;
    if let Some(text) = summary {
        let summary_tokens = tokenize(text);
        let surface_tokens = tokenize(&mention.surface);
        match find_token_span(&summary_tokens, &surface_tokens) {
            Some((s, e)) => summary_span = Some((doc_len + 1 + s, doc_len + 1 + e)),
            None => missing = true,
        }
        tokens.push(SUMMARY_SEPARATOR.to_string());
        tokens.extend(summary_tokens);
    }
    Ok(JointContext {
        doc_id: doc.id.clone(),
        mention_id: mention.id.clone(),
        tokens,
        doc_len,
        doc_span,
        summary_span,
        mention_missing_in_summary: missing,
    })
}

/// Source of per-token vectors for a joint context.
pub trait EmbeddingProvider {
    fn name(&self) -> &str;
    fn dimension(&self) -> usize;
    /// One vector per context token, each of length [`Self::dimension`].
    fn embed(&self, context: &JointContext) -> Result<Vec<Vec<f64>>, RepresentError>;
}

/// A fused mention vector of length `4 * d`:
/// `[doc_start ; doc_end ; summary_start ; summary_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedVector {
    pub mention_id: String,
    pub values: Vec<f64>,
    /// The summary half is a copy of the document half (no summary, or the
    /// mention was not found in it).
    pub fallback: bool,
}

/// Encode one mention: boundary token vectors on the document side, fused
/// with boundary token vectors on the summary side (or duplicated on
/// fallback).
pub fn encode_mention(
    context: &JointContext,
    provider: &dyn EmbeddingProvider,
) -> Result<FusedVector, RepresentError> {
    let vectors = provider.embed(context)?;
    let d = provider.dimension();
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != d {
            return Err(RepresentError::WrongDimension {
                doc_id: context.doc_id.clone(),
                index: i,
                expected: d,
                got: v.len(),
            });
        }
    }
    let (s, e) = context.doc_span;
    let doc_half = concat(&[&vectors[s], &vectors[e - 1]]);
    let (summary_half, fallback) = match context.summary_span {
        Some((ss, se)) => (concat(&[&vectors[ss], &vectors[se - 1]]), false),
        None => (doc_half.clone(), true),
    };
    Ok(FusedVector {
        mention_id: context.mention_id.clone(),
        values: concat(&[&doc_half, &summary_half]),
        fallback,
    })
}

/// Deterministic pseudo-embeddings derived from the tokens themselves.
///
/// Each token at position `i` receives the unit-normalized sum of hash
/// directions of the tokens at offsets `-window ..= window`, weighted by
/// `decay^|offset|`. A direction depends on the token string, the offset,
/// and the seed — nothing else — via this recipe:
///
/// ```text
/// state  = seed * 0x9E3779B97F4A7C15
///        + fnv1a64(token)
///        + offset * 0xD1B54A32D192ED03     (wrapping u64 arithmetic)
/// dir[j] = unit_interval_signed(splitmix64(&mut state));  j = 0..dim
/// dir    = dir / |dir|
/// ```
///
/// With `window = 0` every token's vector is independent of its neighbors;
/// with a positive window, tokens sharing context drift together, which is
/// what retrieval needs from a "contextual" embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct HashFeatureProvider {
    pub dim: usize,
    pub seed: u64,
    pub window: usize,
    pub decay: f64,
}

impl HashFeatureProvider {
    pub fn new(dim: usize, seed: u64, window: usize, decay: f64) -> Self {
        HashFeatureProvider { dim, seed, window, decay }
    }

    /// The hash direction for one (token, offset) slot; unit length.
    pub fn direction(&self, token: &str, offset: i64) -> Vec<f64> {
        let mut state = self
            .seed
            .wrapping_mul(0x9E3779B97F4A7C15)
            .wrapping_add(fnv1a64(token.as_bytes()))
            .wrapping_add((offset as u64).wrapping_mul(0xD1B54A32D192ED03));
        let mut v: Vec<f64> =
            (0..self.dim).map(|_| unit_interval_signed(splitmix64(&mut state))).collect();
        normalize(&mut v);
        v
    }
}

impl EmbeddingProvider for HashFeatureProvider {
    fn name(&self) -> &str {
        "hash"
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, context: &JointContext) -> Result<Vec<Vec<f64>>, RepresentError> {
        let tokens = &context.tokens;
        let mut out = Vec::with_capacity(tokens.len());
        for i in 0..tokens.len() {
            let mut v = alloc::vec![0.0; self.dim];
            let w = self.window as i64;
            for offset in -w..=w {
                let j = i as i64 + offset;
                if j < 0 || j >= tokens.len() as i64 {
                    continue;
                }
                let weight = libm::pow(self.decay, offset.unsigned_abs() as f64);
                let dir = self.direction(&tokens[j as usize], offset);
                for (x, d) in v.iter_mut().zip(&dir) {
                    *x += weight * d;
                }
            }
            normalize(&mut v);
            out.push(v);
        }
        Ok(out)
    }
}

/// Precomputed per-token vectors keyed by `(doc_id, token_index)`. Serves
/// document-only contexts; joint contexts (which contain generated summary
/// tokens no offline table can know about) are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct TableProvider {
    dim: usize,
    vectors: BTreeMap<(String, usize), Vec<f64>>,
}

impl TableProvider {
    pub fn new(dim: usize, vectors: BTreeMap<(String, usize), Vec<f64>>) -> Result<Self, RepresentError> {
        for ((doc_id, index), v) in &vectors {
            if v.len() != dim {
                return Err(RepresentError::WrongDimension {
                    doc_id: doc_id.clone(),
                    index: *index,
                    expected: dim,
                    got: v.len(),
                });
            }
        }
        Ok(TableProvider { dim, vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

impl EmbeddingProvider for TableProvider {
    fn name(&self) -> &str {
        "table"
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, context: &JointContext) -> Result<Vec<Vec<f64>>, RepresentError> {
        if context.tokens.len() != context.doc_len {
            return Err(RepresentError::JointUnsupported { provider: "table".to_string() });
        }
        (0..context.doc_len)
            .map(|i| {
                self.vectors
                    .get(&(context.doc_id.clone(), i))
                    .cloned()
                    .ok_or_else(|| RepresentError::MissingVector {
                        doc_id: context.doc_id.clone(),
                        index: i,
                    })
            })
            .collect()
    }
}
