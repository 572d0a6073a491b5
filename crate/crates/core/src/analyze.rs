//! Link-level error taxonomy: which kind of mistake did the system make?
//!
//! False-positive links split into two very different failure modes:
//!
//! * **FPA** (false positive, ambiguous): both mentions belong to the same
//!   *event type* — e.g. two different earthquakes wrongly merged. These
//!   are the hard confusions between sibling events.
//! * **FPT** (false positive, cross-type): the mentions are not even the
//!   same kind of event — e.g. an earthquake linked to a merger.
//!
//! Event types are induced from the key clustering itself: two key
//! clusters share a type whenever any mention surface (normalized, with an
//! optional lemma map applied first) matches across them. This is a
//! union-find over key clusters; its connected groups are the types.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::Clustering;
use crate::text::normalize_surface;

/// False-positive and false-negative links, as canonical unordered pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinkErrors {
    /// Links asserted by the response but absent from the key.
    pub false_positives: BTreeSet<(String, String)>,
    /// Key links the response failed to make.
    pub false_negatives: BTreeSet<(String, String)>,
}

/// Set-difference of the two link sets in both directions. Works on the
/// raw partitions — singletons carry no links, so no closure is needed.
pub fn extract_link_errors(key: &Clustering, response: &Clustering) -> LinkErrors {
    let key_links = key.links();
    let resp_links = response.links();
    LinkErrors {
        false_positives: resp_links.difference(&key_links).cloned().collect(),
        false_negatives: key_links.difference(&resp_links).cloned().collect(),
    }
}

/// Mention → event-type assignment induced from a key clustering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeGraph {
    type_of: BTreeMap<String, usize>,
    pub type_count: usize,
}

impl TypeGraph {
    pub fn type_of(&self, mention: &str) -> Option<usize> {
        self.type_of.get(mention).copied()
    }

    /// True when both mentions are typed and share a type.
    pub fn same_type(&self, a: &str, b: &str) -> bool {
        match (self.type_of(a), self.type_of(b)) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        }
    }
}

fn normalized_with_lemmas(surface: &str, lemmas: Option<&BTreeMap<String, String>>) -> String {
    match lemmas {
        None => normalize_surface(surface),
        Some(map) => {
            let mapped: Vec<String> = surface
                .split_whitespace()
                .map(|tok| {
                    let norm = normalize_surface(tok);
                    map.get(&norm).cloned().unwrap_or(norm)
                })
                .collect();
            normalize_surface(&mapped.join(" "))
        }
    }
}

/// Build the type graph over a key clustering: union key clusters that
/// share any normalized mention surface. `surfaces` maps mention id →
/// surface text; mentions without a surface can never join clusters but
/// still receive their cluster's type. The optional `lemmas` map (keyed
/// and valued in normalized form) folds inflectional variants together
/// before matching.
pub fn build_type_graph(
    key: &Clustering,
    surfaces: &BTreeMap<String, String>,
    lemmas: Option<&BTreeMap<String, String>>,
) -> TypeGraph {
    let n = key.clusters.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    let mut by_surface: BTreeMap<String, usize> = BTreeMap::new();
    for (ci, c) in key.clusters.iter().enumerate() {
        for m in &c.mentions {
            let Some(surface) = surfaces.get(m) else { continue };
            let norm = normalized_with_lemmas(surface, lemmas);
            if norm.is_empty() {
                continue; // pure punctuation cannot define a type
            }
            match by_surface.get(&norm) {
                Some(&other) => {
                    let (a, b) = (find(&mut parent, ci), find(&mut parent, other));
                    if a != b {
                        parent[a] = b;
                    }
                }
                None => {
                    by_surface.insert(norm, ci);
                }
            }
        }
    }
    // compact roots into dense type ids
    let mut type_ids: BTreeMap<usize, usize> = BTreeMap::new();
    let mut type_of = BTreeMap::new();
    for ci in 0..n {
        let root = find(&mut parent, ci);
        let next = type_ids.len();
        let id = *type_ids.entry(root).or_insert(next);
        for m in &key.clusters[ci].mentions {
            type_of.insert(m.clone(), id);
        }
    }
    TypeGraph { type_of, type_count: type_ids.len() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpKind {
    /// Same event type: a genuine confusion between sibling events.
    Ambiguous,
    /// Different (or unknown) event types.
    CrossType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifiedPair {
    pub a: String,
    pub b: String,
    pub kind: FpKind,
}

/// Counts plus the per-pair classification behind them.
/// `fpa + fpt` always equals the number of false-positive links.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorBreakdown {
    pub fpa: usize,
    pub fpt: usize,
    pub false_negatives: usize,
    pub pairs: Vec<ClassifiedPair>,
}

/// Classify every false-positive link by type agreement. Mentions the type
/// graph does not know (absent from the key universe it was built over)
/// count as cross-type: the key offers no evidence they are confusable.
pub fn classify_errors(errors: &LinkErrors, types: &TypeGraph) -> ErrorBreakdown {
    let mut fpa = 0;
    let mut fpt = 0;
    let mut pairs = Vec::new();
    for (a, b) in &errors.false_positives {
        let kind = if types.same_type(a, b) { FpKind::Ambiguous } else { FpKind::CrossType };
        match kind {
            FpKind::Ambiguous => fpa += 1,
            FpKind::CrossType => fpt += 1,
        }
        pairs.push(ClassifiedPair { a: a.clone(), b: b.clone(), kind });
    }
    ErrorBreakdown { fpa, fpt, false_negatives: errors.false_negatives.len(), pairs }
}

/// Convenience wrapper: extract, type, and classify in one call, building
/// the type graph over the key closed to the union universe so every
/// response mention is typed.
pub fn analyze(
    key: &Clustering,
    response: &Clustering,
    surfaces: &BTreeMap<String, String>,
    lemmas: Option<&BTreeMap<String, String>>,
) -> ErrorBreakdown {
    let errors = extract_link_errors(key, response);
    let mut universe = key.mention_ids();
    universe.extend(response.mention_ids());
    let closed_key = key.closed_over(&universe);
    let types = build_type_graph(&closed_key, surfaces, lemmas);
    classify_errors(&errors, &types)
}
