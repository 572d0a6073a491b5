//! Coreference metric suite: MUC, B³, entity-based CEAF, LEA, and their
//! CoNLL average.
//!
//! All metrics are computed over a *closed universe*: the union of mention
//! ids appearing on either side. A mention present on only one side is
//! treated as an implicit singleton on the other before scoring, so key and
//! response always partition the same set and no metric ever sees a
//! half-assigned mention.
//!
//! Degenerate inputs (empty universe, link-free sides for MUC) produce a
//! score of 0 with the `degenerate` flag set — never NaN or infinity.
//!
//! Scores can be aggregated across several universes (e.g. per topic) with
//! [`MetricAccumulator`], which sums numerators and denominators so the
//! result is the micro-average — identical to scoring the concatenation of
//! disjoint universes at once.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::assignment::max_weight_assignment;
use crate::corpus::Clustering;
use crate::math::choose2;

/// Whether singleton clusters participate in scoring. `Without` strips
/// singleton clusters from both sides before closure, matching the stricter
/// evaluation convention; `With` scores partitions as given.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingletonMode {
    With,
    Without,
}

/// Recall / precision / F1 triple. `degenerate` records that at least one
/// denominator was zero and the affected value was reported as 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub degenerate: bool,
}

impl Prf {
    fn from_sums(rn: f64, rd: f64, pn: f64, pd: f64) -> Prf {
        let degenerate = rd <= 0.0 || pd <= 0.0;
        let recall = if rd > 0.0 { rn / rd } else { 0.0 };
        let precision = if pd > 0.0 { pn / pd } else { 0.0 };
        let f1 = if recall + precision > 0.0 {
            2.0 * recall * precision / (recall + precision)
        } else {
            0.0
        };
        Prf { recall, precision, f1, degenerate }
    }
}

/// All four metrics plus their CoNLL average for one key/response pair (or
/// one micro-aggregated collection of them).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub singleton_mode: SingletonMode,
    pub muc: Prf,
    pub b_cubed: Prf,
    pub ceaf_e: Prf,
    pub lea: Prf,
    pub conll_f1: f64,
}

/// Mean of the MUC, B³ and CEAF_e F1 scores (LEA is reported alongside but
/// does not enter the average).
pub fn conll_f1(muc_f1: f64, b_cubed_f1: f64, ceaf_e_f1: f64) -> f64 {
    (muc_f1 + b_cubed_f1 + ceaf_e_f1) / 3.0
}

pub fn conll(muc: &Prf, b_cubed: &Prf, ceaf_e: &Prf) -> f64 {
    conll_f1(muc.f1, b_cubed.f1, ceaf_e.f1)
}

/// Remove singleton clusters from both sides independently. The returned
/// pair generally covers a smaller universe; scoring re-closes over it, so
/// a mention kept on one side but stripped from the other reappears there
/// as an implicit singleton.
pub fn strip_singletons(key: &Clustering, response: &Clustering) -> (Clustering, Clustering) {
    (key.without_singletons(), response.without_singletons())
}

/// Both partitions re-expressed over the closed universe, with mentions
/// interned to dense indices.
struct Universe {
    n: usize,
    key: Vec<Vec<usize>>,
    resp: Vec<Vec<usize>>,
    /// mention index → key cluster index
    key_of: Vec<usize>,
    /// mention index → response cluster index
    resp_of: Vec<usize>,
}

fn intern(clustering: &Clustering, ids: &BTreeMap<&str, usize>, n: usize) -> (Vec<Vec<usize>>, Vec<usize>) {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut covered = vec![false; n];
    for c in &clustering.clusters {
        let members: Vec<usize> = c.mentions.iter().map(|m| ids[m.as_str()]).collect();
        for &m in &members {
            covered[m] = true;
        }
        clusters.push(members);
    }
    // implicit singletons for universe mentions this side does not cover
    for (m, seen) in covered.iter().enumerate() {
        if !seen {
            clusters.push(vec![m]);
        }
    }
    // Canonical order: by smallest member. Cluster ids and input order are
    // names only; fixing the order here keeps float summation order — and
    // therefore every reported score — bit-identical across relabelings.
    clusters.sort_by_key(|members| members.iter().min().copied());
    let mut of = vec![usize::MAX; n];
    for (i, members) in clusters.iter().enumerate() {
        for &m in members {
            of[m] = i;
        }
    }
    (clusters, of)
}

fn close(key: &Clustering, response: &Clustering) -> Universe {
    let mut universe: BTreeSet<String> = key.mention_ids();
    universe.extend(response.mention_ids());
    let ids: BTreeMap<&str, usize> =
        universe.iter().enumerate().map(|(i, m)| (m.as_str(), i)).collect();
    let n = ids.len();
    let (key_clusters, key_of) = intern(key, &ids, n);
    let (resp_clusters, resp_of) = intern(response, &ids, n);
    Universe { n, key: key_clusters, resp: resp_clusters, key_of, resp_of }
}

/// Numerator/denominator sums for one metric, micro-addable across universes.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct RatioSums {
    rn: f64,
    rd: f64,
    pn: f64,
    pd: f64,
}

impl RatioSums {
    fn add(&mut self, other: RatioSums) {
        self.rn += other.rn;
        self.rd += other.rd;
        self.pn += other.pn;
        self.pd += other.pd;
    }

    fn prf(&self) -> Prf {
        Prf::from_sums(self.rn, self.rd, self.pn, self.pd)
    }
}

/// MUC link-based sums. Singleton clusters contribute zero to both the
/// numerator and the denominator, so a side made only of singletons yields
/// a 0/0 ratio, reported as degenerate.
fn muc_sums(u: &Universe) -> RatioSums {
    fn side(clusters: &[Vec<usize>], other_of: &[usize]) -> (f64, f64) {
        let mut num = 0.0;
        let mut den = 0.0;
        for c in clusters {
            if c.len() < 2 {
                continue; // 0/0 term: excluded from both sums
            }
            let partitions: BTreeSet<usize> = c.iter().map(|&m| other_of[m]).collect();
            num += (c.len() - partitions.len()) as f64;
            den += (c.len() - 1) as f64;
        }
        (num, den)
    }
    let (rn, rd) = side(&u.key, &u.resp_of);
    let (pn, pd) = side(&u.resp, &u.key_of);
    RatioSums { rn, rd, pn, pd }
}

/// B³ mention-based sums: each universe mention contributes the fraction of
/// its key (resp. response) cluster that the other side reproduces.
fn b_cubed_sums(u: &Universe) -> RatioSums {
    let mut sums = RatioSums { rn: 0.0, rd: u.n as f64, pn: 0.0, pd: u.n as f64 };
    for m in 0..u.n {
        let k = &u.key[u.key_of[m]];
        let r = &u.resp[u.resp_of[m]];
        let common = k.iter().filter(|&&x| u.resp_of[x] == u.resp_of[m]).count() as f64;
        sums.rn += common / k.len() as f64;
        sums.pn += common / r.len() as f64;
    }
    sums
}

/// Entity-based CEAF sums under the φ₄ similarity
/// `2·|K ∩ R| / (|K| + |R|)`, with the best one-to-one cluster alignment
/// found by maximum-weight assignment.
fn ceaf_e_sums(u: &Universe) -> RatioSums {
    let weights: Vec<Vec<f64>> = u
        .key
        .iter()
        .map(|k| {
            u.resp
                .iter()
                .map(|r| {
                    let common = k.iter().filter(|&&m| r.contains(&m)).count() as f64;
                    2.0 * common / (k.len() + r.len()) as f64
                })
                .collect()
        })
        .collect();
    let (total, _) = max_weight_assignment(&weights);
    RatioSums {
        rn: total,
        rd: u.key.len() as f64,
        pn: total,
        pd: u.resp.len() as f64,
    }
}

/// LEA sums with entity-size importance. A singleton entity carries one
/// self-link, resolved iff the mention is also a singleton on the other
/// side; larger entities count reproduced within-cluster links.
fn lea_sums(u: &Universe) -> RatioSums {
    fn side(clusters: &[Vec<usize>], other: &[Vec<usize>], other_of: &[usize]) -> (f64, f64) {
        let mut num = 0.0;
        let mut den = 0.0;
        for c in clusters {
            let size = c.len() as f64;
            let resolved_fraction = if c.len() == 1 {
                if other[other_of[c[0]]].len() == 1 {
                    1.0
                } else {
                    0.0
                }
            } else {
                let mut by_other: BTreeMap<usize, usize> = BTreeMap::new();
                for &m in c {
                    *by_other.entry(other_of[m]).or_insert(0) += 1;
                }
                let resolved: u64 = by_other.values().map(|&k| choose2(k)).sum();
                resolved as f64 / choose2(c.len()) as f64
            };
            num += size * resolved_fraction;
            den += size;
        }
        (num, den)
    }
    let (rn, rd) = side(&u.key, &u.resp, &u.resp_of);
    let (pn, pd) = side(&u.resp, &u.key, &u.key_of);
    RatioSums { rn, rd, pn, pd }
}

pub fn muc(key: &Clustering, response: &Clustering) -> Prf {
    muc_sums(&close(key, response)).prf()
}

pub fn b_cubed(key: &Clustering, response: &Clustering) -> Prf {
    b_cubed_sums(&close(key, response)).prf()
}

pub fn ceaf_e(key: &Clustering, response: &Clustering) -> Prf {
    ceaf_e_sums(&close(key, response)).prf()
}

pub fn lea(key: &Clustering, response: &Clustering) -> Prf {
    lea_sums(&close(key, response)).prf()
}

/// Micro-aggregates metric sums over any number of key/response universes.
/// With a single `add` this reduces to plain scoring, so the standalone
/// metric functions and the accumulator can never disagree.
#[derive(Debug, Clone)]
pub struct MetricAccumulator {
    mode: SingletonMode,
    universes: usize,
    muc: RatioSums,
    b_cubed: RatioSums,
    ceaf_e: RatioSums,
    lea: RatioSums,
}

impl MetricAccumulator {
    pub fn new(mode: SingletonMode) -> Self {
        MetricAccumulator {
            mode,
            universes: 0,
            muc: RatioSums::default(),
            b_cubed: RatioSums::default(),
            ceaf_e: RatioSums::default(),
            lea: RatioSums::default(),
        }
    }

    pub fn add(&mut self, key: &Clustering, response: &Clustering) {
        let (key, response) = match self.mode {
            SingletonMode::With => (key.clone(), response.clone()),
            SingletonMode::Without => strip_singletons(key, response),
        };
        let u = close(&key, &response);
        self.universes += 1;
        self.muc.add(muc_sums(&u));
        self.b_cubed.add(b_cubed_sums(&u));
        self.ceaf_e.add(ceaf_e_sums(&u));
        self.lea.add(lea_sums(&u));
    }

    pub fn universes(&self) -> usize {
        self.universes
    }

    pub fn report(&self) -> ScoreReport {
        let muc = self.muc.prf();
        let b_cubed = self.b_cubed.prf();
        let ceaf_e = self.ceaf_e.prf();
        let lea = self.lea.prf();
        let conll_f1 = conll(&muc, &b_cubed, &ceaf_e);
        ScoreReport { singleton_mode: self.mode, muc, b_cubed, ceaf_e, lea, conll_f1 }
    }
}

/// Score one key/response pair under the requested singleton mode.
pub fn score_report(key: &Clustering, response: &Clustering, mode: SingletonMode) -> ScoreReport {
    let mut acc = MetricAccumulator::new(mode);
    acc.add(key, response);
    acc.report()
}
