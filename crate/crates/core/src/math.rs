//! Small numeric helpers shared across modules.
//!
//! Float transcendentals go through `libm` so the crate builds without
//! `std`; the vector helpers centralize the cosine/norm arithmetic used by
//! retrieval, clustering, and the classifier.

use alloc::vec::Vec;

pub fn fabs(x: f64) -> f64 {
    libm::fabs(x)
}

pub fn fmax(a: f64, b: f64) -> f64 {
    libm::fmax(a, b)
}

pub fn fmin(a: f64, b: f64) -> f64 {
    libm::fmin(a, b)
}

pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

/// Logistic sigmoid, clamped to the open interval (0, 1) so downstream
/// cross-entropy terms and probability invariants never see an exact 0 or 1
/// even when the argument saturates in f64.
pub fn sigmoid(x: f64) -> f64 {
    let p = 1.0 / (1.0 + exp(-x));
    fmin(fmax(p, 1e-15), 1.0 - 1e-15)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

/// Cosine similarity; zero-norm inputs yield 0 rather than NaN.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na <= 0.0 || nb <= 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

/// Scale `v` to unit length in place; a zero vector is left untouched.
pub fn normalize(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

/// n choose 2 — the number of undirected links inside a cluster of size n.
pub fn choose2(n: usize) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2
}

/// SplitMix64 step: a compact, well-distributed 64-bit mixing function used
/// for hash-derived features (not for trainable randomness, which uses
/// ChaCha20).
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// FNV-1a 64-bit hash of a byte string.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Map a u64 to a double in [-1, 1).
pub fn unit_interval_signed(x: u64) -> f64 {
    ((x >> 11) as f64) / ((1u64 << 53) as f64) * 2.0 - 1.0
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn concat(parts: &[&[f64]]) -> Vec<f64> {
    let mut out = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
    for p in parts {
        out.extend_from_slice(p);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_stays_inside_open_interval() {
        assert!(sigmoid(1000.0) < 1.0);
        assert!(sigmoid(-1000.0) > 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cosine_is_scale_invariant_and_zero_safe() {
        let a = [1.0, 2.0, -3.0];
        let b = [0.5, -1.0, 2.0];
        let a4: Vec<f64> = a.iter().map(|x| x * 4.0).collect();
        assert!((cosine(&a, &b) - cosine(&a4, &b)).abs() < 1e-12);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]), 0.0);
    }

    #[test]
    fn choose2_matches_definition() {
        assert_eq!(choose2(0), 0);
        assert_eq!(choose2(1), 0);
        assert_eq!(choose2(2), 1);
        assert_eq!(choose2(5), 10);
    }

    #[test]
    fn unit_interval_signed_bounds() {
        for x in [0u64, 1, u64::MAX, 0x9e3779b97f4a7c15] {
            let v = unit_interval_signed(x);
            assert!((-1.0..1.0).contains(&v));
        }
    }
}
