//! Plain-text numeric artifact files: token vectors, fused mention
//! vectors, the retrieval projection, and the pairwise scorer.
//!
//! All floats are written with Rust's shortest round-trip formatting and
//! parsed with `str::parse::<f64>`, so write → read is bit-exact and
//! locale-independent. Non-finite values are rejected in both directions.
//!
//! Formats:
//! - token vectors:   `dim=<d>` header, then `doc-id<TAB>token-index<TAB>v1,...,vd`
//! - fused vectors:   `dim=<4d>` header, then `mention-id<TAB>fallback(0|1)<TAB>v1,...`
//! - projection:      `p=<p> d4=<4d> seed=<s>` header, then p rows of 4d reals
//! - pair scorer:     `input=<i> hidden=<h> seed=<s>` header, then the
//!   parameter blocks in declaration order: w1 rows, b1, w2, b2

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use cdecr_core::pairscore::PairScorer;
use cdecr_core::represent::FusedVector;
use cdecr_core::retrieve::Projection;

#[derive(Debug, thiserror::Error)]
pub enum VectorFileError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected header `{expected}`, got `{got}`")]
    BadHeader { line: usize, expected: &'static str, got: String },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: vector has {got} values, expected {expected}")]
    WrongWidth { line: usize, expected: usize, got: usize },
    #[error("line {line}: non-finite value `{value}`")]
    NonFinite { line: usize, value: String },
    #[error("file ended before all {expected} declared rows were read")]
    Truncated { expected: usize },
}

fn fmt_vec(v: &[f64], sep: char) -> String {
    let mut out = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            out.push(sep);
        }
        out.push_str(&x.to_string());
    }
    out
}

fn check_finite(v: &[f64]) -> Result<(), VectorFileError> {
    for x in v {
        if !x.is_finite() {
            return Err(VectorFileError::NonFinite { line: 0, value: x.to_string() });
        }
    }
    Ok(())
}

fn parse_reals(text: &str, sep: char, line: usize) -> Result<Vec<f64>, VectorFileError> {
    text.split(sep)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let v: f64 = s.parse().map_err(|_| VectorFileError::Malformed {
                line,
                message: format!("bad real `{s}`"),
            })?;
            if !v.is_finite() {
                return Err(VectorFileError::NonFinite { line, value: s.to_string() });
            }
            Ok(v)
        })
        .collect()
}

// ---------------------------------------------------------------- tokens

pub fn write_token_vectors<W: Write>(
    mut w: W,
    dim: usize,
    vectors: &BTreeMap<(String, usize), Vec<f64>>,
) -> Result<(), VectorFileError> {
    writeln!(w, "dim={dim}")?;
    for ((doc, index), v) in vectors {
        check_finite(v)?;
        if v.len() != dim {
            return Err(VectorFileError::WrongWidth { line: 0, expected: dim, got: v.len() });
        }
        writeln!(w, "{doc}\t{index}\t{}", fmt_vec(v, ','))?;
    }
    Ok(())
}

pub fn read_token_vectors<R: BufRead>(
    r: R,
) -> Result<(usize, BTreeMap<(String, usize), Vec<f64>>), VectorFileError> {
    let mut lines = r.lines().enumerate();
    let (_, first) = lines.next().ok_or(VectorFileError::BadHeader {
        line: 1,
        expected: "dim=<d>",
        got: "<empty file>".into(),
    })?;
    let first = first?;
    let dim: usize = first
        .strip_prefix("dim=")
        .and_then(|s| s.parse().ok())
        .ok_or(VectorFileError::BadHeader { line: 1, expected: "dim=<d>", got: first.clone() })?;
    let mut out = BTreeMap::new();
    for (ln, line) in lines {
        let lineno = ln + 1;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut cols = line.splitn(3, '\t');
        let (doc, index, values) = match (cols.next(), cols.next(), cols.next()) {
            (Some(d), Some(i), Some(v)) => (d, i, v),
            _ => {
                return Err(VectorFileError::Malformed {
                    line: lineno,
                    message: "expected doc<TAB>index<TAB>values".into(),
                })
            }
        };
        let index: usize = index.parse().map_err(|_| VectorFileError::Malformed {
            line: lineno,
            message: format!("bad token index `{index}`"),
        })?;
        let v = parse_reals(values, ',', lineno)?;
        if v.len() != dim {
            return Err(VectorFileError::WrongWidth { line: lineno, expected: dim, got: v.len() });
        }
        out.insert((doc.to_string(), index), v);
    }
    Ok((dim, out))
}

// ----------------------------------------------------------------- fused

pub fn write_fused<W: Write>(
    mut w: W,
    vectors: &BTreeMap<String, FusedVector>,
) -> Result<(), VectorFileError> {
    let dim = vectors.values().next().map_or(0, |f| f.values.len());
    writeln!(w, "dim={dim}")?;
    for (id, f) in vectors {
        check_finite(&f.values)?;
        if f.values.len() != dim {
            return Err(VectorFileError::WrongWidth {
                line: 0,
                expected: dim,
                got: f.values.len(),
            });
        }
        writeln!(w, "{id}\t{}\t{}", u8::from(f.fallback), fmt_vec(&f.values, ','))?;
    }
    Ok(())
}

pub fn read_fused<R: BufRead>(
    r: R,
) -> Result<(usize, BTreeMap<String, FusedVector>), VectorFileError> {
    let mut lines = r.lines().enumerate();
    let (_, first) = lines.next().ok_or(VectorFileError::BadHeader {
        line: 1,
        expected: "dim=<4d>",
        got: "<empty file>".into(),
    })?;
    let first = first?;
    let dim: usize = first
        .strip_prefix("dim=")
        .and_then(|s| s.parse().ok())
        .ok_or(VectorFileError::BadHeader { line: 1, expected: "dim=<4d>", got: first.clone() })?;
    let mut out = BTreeMap::new();
    for (ln, line) in lines {
        let lineno = ln + 1;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut cols = line.splitn(3, '\t');
        let (id, flag, values) = match (cols.next(), cols.next(), cols.next()) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => {
                return Err(VectorFileError::Malformed {
                    line: lineno,
                    message: "expected mention<TAB>fallback<TAB>values".into(),
                })
            }
        };
        let fallback = match flag {
            "0" => false,
            "1" => true,
            other => {
                return Err(VectorFileError::Malformed {
                    line: lineno,
                    message: format!("fallback flag must be 0 or 1, got `{other}`"),
                })
            }
        };
        let v = parse_reals(values, ',', lineno)?;
        if v.len() != dim {
            return Err(VectorFileError::WrongWidth { line: lineno, expected: dim, got: v.len() });
        }
        out.insert(
            id.to_string(),
            FusedVector { mention_id: id.to_string(), values: v, fallback },
        );
    }
    Ok((dim, out))
}

// ------------------------------------------------------------ projection

pub fn write_projection<W: Write>(
    mut w: W,
    projection: &Projection,
    seed: u64,
) -> Result<(), VectorFileError> {
    writeln!(w, "p={} d4={} seed={}", projection.output_dim(), projection.input_dim(), seed)?;
    for row in &projection.weights {
        check_finite(row)?;
        writeln!(w, "{}", fmt_vec(row, ' '))?;
    }
    Ok(())
}

pub fn read_projection<R: BufRead>(r: R) -> Result<(Projection, u64), VectorFileError> {
    let mut lines = r.lines().enumerate();
    let (_, first) = lines.next().ok_or(VectorFileError::BadHeader {
        line: 1,
        expected: "p=<p> d4=<4d> seed=<s>",
        got: "<empty file>".into(),
    })?;
    let first = first?;
    let header: BTreeMap<&str, &str> =
        first.split_whitespace().filter_map(|kv| kv.split_once('=')).collect();
    let field = |name: &str| -> Result<u64, VectorFileError> {
        header.get(name).and_then(|s| s.parse().ok()).ok_or(VectorFileError::BadHeader {
            line: 1,
            expected: "p=<p> d4=<4d> seed=<s>",
            got: first.clone(),
        })
    };
    let p = field("p")? as usize;
    let d4 = field("d4")? as usize;
    let seed = field("seed")?;
    let mut weights = Vec::with_capacity(p);
    for (ln, line) in lines {
        let lineno = ln + 1;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let row = parse_reals(&line, ' ', lineno)?;
        if row.len() != d4 {
            return Err(VectorFileError::WrongWidth { line: lineno, expected: d4, got: row.len() });
        }
        weights.push(row);
        if weights.len() == p {
            break;
        }
    }
    if weights.len() != p {
        return Err(VectorFileError::Truncated { expected: p });
    }
    Ok((Projection { weights }, seed))
}

// ---------------------------------------------------------------- scorer

pub fn write_scorer<W: Write>(
    mut w: W,
    scorer: &PairScorer,
    seed: u64,
) -> Result<(), VectorFileError> {
    writeln!(w, "input={} hidden={} seed={}", scorer.input_dim(), scorer.hidden_dim(), seed)?;
    for row in &scorer.w1 {
        check_finite(row)?;
        writeln!(w, "{}", fmt_vec(row, ' '))?;
    }
    check_finite(&scorer.b1)?;
    writeln!(w, "{}", fmt_vec(&scorer.b1, ' '))?;
    check_finite(&scorer.w2)?;
    writeln!(w, "{}", fmt_vec(&scorer.w2, ' '))?;
    check_finite(&[scorer.b2])?;
    writeln!(w, "{}", scorer.b2)?;
    Ok(())
}

pub fn read_scorer<R: BufRead>(r: R) -> Result<(PairScorer, u64), VectorFileError> {
    let mut lines = r.lines().enumerate();
    let (_, first) = lines.next().ok_or(VectorFileError::BadHeader {
        line: 1,
        expected: "input=<i> hidden=<h> seed=<s>",
        got: "<empty file>".into(),
    })?;
    let first = first?;
    let header: BTreeMap<&str, &str> =
        first.split_whitespace().filter_map(|kv| kv.split_once('=')).collect();
    let field = |name: &str| -> Result<u64, VectorFileError> {
        header.get(name).and_then(|s| s.parse().ok()).ok_or(VectorFileError::BadHeader {
            line: 1,
            expected: "input=<i> hidden=<h> seed=<s>",
            got: first.clone(),
        })
    };
    let input = field("input")? as usize;
    let hidden = field("hidden")? as usize;
    let seed = field("seed")?;
    let expected_rows = hidden + 3;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(expected_rows);
    for (ln, line) in lines {
        let lineno = ln + 1;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        rows.push(parse_reals(&line, ' ', lineno)?);
        if rows.len() == expected_rows {
            break;
        }
    }
    if rows.len() != expected_rows {
        return Err(VectorFileError::Truncated { expected: expected_rows });
    }
    let b2_row = rows.pop().expect("length checked");
    let w2 = rows.pop().expect("length checked");
    let b1 = rows.pop().expect("length checked");
    let w1 = rows;
    for (i, row) in w1.iter().enumerate() {
        if row.len() != input {
            return Err(VectorFileError::WrongWidth { line: i + 2, expected: input, got: row.len() });
        }
    }
    if b1.len() != hidden || w2.len() != hidden || b2_row.len() != 1 {
        return Err(VectorFileError::Malformed {
            line: 0,
            message: "parameter block widths do not match the declared layer sizes".into(),
        });
    }
    Ok((PairScorer { w1, b1, w2, b2: b2_row[0] }, seed))
}

#[cfg(test)]
mod tests {
    use std::io::Cursor;

    use super::*;

    #[test]
    fn token_vectors_round_trip_bit_exactly() {
        let mut vectors = BTreeMap::new();
        // values chosen to stress shortest-float printing
        vectors.insert(("d0".to_string(), 0), vec![0.1, -1.0 / 3.0, 1e-300]);
        vectors.insert(("d1".to_string(), 7), vec![f64::MIN_POSITIVE, 2.0_f64.sqrt(), -0.0]);
        let mut buf = Vec::new();
        write_token_vectors(&mut buf, 3, &vectors).unwrap();
        let (dim, back) = read_token_vectors(Cursor::new(&buf)).unwrap();
        assert_eq!(dim, 3);
        assert_eq!(back, vectors);
        for (a, b) in back.values().flatten().zip(vectors.values().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn token_vector_width_is_enforced() {
        let buf = "dim=2\nd0\t0\t1.0,2.0,3.0\n";
        assert!(matches!(
            read_token_vectors(Cursor::new(buf)),
            Err(VectorFileError::WrongWidth { line: 2, expected: 2, got: 3 })
        ));
    }

    #[test]
    fn non_finite_values_are_rejected_on_read() {
        let buf = "dim=1\nd0\t0\tNaN\n";
        assert!(matches!(
            read_token_vectors(Cursor::new(buf)),
            Err(VectorFileError::NonFinite { .. })
        ));
    }

    #[test]
    fn fused_round_trip_keeps_fallback_flags() {
        let mut vectors = BTreeMap::new();
        vectors.insert(
            "m0".to_string(),
            FusedVector { mention_id: "m0".into(), values: vec![1.5, -2.25], fallback: true },
        );
        vectors.insert(
            "m1".to_string(),
            FusedVector { mention_id: "m1".into(), values: vec![0.0, 3.125], fallback: false },
        );
        let mut buf = Vec::new();
        write_fused(&mut buf, &vectors).unwrap();
        let (dim, back) = read_fused(Cursor::new(&buf)).unwrap();
        assert_eq!(dim, 2);
        assert_eq!(back, vectors);
    }

    #[test]
    fn projection_round_trip_preserves_weights_and_seed() {
        let projection = Projection { weights: vec![vec![0.25, -0.5, 0.1], vec![1.0, 0.0, -1.0]] };
        let mut buf = Vec::new();
        write_projection(&mut buf, &projection, 42).unwrap();
        let (back, seed) = read_projection(Cursor::new(&buf)).unwrap();
        assert_eq!(back, projection);
        assert_eq!(seed, 42);
    }

    #[test]
    fn truncated_projection_is_detected() {
        let buf = "p=3 d4=2 seed=0\n1 0\n0 1\n";
        assert!(matches!(
            read_projection(Cursor::new(buf)),
            Err(VectorFileError::Truncated { expected: 3 })
        ));
    }

    #[test]
    fn scorer_round_trip_is_exact() {
        let scorer = PairScorer::with_hidden(6, 4, 9);
        let mut buf = Vec::new();
        write_scorer(&mut buf, &scorer, 9).unwrap();
        let (back, seed) = read_scorer(Cursor::new(&buf)).unwrap();
        assert_eq!(seed, 9);
        assert_eq!(back, scorer);
        // identical forward pass, bit for bit
        let features = vec![0.3; 6];
        assert_eq!(
            scorer.score(&features).unwrap().to_bits(),
            back.score(&features).unwrap().to_bits()
        );
    }

    #[test]
    fn scorer_header_mismatch_is_an_error() {
        let scorer = PairScorer::with_hidden(6, 4, 9);
        let mut buf = Vec::new();
        write_scorer(&mut buf, &scorer, 9).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("input=6", "input=5");
        assert!(matches!(
            read_scorer(Cursor::new(text.as_bytes())),
            Err(VectorFileError::WrongWidth { .. })
        ));
    }
}
