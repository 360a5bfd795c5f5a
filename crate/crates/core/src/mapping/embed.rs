//! Term embeddings: a file-backed store plus a pluggable fallback embedder.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use super::inventory::match_key;
use crate::util::stable_hash;

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("embedding file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("zero-norm vector for {0:?}")]
    Degenerate(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("no embedding for {} term(s): {}", .0.len(), .0.join(", "))]
    Missing(Vec<String>),
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// `dot(u, v) / (|u| |v|)`.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, EmbedError> {
    if u.len() != v.len() {
        return Err(EmbedError::Dimension {
            expected: u.len(),
            got: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(EmbedError::Degenerate(String::new()));
    }
    Ok(cosine_with_norms(u, nu, v, nv))
}

#[inline]
pub fn cosine_with_norms(u: &[f64], nu: f64, v: &[f64], nv: f64) -> f64 {
    dot(u, v) / (nu * nv)
}

fn unit(term: &str, mut v: Vec<f64>) -> Result<Vec<f64>, EmbedError> {
    let n = norm(&v);
    if n == 0.0 || !n.is_finite() {
        return Err(EmbedError::Degenerate(term.to_string()));
    }
    v.iter_mut().for_each(|x| *x /= n);
    Ok(v)
}

/// Produces vectors for terms the store lacks.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, term: &str) -> Result<Vec<f64>, EmbedError>;
}

/// Signed character-trigram feature hashing, unit-normalized. Deterministic
/// and cheap; a placeholder for a trained biomedical encoder, not a substitute.
#[derive(Debug, Clone, Copy)]
pub struct TrigramEmbedder {
    pub dim: usize,
}

impl Embedder for TrigramEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, term: &str) -> Result<Vec<f64>, EmbedError> {
        let padded: Vec<char> = format!("#{}#", match_key(term)).chars().collect();
        let mut v = vec![0.0; self.dim];
        let mut buf = [0u8; 12];
        for w in padded.windows(3) {
            let mut len = 0;
            for c in w {
                len += c.encode_utf8(&mut buf[len..]).len();
            }
            let h = stable_hash(0x7472_6967, &buf[..len]);
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            v[(h % self.dim as u64) as usize] += sign;
        }
        unit(term, v)
    }
}

/// Unit vectors keyed by [`match_key`] of the term.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Inserts a vector, normalizing it to unit length.
    pub fn insert(&mut self, term: &str, v: Vec<f64>) -> Result<(), EmbedError> {
        if v.len() != self.dim {
            return Err(EmbedError::Dimension {
                expected: self.dim,
                got: v.len(),
            });
        }
        let v = unit(term, v)?;
        self.vectors.insert(match_key(term), v);
        Ok(())
    }

    pub fn get(&self, term: &str) -> Option<&[f64]> {
        self.vectors.get(term).or_else(|| self.vectors.get(&match_key(term))).map(Vec::as_slice)
    }

    /// `dim <d>` then `term TAB d space-separated floats` per line.
    pub fn read<R: BufRead>(r: R) -> Result<Self, EmbedError> {
        let mut lines = r.lines().enumerate();
        let dim = match lines.next() {
            Some((_, l)) => {
                let l = l?;
                l.trim()
                    .strip_prefix("dim ")
                    .and_then(|d| d.trim().parse::<usize>().ok())
                    .filter(|&d| d > 0)
                    .ok_or(EmbedError::Parse {
                        line: 1,
                        message: "expected \"dim <d>\" header".into(),
                    })?
            }
            None => {
                return Err(EmbedError::Parse {
                    line: 1,
                    message: "empty embedding file".into(),
                })
            }
        };
        let mut store = Self::new(dim);
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| EmbedError::Parse { line: i + 1, message };
            let (term, nums) = line.split_once('\t').ok_or_else(|| bad("expected term<TAB>vector".into()))?;
            let v: Vec<f64> = nums
                .split_whitespace()
                .map(|x| x.parse::<f64>().map_err(|e| bad(format!("bad float {x:?}: {e}"))))
                .collect::<Result<_, _>>()?;
            if v.len() != dim {
                return Err(bad(format!("expected {dim} values, got {}", v.len())));
            }
            if store.vectors.contains_key(&match_key(term)) {
                return Err(bad(format!("duplicate term {term:?}")));
            }
            store.insert(term, v).map_err(|e| bad(e.to_string()))?;
        }
        Ok(store)
    }

    pub fn write<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "dim {}", self.dim)?;
        let mut terms: Vec<&String> = self.vectors.keys().collect();
        terms.sort();
        for t in terms {
            let v: Vec<String> = self.vectors[t].iter().map(|x| format!("{x}")).collect();
            writeln!(w, "{t}\t{}", v.join(" "))?;
        }
        w.flush()
    }
}

/// Store lookups with an optional fallback for absent terms.
pub struct Vectors<'a> {
    pub store: &'a EmbeddingStore,
    pub fallback: Option<&'a dyn Embedder>,
}

impl<'a> Vectors<'a> {
    pub fn store_only(store: &'a EmbeddingStore) -> Self {
        Self { store, fallback: None }
    }

    pub fn dim(&self) -> usize {
        self.store.dim()
    }

    /// Vectors for every term, or the full list of terms that have none.
    pub fn resolve<'t, I>(&self, terms: I) -> Result<Vec<Vec<f64>>, EmbedError>
    where
        I: IntoIterator<Item = &'t str>,
    {
        let mut out = Vec::new();
        let mut missing = Vec::new();
        for t in terms {
            match self.store.get(t) {
                Some(v) => out.push(v.to_vec()),
                None => match self.fallback {
                    Some(e) => {
                        if e.dim() != self.store.dim() && !self.store.is_empty() {
                            return Err(EmbedError::Dimension {
                                expected: self.store.dim(),
                                got: e.dim(),
                            });
                        }
                        out.push(e.embed(t)?)
                    }
                    None => missing.push(t.to_string()),
                },
            }
        }
        if missing.is_empty() {
            Ok(out)
        } else {
            missing.sort();
            missing.dedup();
            Err(EmbedError::Missing(missing))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_examples() {
        assert!((cosine(&[0.3, -2.0], &[0.3, -2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - 0.70710678).abs() < 1e-8);
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 1.0]), Err(EmbedError::Degenerate(_))));
    }

    #[test]
    fn store_round_trip() {
        let src = "dim 3\nfever\t3 0 4\nHead Pain\t0 1 0\n";
        let s = EmbeddingStore::read(src.as_bytes()).unwrap();
        assert_eq!(s.dim(), 3);
        assert_eq!(s.get("fever").unwrap(), &[0.6, 0.0, 0.8]);
        assert!(s.get("head pain").is_some());
        for t in ["fever", "head pain"] {
            assert!((norm(s.get(t).unwrap()) - 1.0).abs() < 1e-6);
        }
        let mut out = Vec::new();
        s.write(&mut out).unwrap();
        let back = EmbeddingStore::read(&out[..]).unwrap();
        assert_eq!(back.get("fever"), s.get("fever"));
    }

    #[test]
    fn bad_files() {
        assert!(EmbeddingStore::read("dims 3\n".as_bytes()).is_err());
        assert!(EmbeddingStore::read("dim 2\nx\t1\n".as_bytes()).is_err());
        assert!(EmbeddingStore::read("dim 2\nx\t0 0\n".as_bytes()).is_err());
        assert!(EmbeddingStore::read("dim 2\nx\t1 0\nX\t0 1\n".as_bytes()).is_err());
    }

    #[test]
    fn missing_terms_are_listed() {
        let s = EmbeddingStore::read("dim 2\nfever\t1 0\n".as_bytes()).unwrap();
        let v = Vectors::store_only(&s);
        match v.resolve(["fever", "zz", "aa", "zz"]) {
            Err(EmbedError::Missing(m)) => assert_eq!(m, vec!["aa", "zz"]),
            other => panic!("{other:?}"),
        }
        let tri = TrigramEmbedder { dim: 2 };
        let v = Vectors {
            store: &s,
            fallback: Some(&tri),
        };
        assert_eq!(v.resolve(["fever", "zz"]).unwrap().len(), 2);
    }

    #[test]
    fn trigram_is_deterministic_and_unit() {
        let e = TrigramEmbedder { dim: 64 };
        let a = e.embed("sore throat").unwrap();
        assert_eq!(a, e.embed("Sore  Throat").unwrap());
        assert!((norm(&a) - 1.0).abs() < 1e-12);
        let near = cosine(&a, &e.embed("sore throats").unwrap()).unwrap();
        let far = cosine(&a, &e.embed("diarrhea").unwrap()).unwrap();
        assert!(near > far);
    }
}
