//! Vocabularies and word-embedding tables.
//!
//! Tables are assembled by concatenating several sources segment by segment.
//! A segment missing from its source is back-filled with a uniform
//! `[-1, 1]` vector drawn from a generator keyed on `(word, segment, seed)`,
//! so assembly is reproducible bit for bit.

mod features;
mod glove;
mod pseudo;

pub use features::{FeatureEncoder, FeatureFamily, FeatureSlot, FamilyTable};
pub use glove::{cooccurrence, train_glove, Cooccurrence, GloveParams, GloveRun};
pub use pseudo::build_pseudo_corpus;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::{rng, Error, Result};

/// Reserved surface of vocabulary index 0.
pub const UNK: &str = "<unk>";

/// Dense word index with `UNK` at 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        let mut index = BTreeMap::new();
        index.insert(UNK.to_string(), 0);
        Self {
            words: alloc::vec![UNK.to_string()],
            index,
        }
    }
}

impl Vocabulary {
    /// Words in first-seen order; duplicates are ignored.
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v = Self::default();
        for w in words {
            v.insert(w.as_ref());
        }
        v
    }

    pub fn insert(&mut self, word: &str) -> usize {
        if let Some(&i) = self.index.get(word) {
            return i;
        }
        let i = self.words.len();
        self.words.push(word.to_string());
        self.index.insert(word.to_string(), i);
        i
    }

    /// Number of entries including `UNK`.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.len() <= 1
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Exact match, then lowercased match. `UNK` itself is never returned.
    pub fn lookup(&self, word: &str) -> Option<usize> {
        self.get(word)
            .or_else(|| self.get(&word.to_lowercase()))
            .filter(|&i| i != 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Pretrained,
    Random,
}

/// Word → vector map with a fixed dimension and per-word provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    index: BTreeMap<String, usize>,
    vectors: Vec<f64>,
    provenance: Vec<Provenance>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("embedding dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            words: Vec::new(),
            index: BTreeMap::new(),
            vectors: Vec::new(),
            provenance: Vec::new(),
        })
    }

    /// Adds `word`. A word already present keeps its first vector and
    /// `false` is returned.
    pub fn insert(&mut self, word: &str, vector: &[f64], provenance: Provenance) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::Dimension {
                context: "embedding vector",
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if self.index.contains_key(word) {
            return Ok(false);
        }
        self.index.insert(word.to_string(), self.words.len());
        self.words.push(word.to_string());
        self.vectors.extend_from_slice(vector);
        self.provenance.push(provenance);
        Ok(true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn vector_at(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index.get(word).map(|&i| self.vector_at(i))
    }

    /// Exact match, then lowercased match.
    pub fn lookup(&self, word: &str) -> Option<&[f64]> {
        self.get(word).or_else(|| self.get(&word.to_lowercase()))
    }

    pub fn provenance(&self, word: &str) -> Option<Provenance> {
        self.index.get(word).map(|&i| self.provenance[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64], Provenance)> {
        self.words
            .iter()
            .enumerate()
            .map(move |(i, w)| (w.as_str(), self.vector_at(i), self.provenance[i]))
    }

    /// Row-major `len × dim` storage in insertion order.
    pub fn as_slice(&self) -> &[f64] {
        &self.vectors
    }
}

/// Random back-fill for one segment of one word.
pub fn backfill_segment(word: &str, segment: usize, dim: usize, seed: u64) -> Vec<f64> {
    rng::keyed_uniform(seed, &[b"segment", word.as_bytes(), &(segment as u64).to_le_bytes()], dim)
}

/// Vector for a word that was never assigned one: every segment back-filled.
pub fn random_word_vector(word: &str, segment_dims: &[usize], seed: u64) -> Vec<f64> {
    let mut v = Vec::with_capacity(segment_dims.iter().sum());
    for (s, &d) in segment_dims.iter().enumerate() {
        v.extend(backfill_segment(word, s, d, seed));
    }
    v
}

/// Concatenates `tables` for every vocabulary entry (in vocabulary order,
/// `UNK` included). A word is pretrained when at least one segment came from
/// a table.
pub fn assemble(vocab: &Vocabulary, tables: &[EmbeddingTable], seed: u64) -> Result<EmbeddingTable> {
    if tables.is_empty() {
        return Err(Error::Empty("embedding tables to assemble"));
    }
    let dim = tables.iter().map(EmbeddingTable::dim).sum();
    let mut out = EmbeddingTable::new(dim)?;
    let mut buf = Vec::with_capacity(dim);
    for (i, word) in vocab.words().iter().enumerate() {
        buf.clear();
        let mut any = false;
        for (s, table) in tables.iter().enumerate() {
            match table.lookup(word).filter(|_| i != 0) {
                Some(v) => {
                    any = true;
                    buf.extend_from_slice(v);
                }
                None => buf.extend(backfill_segment(word, s, table.dim(), seed)),
            }
        }
        let provenance = if any {
            Provenance::Pretrained
        } else {
            Provenance::Random
        };
        out.insert(word, &buf, provenance)?;
    }
    Ok(out)
}

/// Table of fully random vectors over a vocabulary.
pub fn random_table(vocab: &Vocabulary, dim: usize, seed: u64) -> Result<EmbeddingTable> {
    let mut out = EmbeddingTable::new(dim)?;
    for w in vocab.words() {
        out.insert(w, &random_word_vector(w, &[dim], seed), Provenance::Random)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageStats {
    pub total_words: usize,
    pub covered: usize,
    pub percentage: f64,
}

impl CoverageStats {
    pub fn uncovered(&self) -> usize {
        self.total_words - self.covered
    }
}

/// Share of vocabulary words (excluding `UNK`) with a pretrained vector.
pub fn coverage_report(vocab: &Vocabulary, table: &EmbeddingTable) -> CoverageStats {
    let total_words = vocab.len() - 1;
    let covered = vocab.words()[1..]
        .iter()
        .filter(|w| table.provenance(w) == Some(Provenance::Pretrained))
        .count();
    CoverageStats {
        total_words,
        covered,
        percentage: if total_words == 0 {
            0.0
        } else {
            covered as f64 / total_words as f64
        },
    }
}

/// Cosine similarity; zero when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = crate::math::sqrt(crate::math::sum_squares(a));
    let nb = crate::math::sqrt(crate::math::sum_squares(b));
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        crate::math::dot(a, b) / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(dim: usize, rows: &[(&str, &[f64])]) -> EmbeddingTable {
        let mut t = EmbeddingTable::new(dim).unwrap();
        for (w, v) in rows {
            t.insert(w, v, Provenance::Pretrained).unwrap();
        }
        t
    }

    #[test]
    fn vocabulary_reserves_unk() {
        let v = Vocabulary::from_words(["a", "b", "a"]);
        assert_eq!(v.len(), 3);
        assert_eq!(v.get(UNK), Some(0));
        assert_eq!(v.get("b"), Some(2));
        assert_eq!(v.lookup("A"), Some(1));
        assert_eq!(v.lookup(UNK), None);
    }

    #[test]
    fn insert_checks_dimension() {
        let mut t = EmbeddingTable::new(3).unwrap();
        assert!(t.insert("x", &[1.0, 2.0], Provenance::Pretrained).is_err());
        assert!(EmbeddingTable::new(0).is_err());
    }

    #[test]
    fn assemble_concatenates_and_backfills() {
        let cc = table(3, &[("aspirin", &[1.0, 2.0, 3.0]), ("dose", &[4.0, 5.0, 6.0])]);
        let mimic = table(3, &[("aspirin", &[7.0, 8.0, 9.0]), ("mg", &[0.5, 0.5, 0.5])]);
        let vocab = Vocabulary::from_words(["aspirin", "dose", "mg", "zzz"]);
        let out = assemble(&vocab, &[cc, mimic], 42).unwrap();
        assert_eq!(out.dim(), 6);
        assert_eq!(out.get("aspirin").unwrap(), &[1.0, 2.0, 3.0, 7.0, 8.0, 9.0]);
        let dose = out.get("dose").unwrap();
        assert_eq!(&dose[..3], &[4.0, 5.0, 6.0]);
        assert_eq!(&dose[3..], backfill_segment("dose", 1, 3, 42).as_slice());
        let mg = out.get("mg").unwrap();
        assert_eq!(&mg[..3], backfill_segment("mg", 0, 3, 42).as_slice());
        assert_eq!(&mg[3..], &[0.5, 0.5, 0.5]);
        assert_eq!(out.provenance("zzz"), Some(Provenance::Random));
        assert!(out.get("zzz").unwrap().iter().all(|x| (-1.0..=1.0).contains(x)));
        let stats = coverage_report(&vocab, &out);
        assert_eq!((stats.total_words, stats.covered), (4, 3));
        assert_eq!(stats.percentage, 0.75);
    }

    #[test]
    fn assemble_uses_lowercase_fallback() {
        let cc = table(2, &[("aspirin", &[1.0, 1.0])]);
        let out = assemble(&Vocabulary::from_words(["Aspirin"]), &[cc], 0).unwrap();
        assert_eq!(out.get("Aspirin").unwrap(), &[1.0, 1.0]);
        assert!(assemble(&Vocabulary::default(), &[], 0).is_err());
    }

    #[test]
    fn coverage_examples() {
        let words: Vec<String> = (0..10).map(|i| alloc::format!("w{i}")).collect();
        let vocab = Vocabulary::from_words(&words);
        let full = table(1, &words.iter().map(|w| (w.as_str(), &[0.0][..])).collect::<Vec<_>>());
        let out = assemble(&vocab, &[full], 1).unwrap();
        assert_eq!(coverage_report(&vocab, &out).percentage, 1.0);
        let half = table(1, &words[..5].iter().map(|w| (w.as_str(), &[0.0][..])).collect::<Vec<_>>());
        let out = assemble(&vocab, &[half], 1).unwrap();
        let s = coverage_report(&vocab, &out);
        assert_eq!(s.percentage, 0.5);
        assert_eq!(s.covered + s.uncovered(), s.total_words);
    }

    #[test]
    fn cosine_basics() {
        assert!((cosine(&[1.0, 0.0], &[2.0, 0.0]) - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
    }
}
