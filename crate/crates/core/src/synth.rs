//! Deterministic synthetic corpora.
//!
//! [`generate`] builds a tagged corpus of filler words with embedded entities
//! drawn from per-class lexicons. Each class lexicon shares a suffix family
//! so that held-out entity words stay recognizable from their characters.
//! [`twin_corpus`] builds untagged text in which selected words have a twin
//! with an identical context distribution, for checking word embeddings.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dataset, Sentence, Tag};
use crate::{rng, Error, Result};

const FILLERS: &[&str] = &[
    "the", "patient", "was", "given", "for", "and", "with", "after", "before", "his", "her", "a", "of", "on",
    "in", "to", "noted", "reports", "denies", "history", "showed", "daily", "twice", "started", "stopped",
    "admitted", "discharged", "mild", "severe", "chronic", "acute", "left", "right", "no", "signs", "which",
    "improved", "worsened", "during", "stay", "morning", "evening", "then", "also", "has", "had", "is", "by",
    "from", "at", "per", "week", "day", "plan", "continue", "monitor", "follow", "up", "clinic", "review",
];

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub classes: Vec<String>,
    /// One lexicon per class; pairwise disjoint and disjoint from `fillers`.
    pub lexicons: Vec<Vec<String>>,
    pub fillers: Vec<String>,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability that an eligible position starts an entity.
    pub density: f64,
    pub train_size: usize,
    pub test_size: usize,
    /// Fraction of test entity words drawn from the part of each lexicon
    /// that training also sees; the rest are unseen in training.
    pub test_overlap: f64,
    /// Fraction of each lexicon reserved for test-only words.
    pub held_out: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        let suffixes: [(&str, &[&str]); 3] = [
            ("problem", &["itis", "oma", "algia", "osis"]),
            ("test", &["gram", "scopy", "metry", "assay"]),
            ("treatment", &["ine", "mab", "cillin", "azole"]),
        ];
        let mut r = rng::stream(0, &[b"synth-lexicon"]);
        let mut taken = alloc::collections::BTreeSet::new();
        let lexicons = suffixes
            .iter()
            .map(|(_, sfx)| {
                let mut words = Vec::new();
                while words.len() < 40 {
                    let w = format!("{}{}", stem(&mut r), sfx[words.len() % sfx.len()]);
                    if taken.insert(w.clone()) {
                        words.push(w);
                    }
                }
                words
            })
            .collect();
        Self {
            classes: suffixes.iter().map(|(c, _)| c.to_string()).collect(),
            lexicons,
            fillers: FILLERS.iter().map(|s| s.to_string()).collect(),
            min_len: 5,
            max_len: 15,
            density: 0.25,
            train_size: 200,
            test_size: 50,
            test_overlap: 0.8,
            held_out: 0.2,
            seed: 1,
        }
    }
}

fn stem(r: &mut ChaCha8Rng) -> String {
    let syllables = r.gen_range(2..=3);
    (0..syllables)
        .map(|_| format!("{}{}", pick(r, ONSETS), pick(r, VOWELS)))
        .collect()
}

fn pick<'a, T: ?Sized>(r: &mut ChaCha8Rng, items: &'a [&'a T]) -> &'a T {
    items[r.gen_range(0..items.len())]
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.classes.is_empty() || self.classes.len() != self.lexicons.len() {
            return bad("one lexicon per class is required".into());
        }
        if self.fillers.is_empty() || self.lexicons.iter().any(Vec::is_empty) {
            return bad("lexicons must be non-empty".into());
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return bad("sentence length range must satisfy 1 <= min <= max".into());
        }
        if !(0.0..1.0).contains(&self.density) {
            return bad("density must lie in [0, 1)".into());
        }
        if !(0.0..=1.0).contains(&self.test_overlap) || !(0.0..1.0).contains(&self.held_out) {
            return bad("test_overlap must lie in [0, 1] and held_out in [0, 1)".into());
        }
        let mut seen = alloc::collections::BTreeSet::new();
        for w in self.fillers.iter().chain(self.lexicons.iter().flatten()) {
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return bad(format!("invalid lexicon word {w:?}"));
            }
            if !seen.insert(w.as_str()) {
                return bad(format!("word {w:?} appears in more than one lexicon"));
            }
        }
        Ok(())
    }

    /// Split point of a class lexicon: words before it may occur in training.
    fn seen_len(&self, class: usize) -> usize {
        let n = self.lexicons[class].len();
        let held = libm::floor(self.held_out * n as f64) as usize;
        (n - held).max(1)
    }
}

/// Generates `(train, test)` corpora.
pub fn generate(spec: &SynthSpec) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    let mut r = rng::stream(spec.seed, &[b"synth"]);
    let train = (0..spec.train_size).map(|_| sentence(spec, &mut r, false)).collect::<Result<_>>()?;
    let test = (0..spec.test_size).map(|_| sentence(spec, &mut r, true)).collect::<Result<_>>()?;
    Ok((train, test))
}

fn entity_word(spec: &SynthSpec, r: &mut ChaCha8Rng, class: usize, test: bool) -> String {
    let lex = &spec.lexicons[class];
    let seen = spec.seen_len(class);
    let from_unseen = test && seen < lex.len() && r.gen::<f64>() >= spec.test_overlap;
    let i = if from_unseen { r.gen_range(seen..lex.len()) } else { r.gen_range(0..seen) };
    lex[i].clone()
}

fn sentence(spec: &SynthSpec, r: &mut ChaCha8Rng, test: bool) -> Result<Sentence> {
    let len = r.gen_range(spec.min_len..=spec.max_len);
    let mut words = Vec::with_capacity(len);
    let mut tags = Vec::with_capacity(len);
    while words.len() < len {
        let room = len - words.len();
        if r.gen::<f64>() < spec.density {
            let roll = r.gen::<f64>();
            let span = if roll < 0.6 { 1 } else if roll < 0.9 { 2 } else { 3 }.min(room);
            let class = r.gen_range(0..spec.classes.len());
            for k in 0..span {
                words.push(entity_word(spec, r, class, test));
                tags.push(if k == 0 { Tag::begin(class) } else { Tag::inside(class) });
            }
        }
        // A filler after every entity keeps neighbouring entities apart.
        if words.len() < len {
            words.push(pick_string(r, &spec.fillers));
            tags.push(Tag::OUTSIDE);
        }
    }
    Sentence::tagged(&words, &tags)
}

fn pick_string(r: &mut ChaCha8Rng, items: &[String]) -> String {
    items[r.gen_range(0..items.len())].clone()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwinSpec {
    pub base_words: usize,
    /// The first `twins` base words each get a twin.
    pub twins: usize,
    /// Out-degree of the word-to-word Markov chain.
    pub successors: usize,
    pub sentences: usize,
    pub length: usize,
    pub seed: u64,
}

impl Default for TwinSpec {
    fn default() -> Self {
        Self { base_words: 100, twins: 10, successors: 4, sentences: 2000, length: 20, seed: 1 }
    }
}

/// Text from a sparse random Markov chain over `w000, w001, …` in which
/// every occurrence of a twinned word is swapped for its twin with
/// probability one half. Returns the sentences and the twin pairs.
pub fn twin_corpus(spec: &TwinSpec) -> Result<(Vec<Vec<String>>, Vec<(String, String)>)> {
    if spec.base_words < 2 || spec.twins > spec.base_words || spec.successors == 0 || spec.length == 0 {
        return Err(Error::Config("twin corpus needs words, successors and a positive length".into()));
    }
    let name = |i: usize| format!("w{i:03}");
    let mut r = rng::stream(spec.seed, &[b"twins"]);
    let next: Vec<Vec<usize>> = (0..spec.base_words)
        .map(|_| (0..spec.successors).map(|_| r.gen_range(0..spec.base_words)).collect())
        .collect();
    let mut corpus = Vec::with_capacity(spec.sentences);
    for _ in 0..spec.sentences {
        let mut w = r.gen_range(0..spec.base_words);
        let mut s = Vec::with_capacity(spec.length);
        for _ in 0..spec.length {
            let twin = w < spec.twins && r.gen::<bool>();
            s.push(if twin { format!("{}t", name(w)) } else { name(w) });
            w = next[w][r.gen_range(0..spec.successors)];
        }
        corpus.push(s);
    }
    let pairs = (0..spec.twins).map(|i| (name(i), format!("{}t", name(i)))).collect();
    Ok((corpus, pairs))
}
