//! Hand-crafted token features, each family encoded by a small trainable
//! lookup table.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::corpus::Sentence;
use crate::math::Matrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FeatureFamily {
    /// lower / upper / title / mixed / none
    CasePattern,
    /// which of letters, digits and punctuation occur
    Composition,
    /// character count, 10 and above share a bucket
    LengthBucket,
    Prefix3,
    Suffix3,
    /// word / number / mixed / symbol / abbreviation plus sentence position
    TokenClass,
}

impl FeatureFamily {
    /// The six families, 146 dimensions in total.
    pub const DEFAULT: [FeatureFamily; 6] = [
        FeatureFamily::CasePattern,
        FeatureFamily::Composition,
        FeatureFamily::LengthBucket,
        FeatureFamily::Prefix3,
        FeatureFamily::Suffix3,
        FeatureFamily::TokenClass,
    ];

    pub fn dim(self) -> usize {
        match self {
            FeatureFamily::CasePattern | FeatureFamily::Composition => 8,
            FeatureFamily::LengthBucket => 10,
            FeatureFamily::Prefix3 | FeatureFamily::Suffix3 | FeatureFamily::TokenClass => 40,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureFamily::CasePattern => "case",
            FeatureFamily::Composition => "composition",
            FeatureFamily::LengthBucket => "length",
            FeatureFamily::Prefix3 => "prefix3",
            FeatureFamily::Suffix3 => "suffix3",
            FeatureFamily::TokenClass => "class",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::DEFAULT.into_iter().find(|f| f.name() == name)
    }

    /// Value of this feature for the token at `position`.
    pub fn value(self, sentence: &Sentence, position: usize) -> String {
        let word = sentence.tokens()[position].surface();
        match self {
            FeatureFamily::CasePattern => case_pattern(word).to_string(),
            FeatureFamily::Composition => composition(word),
            FeatureFamily::LengthBucket => word.chars().count().min(10).to_string(),
            FeatureFamily::Prefix3 => word.to_lowercase().chars().take(3).collect(),
            FeatureFamily::Suffix3 => {
                let lower: Vec<char> = word.to_lowercase().chars().collect();
                lower[lower.len().saturating_sub(3)..].iter().collect()
            }
            FeatureFamily::TokenClass => {
                let place = match (position == 0, position + 1 == sentence.len()) {
                    (true, true) => "only",
                    (true, false) => "first",
                    (false, true) => "last",
                    (false, false) => "mid",
                };
                alloc::format!("{}|{}", token_class(word), place)
            }
        }
    }
}

fn case_pattern(word: &str) -> &'static str {
    let letters: Vec<char> = word.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.is_empty() {
        "none"
    } else if letters.iter().all(|c| c.is_lowercase()) {
        "lower"
    } else if letters.iter().all(|c| c.is_uppercase()) {
        "upper"
    } else if letters[0].is_uppercase() && letters[1..].iter().all(|c| c.is_lowercase()) {
        "title"
    } else {
        "mixed"
    }
}

fn composition(word: &str) -> String {
    let mut s = String::new();
    if word.chars().any(char::is_alphabetic) {
        s.push('a');
    }
    if word.chars().any(|c| c.is_ascii_digit()) {
        s.push('d');
    }
    if word.chars().any(|c| !c.is_alphanumeric()) {
        s.push('p');
    }
    s
}

fn token_class(word: &str) -> &'static str {
    let has_alpha = word.chars().any(char::is_alphabetic);
    let has_digit = word.chars().any(|c| c.is_ascii_digit());
    let letters = word.chars().filter(|c| c.is_alphabetic()).count();
    if !word.chars().any(char::is_alphanumeric) {
        "symbol"
    } else if !has_alpha && word.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',') {
        "number"
    } else if has_alpha && has_digit {
        "mixed"
    } else if (word.contains('.') && has_alpha)
        || ((2..=5).contains(&letters) && word.chars().filter(|c| c.is_alphabetic()).all(char::is_uppercase))
    {
        "abbreviation"
    } else {
        "word"
    }
}

/// One family's value index and vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyTable {
    pub family: FeatureFamily,
    values: BTreeMap<String, usize>,
    pub vectors: Matrix,
}

impl FamilyTable {
    pub fn values(&self) -> impl Iterator<Item = (&str, usize)> {
        self.values.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn index_of(&self, value: &str) -> Option<usize> {
        self.values.get(value).copied()
    }

    /// Rebuilds a table from value → row pairs and a `rows × dim` matrix.
    pub fn from_parts(family: FeatureFamily, values: BTreeMap<String, usize>, vectors: Matrix) -> Self {
        Self {
            family,
            values,
            vectors,
        }
    }
}

/// Where a family's sub-vector for one token comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureSlot {
    /// Trainable row of the family table.
    Row(usize),
    /// Value unseen when the encoder was built: fixed keyed random vector.
    Unseen(Vec<f64>),
}

/// Trainable encodings for a set of feature families.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureEncoder {
    seed: u64,
    tables: Vec<FamilyTable>,
}

impl FeatureEncoder {
    /// Collects every value occurring in `sentences` and gives each a
    /// uniform `[-1, 1]` vector.
    pub fn build(families: &[FeatureFamily], sentences: &[Sentence], seed: u64) -> Self {
        let tables = families
            .iter()
            .map(|&family| {
                let mut values = BTreeMap::new();
                for s in sentences {
                    for p in 0..s.len() {
                        let n = values.len();
                        values.entry(family.value(s, p)).or_insert(n);
                    }
                }
                let mut vectors = Matrix::zeros(values.len(), family.dim());
                for (value, &row) in &values {
                    vectors
                        .row_mut(row)
                        .copy_from_slice(&Self::keyed(seed, family, value));
                }
                FamilyTable {
                    family,
                    values,
                    vectors,
                }
            })
            .collect();
        Self { seed, tables }
    }

    pub fn from_tables(seed: u64, tables: Vec<FamilyTable>) -> Self {
        Self { seed, tables }
    }

    fn keyed(seed: u64, family: FeatureFamily, value: &str) -> Vec<f64> {
        rng::keyed_uniform(seed, &[b"feature", family.name().as_bytes(), value.as_bytes()], family.dim())
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tables(&self) -> &[FamilyTable] {
        &self.tables
    }

    pub fn tables_mut(&mut self) -> &mut [FamilyTable] {
        &mut self.tables
    }

    pub fn total_dim(&self) -> usize {
        self.tables.iter().map(|t| t.family.dim()).sum()
    }

    pub fn slots(&self, sentence: &Sentence, position: usize) -> Vec<FeatureSlot> {
        self.tables
            .iter()
            .map(|t| {
                let value = t.family.value(sentence, position);
                match t.values.get(&value) {
                    Some(&row) => FeatureSlot::Row(row),
                    None => FeatureSlot::Unseen(Self::keyed(self.seed, t.family, &value)),
                }
            })
            .collect()
    }

    /// Concatenated family sub-vectors for one token.
    pub fn encode(&self, sentence: &Sentence, position: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_dim());
        self.encode_into(&self.slots(sentence, position), &mut out);
        out
    }

    pub fn encode_into(&self, slots: &[FeatureSlot], out: &mut Vec<f64>) {
        for (t, slot) in self.tables.iter().zip(slots) {
            match slot {
                FeatureSlot::Row(r) => out.extend_from_slice(t.vectors.row(*r)),
                FeatureSlot::Unseen(v) => out.extend_from_slice(v),
            }
        }
    }
}
