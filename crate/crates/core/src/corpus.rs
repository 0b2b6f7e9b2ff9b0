//! Tokens, sentences and the B-I-O tag alphabet.
//!
//! A [`TagScheme`] over `n` entity classes has `2n + 1` tags laid out as
//! `O, B-c0, I-c0, B-c1, I-c1, ...`; a [`Tag`] is an index into that layout,
//! so its kind and class can be read without the scheme.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use rand::seq::SliceRandom;

use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag(u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagKind {
    Outside,
    Begin(usize),
    Inside(usize),
}

impl Tag {
    pub const OUTSIDE: Tag = Tag(0);

    pub fn begin(class: usize) -> Tag {
        Tag(1 + 2 * class as u32)
    }

    pub fn inside(class: usize) -> Tag {
        Tag(2 + 2 * class as u32)
    }

    pub fn from_index(index: usize) -> Tag {
        Tag(index as u32)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn kind(self) -> TagKind {
        match self.0 {
            0 => TagKind::Outside,
            i if i % 2 == 1 => TagKind::Begin(((i - 1) / 2) as usize),
            i => TagKind::Inside(((i - 2) / 2) as usize),
        }
    }

    /// Entity class, `None` for `O`.
    pub fn class(self) -> Option<usize> {
        match self.kind() {
            TagKind::Outside => None,
            TagKind::Begin(c) | TagKind::Inside(c) => Some(c),
        }
    }
}

/// Entity classes in a fixed order and the tag alphabet derived from them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagScheme {
    classes: Vec<String>,
}

impl TagScheme {
    pub fn new<S: AsRef<str>>(classes: &[S]) -> Result<Self> {
        let mut out: Vec<String> = Vec::with_capacity(classes.len());
        for c in classes {
            let c = c.as_ref();
            if c.is_empty() || c.chars().any(char::is_whitespace) {
                return Err(Error::Argument(format!("invalid class name `{c}`")));
            }
            if out.iter().any(|o| o == c) {
                return Err(Error::Argument(format!("duplicate class `{c}`")));
            }
            out.push(c.to_string());
        }
        Ok(Self { classes: out })
    }

    /// Scheme whose classes are the sorted distinct class names found in
    /// `tags` (`O` is skipped).
    pub fn infer<'a, I: IntoIterator<Item = &'a str>>(tags: I) -> Result<Self> {
        let mut classes: Vec<&str> = Vec::new();
        for t in tags {
            if t == "O" {
                continue;
            }
            match t.split_once('-') {
                Some(("B" | "I", c)) if !c.is_empty() => {
                    if !classes.contains(&c) {
                        classes.push(c);
                    }
                }
                _ => return Err(Error::UnknownTag(t.to_string())),
            }
        }
        classes.sort_unstable();
        Self::new(&classes)
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Size of the tag alphabet, `2 · classes + 1`.
    pub fn num_tags(&self) -> usize {
        2 * self.classes.len() + 1
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    pub fn parse_tag(&self, s: &str) -> Result<Tag> {
        if s == "O" {
            return Ok(Tag::OUTSIDE);
        }
        let class = |c: &str| self.class_index(c).ok_or_else(|| Error::UnknownTag(s.to_string()));
        match s.split_once('-') {
            Some(("B", c)) => Ok(Tag::begin(class(c)?)),
            Some(("I", c)) => Ok(Tag::inside(class(c)?)),
            _ => Err(Error::UnknownTag(s.to_string())),
        }
    }

    pub fn tag_name(&self, tag: Tag) -> String {
        match tag.kind() {
            TagKind::Outside => "O".to_string(),
            TagKind::Begin(c) => format!("B-{}", self.classes[c]),
            TagKind::Inside(c) => format!("I-{}", self.classes[c]),
        }
    }

    pub fn contains(&self, tag: Tag) -> bool {
        tag.index() < self.num_tags()
    }

    pub fn tags(&self) -> impl Iterator<Item = Tag> {
        (0..self.num_tags()).map(Tag::from_index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    surface: String,
    pub gold: Option<Tag>,
    pub pred: Option<Tag>,
}

impl Token {
    pub fn new(surface: impl Into<String>) -> Result<Self> {
        let surface = surface.into();
        if surface.is_empty() || surface.chars().any(char::is_whitespace) {
            return Err(Error::Argument(format!("invalid token surface {surface:?}")));
        }
        Ok(Self {
            surface,
            gold: None,
            pred: None,
        })
    }

    pub fn with_gold(surface: impl Into<String>, gold: Tag) -> Result<Self> {
        let mut t = Self::new(surface)?;
        t.gold = Some(gold);
        Ok(t)
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    tokens: Vec<Token>,
}

/// An ordered list of sentences.
pub type Dataset = Vec<Sentence>;

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Empty("sentence"));
        }
        Ok(Self { tokens })
    }

    /// Sentence with gold tags from parallel surface / tag slices.
    pub fn tagged<S: AsRef<str>>(surfaces: &[S], tags: &[Tag]) -> Result<Self> {
        if surfaces.len() != tags.len() {
            return Err(Error::Dimension {
                context: "tags per sentence",
                expected: surfaces.len(),
                actual: tags.len(),
            });
        }
        let tokens = surfaces
            .iter()
            .zip(tags)
            .map(|(s, &t)| Token::with_gold(s.as_ref(), t))
            .collect::<Result<Vec<_>>>()?;
        Self::new(tokens)
    }

    /// Untagged sentence from surfaces.
    pub fn from_words<S: AsRef<str>>(surfaces: &[S]) -> Result<Self> {
        let tokens = surfaces
            .iter()
            .map(|s| Token::new(s.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn tokens_mut(&mut self) -> &mut [Token] {
        &mut self.tokens
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(Token::surface)
    }

    /// All gold tags, or `None` if any token is unlabeled.
    pub fn gold_tags(&self) -> Option<Vec<Tag>> {
        self.tokens.iter().map(|t| t.gold).collect()
    }

    pub fn pred_tags(&self) -> Option<Vec<Tag>> {
        self.tokens.iter().map(|t| t.pred).collect()
    }

    pub fn set_pred_tags(&mut self, tags: &[Tag]) -> Result<()> {
        if tags.len() != self.len() {
            return Err(Error::Dimension {
                context: "predicted tags",
                expected: self.len(),
                actual: tags.len(),
            });
        }
        for (tok, &t) in self.tokens.iter_mut().zip(tags) {
            tok.pred = Some(t);
        }
        Ok(())
    }
}

/// `[start, end)` token range of one entity of class index `class`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub class: usize,
}

/// Rewrites every `I-c` that does not continue an entity of class `c` into
/// `B-c`. The sequence start acts as a virtual `O`.
pub fn repair_bio(tags: &[Tag]) -> Vec<Tag> {
    let mut out = Vec::with_capacity(tags.len());
    let mut prev_class = None;
    for &tag in tags {
        let fixed = match tag.kind() {
            TagKind::Inside(c) if prev_class != Some(c) => Tag::begin(c),
            _ => tag,
        };
        prev_class = fixed.class();
        out.push(fixed);
    }
    out
}

/// First position where `tags` is not a valid BIO sequence, if any.
pub fn check_bio(tags: &[Tag]) -> Result<()> {
    let mut prev_class = None;
    for (position, &tag) in tags.iter().enumerate() {
        if let TagKind::Inside(c) = tag.kind() {
            if prev_class != Some(c) {
                let reason = match prev_class {
                    None if position == 0 => "I tag at sentence start".to_string(),
                    None => "I tag after O".to_string(),
                    Some(_) => "I tag continues an entity of another class".to_string(),
                };
                return Err(Error::InvalidBio { position, reason });
            }
        }
        prev_class = tag.class();
    }
    Ok(())
}

/// Spans of every maximal `B-c (I-c)*` run, ordered by start.
pub fn extract_entities(tags: &[Tag]) -> Result<Vec<EntitySpan>> {
    check_bio(tags)?;
    let mut spans: Vec<EntitySpan> = Vec::new();
    for (i, &tag) in tags.iter().enumerate() {
        match tag.kind() {
            TagKind::Begin(class) => spans.push(EntitySpan {
                start: i,
                end: i + 1,
                class,
            }),
            TagKind::Inside(_) => {
                if let Some(last) = spans.last_mut() {
                    last.end = i + 1;
                }
            }
            TagKind::Outside => {}
        }
    }
    Ok(spans)
}

/// Inverse of [`extract_entities`] for non-overlapping spans.
pub fn spans_to_tags(len: usize, spans: &[EntitySpan]) -> Vec<Tag> {
    let mut tags = alloc::vec![Tag::OUTSIDE; len];
    for s in spans {
        tags[s.start] = Tag::begin(s.class);
        for t in &mut tags[s.start + 1..s.end] {
            *t = Tag::inside(s.class);
        }
    }
    tags
}

/// Gold-side structural problems: `(sentence index, error)` for every
/// labeled sentence whose tags are not a valid BIO sequence.
pub fn gold_violations(data: &[Sentence]) -> Vec<(usize, Error)> {
    data.iter()
        .enumerate()
        .filter_map(|(i, s)| {
            let tags = s.gold_tags()?;
            check_bio(&tags).err().map(|e| (i, e))
        })
        .collect()
}

/// Number of sentences that go to the first part of a split.
fn first_part_size(n: usize, ratio: f64) -> usize {
    let x = ratio * n as f64;
    let r = libm::round(x);
    // 0.7 · 10 is 7.000000000000001 in binary; treat it as exact.
    if (x - r).abs() < 1e-9 {
        r as usize
    } else {
        libm::ceil(x) as usize
    }
}

/// Seeded sentence-level split. The first part holds `⌈ratio · N⌉`
/// sentences; both parts keep the input's relative order.
pub fn split_train_valid(data: &[Sentence], ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Argument(format!("split ratio {ratio} outside (0, 1)")));
    }
    if data.is_empty() {
        return Err(Error::Empty("dataset to split"));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng::stream(seed, &[b"split"]));
    let k = first_part_size(data.len(), ratio);
    let mut first: Vec<usize> = order[..k].to_vec();
    let mut second: Vec<usize> = order[k..].to_vec();
    first.sort_unstable();
    second.sort_unstable();
    Ok((
        first.into_iter().map(|i| data[i].clone()).collect(),
        second.into_iter().map(|i| data[i].clone()).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn scheme() -> TagScheme {
        TagScheme::new(&["brand", "drug", "group", "drug_n"]).unwrap()
    }

    fn tags(s: &TagScheme, names: &[&str]) -> Vec<Tag> {
        names.iter().map(|n| s.parse_tag(n).unwrap()).collect()
    }

    #[test]
    fn tag_layout_is_o_then_begin_inside_pairs() {
        let s = TagScheme::new(&["problem", "test", "treatment"]).unwrap();
        assert_eq!(s.num_tags(), 7);
        let names: Vec<String> = s.tags().map(|t| s.tag_name(t)).collect();
        assert_eq!(
            names,
            ["O", "B-problem", "I-problem", "B-test", "I-test", "B-treatment", "I-treatment"]
        );
        assert_eq!(s.parse_tag("I-test").unwrap().kind(), TagKind::Inside(1));
        assert!(matches!(s.parse_tag("B-foo"), Err(Error::UnknownTag(t)) if t == "B-foo"));
        assert!(s.parse_tag("X-test").is_err());
    }

    #[test]
    fn infer_sorts_classes() {
        let s = TagScheme::infer(["B-test", "O", "I-problem", "B-test"]).unwrap();
        assert_eq!(s.classes(), ["problem", "test"]);
        assert!(TagScheme::infer(["Q"]).is_err());
    }

    #[test]
    fn token_rejects_whitespace() {
        assert!(Token::new("x y").is_err());
        assert!(Token::new("").is_err());
        assert!(Token::new("Felbatol").is_ok());
    }

    #[test]
    fn repair_examples() {
        let s = scheme();
        assert_eq!(repair_bio(&tags(&s, &["O", "I-drug"])), tags(&s, &["O", "B-drug"]));
        assert_eq!(repair_bio(&tags(&s, &["B-drug", "I-drug"])), tags(&s, &["B-drug", "I-drug"]));
        assert_eq!(repair_bio(&tags(&s, &["I-group"])), tags(&s, &["B-group"]));
        assert_eq!(
            repair_bio(&tags(&s, &["B-drug", "I-brand", "I-brand"])),
            tags(&s, &["B-drug", "B-brand", "I-brand"])
        );
    }

    #[test]
    fn extract_examples() {
        let s = TagScheme::new(&["problem"]).unwrap();
        let t = tags(&s, &["B-problem", "I-problem", "I-problem", "I-problem"]);
        assert_eq!(
            extract_entities(&t).unwrap(),
            vec![EntitySpan { start: 0, end: 4, class: 0 }]
        );
        assert!(extract_entities(&tags(&s, &["O", "O"])).unwrap().is_empty());
        let d = scheme();
        let drug = d.class_index("drug").unwrap();
        assert_eq!(
            extract_entities(&tags(&d, &["B-drug", "B-drug"])).unwrap(),
            vec![
                EntitySpan { start: 0, end: 1, class: drug },
                EntitySpan { start: 1, end: 2, class: drug },
            ]
        );
        assert!(matches!(
            extract_entities(&tags(&d, &["O", "I-drug"])),
            Err(Error::InvalidBio { position: 1, .. })
        ));
    }

    fn toy_data(n: usize) -> Dataset {
        (0..n)
            .map(|i| Sentence::from_words(&[format!("w{i}")]).unwrap())
            .collect()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let data = toy_data(10);
        let (a, b) = split_train_valid(&data, 0.7, 1).unwrap();
        assert_eq!((a.len(), b.len()), (7, 3));
        let (a2, b2) = split_train_valid(&data, 0.7, 1).unwrap();
        assert_eq!((a, b), (a2, b2));
        let (c, _) = split_train_valid(&toy_data(11), 0.7, 1).unwrap();
        assert_eq!(c.len(), 8);
        assert!(split_train_valid(&data, 1.0, 1).is_err());
        assert!(split_train_valid(&data, 0.0, 1).is_err());
        assert!(split_train_valid(&[], 0.5, 1).is_err());
    }

    #[test]
    fn split_is_a_partition() {
        let data = toy_data(23);
        let (a, b) = split_train_valid(&data, 0.7, 9).unwrap();
        let mut all: Vec<String> = a
            .iter()
            .chain(&b)
            .map(|s| s.surfaces().next().unwrap().to_string())
            .collect();
        all.sort();
        let mut want: Vec<String> = (0..23).map(|i| format!("w{i}")).collect();
        want.sort();
        assert_eq!(all, want);
    }

    fn arb_tags() -> impl Strategy<Value = Vec<Tag>> {
        proptest::collection::vec(0usize..9, 0..30)
            .prop_map(|v| v.into_iter().map(Tag::from_index).collect())
    }

    proptest! {
        #[test]
        fn repair_is_idempotent_and_length_preserving(t in arb_tags()) {
            let r = repair_bio(&t);
            prop_assert_eq!(r.len(), t.len());
            prop_assert_eq!(repair_bio(&r), r.clone());
        }

        #[test]
        fn repaired_sequences_round_trip_through_spans(t in arb_tags()) {
            let r = repair_bio(&t);
            let spans = extract_entities(&r).unwrap();
            for w in spans.windows(2) {
                prop_assert!(w[0].end <= w[1].start);
            }
            prop_assert_eq!(spans_to_tags(r.len(), &spans), r);
        }

        #[test]
        fn repair_only_touches_orphan_inside_tags(t in arb_tags()) {
            let r = repair_bio(&t);
            for (i, (a, b)) in t.iter().zip(&r).enumerate() {
                if a != b {
                    let c = a.class().unwrap();
                    prop_assert_eq!(a.kind(), TagKind::Inside(c));
                    prop_assert_eq!(*b, Tag::begin(c));
                    prop_assert!(i == 0 || r[i - 1].class() != Some(c));
                }
            }
        }
    }
}
