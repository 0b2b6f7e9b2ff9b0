//! CoNLL-style token-per-line files.
//!
//! One token per line as `surface<TAB>tag`, optionally followed by a third
//! `pred` column; sentences are separated by blank lines. A file with only
//! surfaces is valid input for tagging.

use seqtag_core::corpus::{Dataset, Sentence, Tag, TagScheme, Token};

use crate::{Error, Result};

/// How a two-column file's second column is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondColumn {
    Gold,
    Pred,
}

/// A parsed line: 1-based line number, surface and up to two tag strings.
#[derive(Debug, Clone, PartialEq)]
pub struct RawToken {
    pub line: usize,
    pub surface: String,
    pub tags: Vec<String>,
}

/// Splits `text` into sentences of raw tokens without interpreting tags.
pub fn read_raw(text: &str) -> Result<Vec<Vec<RawToken>>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() > 3 {
            return Err(Error::parse(line_no, format!("expected at most 3 columns, found {}", cols.len())));
        }
        let surface = cols[0];
        if surface.is_empty() || surface.chars().any(char::is_whitespace) {
            return Err(Error::parse(line_no, format!("malformed token {surface:?}")));
        }
        if let Some(empty) = cols[1..].iter().position(|c| c.trim().is_empty()) {
            return Err(Error::parse(line_no, format!("empty tag in column {}", empty + 2)));
        }
        current.push(RawToken {
            line: line_no,
            surface: surface.to_string(),
            tags: cols[1..].iter().map(|c| c.trim().to_string()).collect(),
        });
    }
    if !current.is_empty() {
        out.push(current);
    }
    Ok(out)
}

/// Tag scheme from every tag string in the given files' raw tokens.
pub fn infer_scheme<'a>(sentences: impl IntoIterator<Item = &'a Vec<RawToken>>) -> Result<TagScheme> {
    let tags: Vec<&str> = sentences
        .into_iter()
        .flatten()
        .flat_map(|t| t.tags.iter().map(String::as_str))
        .collect();
    Ok(TagScheme::infer(tags)?)
}

/// Parses and validates every tag against `scheme`. A two-column line's
/// second column is read according to `second`; a third column is always
/// the prediction.
pub fn parse_conll_as(text: &str, scheme: &TagScheme, second: SecondColumn) -> Result<Dataset> {
    build(read_raw(text)?, scheme, second)
}

/// [`parse_conll_as`] reading a second column as gold tags.
pub fn parse_conll(text: &str, scheme: &TagScheme) -> Result<Dataset> {
    parse_conll_as(text, scheme, SecondColumn::Gold)
}

pub fn build(raw: Vec<Vec<RawToken>>, scheme: &TagScheme, second: SecondColumn) -> Result<Dataset> {
    raw.into_iter()
        .map(|tokens| {
            let tokens = tokens
                .into_iter()
                .map(|t| {
                    let tag = |s: &str| scheme.parse_tag(s).map_err(|e| Error::parse(t.line, e.to_string()));
                    let mut token = Token::new(t.surface.as_str()).map_err(|e| Error::parse(t.line, e.to_string()))?;
                    match (t.tags.as_slice(), second) {
                        ([], _) => {}
                        ([g], SecondColumn::Gold) => token.gold = Some(tag(g)?),
                        ([p], SecondColumn::Pred) => token.pred = Some(tag(p)?),
                        ([g, p], _) => {
                            token.gold = Some(tag(g)?);
                            token.pred = Some(tag(p)?);
                        }
                        _ => unreachable!("read_raw caps the column count"),
                    }
                    Ok(token)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Sentence::new(tokens)?)
        })
        .collect()
}

/// Writes surfaces followed by whichever of the gold and predicted columns
/// are present.
pub fn write_conll(data: &[Sentence], scheme: &TagScheme) -> String {
    let mut out = String::new();
    for (i, s) in data.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for t in s.tokens() {
            out.push_str(t.surface());
            for tag in [t.gold, t.pred].into_iter().flatten() {
                out.push('\t');
                out.push_str(&scheme.tag_name(tag));
            }
            out.push('\n');
        }
    }
    out
}

/// Every surface of `data`, in order, duplicates included.
pub fn surfaces(data: &[Sentence]) -> Vec<String> {
    data.iter().flat_map(|s| s.surfaces().map(str::to_string)).collect()
}

/// Copies of `data` with the predicted column cleared.
pub fn strip_predictions(data: &[Sentence]) -> Dataset {
    let mut out = data.to_vec();
    for s in &mut out {
        for t in s.tokens_mut() {
            t.pred = None::<Tag>;
        }
    }
    out
}
