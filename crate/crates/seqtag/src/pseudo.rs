//! Pseudo-sentence corpora from CSV tables listed in a manifest.
//!
//! Each manifest line is `table_path<TAB>column_name`; relative paths are
//! resolved against the manifest's directory.

use std::path::{Path, PathBuf};

use seqtag_core::embeddings::build_pseudo_corpus;

use crate::{Error, Result};

pub fn read_manifest(text: &str, base: &Path) -> Result<Vec<(PathBuf, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((path, column)) = line.split_once('\t') else {
            return Err(Error::parse(i + 1, "expected table_path<TAB>column_name"));
        };
        if column.trim().is_empty() {
            return Err(Error::parse(i + 1, "empty column name"));
        }
        out.push((base.join(path), column.trim().to_string()));
    }
    Ok(out)
}

/// `(column title, cell)` pairs of one column of a headed CSV table.
pub fn column_records<R: std::io::Read>(reader: R, column: &str) -> Result<Vec<(String, String)>> {
    let mut csv = csv::Reader::from_reader(reader);
    let index = csv
        .headers()?
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::Config(format!("no column {column:?}")))?;
    let mut out = Vec::new();
    for record in csv.records() {
        let record = record?;
        out.push((column.to_string(), record.get(index).unwrap_or("").to_string()));
    }
    Ok(out)
}

/// Pseudo-sentences for every manifest entry, in manifest order.
pub fn corpus_from_manifest(manifest: &Path) -> Result<Vec<Vec<String>>> {
    let text = crate::read_file(manifest)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (path, column) in read_manifest(&text, base)? {
        let file = std::fs::File::open(&path).map_err(|source| Error::Io { path: path.clone(), source })?;
        out.extend(build_pseudo_corpus(column_records(file, &column)?));
    }
    Ok(out)
}
