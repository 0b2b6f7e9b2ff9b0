//! Whitespace-separated text embeddings: `word v1 v2 … vd` per line.

use std::io::BufRead;

use seqtag_core::embeddings::{EmbeddingTable, Provenance};

use crate::{Error, Result};

/// Reads a table; every entry is marked pretrained. The first occurrence of
/// a repeated word wins.
pub fn load_embedding_table<R: BufRead>(reader: R) -> Result<EmbeddingTable> {
    let mut table: Option<EmbeddingTable> = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::parse(line_no, e.to_string()))?;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let values = fields
            .map(|f| f.parse::<f64>().map_err(|_| Error::parse(line_no, format!("non-numeric component {f:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::parse(line_no, format!("non-finite component {bad}")));
        }
        let t = match &mut table {
            Some(t) => t,
            None => table.insert(EmbeddingTable::new(values.len()).map_err(|_| Error::parse(line_no, "no vector components"))?),
        };
        if values.len() != t.dim() {
            return Err(Error::parse(line_no, format!("expected {} components, found {}", t.dim(), values.len())));
        }
        t.insert(word, &values, Provenance::Pretrained)?;
    }
    table.ok_or_else(|| Error::parse(0, "empty embedding file"))
}

pub fn format_embedding_table(table: &EmbeddingTable) -> String {
    let mut out = String::new();
    for (word, v, _) in table.iter() {
        out.push_str(word);
        for x in v {
            out.push(' ');
            out.push_str(&x.to_string());
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_two_entries() {
        let t = load_embedding_table("a 1 2 3\nb 4 5 6.5\n".as_bytes()).unwrap();
        assert_eq!((t.dim(), t.len()), (3, 2));
        assert_eq!(t.get("b"), Some(&[4.0, 5.0, 6.5][..]));
        assert_eq!(t.provenance("a"), Some(Provenance::Pretrained));
    }

    #[test]
    fn inconsistent_dimension_reports_line() {
        let long = format!("a{}\nb{}\n", " 0.1".repeat(300), " 0.1".repeat(299));
        assert!(matches!(load_embedding_table(long.as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn malformed_files() {
        assert!(load_embedding_table("".as_bytes()).is_err());
        assert!(matches!(load_embedding_table("a 1 x\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
        assert!(load_embedding_table("a\n".as_bytes()).is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let t = load_embedding_table("a 0.1 -2e-7\nb 3 0.30000000000000004\n".as_bytes()).unwrap();
        let back = load_embedding_table(format_embedding_table(&t).as_bytes()).unwrap();
        assert_eq!(t, back);
    }
}
