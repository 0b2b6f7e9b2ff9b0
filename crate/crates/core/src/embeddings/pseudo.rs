use alloc::string::String;
use alloc::vec::Vec;

/// Turns `(column title, cell text)` records into pseudo-sentences: the
/// lowercased title tokens followed by the lowercased cell tokens. Empty
/// cells produce nothing.
pub fn build_pseudo_corpus<I, T, C>(records: I) -> Vec<Vec<String>>
where
    I: IntoIterator<Item = (T, C)>,
    T: AsRef<str>,
    C: AsRef<str>,
{
    records
        .into_iter()
        .filter(|(_, cell)| !cell.as_ref().trim().is_empty())
        .map(|(title, cell)| {
            title
                .as_ref()
                .split_whitespace()
                .chain(cell.as_ref().split_whitespace())
                .map(str::to_lowercase)
                .collect()
        })
        .collect()
}
