//! Checkpoint files.
//!
//! A plain-text header (version, configuration, tag classes, vocabulary,
//! character alphabet, feature values, history and the tensor directory)
//! is followed by every tensor as little-endian `f64` and a SHA-256 digest
//! of all preceding bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use seqtag_core::corpus::TagScheme;
use seqtag_core::embeddings::{FeatureFamily, Vocabulary};
use seqtag_core::network::{ModelLayout, ModelParameters, Variant};
use seqtag_core::training::{Checkpoint, EpochRecord};

use crate::config::RunSettings;
use crate::{Error, Result};

const MAGIC: &str = "SEQTAG-CHECKPOINT";
const VERSION: &str = "1";
const END: &str = "payload\n";
const DIGEST_LEN: usize = 32;

fn check_token(kind: &str, s: &str) -> Result<()> {
    if s.is_empty() || s.chars().any(char::is_whitespace) {
        return Err(Error::Config(format!("{kind} {s:?} cannot be stored in a checkpoint")));
    }
    Ok(())
}

pub fn to_bytes(c: &Checkpoint) -> Result<Vec<u8>> {
    let layout = c.model.layout();
    let mut h = String::new();
    let settings = RunSettings { config: c.config.clone(), classes: c.scheme.classes().to_vec() };
    let pairs = settings.to_pairs();
    writeln!(h, "{MAGIC} {VERSION}").unwrap();
    writeln!(h, "config {}", pairs.len()).unwrap();
    for (k, v) in &pairs {
        writeln!(h, "{k} = {v}").unwrap();
    }
    writeln!(h, "classes {}", c.scheme.classes().len()).unwrap();
    for class in c.scheme.classes() {
        writeln!(h, "{class}").unwrap();
    }
    let segments: Vec<String> = layout.word_segments.iter().map(usize::to_string).collect();
    writeln!(
        h,
        "layout {} {} {} {} {}",
        layout.variant.name(),
        layout.num_tags,
        layout.seed,
        layout.word_hidden,
        segments.join(",")
    )
    .unwrap();
    match &layout.chars {
        None => writeln!(h, "chars none").unwrap(),
        Some((alphabet, d_c, h_c)) => {
            let points: Vec<String> = alphabet.iter().map(|&ch| format!("{:x}", ch as u32)).collect();
            writeln!(h, "chars {d_c} {h_c} {}", alphabet.len()).unwrap();
            writeln!(h, "{}", points.join(" ")).unwrap();
        }
    }
    let words = &layout.vocab.words()[1..];
    writeln!(h, "vocab {}", words.len()).unwrap();
    for w in words {
        check_token("word", w)?;
        writeln!(h, "{w}").unwrap();
    }
    match &layout.features {
        None => writeln!(h, "features none").unwrap(),
        Some(families) => {
            writeln!(h, "features {}", families.len()).unwrap();
            for (family, values) in families {
                writeln!(h, "family {} {}", family.name(), values.len()).unwrap();
                for (value, index) in values {
                    check_token("feature value", value)?;
                    writeln!(h, "{index} {value}").unwrap();
                }
            }
        }
    }
    writeln!(h, "history {} {}", c.best_epoch, c.history.len()).unwrap();
    for r in &c.history {
        writeln!(h, "{:016x} {:016x}", r.loss.to_bits(), r.valid_f1.to_bits()).unwrap();
    }
    let tensors = c.model.tensors();
    writeln!(h, "tensors {}", tensors.len()).unwrap();
    for (name, (rows, cols), _) in &tensors {
        writeln!(h, "{name} {rows} {cols}").unwrap();
    }
    h.push_str(END);

    let mut bytes = h.into_bytes();
    for (_, _, data) in &tensors {
        for x in data.iter() {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&bytes);
    bytes.extend_from_slice(&digest);
    Ok(bytes)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::Integrity("header ends early".into()))
    }

    /// Next line, which must start with `keyword`; returns the remaining fields.
    fn expect(&mut self, keyword: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, line) = self.next()?;
        let mut fields = line.split(' ');
        if fields.next() != Some(keyword) {
            return Err(Error::parse(n, format!("expected {keyword:?} section")));
        }
        Ok((n, fields.collect()))
    }
}

fn field<T: std::str::FromStr>(line: usize, fields: &[&str], i: usize) -> Result<T> {
    fields
        .get(i)
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| Error::parse(line, format!("bad field {}", i + 1)))
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let first_end = bytes.iter().position(|&b| b == b'\n').unwrap_or(bytes.len());
    let first = std::str::from_utf8(&bytes[..first_end]).map_err(|_| Error::Integrity("not a checkpoint".into()))?;
    match first.split_once(' ') {
        Some((MAGIC, VERSION)) => {}
        Some((MAGIC, other)) => return Err(Error::UnsupportedVersion(other.to_string())),
        _ => return Err(Error::Integrity("not a checkpoint".into())),
    }
    if bytes.len() < DIGEST_LEN {
        return Err(Error::Integrity("file too short".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Integrity("checksum mismatch".into()));
    }
    let marker = format!("\n{END}");
    let header_len = body
        .windows(marker.len())
        .position(|w| w == marker.as_bytes())
        .ok_or_else(|| Error::Integrity("missing payload marker".into()))?
        + marker.len();
    let header = std::str::from_utf8(&body[..header_len]).map_err(|_| Error::Integrity("header is not UTF-8".into()))?;
    let payload = &body[header_len..];

    let mut lines = Lines { inner: header.lines().enumerate() };
    lines.next()?;
    let (n, f) = lines.expect("config")?;
    let count: usize = field(n, &f, 0)?;
    let mut config_text = String::new();
    for _ in 0..count {
        config_text.push_str(lines.next()?.1);
        config_text.push('\n');
    }
    let settings = RunSettings::load(Some(&config_text), &[], None)?;

    let (n, f) = lines.expect("classes")?;
    let count: usize = field(n, &f, 0)?;
    let classes: Vec<&str> = (0..count).map(|_| lines.next().map(|l| l.1)).collect::<Result<_>>()?;
    let scheme = TagScheme::new(&classes)?;

    let (n, f) = lines.expect("layout")?;
    let variant_name: String = field(n, &f, 0)?;
    let variant = Variant::from_name(&variant_name).ok_or_else(|| Error::parse(n, "unknown variant"))?;
    let num_tags: usize = field(n, &f, 1)?;
    let seed: u64 = field(n, &f, 2)?;
    let word_hidden: usize = field(n, &f, 3)?;
    let segments: String = field(n, &f, 4)?;
    let word_segments = segments
        .split(',')
        .map(|s| s.parse().map_err(|_| Error::parse(n, "bad segment")))
        .collect::<Result<Vec<usize>>>()?;

    let (n, f) = lines.expect("chars")?;
    let chars = if f == ["none"] {
        None
    } else {
        let (d_c, h_c, count): (usize, usize, usize) = (field(n, &f, 0)?, field(n, &f, 1)?, field(n, &f, 2)?);
        let (n, line) = lines.next()?;
        let alphabet = line
            .split(' ')
            .filter(|s| !s.is_empty())
            .map(|s| {
                u32::from_str_radix(s, 16)
                    .ok()
                    .and_then(char::from_u32)
                    .ok_or_else(|| Error::parse(n, "bad code point"))
            })
            .collect::<Result<Vec<char>>>()?;
        if alphabet.len() != count {
            return Err(Error::parse(n, "alphabet size mismatch"));
        }
        Some((alphabet, d_c, h_c))
    };

    let (n, f) = lines.expect("vocab")?;
    let count: usize = field(n, &f, 0)?;
    let words: Vec<&str> = (0..count).map(|_| lines.next().map(|l| l.1)).collect::<Result<_>>()?;
    let vocab = Vocabulary::from_words(words);

    let (n, f) = lines.expect("features")?;
    let features = if f == ["none"] {
        None
    } else {
        let families: usize = field(n, &f, 0)?;
        let mut out = Vec::with_capacity(families);
        for _ in 0..families {
            let (n, f) = lines.expect("family")?;
            let name: String = field(n, &f, 0)?;
            let family = FeatureFamily::from_name(&name).ok_or_else(|| Error::parse(n, format!("unknown family {name:?}")))?;
            let count: usize = field(n, &f, 1)?;
            let mut values = BTreeMap::new();
            for _ in 0..count {
                let (n, line) = lines.next()?;
                let (index, value) = line.split_once(' ').ok_or_else(|| Error::parse(n, "expected index and value"))?;
                let index: usize = index.parse().map_err(|_| Error::parse(n, "bad index"))?;
                values.insert(value.to_string(), index);
            }
            out.push((family, values));
        }
        Some(out)
    };

    let (n, f) = lines.expect("history")?;
    let best_epoch: usize = field(n, &f, 0)?;
    let count: usize = field(n, &f, 1)?;
    let mut history = Vec::with_capacity(count);
    for _ in 0..count {
        let (n, line) = lines.next()?;
        let bits: Vec<u64> = line
            .split(' ')
            .map(|s| u64::from_str_radix(s, 16).map_err(|_| Error::parse(n, "bad history value")))
            .collect::<Result<_>>()?;
        if bits.len() != 2 {
            return Err(Error::parse(n, "expected two history values"));
        }
        history.push(EpochRecord { loss: f64::from_bits(bits[0]), valid_f1: f64::from_bits(bits[1]) });
    }

    let layout = ModelLayout { variant, num_tags, vocab, word_segments, seed, chars, features, word_hidden };
    let mut model = ModelParameters::zeros(layout)?;
    let expected: Vec<(String, (usize, usize))> = model.tensors().iter().map(|(name, s, _)| (name.clone(), *s)).collect();
    let (n, f) = lines.expect("tensors")?;
    let count: usize = field(n, &f, 0)?;
    if count != expected.len() {
        return Err(Error::parse(n, "tensor count does not match the layout"));
    }
    for (name, shape) in &expected {
        let (n, f) = lines.expect(name)?;
        if (field::<usize>(n, &f, 0)?, field::<usize>(n, &f, 1)?) != *shape {
            return Err(Error::parse(n, format!("shape of {name} does not match the layout")));
        }
    }
    let total: usize = expected.iter().map(|(_, (r, c))| r * c).sum();
    if payload.len() != total * 8 {
        return Err(Error::Integrity("payload size does not match the tensor directory".into()));
    }
    let mut chunks = payload.chunks_exact(8);
    for tensor in model.tensors_mut() {
        for (x, chunk) in tensor.iter_mut().zip(&mut chunks) {
            *x = f64::from_le_bytes(chunk.try_into().expect("chunks of eight bytes"));
        }
    }
    if model.num_tags() != scheme.num_tags() {
        return Err(Error::Integrity("tag count does not match the classes".into()));
    }
    Ok(Checkpoint { config: settings.config, scheme, model, best_epoch, history })
}

pub fn save_checkpoint(c: &Checkpoint, path: &Path) -> Result<()> {
    crate::write_file(path, to_bytes(c)?)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    from_bytes(&bytes)
}
