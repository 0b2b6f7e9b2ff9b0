//! Flat `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Lists are comma-separated.

use std::collections::BTreeMap;

use seqtag_core::embeddings::FeatureFamily;
use seqtag_core::network::{Init, Variant};
use seqtag_core::synth::SynthSpec;
use seqtag_core::training::TrainConfig;

use crate::{Error, Result};

pub const SEED_ENV: &str = "SEQTAG_SEED";

/// Key/value pairs in file order; a repeated key keeps its last value.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected key = value", i + 1)));
        };
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Splits a `KEY=VALUE` command-line override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| Error::Config(format!("override {s:?} is not KEY=VALUE")))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, found {value:?}"))),
    }
}

fn list(value: &str) -> Vec<String> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

/// Training settings that live outside [`TrainConfig`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSettings {
    pub config: TrainConfig,
    /// Entity classes; inferred from the training file when empty.
    pub classes: Vec<String>,
}

impl RunSettings {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let c = &mut self.config;
        match key {
            "variant" => {
                c.variant = Variant::from_name(value).ok_or_else(|| Error::Config(format!("unknown variant {value:?}")))?
            }
            "embeddings" => c.embeddings = list(value),
            "classes" => self.classes = list(value),
            "use_char" => c.use_char = flag(key, value)?,
            "use_features" => c.use_features = flag(key, value)?,
            "features" => {
                c.feature_families = list(value)
                    .iter()
                    .map(|f| FeatureFamily::from_name(f).ok_or_else(|| Error::Config(format!("unknown feature family {f:?}"))))
                    .collect::<Result<_>>()?
            }
            "word_dim" => c.word_dim = num(key, value)?,
            "char_dim" => c.char_dim = num(key, value)?,
            "word_hidden" => c.word_hidden = num(key, value)?,
            "char_hidden" => c.char_hidden = num(key, value)?,
            "learning_rate" => c.learning_rate = num(key, value)?,
            "dropout" => c.dropout = num(key, value)?,
            "epochs" => c.epochs = num(key, value)?,
            "split_ratio" => c.split_ratio = num(key, value)?,
            "clip_norm" => c.clip_norm = num(key, value)?,
            "l2" => c.l2 = num(key, value)?,
            "init" => c.init = Init::from_name(value).ok_or_else(|| Error::Config(format!("unknown init {value:?}")))?,
            "seed" => c.seed = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Defaults, then the file, then command-line overrides, then the
    /// seed from the environment if set.
    pub fn load(file: Option<&str>, overrides: &[(String, String)], env_seed: Option<&str>) -> Result<Self> {
        let mut s = Self::default();
        let pairs = match file {
            Some(text) => parse_pairs(text)?,
            None => Vec::new(),
        };
        for (k, v) in pairs.iter().chain(overrides) {
            s.set(k, v)?;
        }
        if let Some(seed) = env_seed {
            s.config.seed = num(SEED_ENV, seed.trim())?;
        }
        s.config.validate()?;
        Ok(s)
    }

    /// Serialized form accepted by [`RunSettings::load`]; floats are written
    /// in shortest round-trip notation.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let c = &self.config;
        let families: Vec<&str> = c.feature_families.iter().map(|f| f.name()).collect();
        vec![
            ("variant".into(), c.variant.name().into()),
            ("embeddings".into(), c.embeddings.join(",")),
            ("classes".into(), self.classes.join(",")),
            ("use_char".into(), c.use_char.to_string()),
            ("use_features".into(), c.use_features.to_string()),
            ("features".into(), families.join(",")),
            ("word_dim".into(), c.word_dim.to_string()),
            ("char_dim".into(), c.char_dim.to_string()),
            ("word_hidden".into(), c.word_hidden.to_string()),
            ("char_hidden".into(), c.char_hidden.to_string()),
            ("learning_rate".into(), c.learning_rate.to_string()),
            ("dropout".into(), c.dropout.to_string()),
            ("epochs".into(), c.epochs.to_string()),
            ("split_ratio".into(), c.split_ratio.to_string()),
            ("clip_norm".into(), c.clip_norm.to_string()),
            ("l2".into(), c.l2.to_string()),
            ("init".into(), c.init.name().into()),
            ("seed".into(), c.seed.to_string()),
        ]
    }
}

/// Synthetic-corpus spec: defaults overridden by `classes`, `fillers`,
/// `lexicon.<class>` lists and the scalar fields.
pub fn synth_spec(text: &str) -> Result<SynthSpec> {
    let mut spec = SynthSpec::default();
    let mut lexicons: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (k, v) in parse_pairs(text)? {
        match k.as_str() {
            "classes" => spec.classes = list(&v),
            "fillers" => spec.fillers = list(&v),
            "min_len" => spec.min_len = num(&k, &v)?,
            "max_len" => spec.max_len = num(&k, &v)?,
            "density" => spec.density = num(&k, &v)?,
            "train_size" => spec.train_size = num(&k, &v)?,
            "test_size" => spec.test_size = num(&k, &v)?,
            "test_overlap" => spec.test_overlap = num(&k, &v)?,
            "held_out" => spec.held_out = num(&k, &v)?,
            "seed" => spec.seed = num(&k, &v)?,
            _ => match k.strip_prefix("lexicon.") {
                Some(class) => {
                    lexicons.insert(class.to_string(), list(&v));
                }
                None => return Err(Error::Config(format!("unknown key {k:?}"))),
            },
        }
    }
    if !lexicons.is_empty() {
        spec.lexicons = spec
            .classes
            .iter()
            .map(|c| lexicons.remove(c).ok_or_else(|| Error::Config(format!("no lexicon for class {c:?}"))))
            .collect::<Result<_>>()?;
        if let Some(extra) = lexicons.keys().next() {
            return Err(Error::Config(format!("lexicon for unknown class {extra:?}")));
        }
    } else if spec.classes.len() != spec.lexicons.len() {
        return Err(Error::Config("custom classes need lexicon.<class> entries".into()));
    }
    spec.validate()?;
    Ok(spec)
}
