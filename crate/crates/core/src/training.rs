//! Model construction, the per-sentence SGD loop and tagging.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::SliceRandom;

use crate::corpus::{check_bio, split_train_valid, Dataset, Sentence, Tag, TagScheme};
use crate::embeddings::{assemble, random_table, EmbeddingTable, FeatureFamily, Vocabulary};
use crate::eval::evaluate;
use crate::math::{axpy, sum_squares, Matrix};
use crate::network::{Dropout, Init, ModelParameters, ModelSpec, Variant};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub variant: Variant,
    /// Embedding sources, in concatenation order. The core only records
    /// them; loading is the caller's job.
    pub embeddings: Vec<String>,
    pub use_char: bool,
    pub use_features: bool,
    pub feature_families: Vec<FeatureFamily>,
    /// Width of the random word table used when no source is given.
    pub word_dim: usize,
    pub char_dim: usize,
    pub word_hidden: usize,
    pub char_hidden: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub epochs: usize,
    pub split_ratio: f64,
    pub clip_norm: f64,
    /// L2 penalty of the CRF baseline; the neural variants rely on dropout.
    pub l2: f64,
    pub init: Init,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::BlstmCrf,
            embeddings: Vec::new(),
            use_char: true,
            use_features: false,
            feature_families: FeatureFamily::DEFAULT.to_vec(),
            word_dim: 300,
            char_dim: 25,
            word_hidden: 100,
            char_hidden: 25,
            learning_rate: 0.01,
            dropout: 0.5,
            epochs: 100,
            split_ratio: 0.7,
            clip_norm: 5.0,
            l2: 1e-4,
            init: Init::Uniform,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.dropout > 0.0 && self.dropout < 1.0) {
            return bad("dropout must lie strictly between 0 and 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad("split_ratio must lie strictly between 0 and 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 || self.l2.is_nan() || self.l2 < 0.0 {
            return bad("clip_norm must be positive and l2 non-negative");
        }
        if self.variant.has_lstm() && self.word_hidden == 0 {
            return bad("word_hidden must be positive");
        }
        if self.use_char && self.variant.has_lstm() && (self.char_dim == 0 || self.char_hidden == 0) {
            return bad("character dimensions must be positive");
        }
        if self.embeddings.is_empty() && self.word_dim == 0 {
            return bad("word_dim must be positive without embedding sources");
        }
        Ok(())
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            variant: self.variant,
            use_char: self.use_char,
            use_features: self.use_features,
            char_dim: self.char_dim,
            char_hidden: self.char_hidden,
            word_hidden: self.word_hidden,
            init: self.init,
            feature_families: self.feature_families.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// Mean training loss per sentence, penalty included.
    pub loss: f64,
    /// Strict micro F1 on the validation split.
    pub valid_f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub scheme: TagScheme,
    pub model: ModelParameters,
    /// Zero-based index into `history`.
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

/// Trains with [`train_with_progress`] and no progress callback.
pub fn train(
    config: &TrainConfig,
    scheme: &TagScheme,
    data: &[Sentence],
    tables: &[EmbeddingTable],
    extra_words: &[String],
) -> Result<Checkpoint> {
    train_with_progress(config, scheme, data, tables, extra_words, |_, _| {})
}

/// Splits `data`, trains for `config.epochs` epochs and keeps the parameters
/// of the epoch with the best validation F1 (earliest on ties).
///
/// The vocabulary covers every surface in `data` plus `extra_words`, so
/// that test words with pretrained vectors get their own rows.
pub fn train_with_progress<F: FnMut(usize, &EpochRecord)>(
    config: &TrainConfig,
    scheme: &TagScheme,
    data: &[Sentence],
    tables: &[EmbeddingTable],
    extra_words: &[String],
    mut progress: F,
) -> Result<Checkpoint> {
    config.validate()?;
    for (i, s) in data.iter().enumerate() {
        let gold = s
            .gold_tags()
            .ok_or_else(|| Error::Structure { sentence: i, reason: "missing gold tags".into() })?;
        if let Some(t) = gold.iter().find(|t| !scheme.contains(**t)) {
            return Err(Error::UnknownTag(format!("tag index {} in sentence {i}", t.index())));
        }
        check_bio(&gold).map_err(|e| Error::Structure { sentence: i, reason: format!("{e}") })?;
    }
    let (train_set, valid_set) = split_train_valid(data, config.split_ratio, config.seed)?;
    if train_set.is_empty() {
        return Err(Error::Empty("training split"));
    }

    let mut vocab = Vocabulary::from_words(data.iter().flat_map(Sentence::surfaces));
    for w in extra_words {
        vocab.insert(w);
    }
    let (words, segments) = if tables.is_empty() {
        (random_table(&vocab, config.word_dim, config.seed)?, alloc::vec![config.word_dim])
    } else {
        (assemble(&vocab, tables, config.seed)?, tables.iter().map(EmbeddingTable::dim).collect())
    };
    let word_matrix = Matrix::from_vec(vocab.len(), words.dim(), words.as_slice().to_vec());
    let mut model = ModelParameters::initialize(
        &config.model_spec(),
        scheme.num_tags(),
        vocab,
        word_matrix,
        segments,
        &train_set,
        config.seed,
    )?;

    let golds: Vec<Vec<Tag>> = train_set.iter().map(|s| s.gold_tags().unwrap_or_default()).collect();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, ModelParameters)> = None;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng::stream(config.seed, &[b"epoch", &(epoch as u64).to_le_bytes()]));
        let mut total = 0.0;
        for &i in &order {
            let dropout = model.variant().has_lstm().then(|| Dropout {
                rate: config.dropout,
                seed: rng::stable_hash(&[
                    &config.seed.to_le_bytes(),
                    &(epoch as u64).to_le_bytes(),
                    &(i as u64).to_le_bytes(),
                ]),
            });
            let (mut loss, mut grads) = model.loss_and_gradients(&train_set[i], &golds[i], dropout)?;
            if model.variant() == Variant::Crf && config.l2 > 0.0 {
                loss += 0.5 * config.l2 * (sum_squares(model.projection.as_slice()) + transition_energy(&model));
                axpy(config.l2, model.projection.as_slice(), grads.projection.as_mut_slice());
                if let (Some(tr), Some(g)) = (&model.transitions, grads.transitions.as_mut()) {
                    axpy(config.l2, tr.matrix().as_slice(), g.as_mut_slice());
                }
            }
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::NonFinite { epoch, sentence: i });
            }
            grads.clip(config.clip_norm);
            model.apply_update(&grads, -config.learning_rate);
            total += loss;
        }
        let valid_f1 = validation_f1(&model, scheme, &valid_set)?;
        let record = EpochRecord { loss: total / train_set.len() as f64, valid_f1 };
        progress(epoch, &record);
        history.push(record);
        if best.as_ref().is_none_or(|(f1, _, _)| valid_f1 > *f1) {
            best = Some((valid_f1, epoch, model.clone()));
        }
    }

    let (_, best_epoch, model) = best.expect("at least one epoch");
    Ok(Checkpoint { config: config.clone(), scheme: scheme.clone(), model, best_epoch, history })
}

fn transition_energy(model: &ModelParameters) -> f64 {
    model.transitions.as_ref().map_or(0.0, |t| sum_squares(t.matrix().as_slice()))
}

fn validation_f1(model: &ModelParameters, scheme: &TagScheme, valid: &[Sentence]) -> Result<f64> {
    if valid.is_empty() {
        return Ok(0.0);
    }
    let predicted = predict_all(model, valid)?;
    Ok(evaluate(scheme, valid, &predicted)?.micro_f1())
}

fn predict_all(model: &ModelParameters, sentences: &[Sentence]) -> Result<Dataset> {
    sentences
        .iter()
        .map(|s| {
            let mut out = s.clone();
            out.set_pred_tags(&model.predict(s))?;
            Ok(out)
        })
        .collect()
}

/// Copies of `sentences` with predicted tags filled in. Any gold tags must
/// belong to the checkpoint's scheme.
pub fn tag(checkpoint: &Checkpoint, sentences: &[Sentence]) -> Result<Dataset> {
    for s in sentences {
        if let Some(t) = s.tokens().iter().filter_map(|t| t.gold).find(|t| !checkpoint.scheme.contains(*t)) {
            return Err(Error::UnknownTag(format!("tag index {} not in the model's scheme", t.index())));
        }
    }
    predict_all(&checkpoint.model, sentences)
}
