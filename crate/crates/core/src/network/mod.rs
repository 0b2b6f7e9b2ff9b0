//! The neural taggers.
//!
//! Each token is represented by the concatenation of its word embedding, an
//! optional character-level embedding (final states of a character BiLSTM)
//! and optional hand-crafted feature encodings. Dropout is applied once to
//! that concatenation during training. A word-level BiLSTM turns the
//! sequence into per-token states which a linear projection maps to tag
//! scores: a softmax reads them as posteriors (B-LSTM) or a CRF layer reads
//! them as emissions (B-LSTM-CRF).
//!
//! The standalone CRF baseline reuses the same structure with no BiLSTM:
//! the projection acts directly on frozen token representations.
//!
//! Gradients are hand-derived adjoints; `tests/gradient_check.rs` holds them
//! against central finite differences.

mod lstm;

pub use lstm::{bilstm, LstmCell, StepCache, LSTM_TENSORS};

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::corpus::{repair_bio, Sentence, Tag};
use crate::crf::{Lattice, Transitions};
use crate::embeddings::{random_word_vector, FamilyTable, FeatureEncoder, FeatureFamily, FeatureSlot, Vocabulary};
use crate::math::{argmax, axpy, logsumexp, softmax, sum_squares, Matrix};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Crf,
    Blstm,
    BlstmCrf,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Crf => "crf",
            Variant::Blstm => "blstm",
            Variant::BlstmCrf => "blstm_crf",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "crf" => Some(Variant::Crf),
            "blstm" => Some(Variant::Blstm),
            "blstm_crf" | "blstm-crf" => Some(Variant::BlstmCrf),
            _ => None,
        }
    }

    pub fn has_lstm(self) -> bool {
        self != Variant::Crf
    }

    pub fn has_crf(self) -> bool {
        self != Variant::Blstm
    }
}

/// Weight initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// Every weight uniform in `[-1, 1]`.
    Uniform,
    /// Glorot-uniform matrices, zero biases, peepholes and transitions.
    Scaled,
}

impl Init {
    pub fn name(self) -> &'static str {
        match self {
            Init::Uniform => "uniform",
            Init::Scaled => "scaled",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "uniform" => Some(Init::Uniform),
            "scaled" => Some(Init::Scaled),
            _ => None,
        }
    }
}

/// Architecture choices for a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub variant: Variant,
    pub use_char: bool,
    pub use_features: bool,
    pub char_dim: usize,
    pub char_hidden: usize,
    pub word_hidden: usize,
    pub init: Init,
    pub feature_families: Vec<FeatureFamily>,
}

/// Everything about a model except its tensor values.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelLayout {
    pub variant: Variant,
    pub num_tags: usize,
    pub vocab: Vocabulary,
    /// Dimensions of the concatenated embedding sources; unknown words get a
    /// keyed random vector per segment.
    pub word_segments: Vec<usize>,
    pub seed: u64,
    /// `(alphabet without the unknown-character slot, d_c, H_c)`
    pub chars: Option<(Vec<char>, usize, usize)>,
    pub features: Option<Vec<(FeatureFamily, BTreeMap<String, usize>)>>,
    pub word_hidden: usize,
}

impl ModelLayout {
    pub fn word_dim(&self) -> usize {
        self.word_segments.iter().sum()
    }

    pub fn input_dim(&self) -> usize {
        self.word_dim()
            + self.chars.as_ref().map_or(0, |c| 2 * c.2)
            + self
                .features
                .as_ref()
                .map_or(0, |f| f.iter().map(|(fam, _)| fam.dim()).sum())
    }
}

/// Character embedding table plus the character BiLSTM.
#[derive(Debug, Clone, PartialEq)]
pub struct CharEncoder {
    alphabet: BTreeMap<char, usize>,
    pub table: Matrix,
    pub fwd: LstmCell,
    pub bwd: LstmCell,
}

impl CharEncoder {
    /// Row of `c`; row 0 is shared by every character unseen in training.
    pub fn index(&self, c: char) -> usize {
        self.alphabet.get(&c).copied().unwrap_or(0)
    }

    pub fn hidden_dim(&self) -> usize {
        self.fwd.hidden_dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    variant: Variant,
    num_tags: usize,
    vocab: Vocabulary,
    word_segments: Vec<usize>,
    seed: u64,
    /// `|V| × d_w`, rows aligned with the vocabulary.
    pub word_table: Matrix,
    pub chars: Option<CharEncoder>,
    pub features: Option<FeatureEncoder>,
    pub word_fwd: Option<LstmCell>,
    pub word_bwd: Option<LstmCell>,
    /// `K × 2H_w` (or `K × D` for the CRF baseline).
    pub projection: Matrix,
    pub projection_bias: Vec<f64>,
    pub transitions: Option<Transitions>,
}

/// Dropout on the token representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    pub rate: f64,
    pub seed: u64,
}

impl Dropout {
    /// Inverted-dropout mask for one token position.
    pub fn mask(&self, position: usize, dim: usize) -> Vec<f64> {
        let keep = 1.0 - self.rate;
        let mut r = rng::stream(self.seed, &[b"dropout", &(position as u64).to_le_bytes()]);
        (0..dim)
            .map(|_| if r.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Train(Dropout),
    Infer,
}

#[derive(Debug, Clone)]
enum WordSource {
    Row(usize),
    Fixed(Vec<f64>),
}

struct CharTrace {
    ids: Vec<usize>,
    fwd: Vec<StepCache>,
    bwd: Vec<StepCache>,
}

struct TokenTrace {
    word: WordSource,
    chars: Option<CharTrace>,
    features: Vec<FeatureSlot>,
    mask: Option<Vec<f64>>,
    input: Vec<f64>,
}

struct Trace {
    tokens: Vec<TokenTrace>,
    fwd: Vec<StepCache>,
    bwd: Vec<StepCache>,
    hidden: Vec<Vec<f64>>,
    logits: Lattice,
}

impl ModelParameters {
    /// Model with every tensor zero.
    pub fn zeros(layout: ModelLayout) -> Result<Self> {
        if layout.num_tags == 0 || layout.word_segments.contains(&0) || layout.word_segments.is_empty() {
            return Err(Error::Config("model needs tags and a positive word dimension".into()));
        }
        let chars = layout.chars.as_ref().map(|(alphabet, d_c, h_c)| CharEncoder {
            alphabet: alphabet.iter().enumerate().map(|(i, &c)| (c, i + 1)).collect(),
            table: Matrix::zeros(alphabet.len() + 1, *d_c),
            fwd: LstmCell::zeros(*d_c, *h_c),
            bwd: LstmCell::zeros(*d_c, *h_c),
        });
        let features = layout.features.as_ref().map(|fams| {
            let tables = fams
                .iter()
                .map(|(fam, values)| FamilyTable::from_parts(*fam, values.clone(), Matrix::zeros(values.len(), fam.dim())))
                .collect();
            FeatureEncoder::from_tables(layout.seed, tables)
        });
        let input_dim = layout.input_dim();
        let (word_fwd, word_bwd, proj_in) = if layout.variant.has_lstm() {
            (
                Some(LstmCell::zeros(input_dim, layout.word_hidden)),
                Some(LstmCell::zeros(input_dim, layout.word_hidden)),
                2 * layout.word_hidden,
            )
        } else {
            (None, None, input_dim)
        };
        Ok(Self {
            variant: layout.variant,
            num_tags: layout.num_tags,
            word_table: Matrix::zeros(layout.vocab.len(), layout.word_dim()),
            vocab: layout.vocab,
            word_segments: layout.word_segments,
            seed: layout.seed,
            chars,
            features,
            word_fwd,
            word_bwd,
            projection: Matrix::zeros(layout.num_tags, proj_in),
            projection_bias: vec![0.0; layout.num_tags],
            transitions: layout.variant.has_crf().then(|| Transitions::zeros(layout.num_tags)),
        })
    }

    /// Freshly initialized model. `word_vectors` is `|V| × d_w` with rows in
    /// vocabulary order (see [`crate::embeddings::assemble`]); the character
    /// alphabet and feature values are collected from `train`.
    pub fn initialize(
        spec: &ModelSpec,
        num_tags: usize,
        vocab: Vocabulary,
        word_vectors: Matrix,
        word_segments: Vec<usize>,
        train: &[Sentence],
        seed: u64,
    ) -> Result<Self> {
        if word_vectors.rows() != vocab.len() || word_vectors.cols() != word_segments.iter().sum::<usize>() {
            return Err(Error::Dimension {
                context: "word vectors vs vocabulary",
                expected: vocab.len(),
                actual: word_vectors.rows(),
            });
        }
        let use_char = spec.use_char && spec.variant.has_lstm();
        let chars = use_char.then(|| {
            let mut alphabet: Vec<char> = train.iter().flat_map(|s| s.surfaces().flat_map(str::chars)).collect();
            alphabet.sort_unstable();
            alphabet.dedup();
            (alphabet, spec.char_dim, spec.char_hidden)
        });
        let encoder = spec
            .use_features
            .then(|| FeatureEncoder::build(&spec.feature_families, train, seed));
        let layout = ModelLayout {
            variant: spec.variant,
            num_tags,
            vocab,
            word_segments,
            seed,
            chars,
            features: encoder.as_ref().map(|e| {
                e.tables()
                    .iter()
                    .map(|t| (t.family, t.values().map(|(v, i)| (String::from(v), i)).collect()))
                    .collect()
            }),
            word_hidden: spec.word_hidden,
        };
        let mut model = Self::zeros(layout)?;
        model.word_table = word_vectors;
        model.features = encoder;

        let mut r = rng::stream(seed, &[b"init"]);
        let cell = |input: usize, hidden: usize, r: &mut rand_chacha::ChaCha8Rng| match spec.init {
            Init::Uniform => LstmCell::uniform(input, hidden, 1.0, r),
            Init::Scaled => LstmCell::scaled(input, hidden, r),
        };
        if let Some(ch) = model.chars.as_mut() {
            let n = ch.table.as_slice().len();
            ch.table.as_mut_slice().copy_from_slice(&rng::uniform_vec(&mut r, n, 1.0));
            ch.fwd = cell(spec.char_dim, spec.char_hidden, &mut r);
            ch.bwd = cell(spec.char_dim, spec.char_hidden, &mut r);
        }
        if let (Some(f), Some(b)) = (model.word_fwd.as_mut(), model.word_bwd.as_mut()) {
            let input = f.input_dim();
            *f = cell(input, spec.word_hidden, &mut r);
            *b = cell(input, spec.word_hidden, &mut r);
        }
        let proj_range = match spec.init {
            Init::Uniform => 1.0,
            Init::Scaled => libm::sqrt(6.0 / (model.projection.rows() + model.projection.cols()) as f64),
        };
        let n = model.projection.as_slice().len();
        model
            .projection
            .as_mut_slice()
            .copy_from_slice(&rng::uniform_vec(&mut r, n, proj_range));
        if spec.init == Init::Uniform {
            model.projection_bias = rng::uniform_vec(&mut r, num_tags, 1.0);
            if let Some(tr) = model.transitions.as_mut() {
                let n = tr.matrix().as_slice().len();
                let m = Matrix::from_vec(num_tags + 1, num_tags + 1, rng::uniform_vec(&mut r, n, 1.0));
                *tr = Transitions::from_matrix(m)?;
            }
        }
        Ok(model)
    }

    pub fn layout(&self) -> ModelLayout {
        ModelLayout {
            variant: self.variant,
            num_tags: self.num_tags,
            vocab: self.vocab.clone(),
            word_segments: self.word_segments.clone(),
            seed: self.seed,
            chars: self.chars.as_ref().map(|c| {
                let mut alphabet: Vec<(usize, char)> = c.alphabet.iter().map(|(&ch, &i)| (i, ch)).collect();
                alphabet.sort_unstable();
                (alphabet.into_iter().map(|(_, ch)| ch).collect(), c.table.cols(), c.hidden_dim())
            }),
            features: self.features.as_ref().map(|e| {
                e.tables()
                    .iter()
                    .map(|t| (t.family, t.values().map(|(v, i)| (String::from(v), i)).collect()))
                    .collect()
            }),
            word_hidden: self.word_fwd.as_ref().map_or(0, LstmCell::hidden_dim),
        }
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn num_tags(&self) -> usize {
        self.num_tags
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn word_dim(&self) -> usize {
        self.word_table.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.word_dim()
            + self.chars.as_ref().map_or(0, |c| 2 * c.hidden_dim())
            + self.features.as_ref().map_or(0, FeatureEncoder::total_dim)
    }

    /// Every tensor as `(name, (rows, cols), values)`, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, (usize, usize), &[f64])> {
        let mut out: Vec<(String, (usize, usize), &[f64])> = Vec::new();
        let shape = |m: &Matrix| (m.rows(), m.cols());
        out.push(("word_table".into(), shape(&self.word_table), self.word_table.as_slice()));
        if let Some(c) = &self.chars {
            out.push(("char_table".into(), shape(&c.table), c.table.as_slice()));
            push_cell(&mut out, "char_fwd", &c.fwd);
            push_cell(&mut out, "char_bwd", &c.bwd);
        }
        if let Some(f) = &self.features {
            for t in f.tables() {
                out.push((format!("feature.{}", t.family.name()), shape(&t.vectors), t.vectors.as_slice()));
            }
        }
        if let (Some(f), Some(b)) = (&self.word_fwd, &self.word_bwd) {
            push_cell(&mut out, "word_fwd", f);
            push_cell(&mut out, "word_bwd", b);
        }
        out.push(("projection".into(), shape(&self.projection), self.projection.as_slice()));
        out.push(("projection_bias".into(), (1, self.num_tags), &self.projection_bias));
        if let Some(tr) = &self.transitions {
            out.push(("transitions".into(), shape(tr.matrix()), tr.matrix().as_slice()));
        }
        out
    }

    /// Mutable view in the same order as [`ModelParameters::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![self.word_table.as_mut_slice()];
        if let Some(c) = &mut self.chars {
            out.push(c.table.as_mut_slice());
            out.extend(c.fwd.tensors_mut());
            out.extend(c.bwd.tensors_mut());
        }
        if let Some(f) = &mut self.features {
            for t in f.tables_mut() {
                out.push(t.vectors.as_mut_slice());
            }
        }
        if let (Some(f), Some(b)) = (&mut self.word_fwd, &mut self.word_bwd) {
            out.extend(f.tensors_mut());
            out.extend(b.tensors_mut());
        }
        out.push(self.projection.as_mut_slice());
        out.push(&mut self.projection_bias);
        if let Some(tr) = &mut self.transitions {
            let k = tr.num_tags();
            let m = tr.matrix_mut();
            // The boundary→boundary entry is structurally zero.
            m.set(k, k, 0.0);
            out.push(m.as_mut_slice());
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, _, t)| t.iter().all(|v| v.is_finite()))
    }

    fn word_source(&self, word: &str) -> WordSource {
        match self.vocab.lookup(word) {
            Some(i) => WordSource::Row(i),
            None => WordSource::Fixed(random_word_vector(word, &self.word_segments, self.seed)),
        }
    }

    /// Word embedding with exact, then lowercase, then keyed-random fallback.
    pub fn word_vector(&self, word: &str) -> Vec<f64> {
        match self.word_source(word) {
            WordSource::Row(i) => self.word_table.row(i).to_vec(),
            WordSource::Fixed(v) => v,
        }
    }

    fn char_trace(&self, word: &str) -> Option<CharTrace> {
        let ch = self.chars.as_ref()?;
        let ids: Vec<usize> = word.chars().map(|c| ch.index(c)).collect();
        let xs: Vec<&[f64]> = ids.iter().map(|&i| ch.table.row(i)).collect();
        let rev: Vec<&[f64]> = xs.iter().rev().copied().collect();
        Some(CharTrace {
            fwd: ch.fwd.run(&xs),
            bwd: ch.bwd.run(&rev),
            ids,
        })
    }

    /// Final forward state and final backward state of the character BiLSTM
    /// over `word`. Empty when the model has no character encoder.
    pub fn char_embed(&self, word: &str) -> Vec<f64> {
        match self.char_trace(word) {
            Some(t) => char_output(&t),
            None => Vec::new(),
        }
    }

    fn token_trace(&self, sentence: &Sentence, position: usize, dropout: Option<&Dropout>) -> TokenTrace {
        let surface = sentence.tokens()[position].surface();
        let word = self.word_source(surface);
        let chars = self.char_trace(surface);
        let features = self
            .features
            .as_ref()
            .map_or_else(Vec::new, |f| f.slots(sentence, position));
        let mut input = match &word {
            WordSource::Row(i) => self.word_table.row(*i).to_vec(),
            WordSource::Fixed(v) => v.clone(),
        };
        if let Some(t) = &chars {
            input.extend(char_output(t));
        }
        if let Some(f) = &self.features {
            f.encode_into(&features, &mut input);
        }
        let mask = dropout.map(|d| d.mask(position, input.len()));
        if let Some(m) = &mask {
            for (x, k) in input.iter_mut().zip(m) {
                *x *= k;
            }
        }
        TokenTrace {
            word,
            chars,
            features,
            mask,
            input,
        }
    }

    /// Concatenated word / character / feature vector for one token, with
    /// dropout in training mode.
    pub fn token_representation(&self, sentence: &Sentence, position: usize, mode: Mode) -> Result<Vec<f64>> {
        if position >= sentence.len() {
            return Err(Error::Argument(format!("position {position} outside sentence")));
        }
        let dropout = match &mode {
            Mode::Train(d) => Some(d),
            Mode::Infer => None,
        };
        Ok(self.token_trace(sentence, position, dropout).input)
    }

    fn trace(&self, sentence: &Sentence, dropout: Option<&Dropout>) -> Trace {
        let tokens: Vec<TokenTrace> = (0..sentence.len())
            .map(|p| self.token_trace(sentence, p, dropout))
            .collect();
        let xs: Vec<&[f64]> = tokens.iter().map(|t| t.input.as_slice()).collect();
        let len = tokens.len();
        let mut logits = Lattice::zeros(len, self.num_tags);
        let (fwd, bwd, hidden) = match (&self.word_fwd, &self.word_bwd) {
            (Some(f), Some(b)) => {
                let rev: Vec<&[f64]> = xs.iter().rev().copied().collect();
                let fc = f.run(&xs);
                let bc = b.run(&rev);
                let hidden: Vec<Vec<f64>> = (0..len)
                    .map(|t| {
                        let mut h = fc[t].h.clone();
                        h.extend_from_slice(&bc[len - 1 - t].h);
                        h
                    })
                    .collect();
                (fc, bc, hidden)
            }
            _ => (Vec::new(), Vec::new(), Vec::new()),
        };
        for t in 0..len {
            let row = logits.row_mut(t);
            row.copy_from_slice(&self.projection_bias);
            let x = if hidden.is_empty() { xs[t] } else { &hidden[t] };
            self.projection.matvec_acc(x, row);
        }
        Trace {
            tokens,
            fwd,
            bwd,
            hidden,
            logits,
        }
    }

    /// Per-token tag scores (softmax logits or CRF emissions), no dropout.
    pub fn emissions(&self, sentence: &Sentence) -> Lattice {
        self.trace(sentence, None).logits
    }

    /// Per-token class posteriors of a softmax-output model.
    pub fn forward_blstm(&self, sentence: &Sentence) -> Result<Vec<Vec<f64>>> {
        if self.variant != Variant::Blstm {
            return Err(Error::Argument("posteriors need a softmax-output model".into()));
        }
        let logits = self.emissions(sentence);
        Ok((0..logits.len()).map(|t| softmax(logits.row(t))).collect())
    }

    /// Predicted tags: per-token argmax for the softmax model, Viterbi for
    /// CRF outputs; both passed through BIO repair.
    pub fn predict(&self, sentence: &Sentence) -> Vec<Tag> {
        let logits = self.emissions(sentence);
        let raw: Vec<Tag> = match &self.transitions {
            Some(tr) => {
                let (path, _) = tr.viterbi(&logits).expect("emission width matches transitions");
                path.into_iter().map(Tag::from_index).collect()
            }
            None => (0..logits.len()).map(|t| Tag::from_index(argmax(logits.row(t)))).collect(),
        };
        repair_bio(&raw)
    }

    /// Loss of `gold` and its gradient for every trainable tensor. The softmax
    /// model uses summed per-token cross-entropy, CRF outputs the sequence
    /// negative log-likelihood.
    pub fn loss_and_gradients(
        &self,
        sentence: &Sentence,
        gold: &[Tag],
        dropout: Option<Dropout>,
    ) -> Result<(f64, ModelGradients)> {
        if gold.len() != sentence.len() {
            return Err(Error::Dimension {
                context: "gold tags",
                expected: sentence.len(),
                actual: gold.len(),
            });
        }
        if let Some(bad) = gold.iter().find(|t| t.index() >= self.num_tags) {
            return Err(Error::Argument(format!("tag index {} outside model", bad.index())));
        }
        let trace = self.trace(sentence, dropout.as_ref());
        let len = sentence.len();
        let mut grads = ModelGradients::zeros_for(self);

        let (loss, dlogits) = match &self.transitions {
            Some(tr) => {
                let y: Vec<usize> = gold.iter().map(|t| t.index()).collect();
                let g = tr.nll_and_gradient(&trace.logits, &y)?;
                if let Some(gt) = grads.transitions.as_mut() {
                    *gt = g.transitions;
                }
                (g.nll, g.emissions)
            }
            None => {
                let mut d = Lattice::zeros(len, self.num_tags);
                let mut loss = 0.0;
                for (t, y) in gold.iter().enumerate() {
                    let row = trace.logits.row(t);
                    loss += logsumexp(row) - row[y.index()];
                    let p = softmax(row);
                    let drow = d.row_mut(t);
                    drow.copy_from_slice(&p);
                    drow[y.index()] -= 1.0;
                }
                (loss, d)
            }
        };

        for t in 0..len {
            axpy(1.0, dlogits.row(t), &mut grads.projection_bias);
        }
        let (Some(fwd), Some(bwd)) = (&self.word_fwd, &self.word_bwd) else {
            // CRF baseline: token representations are frozen inputs.
            for t in 0..len {
                grads.projection.outer_acc(dlogits.row(t), &trace.tokens[t].input);
            }
            return Ok((loss, grads));
        };

        let h = fwd.hidden_dim();
        let mut dhidden = vec![vec![0.0; 2 * h]; len];
        for t in 0..len {
            grads.projection.outer_acc(dlogits.row(t), &trace.hidden[t]);
            self.projection.matvec_t_acc(dlogits.row(t), &mut dhidden[t]);
        }
        let xs: Vec<&[f64]> = trace.tokens.iter().map(|t| t.input.as_slice()).collect();
        let xs_rev: Vec<&[f64]> = xs.iter().rev().copied().collect();
        let mut dinput = vec![vec![0.0; self.input_dim()]; len];
        {
            let dh_f: Vec<&[f64]> = dhidden.iter().map(|d| &d[..h]).collect();
            let mut dx: Vec<&mut [f64]> = dinput.iter_mut().map(Vec::as_mut_slice).collect();
            fwd.backprop(&xs, &trace.fwd, &dh_f, grads.word_fwd.as_mut().unwrap(), &mut dx);
        }
        {
            let dh_b: Vec<&[f64]> = dhidden.iter().rev().map(|d| &d[h..]).collect();
            let mut dx: Vec<&mut [f64]> = dinput.iter_mut().rev().map(Vec::as_mut_slice).collect();
            bwd.backprop(&xs_rev, &trace.bwd, &dh_b, grads.word_bwd.as_mut().unwrap(), &mut dx);
        }

        let word_dim = self.word_dim();
        for (tok, mut d) in trace.tokens.iter().zip(dinput) {
            if let Some(m) = &tok.mask {
                for (g, k) in d.iter_mut().zip(m) {
                    *g *= k;
                }
            }
            if let WordSource::Row(i) = tok.word {
                let row = grads.word_rows.entry(i).or_insert_with(|| vec![0.0; word_dim]);
                axpy(1.0, &d[..word_dim], row);
            }
            let mut offset = word_dim;
            if let (Some(ch), Some(ct)) = (&self.chars, &tok.chars) {
                let hc = ch.hidden_dim();
                self.char_backprop(ch, ct, &d[offset..offset + 2 * hc], &mut grads);
                offset += 2 * hc;
            }
            if let Some(enc) = &self.features {
                for ((table, slot), rows) in enc.tables().iter().zip(&tok.features).zip(grads.feature_rows.iter_mut()) {
                    let dim = table.family.dim();
                    if let FeatureSlot::Row(r) = slot {
                        let row = rows.entry(*r).or_insert_with(|| vec![0.0; dim]);
                        axpy(1.0, &d[offset..offset + dim], row);
                    }
                    offset += dim;
                }
            }
        }
        Ok((loss, grads))
    }

    fn char_backprop(&self, ch: &CharEncoder, trace: &CharTrace, dout: &[f64], grads: &mut ModelGradients) {
        let hc = ch.hidden_dim();
        let n = trace.ids.len();
        let zero = vec![0.0; hc];
        let xs: Vec<&[f64]> = trace.ids.iter().map(|&i| ch.table.row(i)).collect();
        let rev: Vec<&[f64]> = xs.iter().rev().copied().collect();
        let mut dx = vec![vec![0.0; ch.table.cols()]; n];
        let gc = grads.chars.as_mut().expect("char gradients exist with a char encoder");
        {
            let dh: Vec<&[f64]> = (0..n).map(|t| if t + 1 == n { &dout[..hc] } else { &zero[..] }).collect();
            let mut dxr: Vec<&mut [f64]> = dx.iter_mut().map(Vec::as_mut_slice).collect();
            ch.fwd.backprop(&xs, &trace.fwd, &dh, &mut gc.fwd, &mut dxr);
        }
        {
            let dh: Vec<&[f64]> = (0..n).map(|t| if t + 1 == n { &dout[hc..] } else { &zero[..] }).collect();
            let mut dxr: Vec<&mut [f64]> = dx.iter_mut().rev().map(Vec::as_mut_slice).collect();
            ch.bwd.backprop(&rev, &trace.bwd, &dh, &mut gc.bwd, &mut dxr);
        }
        for (&id, d) in trace.ids.iter().zip(&dx) {
            axpy(1.0, d, gc.table.row_mut(id));
        }
    }

    /// `self += step · grads`
    pub fn apply_update(&mut self, grads: &ModelGradients, step: f64) {
        for (&i, g) in &grads.word_rows {
            axpy(step, g, self.word_table.row_mut(i));
        }
        if let (Some(c), Some(g)) = (self.chars.as_mut(), grads.chars.as_ref()) {
            axpy(step, g.table.as_slice(), c.table.as_mut_slice());
            c.fwd.add_scaled(step, &g.fwd);
            c.bwd.add_scaled(step, &g.bwd);
        }
        if let Some(enc) = self.features.as_mut() {
            for (t, rows) in enc.tables_mut().iter_mut().zip(&grads.feature_rows) {
                for (&r, g) in rows {
                    axpy(step, g, t.vectors.row_mut(r));
                }
            }
        }
        if let (Some(f), Some(g)) = (self.word_fwd.as_mut(), grads.word_fwd.as_ref()) {
            f.add_scaled(step, g);
        }
        if let (Some(b), Some(g)) = (self.word_bwd.as_mut(), grads.word_bwd.as_ref()) {
            b.add_scaled(step, g);
        }
        axpy(step, grads.projection.as_slice(), self.projection.as_mut_slice());
        axpy(step, &grads.projection_bias, &mut self.projection_bias);
        if let (Some(tr), Some(g)) = (self.transitions.as_mut(), grads.transitions.as_ref()) {
            let k = tr.num_tags();
            let m = tr.matrix_mut();
            axpy(step, g.as_slice(), m.as_mut_slice());
            m.set(k, k, 0.0);
        }
    }
}

fn push_cell<'a>(out: &mut Vec<(String, (usize, usize), &'a [f64])>, prefix: &str, cell: &'a LstmCell) {
    for ((name, s), t) in LSTM_TENSORS.iter().zip(cell.shapes()).zip(cell.tensors()) {
        out.push((format!("{prefix}.{name}"), s, t));
    }
}

fn char_output(t: &CharTrace) -> Vec<f64> {
    let mut out = t.fwd.last().map(|s| s.h.clone()).unwrap_or_default();
    out.extend(t.bwd.last().map(|s| s.h.clone()).unwrap_or_default());
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharGradients {
    pub table: Matrix,
    pub fwd: LstmCell,
    pub bwd: LstmCell,
}

/// Gradient of the loss for one sentence. Embedding and feature tables are
/// stored sparsely by row.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGradients {
    pub word_rows: BTreeMap<usize, Vec<f64>>,
    pub chars: Option<CharGradients>,
    pub feature_rows: Vec<BTreeMap<usize, Vec<f64>>>,
    pub word_fwd: Option<LstmCell>,
    pub word_bwd: Option<LstmCell>,
    pub projection: Matrix,
    pub projection_bias: Vec<f64>,
    pub transitions: Option<Matrix>,
}

impl ModelGradients {
    pub fn zeros_for(model: &ModelParameters) -> Self {
        let zero_cell = |c: &LstmCell| LstmCell::zeros(c.input_dim(), c.hidden_dim());
        Self {
            word_rows: BTreeMap::new(),
            chars: model.chars.as_ref().map(|c| CharGradients {
                table: Matrix::zeros(c.table.rows(), c.table.cols()),
                fwd: zero_cell(&c.fwd),
                bwd: zero_cell(&c.bwd),
            }),
            feature_rows: model
                .features
                .as_ref()
                .map_or_else(Vec::new, |f| f.tables().iter().map(|_| BTreeMap::new()).collect()),
            word_fwd: model.word_fwd.as_ref().map(zero_cell),
            word_bwd: model.word_bwd.as_ref().map(zero_cell),
            projection: Matrix::zeros(model.projection.rows(), model.projection.cols()),
            projection_bias: vec![0.0; model.num_tags],
            transitions: model
                .transitions
                .as_ref()
                .map(|t| Matrix::zeros(t.num_tags() + 1, t.num_tags() + 1)),
        }
    }

    fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.word_rows.values().map(Vec::as_slice).collect();
        if let Some(c) = &self.chars {
            out.push(c.table.as_slice());
            out.extend(c.fwd.tensors());
            out.extend(c.bwd.tensors());
        }
        out.extend(self.feature_rows.iter().flat_map(|rows| rows.values().map(Vec::as_slice)));
        for cell in [&self.word_fwd, &self.word_bwd].into_iter().flatten() {
            out.extend(cell.tensors());
        }
        out.push(self.projection.as_slice());
        out.push(&self.projection_bias);
        if let Some(t) = &self.transitions {
            out.push(t.as_slice());
        }
        out
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.slices().iter().map(|s| sum_squares(s)).sum())
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    pub fn scale(&mut self, s: f64) {
        let scale = |xs: &mut [f64]| xs.iter_mut().for_each(|x| *x *= s);
        self.word_rows.values_mut().for_each(|v| scale(v));
        if let Some(c) = &mut self.chars {
            scale(c.table.as_mut_slice());
            c.fwd.tensors_mut().into_iter().for_each(scale);
            c.bwd.tensors_mut().into_iter().for_each(scale);
        }
        self.feature_rows
            .iter_mut()
            .for_each(|rows| rows.values_mut().for_each(|v| scale(v)));
        for cell in [&mut self.word_fwd, &mut self.word_bwd].into_iter().flatten() {
            cell.tensors_mut().into_iter().for_each(scale);
        }
        scale(self.projection.as_mut_slice());
        scale(&mut self.projection_bias);
        if let Some(t) = &mut self.transitions {
            scale(t.as_mut_slice());
        }
    }

    /// Rescales to L2 norm at most `max_norm`; returns the original norm.
    pub fn clip(&mut self, max_norm: f64) -> f64 {
        let n = self.norm();
        if n > max_norm {
            self.scale(max_norm / n);
        }
        n
    }

    /// Dense copy in [`ModelParameters::tensors`] order.
    pub fn dense(&self, model: &ModelParameters) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        let mut word = vec![0.0; model.word_table.as_slice().len()];
        let d = model.word_dim();
        for (&i, g) in &self.word_rows {
            word[i * d..(i + 1) * d].copy_from_slice(g);
        }
        out.push(word);
        if let Some(c) = &self.chars {
            out.push(c.table.as_slice().to_vec());
            out.extend(c.fwd.tensors().iter().map(|t| t.to_vec()));
            out.extend(c.bwd.tensors().iter().map(|t| t.to_vec()));
        }
        if let Some(enc) = &model.features {
            for (t, rows) in enc.tables().iter().zip(&self.feature_rows) {
                let dim = t.family.dim();
                let mut dense = vec![0.0; t.vectors.as_slice().len()];
                for (&r, g) in rows {
                    dense[r * dim..(r + 1) * dim].copy_from_slice(g);
                }
                out.push(dense);
            }
        }
        for cell in [&self.word_fwd, &self.word_bwd].into_iter().flatten() {
            out.extend(cell.tensors().iter().map(|t| t.to_vec()));
        }
        out.push(self.projection.as_slice().to_vec());
        out.push(self.projection_bias.clone());
        if let Some(t) = &self.transitions {
            out.push(t.as_slice().to_vec());
        }
        out
    }
}
