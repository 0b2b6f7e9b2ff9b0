//! GloVe: weighted least squares on log co-occurrence counts.
//!
//! Minimizes `Σ f(Xᵢⱼ) (wᵢ·w̃ⱼ + bᵢ + b̃ⱼ − log Xᵢⱼ)²` with
//! `f(x) = min(1, (x / x_max)^α)` by per-entry AdaGrad, and returns
//! `wᵢ + w̃ᵢ` as the embedding of word `i`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;

use super::{EmbeddingTable, Provenance};
use crate::math::{dot, ln, sqrt};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GloveParams {
    pub dim: usize,
    /// Symmetric context window, in tokens.
    pub window: usize,
    pub x_max: f64,
    pub alpha: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub min_count: usize,
    pub seed: u64,
}

impl Default for GloveParams {
    fn default() -> Self {
        Self {
            dim: 50,
            window: 10,
            x_max: 100.0,
            alpha: 0.75,
            iterations: 50,
            learning_rate: 0.05,
            min_count: 1,
            seed: 1,
        }
    }
}

/// Sparse symmetric co-occurrence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Cooccurrence {
    /// Sorted by descending frequency, ties by word.
    pub words: Vec<String>,
    /// `(row, col, weighted count)`, both orientations present, sorted.
    pub entries: Vec<(u32, u32, f64)>,
}

impl Cooccurrence {
    pub fn get(&self, a: &str, b: &str) -> f64 {
        let find = |w: &str| self.words.iter().position(|x| x == w);
        match (find(a), find(b)) {
            (Some(i), Some(j)) => self
                .entries
                .binary_search_by(|e| (e.0, e.1).cmp(&(i as u32, j as u32)))
                .map_or(0.0, |k| self.entries[k].2),
            _ => 0.0,
        }
    }
}

/// Counts pairs within `window` tokens of each other inside each sentence,
/// each pair weighted by `1 / distance`. Words rarer than `min_count` are
/// dropped before windowing.
pub fn cooccurrence(corpus: &[Vec<String>], window: usize, min_count: usize) -> Result<Cooccurrence> {
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for s in corpus {
        for w in s {
            *freq.entry(w.as_str()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = freq.into_iter().filter(|&(_, c)| c >= min_count).collect();
    if kept.is_empty() {
        return Err(Error::Empty("corpus after min-count filtering"));
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let index: BTreeMap<&str, u32> = kept.iter().enumerate().map(|(i, (w, _))| (*w, i as u32)).collect();

    let mut counts: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for s in corpus {
        let ids: Vec<u32> = s.iter().filter_map(|w| index.get(w.as_str()).copied()).collect();
        for (i, &a) in ids.iter().enumerate() {
            for d in 1..=window {
                let Some(&b) = ids.get(i + d) else { break };
                let w = 1.0 / d as f64;
                *counts.entry((a, b)).or_default() += w;
                *counts.entry((b, a)).or_default() += w;
            }
        }
    }
    Ok(Cooccurrence {
        words: kept.into_iter().map(|(w, _)| String::from(w)).collect(),
        entries: counts.into_iter().map(|((a, b), x)| (a, b, x)).collect(),
    })
}

/// Trained table plus the objective before training and after every pass.
#[derive(Debug, Clone)]
pub struct GloveRun {
    pub table: EmbeddingTable,
    pub objective: Vec<f64>,
}

struct GloveState {
    dim: usize,
    word: Vec<f64>,
    context: Vec<f64>,
    word_bias: Vec<f64>,
    context_bias: Vec<f64>,
    word_sq: Vec<f64>,
    context_sq: Vec<f64>,
    word_bias_sq: Vec<f64>,
    context_bias_sq: Vec<f64>,
}

impl GloveState {
    fn residual(&self, i: usize, j: usize, x: f64) -> f64 {
        let d = self.dim;
        dot(&self.word[i * d..(i + 1) * d], &self.context[j * d..(j + 1) * d])
            + self.word_bias[i]
            + self.context_bias[j]
            - ln(x)
    }

    fn objective(&self, entries: &[(u32, u32, f64)], params: &GloveParams) -> f64 {
        entries
            .iter()
            .map(|&(i, j, x)| {
                let r = self.residual(i as usize, j as usize, x);
                weight(x, params) * r * r
            })
            .sum()
    }
}

fn weight(x: f64, params: &GloveParams) -> f64 {
    if x < params.x_max {
        libm::pow(x / params.x_max, params.alpha)
    } else {
        1.0
    }
}

pub fn train_glove(corpus: &[Vec<String>], params: &GloveParams) -> Result<GloveRun> {
    if params.dim == 0 || params.window == 0 || params.iterations == 0 {
        return Err(Error::Argument("GloVe dim, window and iterations must be positive".into()));
    }
    let cooc = cooccurrence(corpus, params.window, params.min_count.max(1))?;
    let n = cooc.words.len();
    let d = params.dim;
    let mut init = rng::stream(params.seed, &[b"glove-init"]);
    let scale = 0.5 / d as f64;
    let mut st = GloveState {
        dim: d,
        word: rng::uniform_vec(&mut init, n * d, scale),
        context: rng::uniform_vec(&mut init, n * d, scale),
        word_bias: rng::uniform_vec(&mut init, n, scale),
        context_bias: rng::uniform_vec(&mut init, n, scale),
        word_sq: vec![1.0; n * d],
        context_sq: vec![1.0; n * d],
        word_bias_sq: vec![1.0; n],
        context_bias_sq: vec![1.0; n],
    };

    let mut objective = Vec::with_capacity(params.iterations + 1);
    objective.push(st.objective(&cooc.entries, params));
    let mut order: Vec<usize> = (0..cooc.entries.len()).collect();
    for it in 0..params.iterations {
        order.shuffle(&mut rng::stream(params.seed, &[b"glove-order", &(it as u64).to_le_bytes()]));
        for &e in &order {
            let (i, j, x) = cooc.entries[e];
            let (i, j) = (i as usize, j as usize);
            let g = params.learning_rate * weight(x, params) * st.residual(i, j, x);
            for k in 0..d {
                let wi = i * d + k;
                let cj = j * d + k;
                let gw = g * st.context[cj];
                let gc = g * st.word[wi];
                st.word[wi] -= gw / sqrt(st.word_sq[wi]);
                st.context[cj] -= gc / sqrt(st.context_sq[cj]);
                st.word_sq[wi] += gw * gw;
                st.context_sq[cj] += gc * gc;
            }
            st.word_bias[i] -= g / sqrt(st.word_bias_sq[i]);
            st.context_bias[j] -= g / sqrt(st.context_bias_sq[j]);
            st.word_bias_sq[i] += g * g;
            st.context_bias_sq[j] += g * g;
        }
        objective.push(st.objective(&cooc.entries, params));
    }

    let mut table = EmbeddingTable::new(d)?;
    let mut v = vec![0.0; d];
    for (i, w) in cooc.words.iter().enumerate() {
        for k in 0..d {
            v[k] = st.word[i * d + k] + st.context[i * d + k];
        }
        table.insert(w, &v, Provenance::Pretrained)?;
    }
    Ok(GloveRun { table, objective })
}
