//! Linear-chain conditional random field.
//!
//! A sequence `y` of length `T` over `K` tags scores
//!
//! ```text
//! s(y) = start[y₀] + Σₜ emit[t, yₜ] + Σₜ trans[yₜ₋₁, yₜ] + stop[y_{T-1}]
//! ```
//!
//! and `p(y | x) = exp(s(y)) / Z` with `Z = Σ_y exp(s(y))`. Start and stop
//! scores live in the extra row / column `K` of the `(K+1) × (K+1)`
//! transition matrix. All dynamic programming is in log space.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{logsumexp, Matrix};
use crate::{Error, Result};

/// `T × K` matrix of unary scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    scores: Matrix,
}

impl Lattice {
    pub fn new(len: usize, num_tags: usize, scores: Vec<f64>) -> Result<Self> {
        if len == 0 || num_tags == 0 {
            return Err(Error::Empty("lattice"));
        }
        if scores.len() != len * num_tags {
            return Err(Error::Dimension {
                context: "lattice scores",
                expected: len * num_tags,
                actual: scores.len(),
            });
        }
        Ok(Self {
            scores: Matrix::from_vec(len, num_tags, scores),
        })
    }

    pub fn zeros(len: usize, num_tags: usize) -> Self {
        Self {
            scores: Matrix::zeros(len, num_tags),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Argument("ragged lattice rows".into()));
        }
        Self::new(rows.len(), k, rows.concat())
    }

    pub fn len(&self) -> usize {
        self.scores.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_tags(&self) -> usize {
        self.scores.cols()
    }

    #[inline]
    pub fn get(&self, t: usize, k: usize) -> f64 {
        self.scores.get(t, k)
    }

    pub fn row(&self, t: usize) -> &[f64] {
        self.scores.row(t)
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [f64] {
        self.scores.row_mut(t)
    }

    pub fn as_slice(&self) -> &[f64] {
        self.scores.as_slice()
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        self.scores.as_mut_slice()
    }
}

/// Tag-bigram scores including the virtual boundary state at index `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transitions {
    num_tags: usize,
    scores: Matrix,
}

impl Transitions {
    pub fn zeros(num_tags: usize) -> Self {
        Self {
            num_tags,
            scores: Matrix::zeros(num_tags + 1, num_tags + 1),
        }
    }

    /// From a full `(K+1) × (K+1)` matrix. The boundary→boundary entry is
    /// unused and forced to zero.
    pub fn from_matrix(mut scores: Matrix) -> Result<Self> {
        if scores.rows() != scores.cols() || scores.rows() < 2 {
            return Err(Error::Argument("transition matrix must be square with K ≥ 1".into()));
        }
        let k = scores.rows() - 1;
        scores.set(k, k, 0.0);
        Ok(Self { num_tags: k, scores })
    }

    pub fn num_tags(&self) -> usize {
        self.num_tags
    }

    #[inline]
    pub fn start(&self, to: usize) -> f64 {
        self.scores.get(self.num_tags, to)
    }

    #[inline]
    pub fn stop(&self, from: usize) -> f64 {
        self.scores.get(from, self.num_tags)
    }

    #[inline]
    pub fn between(&self, from: usize, to: usize) -> f64 {
        self.scores.get(from, to)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.scores
    }

    pub fn matrix_mut(&mut self) -> &mut Matrix {
        &mut self.scores
    }

    fn check(&self, lattice: &Lattice) -> Result<()> {
        if lattice.num_tags() != self.num_tags {
            return Err(Error::Dimension {
                context: "lattice tags vs transitions",
                expected: self.num_tags,
                actual: lattice.num_tags(),
            });
        }
        Ok(())
    }

    pub fn sequence_score(&self, lattice: &Lattice, tags: &[usize]) -> Result<f64> {
        self.check(lattice)?;
        if tags.len() != lattice.len() {
            return Err(Error::Dimension {
                context: "tag sequence length",
                expected: lattice.len(),
                actual: tags.len(),
            });
        }
        if let Some(&bad) = tags.iter().find(|&&y| y >= self.num_tags) {
            return Err(Error::Argument(alloc::format!("tag index {bad} out of range")));
        }
        let mut score = self.start(tags[0]) + self.stop(tags[tags.len() - 1]);
        for (t, &y) in tags.iter().enumerate() {
            score += lattice.get(t, y);
            if t > 0 {
                score += self.between(tags[t - 1], y);
            }
        }
        Ok(score)
    }

    /// Forward log-messages: `alpha[t][k]` is the log-sum of every prefix
    /// ending in tag `k` at position `t`, emissions included.
    fn forward(&self, lattice: &Lattice) -> Matrix {
        let (len, k) = (lattice.len(), self.num_tags);
        let mut alpha = Matrix::zeros(len, k);
        for j in 0..k {
            alpha.set(0, j, self.start(j) + lattice.get(0, j));
        }
        let mut buf = vec![0.0; k];
        for t in 1..len {
            for j in 0..k {
                for (i, b) in buf.iter_mut().enumerate() {
                    *b = alpha.get(t - 1, i) + self.between(i, j);
                }
                alpha.set(t, j, logsumexp(&buf) + lattice.get(t, j));
            }
        }
        alpha
    }

    /// Backward log-messages: `beta[t][k]` is the log-sum over suffixes after
    /// position `t` given tag `k` at `t`, stop score included.
    fn backward(&self, lattice: &Lattice) -> Matrix {
        let (len, k) = (lattice.len(), self.num_tags);
        let mut beta = Matrix::zeros(len, k);
        for i in 0..k {
            beta.set(len - 1, i, self.stop(i));
        }
        let mut buf = vec![0.0; k];
        for t in (0..len - 1).rev() {
            for i in 0..k {
                for (j, b) in buf.iter_mut().enumerate() {
                    *b = self.between(i, j) + lattice.get(t + 1, j) + beta.get(t + 1, j);
                }
                beta.set(t, i, logsumexp(&buf));
            }
        }
        beta
    }

    fn log_partition_from(&self, alpha: &Matrix) -> f64 {
        let last = alpha.rows() - 1;
        let ends: Vec<f64> = (0..self.num_tags)
            .map(|j| alpha.get(last, j) + self.stop(j))
            .collect();
        logsumexp(&ends)
    }

    pub fn log_partition(&self, lattice: &Lattice) -> Result<f64> {
        self.check(lattice)?;
        Ok(self.log_partition_from(&self.forward(lattice)))
    }

    /// Negative log-likelihood of `gold` and its gradient with respect to the
    /// transitions and the emissions (expected minus observed counts).
    pub fn nll_and_gradient(&self, lattice: &Lattice, gold: &[usize]) -> Result<CrfGradient> {
        let gold_score = self.sequence_score(lattice, gold)?;
        let (len, k) = (lattice.len(), self.num_tags);
        let alpha = self.forward(lattice);
        let beta = self.backward(lattice);
        let log_z = self.log_partition_from(&alpha);

        let mut emissions = Lattice::zeros(len, k);
        let mut transitions = Matrix::zeros(k + 1, k + 1);
        for t in 0..len {
            for j in 0..k {
                let p = crate::math::exp(alpha.get(t, j) + beta.get(t, j) - log_z);
                emissions.row_mut(t)[j] = p;
                if t == 0 {
                    transitions.row_mut(k)[j] += p;
                }
                if t == len - 1 {
                    transitions.row_mut(j)[k] += p;
                }
            }
            if t > 0 {
                for i in 0..k {
                    for j in 0..k {
                        let lp = alpha.get(t - 1, i)
                            + self.between(i, j)
                            + lattice.get(t, j)
                            + beta.get(t, j)
                            - log_z;
                        transitions.row_mut(i)[j] += crate::math::exp(lp);
                    }
                }
            }
        }
        for (t, &y) in gold.iter().enumerate() {
            emissions.row_mut(t)[y] -= 1.0;
            if t > 0 {
                transitions.row_mut(gold[t - 1])[y] -= 1.0;
            }
        }
        transitions.row_mut(k)[gold[0]] -= 1.0;
        transitions.row_mut(gold[len - 1])[k] -= 1.0;

        Ok(CrfGradient {
            nll: log_z - gold_score,
            transitions,
            emissions,
        })
    }

    /// Highest-scoring tag sequence and its score. Among exactly tied
    /// optima the lexicographically smallest index sequence is returned.
    pub fn viterbi(&self, lattice: &Lattice) -> Result<(Vec<usize>, f64)> {
        self.check(lattice)?;
        let (len, k) = (lattice.len(), self.num_tags);
        // best[t][i]: best score of the suffix after t given tag i at t.
        let mut best = Matrix::zeros(len, k);
        for i in 0..k {
            best.set(len - 1, i, self.stop(i));
        }
        for t in (0..len - 1).rev() {
            for i in 0..k {
                let m = (0..k)
                    .map(|j| self.between(i, j) + lattice.get(t + 1, j) + best.get(t + 1, j))
                    .fold(f64::NEG_INFINITY, f64::max);
                best.set(t, i, m);
            }
        }
        // Greedy left-to-right walk picks the smallest optimal tag first.
        let mut path = Vec::with_capacity(len);
        let mut total = 0.0;
        for t in 0..len {
            let mut choice = 0;
            let mut choice_val = f64::NEG_INFINITY;
            for j in 0..k {
                let enter = match path.last() {
                    None => self.start(j),
                    Some(&prev) => self.between(prev, j),
                };
                let v = enter + lattice.get(t, j) + best.get(t, j);
                if v > choice_val {
                    choice = j;
                    choice_val = v;
                }
            }
            if t == 0 {
                total = choice_val;
            }
            path.push(choice);
        }
        Ok((path, total))
    }
}

/// Output of [`Transitions::nll_and_gradient`].
#[derive(Debug, Clone)]
pub struct CrfGradient {
    pub nll: f64,
    /// Same layout as [`Transitions::matrix`].
    pub transitions: Matrix,
    pub emissions: Lattice,
}

/// Standalone CRF over per-token input vectors: emissions are
/// `emission_weights · xₜ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfParameters {
    /// `K × D`
    pub emission_weights: Matrix,
    pub transitions: Transitions,
}

#[derive(Debug, Clone)]
pub struct CrfParameterGradient {
    pub nll: f64,
    pub emission_weights: Matrix,
    pub transitions: Matrix,
}

impl CrfParameters {
    pub fn zeros(num_tags: usize, input_dim: usize) -> Self {
        Self {
            emission_weights: Matrix::zeros(num_tags, input_dim),
            transitions: Transitions::zeros(num_tags),
        }
    }

    pub fn num_tags(&self) -> usize {
        self.transitions.num_tags()
    }

    pub fn lattice(&self, inputs: &[Vec<f64>]) -> Result<Lattice> {
        if inputs.is_empty() {
            return Err(Error::Empty("input sequence"));
        }
        let k = self.num_tags();
        let mut lattice = Lattice::zeros(inputs.len(), k);
        for (t, x) in inputs.iter().enumerate() {
            if x.len() != self.emission_weights.cols() {
                return Err(Error::Dimension {
                    context: "CRF input vector",
                    expected: self.emission_weights.cols(),
                    actual: x.len(),
                });
            }
            self.emission_weights.matvec_acc(x, lattice.row_mut(t));
        }
        Ok(lattice)
    }

    pub fn nll_and_gradient(&self, inputs: &[Vec<f64>], gold: &[usize]) -> Result<CrfParameterGradient> {
        let lattice = self.lattice(inputs)?;
        let g = self.transitions.nll_and_gradient(&lattice, gold)?;
        let mut emission_weights = Matrix::zeros(self.num_tags(), self.emission_weights.cols());
        for (t, x) in inputs.iter().enumerate() {
            emission_weights.outer_acc(g.emissions.row(t), x);
        }
        Ok(CrfParameterGradient {
            nll: g.nll,
            emission_weights,
            transitions: g.transitions,
        })
    }

    pub fn viterbi(&self, inputs: &[Vec<f64>]) -> Result<Vec<usize>> {
        Ok(self.transitions.viterbi(&self.lattice(inputs)?)?.0)
    }
}
