//! Strict entity-level scoring.
//!
//! A predicted entity is a true positive only when its class and both
//! boundaries match a gold entity. Only true and false positives are
//! counted directly; false negatives are the gold entity count minus the
//! true positives.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use crate::corpus::{extract_entities, repair_bio, EntitySpan, Sentence, TagScheme};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub true_entities: usize,
}

impl ClassCounts {
    pub fn from_tp_fp_total(tp: usize, fp: usize, true_entities: usize) -> Self {
        debug_assert!(tp <= true_entities);
        Self {
            tp,
            fp,
            fn_: true_entities - tp,
            true_entities,
        }
    }

    pub fn predicted(&self) -> usize {
        self.tp + self.fp
    }

    fn add(&mut self, other: &ClassCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.true_entities += other.true_entities;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1; any zero denominator yields 0.
pub fn prf(counts: &ClassCounts) -> Prf {
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(counts.tp, counts.tp + counts.fp);
    let recall = ratio(counts.tp, counts.tp + counts.fn_);
    Prf {
        precision,
        recall,
        f1: f1_score(precision, recall),
    }
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Per-class counts and scores plus the micro-average over pooled counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub classes: Vec<(String, ClassCounts, Prf)>,
    pub micro: (ClassCounts, Prf),
}

impl Metrics {
    pub fn from_counts(scheme: &TagScheme, counts: &[ClassCounts]) -> Self {
        let mut pooled = ClassCounts::default();
        let classes = scheme
            .classes()
            .iter()
            .zip(counts)
            .map(|(name, c)| {
                pooled.add(c);
                (name.clone(), *c, prf(c))
            })
            .collect();
        Self {
            classes,
            micro: (pooled, prf(&pooled)),
        }
    }

    pub fn micro_f1(&self) -> f64 {
        self.micro.1.f1
    }
}

/// Strict counts per class. Gold tags come from `gold`'s gold column and must
/// be valid BIO; predictions come from `pred`'s predicted column and are
/// repaired before spans are extracted.
pub fn strict_counts(scheme: &TagScheme, gold: &[Sentence], pred: &[Sentence]) -> Result<Vec<ClassCounts>> {
    if gold.len() != pred.len() {
        return Err(Error::Structure {
            sentence: gold.len().min(pred.len()),
            reason: format!("gold has {} sentences, prediction has {}", gold.len(), pred.len()),
        });
    }
    let mut tp = alloc::vec![0usize; scheme.num_classes()];
    let mut fp = alloc::vec![0usize; scheme.num_classes()];
    let mut total = alloc::vec![0usize; scheme.num_classes()];
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        let structure = |reason: String| Error::Structure { sentence: i, reason };
        if g.len() != p.len() {
            return Err(structure(format!("{} gold tokens vs {} predicted", g.len(), p.len())));
        }
        if let Some(pos) = g.surfaces().zip(p.surfaces()).position(|(a, b)| a != b) {
            return Err(structure(format!("token {pos} differs")));
        }
        let gold_tags = g.gold_tags().ok_or_else(|| structure("missing gold tag".to_string()))?;
        let pred_tags = p.pred_tags().ok_or_else(|| structure("missing predicted tag".to_string()))?;
        let gold_spans = extract_entities(&gold_tags).map_err(|e| structure(format!("gold: {e}")))?;
        let pred_spans = extract_entities(&repair_bio(&pred_tags))?;
        let gold_set: BTreeSet<EntitySpan> = gold_spans.iter().copied().collect();
        for s in &gold_spans {
            total[s.class] += 1;
        }
        for s in &pred_spans {
            if gold_set.contains(s) {
                tp[s.class] += 1;
            } else {
                fp[s.class] += 1;
            }
        }
    }
    Ok((0..scheme.num_classes())
        .map(|c| ClassCounts::from_tp_fp_total(tp[c], fp[c], total[c]))
        .collect())
}

pub fn evaluate(scheme: &TagScheme, gold: &[Sentence], pred: &[Sentence]) -> Result<Metrics> {
    Ok(Metrics::from_counts(scheme, &strict_counts(scheme, gold, pred)?))
}

/// `100 · x` rounded half-up to two decimals.
pub fn percent(x: f64) -> f64 {
    libm::floor(x * 10_000.0 + 0.5) / 100.0
}

/// Human-readable table: one row per class and a micro-average row.
pub fn report(metrics: &Metrics) -> String {
    let width = metrics
        .classes
        .iter()
        .map(|(n, _, _)| n.len())
        .chain(core::iter::once("micro-avg".len()))
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>6} {:>6} {:>6}  {:>9} {:>9} {:>9}",
        "class", "TP", "FP", "FN", "P(%)", "R(%)", "F1(%)"
    );
    let mut row = |name: &str, c: &ClassCounts, m: &Prf| {
        let _ = writeln!(
            out,
            "{:<width$}  {:>6} {:>6} {:>6}  {:>9.2} {:>9.2} {:>9.2}",
            name,
            c.tp,
            c.fp,
            c.fn_,
            percent(m.precision),
            percent(m.recall),
            percent(m.f1)
        );
    };
    for (name, c, m) in &metrics.classes {
        row(name, c, m);
    }
    row("micro-avg", &metrics.micro.0, &metrics.micro.1);
    out
}
