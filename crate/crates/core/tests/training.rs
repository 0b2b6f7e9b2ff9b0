//! Training-loop properties on the synthetic corpus.

use seqtag_core::corpus::{Sentence, TagScheme};
use seqtag_core::network::{Init, Variant};
use seqtag_core::synth::{generate, SynthSpec};
use seqtag_core::training::{tag, train, TrainConfig};

fn config(variant: Variant, epochs: usize) -> TrainConfig {
    TrainConfig {
        variant,
        word_dim: 25,
        word_hidden: 25,
        char_dim: 10,
        char_hidden: 10,
        init: Init::Scaled,
        epochs,
        ..TrainConfig::default()
    }
}

#[test]
fn crf_loss_is_finite_and_falls_over_the_first_epochs() {
    let spec = SynthSpec::default();
    let (train_set, _) = generate(&spec).unwrap();
    let scheme = TagScheme::new(&spec.classes).unwrap();
    let cfg = TrainConfig { use_features: true, ..config(Variant::Crf, 5) };
    let cp = train(&cfg, &scheme, &train_set, &[], &[]).unwrap();
    let losses: Vec<f64> = cp.history.iter().map(|r| r.loss).collect();
    assert!(losses.iter().all(|l| l.is_finite()));
    assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
}

#[test]
fn converged_model_reproduces_training_gold() {
    let spec = SynthSpec::default();
    let (train_set, _) = generate(&spec).unwrap();
    let scheme = TagScheme::new(&spec.classes).unwrap();
    let cp = train(&config(Variant::BlstmCrf, 100), &scheme, &train_set, &[], &[]).unwrap();

    assert_eq!(cp.history.len(), 100);
    let best = cp.history.iter().map(|r| r.valid_f1).fold(f64::MIN, f64::max);
    assert_eq!(cp.history[cp.best_epoch].valid_f1, best);

    let tagged = tag(&cp, &train_set).unwrap();
    let (mut right, mut total) = (0, 0);
    for s in &tagged {
        for t in s.tokens() {
            total += 1;
            right += usize::from(t.gold == t.pred);
        }
    }
    let accuracy = right as f64 / total as f64;
    assert!(accuracy >= 0.99, "token accuracy {accuracy}");
}

#[test]
fn unlabeled_sentences_can_be_tagged() {
    let spec = SynthSpec { train_size: 20, ..SynthSpec::default() };
    let (train_set, _) = generate(&spec).unwrap();
    let scheme = TagScheme::new(&spec.classes).unwrap();
    let cp = train(&config(Variant::Blstm, 1), &scheme, &train_set, &[], &[]).unwrap();
    let raw = vec![Sentence::from_words(&["the", "unheard", "ofitis"]).unwrap()];
    let out = tag(&cp, &raw).unwrap();
    assert_eq!(out[0].pred_tags().unwrap().len(), 3);
    assert!(out[0].gold_tags().is_none());
}
