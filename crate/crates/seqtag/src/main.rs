use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use seqtag::checkpoint::{load_checkpoint, save_checkpoint};
use seqtag::config::{parse_override, synth_spec, RunSettings, SEED_ENV};
use seqtag::conll::{self, SecondColumn};
use seqtag::embfile::{format_embedding_table, load_embedding_table};
use seqtag::metrics_json::metrics_to_json;
use seqtag::pseudo::corpus_from_manifest;
use seqtag::{read_file, write_file, Error, Result};
use seqtag_core::corpus::{gold_violations, TagScheme};
use seqtag_core::embeddings::{assemble, coverage_report, train_glove, EmbeddingTable, GloveParams, Vocabulary};
use seqtag_core::eval::{evaluate, percent, report};
use seqtag_core::synth::generate;
use seqtag_core::training::{tag, train_with_progress};

#[derive(Parser)]
#[command(name = "seqtag", version, about = "Clinical named-entity tagging with BiLSTM-CRF models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write a checkpoint.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        train: PathBuf,
        /// Tagged test file: its words join the vocabulary and it is scored after training.
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long, default_value = "model.ckpt")]
        model: PathBuf,
        /// Override a configuration key, e.g. `--set epochs=20`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        variant: Option<String>,
    },
    /// Tag a CoNLL file with a trained model.
    Tag {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Output path; standard output when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Strict entity-level scores of predictions against gold.
    Evaluate {
        #[arg(long)]
        gold: PathBuf,
        /// Predictions: second column of a two-column file, third of a three-column one.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Train GloVe vectors on a whitespace-tokenized corpus, one sentence per line.
    EmbedTrain {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        dim: usize,
        #[arg(long, default_value_t = 10)]
        window: usize,
        #[arg(long, default_value_t = 50)]
        iterations: usize,
        #[arg(long, default_value_t = 1)]
        min_count: usize,
        #[arg(long, default_value_t = 100.0)]
        x_max: f64,
        #[arg(long, default_value_t = 0.75)]
        alpha: f64,
        #[arg(long, default_value_t = 0.05)]
        learning_rate: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Concatenate embedding tables over the vocabulary of CoNLL files.
    EmbedConcat {
        #[arg(long = "vocab", required = true)]
        vocab: Vec<PathBuf>,
        #[arg(long = "table", required = true)]
        tables: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Share of vocabulary words with a pretrained vector.
    Coverage {
        #[arg(long = "vocab", required = true)]
        vocab: Vec<PathBuf>,
        #[arg(long = "table", required = true)]
        tables: Vec<PathBuf>,
    },
    /// Build pseudo-sentences from the table columns listed in a manifest.
    PseudoCorpus {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic tagged corpus.
    Synth {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out_train: PathBuf,
        #[arg(long)]
        out_test: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn vocabulary(files: &[PathBuf]) -> Result<Vocabulary> {
    let mut vocab = Vocabulary::default();
    for f in files {
        for sentence in conll::read_raw(&read_file(f)?)? {
            for t in sentence {
                vocab.insert(&t.surface);
            }
        }
    }
    Ok(vocab)
}

fn load_table(path: &Path) -> Result<EmbeddingTable> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    load_embedding_table(std::io::BufReader::new(file))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train { config, train, test, model, overrides, seed, epochs, variant } => {
            let text = config.map(read_file).transpose()?;
            let mut pairs = overrides.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>>>()?;
            pairs.extend(variant.map(|v| ("variant".to_string(), v)));
            pairs.extend(epochs.map(|e| ("epochs".to_string(), e.to_string())));
            pairs.extend(seed.map(|s| ("seed".to_string(), s.to_string())));
            let env_seed = std::env::var(SEED_ENV).ok();
            let settings = RunSettings::load(text.as_deref(), &pairs, env_seed.as_deref())?;

            let train_raw = conll::read_raw(&read_file(&train)?)?;
            let test_raw = test.as_ref().map(|p| read_file(p).and_then(|t| conll::read_raw(&t))).transpose()?;
            let scheme = if settings.classes.is_empty() {
                conll::infer_scheme(train_raw.iter().chain(test_raw.iter().flatten()))?
            } else {
                TagScheme::new(&settings.classes)?
            };
            let train_data = conll::build(train_raw, &scheme, SecondColumn::Gold)?;
            for (i, e) in gold_violations(&train_data) {
                eprintln!("warning: training sentence {i}: {e}");
            }
            let test_data = test_raw.map(|r| conll::build(r, &scheme, SecondColumn::Gold)).transpose()?;
            let tables = settings.config.embeddings.iter().map(|p| load_table(Path::new(p))).collect::<Result<Vec<_>>>()?;
            let extra = test_data.as_deref().map(conll::surfaces).unwrap_or_default();

            let checkpoint = train_with_progress(&settings.config, &scheme, &train_data, &tables, &extra, |e, r| {
                eprintln!("epoch {:>3}  loss {:.4}  valid F1 {:.2}", e + 1, r.loss, percent(r.valid_f1));
            })?;
            eprintln!("best epoch {}", checkpoint.best_epoch + 1);
            save_checkpoint(&checkpoint, &model)?;
            if let Some(test_data) = test_data {
                let predicted = tag(&checkpoint, &test_data)?;
                print!("{}", report(&evaluate(&scheme, &test_data, &predicted)?));
            }
            Ok(())
        }
        Command::Tag { model, input, output } => {
            let checkpoint = load_checkpoint(&model)?;
            let data = conll::parse_conll(&read_file(&input)?, &checkpoint.scheme)?;
            let tagged = tag(&checkpoint, &conll::strip_predictions(&data))?;
            let text = conll::write_conll(&tagged, &checkpoint.scheme);
            match output {
                Some(path) => write_file(path, text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Evaluate { gold, pred, json } => {
            let gold_raw = conll::read_raw(&read_file(&gold)?)?;
            let pred_raw = conll::read_raw(&read_file(&pred)?)?;
            let scheme = conll::infer_scheme(gold_raw.iter().chain(&pred_raw))?;
            let gold = conll::build(gold_raw, &scheme, SecondColumn::Gold)?;
            let pred = conll::build(pred_raw, &scheme, SecondColumn::Pred)?;
            let metrics = evaluate(&scheme, &gold, &pred)?;
            print!("{}", report(&metrics));
            if let Some(path) = json {
                let text = serde_json::to_string_pretty(&metrics_to_json(&metrics)).expect("metrics serialize");
                write_file(path, text + "\n")?;
            }
            Ok(())
        }
        Command::EmbedTrain { corpus, out, dim, window, iterations, min_count, x_max, alpha, learning_rate, seed } => {
            let text = read_file(&corpus)?;
            let sentences: Vec<Vec<String>> = text
                .lines()
                .map(|l| l.split_whitespace().map(String::from).collect::<Vec<_>>())
                .filter(|s| !s.is_empty())
                .collect();
            let params = GloveParams { dim, window, x_max, alpha, iterations, learning_rate, min_count, seed };
            let run = train_glove(&sentences, &params)?;
            eprintln!(
                "{} words, objective {:.4} -> {:.4}",
                run.table.len(),
                run.objective.first().copied().unwrap_or(0.0),
                run.objective.last().copied().unwrap_or(0.0)
            );
            write_file(out, format_embedding_table(&run.table))
        }
        Command::EmbedConcat { vocab, tables, out, seed } => {
            let vocab = vocabulary(&vocab)?;
            let tables = tables.iter().map(|p| load_table(p)).collect::<Result<Vec<_>>>()?;
            let assembled = assemble(&vocab, &tables, seed)?;
            let c = coverage_report(&vocab, &assembled);
            eprintln!("{} dims, coverage {}/{} ({:.2}%)", assembled.dim(), c.covered, c.total_words, percent(c.percentage));
            write_file(out, format_embedding_table(&assembled))
        }
        Command::Coverage { vocab, tables } => {
            let vocab = vocabulary(&vocab)?;
            let tables = tables.iter().map(|p| load_table(p)).collect::<Result<Vec<_>>>()?;
            let c = coverage_report(&vocab, &assemble(&vocab, &tables, 0)?);
            println!("{}/{} words covered ({:.2}%)", c.covered, c.total_words, percent(c.percentage));
            Ok(())
        }
        Command::PseudoCorpus { manifest, out } => {
            let corpus = corpus_from_manifest(&manifest)?;
            let text: String = corpus.iter().map(|s| s.join(" ") + "\n").collect();
            eprintln!("{} pseudo-sentences", corpus.len());
            write_file(out, text)
        }
        Command::Synth { spec, out_train, out_test } => {
            let spec = synth_spec(&spec.map(read_file).transpose()?.unwrap_or_default())?;
            let scheme = TagScheme::new(&spec.classes)?;
            let (train, test) = generate(&spec)?;
            write_file(out_train, conll::write_conll(&train, &scheme))?;
            write_file(out_test, conll::write_conll(&test, &scheme))
        }
    }
}
