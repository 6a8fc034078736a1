use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use codelang_core::baseline::{fit_nb, NbModel};
use codelang_core::classifier::{Classifier, ENCODER_DIR, TOKENIZER_DIR};
use codelang_core::corpus::{
    class_histogram, clean_and_filter, load_jsonl, stratified_split, write_jsonl, Corpus, SplitManifest,
};
use codelang_core::eval::{evaluate_model, EvalReport};
use codelang_core::tokenizer::{load_model, save_model, train_bpe_with, BpeTrainConfig};
use codelang_core::training::{finetune, pretrain_mlm, save_checkpoint, TrainHistory, TrainOptions};
use codelang_core::transformer::load_params;
use log::info;

use crate::config::RunConfig;
use crate::manifest::RunManifest;
use crate::{CliError, Command, ConfigArg, OrData, ReportFormat};

pub const TRAIN_FILE: &str = "train.jsonl";
pub const TEST_FILE: &str = "test.jsonl";
pub const SPLIT_FILE: &str = "split.json";
pub const HISTORY_FILE: &str = "history.csv";

fn load_config(arg: &ConfigArg) -> Result<RunConfig, CliError> {
    match &arg.config {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

/// Flag value, else the config default, else a usage error.
fn pick(flag: Option<PathBuf>, fallback: Option<PathBuf>, name: &str) -> Result<PathBuf, CliError> {
    flag.or(fallback)
        .ok_or_else(|| CliError::Usage(format!("--{name} is required (or set it in the config paths)")))
}

fn split_file(cfg: &RunConfig, file: &str) -> Option<PathBuf> {
    cfg.paths.split_dir.as_ref().map(|d| d.join(file))
}

fn read_corpus(path: &Path) -> Result<Corpus, CliError> {
    load_jsonl(path).or_data()
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn io(e: std::io::Error) -> CliError {
    CliError::Data(e.to_string())
}

fn print_histogram(out: &mut dyn Write, corpus: &Corpus) -> Result<(), CliError> {
    for (label, n) in class_histogram(corpus) {
        writeln!(out, "{label}\t{n}").map_err(io)?;
    }
    writeln!(out, "total\t{}", corpus.len()).map_err(io)
}

fn print_losses(out: &mut dyn Write, stage: &str, h: &TrainHistory) -> Result<(), CliError> {
    let n = h.steps.len();
    let head = h.mean_loss(1, n.min(100)).unwrap_or(f64::NAN);
    let tail = h.mean_loss(n.saturating_sub(99).max(1), n).unwrap_or(f64::NAN);
    writeln!(out, "{stage}: {n} steps, mean loss first 100 {head:.4}, last 100 {tail:.4}").map_err(io)
}

enum LoadedModel {
    Transformer(Box<Classifier>),
    NaiveBayes(NbModel),
}

/// A directory is a fine-tuned classifier; a file is a Naive Bayes model.
fn load_any_model(path: &Path) -> Result<LoadedModel, CliError> {
    if path.is_dir() {
        Ok(LoadedModel::Transformer(Box::new(Classifier::load(path).or_data()?)))
    } else {
        Ok(LoadedModel::NaiveBayes(NbModel::load(path).or_data()?))
    }
}

fn render(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Table => report.to_table(),
    }
}

pub fn dispatch(cmd: Command, stdin: &mut dyn Read, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Preprocess {
            cfg,
            input,
            output,
            exclude,
        } => {
            let mut c = load_config(&cfg)?;
            if let Some(ex) = exclude {
                c.cleaning.excluded_labels = ex.into_iter().map(|s| s.trim().to_string()).collect();
            }
            c.validate()?;
            let input = pick(input, c.paths.raw.clone(), "input")?;
            let output = pick(output, c.paths.corpus.clone(), "output")?;
            let cleaned = clean_and_filter(&read_corpus(&input)?, &c.cleaning).or_data()?;
            if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
                create_dir(parent)?;
            }
            write_jsonl(&cleaned, &output).or_data()?;
            print_histogram(out, &cleaned)?;
            RunManifest::new("preprocess", &c, None)
                .input(&input)?
                .output(&output)?
                .write_next_to(&output)?;
        }
        Command::Split {
            cfg,
            input,
            output,
            seed,
            test_fraction,
        } => {
            let mut c = load_config(&cfg)?;
            c.seed = seed.unwrap_or(c.seed);
            c.test_fraction = test_fraction.unwrap_or(c.test_fraction);
            c.validate()?;
            let input = pick(input, c.paths.corpus.clone(), "input")?;
            let output = pick(output, c.paths.split_dir.clone(), "output")?;
            let corpus = read_corpus(&input)?;
            let (train, test) = stratified_split(&corpus, c.test_fraction, c.seed).or_data()?;
            create_dir(&output)?;
            write_jsonl(&train, output.join(TRAIN_FILE)).or_data()?;
            write_jsonl(&test, output.join(TEST_FILE)).or_data()?;
            let record = SplitManifest::new(c.seed, c.test_fraction, &train, &test);
            write_text(
                &output.join(SPLIT_FILE),
                &(serde_json::to_string_pretty(&record).expect("serializable") + "\n"),
            )?;
            writeln!(out, "train\t{}\ntest\t{}", train.len(), test.len()).map_err(io)?;
            RunManifest::new("split", &c, Some(c.seed))
                .input(&input)?
                .output(&output)?
                .write_next_to(&output)?;
        }
        Command::TrainBpe {
            cfg,
            input,
            output,
            vocab_size,
        } => {
            let mut c = load_config(&cfg)?;
            c.tokenizer.vocab_size = vocab_size.unwrap_or(c.tokenizer.vocab_size);
            c.validate()?;
            let input = pick(input, split_file(&c, TRAIN_FILE), "input")?;
            let output = pick(output, c.paths.tokenizer.clone(), "output")?;
            let corpus = read_corpus(&input)?;
            let mut bpe = BpeTrainConfig::new(c.tokenizer.vocab_size);
            bpe.pretokenizer = c.tokenizer.pretokenizer;
            bpe.max_len = Some(c.encoder.max_len);
            bpe.min_pair_count = c.tokenizer.min_pair_count;
            let model = train_bpe_with(corpus.texts(), &bpe).or_data()?;
            save_model(&model, &output).or_data()?;
            writeln!(out, "vocab_size\t{}\nmerges\t{}", model.vocab_size(), model.merges().len()).map_err(io)?;
            RunManifest::new("train-bpe", &c, None)
                .input(&input)?
                .output(&output)?
                .write_next_to(&output)?;
        }
        Command::Pretrain {
            cfg,
            input,
            model,
            output,
            seed,
            steps,
            batch_size,
        } => {
            let mut c = load_config(&cfg)?;
            c.seed = seed.unwrap_or(c.seed);
            c.pretrain.total_steps = steps.unwrap_or(c.pretrain.total_steps);
            c.batch_size = batch_size.unwrap_or(c.batch_size);
            c.validate()?;
            let input = pick(input, split_file(&c, TRAIN_FILE), "input")?;
            let tok_dir = pick(model, c.paths.tokenizer.clone(), "model")?;
            let output = pick(output, c.paths.pretrained.clone(), "output")?;
            let corpus = read_corpus(&input)?;
            let tokenizer = load_model(&tok_dir).or_data()?;
            c.encoder.vocab_size = tokenizer.vocab_size();
            c.encoder.validate().map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
            let opts = TrainOptions {
                seed: c.seed,
                batch_size: c.batch_size,
                track_accuracy: false,
            };
            info!("pretraining for {} steps", c.pretrain.total_steps);
            let done = pretrain_mlm(&corpus, &tokenizer, &c.encoder, &c.pretrain, &c.masking, &opts).or_data()?;
            create_dir(&output)?;
            save_model(&tokenizer, &output.join(TOKENIZER_DIR)).or_data()?;
            save_checkpoint(&output.join(ENCODER_DIR), &done.model, &done.state, done.history.steps.len()).or_data()?;
            done.history.write_csv(&output.join(HISTORY_FILE)).or_data()?;
            print_losses(out, "pretrain", &done.history)?;
            RunManifest::new("pretrain", &c, Some(c.seed))
                .input(&input)?
                .input(&tok_dir)?
                .output(&output)?
                .write_next_to(&output)?;
        }
        Command::Finetune {
            cfg,
            input,
            model,
            output,
            seed,
            steps,
            batch_size,
        } => {
            let mut c = load_config(&cfg)?;
            c.seed = seed.unwrap_or(c.seed);
            c.finetune.total_steps = steps.unwrap_or(c.finetune.total_steps);
            c.batch_size = batch_size.unwrap_or(c.batch_size);
            c.validate()?;
            let input = pick(input, split_file(&c, TRAIN_FILE), "input")?;
            let pre_dir = pick(model, c.paths.pretrained.clone(), "model")?;
            let output = pick(output, c.paths.model.clone(), "output")?;
            let train = read_corpus(&input)?;
            let tokenizer = load_model(&pre_dir.join(TOKENIZER_DIR)).or_data()?;
            let params = load_params(&pre_dir.join(ENCODER_DIR)).or_data()?;
            let opts = TrainOptions {
                seed: c.seed,
                batch_size: c.batch_size,
                track_accuracy: true,
            };
            info!("fine-tuning for {} steps", c.finetune.total_steps);
            let done = finetune(&train, &tokenizer, &params, &c.finetune, &opts).or_data()?;
            create_dir(&output)?;
            done.model.save(&output).or_data()?;
            done.history.write_csv(&output.join(HISTORY_FILE)).or_data()?;
            print_losses(out, "finetune", &done.history)?;
            RunManifest::new("finetune", &c, Some(c.seed))
                .input(&input)?
                .input(&pre_dir)?
                .output(&output)?
                .write_next_to(&output)?;
        }
        Command::TrainNb { cfg, input, output, alpha } => {
            let mut c = load_config(&cfg)?;
            c.alpha = alpha.unwrap_or(c.alpha);
            c.validate()?;
            let input = pick(input, split_file(&c, TRAIN_FILE), "input")?;
            let output = pick(output, c.paths.baseline.clone(), "output")?;
            let model = fit_nb(&read_corpus(&input)?, c.alpha).or_data()?;
            write_text(&output, &model.to_json())?;
            writeln!(out, "classes\t{}\nvocabulary\t{}", model.labels().len(), model.vocabulary().len()).map_err(io)?;
            RunManifest::new("train-nb", &c, None)
                .input(&input)?
                .output(&output)?
                .write_next_to(&output)?;
        }
        Command::Evaluate {
            cfg,
            input,
            model,
            output,
            report_format,
        } => {
            let c = load_config(&cfg)?;
            c.validate()?;
            let input = pick(input, split_file(&c, TEST_FILE), "input")?;
            let model_path = pick(model, c.paths.model.clone(), "model")?;
            let output = output.or(c.paths.report.clone());
            let test = read_corpus(&input)?;
            let (avg, top) = (c.report.averaging, c.report.top_n);
            let report = match load_any_model(&model_path)? {
                LoadedModel::Transformer(m) => evaluate_model(m.as_ref(), &test, avg, top),
                LoadedModel::NaiveBayes(m) => evaluate_model(&m, &test, avg, top),
            }
            .or_data()?;
            let text = render(&report, report_format);
            write!(out, "{text}").map_err(io)?;
            if let Some(path) = output {
                write_text(&path, &text)?;
                RunManifest::new("evaluate", &c, None)
                    .input(&input)?
                    .input(&model_path)?
                    .output(&path)?
                    .write_next_to(&path)?;
            }
        }
        Command::Predict { cfg, model, text } => {
            let c = load_config(&cfg)?;
            let model_path = pick(model, c.paths.model.clone(), "model")?;
            let text = match text {
                Some(t) => t,
                None => {
                    let mut s = String::new();
                    stdin.read_to_string(&mut s).map_err(io)?;
                    s
                }
            };
            let ranked: Vec<(String, f64)> = match load_any_model(&model_path)? {
                LoadedModel::Transformer(m) => m.rank(&text).or_data()?,
                LoadedModel::NaiveBayes(m) => {
                    let mut r: Vec<(String, f64)> =
                        m.labels().names().iter().cloned().zip(m.posterior(&text)).collect();
                    r.sort_by(|a, b| b.1.total_cmp(&a.1));
                    r
                }
            };
            for (label, p) in ranked {
                writeln!(out, "{label}\t{p:.6}").map_err(io)?;
            }
        }
        Command::Report {
            cfg,
            input,
            output,
            report_format,
        } => {
            let c = load_config(&cfg)?;
            let input = pick(input, c.paths.report.clone(), "input")?;
            let raw = fs::read_to_string(&input).map_err(|e| CliError::Data(format!("{}: {e}", input.display())))?;
            let report: EvalReport = serde_json::from_str(&raw)
                .map_err(|e| CliError::Data(format!("{}: not a JSON report: {e}", input.display())))?;
            let text = render(&report, report_format);
            write!(out, "{text}").map_err(io)?;
            if let Some(path) = output {
                write_text(&path, &text)?;
                RunManifest::new("report", &c, None)
                    .input(&input)?
                    .output(&path)?
                    .write_next_to(&path)?;
            }
        }
    }
    Ok(())
}
