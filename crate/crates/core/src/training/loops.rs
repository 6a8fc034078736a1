use std::time::Instant;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::corpus::Corpus;
use crate::nn::{kernels, Graph, Tensor};
use crate::tokenizer::{BpeModel, SpecialIds};
use crate::training::{
    adamw_step, lr_at, partition_params, Masker, MaskingPolicy, OptState, OptimizerHyper, StepRecord, TrainHistory,
    TrainingError,
};
use crate::transformer::{bind, classify, EncoderConfig, EncoderParams, Mode, TokenBatch};

/// Consecutive all-unselected MLM batches tolerated before giving up.
const MAX_SKIPPED_IN_A_ROW: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOptions {
    pub seed: u64,
    pub batch_size: usize,
    /// Record training-set accuracy at the end of every epoch (fine-tuning).
    pub track_accuracy: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            seed: 42,
            batch_size: 32,
            track_accuracy: false,
        }
    }
}

/// Result of a training loop; `state` allows resuming from a checkpoint.
#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    pub model: M,
    pub state: OptState<f32>,
    pub history: TrainHistory,
}

/// Snippet indices in a fresh seeded shuffle each epoch, served in fixed-size
/// batches; the last batch of an epoch may be short.
struct Batches {
    order: Vec<usize>,
    pos: usize,
    size: usize,
    epoch: usize,
}

impl Batches {
    fn new(n: usize, size: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        Self {
            order,
            pos: 0,
            size,
            epoch: 0,
        }
    }

    /// Next batch, and whether it closed an epoch.
    fn next(&mut self, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
        let end = (self.pos + self.size).min(self.order.len());
        let idx = self.order[self.pos..end].to_vec();
        self.pos = end;
        let finished = self.pos == self.order.len();
        if finished {
            self.order.shuffle(rng);
            self.pos = 0;
            self.epoch += 1;
        }
        (idx, finished)
    }
}

fn encode_all(corpus: &Corpus, tokenizer: &BpeModel) -> Vec<Vec<u32>> {
    corpus
        .snippets()
        .par_iter()
        .map(|s| tokenizer.encode(&s.text).0)
        .collect()
}

fn make_batch(encoded: &[Vec<u32>], idx: &[usize], specials: SpecialIds, max_len: usize) -> TokenBatch {
    let seqs: Vec<&[u32]> = idx.iter().map(|&i| encoded[i].as_slice()).collect();
    TokenBatch::from_sequences(&seqs, specials, max_len)
}

fn check_common(
    corpus: &Corpus,
    tokenizer: &BpeModel,
    config: &EncoderConfig,
    hyper: &OptimizerHyper,
    opts: &TrainOptions,
) -> Result<SpecialIds, TrainingError> {
    hyper.validate()?;
    config.validate()?;
    if corpus.is_empty() {
        return Err(TrainingError::EmptyCorpus);
    }
    if opts.batch_size == 0 {
        return Err(TrainingError::InvalidHyper("batch_size must be positive".into()));
    }
    if config.vocab_size != tokenizer.vocab_size() {
        return Err(TrainingError::VocabMismatch {
            tokenizer: tokenizer.vocab_size(),
            model: config.vocab_size,
        });
    }
    Ok(tokenizer.special_ids()?)
}

fn loop_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Gradients of every parameter tensor, in storage order.
fn collect_grads(
    g: &Graph<f32>,
    vars: &[crate::nn::Var],
    loss: crate::nn::Var,
) -> Result<Vec<Tensor<f32>>, TrainingError> {
    let mut grads = g.backward(loss)?;
    Ok(vars.iter().map(|&v| grads.take(v)).collect())
}

/// Masked-LM training from a seeded initialization for `hyper.total_steps`
/// optimizer steps. The loss at each step averages over selected positions
/// only; batches with no selected position are skipped without counting.
pub fn pretrain_mlm(
    corpus: &Corpus,
    tokenizer: &BpeModel,
    config: &EncoderConfig,
    hyper: &OptimizerHyper,
    policy: &MaskingPolicy,
    opts: &TrainOptions,
) -> Result<TrainOutcome<EncoderParams<f32>>, TrainingError> {
    let specials = check_common(corpus, tokenizer, config, hyper, opts)?;
    if policy.mask_prob <= 0.0 {
        return Err(TrainingError::InvalidPolicy("mask_prob must be positive for pretraining".into()));
    }
    let masker = Masker::new(policy.clone(), config.vocab_size, specials)?;
    let mut params = EncoderParams::<f32>::init(config, opts.seed)?;
    let no_decay = partition_params(params.names())?.mask();
    let mut state = OptState::new(params.tensors());
    let mut history = TrainHistory::default();
    let encoded = encode_all(corpus, tokenizer);
    let mut rng = loop_rng(opts.seed);
    let mut batches = Batches::new(corpus.len(), opts.batch_size, &mut rng);
    info!(
        "pretraining: {} snippets, {} steps, {} parameters",
        corpus.len(),
        hyper.total_steps,
        params.num_scalars()
    );

    let mut step = 0;
    let mut skipped_in_a_row = 0;
    while step < hyper.total_steps {
        let started = Instant::now();
        let (idx, _) = batches.next(&mut rng);
        let batch = make_batch(&encoded, &idx, specials, config.max_len);
        let masked = masker.apply(&batch, &mut rng);
        let selected = masked.selected();
        if selected.is_empty() {
            history.skipped_batches += 1;
            skipped_in_a_row += 1;
            if skipped_in_a_row >= MAX_SKIPPED_IN_A_ROW {
                return Err(TrainingError::NoMaskableTokens);
            }
            continue;
        }
        skipped_in_a_row = 0;
        step += 1;

        let mut g = Graph::new();
        let eg = bind(&mut g, &params);
        let fwd = eg.forward(&mut g, &masked.batch, Mode::Train(&mut rng))?;
        let logits = eg.mlm_logits(&mut g, fwd.hidden, Some(&selected));
        let loss = g.cross_entropy(logits, &masked.target_ids());
        let loss_value = g.value(loss).item() as f64;
        if !loss_value.is_finite() {
            return Err(TrainingError::NonFiniteLoss { step });
        }
        let grads = collect_grads(&g, eg.vars(), loss)?;
        drop(g);
        let lr = lr_at(step, hyper)?;
        adamw_step(params.tensors_mut(), &grads, &mut state, hyper, lr, &no_decay)?;
        history.steps.push(StepRecord {
            step,
            lr,
            loss: loss_value,
        });
        history.step_seconds.push(started.elapsed().as_secs_f64());
        debug!("mlm step {step}: loss {loss_value:.4} lr {lr:.3e}");
        if step % 50 == 0 {
            info!("mlm step {step}/{}: loss {loss_value:.4}", hyper.total_steps);
        }
    }
    Ok(TrainOutcome {
        model: params,
        state,
        history,
    })
}

fn accuracy(params: &EncoderParams<f32>, encoded: &[Vec<u32>], labels: &[usize], specials: SpecialIds) -> Result<f64, TrainingError> {
    let idx: Vec<usize> = (0..encoded.len()).collect();
    let mut correct = 0;
    for chunk in idx.chunks(64) {
        let batch = make_batch(encoded, chunk, specials, params.config().max_len);
        let z = classify(params, &batch, specials.bos)?;
        for (row, &i) in z.data().chunks(z.cols()).zip(chunk) {
            correct += usize::from(kernels::argmax(row) == labels[i]);
        }
    }
    Ok(correct as f64 / encoded.len() as f64)
}

/// Supervised training of the whole encoder plus a zero-initialized
/// classification head sized to the training label set.
pub fn finetune(
    train: &Corpus,
    tokenizer: &BpeModel,
    params: &EncoderParams<f32>,
    hyper: &OptimizerHyper,
    opts: &TrainOptions,
) -> Result<TrainOutcome<Classifier>, TrainingError> {
    let specials = check_common(train, tokenizer, params.config(), hyper, opts)?;
    let labels = train.labels().clone();
    if labels.is_empty() {
        return Err(TrainingError::EmptyCorpus);
    }
    let mut params = params.clone();
    params.reset_classifier(labels.len())?;
    let config = params.config().clone();
    let no_decay = partition_params(params.names())?.mask();
    let mut state = OptState::new(params.tensors());
    let mut history = TrainHistory::default();
    let encoded = encode_all(train, tokenizer);
    let gold = train.label_ids();
    let mut rng = loop_rng(opts.seed);
    let mut batches = Batches::new(train.len(), opts.batch_size, &mut rng);
    info!(
        "fine-tuning: {} snippets, {} classes, {} steps",
        train.len(),
        labels.len(),
        hyper.total_steps
    );

    for step in 1..=hyper.total_steps {
        let started = Instant::now();
        let (idx, epoch_done) = batches.next(&mut rng);
        let targets: Vec<usize> = idx.iter().map(|&i| gold[i]).collect();
        let batch = make_batch(&encoded, &idx, specials, config.max_len);

        let mut g = Graph::new();
        let eg = bind(&mut g, &params);
        let fwd = eg.forward(&mut g, &batch, Mode::Train(&mut rng))?;
        let logits = eg.class_logits(&mut g, fwd.hidden, &batch, specials.bos)?;
        let loss = g.cross_entropy(logits, &targets);
        let loss_value = g.value(loss).item() as f64;
        if !loss_value.is_finite() {
            return Err(TrainingError::NonFiniteLoss { step });
        }
        let grads = collect_grads(&g, eg.vars(), loss)?;
        drop(g);
        let lr = lr_at(step, hyper)?;
        adamw_step(params.tensors_mut(), &grads, &mut state, hyper, lr, &no_decay)?;
        history.steps.push(StepRecord {
            step,
            lr,
            loss: loss_value,
        });
        history.step_seconds.push(started.elapsed().as_secs_f64());
        if epoch_done && opts.track_accuracy {
            let acc = accuracy(&params, &encoded, &gold, specials)?;
            info!("epoch {}: training accuracy {acc:.4}", batches.epoch);
            history.epoch_accuracy.push(acc);
        }
        if step % 50 == 0 {
            info!("fine-tune step {step}/{}: loss {loss_value:.4}", hyper.total_steps);
        }
    }
    let model = Classifier::new(tokenizer.clone(), params, labels)?;
    Ok(TrainOutcome {
        model,
        state,
        history,
    })
}
