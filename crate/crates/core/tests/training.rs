use codelang_core::corpus::{Corpus, Snippet};
use codelang_core::nn::Tensor;
use codelang_core::tokenizer::{train_bpe, SpecialIds, DEFAULT_SPECIALS};
use codelang_core::training::{
    adamw_step, finetune, lr_at, mask_for_mlm, partition_params, pretrain_mlm, Masker, MaskingPolicy, OptState,
    OptimizerHyper, TrainOptions, TrainingError,
};
use codelang_core::transformer::{param_shapes, EncoderConfig, EncoderParams, TokenBatch};
use proptest::prelude::*;

const SP: SpecialIds = SpecialIds {
    bos: 0,
    pad: 1,
    eos: 2,
    mask: 3,
};

fn hyper(wd: f64) -> OptimizerHyper {
    OptimizerHyper {
        lr_peak: 0.1,
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
        weight_decay: wd,
        warmup_steps: Some(0),
        total_steps: 10,
        freeze_no_decay: false,
    }
}

fn one_step(theta: f64, g: f64, wd: f64, no_decay: bool) -> f64 {
    let mut p = vec![Tensor::scalar(theta)];
    let mut s = OptState::new(&p);
    adamw_step(&mut p, &[Tensor::scalar(g)], &mut s, &hyper(wd), 0.1, &[no_decay]).unwrap();
    assert_eq!(s.t, 1);
    assert!((s.m[0].item() - 0.1).abs() < 1e-15);
    assert!((s.v[0].item() - 0.001).abs() < 1e-15);
    p[0].item()
}

#[test]
fn adamw_single_step_by_hand() {
    // m̂ = 0.1/(1-0.9) = 1, v̂ = 0.001/(1-0.999) = 1.
    let expected = 1.0 - 0.1 * 1.0 / (1.0 + 1e-8);
    let theta = one_step(1.0, 1.0, 0.0, false);
    assert!((theta - expected).abs() <= 1e-12, "{theta}");
    assert!((theta - 0.9).abs() < 1e-8);

    let expected = 1.0 - 0.1 * 1.0 / (1.0 + 1e-8) - 0.1 * 0.01 * 1.0;
    let theta = one_step(1.0, 1.0, 0.01, false);
    assert!((theta - expected).abs() <= 1e-12, "{theta}");
    assert!((theta - 0.899).abs() < 1e-8);
}

#[test]
fn adamw_zero_gradient_and_zero_lr() {
    let mut p = vec![Tensor::full(&[3], 0.7f64)];
    let mut s = OptState::new(&p);
    adamw_step(&mut p, &[Tensor::zeros(&[3])], &mut s, &hyper(0.0), 0.1, &[false]).unwrap();
    assert_eq!(p[0].data(), &[0.7; 3]);
    let g = vec![Tensor::from_vec(&[3], vec![1.0, -2.0, 0.5]).unwrap()];
    adamw_step(&mut p, &g, &mut s, &hyper(0.01), 0.0, &[false]).unwrap();
    assert_eq!(p[0].data(), &[0.7; 3]);
}

#[test]
fn no_decay_updates_ignore_weight_decay() {
    let init = || {
        vec![
            Tensor::from_vec(&[2], vec![0.3f64, -1.2]).unwrap(),
            Tensor::from_vec(&[2], vec![2.0f64, 0.1]).unwrap(),
        ]
    };
    let grads = vec![
        Tensor::from_vec(&[2], vec![0.05, -0.4]).unwrap(),
        Tensor::from_vec(&[2], vec![1.5, 0.2]).unwrap(),
    ];
    let flags = [false, true];
    let run = |wd: f64| {
        let mut p = init();
        let mut s = OptState::new(&p);
        for _ in 0..3 {
            adamw_step(&mut p, &grads, &mut s, &hyper(wd), 0.05, &flags).unwrap();
        }
        p
    };
    let (a, b) = (run(0.0), run(0.3));
    assert_eq!(a[1].data(), b[1].data());
    assert_ne!(a[0].data(), b[0].data());
}

#[test]
fn freezing_holds_no_decay_tensors() {
    let mut h = hyper(0.01);
    h.freeze_no_decay = true;
    let mut p = vec![Tensor::scalar(1.0f64), Tensor::scalar(1.0f64)];
    let mut s = OptState::new(&p);
    adamw_step(&mut p, &[Tensor::scalar(1.0), Tensor::scalar(1.0)], &mut s, &h, 0.1, &[false, true]).unwrap();
    assert_ne!(p[0].item(), 1.0);
    assert_eq!(p[1].item(), 1.0);
}

#[test]
fn partition_of_micro_model() {
    let cfg = EncoderConfig {
        vocab_size: 100,
        max_len: 16,
        model_dim: 8,
        num_heads: 2,
        num_layers: 1,
        ff_dim: 32,
        dropout: 0.0,
        num_classes: 3,
    };
    let names: Vec<String> = param_shapes(&cfg).into_iter().map(|(n, _)| n).collect();
    let part = partition_params(&names).unwrap();
    // Biases: query, key, value, output, intermediate, ffn output, classifier.
    // Norms: two per layer plus the final one, gain and bias each.
    assert_eq!(part.no_decay.len(), 7 + 3 * 2);
    let mut all: Vec<usize> = part.decay.iter().chain(&part.no_decay).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..names.len()).collect::<Vec<_>>());
    assert!(part.decay.iter().all(|i| !part.no_decay.contains(i)));
    for &i in &part.no_decay {
        assert!(names[i].ends_with(".bias") || names[i].contains("norm"), "{}", names[i]);
    }

    let embeddings_only = ["embeddings.word_embeddings.weight", "embeddings.position_embeddings.weight"];
    assert!(partition_params(&embeddings_only).unwrap().no_decay.is_empty());
    assert!(matches!(partition_params(&["a.weight", ""]), Err(TrainingError::UnnamedTensor(1))));
}

#[test]
fn schedule_interpolates() {
    let h = OptimizerHyper {
        lr_peak: 1e-3,
        warmup_steps: Some(100),
        total_steps: 1100,
        ..OptimizerHyper::default()
    };
    assert_eq!(lr_at(0, &h).unwrap(), 0.0);
    assert_eq!(lr_at(100, &h).unwrap(), 1e-3);
    assert!((lr_at(600, &h).unwrap() - 5e-4).abs() < 1e-18);
    assert!((lr_at(50, &h).unwrap() - 5e-4).abs() < 1e-18);
}

#[test]
fn masking_rates_over_many_positions() {
    let masker = Masker::new(MaskingPolicy::default(), 1000, SP).unwrap();
    let seqs: Vec<Vec<u32>> = (0..1000).map(|r| (0..100).map(|c| 4 + ((r * 100 + c) % 996) as u32).collect()).collect();
    let batch = TokenBatch::from_sequences(&seqs, SP, 102);
    let out = mask_for_mlm(&batch, &masker, 99);
    let selected = out.selected();
    let frac = selected.len() as f64 / 100_000.0;
    assert!((0.14..=0.16).contains(&frac), "{frac}");
    let masked = selected.iter().filter(|&&i| out.batch.ids()[i] == SP.mask).count() as f64 / selected.len() as f64;
    assert!((0.78..=0.82).contains(&masked), "{masked}");
    let kept = selected.iter().filter(|&&i| out.batch.ids()[i] == batch.ids()[i]).count() as f64 / selected.len() as f64;
    assert!((0.08..=0.12).contains(&kept), "{kept}");
    for (i, t) in out.targets.iter().enumerate() {
        match t {
            Some(id) => assert_eq!(*id, batch.ids()[i]),
            None => assert_eq!(out.batch.ids()[i], batch.ids()[i]),
        }
    }
}

proptest! {
    #[test]
    fn specials_are_never_selected(seed in any::<u64>(), lens in prop::collection::vec(1usize..12, 1..6)) {
        let policy = MaskingPolicy { mask_prob: 1.0, replace_mask: 0.0, replace_random: 1.0, keep: 0.0 };
        let masker = Masker::new(policy, 20, SP).unwrap();
        let seqs: Vec<Vec<u32>> = lens.iter().map(|&n| (0..n as u32).map(|i| 4 + i % 16).collect()).collect();
        let batch = TokenBatch::from_sequences(&seqs, SP, 16);
        let out = mask_for_mlm(&batch, &masker, seed);
        for (i, &id) in batch.ids().iter().enumerate() {
            let special = id < 4;
            prop_assert_eq!(out.targets[i].is_some(), !special);
            if !special {
                prop_assert!(out.batch.ids()[i] >= 4);
            }
        }
    }
}

fn toy_corpus() -> Corpus {
    let mut snippets = Vec::new();
    for i in 0..16 {
        snippets.push(Snippet::new(format!("def f{i}(x):\n    return x + {i}"), "Python"));
        snippets.push(Snippet::new(format!("int f{i}(int x) {{ return x + {i}; }}"), "C"));
    }
    Corpus::new(snippets)
}

fn tiny_config(vocab: usize, classes: usize) -> EncoderConfig {
    EncoderConfig {
        vocab_size: vocab,
        max_len: 32,
        model_dim: 32,
        num_heads: 2,
        num_layers: 1,
        ff_dim: 64,
        dropout: 0.1,
        num_classes: classes,
    }
}

#[test]
fn pretraining_is_reproducible_and_checks_inputs() {
    let corpus = toy_corpus();
    let tok = train_bpe(corpus.texts(), 300, &DEFAULT_SPECIALS).unwrap();
    let cfg = tiny_config(tok.vocab_size(), 2);
    let h = OptimizerHyper {
        total_steps: 20,
        ..OptimizerHyper::default()
    };
    let opts = TrainOptions {
        seed: 3,
        batch_size: 8,
        track_accuracy: false,
    };
    let a = pretrain_mlm(&corpus, &tok, &cfg, &h, &MaskingPolicy::default(), &opts).unwrap();
    let b = pretrain_mlm(&corpus, &tok, &cfg, &h, &MaskingPolicy::default(), &opts).unwrap();
    assert_eq!(a.history, {
        let mut hb = b.history.clone();
        hb.step_seconds = a.history.step_seconds.clone();
        hb
    });
    assert_eq!(a.model, b.model);
    assert_eq!(a.history.steps.len(), 20);
    let ln_v = (tok.vocab_size() as f64).ln();
    assert!((a.history.steps[0].loss - ln_v).abs() / ln_v < 0.05);

    let mut wrong = cfg.clone();
    wrong.vocab_size += 1;
    assert!(matches!(
        pretrain_mlm(&corpus, &tok, &wrong, &h, &MaskingPolicy::default(), &opts),
        Err(TrainingError::VocabMismatch { .. })
    ));
    let none = MaskingPolicy {
        mask_prob: 0.0,
        ..MaskingPolicy::default()
    };
    assert!(matches!(
        pretrain_mlm(&corpus, &tok, &cfg, &h, &none, &opts),
        Err(TrainingError::InvalidPolicy(_))
    ));
}

#[test]
fn finetune_memorizes_a_small_training_set() {
    let corpus = toy_corpus();
    assert_eq!(corpus.len(), 32);
    let tok = train_bpe(corpus.texts(), 300, &DEFAULT_SPECIALS).unwrap();
    let params = EncoderParams::<f32>::init(&tiny_config(tok.vocab_size(), 7), 1).unwrap();
    let h = OptimizerHyper {
        total_steps: 200,
        lr_peak: 1e-3,
        ..OptimizerHyper::default()
    };
    let opts = TrainOptions {
        seed: 5,
        batch_size: 8,
        track_accuracy: true,
    };
    let out = finetune(&corpus, &tok, &params, &h, &opts).unwrap();
    let first = out.history.steps[0].loss;
    assert!((first - 2f64.ln()).abs() / 2f64.ln() < 0.05, "{first}");
    assert_eq!(out.model.labels().len(), 2);
    let texts: Vec<&str> = corpus.texts().collect();
    let preds = out.model.predict_batch(&texts).unwrap();
    assert_eq!(preds, corpus.label_ids());
    assert_eq!(out.history.epoch_accuracy.len(), 50);
    assert_eq!(*out.history.epoch_accuracy.last().unwrap(), 1.0);

    let again = finetune(&corpus, &tok, &params, &h, &opts).unwrap();
    assert_eq!(again.model.params(), out.model.params());
}
