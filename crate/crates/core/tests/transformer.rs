use codelang_core::nn::{grad_check, softmax, Graph, Tensor, Var};
use codelang_core::tokenizer::SpecialIds;
use codelang_core::transformer::{
    bind, classify, encoder_forward, mlm_logits, param_shapes, predict, EncoderConfig, EncoderGraph, EncoderParams,
    Mode, TokenBatch, TransformerError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const SP: SpecialIds = SpecialIds {
    bos: 0,
    pad: 1,
    eos: 2,
    mask: 3,
};

fn micro() -> EncoderConfig {
    EncoderConfig {
        vocab_size: 100,
        max_len: 16,
        model_dim: 8,
        num_heads: 2,
        num_layers: 1,
        ff_dim: 32,
        dropout: 0.0,
        num_classes: 3,
    }
}

fn random_seqs(rng: &mut ChaCha8Rng, n: usize, max: usize, vocab: u32) -> Vec<Vec<u32>> {
    (0..n)
        .map(|_| (0..rng.gen_range(1..=max)).map(|_| rng.gen_range(4..vocab)).collect())
        .collect()
}

#[test]
fn micro_parameter_count_matches_shape_table() {
    let (v, t, d, ff, k) = (100, 16, 8, 32, 3);
    let embeddings = v * d + t * d;
    let attention = 4 * (d * d + d);
    let feed_forward = d * ff + ff + ff * d + d;
    let norms = 2 * 2 * d;
    let top = 2 * d + d * k + k;
    let expected = embeddings + attention + feed_forward + norms + top;
    assert_eq!(expected, 1843);
    let p = EncoderParams::<f32>::init(&micro(), 0).unwrap();
    assert_eq!(p.num_scalars(), expected);
    let from_table: usize = param_shapes(&micro()).iter().map(|(_, s)| s.iter().product::<usize>()).sum();
    assert_eq!(from_table, expected);
}

#[test]
fn init_is_seeded() {
    let a = EncoderParams::<f32>::init(&micro(), 1).unwrap();
    let b = EncoderParams::<f32>::init(&micro(), 1).unwrap();
    let c = EncoderParams::<f32>::init(&micro(), 2).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.get("encoder.layer.0.attention.query.bias").unwrap().data().iter().all(|&x| x == 0.0));
    assert!(a.get("final_norm.weight").unwrap().data().iter().all(|&x| x == 1.0));
    let w = a.get("embeddings.word_embeddings.weight").unwrap().data();
    let std = (w.iter().map(|&x| (x as f64).powi(2)).sum::<f64>() / w.len() as f64).sqrt();
    assert!((std - 0.02).abs() < 0.003, "{std}");
}

#[test]
fn invalid_config_rejected() {
    let mut c = micro();
    c.num_heads = 3;
    assert!(matches!(EncoderParams::<f32>::init(&c, 0), Err(TransformerError::InvalidConfig(_))));
}

#[test]
fn forward_shape_and_errors() {
    let p = EncoderParams::<f32>::init(&micro(), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let b = TokenBatch::from_sequences(&random_seqs(&mut rng, 3, 6, 100), SP, 16);
    let h = encoder_forward(&p, &b).unwrap();
    assert_eq!(h.shape(), &[3, b.width(), 8]);
    assert!(h.is_finite());

    let bad = TokenBatch::from_sequences(&[vec![100]], SP, 16);
    assert!(matches!(encoder_forward(&p, &bad), Err(TransformerError::IdOutOfRange { id: 100, .. })));
    let wide = TokenBatch::from_sequences(&[vec![5; 20]], SP, 18);
    assert!(matches!(encoder_forward(&p, &wide), Err(TransformerError::TooWide { width: 18, max_len: 16 })));
    let no_bos = TokenBatch::new(vec![5, 6], vec![true, true], 1, 2).unwrap();
    assert!(matches!(classify(&p, &no_bos, SP.bos), Err(TransformerError::MissingBos { row: 0 })));
}

#[test]
fn singleton_sequence_attends_to_itself() {
    let p = EncoderParams::<f64>::init(&micro(), 4).unwrap();
    let b = TokenBatch::new(vec![SP.bos], vec![true], 1, 1).unwrap();
    let mut g = Graph::new();
    let eg = bind(&mut g, &p);
    let out = eg.forward(&mut g, &b, Mode::Eval).unwrap();
    let probs = g.attention_probs(out.attention[0]).unwrap();
    assert_eq!(probs, &[1.0, 1.0]);
}

#[test]
fn padding_leaves_real_positions_unchanged() {
    let p = EncoderParams::<f32>::init(&micro(), 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let seqs = random_seqs(&mut rng, 3, 8, 100);
        let b = TokenBatch::from_sequences(&seqs, SP, 16);
        let padded = b.pad_to(16, SP.pad);
        let h1 = encoder_forward(&p, &b).unwrap();
        let h2 = encoder_forward(&p, &padded).unwrap();
        let (w, d) = (b.width(), 8);
        for r in 0..3 {
            for t in 0..w {
                if !b.mask()[r * w + t] {
                    continue;
                }
                for k in 0..d {
                    let a = h1.data()[(r * w + t) * d + k];
                    let c = h2.data()[(r * 16 + t) * d + k];
                    assert!((a - c).abs() <= 1e-5, "row {r} pos {t}: {a} vs {c}");
                }
            }
        }
    }
}

#[test]
fn permuting_rows_permutes_outputs() {
    let p = EncoderParams::<f32>::init(&micro(), 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let b = TokenBatch::from_sequences(&random_seqs(&mut rng, 4, 8, 100), SP, 16);
    let perm = [2, 0, 3, 1];
    let z = classify(&p, &b, SP.bos).unwrap();
    let zp = classify(&p, &b.select_rows(&perm), SP.bos).unwrap();
    for (i, &src) in perm.iter().enumerate() {
        assert_eq!(zp.row(i), z.row(src));
    }
}

#[test]
fn eval_mode_is_deterministic_and_train_mode_drops() {
    let mut cfg = micro();
    cfg.dropout = 0.5;
    let p = EncoderParams::<f32>::init(&cfg, 7).unwrap();
    let b = TokenBatch::from_sequences(&[vec![5, 6, 7]], SP, 16);
    assert_eq!(encoder_forward(&p, &b).unwrap(), encoder_forward(&p, &b).unwrap());
    let mut g = Graph::new();
    let eg = bind(&mut g, &p);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let out = eg.forward(&mut g, &b, Mode::Train(&mut rng)).unwrap();
    assert_ne!(g.value(out.hidden).data(), encoder_forward(&p, &b).unwrap().data());
}

#[test]
fn initial_mlm_loss_is_near_uniform() {
    let cfg = EncoderConfig {
        vocab_size: 2000,
        max_len: 64,
        model_dim: 64,
        num_heads: 4,
        num_layers: 2,
        ff_dim: 128,
        dropout: 0.0,
        num_classes: 5,
    };
    let p = EncoderParams::<f32>::init(&cfg, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let seqs = random_seqs(&mut rng, 8, 60, 2000);
    let b = TokenBatch::from_sequences(&seqs, SP, 64);
    let h = encoder_forward(&p, &b).unwrap();
    let logits = mlm_logits(&p, &h).unwrap();
    let v = cfg.vocab_size;
    let mut total = 0.0;
    let mut n = 0;
    for (row, &keep) in logits.data().chunks(v).zip(b.mask()) {
        if keep {
            let target = rng.gen_range(0..v);
            let lse = row.iter().map(|&x| (x as f64).exp()).sum::<f64>().ln();
            total += lse - row[target] as f64;
            n += 1;
        }
    }
    let mean = total / n as f64;
    let ln_v = (v as f64).ln();
    assert!((mean - ln_v).abs() / ln_v < 0.05, "{mean} vs {ln_v}");
}

#[test]
fn mlm_logits_are_linear_in_the_embedding() {
    let mut p = EncoderParams::<f64>::init(&micro(), 9).unwrap();
    let b = TokenBatch::from_sequences(&[vec![10, 11, 12]], SP, 16);
    let h = encoder_forward(&p, &b).unwrap();
    let before = mlm_logits(&p, &h).unwrap();
    let t = 42;
    let emb = p.get_mut("embeddings.word_embeddings.weight").unwrap();
    for x in &mut emb.data_mut()[t * 8..(t + 1) * 8] {
        *x *= 2.0;
    }
    let after = mlm_logits(&p, &h).unwrap();
    for pos in 0..b.width() {
        for tok in 0..100 {
            let (a, c) = (before.data()[pos * 100 + tok], after.data()[pos * 100 + tok]);
            if tok == t {
                assert!((c - 2.0 * a).abs() < 1e-15);
                if a > 0.0 {
                    assert!(c > a);
                }
            } else {
                assert_eq!(a, c);
            }
        }
    }
}

#[test]
fn classifier_head_contract() {
    let cfg = EncoderConfig {
        vocab_size: 100,
        max_len: 16,
        model_dim: 16,
        num_heads: 2,
        num_layers: 1,
        ff_dim: 32,
        dropout: 0.0,
        num_classes: 19,
    };
    let mut p = EncoderParams::<f64>::init(&cfg, 10).unwrap();
    let b = TokenBatch::from_sequences(&[vec![5, 6], vec![7]], SP, 16);
    let z = classify(&p, &b, SP.bos).unwrap();
    assert_eq!(z.shape(), &[2, 19]);
    for r in 0..2 {
        let s: f64 = softmax(z.row(r)).unwrap().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
    for name in ["classifier.weight", "classifier.bias"] {
        p.get_mut(name).unwrap().data_mut().fill(0.0);
    }
    let z = classify(&p, &b, SP.bos).unwrap();
    assert!(z.data().iter().all(|&x| x == 0.0));
    assert_eq!(predict(&p, &b, SP.bos).unwrap(), vec![0, 0]);
}

/// Classification loss plus MLM loss on a few positions, so every tensor is
/// on the path to the loss.
fn micro_loss(g: &mut Graph<f64>, vars: &[Var], cfg: &EncoderConfig, batch: &TokenBatch) -> Var {
    let eg = EncoderGraph::from_vars(cfg.clone(), vars.to_vec());
    let out = eg.forward(g, batch, Mode::Eval).unwrap();
    let cls = eg.class_logits(g, out.hidden, batch, SP.bos).unwrap();
    let cls_loss = g.cross_entropy(cls, batch.labels().unwrap());
    let rows = [1, 2, 5, 6];
    let mlm = eg.mlm_logits(g, out.hidden, Some(&rows));
    let mlm_loss = g.cross_entropy(mlm, &[7, 3, 11, 4]);
    g.add(cls_loss, mlm_loss)
}

#[test]
fn full_model_gradient_matches_finite_differences() {
    let cfg = EncoderConfig {
        vocab_size: 12,
        max_len: 4,
        model_dim: 8,
        num_heads: 2,
        num_layers: 1,
        ff_dim: 16,
        dropout: 0.0,
        num_classes: 3,
    };
    // Random values everywhere (gains and biases included) so no gradient
    // hides behind an identity initialization.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let normal = Normal::new(0.0, 0.4).unwrap();
    let params: Vec<Tensor<f64>> = EncoderParams::<f64>::init(&cfg, 0)
        .unwrap()
        .tensors()
        .iter()
        .map(|t| {
            let data = (0..t.len()).map(|_| normal.sample(&mut rng)).collect();
            Tensor::from_vec(t.shape(), data).unwrap()
        })
        .collect();
    let batch = TokenBatch::new(vec![0, 5, 9, 2, 0, 7, 2, 1], vec![true, true, true, true, true, true, true, false], 2, 4)
        .unwrap()
        .with_labels(vec![2, 0])
        .unwrap();
    let report = grad_check(|g, vars| micro_loss(g, vars, &cfg, &batch), &params, 1e-3).unwrap();
    assert_eq!(report.checked, params.iter().map(Tensor::len).sum::<usize>());
    assert!(report.max_rel_error < 1e-4, "{report:?}");
}
