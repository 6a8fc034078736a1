use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::nn::Tensor;
use crate::scalar::Scalar;
use crate::transformer::{EncoderConfig, TransformerError};

/// Standard deviation of the weight initialization.
pub const INIT_STD: f64 = 0.02;

enum Init {
    Normal,
    Zeros,
    Ones,
}

fn specs(cfg: &EncoderConfig) -> Vec<(String, Vec<usize>, Init)> {
    let (v, t, d, ff, k) = (cfg.vocab_size, cfg.max_len, cfg.model_dim, cfg.ff_dim, cfg.num_classes);
    let mut out = vec![
        ("embeddings.word_embeddings.weight".to_string(), vec![v, d], Init::Normal),
        ("embeddings.position_embeddings.weight".to_string(), vec![t, d], Init::Normal),
    ];
    for i in 0..cfg.num_layers {
        let p = format!("encoder.layer.{i}");
        out.push((format!("{p}.attention_norm.weight"), vec![d], Init::Ones));
        out.push((format!("{p}.attention_norm.bias"), vec![d], Init::Zeros));
        for proj in ["query", "key", "value", "output"] {
            out.push((format!("{p}.attention.{proj}.weight"), vec![d, d], Init::Normal));
            out.push((format!("{p}.attention.{proj}.bias"), vec![d], Init::Zeros));
        }
        out.push((format!("{p}.ffn_norm.weight"), vec![d], Init::Ones));
        out.push((format!("{p}.ffn_norm.bias"), vec![d], Init::Zeros));
        out.push((format!("{p}.ffn.intermediate.weight"), vec![d, ff], Init::Normal));
        out.push((format!("{p}.ffn.intermediate.bias"), vec![ff], Init::Zeros));
        out.push((format!("{p}.ffn.output.weight"), vec![ff, d], Init::Normal));
        out.push((format!("{p}.ffn.output.bias"), vec![d], Init::Zeros));
    }
    out.push(("final_norm.weight".to_string(), vec![d], Init::Ones));
    out.push(("final_norm.bias".to_string(), vec![d], Init::Zeros));
    out.push(("classifier.weight".to_string(), vec![d, k], Init::Normal));
    out.push(("classifier.bias".to_string(), vec![k], Init::Zeros));
    out
}

/// Names and shapes of every learnable tensor, in storage order.
pub fn param_shapes(cfg: &EncoderConfig) -> Vec<(String, Vec<usize>)> {
    specs(cfg).into_iter().map(|(n, s, _)| (n, s)).collect()
}

/// Every learnable tensor of the encoder, named and kept in a fixed order.
/// The MLM head reuses the word embedding, so it owns no tensor of its own.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<T> {
    config: EncoderConfig,
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> EncoderParams<T> {
    /// Weights from Normal(0, 0.02), biases 0, norm gains 1.
    pub fn init(config: &EncoderConfig, seed: u64) -> Result<Self, TransformerError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let (names, tensors) = specs(config)
            .into_iter()
            .map(|(name, shape, init)| {
                let t = match init {
                    Init::Zeros => Tensor::zeros(&shape),
                    Init::Ones => Tensor::full(&shape, T::one()),
                    Init::Normal => {
                        let n: usize = shape.iter().product();
                        let data = (0..n).map(|_| T::lit(normal.sample(&mut rng))).collect();
                        Tensor::from_vec(&shape, data).expect("shape matches")
                    }
                };
                (name, t)
            })
            .unzip();
        Ok(Self {
            config: config.clone(),
            names,
            tensors,
        })
    }

    /// Builds from named tensors, checking names and shapes against `config`.
    pub fn from_named(config: &EncoderConfig, named: Vec<(String, Tensor<T>)>) -> Result<Self, TransformerError> {
        config.validate()?;
        let expected = param_shapes(config);
        if expected.len() != named.len() {
            return Err(TransformerError::Shape(format!(
                "expected {} tensors, got {}",
                expected.len(),
                named.len()
            )));
        }
        for ((en, es), (n, t)) in expected.iter().zip(&named) {
            if en != n || es.as_slice() != t.shape() {
                return Err(TransformerError::Shape(format!(
                    "expected {en} {es:?}, got {n} {:?}",
                    t.shape()
                )));
            }
        }
        let (names, tensors) = named.into_iter().unzip();
        Ok(Self {
            config: config.clone(),
            names,
            tensors,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.names.iter().position(|n| n == name).map(move |i| &mut self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Total learnable scalars.
    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Replaces the classification head with a zero one for `num_classes`
    /// outputs, so the model starts out predicting the uniform distribution.
    pub fn reset_classifier(&mut self, num_classes: usize) -> Result<(), TransformerError> {
        let mut cfg = self.config.clone();
        cfg.num_classes = num_classes;
        cfg.validate()?;
        let n = self.tensors.len();
        self.tensors[n - 2] = Tensor::zeros(&[cfg.model_dim, num_classes]);
        self.tensors[n - 1] = Tensor::zeros(&[num_classes]);
        self.config = cfg;
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> EncoderParams<U> {
        EncoderParams {
            config: self.config.clone(),
            names: self.names.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
        }
    }
}
