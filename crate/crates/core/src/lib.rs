//! Language identification for source-code snippets: byte-level BPE, a
//! transformer encoder with MLM pretraining and fine-tuning, a Naive Bayes
//! baseline and multiclass evaluation.

pub mod baseline;
pub mod classifier;
pub mod corpus;
pub mod eval;
pub mod nn;
pub mod scalar;
pub mod tokenizer;
pub mod training;
pub mod transformer;

pub use scalar::Scalar;

pub type Tensor32 = nn::Tensor<f32>;
pub type Tensor64 = nn::Tensor<f64>;
pub type Graph32 = nn::Graph<f32>;
pub type Graph64 = nn::Graph<f64>;
pub type EncoderParams32 = transformer::EncoderParams<f32>;
pub type EncoderParams64 = transformer::EncoderParams<f64>;
