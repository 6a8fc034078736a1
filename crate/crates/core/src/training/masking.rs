use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::tokenizer::SpecialIds;
use crate::training::TrainingError;
use crate::transformer::TokenBatch;

/// Selection rate and the fate of selected positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskingPolicy {
    pub mask_prob: f64,
    pub replace_mask: f64,
    pub replace_random: f64,
    pub keep: f64,
}

impl Default for MaskingPolicy {
    fn default() -> Self {
        Self {
            mask_prob: 0.15,
            replace_mask: 0.8,
            replace_random: 0.1,
            keep: 0.1,
        }
    }
}

impl MaskingPolicy {
    pub fn validate(&self) -> Result<(), TrainingError> {
        let probs = [self.mask_prob, self.replace_mask, self.replace_random, self.keep];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(TrainingError::InvalidPolicy(format!("probabilities must lie in [0, 1]: {self:?}")));
        }
        let sum = self.replace_mask + self.replace_random + self.keep;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(TrainingError::InvalidPolicy(format!(
                "replace_mask + replace_random + keep = {sum}, expected 1"
            )));
        }
        Ok(())
    }
}

/// A policy bound to a vocabulary: knows the `<mask>` id and which ids are
/// never selected nor drawn as random replacements.
#[derive(Debug, Clone)]
pub struct Masker {
    policy: MaskingPolicy,
    vocab_size: u32,
    mask_id: u32,
    protected: Vec<u32>,
}

/// A batch after masking, with the original id at every selected position.
#[derive(Debug, Clone)]
pub struct MaskedBatch {
    pub batch: TokenBatch,
    pub targets: Vec<Option<u32>>,
}

impl MaskedBatch {
    /// Flat positions that carry a target, in order.
    pub fn selected(&self) -> Vec<usize> {
        self.targets
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.map(|_| i))
            .collect()
    }

    pub fn target_ids(&self) -> Vec<usize> {
        self.targets.iter().flatten().map(|&t| t as usize).collect()
    }
}

impl Masker {
    pub fn new(policy: MaskingPolicy, vocab_size: usize, specials: SpecialIds) -> Result<Self, TrainingError> {
        policy.validate()?;
        let mut protected = vec![specials.bos, specials.eos, specials.pad, specials.mask];
        protected.sort_unstable();
        protected.dedup();
        if vocab_size <= protected.len() {
            return Err(TrainingError::InvalidPolicy("vocabulary has no maskable tokens".into()));
        }
        Ok(Self {
            policy,
            vocab_size: vocab_size as u32,
            mask_id: specials.mask,
            protected,
        })
    }

    pub fn policy(&self) -> &MaskingPolicy {
        &self.policy
    }

    pub fn is_protected(&self, id: u32) -> bool {
        self.protected.binary_search(&id).is_ok()
    }

    fn random_token(&self, rng: &mut dyn RngCore) -> u32 {
        loop {
            let id = rng.gen_range(0..self.vocab_size);
            if !self.is_protected(id) {
                return id;
            }
        }
    }

    /// Selects each real, non-special position with probability `mask_prob`.
    pub fn apply(&self, batch: &TokenBatch, rng: &mut dyn RngCore) -> MaskedBatch {
        let mut out = batch.clone();
        let mut targets = vec![None; batch.ids().len()];
        let p = &self.policy;
        for (i, (&id, &real)) in batch.ids().iter().zip(batch.mask()).enumerate() {
            if !real || self.is_protected(id) || rng.gen::<f64>() >= p.mask_prob {
                continue;
            }
            targets[i] = Some(id);
            let u: f64 = rng.gen();
            if u < p.replace_mask {
                out.ids_mut()[i] = self.mask_id;
            } else if u < p.replace_mask + p.replace_random {
                out.ids_mut()[i] = self.random_token(rng);
            }
        }
        MaskedBatch { batch: out, targets }
    }
}

/// [`Masker::apply`] with a generator seeded from `seed`.
pub fn mask_for_mlm(batch: &TokenBatch, masker: &Masker, seed: u64) -> MaskedBatch {
    masker.apply(batch, &mut ChaCha8Rng::seed_from_u64(seed))
}
