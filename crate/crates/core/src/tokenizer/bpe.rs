//! Byte-level BPE: training, encoding, decoding.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::rc::Rc;

use crate::tokenizer::alphabet;
use crate::tokenizer::{Pretokenizer, TokenizerError};

/// Special token names, in id order for freshly trained models.
pub const DEFAULT_SPECIALS: [&str; 4] = ["<s>", "<pad>", "</s>", "<mask>"];

/// Default truncation length in subwords.
pub const DEFAULT_MAX_LEN: usize = 256;

/// Ids of the four special tokens the encoder relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecialIds {
    pub bos: u32,
    pub eos: u32,
    pub pad: u32,
    pub mask: u32,
}

impl SpecialIds {
    pub fn contains(&self, id: u32) -> bool {
        id == self.bos || id == self.eos || id == self.pad || id == self.mask
    }
}

/// A sequence of token ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenIdSeq(pub Vec<u32>);

impl TokenIdSeq {
    pub fn ids(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<u32>> for TokenIdSeq {
    fn from(v: Vec<u32>) -> Self {
        Self(v)
    }
}

/// Trained or loaded byte-level BPE model. Immutable once built.
#[derive(Debug, Clone)]
pub struct BpeModel {
    tokens: Vec<String>,
    vocab: HashMap<String, u32>,
    merges: Vec<(String, String)>,
    merge_ranks: HashMap<(u32, u32), (usize, u32)>,
    byte_ids: [u32; 256],
    specials: Vec<String>,
    special_ids: Vec<u32>,
    max_len: Option<usize>,
    pretokenizer: Pretokenizer,
}

impl BpeModel {
    /// Assembles a model from its serialized parts and checks the invariants:
    /// dense ids, all 256 byte symbols present, merge parts and outputs in the
    /// vocabulary, and no special token inside a merge.
    pub fn from_parts(
        vocab: HashMap<String, u32>,
        merges: Vec<(String, String)>,
        specials: Vec<String>,
        max_len: Option<usize>,
        pretokenizer: Pretokenizer,
    ) -> Result<Self, TokenizerError> {
        let mut tokens = vec![String::new(); vocab.len()];
        let mut seen = vec![false; vocab.len()];
        for (tok, &id) in &vocab {
            let slot = id as usize;
            if slot >= tokens.len() || seen[slot] {
                return Err(TokenizerError::Format(format!(
                    "vocabulary ids are not dense 0..{} (token {tok:?} has id {id})",
                    vocab.len()
                )));
            }
            seen[slot] = true;
            tokens[slot] = tok.clone();
        }
        let mut byte_ids = [0u32; 256];
        for b in 0..=255u8 {
            let sym = alphabet::byte_to_char(b).to_string();
            byte_ids[b as usize] = *vocab
                .get(&sym)
                .ok_or_else(|| TokenizerError::Format(format!("byte symbol {sym:?} missing from vocabulary")))?;
        }
        let mut special_ids = Vec::with_capacity(specials.len());
        for s in &specials {
            special_ids.push(*vocab.get(s).ok_or_else(|| TokenizerError::MissingSpecial(s.clone()))?);
        }
        let mut merge_ranks = HashMap::with_capacity(merges.len());
        for (rank, (l, r)) in merges.iter().enumerate() {
            let lookup = |t: &str| {
                vocab
                    .get(t)
                    .copied()
                    .ok_or_else(|| TokenizerError::Format(format!("merge {rank}: token {t:?} not in vocabulary")))
            };
            let (li, ri) = (lookup(l)?, lookup(r)?);
            let out = lookup(&format!("{l}{r}"))?;
            if [li, ri, out].iter().any(|id| special_ids.contains(id)) {
                return Err(TokenizerError::Format(format!("merge {rank} involves a special token")));
            }
            merge_ranks.entry((li, ri)).or_insert((rank, out));
        }
        Ok(Self {
            tokens,
            vocab,
            merges,
            merge_ranks,
            byte_ids,
            specials,
            special_ids,
            max_len,
            pretokenizer,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn vocab(&self) -> &HashMap<String, u32> {
        &self.vocab
    }

    pub fn specials(&self) -> &[String] {
        &self.specials
    }

    pub fn max_len(&self) -> Option<usize> {
        self.max_len
    }

    pub fn pretokenizer(&self) -> Pretokenizer {
        self.pretokenizer
    }

    pub fn with_max_len(mut self, max_len: Option<usize>) -> Self {
        self.max_len = max_len;
        self
    }

    pub fn with_pretokenizer(mut self, pretokenizer: Pretokenizer) -> Self {
        self.pretokenizer = pretokenizer;
        self
    }

    pub fn token_id(&self, token: &str) -> Option<u32> {
        self.vocab.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn is_special(&self, id: u32) -> bool {
        self.special_ids.contains(&id)
    }

    /// Ids of `<s>`, `</s>`, `<pad>` and `<mask>`.
    pub fn special_ids(&self) -> Result<SpecialIds, TokenizerError> {
        let get = |name: &str| {
            self.specials
                .iter()
                .position(|s| s == name)
                .map(|i| self.special_ids[i])
                .ok_or_else(|| TokenizerError::MissingSpecial(name.to_string()))
        };
        Ok(SpecialIds {
            bos: get("<s>")?,
            eos: get("</s>")?,
            pad: get("<pad>")?,
            mask: get("<mask>")?,
        })
    }

    fn encode_piece(&self, piece: &str, out: &mut Vec<u32>) {
        let mut syms: Vec<u32> = piece.bytes().map(|b| self.byte_ids[b as usize]).collect();
        while syms.len() > 1 {
            let best = syms
                .windows(2)
                .filter_map(|w| self.merge_ranks.get(&(w[0], w[1])).map(|&(rank, id)| (rank, w[0], w[1], id)))
                .min_by_key(|&(rank, ..)| rank);
            let Some((_, l, r, merged)) = best else { break };
            let mut next = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && syms[i] == l && syms[i + 1] == r {
                    next.push(merged);
                    i += 2;
                } else {
                    next.push(syms[i]);
                    i += 1;
                }
            }
            syms = next;
        }
        out.extend(syms);
    }

    /// Encodes without truncation. Total: every input maps to known ids.
    pub fn encode_full(&self, text: &str) -> TokenIdSeq {
        let mut ids = Vec::new();
        for piece in self.pretokenizer.split(text) {
            self.encode_piece(piece, &mut ids);
        }
        TokenIdSeq(ids)
    }

    /// Encodes and truncates the tail to the model's maximum length.
    pub fn encode(&self, text: &str) -> TokenIdSeq {
        let mut seq = self.encode_full(text);
        if let Some(max) = self.max_len {
            seq.0.truncate(max);
        }
        seq
    }

    /// Token strings for `text` (untruncated), for inspection.
    pub fn tokenize(&self, text: &str) -> Vec<&str> {
        self.encode_full(text)
            .0
            .iter()
            .map(|&id| self.tokens[id as usize].as_str())
            .collect()
    }

    /// Inverse of [`BpeModel::encode`]. Special tokens decode to their names;
    /// a byte sequence cut inside a UTF-8 character decodes lossily.
    pub fn decode(&self, seq: &TokenIdSeq) -> Result<String, TokenizerError> {
        let mut bytes = Vec::new();
        for &id in seq.ids() {
            let tok = self.token(id).ok_or(TokenizerError::UnknownId {
                id,
                vocab_size: self.vocab_size(),
            })?;
            if self.is_special(id) {
                bytes.extend_from_slice(tok.as_bytes());
            } else {
                let b = alphabet::decode_symbols(tok)
                    .ok_or_else(|| TokenizerError::Format(format!("token {tok:?} outside the byte alphabet")))?;
                bytes.extend(b);
            }
        }
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }
}

/// Training settings.
#[derive(Debug, Clone)]
pub struct BpeTrainConfig {
    pub vocab_size: usize,
    pub specials: Vec<String>,
    pub pretokenizer: Pretokenizer,
    pub max_len: Option<usize>,
    /// Pairs seen fewer times than this are never merged.
    pub min_pair_count: u64,
}

impl BpeTrainConfig {
    pub fn new(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            specials: DEFAULT_SPECIALS.iter().map(|s| s.to_string()).collect(),
            pretokenizer: Pretokenizer::default(),
            max_len: Some(DEFAULT_MAX_LEN),
            min_pair_count: 2,
        }
    }
}

/// Heap entry; the greatest entry is the most frequent pair, ties going to
/// the lexicographically smallest `(left, right)`.
#[derive(PartialEq, Eq)]
struct Candidate {
    count: u64,
    left: Rc<str>,
    right: Rc<str>,
    pair: (u32, u32),
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| other.left.cmp(&self.left))
            .then_with(|| other.right.cmp(&self.right))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn add_pairs(word: &[u32], freq: u64, sign: i64, counts: &mut HashMap<(u32, u32), i64>, touched: &mut Vec<(u32, u32)>) {
    for w in word.windows(2) {
        let p = (w[0], w[1]);
        *counts.entry(p).or_insert(0) += sign * freq as i64;
        touched.push(p);
    }
}

fn merge_word(word: &[u32], pair: (u32, u32), merged: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(word.len());
    let mut i = 0;
    while i < word.len() {
        if i + 1 < word.len() && word[i] == pair.0 && word[i + 1] == pair.1 {
            out.push(merged);
            i += 2;
        } else {
            out.push(word[i]);
            i += 1;
        }
    }
    out
}

/// Trains with default settings and the given special tokens.
pub fn train_bpe<'a, I>(texts: I, vocab_size: usize, specials: &[&str]) -> Result<BpeModel, TokenizerError>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut cfg = BpeTrainConfig::new(vocab_size);
    cfg.specials = specials.iter().map(|s| s.to_string()).collect();
    train_bpe_with(texts, &cfg)
}

/// Greedy BPE: repeatedly merges the most frequent adjacent symbol pair
/// (ties: smallest `(left, right)` in string order) until the vocabulary
/// reaches `vocab_size` or no pair reaches `min_pair_count`.
///
/// Ids: specials first, then the 256 byte symbols in byte order, then merge
/// outputs in merge order.
pub fn train_bpe_with<'a, I>(texts: I, cfg: &BpeTrainConfig) -> Result<BpeModel, TokenizerError>
where
    I: IntoIterator<Item = &'a str>,
{
    let minimum = 256 + cfg.specials.len();
    if cfg.vocab_size < minimum {
        return Err(TokenizerError::VocabTooSmall {
            requested: cfg.vocab_size,
            minimum,
        });
    }
    let mut tokens: Vec<Rc<str>> = cfg.specials.iter().map(|s| Rc::from(s.as_str())).collect();
    let mut vocab: HashMap<Rc<str>, u32> = HashMap::new();
    for (i, t) in tokens.iter().enumerate() {
        if vocab.insert(t.clone(), i as u32).is_some() {
            return Err(TokenizerError::Format(format!("duplicate special token {t:?}")));
        }
    }
    let mut byte_ids = [0u32; 256];
    for b in 0..=255u8 {
        let sym: Rc<str> = Rc::from(alphabet::byte_to_char(b).to_string().as_str());
        if vocab.contains_key(&sym) {
            return Err(TokenizerError::Format(format!("special token {sym:?} collides with a byte symbol")));
        }
        byte_ids[b as usize] = tokens.len() as u32;
        vocab.insert(sym.clone(), tokens.len() as u32);
        tokens.push(sym);
    }

    let mut word_freq: HashMap<&str, u64> = HashMap::new();
    for text in texts {
        for piece in cfg.pretokenizer.split(text) {
            *word_freq.entry(piece).or_insert(0) += 1;
        }
    }
    let mut entries: Vec<(&str, u64)> = word_freq.into_iter().collect();
    entries.sort_unstable();
    let freqs: Vec<u64> = entries.iter().map(|e| e.1).collect();
    let mut words: Vec<Vec<u32>> = entries
        .iter()
        .map(|(w, _)| w.bytes().map(|b| byte_ids[b as usize]).collect())
        .collect();

    let mut counts: HashMap<(u32, u32), i64> = HashMap::new();
    let mut where_: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
    let mut scratch = Vec::new();
    for (wi, w) in words.iter().enumerate() {
        add_pairs(w, freqs[wi], 1, &mut counts, &mut scratch);
        for p in scratch.drain(..) {
            where_.entry(p).or_default().push(wi);
        }
    }
    let candidate = |pair: (u32, u32), count: i64, tokens: &[Rc<str>]| Candidate {
        count: count as u64,
        left: tokens[pair.0 as usize].clone(),
        right: tokens[pair.1 as usize].clone(),
        pair,
    };
    let mut heap: BinaryHeap<Candidate> = counts
        .iter()
        .filter(|(_, &c)| c > 0)
        .map(|(&p, &c)| candidate(p, c, &tokens))
        .collect();

    let mut merges: Vec<(String, String)> = Vec::new();
    while tokens.len() < cfg.vocab_size {
        let Some(best) = heap.pop() else { break };
        let current = counts.get(&best.pair).copied().unwrap_or(0);
        if current as u64 != best.count || current <= 0 {
            continue;
        }
        if best.count < cfg.min_pair_count {
            break;
        }
        let joined: Rc<str> = Rc::from(format!("{}{}", best.left, best.right).as_str());
        let merged = match vocab.get(&joined) {
            Some(&id) => id,
            None => {
                let id = tokens.len() as u32;
                vocab.insert(joined.clone(), id);
                tokens.push(joined);
                id
            }
        };
        merges.push((best.left.to_string(), best.right.to_string()));

        let mut affected = where_.remove(&best.pair).unwrap_or_default();
        affected.sort_unstable();
        affected.dedup();
        let mut touched = Vec::new();
        for wi in affected {
            let old = &words[wi];
            if !old.windows(2).any(|w| (w[0], w[1]) == best.pair) {
                continue;
            }
            let new = merge_word(old, best.pair, merged);
            add_pairs(old, freqs[wi], -1, &mut counts, &mut touched);
            let start = touched.len();
            add_pairs(&new, freqs[wi], 1, &mut counts, &mut touched);
            for p in &touched[start..] {
                where_.entry(*p).or_default().push(wi);
            }
            words[wi] = new;
        }
        counts.remove(&best.pair);
        touched.sort_unstable();
        touched.dedup();
        for p in touched {
            if let Some(&c) = counts.get(&p) {
                if c > 0 {
                    heap.push(candidate(p, c, &tokens));
                }
            }
        }
    }

    let vocab = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.to_string(), i as u32))
        .collect();
    BpeModel::from_parts(vocab, merges, cfg.specials.clone(), cfg.max_len, cfg.pretokenizer)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn specials() -> Vec<&'static str> {
        DEFAULT_SPECIALS.to_vec()
    }

    #[test]
    fn minimum_vocab_means_no_merges() {
        let m = train_bpe(["hello hello"], 260, &specials()).unwrap();
        assert!(m.merges().is_empty());
        assert_eq!(m.vocab_size(), 260);
        assert_eq!(m.encode("hi!").len(), 3);
    }

    #[test]
    fn vocab_too_small() {
        assert!(matches!(
            train_bpe(["x"], 259, &specials()),
            Err(TokenizerError::VocabTooSmall { requested: 259, minimum: 260 })
        ));
    }

    #[test]
    fn banana_first_merge_breaks_tie_lexicographically() {
        let m = train_bpe(["banana banana"], 261, &specials()).unwrap();
        assert_eq!(m.merges(), &[("a".to_string(), "n".to_string())]);
        assert_eq!(m.tokenize("banana"), vec!["b", "an", "an", "a"]);
    }

    #[test]
    fn empty_and_roundtrip() {
        let m = train_bpe(["banana banana"], 300, &specials()).unwrap();
        assert!(m.encode("").is_empty());
        assert_eq!(m.decode(&TokenIdSeq::default()).unwrap(), "");
        assert_eq!(m.decode(&m.encode("banana")).unwrap(), "banana");
    }

    #[test]
    fn decode_rejects_unknown_id() {
        let m = train_bpe(["a"], 260, &specials()).unwrap();
        assert!(matches!(
            m.decode(&TokenIdSeq(vec![260])),
            Err(TokenizerError::UnknownId { id: 260, vocab_size: 260 })
        ));
    }

    #[test]
    fn training_stops_below_pair_count_two() {
        let m = train_bpe(["abcd"], 1000, &specials()).unwrap();
        assert!(m.merges().is_empty());
    }

    #[test]
    fn truncation() {
        let m = train_bpe(["a"], 260, &specials()).unwrap().with_max_len(Some(3));
        assert_eq!(m.encode("abcdef").len(), 3);
        assert_eq!(m.encode_full("abcdef").len(), 6);
    }

    #[test]
    fn specials_resolved_and_never_emitted() {
        let m = train_bpe(["<s> <mask> text"], 300, &specials()).unwrap();
        let ids = m.special_ids().unwrap();
        assert_eq!((ids.bos, ids.pad, ids.eos, ids.mask), (0, 1, 2, 3));
        let seq = m.encode("<s><mask></s>");
        assert!(seq.ids().iter().all(|&id| !m.is_special(id)));
    }
}
