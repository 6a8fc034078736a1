use crate::tokenizer::SpecialIds;
use crate::transformer::{EncoderConfig, TransformerError};

/// Padded `[batch × width]` id matrix with its attention mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenBatch {
    ids: Vec<u32>,
    mask: Vec<bool>,
    batch: usize,
    width: usize,
    labels: Option<Vec<usize>>,
}

impl TokenBatch {
    pub fn new(ids: Vec<u32>, mask: Vec<bool>, batch: usize, width: usize) -> Result<Self, TransformerError> {
        if ids.len() != batch * width || mask.len() != ids.len() {
            return Err(TransformerError::Shape(format!(
                "batch {batch}×{width} needs {} ids and mask entries, got {} and {}",
                batch * width,
                ids.len(),
                mask.len()
            )));
        }
        if batch == 0 || width == 0 {
            return Err(TransformerError::Shape("empty batch".into()));
        }
        Ok(Self {
            ids,
            mask,
            batch,
            width,
            labels: None,
        })
    }

    /// Wraps each sequence as `<s> ids </s>`, cutting the content so a row
    /// fits in `max_len`, and right-pads to the longest row.
    pub fn from_sequences<S: AsRef<[u32]>>(seqs: &[S], specials: SpecialIds, max_len: usize) -> Self {
        assert!(max_len >= 2, "max_len must leave room for <s> and </s>");
        assert!(!seqs.is_empty(), "empty batch");
        let rows: Vec<Vec<u32>> = seqs
            .iter()
            .map(|s| {
                let s = s.as_ref();
                let body = &s[..s.len().min(max_len - 2)];
                let mut row = Vec::with_capacity(body.len() + 2);
                row.push(specials.bos);
                row.extend_from_slice(body);
                row.push(specials.eos);
                row
            })
            .collect();
        let width = rows.iter().map(Vec::len).max().unwrap_or(2);
        let mut ids = Vec::with_capacity(rows.len() * width);
        let mut mask = Vec::with_capacity(rows.len() * width);
        for row in &rows {
            mask.extend((0..width).map(|j| j < row.len()));
            ids.extend_from_slice(row);
            ids.extend(std::iter::repeat_n(specials.pad, width - row.len()));
        }
        Self {
            ids,
            mask,
            batch: rows.len(),
            width,
            labels: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self, TransformerError> {
        if labels.len() != self.batch {
            return Err(TransformerError::Shape(format!(
                "{} labels for a batch of {}",
                labels.len(),
                self.batch
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Appends pad columns up to `width`.
    pub fn pad_to(&self, width: usize, pad: u32) -> Self {
        assert!(width >= self.width);
        let mut ids = Vec::with_capacity(self.batch * width);
        let mut mask = Vec::with_capacity(self.batch * width);
        for r in 0..self.batch {
            ids.extend_from_slice(self.row(r));
            ids.extend(std::iter::repeat_n(pad, width - self.width));
            mask.extend_from_slice(&self.mask[r * self.width..(r + 1) * self.width]);
            mask.extend(std::iter::repeat_n(false, width - self.width));
        }
        Self {
            ids,
            mask,
            batch: self.batch,
            width,
            labels: self.labels.clone(),
        }
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let w = self.width;
        Self {
            ids: rows.iter().flat_map(|&r| self.ids[r * w..(r + 1) * w].iter().copied()).collect(),
            mask: rows.iter().flat_map(|&r| self.mask[r * w..(r + 1) * w].iter().copied()).collect(),
            batch: rows.len(),
            width: w,
            labels: self.labels.as_ref().map(|l| rows.iter().map(|&r| l[r]).collect()),
        }
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn ids_mut(&mut self) -> &mut [u32] {
        &mut self.ids
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.ids[r * self.width..(r + 1) * self.width]
    }

    /// Checks the batch against the encoder's vocabulary and length limits.
    pub fn check(&self, cfg: &EncoderConfig) -> Result<(), TransformerError> {
        if self.width > cfg.max_len {
            return Err(TransformerError::TooWide {
                width: self.width,
                max_len: cfg.max_len,
            });
        }
        if let Some(&id) = self.ids.iter().find(|&&id| id as usize >= cfg.vocab_size) {
            return Err(TransformerError::IdOutOfRange {
                id,
                vocab_size: cfg.vocab_size,
            });
        }
        for r in 0..self.batch {
            if !self.mask[r * self.width] {
                return Err(TransformerError::Shape(format!("row {r} has no real tokens")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SP: SpecialIds = SpecialIds {
        bos: 0,
        pad: 1,
        eos: 2,
        mask: 3,
    };

    #[test]
    fn wraps_and_pads() {
        let b = TokenBatch::from_sequences(&[vec![10, 11, 12], vec![20]], SP, 16);
        assert_eq!(b.width(), 5);
        assert_eq!(b.row(0), &[0, 10, 11, 12, 2]);
        assert_eq!(b.row(1), &[0, 20, 2, 1, 1]);
        assert_eq!(&b.mask()[5..], &[true, true, true, false, false]);
    }

    #[test]
    fn truncates_content_to_fit() {
        let b = TokenBatch::from_sequences(&[vec![9; 10]], SP, 4);
        assert_eq!(b.row(0), &[0, 9, 9, 2]);
    }

    #[test]
    fn select_and_pad() {
        let b = TokenBatch::from_sequences(&[vec![10], vec![20, 21]], SP, 8)
            .with_labels(vec![0, 1])
            .unwrap();
        let s = b.select_rows(&[1, 0]);
        assert_eq!(s.row(0), b.row(1));
        assert_eq!(s.labels(), Some(&[1, 0][..]));
        let p = b.pad_to(6, 1);
        assert_eq!(p.row(0), &[0, 10, 2, 1, 1, 1]);
        assert!(!p.mask()[5]);
    }
}
