//! N-gram text ingestion producing K-sparse training examples.
//!
//! A corpus is plain UTF-8 text, one document per line, tokenized on ASCII
//! whitespace with no case folding. The vocabulary keeps the `vocab_cap - 1`
//! most frequent tokens (ties broken lexicographically) at ids `1..`, with
//! id 0 reserved for unknown; out-of-vocabulary tokens map to 0 on both the
//! context and target side. A sliding window of width `n` over each line
//! yields one example per position: the first `n - 1` ids are the context,
//! the last is the next-token target. Lines shorter than `n` tokens are
//! skipped silently.
//!
//! For the network, a context is encoded as a `K = n - 1` sparse input over
//! a `(n - 1) * vocab_cap`-dimensional space: position `p`'s token id `t`
//! activates index `p * vocab_cap + t` with unit value, so the input layer
//! learns distinct weights per context position. Targets are one-hot.

use std::collections::HashMap;
use std::fmt;

use lst_core::{KSparseVec, Result as CoreResult};

/// Ingestion failure: the corpus contains no tokens at all.
///
/// A corpus whose every line is shorter than `n` is *not* an error; it just
/// yields zero examples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IngestError {
    EmptyCorpus,
}

impl fmt::Display for IngestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IngestError::EmptyCorpus => write!(f, "corpus contains no tokens"),
        }
    }
}

impl std::error::Error for IngestError {}

/// Frequency-ranked vocabulary plus the extracted (context, target) ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramDataset {
    /// Window width; contexts have `n - 1` ids.
    pub n: usize,
    /// Total id space, including the reserved unknown id 0.
    pub vocab_cap: usize,
    /// Token -> id, ids in `1..vocab_cap`; unknown (id 0) is implicit.
    pub vocab: HashMap<String, u32>,
    /// One entry per window: (`n - 1` context ids, next-token id).
    pub examples: Vec<(Vec<u32>, u32)>,
}

impl NgramDataset {
    /// Input dimension of the positional-block encoding.
    pub fn input_dim(&self) -> usize {
        (self.n - 1) * self.vocab_cap
    }

    /// Target dimension (one-hot over the id space).
    pub fn target_dim(&self) -> usize {
        self.vocab_cap
    }
}

/// Build the dataset from raw text. Deterministic: same bytes in, same
/// vocabulary and example sequence out.
pub fn ingest_ngrams(text: &str, n: usize, vocab_cap: usize) -> Result<NgramDataset, IngestError> {
    assert!(n >= 2, "window width must be at least 2");
    assert!(vocab_cap >= 1, "vocabulary cap must be at least 1");

    let mut counts: HashMap<&str, u64> = HashMap::new();
    let mut total = 0u64;
    for line in text.lines() {
        for tok in line.split_ascii_whitespace() {
            *counts.entry(tok).or_insert(0) += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(IngestError::EmptyCorpus);
    }

    // Rank by frequency descending, ties lexicographically ascending.
    let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(vocab_cap - 1);

    let mut vocab = HashMap::new();
    for (rank, (tok, _)) in ranked.iter().enumerate() {
        vocab.insert(tok.to_string(), (rank + 1) as u32);
    }

    let mut examples = Vec::new();
    for line in text.lines() {
        let ids: Vec<u32> = line
            .split_ascii_whitespace()
            .map(|tok| vocab.get(tok).copied().unwrap_or(0))
            .collect();
        if ids.len() < n {
            continue;
        }
        for window in ids.windows(n) {
            examples.push((window[..n - 1].to_vec(), window[n - 1]));
        }
    }

    Ok(NgramDataset { n, vocab_cap, vocab, examples })
}

/// Encode one example as (sparse input, one-hot target) columns.
///
/// Indices `p * vocab_cap + ctx[p]` are strictly increasing across positions,
/// so the sparse constructor sees an already-canonical pattern.
pub fn encode_example(
    ctx: &[u32],
    target: u32,
    vocab_cap: usize,
) -> CoreResult<(KSparseVec, KSparseVec)> {
    let indices: Vec<usize> = ctx
        .iter()
        .enumerate()
        .map(|(p, &id)| p * vocab_cap + id as usize)
        .collect();
    let values = vec![1.0; ctx.len()];
    let x = KSparseVec::new(ctx.len() * vocab_cap, indices, values)?;
    let y = KSparseVec::new(vocab_cap, vec![target as usize], vec![1.0])?;
    Ok((x, y))
}
