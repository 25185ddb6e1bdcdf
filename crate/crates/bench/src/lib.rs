//! Shared inputs for the benchmarks.

use std::path::Path;

use markovlm::{corpus, TokenizerConfig, Vocabulary};

/// Token ids of the bundled Bible text, truncated to `limit` tokens. Falls
/// back to a deterministic synthetic stream when the file is missing.
pub fn corpus_ids(limit: usize) -> (Vec<u32>, usize) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/web_bible.txt");
    match std::fs::read(path) {
        Ok(text) => {
            let mut tokens = corpus::tokenize(&text, &TokenizerConfig::default(), None).expect("corpus is UTF-8");
            tokens.truncate(limit);
            let vocab = Vocabulary::build(&tokens);
            let ids = vocab.encode(&tokens).expect("tokens come from the vocabulary");
            (ids, vocab.len())
        }
        Err(_) => synthetic(limit, 5000),
    }
}

/// Zipf-like stream from a linear congruential generator.
pub fn synthetic(len: usize, vocab: usize) -> (Vec<u32>, usize) {
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let ids = (0..len)
        .map(|_| {
            state = state.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
            let u = ((state >> 11) as f64 / (1u64 << 53) as f64).max(1e-12);
            ((vocab as f64).powf(u) as usize - 1).min(vocab - 1) as u32
        })
        .collect();
    (ids, vocab)
}
