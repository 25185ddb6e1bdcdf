//! Text ingestion: word and BPE tokenization, and the token vocabulary.

mod bpe;
mod tokenize;
mod vocab;

pub use bpe::{apply_bpe, segment_words, train_bpe, BpeMergeTable};
pub use tokenize::{
    is_marker, tokenize_str, tokenize_words, Normalization, Punctuation, TokenizerConfig, TokenizerMode, LINE_END,
    LINE_START,
};
pub use vocab::{escape, unescape, Token, Vocabulary};

use crate::error::Result;

/// Tokenizes `text` according to `config.mode`. In BPE mode `merges` is
/// applied after word splitting; a missing table means plain characters.
/// Line markers are never segmented.
pub fn tokenize(text: &[u8], config: &TokenizerConfig, merges: Option<&BpeMergeTable>) -> Result<Vec<String>> {
    let words = tokenize_words(text, config)?;
    Ok(match config.mode {
        TokenizerMode::Word => words,
        TokenizerMode::Bpe => {
            let plain = BpeMergeTable::default();
            let table = merges.unwrap_or(&plain);
            let mut out = Vec::with_capacity(words.len());
            // markers pass through whole; the words between them are segmented
            for run in words.split_inclusive(|w| is_marker(w)) {
                let (body, marker) = match run.last() {
                    Some(last) if is_marker(last) => (&run[..run.len() - 1], Some(last)),
                    _ => (run, None),
                };
                out.extend(segment_words(table, body));
                out.extend(marker.cloned());
            }
            out
        }
    })
}
