use std::fmt;
use std::str::FromStr;

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TokenizerMode {
    #[default]
    Word,
    Bpe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Normalization {
    None,
    /// Unicode canonical composition (NFC).
    #[default]
    Nfc,
}

/// What to do with punctuation characters once a whitespace-delimited chunk
/// has been split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Punctuation {
    /// Every punctuation character becomes a token of its own.
    #[default]
    Separate,
    /// Punctuation characters are dropped.
    Strip,
}

/// Fully determines how raw text turns into token surfaces.
///
/// The default is NFC normalization, lowercasing, and separated punctuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TokenizerConfig {
    pub mode: TokenizerMode,
    pub lowercase: bool,
    pub normalization: Normalization,
    pub punctuation: Punctuation,
    /// Wrap every non-empty input line in [`LINE_START`] and [`LINE_END`].
    /// Off by default: the corpus is one continuous stream.
    pub line_markers: bool,
}

pub const LINE_START: &str = "<s>";
pub const LINE_END: &str = "</s>";

/// Whether `token` is one of the line boundary markers. Tokenized text can
/// never produce them, since `<` and `>` are punctuation.
pub fn is_marker(token: &str) -> bool {
    token == LINE_START || token == LINE_END
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            mode: TokenizerMode::Word,
            lowercase: true,
            normalization: Normalization::Nfc,
            punctuation: Punctuation::Separate,
            line_markers: false,
        }
    }
}

impl TokenizerConfig {
    pub fn bpe() -> Self {
        TokenizerConfig {
            mode: TokenizerMode::Bpe,
            ..Self::default()
        }
    }

    /// Applies normalization and case folding to a single surface, the same
    /// way [`tokenize_words`] does before splitting.
    pub fn normalize(&self, text: &str) -> String {
        let text: String = match self.normalization {
            Normalization::None => text.to_owned(),
            Normalization::Nfc => text.nfc().collect(),
        };
        if self.lowercase {
            text.to_lowercase()
        } else {
            text
        }
    }
}

/// Splits raw UTF-8 bytes into word-level token surfaces.
///
/// Hyphens and apostrophes between two word characters stay attached
/// ("god's", "well-known"); any other non-alphanumeric character is
/// punctuation.
pub fn tokenize_words(text: &[u8], config: &TokenizerConfig) -> Result<Vec<String>> {
    let text = std::str::from_utf8(text)?;
    Ok(tokenize_str(text, config))
}

/// [`tokenize_words`] for text that is already known to be valid UTF-8.
pub fn tokenize_str(text: &str, config: &TokenizerConfig) -> Vec<String> {
    let text = config.normalize(text);
    let mut out = Vec::new();
    if !config.line_markers {
        for chunk in text.split_whitespace() {
            split_chunk(chunk, config.punctuation, &mut out);
        }
        return out;
    }
    for line in text.lines() {
        let start = out.len();
        for chunk in line.split_whitespace() {
            split_chunk(chunk, config.punctuation, &mut out);
        }
        if out.len() > start {
            out.insert(start, LINE_START.to_owned());
            out.push(LINE_END.to_owned());
        }
    }
    out
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || is_combining_mark(c)
}

fn is_joiner(c: char) -> bool {
    matches!(c, '-' | '\'' | '\u{2010}' | '\u{2019}')
}

fn split_chunk(chunk: &str, punctuation: Punctuation, out: &mut Vec<String>) {
    let chars: Vec<(usize, char)> = chunk.char_indices().collect();
    let mut word_start: Option<usize> = None;
    for (i, &(byte, c)) in chars.iter().enumerate() {
        let keep_in_word = is_word_char(c)
            || (is_joiner(c)
                && word_start.is_some()
                && chars.get(i + 1).is_some_and(|&(_, n)| is_word_char(n)));
        if keep_in_word {
            word_start.get_or_insert(byte);
            continue;
        }
        if let Some(start) = word_start.take() {
            out.push(chunk[start..byte].to_owned());
        }
        if punctuation == Punctuation::Separate {
            out.push(c.to_string());
        }
    }
    if let Some(start) = word_start {
        out.push(chunk[start..].to_owned());
    }
}

impl fmt::Display for TokenizerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TokenizerMode::Word => "word",
            TokenizerMode::Bpe => "bpe",
        })
    }
}

impl FromStr for TokenizerMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word" => Ok(TokenizerMode::Word),
            "bpe" => Ok(TokenizerMode::Bpe),
            _ => Err(Error::domain(format!("unknown tokenizer mode {s:?}"))),
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::None => "none",
            Normalization::Nfc => "nfc",
        })
    }
}

impl FromStr for Normalization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Normalization::None),
            "nfc" => Ok(Normalization::Nfc),
            _ => Err(Error::domain(format!("unknown normalization {s:?}"))),
        }
    }
}

impl fmt::Display for Punctuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Punctuation::Separate => "separate",
            Punctuation::Strip => "strip",
        })
    }
}

impl FromStr for Punctuation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "separate" => Ok(Punctuation::Separate),
            "strip" => Ok(Punctuation::Strip),
            _ => Err(Error::domain(format!("unknown punctuation mode {s:?}"))),
        }
    }
}
