//! Byte-pair encoding over characters, trained and applied within words.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::tokenize::{tokenize_words, TokenizerConfig};
use super::vocab::{escape, unescape};
use crate::error::{Error, Result};

/// Ordered list of symbol merges. Application order is list order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BpeMergeTable {
    merges: Vec<(String, String)>,
}

impl BpeMergeTable {
    pub fn new(merges: Vec<(String, String)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for pair in &merges {
            if !seen.insert(pair) {
                return Err(Error::domain(format!(
                    "duplicate merge ({:?}, {:?})",
                    pair.0, pair.1
                )));
            }
        }
        Ok(BpeMergeTable { merges })
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn len(&self) -> usize {
        self.merges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merges.is_empty()
    }

    /// Splits one word into characters and applies every merge in order.
    pub fn encode_word(&self, word: &str) -> Vec<String> {
        let mut symbols: Vec<String> = word.chars().map(String::from).collect();
        for (left, right) in &self.merges {
            if symbols.len() < 2 {
                break;
            }
            merge_pair(&mut symbols, left, right);
        }
        symbols
    }

    pub fn to_lines(&self) -> impl Iterator<Item = String> + '_ {
        self.merges
            .iter()
            .map(|(l, r)| format!("{}\t{}", escape(l), escape(r)))
    }

    pub fn from_lines<'a, I>(lines: I, first_line: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut merges = Vec::new();
        for (n, line) in lines.into_iter().enumerate() {
            let lineno = first_line + n;
            let (l, r) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(lineno, "expected <left>\\t<right>"))?;
            let l = unescape(l).map_err(|m| Error::format(lineno, m))?;
            let r = unescape(r).map_err(|m| Error::format(lineno, m))?;
            merges.push((l, r));
        }
        BpeMergeTable::new(merges).map_err(|e| Error::format(first_line, e.to_string()))
    }
}

/// Merges every non-overlapping occurrence of `(left, right)`, scanning left
/// to right.
fn merge_pair(symbols: &mut Vec<String>, left: &str, right: &str) {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == left && symbols[i + 1] == right {
            out.push(format!("{left}{right}"));
            i += 2;
        } else {
            out.push(std::mem::take(&mut symbols[i]));
            i += 1;
        }
    }
    *symbols = out;
}

/// Learns up to `num_merges` merges from a sequence of words.
///
/// Each round merges the most frequent adjacent symbol pair, breaking ties
/// by the lexicographically smallest `(left, right)`. Training stops early
/// once no pair occurs at least twice.
pub fn train_bpe<S: AsRef<str>>(corpus: &[S], num_merges: usize) -> BpeMergeTable {
    let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
    for w in corpus {
        *freq.entry(w.as_ref()).or_default() += 1;
    }
    let mut words: Vec<(Vec<String>, u64)> = freq
        .into_iter()
        .map(|(w, n)| (w.chars().map(String::from).collect(), n))
        .collect();

    let mut merges: Vec<(String, String)> = Vec::new();
    let mut taken: HashSet<(String, String)> = HashSet::new();
    while merges.len() < num_merges {
        let mut counts: HashMap<(&str, &str), u64> = HashMap::new();
        for (symbols, n) in &words {
            for pair in symbols.windows(2) {
                *counts.entry((&pair[0], &pair[1])).or_default() += n;
            }
        }
        let best = counts
            .into_iter()
            .filter(|&((l, r), _)| !taken.contains(&(l.to_owned(), r.to_owned())))
            .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pb.cmp(pa)));
        let Some(((l, r), count)) = best else { break };
        if count < 2 {
            break;
        }
        let pair = (l.to_owned(), r.to_owned());
        for (symbols, _) in &mut words {
            merge_pair(symbols, &pair.0, &pair.1);
        }
        taken.insert(pair.clone());
        merges.push(pair);
    }
    BpeMergeTable { merges }
}

/// Word-splits `text` per `config`, then segments each word with `table`.
/// Symbols never merge across word boundaries.
pub fn apply_bpe(table: &BpeMergeTable, text: &[u8], config: &TokenizerConfig) -> Result<Vec<String>> {
    let words = tokenize_words(text, config)?;
    Ok(segment_words(table, &words))
}

/// Segments already-split words, memoizing per distinct word.
pub fn segment_words<S: AsRef<str>>(table: &BpeMergeTable, words: &[S]) -> Vec<String> {
    let mut cache: HashMap<&str, Vec<String>> = HashMap::new();
    let mut out = Vec::with_capacity(words.len());
    for w in words {
        let w = w.as_ref();
        let pieces = cache.entry(w).or_insert_with(|| table.encode_word(w));
        out.extend(pieces.iter().cloned());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair(l: &str, r: &str) -> (String, String) {
        (l.to_owned(), r.to_owned())
    }

    fn bpe_cfg() -> TokenizerConfig {
        TokenizerConfig::bpe()
    }

    #[test]
    fn zero_merges() {
        assert!(train_bpe(&["abab", "cc"], 0).is_empty());
    }

    #[test]
    fn most_frequent_pair_wins() {
        assert_eq!(train_bpe(&["abab"], 1).merges(), [pair("a", "b")]);
        assert_eq!(train_bpe(&["aa", "aa", "ab"], 1).merges(), [pair("a", "a")]);
    }

    #[test]
    fn ties_break_lexicographically() {
        // (b,c) and (a,b) both occur twice.
        assert_eq!(train_bpe(&["abc", "abc"], 1).merges(), [pair("a", "b")]);
        assert_eq!(train_bpe(&["bc", "bc", "xy", "xy"], 2).merges(), [pair("b", "c"), pair("x", "y")]);
    }

    #[test]
    fn stops_when_no_pair_repeats() {
        let t = train_bpe(&["abcd"], 10);
        assert!(t.is_empty());
        let t = train_bpe(&["ab", "ab", "cd"], 10);
        assert_eq!(t.merges(), [pair("a", "b")]);
    }

    #[test]
    fn apply_examples() {
        let empty = BpeMergeTable::default();
        assert_eq!(apply_bpe(&empty, b"abc", &bpe_cfg()).unwrap(), ["a", "b", "c"]);
        let t = BpeMergeTable::new(vec![pair("a", "b")]).unwrap();
        assert_eq!(apply_bpe(&t, b"abab", &bpe_cfg()).unwrap(), ["ab", "ab"]);
        assert_eq!(apply_bpe(&t, b"cd", &bpe_cfg()).unwrap(), ["c", "d"]);
    }

    #[test]
    fn never_merges_across_words() {
        let t = BpeMergeTable::new(vec![pair("a", "b")]).unwrap();
        assert_eq!(apply_bpe(&t, b"a b", &bpe_cfg()).unwrap(), ["a", "b"]);
    }

    #[test]
    fn applies_in_table_order() {
        // (b,c) first leaves no (a,b) pair in "abc".
        let t = BpeMergeTable::new(vec![pair("b", "c"), pair("a", "b")]).unwrap();
        assert_eq!(t.encode_word("abc"), ["a", "bc"]);
        let t = BpeMergeTable::new(vec![pair("a", "b"), pair("b", "c")]).unwrap();
        assert_eq!(t.encode_word("abc"), ["ab", "c"]);
    }

    #[test]
    fn rejects_duplicate_merges() {
        assert!(BpeMergeTable::new(vec![pair("a", "b"), pair("a", "b")]).is_err());
    }

    #[test]
    fn round_trips_through_lines() {
        let t = BpeMergeTable::new(vec![pair("a", "\t"), pair("\\", "b")]).unwrap();
        let lines: Vec<String> = t.to_lines().collect();
        let back = BpeMergeTable::from_lines(lines.iter().map(String::as_str), 1).unwrap();
        assert_eq!(back, t);
    }

    proptest! {
        #[test]
        fn merge_count_is_bounded(words in prop::collection::vec("[abc]{1,6}", 0..30), n in 0usize..20) {
            let t = train_bpe(&words, n);
            prop_assert!(t.len() <= n);
            prop_assert!(BpeMergeTable::new(t.merges().to_vec()).is_ok());
        }

        #[test]
        fn converged_table_keeps_repeated_word_whole(word in "[a-e]{1,8}", reps in 2usize..6) {
            let corpus = vec![word.clone(); reps];
            let t = train_bpe(&corpus, 64);
            let text = corpus.join(" ");
            let out = apply_bpe(&t, text.as_bytes(), &bpe_cfg()).unwrap();
            prop_assert_eq!(out, corpus);
        }

        #[test]
        fn segmentation_preserves_characters(words in prop::collection::vec("[abc]{1,6}", 1..20)) {
            let t = train_bpe(&words, 8);
            for w in &words {
                prop_assert_eq!(t.encode_word(w).concat(), w.clone());
            }
        }
    }
}
