//! Versioned plain-text model files.
//!
//! ```text
//! MARKOVLM v1
//! kind=ngram
//! k=2
//! tokenizer=word
//! ...
//! vocab 3
//! 0<TAB>a
//! ...
//! contexts 2
//! 0 1<TAB>0:3 2:1
//! ...
//! merges 0          (only for bpe models)
//! ```
//!
//! Contexts are written in ascending id order and continuations ascending by
//! id, so writing the same model always yields the same bytes. Chain tables
//! use `kind=chain` with `states N` and `rows N` sections, probabilities in
//! shortest round-trip form.

use std::collections::HashMap;
use std::io::{self, Write};

use crate::chain::TransitionTable;
use crate::corpus::{self, BpeMergeTable, Normalization, Punctuation, TokenizerConfig, TokenizerMode, Vocabulary};
use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::ngram::{ContinuationTable, KGramIndex};
use crate::smoothing::SmoothingConfig;

pub const MAGIC: &str = "MARKOVLM v1";

/// A trained k-gram model with everything needed to tokenize new text the
/// same way.
#[derive(Debug, Clone)]
pub struct NgramModel {
    pub tokenizer: TokenizerConfig,
    /// Default smoothing for commands that use the model.
    pub smoothing: SmoothingConfig,
    pub vocab: Vocabulary,
    pub index: KGramIndex,
    /// Present exactly when the tokenizer is in bpe mode.
    pub merges: Option<BpeMergeTable>,
}

impl NgramModel {
    /// Tokenizes `text` and counts its `(k + 1)`-grams.
    pub fn train(
        text: &[u8],
        k: usize,
        tokenizer: TokenizerConfig,
        smoothing: SmoothingConfig,
        merges: Option<BpeMergeTable>,
    ) -> Result<Self> {
        smoothing.validate(k)?;
        let merges = match tokenizer.mode {
            TokenizerMode::Bpe => Some(merges.unwrap_or_default()),
            TokenizerMode::Word => None,
        };
        let tokens = corpus::tokenize(text, &tokenizer, merges.as_ref())?;
        let vocab = Vocabulary::build(&tokens);
        let ids = vocab.encode(&tokens)?;
        let index = KGramIndex::build(&ids, k, vocab.len())?;
        Ok(NgramModel {
            tokenizer,
            smoothing,
            vocab,
            index,
            merges,
        })
    }

    /// Tokenizes `text` with the model's tokenizer; unknown tokens are an
    /// error.
    pub fn encode_text(&self, text: &[u8]) -> Result<Vec<u32>> {
        let tokens = corpus::tokenize(text, &self.tokenizer, self.merges.as_ref())?;
        self.vocab.encode(&tokens)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        let index = &self.index;
        writeln!(out, "{MAGIC}")?;
        writeln!(out, "kind=ngram")?;
        writeln!(out, "k={}", index.k())?;
        write_tokenizer(&mut out, &self.tokenizer)?;
        write_smoothing(&mut out, &self.smoothing)?;
        writeln!(out, "total_tokens={}", index.total_tokens())?;
        writeln!(out, "vocab_size={}", index.vocab_size())?;
        writeln!(out, "head={}", join_ids(index.head()))?;
        writeln!(out, "tail={}", join_ids(index.tail()))?;
        writeln!(out, "vocab {}", self.vocab.len())?;
        for line in self.vocab.to_lines() {
            writeln!(out, "{line}")?;
        }
        writeln!(out, "contexts {}", index.distinct_contexts())?;
        for (ctx, table) in index.sorted() {
            write!(out, "{}\t", join_ids(ctx))?;
            for (i, (id, count)) in table.entries().iter().enumerate() {
                if i > 0 {
                    out.write_all(b" ")?;
                }
                write!(out, "{id}:{count}")?;
            }
            out.write_all(b"\n")?;
        }
        if let Some(merges) = &self.merges {
            writeln!(out, "merges {}", merges.len())?;
            for line in merges.to_lines() {
                writeln!(out, "{line}")?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to memory cannot fail");
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        match ModelFile::parse(text)? {
            ModelFile::Ngram(m) => Ok(m),
            ModelFile::Chain(_) => Err(Error::format(2, "expected kind=ngram, found kind=chain")),
        }
    }

    fn parse_body(mut lines: Lines<'_>, mut header: Header) -> Result<Self> {
        let k: usize = header.parse("k")?;
        let tokenizer = TokenizerConfig {
            mode: header.parse("tokenizer")?,
            lowercase: header.parse("lowercase")?,
            normalization: header.parse::<Normalization>("normalization")?,
            punctuation: header.parse::<Punctuation>("punctuation")?,
            line_markers: header.parse("line_markers")?,
        };
        let smoothing = read_smoothing(&mut header)?;
        let total_tokens: u64 = header.parse("total_tokens")?;
        let vocab_size: usize = header.parse("vocab_size")?;
        let head = header.ids("head")?;
        let tail = header.ids("tail")?;
        header.finish()?;
        smoothing
            .validate(k)
            .map_err(|e| Error::format(header.line, e.to_string()))?;

        let (first, n) = lines.section("vocab")?;
        let vocab = Vocabulary::from_lines(lines.take(n)?, first)?;
        if vocab.len() != vocab_size {
            return Err(Error::format(first - 1, format!("vocab_size={vocab_size} but {} tokens listed", vocab.len())));
        }

        let (first, n) = lines.section("contexts")?;
        let mut contexts = Vec::with_capacity(n);
        let mut previous: Option<Vec<u32>> = None;
        for (i, line) in lines.take(n)?.into_iter().enumerate() {
            let lineno = first + i;
            let (ctx, table) = parse_context_line(line, lineno)?;
            if previous.as_ref().is_some_and(|p| *p >= ctx) {
                return Err(Error::format(lineno, "contexts are not in ascending order"));
            }
            previous = Some(ctx.clone());
            contexts.push((ctx, table));
        }
        let contexts_end = lines.line;
        let index = KGramIndex::from_parts(k, total_tokens, vocab_size, head, tail, contexts)
            .map_err(|e| Error::format(contexts_end, e.to_string()))?;

        let merges = match tokenizer.mode {
            TokenizerMode::Bpe => {
                let (first, n) = lines.section("merges")?;
                Some(BpeMergeTable::from_lines(lines.take(n)?, first)?)
            }
            TokenizerMode::Word => None,
        };
        lines.finish()?;
        Ok(NgramModel {
            tokenizer,
            smoothing,
            vocab,
            index,
            merges,
        })
    }
}

/// Either kind of model file.
#[derive(Debug, Clone)]
pub enum ModelFile {
    Ngram(NgramModel),
    Chain(TransitionTable),
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        let magic = lines.next()?;
        if magic != MAGIC {
            return Err(Error::format(1, format!("expected {MAGIC:?}, found {magic:?}")));
        }
        let mut header = Header::read(&mut lines)?;
        match header.take("kind")? {
            "ngram" => NgramModel::parse_body(lines, header).map(ModelFile::Ngram),
            "chain" => parse_chain_body(lines, header).map(ModelFile::Chain),
            other => Err(Error::format(2, format!("unknown model kind {other:?}"))),
        }
    }
}

pub fn write_chain<W: Write>(table: &TransitionTable, mut out: W) -> io::Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "kind=chain")?;
    writeln!(out, "order={}", table.order())?;
    writeln!(out, "states {}", table.states().len())?;
    for (id, name) in table.states().iter().enumerate() {
        writeln!(out, "{id}\t{name}")?;
    }
    writeln!(out, "rows {}", table.len())?;
    for (history, dist) in table.rows() {
        write!(out, "{}\t", join_ids(history))?;
        for (i, (id, p)) in dist.support().iter().enumerate() {
            if i > 0 {
                out.write_all(b" ")?;
            }
            write!(out, "{id}:{p}")?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn chain_to_bytes(table: &TransitionTable) -> Vec<u8> {
    let mut out = Vec::new();
    write_chain(table, &mut out).expect("writing to memory cannot fail");
    out
}

/// Parses a `kind=chain` file. Rows are loaded as written; call
/// [`TransitionTable::validate`] to check them.
pub fn parse_chain(text: &str) -> Result<TransitionTable> {
    match ModelFile::parse(text)? {
        ModelFile::Chain(t) => Ok(t),
        ModelFile::Ngram(_) => Err(Error::format(2, "expected kind=chain, found kind=ngram")),
    }
}

fn parse_chain_body(mut lines: Lines<'_>, mut header: Header) -> Result<TransitionTable> {
    let order: usize = header.parse("order")?;
    header.finish()?;
    let (first, n) = lines.section("states")?;
    let mut names = Vec::with_capacity(n);
    for (i, line) in lines.take(n)?.into_iter().enumerate() {
        let lineno = first + i;
        let (id, name) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(lineno, "expected <id>\\t<state>"))?;
        if id.parse::<usize>().ok() != Some(i) {
            return Err(Error::format(lineno, format!("expected state id {i}, found {id:?}")));
        }
        names.push(name);
    }
    let mut table = TransitionTable::new(order, names).map_err(|e| Error::format(first, e.to_string()))?;
    let states = table.states().len();

    let (first, n) = lines.section("rows")?;
    for (i, line) in lines.take(n)?.into_iter().enumerate() {
        let lineno = first + i;
        let (history, rest) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(lineno, "expected <history>\\t<id:p ...>"))?;
        let history = parse_ids(history, lineno)?;
        if history.len() != order {
            return Err(Error::format(lineno, format!("history needs {order} states")));
        }
        let mut pairs = Vec::new();
        for item in rest.split(' ') {
            let (id, p) = item
                .split_once(':')
                .ok_or_else(|| Error::format(lineno, format!("expected <id>:<p>, found {item:?}")))?;
            let id = parse_id(id, lineno)?;
            let p: f64 = p
                .parse()
                .map_err(|_| Error::format(lineno, format!("bad probability {p:?}")))?;
            pairs.push((id, p));
        }
        if let Some(&bad) = history.iter().chain(pairs.iter().map(|(id, _)| id)).find(|&&id| id as usize >= states) {
            return Err(Error::format(lineno, format!("state id {bad} is not declared")));
        }
        if table.rows().any(|(h, _)| h == history.as_slice()) {
            return Err(Error::format(lineno, "history appears twice"));
        }
        table.insert_row(history, Distribution::unchecked(pairs));
    }
    lines.finish()?;
    Ok(table)
}

fn write_tokenizer<W: Write>(out: &mut W, cfg: &TokenizerConfig) -> io::Result<()> {
    writeln!(out, "tokenizer={}", cfg.mode)?;
    writeln!(out, "lowercase={}", cfg.lowercase)?;
    writeln!(out, "normalization={}", cfg.normalization)?;
    writeln!(out, "punctuation={}", cfg.punctuation)?;
    writeln!(out, "line_markers={}", cfg.line_markers)
}

fn write_smoothing<W: Write>(out: &mut W, smoothing: &SmoothingConfig) -> io::Result<()> {
    writeln!(out, "smoothing={}", smoothing.name())?;
    match smoothing {
        SmoothingConfig::None => Ok(()),
        SmoothingConfig::AddAlpha { alpha } => writeln!(out, "alpha={alpha}"),
        SmoothingConfig::Interpolation { lambdas } => {
            let joined: Vec<String> = lambdas.iter().map(f64::to_string).collect();
            writeln!(out, "lambdas={}", joined.join(" "))
        }
        SmoothingConfig::Backoff { discount } => writeln!(out, "discount={discount}"),
    }
}

fn read_smoothing(header: &mut Header) -> Result<SmoothingConfig> {
    Ok(match header.take("smoothing")? {
        "none" => SmoothingConfig::None,
        "add_alpha" => SmoothingConfig::AddAlpha {
            alpha: header.parse("alpha")?,
        },
        "interpolation" => {
            let line = header.line;
            let lambdas = header
                .take("lambdas")?
                .split(' ')
                .map(|v| v.parse().map_err(|_| Error::format(line, format!("bad lambda {v:?}"))))
                .collect::<Result<_>>()?;
            SmoothingConfig::Interpolation { lambdas }
        }
        "backoff" => SmoothingConfig::Backoff {
            discount: header.parse("discount")?,
        },
        other => return Err(Error::format(header.line, format!("unknown smoothing {other:?}"))),
    })
}

fn parse_context_line(line: &str, lineno: usize) -> Result<(Vec<u32>, ContinuationTable)> {
    let (ctx, rest) = line
        .split_once('\t')
        .ok_or_else(|| Error::format(lineno, "expected <context>\\t<id:count ...>"))?;
    let ctx = parse_ids(ctx, lineno)?;
    let mut counts = Vec::new();
    for item in rest.split(' ') {
        let (id, count) = item
            .split_once(':')
            .ok_or_else(|| Error::format(lineno, format!("expected <id>:<count>, found {item:?}")))?;
        let id = parse_id(id, lineno)?;
        let count: u64 = count
            .parse()
            .map_err(|_| Error::format(lineno, format!("bad count {count:?}")))?;
        if count == 0 {
            return Err(Error::format(lineno, "zero count"));
        }
        if counts.last().is_some_and(|&(prev, _)| prev >= id) {
            return Err(Error::format(lineno, "continuations are not in ascending id order"));
        }
        counts.push((id, count));
    }
    let table = ContinuationTable::from_counts(counts).map_err(|e| Error::format(lineno, e.to_string()))?;
    Ok((ctx, table))
}

fn join_ids(ids: &[u32]) -> String {
    let parts: Vec<String> = ids.iter().map(u32::to_string).collect();
    parts.join(" ")
}

fn parse_id(s: &str, lineno: usize) -> Result<u32> {
    s.parse().map_err(|_| Error::format(lineno, format!("bad id {s:?}")))
}

fn parse_ids(s: &str, lineno: usize) -> Result<Vec<u32>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(' ').map(|id| parse_id(id, lineno)).collect()
}

/// Line cursor with 1-based line numbers for error messages.
struct Lines<'a> {
    lines: std::str::Split<'a, char>,
    /// Number of the line most recently returned.
    line: usize,
    pending: Option<&'a str>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let text = text.strip_suffix('\n').unwrap_or(text);
        Lines {
            lines: text.split('\n'),
            line: 0,
            pending: None,
        }
    }

    fn peek(&mut self) -> Option<&'a str> {
        if self.pending.is_none() {
            self.pending = self.lines.next();
        }
        self.pending
    }

    fn next(&mut self) -> Result<&'a str> {
        let line = self.peek().ok_or_else(|| Error::format(self.line + 1, "unexpected end of file"))?;
        self.pending = None;
        self.line += 1;
        Ok(line)
    }

    /// Reads `"<name> <count>"`, returning the line number of the first
    /// section line and the count.
    fn section(&mut self, name: &str) -> Result<(usize, usize)> {
        let line = self.next()?;
        let count = line
            .strip_prefix(name)
            .and_then(|rest| rest.strip_prefix(' '))
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| Error::format(self.line, format!("expected \"{name} <count>\", found {line:?}")))?;
        Ok((self.line + 1, count))
    }

    fn take(&mut self, n: usize) -> Result<Vec<&'a str>> {
        (0..n).map(|_| self.next()).collect()
    }

    fn finish(&mut self) -> Result<()> {
        match self.peek() {
            None => Ok(()),
            Some(extra) => Err(Error::format(self.line + 1, format!("unexpected trailing line {extra:?}"))),
        }
    }
}

/// `key=value` lines following the magic line.
struct Header<'a> {
    values: HashMap<&'a str, (usize, &'a str)>,
    /// Line of the last header entry.
    line: usize,
}

impl<'a> Header<'a> {
    fn read(lines: &mut Lines<'a>) -> Result<Self> {
        let mut values = HashMap::new();
        while let Some(line) = lines.peek() {
            let Some((key, value)) = line.split_once('=') else {
                break;
            };
            lines.next()?;
            if values.insert(key, (lines.line, value)).is_some() {
                return Err(Error::format(lines.line, format!("duplicate header key {key:?}")));
            }
        }
        Ok(Header {
            values,
            line: lines.line,
        })
    }

    fn take(&mut self, key: &str) -> Result<&'a str> {
        self.values
            .remove(key)
            .map(|(_, v)| v)
            .ok_or_else(|| Error::format(self.line, format!("missing header key {key:?}")))
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let line = self.values.get(key).map_or(self.line, |&(l, _)| l);
        let value = self.take(key)?;
        value
            .parse()
            .map_err(|_| Error::format(line, format!("bad value {value:?} for {key}")))
    }

    fn ids(&mut self, key: &str) -> Result<Vec<u32>> {
        let line = self.values.get(key).map_or(self.line, |&(l, _)| l);
        parse_ids(self.take(key)?, line)
    }

    fn finish(&self) -> Result<()> {
        match self.values.iter().min_by_key(|(_, (line, _))| *line) {
            None => Ok(()),
            Some((key, (line, _))) => Err(Error::format(*line, format!("unknown header key {key:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn weather() -> TransitionTable {
        let mut t = TransitionTable::new(2, ["soleado", "nublado", "lluvioso"]).unwrap();
        t.set_row(&["nublado", "lluvioso"], &[("soleado", 0.2), ("nublado", 0.4), ("lluvioso", 0.4)])
            .unwrap();
        t.set_row(&["soleado", "soleado"], &[("soleado", 0.7), ("nublado", 0.2), ("lluvioso", 0.1)])
            .unwrap();
        t
    }

    #[test]
    fn ngram_layout() {
        let m = NgramModel::train(b"a b a c", 1, TokenizerConfig::default(), SmoothingConfig::None, None).unwrap();
        let text = String::from_utf8(m.to_bytes()).unwrap();
        let expected = "MARKOVLM v1\nkind=ngram\nk=1\ntokenizer=word\nlowercase=true\nnormalization=nfc\n\
                        punctuation=separate\nline_markers=false\nsmoothing=none\ntotal_tokens=4\nvocab_size=3\nhead=0\ntail=2\n\
                        vocab 3\n0\ta\n1\tb\n2\tc\ncontexts 2\n0\t1:1 2:1\n1\t0:1\n";
        assert_eq!(text, expected);
        let back = NgramModel::parse(&text).unwrap();
        assert_eq!(back.to_bytes(), m.to_bytes());
        assert_eq!(back.index.sorted(), m.index.sorted());
    }

    #[test]
    fn short_corpus_has_empty_contexts() {
        let m = NgramModel::train(b"a b c", 3, TokenizerConfig::default(), SmoothingConfig::None, None).unwrap();
        let text = String::from_utf8(m.to_bytes()).unwrap();
        assert!(text.ends_with("contexts 0\n"));
        assert_eq!(NgramModel::parse(&text).unwrap().to_bytes(), m.to_bytes());
    }

    #[test]
    fn smoothing_and_merges_round_trip() {
        let cfg = TokenizerConfig::bpe();
        let merges = BpeMergeTable::new(vec![("t".into(), "h".into()), ("th".into(), "e".into())]).unwrap();
        for smoothing in [
            SmoothingConfig::AddAlpha { alpha: 0.1 },
            SmoothingConfig::Interpolation {
                lambdas: SmoothingConfig::uniform_lambdas(2),
            },
            SmoothingConfig::Backoff { discount: 0.75 },
        ] {
            let m = NgramModel::train(b"the cat, the tether", 2, cfg.clone(), smoothing.clone(), Some(merges.clone()))
                .unwrap();
            let bytes = m.to_bytes();
            let back = NgramModel::parse(std::str::from_utf8(&bytes).unwrap()).unwrap();
            assert_eq!(back.smoothing, smoothing);
            assert_eq!(back.merges.as_ref(), Some(&merges));
            assert_eq!(back.to_bytes(), bytes);
        }
    }

    #[test]
    fn chain_round_trip() {
        let t = weather();
        let bytes = chain_to_bytes(&t);
        let text = std::str::from_utf8(&bytes).unwrap();
        assert!(text.contains("rows 2\n0 0\t0:0.7 1:0.2 2:0.1\n1 2\t0:0.2 1:0.4 2:0.4\n"));
        let back = parse_chain(text).unwrap();
        assert_eq!(back, t);
        assert_eq!(chain_to_bytes(&back), bytes);
        assert!(NgramModel::parse(text).is_err());
    }

    #[test]
    fn corrupt_files_report_lines() {
        let good = String::from_utf8(
            NgramModel::train(b"a b a c", 1, TokenizerConfig::default(), SmoothingConfig::None, None)
                .unwrap()
                .to_bytes(),
        )
        .unwrap();
        let line_of = |text: &str| match ModelFile::parse(text) {
            Err(Error::Format { line, .. }) => line,
            other => panic!("expected a format error, got {other:?}"),
        };
        assert_eq!(line_of(&good.replace("MARKOVLM v1", "MARKOVLM v2")), 1);
        assert_eq!(line_of(&good.replace("0\t1:1 2:1", "0\t2:1 1:1")), 19);
        assert_eq!(line_of(&good.replace("0\t1:1 2:1", "0\t1:1 2:2")), 20);
        assert_eq!(line_of(&good.replace("k=1\n", "")), 12);
        assert_eq!(line_of(&good.replace("k=1\n", "k=1\nextra=1\n")), 4);
        assert_eq!(line_of(&format!("{good}junk\n")), 21);
        assert_eq!(line_of(&good.replace("1\t0:1\n", "")), 20);
        assert_eq!(line_of(&good.replace("2\tc", "2\tb")), 17);
    }

    proptest! {
        #[test]
        fn random_models_round_trip(words in prop::collection::vec("[a-d]{1,2}|[.,]", 0..120), k in 1usize..4) {
            let text = words.join(" ");
            let m = NgramModel::train(text.as_bytes(), k, TokenizerConfig::default(), SmoothingConfig::None, None).unwrap();
            let bytes = m.to_bytes();
            let back = NgramModel::parse(std::str::from_utf8(&bytes).unwrap()).unwrap();
            prop_assert_eq!(back.to_bytes(), bytes);
            prop_assert_eq!(back.index.sorted(), m.index.sorted());
            prop_assert_eq!(back.index.head(), m.index.head());
            prop_assert_eq!(back.vocab, m.vocab);
        }
    }
}
