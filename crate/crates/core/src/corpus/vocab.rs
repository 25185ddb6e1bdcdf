use std::collections::HashMap;

use crate::error::{Error, Result};

/// A token surface paired with its dense id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub id: u32,
    pub surface: &'a str,
}

/// Bijection between token surfaces and contiguous ids `0..len`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    surfaces: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vocabulary with ids assigned in first-occurrence order.
    pub fn build<S: AsRef<str>>(tokens: &[S]) -> Self {
        let mut vocab = Vocabulary::new();
        for t in tokens {
            vocab.intern(t.as_ref());
        }
        vocab
    }

    /// Returns the id of `surface`, assigning the next free id if unseen.
    pub fn intern(&mut self, surface: &str) -> u32 {
        if let Some(&id) = self.ids.get(surface) {
            return id;
        }
        let id = u32::try_from(self.surfaces.len()).expect("vocabulary exceeds u32 ids");
        self.surfaces.push(surface.to_owned());
        self.ids.insert(surface.to_owned(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    pub fn id(&self, surface: &str) -> Option<u32> {
        self.ids.get(surface).copied()
    }

    pub fn surface(&self, id: u32) -> Option<&str> {
        self.surfaces.get(id as usize).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = Token<'_>> {
        self.surfaces.iter().enumerate().map(|(i, s)| Token {
            id: i as u32,
            surface: s,
        })
    }

    /// Maps surfaces to ids. Fails on the first unknown surface.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<u32>> {
        tokens
            .iter()
            .map(|t| {
                let t = t.as_ref();
                self.id(t)
                    .ok_or_else(|| Error::domain(format!("token {t:?} is not in the vocabulary")))
            })
            .collect()
    }

    /// Maps surfaces to ids, interning unseen ones.
    pub fn encode_growing<S: AsRef<str>>(&mut self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().map(|t| self.intern(t.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[u32]) -> Result<Vec<&str>> {
        ids.iter()
            .map(|&id| {
                self.surface(id)
                    .ok_or_else(|| Error::domain(format!("token id {id} is out of range")))
            })
            .collect()
    }

    /// One line per token, `<id>\t<escaped surface>`, ids ascending.
    pub fn to_lines(&self) -> impl Iterator<Item = String> + '_ {
        self.iter()
            .map(|t| format!("{}\t{}", t.id, escape(t.surface)))
    }

    /// Parses the output of [`Vocabulary::to_lines`]. `first_line` is only
    /// used for error positions.
    pub fn from_lines<'a, I>(lines: I, first_line: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut vocab = Vocabulary::new();
        for (n, line) in lines.into_iter().enumerate() {
            let lineno = first_line + n;
            let (id, surface) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(lineno, "expected <id>\\t<surface>"))?;
            let id: usize = id
                .parse()
                .map_err(|_| Error::format(lineno, format!("bad token id {id:?}")))?;
            if id != vocab.len() {
                return Err(Error::format(lineno, format!("expected id {}, found {id}", vocab.len())));
            }
            let surface = unescape(surface).map_err(|m| Error::format(lineno, m))?;
            if surface.is_empty() {
                return Err(Error::format(lineno, "empty token surface"));
            }
            if vocab.ids.contains_key(&surface) {
                return Err(Error::format(lineno, format!("duplicate surface {surface:?}")));
            }
            vocab.intern(&surface);
        }
        Ok(vocab)
    }
}

/// Backslash-escapes tab, newline and backslash.
pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape(s: &str) -> std::result::Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            other => return Err(format!("bad escape sequence \\{}", other.map(String::from).unwrap_or_default())),
        }
    }
    Ok(out)
}
