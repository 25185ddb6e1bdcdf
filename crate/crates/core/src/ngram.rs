//! k-gram counting over a token-id stream and maximum-likelihood
//! conditional distributions.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use crate::dist::Distribution;
use crate::error::{Error, Result};

/// Counts of the tokens observed right after one context.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ContinuationTable {
    /// Sorted ascending by token id; every count is positive.
    entries: Vec<(u32, u64)>,
    total: u64,
}

impl ContinuationTable {
    /// Builds a table from `(token, count)` pairs. Pairs are sorted and
    /// duplicates summed; zero counts are rejected.
    pub fn from_counts(counts: impl IntoIterator<Item = (u32, u64)>) -> Result<Self> {
        let mut merged: BTreeMap<u32, u64> = BTreeMap::new();
        for (id, c) in counts {
            if c == 0 {
                return Err(Error::domain(format!("zero count for token {id}")));
            }
            *merged.entry(id).or_default() += c;
        }
        let entries: Vec<(u32, u64)> = merged.into_iter().collect();
        let total = entries.iter().map(|&(_, c)| c).sum();
        Ok(ContinuationTable { entries, total })
    }

    pub fn entries(&self) -> &[(u32, u64)] {
        &self.entries
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of distinct continuations.
    pub fn distinct(&self) -> usize {
        self.entries.len()
    }

    pub fn count(&self, token: u32) -> u64 {
        self.entries
            .binary_search_by_key(&token, |&(id, _)| id)
            .map_or(0, |i| self.entries[i].1)
    }

    pub fn mle(&self, token: u32) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(token) as f64 / self.total as f64
        }
    }

    /// MLE distribution over the observed continuations.
    pub fn distribution(&self) -> Distribution {
        Distribution::unchecked(
            self.entries
                .iter()
                .map(|&(id, c)| (id, c as f64 / self.total as f64)),
        )
    }
}

/// One row of [`KGramIndex::continuations`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Continuation {
    pub token: u32,
    pub count: u64,
    pub probability: f64,
}

/// Mapping from k-token contexts to the counts of what followed them.
///
/// Besides the counts, the index keeps the first and last `k` tokens of the
/// stream. With those, every lower-order index and the unigram table can be
/// recovered exactly ([`KGramIndex::reduce`], [`KGramIndex::unigram`]), and
/// corpus positions can be sampled uniformly without the corpus itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KGramIndex {
    k: usize,
    contexts: HashMap<Box<[u32]>, ContinuationTable>,
    total_tokens: u64,
    vocab_size: usize,
    head: Vec<u32>,
    tail: Vec<u32>,
}

/// Counts every `(k + 1)`-token window of `tokens`. Shorter streams yield an
/// empty index.
pub fn count_kgrams(tokens: &[u32], k: usize, vocab_size: usize) -> Result<KGramIndex> {
    KGramIndex::build(tokens, k, vocab_size)
}

impl KGramIndex {
    pub fn build(tokens: &[u32], k: usize, vocab_size: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("context length k must be at least 1"));
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t as usize >= vocab_size) {
            return Err(Error::domain(format!(
                "token id {bad} is outside a vocabulary of size {vocab_size}"
            )));
        }
        let n = tokens.len();
        let mut contexts = HashMap::new();
        if n > k {
            let width = k + 1;
            let mut starts: Vec<usize> = (0..n - k).collect();
            starts.par_sort_unstable_by(|&a, &b| tokens[a..a + width].cmp(&tokens[b..b + width]));
            let mut i = 0;
            while i < starts.len() {
                let ctx = &tokens[starts[i]..starts[i] + k];
                let mut entries: Vec<(u32, u64)> = Vec::new();
                while i < starts.len() && &tokens[starts[i]..starts[i] + k] == ctx {
                    let next = tokens[starts[i] + k];
                    match entries.last_mut() {
                        Some((id, c)) if *id == next => *c += 1,
                        _ => entries.push((next, 1)),
                    }
                    i += 1;
                }
                let total = entries.iter().map(|&(_, c)| c).sum();
                contexts.insert(ctx.into(), ContinuationTable { entries, total });
            }
        }
        Ok(KGramIndex {
            k,
            contexts,
            total_tokens: n as u64,
            vocab_size,
            head: tokens[..k.min(n)].to_vec(),
            tail: tokens[n - k.min(n)..].to_vec(),
        })
    }

    /// Reassembles an index from stored parts, checking its invariants.
    pub fn from_parts(
        k: usize,
        total_tokens: u64,
        vocab_size: usize,
        head: Vec<u32>,
        tail: Vec<u32>,
        contexts: impl IntoIterator<Item = (Vec<u32>, ContinuationTable)>,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("context length k must be at least 1"));
        }
        let edge = (k as u64).min(total_tokens) as usize;
        if head.len() != edge || tail.len() != edge {
            return Err(Error::domain(format!(
                "head and tail must hold {edge} tokens, found {} and {}",
                head.len(),
                tail.len()
            )));
        }
        let mut map = HashMap::new();
        let mut pairs = 0u64;
        for (ctx, table) in contexts {
            if ctx.len() != k {
                return Err(Error::domain(format!("context {ctx:?} does not have {k} tokens")));
            }
            if table.entries.is_empty() {
                return Err(Error::domain(format!("context {ctx:?} has no continuations")));
            }
            let ids = ctx.iter().chain(table.entries.iter().map(|(id, _)| id));
            if ids.chain(&head).chain(&tail).any(|&id| id as usize >= vocab_size) {
                return Err(Error::domain(format!("context {ctx:?} uses an id outside the vocabulary")));
            }
            pairs += table.total;
            if map.insert(ctx.clone().into_boxed_slice(), table).is_some() {
                return Err(Error::domain(format!("context {ctx:?} appears twice")));
            }
        }
        let expected = total_tokens.saturating_sub(k as u64);
        if pairs != expected {
            return Err(Error::domain(format!(
                "index stores {pairs} windows, expected {expected} for {total_tokens} tokens"
            )));
        }
        Ok(KGramIndex {
            k,
            contexts: map,
            total_tokens,
            vocab_size,
            head,
            tail,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// First `min(k, total_tokens)` tokens of the stream.
    pub fn head(&self) -> &[u32] {
        &self.head
    }

    /// Last `min(k, total_tokens)` tokens of the stream.
    pub fn tail(&self) -> &[u32] {
        &self.tail
    }

    pub fn distinct_contexts(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    /// Total stored (context, continuation) occurrences; equals
    /// `max(0, total_tokens - k)`.
    pub fn window_count(&self) -> u64 {
        self.contexts.values().map(|t| t.total).sum()
    }

    pub fn get(&self, context: &[u32]) -> Option<&ContinuationTable> {
        self.contexts.get(context)
    }

    /// Unordered iteration over all contexts.
    pub fn iter(&self) -> impl Iterator<Item = (&[u32], &ContinuationTable)> {
        self.contexts.iter().map(|(c, t)| (&**c, t))
    }

    /// Contexts in ascending lexicographic id order.
    pub fn sorted(&self) -> Vec<(&[u32], &ContinuationTable)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_unstable_by(|a, b| a.0.cmp(b.0));
        v
    }

    fn check_arity(&self, context: &[u32]) -> Result<()> {
        if context.len() != self.k {
            return Err(Error::domain(format!(
                "context has {} tokens, index expects {}",
                context.len(),
                self.k
            )));
        }
        Ok(())
    }

    /// The continuation table of a context that must have been observed.
    pub fn lookup(&self, context: &[u32]) -> Result<&ContinuationTable> {
        self.check_arity(context)?;
        self.get(context).ok_or_else(|| Error::missing(context))
    }

    /// Observed continuations sorted by descending count, then ascending id.
    pub fn continuations(&self, context: &[u32]) -> Result<Vec<Continuation>> {
        let table = self.lookup(context)?;
        let mut rows: Vec<Continuation> = table
            .entries
            .iter()
            .map(|&(token, count)| Continuation {
                token,
                count,
                probability: count as f64 / table.total as f64,
            })
            .collect();
        rows.sort_by(|a, b| b.count.cmp(&a.count).then(a.token.cmp(&b.token)));
        Ok(rows)
    }

    /// `count(context, token) / count(context, *)`; zero for a token never
    /// seen after a seen context.
    pub fn mle_prob(&self, context: &[u32], token: u32) -> Result<f64> {
        Ok(self.lookup(context)?.mle(token))
    }

    /// The order-`order` index of the same stream, for `1 <= order <= k`.
    pub fn reduce(&self, order: usize) -> Result<KGramIndex> {
        if order == 0 || order > self.k {
            return Err(Error::domain(format!(
                "cannot reduce an order-{} index to order {order}",
                self.k
            )));
        }
        if order == self.k {
            return Ok(self.clone());
        }
        let drop = self.k - order;
        let mut acc: HashMap<&[u32], BTreeMap<u32, u64>> = HashMap::new();
        for (ctx, table) in self.iter() {
            let slot = acc.entry(&ctx[drop..]).or_default();
            for &(id, c) in &table.entries {
                *slot.entry(id).or_default() += c;
            }
        }
        // windows starting before the first full k-context
        for start in 0..drop {
            if start + order < self.head.len() {
                let ctx = &self.head[start..start + order];
                *acc.entry(ctx).or_default().entry(self.head[start + order]).or_default() += 1;
            }
        }
        let contexts = acc
            .into_iter()
            .map(|(ctx, counts)| {
                let entries: Vec<(u32, u64)> = counts.into_iter().collect();
                let total = entries.iter().map(|&(_, c)| c).sum();
                (Box::from(ctx), ContinuationTable { entries, total })
            })
            .collect();
        let edge = order.min(self.head.len());
        Ok(KGramIndex {
            k: order,
            contexts,
            total_tokens: self.total_tokens,
            vocab_size: self.vocab_size,
            head: self.head[..edge].to_vec(),
            tail: self.tail[self.tail.len() - edge..].to_vec(),
        })
    }

    /// Counts of every token in the stream (the order-0 table).
    pub fn unigram(&self) -> ContinuationTable {
        let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
        for table in self.contexts.values() {
            for &(id, c) in &table.entries {
                *counts.entry(id).or_default() += c;
            }
        }
        for &id in &self.head {
            *counts.entry(id).or_default() += 1;
        }
        let entries: Vec<(u32, u64)> = counts.into_iter().collect();
        ContinuationTable {
            total: entries.iter().map(|&(_, c)| c).sum(),
            entries,
        }
    }
}
