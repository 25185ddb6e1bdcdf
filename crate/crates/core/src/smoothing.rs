//! Estimators that relax pure maximum likelihood: add-alpha smoothing,
//! linear interpolation across orders, and back-off with absolute
//! discounting.
//!
//! None of the defaults ([`DEFAULT_ALPHA`], uniform lambdas,
//! [`DEFAULT_DISCOUNT`]) are tuned; they are placeholders until fitted
//! values exist for a given corpus.

use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;

use crate::dist::{Distribution, SUM_TOLERANCE};
use crate::error::{Error, Result};
use crate::ngram::{ContinuationTable, KGramIndex};

pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_DISCOUNT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Default)]
pub enum SmoothingConfig {
    /// Plain relative frequencies; unseen contexts have no distribution.
    #[default]
    None,
    AddAlpha { alpha: f64 },
    /// One weight per order, from `k` down to 0.
    Interpolation { lambdas: Vec<f64> },
    Backoff { discount: f64 },
}

impl SmoothingConfig {
    /// Equal weights for orders `k..=0`.
    pub fn uniform_lambdas(k: usize) -> Vec<f64> {
        vec![1.0 / (k + 1) as f64; k + 1]
    }

    pub fn name(&self) -> &'static str {
        match self {
            SmoothingConfig::None => "none",
            SmoothingConfig::AddAlpha { .. } => "add_alpha",
            SmoothingConfig::Interpolation { .. } => "interpolation",
            SmoothingConfig::Backoff { .. } => "backoff",
        }
    }

    /// Checks parameter ranges for a model with context length `k`.
    pub fn validate(&self, k: usize) -> Result<()> {
        match self {
            SmoothingConfig::None => Ok(()),
            SmoothingConfig::AddAlpha { alpha } => check_alpha(*alpha),
            SmoothingConfig::Interpolation { lambdas } => check_lambdas(lambdas, k),
            SmoothingConfig::Backoff { discount } => check_discount(*discount),
        }
    }

    pub fn needs_lower_orders(&self) -> bool {
        matches!(self, SmoothingConfig::Interpolation { .. } | SmoothingConfig::Backoff { .. })
    }

    /// Whether every vocabulary token is guaranteed positive probability
    /// (assuming every token occurs in the training stream).
    pub fn is_positive(&self) -> bool {
        match self {
            SmoothingConfig::None => false,
            SmoothingConfig::AddAlpha { alpha } => *alpha > 0.0,
            SmoothingConfig::Interpolation { lambdas } => lambdas.last().is_some_and(|&l| l > 0.0),
            SmoothingConfig::Backoff { discount } => *discount > 0.0,
        }
    }
}

impl fmt::Display for SmoothingConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SmoothingConfig::None => f.write_str("none"),
            SmoothingConfig::AddAlpha { alpha } => write!(f, "add_alpha(alpha={alpha})"),
            SmoothingConfig::Interpolation { lambdas } => {
                let l: Vec<String> = lambdas.iter().map(f64::to_string).collect();
                write!(f, "interpolation(lambdas={})", l.join(","))
            }
            SmoothingConfig::Backoff { discount } => write!(f, "backoff(discount={discount})"),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha must be a non-negative number, got {alpha}")))
    }
}

fn check_discount(discount: f64) -> Result<()> {
    if (0.0..1.0).contains(&discount) {
        Ok(())
    } else {
        Err(Error::domain(format!("discount must be in [0, 1), got {discount}")))
    }
}

fn check_lambdas(lambdas: &[f64], k: usize) -> Result<()> {
    if lambdas.len() != k + 1 {
        return Err(Error::domain(format!(
            "interpolation needs {} weights (orders {k}..0), got {}",
            k + 1,
            lambdas.len()
        )));
    }
    if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::domain("interpolation weights must be non-negative"));
    }
    let sum: f64 = lambdas.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::domain(format!("interpolation weights sum to {sum}, not 1")));
    }
    Ok(())
}

/// Indices for every order `k, k-1, ..., 1` of one token stream, plus its
/// unigram counts.
///
/// A stack made with [`ModelStack::top_only`] skips the lower orders; it
/// serves unsmoothed and add-alpha estimates only.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelStack {
    /// `indices[0]` has order k, `indices[k-1]` order 1.
    indices: Vec<KGramIndex>,
    unigram: ContinuationTable,
}

impl ModelStack {
    pub fn build(tokens: &[u32], k: usize, vocab_size: usize) -> Result<Self> {
        Self::from_index(KGramIndex::build(tokens, k, vocab_size)?)
    }

    /// Derives all lower orders from a top-order index.
    pub fn from_index(top: KGramIndex) -> Result<Self> {
        let mut indices = Vec::with_capacity(top.k());
        for order in (1..top.k()).rev() {
            indices.push(top.reduce(order)?);
        }
        let unigram = top.unigram();
        indices.insert(0, top);
        Ok(ModelStack { indices, unigram })
    }

    /// Keeps only the top order (and the unigram table).
    pub fn top_only(top: KGramIndex) -> Self {
        let unigram = top.unigram();
        ModelStack {
            indices: vec![top],
            unigram,
        }
    }

    /// Builds only what `smoothing` needs.
    pub fn for_smoothing(top: KGramIndex, smoothing: &SmoothingConfig) -> Result<Self> {
        if smoothing.needs_lower_orders() {
            Self::from_index(top)
        } else {
            Ok(Self::top_only(top))
        }
    }

    pub fn k(&self) -> usize {
        self.top().k()
    }

    pub fn has_lower_orders(&self) -> bool {
        self.indices.len() == self.top().k()
    }

    pub fn vocab_size(&self) -> usize {
        self.top().vocab_size()
    }

    pub fn top(&self) -> &KGramIndex {
        &self.indices[0]
    }

    /// Index of the given order, `1..=k`. Panics for lower orders of a
    /// [`top_only`](Self::top_only) stack.
    pub fn order(&self, order: usize) -> &KGramIndex {
        &self.indices[self.k() - order]
    }

    pub fn unigram(&self) -> &ContinuationTable {
        &self.unigram
    }

    fn table(&self, context: &[u32]) -> Option<&ContinuationTable> {
        if context.is_empty() {
            Some(&self.unigram).filter(|t| t.total() > 0)
        } else {
            self.order(context.len()).get(context)
        }
    }

    fn check_context(&self, context: &[u32]) -> Result<()> {
        if context.len() != self.k() {
            return Err(Error::domain(format!(
                "context has {} tokens, model expects {}",
                context.len(),
                self.k()
            )));
        }
        Ok(())
    }

    fn check_token(&self, token: u32) -> Result<()> {
        if token as usize >= self.vocab_size() {
            return Err(Error::domain(format!(
                "token id {token} is outside a vocabulary of size {}",
                self.vocab_size()
            )));
        }
        Ok(())
    }
}

/// `(count + alpha) / (total + alpha * vocab_size)`. An unseen context has
/// zero counts; with `alpha = 0` that is undefined and reported as missing.
pub fn add_alpha_prob(index: &KGramIndex, context: &[u32], token: u32, alpha: f64, vocab_size: usize) -> Result<f64> {
    check_alpha(alpha)?;
    if context.len() != index.k() {
        return Err(Error::domain(format!(
            "context has {} tokens, index expects {}",
            context.len(),
            index.k()
        )));
    }
    let (count, total) = index
        .get(context)
        .map_or((0, 0), |t| (t.count(token), t.total()));
    let denom = total as f64 + alpha * vocab_size as f64;
    if denom == 0.0 {
        return Err(if total == 0 {
            Error::missing(context)
        } else {
            Error::domain("empty vocabulary")
        });
    }
    Ok((count as f64 + alpha) / denom)
}

/// `sum_i lambdas[k - i] * P_mle(token | last i tokens)` for `i = k..=0`.
/// Orders whose context was never seen contribute nothing.
pub fn interpolated_prob(stack: &ModelStack, lambdas: &[f64], context: &[u32], token: u32) -> Result<f64> {
    stack.check_context(context)?;
    check_lambdas(lambdas, stack.k())?;
    let k = stack.k();
    let mut p = 0.0;
    for (j, &weight) in lambdas.iter().enumerate() {
        let order = k - j;
        if let Some(t) = stack.table(&context[k - order..]) {
            p += weight * t.mle(token);
        }
    }
    Ok(p)
}

/// Back-off with absolute discounting, computed without memoization. See
/// [`Estimator`] for the cached version and the exact recursion.
pub fn backoff_prob(stack: &ModelStack, context: &[u32], token: u32, discount: f64) -> Result<f64> {
    Estimator::new(stack, SmoothingConfig::Backoff { discount })?.prob(context, token)
}

/// A [`ModelStack`] paired with a smoothing method, answering conditional
/// probability queries.
///
/// Back-off recursion for a context `c` of order `i >= 1` and token `w`:
///
/// * `c` unseen: `P(w | c) = P(w | c[1..])`.
/// * `count(c, w) > 0`: `P(w | c) = (count(c, w) - d) / total(c)`.
/// * otherwise `P(w | c) = alpha(c) * P(w | c[1..])` with
///   `alpha(c) = (d * distinct(c) / total(c)) / sum_{v unseen after c} P(v | c[1..])`.
///
/// The order-0 distribution is the unigram relative frequency. When every
/// token of the unigram support already follows `c` there is nowhere to move
/// reserved mass, so that context is left undiscounted.
pub struct Estimator<'a> {
    stack: &'a ModelStack,
    config: SmoothingConfig,
    support_size: usize,
    alphas: Mutex<HashMap<Box<[u32]>, f64>>,
}

impl<'a> Estimator<'a> {
    pub fn new(stack: &'a ModelStack, config: SmoothingConfig) -> Result<Self> {
        config.validate(stack.k())?;
        if config.needs_lower_orders() && !stack.has_lower_orders() {
            return Err(Error::domain(format!(
                "{} smoothing needs every lower-order index",
                config.name()
            )));
        }
        Ok(Estimator {
            stack,
            config,
            support_size: stack.unigram().distinct(),
            alphas: Mutex::new(HashMap::new()),
        })
    }

    pub fn stack(&self) -> &'a ModelStack {
        self.stack
    }

    pub fn config(&self) -> &SmoothingConfig {
        &self.config
    }

    pub fn k(&self) -> usize {
        self.stack.k()
    }

    /// `P(token | context)` under the configured method.
    pub fn prob(&self, context: &[u32], token: u32) -> Result<f64> {
        self.stack.check_context(context)?;
        self.stack.check_token(token)?;
        match &self.config {
            SmoothingConfig::None => self.stack.top().mle_prob(context, token),
            SmoothingConfig::AddAlpha { alpha } => {
                add_alpha_prob(self.stack.top(), context, token, *alpha, self.stack.vocab_size())
            }
            SmoothingConfig::Interpolation { lambdas } => interpolated_prob(self.stack, lambdas, context, token),
            SmoothingConfig::Backoff { discount } => Ok(self.backoff(context, token, *discount)),
        }
    }

    /// The full conditional distribution after `context`. Unsmoothed, the
    /// support is the observed continuations; otherwise the whole
    /// vocabulary.
    pub fn distribution(&self, context: &[u32]) -> Result<Distribution> {
        self.stack.check_context(context)?;
        let v = self.stack.vocab_size();
        let probs: Vec<f64> = match &self.config {
            SmoothingConfig::None => return Ok(self.stack.top().lookup(context)?.distribution()),
            SmoothingConfig::AddAlpha { alpha } => {
                (0..v as u32)
                    .map(|w| add_alpha_prob(self.stack.top(), context, w, *alpha, v))
                    .collect::<Result<_>>()?
            }
            SmoothingConfig::Interpolation { lambdas } => {
                let mut probs = vec![0.0; v];
                for (j, &weight) in lambdas.iter().enumerate() {
                    if let Some(t) = self.stack.table(&context[j..]) {
                        for &(id, c) in t.entries() {
                            probs[id as usize] += weight * c as f64 / t.total() as f64;
                        }
                    }
                }
                probs
            }
            SmoothingConfig::Backoff { discount } => self.backoff_vector(context, *discount),
        };
        Ok(Distribution::unchecked(
            probs.into_iter().enumerate().map(|(i, p)| (i as u32, p)),
        ))
    }

    fn effective_discount(&self, table: &ContinuationTable, discount: f64) -> f64 {
        if table.distinct() < self.support_size {
            discount
        } else {
            0.0
        }
    }

    fn backoff(&self, context: &[u32], token: u32, discount: f64) -> f64 {
        let Some((_, lower)) = context.split_first() else {
            return self.stack.unigram().mle(token);
        };
        let Some(table) = self.stack.table(context) else {
            return self.backoff(lower, token, discount);
        };
        let d = self.effective_discount(table, discount);
        let count = table.count(token);
        if count > 0 {
            return (count as f64 - d) / table.total() as f64;
        }
        if d == 0.0 {
            return 0.0;
        }
        self.alpha(context, table, d) * self.backoff(lower, token, discount)
    }

    fn alpha(&self, context: &[u32], table: &ContinuationTable, d: f64) -> f64 {
        if let Some(&a) = self.alphas.lock().expect("alpha cache poisoned").get(context) {
            return a;
        }
        let lower = &context[1..];
        let seen: f64 = table
            .entries()
            .iter()
            .map(|&(w, _)| self.backoff(lower, w, d))
            .sum();
        let mut unseen = 1.0 - seen;
        if unseen < 1e-6 {
            // too close to 1 - 1 for the complement to be accurate
            unseen = (0..self.stack.vocab_size() as u32)
                .filter(|&w| table.count(w) == 0)
                .map(|w| self.backoff(lower, w, d))
                .sum();
        }
        let reserved = d * table.distinct() as f64 / table.total() as f64;
        let a = reserved / unseen;
        self.alphas
            .lock()
            .expect("alpha cache poisoned")
            .insert(context.into(), a);
        a
    }

    /// Whole-vocabulary back-off distribution, built bottom-up from the
    /// unigram one order at a time.
    fn backoff_vector(&self, context: &[u32], discount: f64) -> Vec<f64> {
        let v = self.stack.vocab_size();
        let uni = self.stack.unigram();
        let mut probs = vec![0.0; v];
        for &(id, c) in uni.entries() {
            probs[id as usize] = c as f64 / uni.total() as f64;
        }
        for start in (0..context.len()).rev() {
            let ctx = &context[start..];
            let Some(table) = self.stack.table(ctx) else { continue };
            let d = self.effective_discount(table, discount);
            let seen_lower: f64 = table.entries().iter().map(|&(w, _)| probs[w as usize]).sum();
            let mut unseen_lower = 1.0 - seen_lower;
            if unseen_lower < 1e-6 {
                unseen_lower = probs.iter().sum::<f64>() - seen_lower;
            }
            let scale = if d == 0.0 {
                0.0
            } else {
                d * table.distinct() as f64 / table.total() as f64 / unseen_lower
            };
            for p in probs.iter_mut() {
                *p *= scale;
            }
            for &(w, c) in table.entries() {
                probs[w as usize] = (c as f64 - d) / table.total() as f64;
            }
        }
        probs
    }
}
