//! Measurements of how generated text relates to its training corpus:
//! (k+1)-gram coverage, longest verbatim copy, sample-space exhaustion, and
//! held-out perplexity, plus the sweep over k that ties them together.

use std::collections::HashSet;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generate::{GenerationConfig, GenerationResult, Generator, SeedSelection};
use crate::ngram::KGramIndex;
use crate::smoothing::{Estimator, ModelStack, SmoothingConfig};

/// Suffix array over a token-id sequence.
#[derive(Debug, Clone)]
pub struct SuffixIndex<'a> {
    text: &'a [u32],
    sa: Vec<u32>,
}

impl<'a> SuffixIndex<'a> {
    /// Prefix doubling with radix passes: `O(n log L)` where `L` is the
    /// longest repeated substring.
    pub fn new(text: &'a [u32]) -> Self {
        let n = text.len();
        assert!(n < u32::MAX as usize, "corpus too large for 32-bit suffix positions");
        let mut sa: Vec<u32> = (0..n as u32).collect();
        sa.sort_unstable_by_key(|&i| text[i as usize]);
        // ranks start at 1; 0 stands for "past the end"
        let mut rank = vec![0u32; n];
        let mut r = 0;
        for (j, &i) in sa.iter().enumerate() {
            if j == 0 || text[sa[j - 1] as usize] != text[i as usize] {
                r += 1;
            }
            rank[i as usize] = r;
        }
        let mut by_second = vec![0u32; n];
        let mut next_rank = vec![0u32; n];
        let mut counts = vec![0usize; n + 2];
        let mut h = 1;
        while (r as usize) < n {
            // order by rank[i + h], suffixes running off the end first
            let mut w = 0;
            for i in (n.saturating_sub(h))..n {
                by_second[w] = i as u32;
                w += 1;
            }
            for &i in &sa {
                if i as usize >= h {
                    by_second[w] = i - h as u32;
                    w += 1;
                }
            }
            // stable counting sort by rank[i]
            counts.iter_mut().for_each(|c| *c = 0);
            for &i in &rank {
                counts[i as usize + 1] += 1;
            }
            for j in 1..counts.len() {
                counts[j] += counts[j - 1];
            }
            for &i in &by_second {
                let slot = &mut counts[rank[i as usize] as usize];
                sa[*slot] = i;
                *slot += 1;
            }
            let key = |i: u32| {
                let i = i as usize;
                (rank[i], if i + h < n { rank[i + h] } else { 0 })
            };
            r = 0;
            for j in 0..n {
                if j == 0 || key(sa[j - 1]) != key(sa[j]) {
                    r += 1;
                }
                next_rank[sa[j] as usize] = r;
            }
            std::mem::swap(&mut rank, &mut next_rank);
            h *= 2;
        }
        SuffixIndex { text, sa }
    }

    pub fn text(&self) -> &'a [u32] {
        self.text
    }

    pub fn suffixes(&self) -> &[u32] {
        &self.sa
    }

    /// Narrows the suffix range `[lo, hi)` sharing a prefix of length
    /// `depth` to those continuing with `token`.
    fn narrow(&self, lo: usize, hi: usize, depth: usize, token: u32) -> (usize, usize) {
        let at = |j: usize| self.text.get(self.sa[j] as usize + depth).copied();
        let start = lo + partition(lo, hi, |j| at(j) < Some(token));
        let end = lo + partition(lo, hi, |j| at(j) <= Some(token));
        (start, end)
    }

    /// Length of the longest prefix of `pattern` that occurs in the text.
    pub fn longest_prefix_match(&self, pattern: &[u32]) -> usize {
        let (mut lo, mut hi) = (0, self.sa.len());
        for (depth, &t) in pattern.iter().enumerate() {
            let (a, b) = self.narrow(lo, hi, depth, t);
            if a == b {
                return depth;
            }
            (lo, hi) = (a, b);
        }
        pattern.len()
    }

    pub fn contains(&self, pattern: &[u32]) -> bool {
        self.longest_prefix_match(pattern) == pattern.len()
    }

    /// Longest contiguous span of `generated` that also occurs in the text.
    pub fn longest_copy(&self, generated: &[u32]) -> usize {
        let mut best = 0;
        for start in 0..generated.len() {
            if generated.len() - start <= best {
                break;
            }
            best = best.max(self.longest_prefix_match(&generated[start..]));
        }
        best
    }

    /// Share of the length-`(k + 1)` windows of `generated` found in the
    /// text.
    pub fn coverage(&self, generated: &[u32], k: usize) -> Result<f64> {
        let width = k + 1;
        if generated.len() < width {
            return Err(Error::InsufficientData {
                needed: width,
                got: generated.len(),
            });
        }
        let windows = generated.windows(width);
        let total = windows.len();
        let hits = windows.filter(|w| self.contains(w)).count();
        Ok(hits as f64 / total as f64)
    }
}

/// `partition_point` over the index range `[lo, hi)`, returning an offset
/// from `lo`.
fn partition(lo: usize, hi: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut a, mut b) = (lo, hi);
    while a < b {
        let mid = a + (b - a) / 2;
        if pred(mid) {
            a = mid + 1;
        } else {
            b = mid;
        }
    }
    a - lo
}

/// Share of the length-`(k + 1)` windows of `generated` that occur anywhere
/// in `corpus`.
pub fn coverage_check(generated: &[u32], corpus: &[u32], k: usize) -> Result<f64> {
    let width = k + 1;
    if generated.len() < width {
        return Err(Error::InsufficientData {
            needed: width,
            got: generated.len(),
        });
    }
    let seen: HashSet<&[u32]> = corpus.windows(width).collect();
    let windows = generated.windows(width);
    let total = windows.len();
    let hits = windows.filter(|w| seen.contains(w)).count();
    Ok(hits as f64 / total as f64)
}

/// Length of the longest contiguous span shared by `generated` and
/// `corpus`; 0 when they share no token.
pub fn longest_copy(generated: &[u32], corpus: &[u32]) -> usize {
    SuffixIndex::new(corpus).longest_copy(generated)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ExhaustionStats {
    /// Share of contexts followed by exactly one distinct token.
    pub unique_continuation_fraction: f64,
    /// Mean number of distinct continuations per context.
    pub mean_branching: f64,
    pub distinct_contexts: usize,
}

/// All zeros for an empty index.
pub fn exhaustion_stats(index: &KGramIndex) -> ExhaustionStats {
    let contexts = index.distinct_contexts();
    if contexts == 0 {
        return ExhaustionStats::default();
    }
    let (unique, branches) = index.iter().fold((0usize, 0usize), |(u, b), (_, t)| {
        (u + usize::from(t.distinct() == 1), b + t.distinct())
    });
    ExhaustionStats {
        unique_continuation_fraction: unique as f64 / contexts as f64,
        mean_branching: branches as f64 / contexts as f64,
        distinct_contexts: contexts,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Perplexity {
    Defined(f64),
    /// Some position got probability zero.
    Undefined { position: usize },
}

impl Perplexity {
    pub fn value(self) -> Option<f64> {
        match self {
            Perplexity::Defined(v) => Some(v),
            Perplexity::Undefined { .. } => None,
        }
    }
}

/// `exp(-(1/N) sum ln p(w_i | previous k tokens))` over positions
/// `k..heldout.len()`. Positions are indices into `heldout`.
pub fn perplexity(estimator: &Estimator<'_>, heldout: &[u32]) -> Result<Perplexity> {
    let k = estimator.k();
    if heldout.len() <= k {
        return Err(Error::InsufficientData {
            needed: k + 1,
            got: heldout.len(),
        });
    }
    let mut log_sum = 0.0;
    for i in k..heldout.len() {
        let p = match estimator.prob(&heldout[i - k..i], heldout[i]) {
            Ok(p) => p,
            Err(Error::MissingContext { .. }) => 0.0,
            Err(e) => return Err(e),
        };
        if p <= 0.0 {
            return Ok(Perplexity::Undefined { position: i });
        }
        log_sum += p.ln();
    }
    let n = (heldout.len() - k) as f64;
    Ok(Perplexity::Defined((-log_sum / n).exp()))
}

/// Contiguous train / held-out split: the held-out part is the final
/// `fraction` of the stream.
#[derive(Debug, Clone, PartialEq)]
pub struct HeldoutSplit<'a> {
    pub train: &'a [u32],
    pub heldout: &'a [u32],
    pub split_fraction: f64,
}

pub const DEFAULT_HELDOUT_FRACTION: f64 = 0.1;

impl<'a> HeldoutSplit<'a> {
    pub fn new(tokens: &'a [u32], fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::domain(format!("held-out fraction {fraction} is outside [0, 1]")));
        }
        let heldout_len = (tokens.len() as f64 * fraction).floor() as usize;
        let (train, heldout) = tokens.split_at(tokens.len() - heldout_len);
        Ok(HeldoutSplit {
            train,
            heldout,
            split_fraction: fraction,
        })
    }
}

/// Per-generation measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMetrics {
    /// `None` when seed + output is shorter than `k + 1`.
    pub coverage: Option<f64>,
    pub longest_copy: usize,
    /// Length of seed + output.
    pub length: usize,
}

impl RunMetrics {
    /// Measures the seed + output of one generation against the corpus.
    pub fn measure(corpus: &SuffixIndex<'_>, result: &GenerationResult, k: usize) -> Self {
        let text = result.full_text();
        RunMetrics {
            coverage: corpus.coverage(&text, k).ok(),
            longest_copy: corpus.longest_copy(&text),
            length: text.len(),
        }
    }

    /// `longest_copy / length` over seed + output.
    pub fn longest_copy_ratio(&self) -> f64 {
        if self.length == 0 {
            0.0
        } else {
            self.longest_copy as f64 / self.length as f64
        }
    }
}

/// One row of a k sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub k: usize,
    /// Mean over runs; `None` without runs long enough to measure.
    pub coverage_fraction: Option<f64>,
    /// Mean over runs; `None` without runs.
    pub longest_copy_ratio: Option<f64>,
    pub unique_continuation_fraction: f64,
    pub mean_branching: f64,
    pub distinct_contexts: usize,
    /// `None` when some held-out token got probability zero.
    pub perplexity: Option<f64>,
    pub runs: usize,
}

impl AnalysisReport {
    pub const COLUMNS: [&'static str; 8] = [
        "k",
        "coverage_fraction",
        "longest_copy_ratio",
        "unique_continuation_fraction",
        "mean_branching",
        "distinct_contexts",
        "perplexity",
        "runs",
    ];

    pub fn tsv_row(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map_or_else(|| "NA".to_owned(), |v| format!("{v:.6}"))
        }
        [
            self.k.to_string(),
            opt(self.coverage_fraction),
            opt(self.longest_copy_ratio),
            format!("{:.6}", self.unique_continuation_fraction),
            format!("{:.6}", self.mean_branching),
            self.distinct_contexts.to_string(),
            opt(self.perplexity),
            self.runs.to_string(),
        ]
        .join("\t")
    }
}

/// Header row plus one row per report.
pub fn write_tsv<W: Write>(mut out: W, reports: &[AnalysisReport]) -> io::Result<()> {
    writeln!(out, "{}", AnalysisReport::COLUMNS.join("\t"))?;
    for r in reports {
        writeln!(out, "{}", r.tsv_row())?;
    }
    Ok(())
}

/// One JSON object per line.
pub fn write_jsonl<W: Write>(mut out: W, reports: &[AnalysisReport]) -> io::Result<()> {
    for r in reports {
        serde_json::to_writer(&mut out, r)?;
        writeln!(out)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub ks: Vec<usize>,
    pub runs: usize,
    /// Tokens generated per run, after the seed.
    pub length: usize,
    pub temperature: f64,
    /// Smoothing used for generation.
    pub smoothing: SmoothingConfig,
    /// Smoothing used to score the held-out split.
    pub eval_smoothing: SmoothingConfig,
    pub heldout_fraction: f64,
    pub rng_seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            ks: vec![1, 2, 3],
            runs: 10,
            length: 100,
            temperature: 1.0,
            smoothing: SmoothingConfig::None,
            eval_smoothing: SmoothingConfig::AddAlpha {
                alpha: crate::smoothing::DEFAULT_ALPHA,
            },
            heldout_fraction: DEFAULT_HELDOUT_FRACTION,
            rng_seed: 0,
        }
    }
}

impl SweepConfig {
    /// Generation settings for one `k`, with smoothing adapted to `k`
    /// when uniform interpolation weights are wanted.
    pub fn generation(&self, k: usize) -> GenerationConfig {
        GenerationConfig {
            k,
            length: self.length,
            temperature: self.temperature,
            smoothing: adapt_to_k(&self.smoothing, k),
            seed_selection: SeedSelection::CorpusPosition,
            rng_seed: self.rng_seed,
        }
    }
}

/// Interpolation weights only make sense for one k; a sweep re-derives
/// uniform weights per k when the configured ones do not fit.
fn adapt_to_k(smoothing: &SmoothingConfig, k: usize) -> SmoothingConfig {
    match smoothing {
        SmoothingConfig::Interpolation { lambdas } if lambdas.len() != k + 1 => SmoothingConfig::Interpolation {
            lambdas: SmoothingConfig::uniform_lambdas(k),
        },
        other => other.clone(),
    }
}

/// Generates `runs` texts and measures them against the corpus.
pub fn measure_runs(
    estimator: &Estimator<'_>,
    corpus: &SuffixIndex<'_>,
    config: &GenerationConfig,
    runs: usize,
) -> Result<Vec<RunMetrics>> {
    let generator = Generator::new(estimator)?;
    let results = generator.run_batch(config, runs)?;
    Ok(results
        .par_iter()
        .map(|r| RunMetrics::measure(corpus, r, config.k))
        .collect())
}

/// For each k: index the corpus, run the generations, and aggregate
/// coverage, copy ratio, exhaustion and held-out perplexity. A failure for
/// one k does not stop the others.
pub fn k_sweep(corpus: &[u32], vocab_size: usize, config: &SweepConfig) -> Result<Vec<Result<AnalysisReport>>> {
    if config.ks.is_empty() {
        return Err(Error::domain("k sweep needs at least one k"));
    }
    let suffixes = SuffixIndex::new(corpus);
    let split = HeldoutSplit::new(corpus, config.heldout_fraction)?;
    Ok(config
        .ks
        .iter()
        .map(|&k| sweep_one(corpus, vocab_size, &suffixes, &split, config, k))
        .collect())
}

fn sweep_one(
    corpus: &[u32],
    vocab_size: usize,
    suffixes: &SuffixIndex<'_>,
    split: &HeldoutSplit<'_>,
    config: &SweepConfig,
    k: usize,
) -> Result<AnalysisReport> {
    let gen_config = config.generation(k);
    gen_config.validate()?;
    let index = KGramIndex::build(corpus, k, vocab_size)?;
    let exhaustion = exhaustion_stats(&index);

    let (coverage_fraction, longest_copy_ratio) = if config.runs == 0 {
        (None, None)
    } else {
        let stack = ModelStack::for_smoothing(index, &gen_config.smoothing)?;
        let estimator = Estimator::new(&stack, gen_config.smoothing.clone())?;
        let metrics = measure_runs(&estimator, suffixes, &gen_config, config.runs)?;
        let covered: Vec<f64> = metrics.iter().filter_map(|m| m.coverage).collect();
        let coverage = (!covered.is_empty()).then(|| covered.iter().sum::<f64>() / covered.len() as f64);
        let ratio = metrics.iter().map(RunMetrics::longest_copy_ratio).sum::<f64>() / metrics.len() as f64;
        (coverage, Some(ratio))
    };

    let eval = adapt_to_k(&config.eval_smoothing, k);
    let perplexity = if split.heldout.len() > k && !split.train.is_empty() {
        let train = KGramIndex::build(split.train, k, vocab_size)?;
        let stack = ModelStack::for_smoothing(train, &eval)?;
        let estimator = Estimator::new(&stack, eval)?;
        perplexity(&estimator, split.heldout)?.value()
    } else {
        None
    };

    Ok(AnalysisReport {
        k,
        coverage_fraction,
        longest_copy_ratio,
        unique_continuation_fraction: exhaustion.unique_continuation_fraction,
        mean_branching: exhaustion.mean_branching,
        distinct_contexts: exhaustion.distinct_contexts,
        perplexity,
        runs: config.runs,
    })
}
