//! Text generation: start from a corpus k-gram, then repeatedly draw the
//! next token from the conditional distribution of the last k tokens and
//! append it.

use rand::Rng;
use rayon::prelude::*;

use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::ngram::KGramIndex;
use crate::rng::seeded_rng;
use crate::smoothing::{Estimator, SmoothingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeedSelection {
    /// A k-gram at a uniformly drawn corpus position.
    #[default]
    CorpusPosition,
    /// A caller-supplied k-gram.
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    pub k: usize,
    /// Number of tokens to generate after the seed.
    pub length: usize,
    pub temperature: f64,
    pub smoothing: SmoothingConfig,
    pub seed_selection: SeedSelection,
    pub rng_seed: u64,
}

impl GenerationConfig {
    pub fn new(k: usize, length: usize) -> Self {
        GenerationConfig {
            k,
            length,
            temperature: 1.0,
            smoothing: SmoothingConfig::None,
            seed_selection: SeedSelection::CorpusPosition,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::domain("k must be at least 1"));
        }
        check_temperature(self.temperature)?;
        self.smoothing.validate(self.k)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationResult {
    pub seed_context: Vec<u32>,
    pub tokens: Vec<u32>,
    /// Set when the walk reached a context with no observed continuation.
    pub terminated_early: bool,
    /// Calls to [`step`], including the one that halted the walk.
    pub steps_taken: usize,
}

impl GenerationResult {
    /// Seed followed by the generated tokens.
    pub fn full_text(&self) -> Vec<u32> {
        let mut v = self.seed_context.clone();
        v.extend_from_slice(&self.tokens);
        v
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("temperature must be positive, got {t}")))
    }
}

/// Draws corpus positions `0..=total_tokens - k` uniformly and returns the
/// k-gram starting there, using only the index.
///
/// A position either starts a counted window (weight = context total) or is
/// the final k-gram of the stream, which the index keeps as its tail.
#[derive(Debug, Clone)]
pub struct SeedSampler {
    contexts: Vec<Vec<u32>>,
    /// Inclusive running totals aligned with `contexts`.
    cumulative: Vec<u64>,
    tail: Vec<u32>,
    positions: u64,
}

impl SeedSampler {
    pub fn new(index: &KGramIndex) -> Result<Self> {
        let k = index.k() as u64;
        let n = index.total_tokens();
        if n < k {
            return Err(Error::InsufficientData {
                needed: index.k(),
                got: n as usize,
            });
        }
        let mut contexts = Vec::with_capacity(index.distinct_contexts());
        let mut cumulative = Vec::with_capacity(index.distinct_contexts());
        let mut acc = 0;
        for (ctx, table) in index.sorted() {
            acc += table.total();
            contexts.push(ctx.to_vec());
            cumulative.push(acc);
        }
        Ok(SeedSampler {
            contexts,
            cumulative,
            tail: index.tail().to_vec(),
            positions: n - k + 1,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u32> {
        let r = rng.random_range(0..self.positions);
        let i = self.cumulative.partition_point(|&c| c <= r);
        match self.contexts.get(i) {
            Some(ctx) => ctx.clone(),
            None => self.tail.clone(),
        }
    }
}

/// A k-gram from a uniformly drawn corpus position.
pub fn pick_seed<R: Rng + ?Sized>(index: &KGramIndex, rng: &mut R) -> Result<Vec<u32>> {
    Ok(SeedSampler::new(index)?.sample(rng))
}

/// Rescales `p_i` to `p_i^(1/T) / sum_j p_j^(1/T)` over the same support.
pub fn apply_temperature(dist: &Distribution, temperature: f64) -> Result<Distribution> {
    check_temperature(temperature)?;
    let max = dist.support().iter().map(|&(_, p)| p).fold(0.0, f64::max);
    if max <= 0.0 {
        return Ok(dist.clone());
    }
    let log_max = max.ln();
    // relative to the maximum so tiny temperatures don't underflow to all zeros
    let weights: Vec<(u32, f64)> = dist
        .support()
        .iter()
        .map(|&(id, p)| {
            let w = if p > 0.0 { ((p.ln() - log_max) / temperature).exp() } else { 0.0 };
            (id, w)
        })
        .collect();
    let total: f64 = weights.iter().map(|&(_, w)| w).sum();
    Ok(Distribution::unchecked(
        weights.into_iter().map(|(id, w)| (id, w / total)),
    ))
}

/// Draws one continuation of `context` at the given temperature.
pub fn step<R: Rng + ?Sized>(estimator: &Estimator<'_>, context: &[u32], temperature: f64, rng: &mut R) -> Result<u32> {
    let dist = estimator.distribution(context)?;
    let dist = if temperature == 1.0 {
        dist
    } else {
        apply_temperature(&dist, temperature)?
    };
    dist.sample(rng)
        .ok_or_else(|| Error::domain("conditional distribution has no positive mass"))
}

/// Reusable generation state over one model: the estimator plus a seed
/// sampler built once.
pub struct Generator<'a> {
    estimator: &'a Estimator<'a>,
    seeds: SeedSampler,
}

impl<'a> Generator<'a> {
    pub fn new(estimator: &'a Estimator<'a>) -> Result<Self> {
        Ok(Generator {
            estimator,
            seeds: SeedSampler::new(estimator.stack().top())?,
        })
    }

    /// Runs one generation. `config.k` and `config.smoothing` must match the
    /// estimator.
    pub fn run<R: Rng + ?Sized>(&self, config: &GenerationConfig, explicit_seed: Option<&[u32]>, rng: &mut R) -> Result<GenerationResult> {
        config.validate()?;
        if config.k != self.estimator.k() {
            return Err(Error::domain(format!(
                "config asks for k = {}, model has k = {}",
                config.k,
                self.estimator.k()
            )));
        }
        if &config.smoothing != self.estimator.config() {
            return Err(Error::domain(format!(
                "config asks for {} smoothing, estimator uses {}",
                config.smoothing,
                self.estimator.config()
            )));
        }
        let seed = match (config.seed_selection, explicit_seed) {
            (SeedSelection::Explicit, Some(seed)) => {
                if seed.len() != config.k {
                    return Err(Error::domain(format!("seed has {} tokens, k is {}", seed.len(), config.k)));
                }
                if let Some(&bad) = seed.iter().find(|&&t| t as usize >= self.estimator.stack().vocab_size()) {
                    return Err(Error::domain(format!("seed token id {bad} is outside the vocabulary")));
                }
                seed.to_vec()
            }
            (SeedSelection::CorpusPosition, None) => self.seeds.sample(rng),
            (SeedSelection::Explicit, None) => {
                return Err(Error::domain("explicit seed selection needs a seed"));
            }
            (SeedSelection::CorpusPosition, Some(_)) => {
                return Err(Error::domain("a seed was supplied but seed selection is corpus_position"));
            }
        };

        let mut window = seed.clone();
        let mut tokens = Vec::with_capacity(config.length);
        let mut terminated_early = false;
        let mut steps_taken = 0;
        while tokens.len() < config.length {
            steps_taken += 1;
            match step(self.estimator, &window, config.temperature, rng) {
                Ok(next) => {
                    tokens.push(next);
                    window.remove(0);
                    window.push(next);
                }
                Err(Error::MissingContext { .. }) => {
                    terminated_early = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(GenerationResult {
            seed_context: seed,
            tokens,
            terminated_early,
            steps_taken,
        })
    }

    /// `runs` independent generations in parallel; run `i` uses the seed
    /// `config.rng_seed + i`.
    pub fn run_batch(&self, config: &GenerationConfig, runs: usize) -> Result<Vec<GenerationResult>> {
        (0..runs)
            .into_par_iter()
            .map(|i| {
                let mut rng = seeded_rng(config.rng_seed.wrapping_add(i as u64));
                self.run(config, None, &mut rng)
            })
            .collect()
    }
}

/// One generation from a fresh [`Generator`].
pub fn generate<R: Rng + ?Sized>(
    estimator: &Estimator<'_>,
    config: &GenerationConfig,
    explicit_seed: Option<&[u32]>,
    rng: &mut R,
) -> Result<GenerationResult> {
    Generator::new(estimator)?.run(config, explicit_seed, rng)
}
