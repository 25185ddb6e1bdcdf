use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use markovlm::corpus::{Normalization, Punctuation, TokenizerMode};
use markovlm::smoothing::{DEFAULT_ALPHA, DEFAULT_DISCOUNT};
use markovlm::{SmoothingConfig, TokenizerConfig};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "markovlm", version, about = "Order-k Markov chain language models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count the (k+1)-grams of a corpus and write a model file.
    Train(TrainArgs),
    /// Sample text from a model.
    Generate(GenerateArgs),
    /// List the observed continuations of one context.
    Inspect(InspectArgs),
    /// Coverage, copying, exhaustion and perplexity for several k.
    Analyze(AnalyzeArgs),
    /// Perplexity of a held-out text under a model.
    Eval(EvalArgs),
    /// Validate a transition table and sample a state sequence from it.
    Chain(ChainArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// UTF-8 text file.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Context length.
    #[arg(short, long)]
    pub k: usize,
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub tokenizer: TokenizerArgs,
    /// Default smoothing stored in the model.
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(short, long)]
    pub model: PathBuf,
    /// Tokens to generate after the seed.
    #[arg(short, long, default_value_t = 100)]
    pub length: usize,
    #[arg(short, long, default_value_t = 1.0)]
    pub temperature: f64,
    /// Starting text of exactly k tokens; drawn from the corpus if absent.
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    /// Overrides the model's stored smoothing.
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(short, long)]
    pub model: PathBuf,
    /// Context words, tokenized like the training corpus.
    #[arg(required = true)]
    pub context: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Tsv,
    Jsonl,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Comma-separated context lengths.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub ks: Vec<usize>,
    /// Generations per k.
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    /// Tokens per generation after the seed.
    #[arg(short, long, default_value_t = 100)]
    pub length: usize,
    #[arg(short, long, default_value_t = 1.0)]
    pub temperature: f64,
    /// Share of the corpus, taken from the end, used for perplexity.
    #[arg(long, default_value_t = markovlm::analyze::DEFAULT_HELDOUT_FRACTION)]
    pub heldout_fraction: f64,
    /// Add-alpha constant used to score the held-out part.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub eval_alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    #[arg(long, value_enum, default_value_t = ReportFormat::Tsv)]
    pub format: ReportFormat,
    #[command(flatten)]
    pub tokenizer: TokenizerArgs,
    /// Smoothing used for generation. Interpolation weights that do not fit
    /// a k are replaced by uniform ones for that k.
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(short, long)]
    pub model: PathBuf,
    #[arg(long)]
    pub heldout: PathBuf,
    /// Overrides the model's stored smoothing.
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    /// Model file of kind chain.
    #[arg(long)]
    pub table: PathBuf,
    /// Starting states, as many as the chain order.
    #[arg(long, num_args = 1..)]
    pub history: Vec<String>,
    /// States to sample after the history.
    #[arg(long, default_value_t = 0)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct TokenizerArgs {
    #[arg(long, default_value_t = TokenizerMode::Word)]
    pub tokenizer: TokenizerMode,
    /// Merges to learn from the corpus in bpe mode.
    #[arg(long)]
    pub bpe_merges: Option<usize>,
    /// Keep letter case instead of lowercasing.
    #[arg(long)]
    pub keep_case: bool,
    #[arg(long, default_value_t = Normalization::Nfc)]
    pub normalization: Normalization,
    #[arg(long, default_value_t = Punctuation::Separate)]
    pub punctuation: Punctuation,
    /// Wrap each non-empty input line in <s> ... </s> tokens.
    #[arg(long)]
    pub line_markers: bool,
}

impl TokenizerArgs {
    pub fn config(&self) -> Result<TokenizerConfig, CliError> {
        if self.bpe_merges.is_some() && self.tokenizer != TokenizerMode::Bpe {
            return Err(CliError::usage("--bpe-merges needs --tokenizer bpe"));
        }
        Ok(TokenizerConfig {
            mode: self.tokenizer,
            lowercase: !self.keep_case,
            normalization: self.normalization,
            punctuation: self.punctuation,
            line_markers: self.line_markers,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum SmoothingKind {
    None,
    AddAlpha,
    Interpolation,
    Backoff,
}

#[derive(Debug, Clone, Args)]
pub struct SmoothingArgs {
    #[arg(long, value_enum)]
    pub smoothing: Option<SmoothingKind>,
    /// Add-alpha constant.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Comma-separated interpolation weights for orders k down to 0.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Back-off absolute discount.
    #[arg(long)]
    pub discount: Option<f64>,
}

impl SmoothingArgs {
    /// The configured smoothing, or `fallback` when `--smoothing` is absent.
    /// Parameters for a method other than the chosen one are rejected.
    pub fn resolve(&self, k: usize, fallback: &SmoothingConfig) -> Result<SmoothingConfig, CliError> {
        let Some(kind) = self.smoothing else {
            if self.alpha.is_some() || self.lambdas.is_some() || self.discount.is_some() {
                return Err(CliError::usage("smoothing parameters need --smoothing"));
            }
            return Ok(fallback.clone());
        };
        let stray = |flag: &str, given: bool| {
            if given {
                Err(CliError::usage(format!("{flag} does not apply to --smoothing {}", kind_name(kind))))
            } else {
                Ok(())
            }
        };
        let config = match kind {
            SmoothingKind::None => {
                stray("--alpha", self.alpha.is_some())?;
                stray("--lambdas", self.lambdas.is_some())?;
                stray("--discount", self.discount.is_some())?;
                SmoothingConfig::None
            }
            SmoothingKind::AddAlpha => {
                stray("--lambdas", self.lambdas.is_some())?;
                stray("--discount", self.discount.is_some())?;
                SmoothingConfig::AddAlpha {
                    alpha: self.alpha.unwrap_or(DEFAULT_ALPHA),
                }
            }
            SmoothingKind::Interpolation => {
                stray("--alpha", self.alpha.is_some())?;
                stray("--discount", self.discount.is_some())?;
                SmoothingConfig::Interpolation {
                    lambdas: self
                        .lambdas
                        .clone()
                        .unwrap_or_else(|| SmoothingConfig::uniform_lambdas(k)),
                }
            }
            SmoothingKind::Backoff => {
                stray("--alpha", self.alpha.is_some())?;
                stray("--lambdas", self.lambdas.is_some())?;
                SmoothingConfig::Backoff {
                    discount: self.discount.unwrap_or(DEFAULT_DISCOUNT),
                }
            }
        };
        config.validate(k).map_err(|e| CliError::usage(e.to_string()))?;
        Ok(config)
    }
}

fn kind_name(kind: SmoothingKind) -> &'static str {
    match kind {
        SmoothingKind::None => "none",
        SmoothingKind::AddAlpha => "add_alpha",
        SmoothingKind::Interpolation => "interpolation",
        SmoothingKind::Backoff => "backoff",
    }
}
