use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use markovlm::analyze::{self, k_sweep, write_jsonl, write_tsv, Perplexity, SweepConfig};
use markovlm::corpus::{self, tokenize_words, train_bpe, BpeMergeTable, TokenizerMode};
use markovlm::generate::{generate as run_generation, SeedSelection};
use markovlm::model_file::{self, NgramModel};
use markovlm::rng::seeded_rng;
use markovlm::{Estimator, GenerationConfig, ModelStack, SmoothingConfig, TokenizerConfig, Vocabulary};

use crate::args::{AnalyzeArgs, ChainArgs, EvalArgs, GenerateArgs, InspectArgs, ReportFormat, TrainArgs};
use crate::error::{exit, CliError};
use crate::format::ratio_4dp;

pub type CmdResult = Result<u8, CliError>;

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<NgramModel, CliError> {
    Ok(NgramModel::parse(&read_text(path)?)?)
}

pub fn save_model(model: &NgramModel, path: &Path) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    model
        .write_to(&mut out)
        .and_then(|()| out.flush())
        .map_err(|e| CliError::io(path, e))
}

/// Learns merges from the corpus when the tokenizer is in bpe mode.
fn merges_for(text: &[u8], cfg: &TokenizerConfig, num_merges: Option<usize>) -> Result<Option<BpeMergeTable>, CliError> {
    Ok(match cfg.mode {
        TokenizerMode::Word => None,
        TokenizerMode::Bpe => {
            let mut words = tokenize_words(text, cfg)?;
            words.retain(|w| !corpus::is_marker(w));
            Some(train_bpe(&words, num_merges.unwrap_or(0)))
        }
    })
}

fn check_k(k: usize) -> Result<(), CliError> {
    if k == 0 {
        return Err(CliError::usage("k must be at least 1"));
    }
    Ok(())
}

fn model_tokens(model: &NgramModel, text: &str) -> Result<Vec<String>, CliError> {
    Ok(corpus::tokenize(text.as_bytes(), &model.tokenizer, model.merges.as_ref())?)
}

/// Tokens of a short query such as an inspect context or a seed: written
/// markers are taken literally and no markers are added.
fn query_tokens(model: &NgramModel, text: &str) -> Result<Vec<String>, CliError> {
    let cfg = TokenizerConfig {
        line_markers: false,
        ..model.tokenizer
    };
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        if model.tokenizer.line_markers && corpus::is_marker(word) {
            out.push(word.to_owned());
        } else {
            out.extend(corpus::tokenize(word.as_bytes(), &cfg, model.merges.as_ref())?);
        }
    }
    Ok(out)
}

pub fn train(args: &TrainArgs, out: &mut dyn Write) -> CmdResult {
    check_k(args.k)?;
    let cfg = args.tokenizer.config()?;
    let smoothing = args.smoothing.resolve(args.k, &SmoothingConfig::None)?;
    let text = read_bytes(&args.corpus)?;
    let merges = merges_for(&text, &cfg, args.tokenizer.bpe_merges)?;
    let model = NgramModel::train(&text, args.k, cfg, smoothing, merges)?;
    save_model(&model, &args.output)?;
    writeln!(out, "total_tokens\t{}", model.index.total_tokens())?;
    writeln!(out, "vocab_size\t{}", model.vocab.len())?;
    writeln!(out, "distinct_contexts\t{}", model.index.distinct_contexts())?;
    Ok(exit::SUCCESS)
}

pub fn generate(args: &GenerateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let model = load_model(&args.model)?;
    let k = model.index.k();
    let smoothing = args.smoothing.resolve(k, &model.smoothing)?;
    let seed = match &args.seed {
        None => None,
        Some(text) => {
            let tokens = query_tokens(&model, text)?;
            if tokens.len() != k {
                return Err(CliError::usage(format!("--seed has {} tokens, the model needs k = {k}", tokens.len())));
            }
            let ids = tokens
                .iter()
                .map(|t| {
                    model
                        .vocab
                        .id(t)
                        .ok_or_else(|| CliError::Data(format!("seed token {t:?} is not in the model vocabulary")))
                })
                .collect::<Result<Vec<u32>, _>>()?;
            Some(ids)
        }
    };
    let config = GenerationConfig {
        k,
        length: args.length,
        temperature: args.temperature,
        smoothing: smoothing.clone(),
        seed_selection: if seed.is_some() {
            SeedSelection::Explicit
        } else {
            SeedSelection::CorpusPosition
        },
        rng_seed: args.rng_seed,
    };
    config.validate().map_err(|e| CliError::usage(e.to_string()))?;

    let NgramModel { vocab, index, .. } = model;
    let stack = ModelStack::for_smoothing(index, &smoothing)?;
    let estimator = Estimator::new(&stack, smoothing)?;
    let mut rng = seeded_rng(args.rng_seed);
    let result = run_generation(&estimator, &config, seed.as_deref(), &mut rng)?;
    writeln!(out, "{}", vocab.decode(&result.full_text())?.join(" "))?;
    if result.terminated_early {
        writeln!(
            err,
            "stopped after {} of {} tokens: the last context was never observed",
            result.tokens.len(),
            args.length
        )?;
        return Ok(exit::EARLY_TERMINATION);
    }
    Ok(exit::SUCCESS)
}

/// Continuation rows `(surface, count)` sorted by count descending, then
/// surface.
pub fn continuation_rows<'v>(vocab: &'v Vocabulary, entries: &[(u32, u64)]) -> Vec<(&'v str, u64)> {
    let mut rows: Vec<(&str, u64)> = entries
        .iter()
        .map(|&(id, count)| (vocab.surface(id).expect("index ids are in the vocabulary"), count))
        .collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    rows
}

pub fn inspect(args: &InspectArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let model = load_model(&args.model)?;
    let k = model.index.k();
    let tokens = query_tokens(&model, &args.context.join(" "))?;
    if tokens.len() != k {
        return Err(CliError::usage(format!("context has {} tokens, the model needs k = {k}", tokens.len())));
    }
    let ids: Option<Vec<u32>> = tokens.iter().map(|t| model.vocab.id(t)).collect();
    let Some(table) = ids.and_then(|ids| model.index.get(&ids)) else {
        writeln!(err, "context \"{}\" was never observed", tokens.join(" "))?;
        return Ok(exit::DATA);
    };
    for (surface, count) in continuation_rows(&model.vocab, table.entries()) {
        writeln!(out, "{surface}\t{count}\t{}", ratio_4dp(count, table.total()))?;
    }
    Ok(exit::SUCCESS)
}

pub fn analyze(args: &AnalyzeArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    for &k in &args.ks {
        check_k(k)?;
    }
    let cfg = args.tokenizer.config()?;
    let max_k = args.ks.iter().copied().max().unwrap_or(1);
    // explicit lambdas are checked against the k they fit
    let check_k = args
        .smoothing
        .lambdas
        .as_ref()
        .map(|l| l.len().saturating_sub(1))
        .filter(|k| args.ks.contains(k))
        .unwrap_or(max_k);
    let smoothing = args.smoothing.resolve(check_k, &SmoothingConfig::None)?;
    let eval_smoothing = SmoothingConfig::AddAlpha { alpha: args.eval_alpha };
    eval_smoothing.validate(1).map_err(|e| CliError::usage(e.to_string()))?;

    let text = read_bytes(&args.corpus)?;
    let merges = merges_for(&text, &cfg, args.tokenizer.bpe_merges)?;
    let tokens = corpus::tokenize(&text, &cfg, merges.as_ref())?;
    let vocab = Vocabulary::build(&tokens);
    let ids = vocab.encode(&tokens)?;
    let sweep = SweepConfig {
        ks: args.ks.clone(),
        runs: args.runs,
        length: args.length,
        temperature: args.temperature,
        smoothing,
        eval_smoothing,
        heldout_fraction: args.heldout_fraction,
        rng_seed: args.rng_seed,
    };
    let results = k_sweep(&ids, vocab.len(), &sweep).map_err(|e| match e {
        markovlm::Error::Domain(m) => CliError::Usage(m),
        other => other.into(),
    })?;

    let mut reports = Vec::new();
    let mut status = exit::SUCCESS;
    for (k, result) in args.ks.iter().zip(results) {
        match result {
            Ok(r) => reports.push(r),
            Err(e) => {
                writeln!(err, "k = {k}: {e}")?;
                if status == exit::SUCCESS {
                    status = CliError::from(e).exit_code();
                }
            }
        }
    }
    match args.format {
        ReportFormat::Tsv => write_tsv(&mut *out, &reports)?,
        ReportFormat::Jsonl => write_jsonl(&mut *out, &reports)?,
    }
    Ok(status)
}

pub fn eval(args: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let model = load_model(&args.model)?;
    let k = model.index.k();
    let smoothing = args.smoothing.resolve(k, &model.smoothing)?;
    let text = read_text(&args.heldout)?;
    let tokens = model_tokens(&model, &text)?;

    let mut ids = Vec::with_capacity(tokens.len());
    for (position, t) in tokens.iter().enumerate() {
        match model.vocab.id(t) {
            Some(id) => ids.push(id),
            None => {
                writeln!(out, "undefined (position {position})")?;
                writeln!(err, "token {t:?} at position {position} is not in the model vocabulary")?;
                return Ok(exit::DATA);
            }
        }
    }

    let NgramModel { index, .. } = model;
    let stack = ModelStack::for_smoothing(index, &smoothing)?;
    let estimator = Estimator::new(&stack, smoothing)?;
    match analyze::perplexity(&estimator, &ids)? {
        Perplexity::Defined(v) => {
            writeln!(out, "{v:.4}")?;
            Ok(exit::SUCCESS)
        }
        Perplexity::Undefined { position } => {
            writeln!(out, "undefined (position {position})")?;
            writeln!(err, "token at position {position} has probability zero")?;
            Ok(exit::DATA)
        }
    }
}

pub fn chain(args: &ChainArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let table = model_file::parse_chain(&read_text(&args.table)?)?;
    if let Err(violations) = table.validate() {
        for v in violations {
            writeln!(err, "{v}")?;
        }
        return Err(CliError::Data("transition table is not row-stochastic".into()));
    }
    if args.history.is_empty() && args.steps == 0 {
        writeln!(
            out,
            "valid: order {}, {} states, {} rows",
            table.order(),
            table.states().len(),
            table.len()
        )?;
        return Ok(exit::SUCCESS);
    }
    if args.history.len() != table.order() {
        return Err(CliError::usage(format!(
            "--history needs {} states, got {}",
            table.order(),
            args.history.len()
        )));
    }
    let names: Vec<&str> = args.history.iter().map(String::as_str).collect();
    let history = table.ids(&names).map_err(|e| CliError::usage(e.to_string()))?;
    let mut rng = seeded_rng(args.rng_seed);
    let path = table.sample_sequence(&history, args.steps, &mut rng)?;
    let mut all = history;
    all.extend(path);
    writeln!(out, "{}", table.names(&all)?.join(" "))?;
    Ok(exit::SUCCESS)
}
