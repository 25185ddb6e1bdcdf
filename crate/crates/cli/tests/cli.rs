use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use markovlm::NgramModel;
use markovlm_cli::format::ratio_4dp;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_markovlm");

fn markovlm(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

struct Dir(TempDir);

impl Dir {
    fn new() -> Self {
        Dir(TempDir::new().unwrap())
    }

    fn file(&self, name: &str, text: &str) -> PathBuf {
        let p = self.0.path().join(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }

    fn train(&self, corpus: &str, k: usize, extra: &[&str]) -> PathBuf {
        let c = self.file("corpus.txt", corpus);
        let m = self.path("model.txt");
        let k = k.to_string();
        let mut args = vec!["train", "--corpus", s(&c), "-k", &k, "-o", s(&m)];
        args.extend_from_slice(extra);
        let o = markovlm(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        m
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_reports_counts() {
    let d = Dir::new();
    let c = d.file("c.txt", "the cat saw the dog .");
    let m = d.path("m.txt");
    let o = markovlm(&["train", "--corpus", s(&c), "-k", "1", "-o", s(&m)]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "total_tokens\t6\nvocab_size\t5\ndistinct_contexts\t4\n");
}

#[test]
fn three_tokens_at_k3_give_empty_contexts() {
    let d = Dir::new();
    let m = d.train("a b c", 3, &[]);
    assert!(fs::read_to_string(m).unwrap().ends_with("contexts 0\n"));
}

#[test]
fn training_twice_gives_identical_files() {
    let d = Dir::new();
    let c = d.file("c.txt", "in the beginning god created the heavens and the earth .");
    let (a, b) = (d.path("a"), d.path("b"));
    for out in [&a, &b] {
        assert_eq!(code(&markovlm(&["train", "--corpus", s(&c), "-k", "2", "-o", s(out)])), 0);
    }
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn train_errors() {
    let d = Dir::new();
    let c = d.path("bad.txt");
    fs::write(&c, [0x61, 0xff, 0x62]).unwrap();
    let m = d.path("m");
    assert_eq!(code(&markovlm(&["train", "--corpus", s(&c), "-k", "1", "-o", s(&m)])), 2);
    assert_eq!(code(&markovlm(&["train", "--corpus", "/nonexistent", "-k", "1", "-o", s(&m)])), 2);
    let good = d.file("g.txt", "a b");
    assert_eq!(code(&markovlm(&["train", "--corpus", s(&good), "-k", "0", "-o", s(&m)])), 1);
    assert_eq!(code(&markovlm(&["train", "--corpus", s(&good), "-k", "1", "-o", s(&m), "--bpe-merges", "3"])), 1);
    assert_eq!(code(&markovlm(&["train"])), 1);
}

#[test]
fn inspect_hand_corpus() {
    let d = Dir::new();
    let m = d.train("a b a c", 1, &[]);
    let o = markovlm(&["inspect", "-m", s(&m), "a"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "b\t1\t0.5000\nc\t1\t0.5000\n");
}

#[test]
fn inspect_sorts_and_rounds() {
    let d = Dir::new();
    // after "x": y 7 times, z 5 times, w once
    let mut text = String::new();
    for next in ["y"; 7].iter().chain(&["z"; 5]).chain(&["w"]) {
        text.push_str("x ");
        text.push_str(next);
        text.push(' ');
    }
    let m = d.train(&text, 1, &[]);
    let o = markovlm(&["inspect", "-m", s(&m), "X"]);
    assert_eq!(stdout(&o), "y\t7\t0.5385\nz\t5\t0.3846\nw\t1\t0.0769\n");
}

#[test]
fn inspect_errors() {
    let d = Dir::new();
    let m = d.train("a b a c", 1, &[]);
    let unseen = markovlm(&["inspect", "-m", s(&m), "c"]);
    assert_eq!(code(&unseen), 3);
    assert_eq!(stdout(&unseen), "");
    assert_eq!(code(&markovlm(&["inspect", "-m", s(&m), "zzz"])), 3);
    assert_eq!(code(&markovlm(&["inspect", "-m", s(&m), "a", "b"])), 1);
    let corrupt = d.file("corrupt", "MARKOVLM v1\nkind=ngram\n");
    assert_eq!(code(&markovlm(&["inspect", "-m", s(&corrupt), "a"])), 2);
}

/// Every context of a model prints the same numbers as the index.
#[test]
fn inspect_agrees_with_index() {
    let d = Dir::new();
    let text = "one fish two fish red fish blue fish . one two three , two three four .";
    let m = d.train(text, 2, &[]);
    let model = NgramModel::parse(&fs::read_to_string(&m).unwrap()).unwrap();
    for (ctx, table) in model.index.iter() {
        let words = model.vocab.decode(ctx).unwrap();
        let mut args = vec!["inspect", "-m", s(&m)];
        args.extend(words.iter().copied());
        let o = markovlm(&args);
        assert_eq!(code(&o), 0, "{words:?}");
        let mut expected: Vec<(u64, String)> = model
            .index
            .continuations(ctx)
            .unwrap()
            .into_iter()
            .map(|c| (c.count, model.vocab.surface(c.token).unwrap().to_owned()))
            .collect();
        expected.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let printed: Vec<String> = stdout(&o).lines().map(str::to_owned).collect();
        let expected: Vec<String> = expected
            .iter()
            .map(|(c, w)| format!("{w}\t{c}\t{}", ratio_4dp(*c, table.total())))
            .collect();
        assert_eq!(printed, expected);
    }
}

#[test]
fn generate_length_zero_prints_seed() {
    let d = Dir::new();
    let m = d.train("a b c d e f", 2, &[]);
    let o = markovlm(&["generate", "-m", s(&m), "--length", "0", "--rng-seed", "5"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).split_whitespace().count(), 2);
    let o = markovlm(&["generate", "-m", s(&m), "--length", "0", "--seed", "c d"]);
    assert_eq!(stdout(&o), "c d\n");
}

#[test]
fn generate_is_reproducible() {
    let d = Dir::new();
    let m = d.train("a b a c a b b c a a b c b a c", 1, &[]);
    let run = |seed: &str| stdout(&markovlm(&["generate", "-m", s(&m), "-l", "30", "--rng-seed", seed]));
    assert_eq!(run("7"), run("7"));
    assert_eq!(run("7").split_whitespace().count(), 31);
    let smoothed = |seed: &str| {
        stdout(&markovlm(&[
            "generate", "-m", s(&m), "-l", "30", "--rng-seed", seed, "--smoothing", "backoff", "-t", "0.5",
        ]))
    };
    assert_eq!(smoothed("1"), smoothed("1"));
}

#[test]
fn generate_reports_early_termination() {
    let d = Dir::new();
    let m = d.train("a b c", 1, &[]);
    let o = markovlm(&["generate", "-m", s(&m), "-l", "10", "--seed", "a"]);
    assert_eq!(code(&o), 4);
    assert_eq!(stdout(&o), "a b c\n");
}

#[test]
fn generate_flag_errors() {
    let d = Dir::new();
    let m = d.train("a b c a b", 2, &[]);
    let g = |extra: &[&str]| {
        let mut args = vec!["generate", "-m", s(&m)];
        args.extend_from_slice(extra);
        code(&markovlm(&args))
    };
    assert_eq!(g(&["--seed", "a"]), 1);
    assert_eq!(g(&["--seed", "a zzz"]), 3);
    assert_eq!(g(&["--temperature", "0"]), 1);
    assert_eq!(g(&["--alpha", "0.5"]), 1);
    assert_eq!(g(&["--smoothing", "interpolation", "--lambdas", "1"]), 1);
    assert_eq!(g(&["--smoothing", "add_alpha", "--alpha", "0.5", "-l", "5"]), 0);
}

#[test]
fn eval_examples() {
    let d = Dir::new();
    let m = d.train("a b c a x b y b z b w", 1, &[]);
    let h = d.file("h.txt", "a b c");
    let o = markovlm(&["eval", "-m", s(&m), "--heldout", s(&h)]);
    assert_eq!((code(&o), stdout(&o)), (0, "2.8284\n".to_owned()));

    let unseen = d.file("u.txt", "a b a");
    let o = markovlm(&["eval", "-m", s(&m), "--heldout", s(&unseen)]);
    assert_eq!((code(&o), stdout(&o)), (3, "undefined (position 2)\n".to_owned()));
    let o = markovlm(&["eval", "-m", s(&m), "--heldout", s(&unseen), "--smoothing", "add_alpha"]);
    assert_eq!(code(&o), 0);

    let m = d.train("x x x x x", 1, &[]);
    let h = d.file("h2.txt", "x x x x x");
    let o = markovlm(&["eval", "-m", s(&m), "--heldout", s(&h)]);
    assert_eq!(stdout(&o), "1.0000\n");
}

#[test]
fn stored_smoothing_is_the_default() {
    let d = Dir::new();
    let m = d.train("a b c a x b y b z b w", 1, &["--smoothing", "add_alpha", "--alpha", "1"]);
    let h = d.file("h.txt", "a b a");
    let o = markovlm(&["eval", "-m", s(&m), "--heldout", s(&h)]);
    assert_eq!(code(&o), 0);
    let o = markovlm(&["eval", "-m", s(&m), "--heldout", s(&h), "--smoothing", "none"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn analyze_tiny_corpus() {
    let d = Dir::new();
    let c = d.file("c.txt", "a b c a b d a b c a c b a d b c");
    let run = |extra: &[&str]| {
        let mut args = vec!["analyze", "--corpus", s(&c), "--rng-seed", "3"];
        args.extend_from_slice(extra);
        markovlm(&args)
    };
    let o = run(&["--ks", "1", "--runs", "1", "--length", "10"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0].split('\t').count(), lines[1].split('\t').count());
    assert!(lines[1].starts_with("1\t1.000000\t"));

    let a = run(&["--ks", "1,2", "--runs", "3"]);
    let b = run(&["--ks", "1,2", "--runs", "3"]);
    assert_eq!(a.stdout, b.stdout);
    let json = stdout(&run(&["--ks", "1,2", "--runs", "2", "--format", "jsonl"]));
    assert_eq!(json.lines().count(), 2);
    assert!(json.starts_with("{\"k\":1,"));
    assert_eq!(code(&run(&["--ks", "0"])), 1);
}

#[test]
fn bpe_models_round_trip_through_commands() {
    let d = Dir::new();
    let m = d.train(
        "the theme then the thesis the theory",
        2,
        &["--tokenizer", "bpe", "--bpe-merges", "6"],
    );
    let text = fs::read_to_string(&m).unwrap();
    // merging stops early once no pair repeats
    let merges: usize = text.split("\nmerges ").nth(1).unwrap().lines().next().unwrap().parse().unwrap();
    assert!((1..=6).contains(&merges), "{merges}");
    let o = markovlm(&["generate", "-m", s(&m), "-l", "5", "--rng-seed", "2"]);
    assert!(matches!(code(&o), 0 | 4));
}

#[test]
fn line_markers_delimit_lines() {
    let d = Dir::new();
    let m = d.train("one two\nthree\n", 1, &["--line-markers"]);
    let o = markovlm(&["inspect", "-m", s(&m), "</s>"]);
    assert_eq!(stdout(&o), "<s>\t1\t1.0000\n");
    assert!(fs::read_to_string(&m).unwrap().contains("\nline_markers=true\n"));
    let m = d.train("one two\nthree\n", 1, &["--line-markers", "--tokenizer", "bpe", "--bpe-merges", "2"]);
    let o = markovlm(&["generate", "-m", s(&m), "-l", "0", "--seed", "</s>"]);
    assert_eq!(stdout(&o), "</s>\n");
}

#[test]
fn chain_command() {
    let table = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/weather_order2.markov");
    let o = markovlm(&["chain", "--table", table]);
    assert_eq!(stdout(&o), "valid: order 2, 3 states, 9 rows\n");
    let o = markovlm(&["chain", "--table", table, "--history", "nublado", "lluvioso", "--steps", "5"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).split_whitespace().count(), 7);
    assert_eq!(code(&markovlm(&["chain", "--table", table, "--history", "nublado", "--steps", "5"])), 1);

    let d = Dir::new();
    let broken = fs::read_to_string(table).unwrap().replace("0:0.7", "0:0.6");
    let p = d.file("broken", &broken);
    assert_eq!(code(&markovlm(&["chain", "--table", s(&p)])), 3);
}
