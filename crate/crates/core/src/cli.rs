//! The `dectext` command-line tool.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{read_labels, CliConfig};
use crate::corpus::{dedup, load_agnews, load_stackoverflow, preprocess_corpus, Corpus, StackOverflowSource};
use crate::embed::{embed_hashed, save_embeddings};
use crate::error::{Error, Result};
use crate::metrics::evaluate;
use crate::selftest;
use crate::trainer::{sweep, train, HeadKind, OptimizerKind, SweepAxis};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "dectext", version, about = "Deep embedded clustering of short texts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a raw corpus, normalize and filter it, write JSON lines.
    Preprocess(PreprocessArgs),
    /// Hashed bag-of-words vectors for a corpus, written as EMB1.
    Embed(EmbedArgs),
    /// Train one configuration and write the run result as JSON.
    Train(TrainArgs),
    /// Train every head over a grid of one hyperparameter; write CSV.
    Sweep(SweepArgs),
    /// Score predicted labels against the truth; write JSON.
    Evaluate(EvaluateArgs),
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// CSV rows `class,title,description` with 1-based classes.
    Agnews,
    /// `label<TAB>title` lines with 0-based labels.
    SoTsv,
    /// Title lines plus a `--labels` file of 1-based labels.
    SoPaired,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub format: InputFormat,
    /// Label file for `so-paired`.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub limit: Option<usize>,
    /// Reads `[preprocess]` from this file; flags below switch rules on.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub lowercase: bool,
    #[arg(long)]
    pub strip_punctuation: bool,
    /// Keep only documents mentioning one of these (repeatable).
    #[arg(long = "keyword")]
    pub keywords: Vec<String>,
    #[arg(long)]
    pub min_tokens: Option<usize>,
    #[arg(long)]
    pub keep_duplicates: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 128)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub hash_seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Flags shared by `train` and `sweep`; each overrides the config file.
#[derive(Debug, Args)]
pub struct RunOverrides {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub lr_scale: Option<f64>,
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long, value_parser = parse_optimizer)]
    pub optimizer: Option<OptimizerKind>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunOverrides,
    #[arg(long, value_parser = parse_head)]
    pub head: Option<HeadKind>,
    /// Also write the final labels, one per line.
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunOverrides,
    #[arg(long, value_parser = parse_axis)]
    pub axis: SweepAxis,
    /// Comma-separated; defaults to the standard grid for the axis.
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<f64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_head, default_value = "som,somr,kmeans,kmeansr")]
    pub heads: Vec<HeadKind>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_head(s: &str) -> Result<HeadKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind, String> {
    match s {
        "sgd" => Ok(OptimizerKind::Sgd),
        "adam" => Ok(OptimizerKind::Adam),
        _ => Err(format!("unknown optimizer {s:?}; expected sgd or adam")),
    }
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn load_config(path: Option<&Path>) -> Result<CliConfig> {
    match path {
        Some(p) => CliConfig::load(p),
        None => Ok(CliConfig::default()),
    }
}

fn apply_overrides(cfg: &mut CliConfig, o: &RunOverrides) -> Result<()> {
    let t = &mut cfg.train;
    if let Some(v) = o.seed {
        t.seed = v;
    }
    if let Some(v) = o.epochs {
        t.epochs = v;
    }
    if let Some(v) = o.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = o.tau {
        t.tau = v;
    }
    if let Some(v) = o.lr {
        t.lr = v;
    }
    if let Some(v) = o.lr_scale {
        t.lr_scale = v;
    }
    if let Some(v) = o.clusters {
        t.clusters = v;
    }
    if let Some(v) = o.optimizer {
        t.optimizer = v;
    }
    // data flags relative to the working directory, not the config file
    let cwd = |p: &PathBuf| -> PathBuf {
        if p.is_absolute() {
            p.clone()
        } else {
            std::env::current_dir().map(|d| d.join(p)).unwrap_or_else(|_| p.clone())
        }
    };
    if o.corpus.is_some() || o.embeddings.is_some() {
        cfg.data.corpus = o.corpus.as_ref().map(cwd);
        cfg.data.embeddings = o.embeddings.as_ref().map(cwd);
        cfg.data.labels = None;
        cfg.data.blobs = None;
    }
    if let Some(l) = &o.labels {
        cfg.data.labels = Some(cwd(l));
    }
    Ok(())
}

fn cmd_preprocess(a: &PreprocessArgs) -> Result<String> {
    let mut rules = load_config(a.config.as_deref())?.preprocess;
    rules.lowercase |= a.lowercase;
    rules.strip_punctuation |= a.strip_punctuation;
    rules.relevance_keywords.extend(a.keywords.iter().cloned());
    if let Some(m) = a.min_tokens {
        rules.min_tokens = m;
    }
    let raw = match a.format {
        InputFormat::Agnews => load_agnews(&a.input, a.limit)?,
        InputFormat::SoTsv => load_stackoverflow(StackOverflowSource::Tsv(&a.input), a.limit)?,
        InputFormat::SoPaired => {
            let labels = a
                .labels
                .as_deref()
                .ok_or_else(|| Error::invalid("labels", "so-paired needs --labels"))?;
            load_stackoverflow(
                StackOverflowSource::Paired {
                    titles: &a.input,
                    labels,
                },
                a.limit,
            )?
        }
    };
    let mut clean = preprocess_corpus(&raw, &rules);
    if !a.keep_duplicates {
        clean = dedup(&clean);
    }
    clean.write_jsonl(&a.out)?;
    Ok(format!("kept {} of {} documents\n", clean.len(), raw.len()))
}

fn cmd_embed(a: &EmbedArgs) -> Result<String> {
    let corpus = Corpus::read_jsonl(&a.corpus)?;
    let texts: Vec<&str> = corpus.texts().collect();
    let ids = corpus.documents.iter().map(|d| d.id).collect();
    let set = embed_hashed(&texts, ids, a.dim, a.hash_seed)?;
    save_embeddings(&set, &a.out)?;
    Ok(format!("wrote {} x {} vectors\n", set.n(), set.d()))
}

fn cmd_train(a: &TrainArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut cfg = load_config(a.run.config.as_deref())?;
    apply_overrides(&mut cfg, &a.run)?;
    if let Some(h) = a.head {
        cfg.train.head = h;
    }
    cfg.train.validate()?;
    let input = cfg.load_input()?;
    let result = train(&cfg.train, &input)?;
    if let Some(p) = &a.labels_out {
        fs::write(p, crate::config::write_labels(&result.labels)).map_err(|e| Error::io(p, e))?;
    }
    emit(a.out.as_deref(), &(result.to_json()? + "\n"), stdout)
}

fn cmd_sweep(a: &SweepArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut cfg = load_config(a.run.config.as_deref())?;
    apply_overrides(&mut cfg, &a.run)?;
    let values = if a.values.is_empty() {
        a.axis.default_grid()
    } else {
        a.values.clone()
    };
    let input = cfg.load_input()?;
    let (table, _) = sweep(&cfg.train, &input, a.axis, &values, &a.heads, a.jobs)?;
    emit(a.out.as_deref(), &table.to_csv()?, stdout)
}

fn cmd_evaluate(a: &EvaluateArgs, stdout: &mut dyn Write) -> Result<()> {
    let pred = read_labels(&a.pred)?;
    let truth = read_labels(&a.truth)?;
    if pred.len() != truth.len() {
        return Err(Error::invalid(
            "labels",
            format!("{} predictions but {} truth labels", pred.len(), truth.len()),
        ));
    }
    let report = evaluate(&pred, &truth)?;
    emit(a.out.as_deref(), &(report.to_json()? + "\n"), stdout)
}

fn cmd_selftest(stdout: &mut dyn Write) -> Result<bool> {
    let mut all = true;
    for c in selftest::run_all() {
        all &= c.passed;
        let status = if c.passed { "PASS" } else { "FAIL" };
        writeln!(stdout, "{status} {} ({:.2}s): {}", c.name, c.secs, c.detail)
            .map_err(|e| Error::io("<stdout>", e))?;
    }
    Ok(all)
}

/// Parses `argv` (program name first) and runs the command. Returns the exit
/// status: 0 on success, 1 on runtime errors, 2 on usage errors.
pub fn run_command<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Preprocess(a) => cmd_preprocess(a).and_then(|msg| {
            stderr.write_all(msg.as_bytes()).map_err(|e| Error::io("<stderr>", e))
        }),
        Command::Embed(a) => cmd_embed(a).and_then(|msg| {
            stderr.write_all(msg.as_bytes()).map_err(|e| Error::io("<stderr>", e))
        }),
        Command::Train(a) => cmd_train(a, stdout),
        Command::Sweep(a) => cmd_sweep(a, stdout),
        Command::Evaluate(a) => cmd_evaluate(a, stdout),
        Command::Selftest => match cmd_selftest(stdout) {
            Ok(true) => Ok(()),
            Ok(false) => {
                let _ = writeln!(stderr, "error: selftest failed");
                return EXIT_RUNTIME;
            }
            Err(e) => Err(e),
        },
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_RUNTIME
        }
    }
}
