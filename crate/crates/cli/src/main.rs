//! `nonsym`: command-line driver for the tokenization-free pipeline.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for data errors.

mod config;
mod manifest;

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use log::info;
use rustc_hash::FxHashMap;
use nonsym::corpus::{generate_permutation, load_corpus, whitespace_mode, Permutation};
use nonsym::eval::{
    build_denoising_set, eval_denoising, eval_typing, load_typing_dataset, train_typing, tune_thresholds, EvalReport,
    Split,
};
use nonsym::represent::{
    context_repr, knn_ngrams, matrix_to_csv, neighbors_to_csv, pairwise_cosine_report, NgramFilter, Query, ReprKind,
};
use nonsym::segmenter::{count_distinct_ngrams, counts_to_csv, CountMode, RandomSegments, SegmentSource, SegmentStream};
use nonsym::synth::{synth_text, SynthConfig};
use nonsym::trainer::{load_embeddings, save_embeddings, train_sgns};
use nonsym::transducer::{char_frequencies, learn_tau_with_frequencies, RuleSet, TransducedSegments};
use nonsym::{Corpus, NgramEmbeddings};

use crate::config::PipelineConfig;

const SEED_ENV: &str = "NONSYM_SEED";

#[derive(Parser, Debug)]
#[command(name = "nonsym", version, about = "Tokenization-free ngram embeddings: segment, train, transduce, evaluate")]
struct Cli {
    /// Global seed for all randomness. Falls back to the config file, then $NONSYM_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `key = value` configuration file; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Character that replaces whitespace runs.
    #[arg(long, global = true)]
    marker: Option<char>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Collapse whitespace runs into the marker.
    Normalize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Rename the corpus alphabet by a random (or given) permutation.
    Permute {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Reuse this permutation instead of drawing one.
        #[arg(long, value_name = "FILE")]
        perm: Option<PathBuf>,
        /// Where to write the permutation ("from<TAB>to" lines).
        #[arg(long, value_name = "FILE")]
        perm_out: Option<PathBuf>,
        /// original: the marker stays put; substitute: the marker is permuted too.
        #[arg(long)]
        whitespace_mode: Option<String>,
    },
    /// Multiple random segmentation; one pass per output line.
    Segment {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        seg: SegArgs,
    },
    /// Distinct ngram counts over corpus prefixes.
    CountNgrams {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        kmin: usize,
        #[arg(long, default_value_t = 10)]
        kmax: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Both)]
        mode: ModeArg,
        /// Prefix sizes in characters (comma separated); whole corpus if absent.
        #[arg(long, value_delimiter = ',')]
        prefixes: Vec<usize>,
    },
    /// Skip-gram training on random segments (or a segment file).
    #[command(group(ArgGroup::new("data").required(true).args(["corpus", "segments"])))]
    Train {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        segments: Option<PathBuf>,
        /// Rewrite segments with this rule set before training.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        seg: SegArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Mine the transduction from embeddings.
    LearnTau {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Take canonical-member frequencies from this corpus instead of the vocabulary.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        n_o: Option<usize>,
        #[arg(long)]
        min_support: Option<usize>,
        #[arg(long)]
        max_iterations: Option<usize>,
    },
    /// Rewrite ngrams, a segment file or a corpus's random segments with a rule set.
    #[command(group(ArgGroup::new("data").required(true).args(["ngram", "segments", "corpus"])))]
    ApplyTau {
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        ngram: Vec<String>,
        #[arg(long)]
        segments: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        seg: SegArgs,
    },
    /// Bag or position representation of a text span.
    #[command(group(ArgGroup::new("data").required(true).args(["text", "input"])))]
    EmbedContext {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        text: Option<String>,
        #[arg(long)]
        input: Option<PathBuf>,
        /// Inclusive character range `lo:hi`; the whole text if absent.
        #[arg(long, value_parser = parse_range)]
        range: Option<(usize, usize)>,
        #[arg(long, value_enum, default_value_t = ReprArg::Positional)]
        repr: ReprArg,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        ngram: NgramArgs,
    },
    /// Nearest ngrams of a query ngram.
    Knn {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(short, long, default_value_t = 10)]
        k: usize,
        /// Only ngrams of this length.
        #[arg(long)]
        length: Option<usize>,
        /// Only ngrams made of letters and digits.
        #[arg(long)]
        alphanumeric: bool,
        /// Require a delimiter at one of these 1-based positions.
        #[arg(long, value_delimiter = ',')]
        delimiter_position: Vec<usize>,
        /// Delimiter characters; defaults to the marker plus ASCII punctuation.
        #[arg(long)]
        delimiters: Option<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Denoising MRR of bag and/or position representations.
    EvalDenoise {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, value_enum, default_value_t = ReprChoice::Both)]
        repr: ReprChoice,
        /// Noise range `lo:hi`, also the positional span.
        #[arg(long, value_parser = parse_range)]
        range: Option<(usize, usize)>,
        #[arg(long)]
        rules: Option<PathBuf>,
        /// JSON report; CSV summaries are written alongside.
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        denoise: DenoiseArgs,
        #[command(flatten)]
        ngram: NgramArgs,
    },
    /// Entity typing: train on train, tune thresholds on dev, report on test.
    EvalTyping {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        typing_epochs: Option<usize>,
        #[arg(long)]
        eta0: Option<f64>,
        /// Use raw summed vectors instead of unit-length features.
        #[arg(long)]
        no_normalize: bool,
        #[command(flatten)]
        ngram: NgramArgs,
    },
    /// Pairwise cosine matrix of the given ngrams.
    Report {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        ngrams: Vec<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Deterministic synthetic English-like text.
    Synth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 1 << 20)]
        bytes: usize,
        #[arg(long, default_value_t = 20_000)]
        vocab: usize,
    },
}

#[derive(Args, Debug)]
struct SegArgs {
    /// Number of segmentation passes.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    kmin: Option<usize>,
    #[arg(long)]
    kmax: Option<usize>,
}

#[derive(Args, Debug)]
struct NgramArgs {
    #[arg(long)]
    kmin: Option<usize>,
    #[arg(long)]
    kmax: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f32>,
    #[arg(long)]
    min_count: Option<u64>,
    #[arg(long)]
    subsample: Option<f64>,
}

#[derive(Args, Debug)]
struct DenoiseArgs {
    #[arg(long)]
    context_len: Option<usize>,
    #[arg(long)]
    n_contexts: Option<usize>,
    #[arg(long)]
    n_queries: Option<usize>,
    #[arg(long)]
    p_space: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Symbolic,
    Nonsymbolic,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReprArg {
    Bag,
    Positional,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReprChoice {
    Bag,
    Positional,
    Both,
}

impl From<ReprArg> for ReprKind {
    fn from(r: ReprArg) -> Self {
        match r {
            ReprArg::Bag => ReprKind::Bag,
            ReprArg::Positional => ReprKind::Positional,
        }
    }
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected lo:hi")?;
    let lo: usize = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: usize = hi.trim().parse().map_err(|e| format!("{e}"))?;
    if lo > hi {
        return Err(format!("empty range {lo}:{hi}"));
    }
    Ok((lo, hi))
}

/// Bad flags or configuration; exits with 1.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(e: impl fmt::Display) -> anyhow::Error {
    UsageError(e.to_string()).into()
}

fn is_usage(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        e.downcast_ref::<UsageError>().is_some() || matches!(e.downcast_ref::<nonsym::Error>(), Some(nonsym::Error::Config(_)))
    })
}

fn one_line(s: &str) -> String {
    s.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with("Usage:") && !l.starts_with("For more information"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprintln!("nonsym: {}", one_line(&e.to_string()).trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nonsym: {}", one_line(&format!("{e:#}")));
            ExitCode::from(if is_usage(&e) { 1 } else { 2 })
        }
    }
}

fn build_config(cli: &Cli) -> anyhow::Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    if let Ok(v) = std::env::var(SEED_ENV) {
        cfg.set("seed", &v).map_err(|e| usage(format!("{SEED_ENV}: {e:#}")))?;
    }
    if let Some(path) = &cli.config {
        if !path.exists() {
            return Err(usage(format!("config file {} not found", path.display())));
        }
        cfg.apply_file(path).map_err(|e| usage(format!("{e:#}")))?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w.max(1);
    }
    if let Some(m) = cli.marker {
        if m.is_whitespace() {
            return Err(usage("marker must not be whitespace"));
        }
        cfg.marker = m;
    }
    Ok(cfg)
}

/// Apply `Some` flag values on top of the configuration.
fn overlay<T: ToString>(cfg: &mut PipelineConfig, pairs: &[(&str, Option<T>)]) -> anyhow::Result<()> {
    for (k, v) in pairs {
        if let Some(v) = v {
            cfg.set(k, &v.to_string()).map_err(|e| usage(format!("{e:#}")))?;
        }
    }
    Ok(())
}

impl SegArgs {
    fn apply(&self, cfg: &mut PipelineConfig) -> anyhow::Result<()> {
        overlay(cfg, &[("m", self.m), ("kmin", self.kmin), ("kmax", self.kmax)])
    }
}

impl NgramArgs {
    fn apply(&self, cfg: &mut PipelineConfig) -> anyhow::Result<()> {
        overlay(cfg, &[("kmin", self.kmin), ("kmax", self.kmax)])
    }
}

impl TrainArgs {
    fn apply(&self, cfg: &mut PipelineConfig) -> anyhow::Result<()> {
        overlay(
            cfg,
            &[
                ("dim", self.dim.map(|v| v.to_string())),
                ("window", self.window.map(|v| v.to_string())),
                ("negatives", self.negatives.map(|v| v.to_string())),
                ("epochs", self.epochs.map(|v| v.to_string())),
                ("lr", self.lr.map(|v| v.to_string())),
                ("min_count", self.min_count.map(|v| v.to_string())),
                ("subsample", self.subsample.map(|v| v.to_string())),
            ],
        )
    }
}

impl DenoiseArgs {
    fn apply(&self, cfg: &mut PipelineConfig) -> anyhow::Result<()> {
        overlay(
            cfg,
            &[
                ("context_len", self.context_len.map(|v| v.to_string())),
                ("n_contexts", self.n_contexts.map(|v| v.to_string())),
                ("n_queries", self.n_queries.map(|v| v.to_string())),
                ("p_space", self.p_space.map(|v| v.to_string())),
            ],
        )
    }
}

fn read_corpus(path: &Path, cfg: &PipelineConfig) -> anyhow::Result<Corpus> {
    Ok(load_corpus(path, cfg.marker)?)
}

fn read_embeddings(path: &Path) -> anyhow::Result<NgramEmbeddings> {
    Ok(load_embeddings(path)?)
}

fn read_rules(path: &Path) -> anyhow::Result<RuleSet> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.parse::<RuleSet>().with_context(|| format!("parsing rules {}", path.display()))
}

fn read_segments(path: &Path) -> anyhow::Result<SegmentStream> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.parse::<SegmentStream>()
        .with_context(|| format!("parsing segments {}", path.display()))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// To `path` if given, else stdout.
fn emit(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => write_text(p, text),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn write_stream(source: &dyn SegmentSource, out: &mut impl Write) -> anyhow::Result<()> {
    let mut result = Ok(());
    for pass in 0..source.num_passes() {
        let mut first = true;
        source.for_each_in_pass(pass, &mut |seg| {
            if result.is_err() {
                return;
            }
            let sep: &[u8] = if first { b"" } else { b" " };
            first = false;
            result = out.write_all(sep).and_then(|_| out.write_all(seg.as_bytes()));
        });
        result = result.and_then(|_| out.write_all(b"\n"));
    }
    result?;
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = build_config(&cli)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build_global()
        .ok();
    let name = command_name(&cli.command);
    info!("{name}: seed {}", cfg.seed);
    match &cli.command {
        Command::Normalize { input, output } => {
            let corpus = read_corpus(input, &cfg)?;
            write_text(output, &corpus.as_string())?;
            manifest::write(name, &cfg, &[input], &[output])
        }
        Command::Permute {
            input,
            output,
            perm,
            perm_out,
            whitespace_mode: mode,
        } => {
            overlay(&mut cfg, &[("whitespace_mode", mode.as_deref())])?;
            let corpus = read_corpus(input, &cfg)?;
            let pi = match perm {
                Some(p) => {
                    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    Permutation::from_text(&text).with_context(|| format!("parsing {}", p.display()))?
                }
                None => generate_permutation(&corpus.alphabet(), cfg.seed),
            };
            let permuted = whitespace_mode(&corpus, &pi, cfg.whitespace(), cfg.marker)?;
            write_text(output, &permuted.as_string())?;
            let mut outputs = vec![output.as_path()];
            if let Some(po) = perm_out {
                write_text(po, &pi.to_text())?;
                outputs.push(po);
            }
            let mut inputs = vec![input.as_path()];
            inputs.extend(perm.as_deref());
            manifest::write(name, &cfg, &inputs, &outputs)
        }
        Command::Segment { corpus, output, seg } => {
            seg.apply(&mut cfg)?;
            let c = read_corpus(corpus, &cfg)?;
            let source = RandomSegments::new(&c, cfg.segmentation())?;
            write_stream(&source, &mut create(output)?)?;
            manifest::write(name, &cfg, &[corpus], &[output])
        }
        Command::CountNgrams {
            corpus,
            output,
            kmin,
            kmax,
            mode,
            prefixes,
        } => {
            let c = read_corpus(corpus, &cfg)?;
            let modes: &[CountMode] = match mode {
                ModeArg::Symbolic => &[CountMode::Symbolic],
                ModeArg::Nonsymbolic => &[CountMode::Nonsymbolic],
                ModeArg::Both => &[CountMode::Symbolic, CountMode::Nonsymbolic],
            };
            let mut rows = Vec::new();
            for &m in modes {
                rows.extend(count_distinct_ngrams(&c, *kmin, *kmax, m, cfg.marker, prefixes)?);
            }
            emit(output.as_deref(), &counts_to_csv(&rows))?;
            manifest::write(name, &cfg, &[corpus], output.as_deref().as_slice())
        }
        Command::Train {
            corpus,
            segments,
            rules,
            output,
            seg,
            train,
        } => {
            seg.apply(&mut cfg)?;
            train.apply(&mut cfg)?;
            let tau = rules.as_deref().map(read_rules).transpose()?;
            let loaded_corpus = corpus.as_deref().map(|p| read_corpus(p, &cfg)).transpose()?;
            let loaded_stream = segments.as_deref().map(read_segments).transpose()?;
            let random;
            let base: &dyn SegmentSource = match (&loaded_corpus, &loaded_stream) {
                (Some(c), _) => {
                    random = RandomSegments::new(c, cfg.segmentation())?;
                    &random
                }
                (None, Some(s)) => s,
                (None, None) => unreachable!("clap requires one input"),
            };
            let transduced;
            let source: &dyn SegmentSource = match &tau {
                Some(rules) => {
                    transduced = TransducedSegments { inner: base, rules };
                    &transduced
                }
                None => base,
            };
            let emb = train_sgns(source, &cfg.train())?;
            save_embeddings(&emb, output)?;
            let mut inputs: Vec<&Path> = Vec::new();
            inputs.extend(corpus.as_deref());
            inputs.extend(segments.as_deref());
            inputs.extend(rules.as_deref());
            manifest::write(name, &cfg, &inputs, &[output])
        }
        Command::LearnTau {
            embeddings,
            output,
            corpus,
            n_o,
            min_support,
            max_iterations,
        } => {
            overlay(
                &mut cfg,
                &[("n_o", *n_o), ("min_support", *min_support), ("max_iterations", *max_iterations)],
            )?;
            let emb = read_embeddings(embeddings)?;
            let freq = match corpus {
                Some(p) => {
                    let c = read_corpus(p, &cfg)?;
                    let mut f = corpus_char_counts(&c);
                    // characters seen only in the vocabulary still need an entry
                    for ch in char_frequencies(&emb).into_keys() {
                        f.entry(ch).or_insert(0);
                    }
                    f
                }
                None => char_frequencies(&emb),
            };
            let mut set = learn_tau_with_frequencies(&emb, cfg.n_o, cfg.min_support, &freq);
            set.max_iterations = cfg.max_iterations;
            write_text(output, &set.to_text())?;
            let mut inputs = vec![embeddings.as_path()];
            inputs.extend(corpus.as_deref());
            manifest::write(name, &cfg, &inputs, &[output])
        }
        Command::ApplyTau {
            rules,
            ngram,
            segments,
            corpus,
            output,
            seg,
        } => {
            seg.apply(&mut cfg)?;
            let set = read_rules(rules)?;
            let mut inputs = vec![rules.as_path()];
            if !ngram.is_empty() {
                let text: String = ngram.iter().map(|g| set.apply(g) + "\n").collect();
                emit(output.as_deref(), &text)?;
            } else {
                let mut sink: Box<dyn Write> = match output {
                    Some(p) => Box::new(create(p)?),
                    None => Box::new(BufWriter::new(io::stdout())),
                };
                if let Some(p) = segments {
                    let stream = read_segments(p)?;
                    write_stream(&TransducedSegments { inner: &stream, rules: &set }, &mut sink)?;
                    inputs.push(p);
                } else if let Some(p) = corpus {
                    let c = read_corpus(p, &cfg)?;
                    let source = RandomSegments::new(&c, cfg.segmentation())?;
                    write_stream(&TransducedSegments { inner: &source, rules: &set }, &mut sink)?;
                    inputs.push(p);
                }
            }
            manifest::write(name, &cfg, &inputs, output.as_deref().as_slice())
        }
        Command::EmbedContext {
            embeddings,
            text,
            input,
            range,
            repr,
            rules,
            output,
            ngram,
        } => {
            ngram.apply(&mut cfg)?;
            let emb = read_embeddings(embeddings)?;
            let tau = rules.as_deref().map(read_rules).transpose()?;
            let raw = match (text, input) {
                (Some(t), _) => t.clone(),
                (None, Some(p)) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
                (None, None) => unreachable!("clap requires one input"),
            };
            let normalized = nonsym::corpus::normalize_string(&raw, cfg.marker);
            let len = normalized.chars().count();
            if len == 0 {
                return Err(usage("empty text"));
            }
            let range = range.unwrap_or((0, len - 1));
            let r = context_repr(&emb, &normalized, range, (*repr).into(), cfg.kmin, cfg.kmax, tau.as_ref())?;
            emit(output.as_deref(), &r.to_text())?;
            let mut inputs = vec![embeddings.as_path()];
            inputs.extend(input.as_deref());
            inputs.extend(rules.as_deref());
            manifest::write(name, &cfg, &inputs, output.as_deref().as_slice())
        }
        Command::Knn {
            embeddings,
            query,
            k,
            length,
            alphanumeric,
            delimiter_position,
            delimiters,
            output,
        } => {
            let emb = read_embeddings(embeddings)?;
            let filter = NgramFilter {
                length: *length,
                alphanumeric: *alphanumeric,
                delimiter_positions: delimiter_position.clone(),
                delimiters: match delimiters {
                    Some(d) => d.chars().collect(),
                    None => std::iter::once(cfg.marker)
                        .chain((0u8..128).map(char::from).filter(char::is_ascii_punctuation))
                        .collect(),
                },
            };
            let query = nonsym::corpus::normalize_string(query, cfg.marker);
            let neighbors = knn_ngrams(&emb, Query::Ngram(&query), *k, &filter)?;
            emit(output.as_deref(), &neighbors_to_csv(&query, &neighbors))?;
            manifest::write(name, &cfg, &[embeddings], output.as_deref().as_slice())
        }
        Command::EvalDenoise {
            corpus,
            embeddings,
            repr,
            range,
            rules,
            output,
            denoise,
            ngram,
        } => {
            denoise.apply(&mut cfg)?;
            ngram.apply(&mut cfg)?;
            if let Some((lo, hi)) = range {
                cfg.noise_lo = *lo;
                cfg.noise_hi = *hi;
            }
            let config = cfg.denoise();
            config.validate()?;
            let c = read_corpus(corpus, &cfg)?;
            let emb = read_embeddings(embeddings)?;
            let tau = rules.as_deref().map(read_rules).transpose()?;
            let set = build_denoising_set(&c, &config)?;
            let kinds: &[ReprKind] = match repr {
                ReprChoice::Bag => &[ReprKind::Bag],
                ReprChoice::Positional => &[ReprKind::Positional],
                ReprChoice::Both => &[ReprKind::Bag, ReprKind::Positional],
            };
            let mut report = EvalReport::with_config(&cfg)?;
            for &kind in kinds {
                let r = eval_denoising(&emb, &set, kind, &config, tau.as_ref())?;
                info!("{kind}: MRR {:.4}", r.mrr);
                report.denoising.push(r);
            }
            report.save_json(output)?;
            let summary = output.with_extension("csv");
            let ranks = output.with_extension("ranks.csv");
            write_text(&summary, &report.denoising_csv())?;
            write_text(&ranks, &report.ranks_csv())?;
            let mut inputs = vec![corpus.as_path(), embeddings.as_path()];
            inputs.extend(rules.as_deref());
            manifest::write(name, &cfg, &inputs, &[output, &summary, &ranks])
        }
        Command::EvalTyping {
            embeddings,
            train,
            dev,
            test,
            rules,
            output,
            lambda,
            typing_epochs,
            eta0,
            no_normalize,
            ngram,
        } => {
            ngram.apply(&mut cfg)?;
            overlay(
                &mut cfg,
                &[
                    ("lambda", lambda.map(|v| v.to_string())),
                    ("typing_epochs", typing_epochs.map(|v| v.to_string())),
                    ("eta0", eta0.map(|v| v.to_string())),
                    ("normalize_features", no_normalize.then(|| "false".to_string())),
                ],
            )?;
            let emb = read_embeddings(embeddings)?;
            let tau = rules.as_deref().map(read_rules).transpose()?;
            let train_set = load_typing_dataset(train, Split::Train, None)?;
            let inventory = Some(train_set.type_inventory.clone());
            let dev_set = load_typing_dataset(dev, Split::Dev, inventory.clone())?;
            let test_set = load_typing_dataset(test, Split::Test, inventory)?;
            if dev_set.is_empty() {
                return Err(anyhow!("dev split {} is empty", dev.display()));
            }
            let model = train_typing(&emb, &train_set, tau.as_ref(), &cfg.typing())?;
            let model = tune_thresholds(&model, &emb, &dev_set, tau.as_ref());
            let mut report = EvalReport::with_config(&cfg)?;
            let typing = eval_typing(&model, &emb, &test_set, tau.as_ref());
            info!("micro F1 {:.4}", typing.micro.f1);
            report.typing = Some(typing);
            report.save_json(output)?;
            let summary = output.with_extension("csv");
            write_text(&summary, &report.typing_csv())?;
            let mut inputs = vec![embeddings.as_path(), train.as_path(), dev.as_path(), test.as_path()];
            inputs.extend(rules.as_deref());
            manifest::write(name, &cfg, &inputs, &[output, &summary])
        }
        Command::Report {
            embeddings,
            ngrams,
            output,
        } => {
            let emb = read_embeddings(embeddings)?;
            let ngrams: Vec<String> = ngrams
                .iter()
                .map(|g| nonsym::corpus::normalize_string(g, cfg.marker))
                .collect();
            let refs: Vec<&str> = ngrams.iter().map(String::as_str).collect();
            let matrix = pairwise_cosine_report(&emb, &refs)?;
            emit(output.as_deref(), &matrix_to_csv(&refs, &matrix))?;
            manifest::write(name, &cfg, &[embeddings], output.as_deref().as_slice())
        }
        Command::Synth { output, bytes, vocab } => {
            let text = synth_text(&SynthConfig {
                bytes: *bytes,
                vocab: *vocab,
                seed: cfg.seed,
                ..Default::default()
            });
            write_text(output, &text)?;
            manifest::write(name, &cfg, &[], &[output])
        }
    }
}

fn corpus_char_counts(c: &Corpus) -> FxHashMap<char, u64> {
    let mut f = FxHashMap::default();
    for &ch in &c.chars {
        *f.entry(ch).or_insert(0) += 1;
    }
    f
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Normalize { .. } => "normalize",
        Command::Permute { .. } => "permute",
        Command::Segment { .. } => "segment",
        Command::CountNgrams { .. } => "count-ngrams",
        Command::Train { .. } => "train",
        Command::LearnTau { .. } => "learn-tau",
        Command::ApplyTau { .. } => "apply-tau",
        Command::EmbedContext { .. } => "embed-context",
        Command::Knn { .. } => "knn",
        Command::EvalDenoise { .. } => "eval-denoise",
        Command::EvalTyping { .. } => "eval-typing",
        Command::Report { .. } => "report",
        Command::Synth { .. } => "synth",
    }
}
