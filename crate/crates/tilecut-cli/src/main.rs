//! Command-line front end for the tilecut library.
//!
//! Subcommands wire resources (lexicon, stoplist, taxonomy) and pipeline
//! stages (segmentation, concept extraction, evaluation, synthesis) into
//! reproducible runs: every command is deterministic given its flags, its
//! config file, and its seed. Multi-document commands process inputs on a
//! bounded worker pool but always write results in input order.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error
//! (unreadable or malformed input files).

mod commands;
mod config;
mod formats;
mod pool;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::ConfigFile;

/// A failure carrying its process exit code: configuration and usage
/// problems exit 1, broken input data exits 2.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Data(msg) => write!(f, "error: {msg}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "tilecut",
    version,
    about = "Topic segmentation, concept annotation, and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a lexicon from an entry file and report what it indexed.
    LexiconBuild(LexiconBuildArgs),
    /// Split documents into topically homogeneous blocks.
    Segment(SegmentArgs),
    /// Extract one concept cut per whole document.
    Extract(ExtractArgs),
    /// Segment documents, then extract one concept cut per segment.
    Annotate(AnnotateArgs),
    /// Score found segmentations against reference segmentations.
    EvalSeg(EvalSegArgs),
    /// Score produced concept annotations against reference annotations.
    EvalTopics(EvalTopicsArgs),
    /// Generate a seeded random concept hierarchy.
    SynthTaxonomy(SynthTaxonomyArgs),
    /// Generate a seeded benchmark corpus with known segment junctions.
    SynthCorpus(SynthCorpusArgs),
    /// Report per-concept path statistics of a taxonomy.
    TaxonomyStats(TaxonomyStatsArgs),
}

/// Flags shared by every subcommand.
#[derive(Args, Debug)]
struct Common {
    /// Key=value config file; explicit flags override its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

impl Common {
    fn load_config(&self) -> Result<ConfigFile, CliError> {
        ConfigFile::load(self.config.as_deref())
    }

    /// Output destination: flag, then config key `out`, then stdout.
    fn resolve_out(&self, cfg: &ConfigFile) -> Result<Option<PathBuf>, CliError> {
        config::resolve_opt(self.out.clone(), cfg, "out")
    }
}

/// Lexicon resources; both may come from the config file instead.
#[derive(Args, Debug)]
struct LexiconArgs {
    /// Lexicon entries, TSV: lemma, pos tag, inflection, concept ids.
    #[arg(long, value_name = "FILE")]
    lexicon: Option<PathBuf>,
    /// Stopword list, one surface form per line.
    #[arg(long, value_name = "FILE")]
    stoplist: Option<PathBuf>,
}

/// Taxonomy resource; may come from the config file instead.
#[derive(Args, Debug)]
struct TaxonomyArg {
    /// Concept hierarchy file (N node lines, E edge lines).
    #[arg(long, value_name = "FILE")]
    taxonomy: Option<PathBuf>,
}

impl TaxonomyArg {
    fn require(&self, cfg: &ConfigFile) -> Result<PathBuf, CliError> {
        config::require_path(self.taxonomy.clone(), cfg, "taxonomy", "--taxonomy")
    }
}

/// Segmenter parameters; every one has a config-file key of the same name
/// (with underscores) and a built-in default.
#[derive(Args, Debug)]
struct SegFlags {
    /// Tokens per comparison window. [default: 25]
    #[arg(long, value_name = "N")]
    window_size: Option<usize>,
    /// Smoothing step toward the neighbor midpoint, in (0, 1]. [default: 0.5]
    #[arg(long, value_name = "X")]
    lambda: Option<f64>,
    /// Number of smoothing iterations. [default: 2]
    #[arg(long, value_name = "N")]
    smooth_iters: Option<usize>,
    /// Drop boundaries whose relevance falls below this.
    #[arg(long, value_name = "X")]
    min_relevance: Option<f64>,
    /// Keep at most this many boundaries, strongest first.
    #[arg(long, value_name = "N")]
    max_boundaries: Option<usize>,
    /// Use the product-denominator Dice variant.
    #[arg(long)]
    dice_product: bool,
}

impl SegFlags {
    fn resolve(&self, cfg: &ConfigFile) -> Result<tilecut::segmenter::SegmenterConfig, CliError> {
        let defaults = tilecut::segmenter::SegmenterConfig::default();
        let window_size = config::resolve(self.window_size, cfg, "window_size", defaults.window_size)?;
        if window_size == 0 {
            return Err(CliError::Config("window_size must be at least 1".into()));
        }
        let lambda = config::resolve(self.lambda, cfg, "lambda", defaults.lambda)?;
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(CliError::Config(format!("lambda must be in (0, 1], got {lambda}")));
        }
        let smooth_iterations =
            config::resolve(self.smooth_iters, cfg, "smooth_iters", defaults.smooth_iterations)?;
        let min_relevance = config::resolve_opt(self.min_relevance, cfg, "min_relevance")?;
        if let Some(r) = min_relevance {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(CliError::Config(format!("min_relevance must be finite and >= 0, got {r}")));
            }
        }
        let max_boundaries = config::resolve_opt(self.max_boundaries, cfg, "max_boundaries")?;
        let dice_product =
            self.dice_product || cfg.get::<bool>("dice_product")?.unwrap_or(false);
        Ok(tilecut::segmenter::SegmenterConfig {
            window_size,
            lambda,
            smooth_iterations,
            min_relevance,
            max_boundaries,
            dice: if dice_product {
                tilecut::segmenter::DiceForm::ProductCompat
            } else {
                tilecut::segmenter::DiceForm::Normalized
            },
        })
    }
}

/// Extractor parameters; config keys `a` and `unweighted_g`.
#[derive(Args, Debug)]
struct ExtFlags {
    /// Generality balance: 0 favors generic cuts, 1 specific ones. [default: 0.5]
    #[arg(long, value_name = "X")]
    a: Option<f64>,
    /// Average child scores plainly instead of by covered path counts.
    #[arg(long)]
    unweighted_g: bool,
}

impl ExtFlags {
    fn resolve(&self, cfg: &ConfigFile) -> Result<tilecut::extractor::ExtractionConfig, CliError> {
        let a = config::resolve(self.a, cfg, "a", 0.5)?;
        if !(0.0..=1.0).contains(&a) {
            return Err(CliError::Config(format!("a must be in [0, 1], got {a}")));
        }
        let unweighted_g = self.unweighted_g || cfg.get::<bool>("unweighted_g")?.unwrap_or(false);
        Ok(tilecut::extractor::ExtractionConfig {
            balance: tilecut::extractor::Balance::new(a),
            unweighted_average: unweighted_g,
        })
    }
}

/// Worker-pool width for multi-document commands.
#[derive(Args, Debug)]
struct JobsFlag {
    /// Worker threads for multi-document runs. [default: the CPU count]
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
}

impl JobsFlag {
    fn resolve(&self) -> Result<usize, CliError> {
        match self.jobs {
            Some(0) => Err(CliError::Config("jobs must be at least 1".into())),
            Some(n) => Ok(n),
            None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }
}

#[derive(Args, Debug)]
struct LexiconBuildArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    lex: LexiconArgs,
}

#[derive(Args, Debug)]
struct SegmentArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    lex: LexiconArgs,
    #[command(flatten)]
    seg: SegFlags,
    #[command(flatten)]
    jobs: JobsFlag,
    /// Also dump raw and smoothed similarity curves to this file.
    #[arg(long, value_name = "FILE")]
    curve: Option<PathBuf>,
    /// Input documents, plain text.
    #[arg(value_name = "FILE", required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    lex: LexiconArgs,
    #[command(flatten)]
    taxonomy: TaxonomyArg,
    #[command(flatten)]
    ext: ExtFlags,
    #[command(flatten)]
    jobs: JobsFlag,
    /// Check each cut against exhaustive search and report agreement.
    #[arg(long)]
    oracle: bool,
    /// Input documents, plain text.
    #[arg(value_name = "FILE", required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct AnnotateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    lex: LexiconArgs,
    #[command(flatten)]
    taxonomy: TaxonomyArg,
    #[command(flatten)]
    seg: SegFlags,
    #[command(flatten)]
    ext: ExtFlags,
    #[command(flatten)]
    jobs: JobsFlag,
    /// Check each segment's cut against exhaustive search.
    #[arg(long)]
    oracle: bool,
    /// Input documents, plain text.
    #[arg(value_name = "FILE", required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalSegArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    jobs: JobsFlag,
    /// Reference segmentations: doc_id, word count, segment starts.
    #[arg(long, value_name = "FILE")]
    real: PathBuf,
    /// Found segmentations, same format; doc ids must match --real.
    #[arg(long, value_name = "FILE")]
    found: PathBuf,
}

#[derive(Args, Debug)]
struct EvalTopicsArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    taxonomy: TaxonomyArg,
    #[command(flatten)]
    jobs: JobsFlag,
    /// Produced annotations: doc_id and concept_id per line.
    #[arg(long, value_name = "FILE")]
    produced: PathBuf,
    /// Reference annotations, same format; doc ids must match --produced.
    #[arg(long, value_name = "FILE")]
    reference: PathBuf,
    /// Comma-separated match thresholds in [0, 1). [default: 0,0.05,...,0.95]
    #[arg(long, value_name = "LIST")]
    thetas: Option<String>,
    /// F-measure weight; 1 balances precision and recall. [default: 1]
    #[arg(long, value_name = "X")]
    beta: Option<f64>,
}

#[derive(Args, Debug)]
struct SynthTaxonomyArgs {
    #[command(flatten)]
    common: Common,
    /// RNG seed; required (flag or config key).
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Number of concepts. [default: 40]
    #[arg(long, value_name = "N")]
    nodes: Option<usize>,
    /// Chance that a node gets a second parent. [default: 0.15]
    #[arg(long, value_name = "X")]
    extra_parent_prob: Option<f64>,
    /// Chance that an internal node is anonymous. [default: 0.2]
    #[arg(long, value_name = "X")]
    anonymous_prob: Option<f64>,
}

#[derive(Args, Debug)]
struct SynthCorpusArgs {
    #[command(flatten)]
    common: Common,
    /// RNG seed; required (flag or config key).
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Number of vocabulary-disjoint blocks. [default: 5]
    #[arg(long, value_name = "N")]
    blocks: Option<usize>,
    /// Words per block. [default: 240]
    #[arg(long, value_name = "N")]
    words_per_block: Option<usize>,
    /// Distinct word types per block. [default: 30]
    #[arg(long, value_name = "N")]
    vocab_per_block: Option<usize>,
    /// Build the corpus by concatenating these documents instead of
    /// generating synthetic blocks.
    #[arg(
        long,
        value_name = "FILE",
        conflicts_with_all = ["blocks", "words_per_block", "vocab_per_block"]
    )]
    from_docs: Vec<PathBuf>,
    /// How many documents to concatenate; at least 2. [default: 2]
    #[arg(long, value_name = "N", requires = "from_docs")]
    group_size: Option<usize>,
    /// Write the ground-truth segmentation here.
    #[arg(long, value_name = "FILE")]
    truth: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TaxonomyStatsArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    taxonomy: TaxonomyArg,
    /// Restrict the report to these concept ids (repeatable).
    #[arg(long, value_name = "ID")]
    concept: Vec<String>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::LexiconBuild(args) => commands::lexicon_build(args),
        Command::Segment(args) => commands::segment_docs(args),
        Command::Extract(args) => commands::extract_docs(args),
        Command::Annotate(args) => commands::annotate_docs(args),
        Command::EvalSeg(args) => commands::eval_seg(args),
        Command::EvalTopics(args) => commands::eval_topics(args),
        Command::SynthTaxonomy(args) => commands::synth_taxonomy(args),
        Command::SynthCorpus(args) => commands::synth_corpus(args),
        Command::TaxonomyStats(args) => commands::taxonomy_stats(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests print to stdout and succeed; real
            // usage errors go to stderr and exit 1.
            let code = u8::from(err.use_stderr());
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("tilecut").chain(args.iter().copied()))
    }

    #[test]
    fn every_subcommand_parses_with_minimal_arguments() {
        assert!(parse(&["lexicon-build", "--lexicon", "l.tsv"]).is_ok());
        assert!(parse(&["segment", "doc.txt"]).is_ok());
        assert!(parse(&["extract", "--taxonomy", "t.tsv", "doc.txt"]).is_ok());
        assert!(parse(&["annotate", "--taxonomy", "t.tsv", "doc.txt"]).is_ok());
        assert!(parse(&["eval-seg", "--real", "r.tsv", "--found", "f.tsv"]).is_ok());
        assert!(parse(&[
            "eval-topics",
            "--produced",
            "p.tsv",
            "--reference",
            "r.tsv",
            "--taxonomy",
            "t.tsv"
        ])
        .is_ok());
        assert!(parse(&["synth-taxonomy", "--seed", "1"]).is_ok());
        assert!(parse(&["synth-corpus", "--seed", "1"]).is_ok());
        assert!(parse(&["taxonomy-stats", "--taxonomy", "t.tsv"]).is_ok());
    }

    #[test]
    fn segment_requires_at_least_one_input() {
        assert!(parse(&["segment"]).is_err());
    }

    #[test]
    fn from_docs_conflicts_with_block_parameters() {
        assert!(parse(&["synth-corpus", "--seed", "1", "--from-docs", "a", "--blocks", "3"]).is_err());
        assert!(parse(&["synth-corpus", "--seed", "1", "--group-size", "3"]).is_err());
        assert!(parse(&["synth-corpus", "--seed", "1", "--from-docs", "a", "--group-size", "3"]).is_ok());
    }

    #[test]
    fn window_size_zero_is_rejected_at_resolution_time() {
        let cli = parse(&["segment", "--window-size", "0", "doc.txt"]).unwrap();
        let Command::Segment(args) = &cli.command else { panic!("wrong subcommand") };
        let err = args.seg.resolve(&ConfigFile::default()).unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn flag_beats_config_file_value() {
        let cfg = ConfigFile::parse("window_size = 300\nlambda = 0.25\n").unwrap();
        let cli = parse(&["segment", "--window-size", "25", "doc.txt"]).unwrap();
        let Command::Segment(args) = &cli.command else { panic!("wrong subcommand") };
        let resolved = args.seg.resolve(&cfg).unwrap();
        assert_eq!(resolved.window_size, 25, "flag wins");
        assert_eq!(resolved.lambda, 0.25, "config fills unset flags");
        assert_eq!(resolved.smooth_iterations, 2, "defaults fill the rest");
    }

    #[test]
    fn balance_out_of_range_is_a_config_error() {
        let cli = parse(&["extract", "--taxonomy", "t.tsv", "--a", "1.5", "doc.txt"]).unwrap();
        let Command::Extract(args) = &cli.command else { panic!("wrong subcommand") };
        assert!(matches!(args.ext.resolve(&ConfigFile::default()), Err(CliError::Config(_))));
    }
}
