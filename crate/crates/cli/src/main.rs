//! Command-line front end for sparse phrase regression.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use phrasereg::reporting::OutputFormat;
use phrasereg::{NormOrder, PenaltyConfig, RescaleConfig, SearchConfig};

#[derive(Parser, Debug)]
#[command(name = "phrasereg", version, about = "Summarize a labeled document set by the phrases that set it apart")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the phrase regression and print the selected phrases.
    Summarize(SummarizeArgs),
    /// Null threshold of C with a permutation distribution and p-value.
    Threshold(ThresholdArgs),
    /// Sample matches of a phrase in context.
    Fragments(FragmentsArgs),
    /// Score documents with a saved model.
    Predict(PredictArgs),
    /// Count statistics for a list of phrases.
    Profile(ProfileArgs),
    /// Cross-validated prediction error over a grid of C values.
    Cv(CvArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Corpus file (one document per line) or directory (one file per document).
    #[arg(long, value_name = "PATH")]
    corpus: PathBuf,
    /// Label file, one of -1, 0, 1 per document.
    #[arg(long, value_name = "PATH")]
    labels: Option<PathBuf>,
    /// Label documents whose raw text matches as +1 and all others as -1.
    #[arg(long, value_name = "REGEX", conflicts_with = "labels")]
    positive_regex: Option<String>,
    /// Words never allowed in a phrase, one per line.
    #[arg(long, value_name = "PATH")]
    ban: Option<PathBuf>,
    /// Porter-stem every token.
    #[arg(long)]
    stem: bool,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Penalty C.
    #[arg(short = 'C', value_name = "C", default_value_t = 1.0, value_parser = non_negative, allow_negative_numbers = true)]
    c: f64,
    /// Rescaling norm order; 10 or above means infinity.
    #[arg(long, default_value_t = 2.0, value_parser = norm_order)]
    q: f64,
    #[arg(long, default_value_t = 40, value_parser = positive)]
    max_iter: usize,
    /// Only allow positive coefficients.
    #[arg(long)]
    positive_only: bool,
    /// Use 0/1 presence instead of counts.
    #[arg(long)]
    binary_features: bool,
    /// Do not rescale feature columns.
    #[arg(long)]
    no_rescaling: bool,
    #[arg(long, default_value_t = 1, value_parser = positive)]
    min_support: usize,
    #[arg(long, default_value_t = 1, value_parser = positive)]
    min_pattern: usize,
    #[arg(long, default_value_t = 100, value_parser = positive)]
    max_pattern: usize,
    /// Longest run of wildcard tokens inside a phrase.
    #[arg(long, default_value_t = 0)]
    gap: usize,
    #[arg(long, default_value_t = 1e-4, value_parser = non_negative)]
    convergence_threshold: f64,
}

impl FitArgs {
    fn config(&self) -> Result<SearchConfig, Failure> {
        if self.min_pattern > self.max_pattern {
            return Err(Failure::Usage(format!(
                "--min-pattern {} exceeds --max-pattern {}",
                self.min_pattern, self.max_pattern
            )));
        }
        let cfg = SearchConfig {
            rescale: RescaleConfig {
                q: NormOrder::from_cli(self.q)?,
                binary_features: self.binary_features,
                no_rescaling: self.no_rescaling,
            },
            penalty: PenaltyConfig {
                c: self.c,
                positive_only: self.positive_only,
                ..PenaltyConfig::default()
            },
            max_iter: self.max_iter,
            convergence_threshold: self.convergence_threshold,
            min_support: self.min_support,
            min_pattern: self.min_pattern,
            max_pattern: self.max_pattern,
            gap: self.gap,
            ..SearchConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// text, tsv or json-lines.
    #[arg(long, default_value = "text", value_parser = parse_format)]
    format: OutputFormat,
    /// 0 silences diagnostics; 2 and 3 add per-iteration traces.
    #[arg(long, default_value_t = 1)]
    verbosity: u8,
    /// Worker threads (default: all cores).
    #[arg(long, value_parser = positive)]
    threads: Option<usize>,
}

fn non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err("expected a finite non-negative number".into()),
    }
}

fn norm_order(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 1.0 => Ok(v),
        _ => Err("expected a number of at least 1".into()),
    }
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err("expected a positive integer".into()),
    }
}

fn at_least_two(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 2 => Ok(v),
        _ => Err("expected an integer of at least 2".into()),
    }
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse().map_err(|e: phrasereg::Error| e.to_string())
}

#[derive(Args, Debug)]
struct SummarizeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    fit: FitArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Write the fitted model as JSON.
    #[arg(long, value_name = "PATH")]
    save_model: Option<PathBuf>,
    /// Write the design matrix of the selected phrases as TSV.
    #[arg(long, value_name = "PATH")]
    design_matrix: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ThresholdArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    fit: FitArgs,
    #[command(flatten)]
    output: OutputArgs,
    #[arg(long, default_value_t = 100, value_parser = positive)]
    permutations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct FragmentsArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Phrase to look up; `*` is a one-token wildcard.
    #[arg(long)]
    phrase: String,
    /// Number of fragments.
    #[arg(short = 'n', long, default_value_t = 10)]
    count: usize,
    /// Context tokens on each side.
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Model saved by `summarize --save-model`.
    #[arg(long, value_name = "PATH")]
    model: PathBuf,
}

#[derive(Args, Debug)]
struct ProfileArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Phrases, one per line, or JSON lines with a "phrase" key.
    #[arg(long, value_name = "PATH")]
    phrases: PathBuf,
}

#[derive(Args, Debug)]
struct CvArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    fit: FitArgs,
    #[command(flatten)]
    output: OutputArgs,
    #[arg(long, default_value_t = 5, value_parser = at_least_two)]
    folds: usize,
    /// Comma-separated C values.
    #[arg(long, value_name = "LIST", value_delimiter = ',', default_value = "1,2,4,8,16", value_parser = non_negative)]
    c_grid: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Failure of a command and its exit status.
pub enum Failure {
    /// Bad flags or flag values.
    Usage(String),
    /// Unreadable or inconsistent inputs.
    Data(phrasereg::Error),
}

impl From<phrasereg::Error> for Failure {
    fn from(e: phrasereg::Error) -> Self {
        match e {
            phrasereg::Error::InvalidConfig(msg) => Failure::Usage(msg),
            other => Failure::Data(other),
        }
    }
}

fn setup(output: &OutputArgs) -> Result<(), Failure> {
    let level = match output.verbosity {
        0 => log::LevelFilter::Off,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .format_target(false)
        .init();
    if let Some(n) = output.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<String, Failure> {
    match cli.command {
        Command::Summarize(a) => {
            setup(&a.output)?;
            commands::summarize(&a)
        }
        Command::Threshold(a) => {
            setup(&a.output)?;
            commands::threshold(&a)
        }
        Command::Fragments(a) => {
            setup(&a.output)?;
            commands::fragments(&a)
        }
        Command::Predict(a) => {
            setup(&a.output)?;
            commands::predict(&a)
        }
        Command::Profile(a) => {
            setup(&a.output)?;
            commands::profile(&a)
        }
        Command::Cv(a) => {
            setup(&a.output)?;
            commands::cv(&a)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: usage: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {}: {}", e.code(), e.to_string().replace('\n', " "));
            ExitCode::from(2)
        }
    }
}
