use std::path::PathBuf;
use std::process::ExitCode;

use afen::commands::{self, EvalSource};
use afen::config::RunConfig;
use afen::{CliError, CliResult};
use afen_core::dataset::{CorrelationKind, StatsConfig};
use clap::{Parser, Subcommand, ValueEnum};

/// Multi-task affect recognition toolkit: gradient checks, toy training,
/// evaluation and dataset utilities.
#[derive(Parser)]
#[command(name = "afen", version)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed; overrides the one in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Correlation {
    Pearson,
    Concordance,
}

#[derive(Subcommand)]
enum Command {
    /// Compare analytic and finite-difference gradients of every loss and block.
    GradCheck {
        /// Random points per item.
        #[arg(long, default_value_t = afen_core::gradsuite::DEFAULT_POINTS)]
        points: usize,
        /// Corrupt the analytic gradient of one item (for testing the checker).
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
    /// Train the configured network; writes model.afen and trace.csv.
    Train {
        /// Overrides output_dir from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Score predictions against labels (CCC, AU macro-F1, accuracy, mean diagonal).
    Eval {
        /// JSON-Lines label records.
        #[arg(long)]
        labels: PathBuf,
        /// JSON-Lines prediction records aligned with the labels.
        #[arg(long, required_unless_present = "model", conflicts_with = "model")]
        predictions: Option<PathBuf>,
        /// AFEN model applied to the labels' `features`.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Write the metrics as CSV.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Subject-independent train/validation/test split.
    Split {
        #[arg(long)]
        input: PathBuf,
        /// Target frame shares for train,validation,test.
        #[arg(long, value_delimiter = ',', default_values_t = [0.63, 0.12, 0.25])]
        ratios: Vec<f64>,
        /// Assignment CSV.
        #[arg(long)]
        output: PathBuf,
    },
    /// Merge per-annotator records into consensus labels.
    Aggregate {
        #[arg(long)]
        input: PathBuf,
        /// Consensus JSON-Lines.
        #[arg(long)]
        output: PathBuf,
        /// Per-video agreement and correlation CSV.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Correlation::Pearson)]
        correlation: Correlation,
    },
    /// Label distributions: VA histogram, expression counts, AU table.
    Stats {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long, default_value_t = 20)]
        va_bins: usize,
    },
    /// Normalized magnitude spectrogram of a PCM16 mono WAV file.
    Spectrogram {
        #[arg(long)]
        input: PathBuf,
        /// CSV, one row per frame.
        #[arg(long)]
        output: PathBuf,
    },
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<String> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::GradCheck {
            points,
            inject_fault,
        } => commands::cmd_grad_check(cfg.seed, points, inject_fault),
        Command::Train { output_dir } => {
            if cli.config.is_none() {
                return Err(CliError::Invalid("train needs --config".into()));
            }
            let mut cfg = cfg;
            if let Some(d) = output_dir {
                cfg.output_dir = d;
            }
            commands::cmd_train(&cfg).map(|(_, report)| report)
        }
        Command::Eval {
            labels,
            predictions,
            model,
            output,
        } => {
            let source = match (&predictions, &model) {
                (Some(p), _) => EvalSource::Predictions(p),
                (None, Some(m)) => EvalSource::Model(m),
                (None, None) => unreachable!("clap requires one of them"),
            };
            commands::cmd_eval(&labels, source, output.as_deref())
        }
        Command::Split {
            input,
            ratios,
            output,
        } => {
            let r: [f64; 3] = ratios.try_into().map_err(|v: Vec<f64>| {
                CliError::Invalid(format!("--ratios needs 3 values, got {}", v.len()))
            })?;
            commands::cmd_split(&input, r, cfg.seed, &output)
        }
        Command::Aggregate {
            input,
            output,
            report,
            correlation,
        } => {
            let kind = match correlation {
                Correlation::Pearson => CorrelationKind::Pearson,
                Correlation::Concordance => CorrelationKind::Concordance,
            };
            commands::cmd_aggregate(&input, &output, report.as_deref(), kind)
        }
        Command::Stats {
            input,
            output_dir,
            va_bins,
        } => {
            let sc = StatsConfig {
                va_bins,
                ..StatsConfig::default()
            };
            commands::cmd_stats(&input, &output_dir, &sc)
        }
        Command::Spectrogram { input, output } => commands::cmd_spectrogram(&input, &output, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // exit code 2 is reserved for numerical failures
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
