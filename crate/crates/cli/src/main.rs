//! `droidops`: opcode-frequency Android malware detection from the command line.
//!
//! Exit codes: 0 for success or a benign verdict, 10 for a malware verdict,
//! 2 for any error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use droidops::NormalizationMode;

use crate::config::{HyperArgs, Settings};

const EXIT_ERROR: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "droidops",
    version,
    about = "Detect Android malware from Dalvik opcode frequencies"
)]
struct Cli {
    /// Seed for splits, folds and random forests
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Class-mean normalization: raw or relative
    #[arg(long, global = true)]
    mode: Option<NormalizationMode>,

    /// Rank features on the whole corpus, test rows included
    #[arg(long, global = true)]
    paper_faithful: bool,

    /// Worker threads (defaults to the number of CPUs)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// TOML file with default settings; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Log more (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract opcode histograms for every app in a manifest into a cache
    Extract {
        /// CSV with app_id,path,label columns
        manifest: PathBuf,
        /// Cache directory
        #[arg(long)]
        cache: PathBuf,
        /// Skip apps that fail to extract instead of aborting
        #[arg(long)]
        skip_failures: bool,
    },
    /// Rank opcodes by the difference of their class means
    Rank {
        /// Cache directory or histogram CSV
        #[arg(long)]
        cache: PathBuf,
        /// Number of opcodes to keep
        #[arg(short = 'n', long = "n-features")]
        n: Option<usize>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Train a classifier and save it as a model file
    Train {
        #[arg(long)]
        cache: PathBuf,
        /// Ranking CSV from `rank`; computed from the cache when absent
        #[arg(long)]
        ranking: Option<PathBuf>,
        #[arg(short = 'n', long = "n-features")]
        n: Option<usize>,
        /// dt, rf or nbt
        #[arg(short, long)]
        classifier: Option<String>,
        #[command(flatten)]
        hyper: HyperArgs,
        #[arg(short, long)]
        model: PathBuf,
    },
    /// Cross-validate (default) or hold out a test split
    Evaluate {
        #[arg(long)]
        cache: PathBuf,
        #[arg(short, long)]
        classifier: Option<String>,
        #[arg(short = 'n', long = "n-features")]
        n: Option<usize>,
        #[command(flatten)]
        hyper: HyperArgs,
        /// Number of folds
        #[arg(long, conflicts_with = "holdout")]
        kfold: Option<usize>,
        /// Test fraction for a single held-out split
        #[arg(long)]
        holdout: Option<f64>,
        /// Shuffle the held-out split without keeping class proportions
        #[arg(long, requires = "holdout")]
        unstratified: bool,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Evaluate every classifier over a grid of feature counts
    Sweep {
        #[arg(long)]
        cache: PathBuf,
        /// Comma-separated list, e.g. dt,rf,nbt
        #[arg(long)]
        classifiers: Option<String>,
        #[command(flatten)]
        hyper: HyperArgs,
        #[arg(long)]
        grid_start: Option<usize>,
        #[arg(long)]
        grid_stop: Option<usize>,
        #[arg(long)]
        grid_step: Option<usize>,
        #[arg(long)]
        test_fraction: Option<f64>,
        /// Shuffle the held-out split without keeping class proportions
        #[arg(long)]
        unstratified: bool,
        /// Fill the wall_ms column (makes the CSV differ between runs)
        #[arg(long)]
        timing: bool,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Classify one APK, DEX file or smali directory
    Scan {
        app: PathBuf,
        #[arg(short, long)]
        model: PathBuf,
    },
    /// Write a synthetic labeled histogram CSV
    Synth {
        #[arg(long, default_value_t = 200)]
        benign: usize,
        #[arg(long, default_value_t = 200)]
        malware: usize,
        /// 0 gives identical class profiles, 1 the strongest planted signal
        #[arg(long, default_value_t = 0.7)]
        separation: f64,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<ExitCode> {
    let settings = Settings::resolve(cli.config.as_ref(), cli.seed, cli.mode, cli.paper_faithful)?;
    if let Some(jobs) = cli.jobs.or(settings.file.jobs) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()?;
    }

    match &cli.command {
        Command::Extract {
            manifest,
            cache,
            skip_failures,
        } => commands::extract(&settings, manifest, cache, *skip_failures),
        Command::Rank { cache, n, out } => commands::rank(&settings, cache, *n, out),
        Command::Train {
            cache,
            ranking,
            n,
            classifier,
            hyper,
            model,
        } => commands::train(
            &settings,
            commands::TrainArgs {
                cache,
                ranking: ranking.as_deref(),
                n: *n,
                classifier: classifier.as_deref(),
                hyper,
                model,
            },
        ),
        Command::Evaluate {
            cache,
            classifier,
            n,
            hyper,
            kfold,
            holdout,
            unstratified,
            out,
        } => commands::evaluate(
            &settings,
            commands::EvaluateArgs {
                cache,
                classifier: classifier.as_deref(),
                n: *n,
                hyper,
                kfold: *kfold,
                holdout: *holdout,
                stratified: !*unstratified,
                out,
            },
        ),
        Command::Sweep {
            cache,
            classifiers,
            hyper,
            grid_start,
            grid_stop,
            grid_step,
            test_fraction,
            unstratified,
            timing,
            out,
        } => commands::sweep(
            &settings,
            commands::SweepArgs {
                cache,
                classifiers: classifiers.as_deref(),
                hyper,
                grid: (*grid_start, *grid_stop, *grid_step),
                test_fraction: *test_fraction,
                stratified: !*unstratified,
                timing: *timing,
                out,
            },
        ),
        Command::Scan { app, model } => commands::scan(app, model),
        Command::Synth {
            benign,
            malware,
            separation,
            out,
        } => commands::synth(&settings, *benign, *malware, *separation, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", error_message(&e));
            ExitCode::from(EXIT_ERROR)
        }
    }
}

/// Joins the error chain, dropping causes the outer message already quotes.
fn error_message(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}
