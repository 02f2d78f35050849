mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "ahcr", version, about = "Handwritten Arabic character recognizer: CNN features, SVM head, stroke clustering")]
#[command(after_help = config::help_text())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// `key = value` config file
    #[arg(short, long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one config key; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Directory holding train_images.csv, train_labels.csv, test_images.csv, test_labels.csv
    #[arg(long, value_name = "DIR")]
    data: Option<PathBuf>,
    /// Use generated glyphs instead of CSV files
    #[arg(long)]
    synth: bool,
    /// Synthetic samples per class (train and test together)
    #[arg(long, default_value_t = 100)]
    per_class: usize,
    /// Invert pixel polarity on load
    #[arg(long)]
    invert: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Preset {
    /// Widths 16/32/64 and 15 epochs
    Desk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum HeadArg {
    Softmax,
    Svm,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the CNN; writes model.ahcr, history.csv and a softmax report
    #[command(after_help = config::help_text())]
    Train {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Conv channel widths, e.g. 16,32,64
        #[arg(long, value_name = "A,B,C")]
        widths: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Evaluate a trained model on the test split
    #[command(after_help = config::help_text())]
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "softmax")]
        head: HeadArg,
        /// Add a per-group table over the master-stroke partition
        #[arg(long)]
        by_cluster: bool,
    },
    /// Classify every row of an image CSV
    Predict {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_name = "FILE")]
        images: PathBuf,
        #[arg(long, value_enum, default_value = "softmax")]
        head: HeadArg,
        /// Cluster CSV from `cluster`; defaults to the master-stroke groups
        #[arg(long, value_name = "FILE")]
        clusters: Option<PathBuf>,
        #[arg(long)]
        invert: bool,
    },
    /// Write penultimate features as CSV (1024 columns plus label)
    #[command(after_help = config::help_text())]
    ExtractFeatures {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "train")]
        split: SplitArg,
        /// Output file; defaults to <out>/features_<split>.csv
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Train the SVM head and store it in the model container
    #[command(after_help = config::help_text())]
    SvmTrain {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// Features CSV; extracted from the training split when omitted
        #[arg(long, value_name = "FILE")]
        features: Option<PathBuf>,
        /// Where to write the updated container; defaults to --model
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Cluster the class feature centroids into 13 groups
    #[command(after_help = config::help_text())]
    Cluster {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
    },
    /// Write a synthetic dataset as CSV files
    SynthData {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        per_class: usize,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

fn build_config(run: &RunArgs, adjust: impl FnOnce(&mut RunConfig) -> Result<(), CliError>) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &run.config {
        cfg.apply_file(path)?;
    }
    adjust(&mut cfg)?;
    if let Some(seed) = run.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &run.out {
        cfg.out_dir = out.clone();
    }
    if let Some(dir) = &run.data {
        cfg.train_images = Some(dir.join("train_images.csv"));
        cfg.train_labels = Some(dir.join("train_labels.csv"));
        cfg.test_images = Some(dir.join("test_images.csv"));
        cfg.test_labels = Some(dir.join("test_labels.csv"));
    }
    if run.invert {
        cfg.invert = true;
    }
    for pair in &run.set {
        cfg.apply_override(pair)?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { run, preset, widths, epochs } => {
            let cfg = build_config(&run, |cfg| {
                if preset == Some(Preset::Desk) {
                    cfg.widths = [16, 32, 64];
                    cfg.sgd.max_epochs = 15;
                }
                if let Some(w) = &widths {
                    cfg.widths = config::parse_widths(w)?;
                }
                if let Some(e) = epochs {
                    cfg.sgd.max_epochs = e;
                }
                Ok(())
            })?;
            commands::train(&cfg, &data_source(&run))
        }
        Command::Eval { run, model, head, by_cluster } => {
            let cfg = build_config(&run, |_| Ok(()))?;
            commands::eval(&cfg, &data_source(&run), &model, head, by_cluster)
        }
        Command::Predict { model, images, head, clusters, invert } => {
            commands::predict(&model, &images, head, clusters.as_deref(), invert)
        }
        Command::ExtractFeatures { run, model, split, output } => {
            let cfg = build_config(&run, |_| Ok(()))?;
            commands::extract_features(&cfg, &data_source(&run), &model, split, output)
        }
        Command::SvmTrain { run, model, features, output } => {
            let cfg = build_config(&run, |_| Ok(()))?;
            commands::svm_train(&cfg, &data_source(&run), &model, features.as_deref(), output)
        }
        Command::Cluster { run, model } => {
            let cfg = build_config(&run, |_| Ok(()))?;
            commands::cluster(&cfg, &data_source(&run), &model)
        }
        Command::SynthData { seed, per_class, out } => commands::synth_data(seed, per_class, &out),
    }
}

fn data_source(run: &RunArgs) -> commands::DataSource {
    if run.synth {
        commands::DataSource::Synth { per_class: run.per_class }
    } else {
        commands::DataSource::Files
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
