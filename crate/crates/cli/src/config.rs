//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ahcr::optimizer::SgdConfig;
use ahcr::svm::SvmTrainConfig;
use ahcr::{ModelConfig, CANONICAL_WIDTHS};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub sgd: SgdConfig,
    pub svm: SvmTrainConfig,
    pub widths: [usize; 3],
    pub dropout_rate: f64,
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub invert: bool,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub precision: Precision,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            sgd: SgdConfig::default(),
            svm: SvmTrainConfig::default(),
            widths: CANONICAL_WIDTHS,
            dropout_rate: ModelConfig::default().dropout_rate,
            train_images: None,
            train_labels: None,
            test_images: None,
            test_labels: None,
            invert: false,
            out_dir: PathBuf::from("out"),
            seed: 0,
            precision: Precision::F32,
            kmeans_max_iter: 300,
            kmeans_tol: 1e-8,
        }
    }
}

/// Every key with a one-line description, in `--help` order.
pub const KEYS: &[(&str, &str)] = &[
    ("learning_rate", "SGD step size"),
    ("momentum", "SGD momentum"),
    ("weight_decay", "L2 weight decay"),
    ("batch_size", "mini-batch size"),
    ("max_epochs", "training epochs"),
    ("decay_biases", "apply weight decay to biases"),
    ("widths", "conv channel widths, comma separated"),
    ("dropout_rate", "dropout on the 1024-unit layer"),
    ("svm_reg_lambda", "SVM L2 penalty"),
    ("svm_learning_rate", "SVM step size"),
    ("svm_epochs", "SVM epochs"),
    ("svm_batch_size", "SVM mini-batch size"),
    ("svm_dropout_rate", "SVM input dropout"),
    ("svm_standardize", "standardize SVM inputs"),
    ("kmeans_max_iter", "k-means iteration cap"),
    ("kmeans_tol", "k-means inertia tolerance"),
    ("train_images", "training image CSV"),
    ("train_labels", "training label CSV"),
    ("test_images", "test image CSV"),
    ("test_labels", "test label CSV"),
    ("invert", "invert pixel polarity on load"),
    ("out_dir", "output directory"),
    ("seed", "random seed"),
    ("precision", "f32 or f64"),
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid value {value:?} for key {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Usage(format!("invalid value {value:?} for key {key}: expected true or false"))),
    }
}

pub fn parse_widths(value: &str) -> Result<[usize; 3], CliError> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    let bad = || CliError::Usage(format!("widths must be three positive integers, got {value:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut out = [0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| bad())?;
        if *o == 0 {
            return Err(bad());
        }
    }
    Ok(out)
}

fn path_opt(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key {
            "learning_rate" => self.sgd.learning_rate = parse(key, v)?,
            "momentum" => self.sgd.momentum = parse(key, v)?,
            "weight_decay" => self.sgd.weight_decay = parse(key, v)?,
            "batch_size" => self.sgd.batch_size = parse(key, v)?,
            "max_epochs" => self.sgd.max_epochs = parse(key, v)?,
            "decay_biases" => self.sgd.decay_biases = parse_bool(key, v)?,
            "widths" => self.widths = parse_widths(v)?,
            "dropout_rate" => self.dropout_rate = parse(key, v)?,
            "svm_reg_lambda" => self.svm.reg_lambda = parse(key, v)?,
            "svm_learning_rate" => self.svm.learning_rate = parse(key, v)?,
            "svm_epochs" => self.svm.epochs = parse(key, v)?,
            "svm_batch_size" => self.svm.batch_size = parse(key, v)?,
            "svm_dropout_rate" => self.svm.dropout_rate = parse(key, v)?,
            "svm_standardize" => self.svm.standardize = parse_bool(key, v)?,
            "kmeans_max_iter" => self.kmeans_max_iter = parse(key, v)?,
            "kmeans_tol" => self.kmeans_tol = parse(key, v)?,
            "train_images" => self.train_images = path_opt(v),
            "train_labels" => self.train_labels = path_opt(v),
            "test_images" => self.test_images = path_opt(v),
            "test_labels" => self.test_labels = path_opt(v),
            "invert" => self.invert = parse_bool(key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            "seed" => self.seed = parse(key, v)?,
            "precision" => {
                self.precision = match v {
                    "f32" => Precision::F32,
                    "f64" => Precision::F64,
                    _ => return Err(CliError::Usage(format!("precision must be f32 or f64, got {v:?}"))),
                }
            }
            _ => return Err(CliError::Usage(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> String {
        match key {
            "learning_rate" => self.sgd.learning_rate.to_string(),
            "momentum" => self.sgd.momentum.to_string(),
            "weight_decay" => self.sgd.weight_decay.to_string(),
            "batch_size" => self.sgd.batch_size.to_string(),
            "max_epochs" => self.sgd.max_epochs.to_string(),
            "decay_biases" => self.sgd.decay_biases.to_string(),
            "widths" => format!("{},{},{}", self.widths[0], self.widths[1], self.widths[2]),
            "dropout_rate" => self.dropout_rate.to_string(),
            "svm_reg_lambda" => self.svm.reg_lambda.to_string(),
            "svm_learning_rate" => self.svm.learning_rate.to_string(),
            "svm_epochs" => self.svm.epochs.to_string(),
            "svm_batch_size" => self.svm.batch_size.to_string(),
            "svm_dropout_rate" => self.svm.dropout_rate.to_string(),
            "svm_standardize" => self.svm.standardize.to_string(),
            "kmeans_max_iter" => self.kmeans_max_iter.to_string(),
            "kmeans_tol" => self.kmeans_tol.to_string(),
            "train_images" => show_path(&self.train_images),
            "train_labels" => show_path(&self.train_labels),
            "test_images" => show_path(&self.test_images),
            "test_labels" => show_path(&self.test_labels),
            "invert" => self.invert.to_string(),
            "out_dir" => self.out_dir.display().to_string(),
            "seed" => self.seed.to_string(),
            "precision" => match self.precision {
                Precision::F32 => "f32".into(),
                Precision::F64 => "f64".into(),
            },
            _ => unreachable!("unknown key {key}"),
        }
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("{origin}:{}: expected key = value", n + 1)))?;
            self.set(k.trim(), v).map_err(|e| match e {
                CliError::Usage(m) => CliError::Usage(format!("{origin}:{}: {m}", n + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, pair: &str) -> Result<(), CliError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {pair:?}")))?;
        self.set(k.trim(), v)
    }

    /// Derived optimizer settings with the run seed folded in.
    pub fn sgd(&self) -> SgdConfig {
        SgdConfig {
            seed: self.seed,
            ..self.sgd.clone()
        }
    }

    pub fn svm(&self) -> SvmTrainConfig {
        SvmTrainConfig {
            seed: self.seed,
            ..self.svm.clone()
        }
    }

    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            widths: self.widths,
            dropout_rate: self.dropout_rate,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, _) in KEYS {
            writeln!(out, "{k} = {}", self.get(k)).unwrap();
        }
        out
    }
}

/// The config-key listing shown by `--help`.
pub fn help_text() -> String {
    let defaults = RunConfig::default();
    let mut out = String::from("Config keys (config file `key = value`, or --set key=value):\n");
    for (k, desc) in KEYS {
        let d = defaults.get(k);
        let d = if d.is_empty() { "unset".to_string() } else { d };
        writeln!(out, "  {k:<20} {desc} [default: {d}]").unwrap();
    }
    out
}
