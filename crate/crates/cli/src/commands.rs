use std::fmt::Write as _;
use std::fs;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use ahcr::cluster::{class_centroids, compare_partition, kmeans, KMeansConfig};
use ahcr::dataset::{
    load_csv, load_features_csv, load_images, synth_dataset, to_batch, write_csv, write_features_csv, GlyphSample,
    LoadOptions,
};
use ahcr::eval::{comparison_table, confusion_pairs, evaluate, per_class_table, per_group_table, EvalReport, Head};
use ahcr::optimizer::{train_with, TrainHistory};
use ahcr::persist::Container;
use ahcr::svm::{svm_train as fit_svm, SvmModel};
use ahcr::{ClassId, Model, ReferencePartition, Scalar, Tensor, INPUT_SIDE, NUM_CLASSES};

use crate::config::{Precision, RunConfig};
use crate::error::CliError;
use crate::{HeadArg, SplitArg};

const CHUNK: usize = 64;

pub enum DataSource {
    Files,
    Synth { per_class: usize },
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(ahcr::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    fs::write(path, body).map_err(|e| io_err(path, e))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn load_split(cfg: &RunConfig, source: &DataSource, split: SplitArg) -> Result<Vec<GlyphSample>, CliError> {
    match source {
        DataSource::Synth { per_class } => {
            let data = synth_dataset(cfg.seed, *per_class, NUM_CLASSES)?;
            Ok(match split {
                SplitArg::Train => data.train,
                SplitArg::Test => data.test,
            })
        }
        DataSource::Files => {
            let (images, labels, key) = match split {
                SplitArg::Train => (&cfg.train_images, &cfg.train_labels, "train"),
                SplitArg::Test => (&cfg.test_images, &cfg.test_labels, "test"),
            };
            match (images, labels) {
                (Some(i), Some(l)) => Ok(load_csv(i, l, LoadOptions { invert: cfg.invert })?),
                _ => Err(CliError::Usage(format!(
                    "no {key} data: set {key}_images and {key}_labels, or pass --data or --synth"
                ))),
            }
        }
    }
}

fn has_test_paths(cfg: &RunConfig, source: &DataSource) -> bool {
    matches!(source, DataSource::Synth { .. }) || (cfg.test_images.is_some() && cfg.test_labels.is_some())
}

/// Inference-mode features for `samples`, `[N, 1024]`.
fn features_of(model: &Model<f32>, samples: &[GlyphSample]) -> Result<Tensor<f32>, CliError> {
    let mut data = Vec::new();
    for part in samples.chunks(CHUNK) {
        data.extend_from_slice(model.features(&to_batch::<f32>(part)?)?.data());
    }
    let d = data.len() / samples.len().max(1);
    Ok(Tensor::from_vec(&[samples.len(), d], data)?)
}

fn softmax_predict<T: Scalar>(model: &Model<T>, samples: &[GlyphSample]) -> ahcr::Result<Vec<ClassId>> {
    let mut out = Vec::with_capacity(samples.len());
    for part in samples.chunks(CHUNK) {
        out.extend(model.predict(&to_batch::<T>(part)?)?);
    }
    Ok(out)
}

fn svm_predict(model: &Model<f32>, svm: &SvmModel<f32>, samples: &[GlyphSample]) -> ahcr::Result<Vec<ClassId>> {
    let mut out = Vec::with_capacity(samples.len());
    for part in samples.chunks(CHUNK) {
        out.extend(svm.predict(&model.features(&to_batch::<f32>(part)?)?)?);
    }
    Ok(out)
}

fn report_text(report: &EvalReport, by_cluster: bool) -> String {
    let mut out = String::new();
    writeln!(out, "head: {}", report.head).unwrap();
    writeln!(out, "samples: {}", report.total).unwrap();
    writeln!(out, "CRR: {:.2}%", report.crr()).unwrap();
    writeln!(out, "ECR: {:.2}%", report.ecr()).unwrap();
    out.push('\n');
    out.push_str(&per_class_table(report));
    if by_cluster {
        out.push('\n');
        out.push_str(&per_group_table(report, &ReferencePartition::master_strokes()));
    }
    let pairs = confusion_pairs(report, 10);
    if !pairs.is_empty() {
        out.push_str("\nMost frequent confusions (true -> predicted: count)\n");
        for (t, p, n) in pairs {
            writeln!(out, "{} -> {}: {n}", t.name(), p.name()).unwrap();
        }
    }
    out
}

fn write_report(dir: &Path, report: &EvalReport, by_cluster: bool) -> Result<(), CliError> {
    let head = report.head.to_string();
    write_file(&dir.join(format!("{head}_report.txt")), &report_text(report, by_cluster))?;
    write_file(&dir.join(format!("{head}_confusion.csv")), &report.confusion_csv())?;
    write_file(&dir.join(format!("{head}_summary.csv")), &report.summary_csv())?;
    println!("{head}: CRR {:.2}% ECR {:.2}% on {} samples", report.crr(), report.ecr(), report.total);
    Ok(())
}

fn train_typed<T: Scalar>(
    cfg: &RunConfig,
    train: &[GlyphSample],
    test: &[GlyphSample],
) -> Result<(Container, TrainHistory, Option<EvalReport>), CliError> {
    let mut model = Model::<T>::init(cfg.model(), cfg.seed)?;
    let history = train_with(&mut model, train, test, &cfg.sgd(), |r| {
        let test = r.test_acc.map(|a| format!(" test_acc {a:.2}")).unwrap_or_default();
        eprintln!("epoch {} loss {:.4} train_acc {:.2}{test}", r.epoch, r.train_loss, r.train_acc);
        ControlFlow::Continue(())
    })?;
    let report = if test.is_empty() {
        None
    } else {
        Some(evaluate(Head::Softmax, test, |s| s.label, |s| softmax_predict(&model, s))?)
    };
    let mut container = Container::new();
    container.put_model(&model);
    Ok((container, history, report))
}

pub fn train(cfg: &RunConfig, source: &DataSource) -> Result<(), CliError> {
    let train = load_split(cfg, source, SplitArg::Train)?;
    let test = if has_test_paths(cfg, source) {
        load_split(cfg, source, SplitArg::Test)?
    } else {
        Vec::new()
    };
    ensure_dir(&cfg.out_dir)?;
    write_file(&cfg.out_dir.join("config.txt"), &cfg.to_text())?;
    let (container, history, report) = match cfg.precision {
        Precision::F32 => train_typed::<f32>(cfg, &train, &test)?,
        Precision::F64 => train_typed::<f64>(cfg, &train, &test)?,
    };
    container.save(&cfg.out_dir.join("model.ahcr"))?;
    write_file(&cfg.out_dir.join("history.csv"), &history.to_csv())?;
    if let Some(report) = report {
        write_report(&cfg.out_dir, &report, false)?;
    }
    Ok(())
}

pub fn eval(cfg: &RunConfig, source: &DataSource, model_path: &Path, head: HeadArg, by_cluster: bool) -> Result<(), CliError> {
    let container = Container::load(model_path)?;
    let model = container.model::<f32>()?;
    let svm = match head {
        HeadArg::Softmax => None,
        HeadArg::Svm | HeadArg::Both => Some(container.svm()?),
    };
    let test = load_split(cfg, source, SplitArg::Test)?;
    ensure_dir(&cfg.out_dir)?;
    let mut reports = Vec::new();
    if head != HeadArg::Svm {
        reports.push(evaluate(Head::Softmax, &test, |s| s.label, |s| softmax_predict(&model, s))?);
    }
    if let Some(svm) = &svm {
        reports.push(evaluate(Head::Svm, &test, |s| s.label, |s| svm_predict(&model, svm, s))?);
    }
    for r in &reports {
        write_report(&cfg.out_dir, r, by_cluster)?;
    }
    if reports.len() > 1 {
        let table = comparison_table(&reports);
        write_file(&cfg.out_dir.join("comparison.txt"), &table)?;
        print!("{table}");
    }
    Ok(())
}

/// Reads a `class_id,class_name,cluster_id` file into per-class cluster ids.
fn read_clusters(path: &Path) -> Result<Vec<usize>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let bad = |line: usize, msg: &str| {
        CliError::Core(ahcr::Error::Format {
            path: path.to_path_buf(),
            line,
            msg: msg.to_string(),
        })
    };
    let mut out = vec![0; NUM_CLASSES];
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(bad(i + 1, "expected class_id,class_name,cluster_id"));
        }
        let class: usize = f[0].trim().parse().map_err(|_| bad(i + 1, "bad class id"))?;
        let cluster: usize = f[2].trim().parse().map_err(|_| bad(i + 1, "bad cluster id"))?;
        if !(1..=NUM_CLASSES).contains(&class) || cluster == 0 {
            return Err(bad(i + 1, "class or cluster id out of range"));
        }
        out[class - 1] = cluster;
    }
    if let Some(missing) = out.iter().position(|&c| c == 0) {
        return Err(bad(0, &format!("no cluster for class {}", missing + 1)));
    }
    Ok(out)
}

pub fn predict(model_path: &Path, images: &Path, head: HeadArg, clusters: Option<&Path>, invert: bool) -> Result<(), CliError> {
    if head == HeadArg::Both {
        return Err(CliError::Usage("predict takes --head softmax or --head svm".into()));
    }
    let container = Container::load(model_path)?;
    let model = container.model::<f32>()?;
    let svm = if head == HeadArg::Svm { Some(container.svm()?) } else { None };
    let cluster_of = match clusters {
        Some(p) => read_clusters(p)?,
        None => ReferencePartition::master_strokes().groups().to_vec(),
    };
    let rows = load_images(images, LoadOptions { invert })?;
    let mut out = String::from("row,class_id,class_name,cluster_id\n");
    let mut row = 0;
    for part in rows.chunks(CHUNK) {
        let data: Vec<f32> = part.concat();
        let batch = Tensor::from_vec(&[part.len(), 1, INPUT_SIDE, INPUT_SIDE], data)?;
        let preds = match &svm {
            Some(svm) => svm.predict(&model.features(&batch)?)?,
            None => model.predict(&batch)?,
        };
        for p in preds {
            row += 1;
            writeln!(out, "{row},{p},{},{}", p.name(), cluster_of[p.index()]).unwrap();
        }
    }
    print!("{out}");
    Ok(())
}

pub fn extract_features(
    cfg: &RunConfig,
    source: &DataSource,
    model_path: &Path,
    split: SplitArg,
    output: Option<PathBuf>,
) -> Result<(), CliError> {
    let model = Container::load(model_path)?.model::<f32>()?;
    let samples = load_split(cfg, source, split)?;
    let feats = features_of(&model, &samples)?;
    let labels: Vec<ClassId> = samples.iter().map(|s| s.label).collect();
    let path = match output {
        Some(p) => p,
        None => {
            ensure_dir(&cfg.out_dir)?;
            let name = match split {
                SplitArg::Train => "features_train.csv",
                SplitArg::Test => "features_test.csv",
            };
            cfg.out_dir.join(name)
        }
    };
    write_features_csv(&feats, &labels, &path)?;
    println!("{} rows x {} features -> {}", samples.len(), feats.shape()[1], path.display());
    Ok(())
}

pub fn svm_train(
    cfg: &RunConfig,
    source: &DataSource,
    model_path: &Path,
    features: Option<&Path>,
    output: Option<PathBuf>,
) -> Result<(), CliError> {
    let mut container = Container::load(model_path)?;
    let (feats, labels) = match features {
        Some(p) => load_features_csv(p)?,
        None => {
            let model = container.model::<f32>()?;
            let samples = load_split(cfg, source, SplitArg::Train)?;
            let labels = samples.iter().map(|s| s.label).collect();
            (features_of(&model, &samples)?, labels)
        }
    };
    let svm = fit_svm(&feats, &labels, &cfg.svm())?;
    let train_acc = {
        let preds = svm.predict(&feats)?;
        100.0 * preds.iter().zip(&labels).filter(|(p, l)| p == l).count() as f64 / labels.len() as f64
    };
    container.put_svm(&svm);
    let out = output.unwrap_or_else(|| model_path.to_path_buf());
    container.save(&out)?;
    println!("svm trained on {} samples, train accuracy {train_acc:.2}% -> {}", labels.len(), out.display());
    Ok(())
}

pub fn cluster(cfg: &RunConfig, source: &DataSource, model_path: &Path) -> Result<(), CliError> {
    let model = Container::load(model_path)?.model::<f32>()?;
    let samples = load_split(cfg, source, SplitArg::Train)?;
    let feats = features_of(&model, &samples)?;
    let labels: Vec<ClassId> = samples.iter().map(|s| s.label).collect();
    let centroids = class_centroids(&feats, &labels, NUM_CLASSES)?;
    let points: Vec<Vec<f64>> = centroids.iter().map(|c| c.mean.clone()).collect();
    let kcfg = KMeansConfig {
        seed: cfg.seed,
        max_iter: cfg.kmeans_max_iter,
        tol: cfg.kmeans_tol,
        ..Default::default()
    };
    let fit = kmeans(&points, &kcfg)?;
    let ari = compare_partition(&fit.labels, &ReferencePartition::master_strokes())?;

    let mut csv = String::from("class_id,class_name,cluster_id\n");
    for (c, cluster) in centroids.iter().zip(&fit.labels) {
        writeln!(csv, "{},{},{cluster}", c.class, c.class.name()).unwrap();
    }
    let summary = format!(
        "{{\"k\": {}, \"inertia\": {}, \"iterations\": {}, \"ari_vs_master_strokes\": {}}}\n",
        kcfg.k, fit.inertia, fit.iterations, ari
    );
    ensure_dir(&cfg.out_dir)?;
    write_file(&cfg.out_dir.join("clusters.csv"), &csv)?;
    write_file(&cfg.out_dir.join("clusters_summary.json"), &summary)?;
    print!("{csv}{summary}");
    Ok(())
}

pub fn synth_data(seed: u64, per_class: usize, out: &Path) -> Result<(), CliError> {
    let data = synth_dataset(seed, per_class, NUM_CLASSES)?;
    ensure_dir(out)?;
    write_csv(&data.train, &out.join("train_images.csv"), &out.join("train_labels.csv"))?;
    write_csv(&data.test, &out.join("test_images.csv"), &out.join("test_labels.csv"))?;
    println!("{} train / {} test samples -> {}", data.train.len(), data.test.len(), out.display());
    Ok(())
}
