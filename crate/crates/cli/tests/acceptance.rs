//! One PASS/FAIL/SKIP line per acceptance criterion.
//!
//! Criteria that need the real AHCD data run only when `AHCD_DIR` points at
//! a directory with the four CSV files (either the `csvTrainImages 13440x1024.csv`
//! naming of the public distribution or the `train_images.csv` naming that
//! `ahcr synth-data` writes). Otherwise they print SKIP.

use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use ahcr::cluster::{adjusted_rand_index, kmeans, KMeansConfig};
use ahcr::dataset::{load_csv, synth_dataset, to_batch, GlyphSample, LoadOptions};
use ahcr::eval::{comparison_table, evaluate, EvalReport, Head};
use ahcr::gradcheck::{numeric_gradient, relative_error};
use ahcr::layers::{softmax_cross_entropy, Conv2d, Dense, Dropout, MaxPool};
use ahcr::optimizer::{accuracy, train_with, SgdConfig};
use ahcr::persist::Container;
use ahcr::svm::{svm_train, SvmTrainConfig};
use ahcr::{ClassId, Mode, Model, ModelConfig, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, ok: String, fail: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(fail)
    }
}

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn dot(y: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn gradients() -> Outcome {
    const STEP: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..8 {
        let (n, c, h, w, f) = (
            rng.random_range(1..=2),
            rng.random_range(1..=3),
            rng.random_range(2..=9),
            rng.random_range(2..=9),
            rng.random_range(1..=3),
        );
        let x = random(&[n, c, h, w], &mut rng);

        let weight = random(&[f, c, 7, 7], &mut rng);
        let bias = random(&[f], &mut rng);
        let conv = Conv2d::from_parts(weight.clone(), bias.clone(), 3).unwrap();
        let (y, cache) = conv.forward(&x).unwrap();
        let r = random(y.shape(), &mut rng);
        let g = conv.backward(&r, &cache, true).unwrap();
        let nx = numeric_gradient(&x, STEP, |x| dot(&conv.forward(x).unwrap().0, &r));
        let nw = numeric_gradient(&weight, STEP, |wt| {
            dot(&Conv2d::from_parts(wt.clone(), bias.clone(), 3).unwrap().forward(&x).unwrap().0, &r)
        });
        worst = worst
            .max(relative_error(g.dx.unwrap().data(), nx.data()))
            .max(relative_error(g.dw.data(), nw.data()));

        let pool = MaxPool::default();
        let (y, cache) = pool.forward(&x).unwrap();
        let r = random(y.shape(), &mut rng);
        let dx = pool.backward(&r, &cache).unwrap();
        let nx = numeric_gradient(&x, STEP, |x| dot(&pool.forward(x).unwrap().0, &r));
        worst = worst.max(relative_error(dx.data(), nx.data()));

        let flat = x.clone().reshape(&[n, c * h * w]).unwrap();
        let dw = random(&[f, c * h * w], &mut rng);
        let db = random(&[f], &mut rng);
        let dense = Dense::from_parts(dw.clone(), db.clone()).unwrap();
        let (y, cache) = dense.forward(&flat).unwrap();
        let r = random(y.shape(), &mut rng);
        let g = dense.backward(&r, &cache).unwrap();
        let nx = numeric_gradient(&flat, STEP, |x| dot(&dense.forward(x).unwrap().0, &r));
        let nw = numeric_gradient(&dw, STEP, |wt| {
            dot(&Dense::from_parts(wt.clone(), db.clone()).unwrap().forward(&flat).unwrap().0, &r)
        });
        worst = worst
            .max(relative_error(g.dx.data(), nx.data()))
            .max(relative_error(g.dw.data(), nw.data()));

        let drop = Dropout::new(0.0).unwrap();
        let (_, cache) = drop.forward_train(&flat, &mut rng).unwrap();
        let r = random(flat.shape(), &mut rng);
        let dx = drop.backward(&r, &cache).unwrap();
        let nx = numeric_gradient(&flat, STEP, |x| dot(&drop.forward_inference(x).0, &r));
        worst = worst.max(relative_error(dx.data(), nx.data()));

        let logits = random(&[n, 28], &mut rng).scale(4.0);
        let labels: Vec<ClassId> = (0..n).map(|_| ClassId::new(rng.random_range(1..=28), 28).unwrap()).collect();
        let (_, dl) = softmax_cross_entropy(&logits, &labels).unwrap();
        let nl = numeric_gradient(&logits, STEP, |l| softmax_cross_entropy(l, &labels).unwrap().0);
        worst = worst.max(relative_error(dl.data(), nl.data()));
    }

    let model = Model::<f64>::init(ModelConfig::with_widths([2, 3, 4]), 5).unwrap();
    let batch = random(&[2, 1, 64, 64], &mut rng).map(f64::abs);
    let labels = [ClassId::new(3, 28).unwrap(), ClassId::new(17, 28).unwrap()];
    let (_, _, grads) = model.loss_and_grads(&batch, &labels, Mode::Inference).unwrap();
    let sizes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
    let (mut analytic, mut numeric) = (Vec::new(), Vec::new());
    for _ in 0..50 {
        let t = rng.random_range(0..sizes.len());
        let i = rng.random_range(0..sizes[t]);
        analytic.push(grads[t].data()[i]);
        let mut probe = model.clone();
        let orig = model.params()[t].data()[i];
        let mut loss_at = |v: f64| {
            probe.params_mut()[t].tensor.data_mut()[i] = v;
            probe.loss_and_grads(&batch, &labels, Mode::Inference).unwrap().0
        };
        numeric.push((loss_at(orig + STEP) - loss_at(orig - STEP)) / (2.0 * STEP));
    }
    let e2e = relative_error(&analytic, &numeric);
    check(
        worst <= 1e-5 && e2e <= 1e-4,
        format!("worst layer rel. err {worst:.2e}, end-to-end {e2e:.2e}"),
        format!("layer rel. err {worst:.2e} (limit 1e-5), end-to-end {e2e:.2e} (limit 1e-4)"),
    )
}

fn shape_pipeline() -> Outcome {
    let model = Model::<f32>::init(ModelConfig::default(), 0).map_err(|e| e.to_string())?;
    let fwd = model
        .forward(&Tensor::zeros(&[1, 1, 64, 64]).unwrap(), Mode::Inference)
        .map_err(|e| e.to_string())?;
    let expected: Vec<Vec<usize>> = vec![
        vec![1, 64, 64],
        vec![128, 64, 64],
        vec![128, 32, 32],
        vec![256, 32, 32],
        vec![256, 16, 16],
        vec![512, 16, 16],
        vec![512, 8, 8],
        vec![1024],
        vec![28],
    ];
    let got = fwd.cache.stage_shapes();
    check(
        got == &expected[..],
        "64x64x1 -> 64x64x128 -> 32x32x128 -> 32x32x256 -> 16x16x256 -> 16x16x512 -> 8x8x512 -> 1024 -> 28".into(),
        format!("chain {got:?}"),
    )
}

fn overfit() -> Outcome {
    let split = synth_dataset(3, 4, 28).unwrap();
    let samples = &split.train[..64];
    let mut model = Model::<f32>::init(ModelConfig::with_widths([8, 16, 32]), 3).unwrap();
    let cfg = SgdConfig {
        max_epochs: 200,
        seed: 3,
        ..Default::default()
    };
    let history = train_with(&mut model, samples, &[], &cfg, |r| {
        if r.train_acc >= 100.0 {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })
    .map_err(|e| e.to_string())?;
    let acc = accuracy(&model, samples).unwrap();
    let epochs = history.epochs.len();
    check(
        acc >= 99.0,
        format!("64 synthetic samples, train accuracy {acc:.2}% after {epochs} epochs"),
        format!("train accuracy {acc:.2}% after {epochs} epochs"),
    )
}

struct Ahcd {
    train: Vec<GlyphSample>,
    test: Vec<GlyphSample>,
}

fn ahcd() -> Option<Result<Ahcd, String>> {
    let dir = PathBuf::from(std::env::var_os("AHCD_DIR")?);
    let pick = |a: &str, b: &str| {
        let p = dir.join(a);
        if p.exists() {
            p
        } else {
            dir.join(b)
        }
    };
    let load = |i: PathBuf, l: PathBuf| load_csv(&i, &l, LoadOptions::default()).map_err(|e| e.to_string());
    Some((|| {
        Ok(Ahcd {
            train: load(
                pick("csvTrainImages 13440x1024.csv", "train_images.csv"),
                pick("csvTrainLabel 13440x1.csv", "train_labels.csv"),
            )?,
            test: load(
                pick("csvTestImages 3360x1024.csv", "test_images.csv"),
                pick("csvTestLabel 3360x1.csv", "test_labels.csv"),
            )?,
        })
    })())
}

fn softmax_report(model: &Model<f32>, test: &[GlyphSample]) -> EvalReport {
    evaluate(Head::Softmax, test, |s| s.label, |part| {
        let mut out = Vec::new();
        for c in part.chunks(64) {
            out.extend(model.predict(&to_batch::<f32>(c)?)?);
        }
        Ok(out)
    })
    .unwrap()
}

fn features(model: &Model<f32>, samples: &[GlyphSample]) -> Tensor<f32> {
    let mut data = Vec::new();
    for c in samples.chunks(64) {
        data.extend_from_slice(model.features(&to_batch::<f32>(c).unwrap()).unwrap().data());
    }
    Tensor::from_vec(&[samples.len(), 1024], data).unwrap()
}

fn svm_report(model: &Model<f32>, train: &[GlyphSample], test: &[GlyphSample]) -> (EvalReport, EvalReport, String) {
    let labels: Vec<ClassId> = train.iter().map(|s| s.label).collect();
    let svm = svm_train(&features(model, train), &labels, &SvmTrainConfig::default()).unwrap();
    let soft = softmax_report(model, test);
    let truth: Vec<ClassId> = test.iter().map(|s| s.label).collect();
    let svm_pred = svm.predict(&features(model, test)).unwrap();
    let svm_rep = EvalReport::from_predictions(Head::Svm, &truth, &svm_pred).unwrap();
    let table = comparison_table(&[soft.clone(), svm_rep.clone()]);
    (soft, svm_rep, table)
}

fn train_desk(train: &[GlyphSample], test: &[GlyphSample], epochs: usize) -> Model<f32> {
    let mut model = Model::<f32>::init(ModelConfig::with_widths([16, 32, 64]), 0).unwrap();
    let cfg = SgdConfig {
        max_epochs: epochs,
        ..Default::default()
    };
    train_with(&mut model, train, test, &cfg, |r| {
        eprintln!("  epoch {} loss {:.4} train {:.2} test {}", r.epoch, r.train_loss, r.train_acc, r.test_acc.map_or("-".into(), |a| format!("{a:.2}")));
        ControlFlow::Continue(())
    })
    .unwrap();
    model
}

fn reduced_scale(data: &Option<Result<Ahcd, String>>, model: &mut Option<Model<f32>>) -> Option<Outcome> {
    let data = match data.as_ref()? {
        Ok(d) => d,
        Err(e) => return Some(Err(e.clone())),
    };
    if data.train.len() != 13440 || data.test.len() != 3360 {
        return Some(Err(format!("expected 13440/3360 samples, found {}/{}", data.train.len(), data.test.len())));
    }
    let m = train_desk(&data.train, &data.test, 15);
    let crr = softmax_report(&m, &data.test).crr();
    *model = Some(m);
    Some(check(
        crr >= 85.0,
        format!("widths 16/32/64, 15 epochs: test CRR {crr:.2}%"),
        format!("test CRR {crr:.2}% < 85%"),
    ))
}

fn svm_head(data: &Option<Result<Ahcd, String>>, model: Option<Model<f32>>) -> Outcome {
    // Toy separable set: {(0,1) -> 1, (1,0) -> 2} x 20 jittered copies.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for _ in 0..20 {
        for (p, label) in [((0.0, 1.0), 1), ((1.0, 0.0), 2)] {
            x.push(p.0 + rng.random_range(-0.1..0.1));
            x.push(p.1 + rng.random_range(-0.1..0.1));
            y.push(ClassId::new(label, 2).unwrap());
        }
    }
    let x = Tensor::<f64>::from_vec(&[40, 2], x).unwrap();
    let cfg = SvmTrainConfig {
        dropout_rate: 0.0,
        num_classes: 2,
        epochs: 100,
        batch_size: 8,
        learning_rate: 0.05,
        ..Default::default()
    };
    let toy = svm_train(&x, &y, &cfg).unwrap();
    let toy_acc = 100.0 * toy.predict(&x).unwrap().iter().zip(&y).filter(|(p, t)| p == t).count() as f64 / 40.0;
    if toy_acc < 100.0 {
        return Err(format!("toy train accuracy {toy_acc:.2}%"));
    }

    let (soft, svm, table, scale) = match (data, model) {
        (Some(Ok(d)), Some(m)) => {
            let (s, v, t) = svm_report(&m, &d.train, &d.test);
            (s, v, t, "AHCD desk scale")
        }
        (Some(Err(e)), _) => return Err(e.clone()),
        _ => {
            let split = synth_dataset(5, 20, 28).unwrap();
            let m = train_desk(&split.train, &[], 2);
            let (s, v, t) = svm_report(&m, &split.train, &split.test);
            (s, v, t, "synthetic stand-in, AHCD_DIR not set")
        }
    };
    print!("{table}");
    check(
        svm.crr() >= soft.crr() - 2.0,
        format!("toy 100%; {scale}: svm {:.2}% vs softmax {:.2}%", svm.crr(), soft.crr()),
        format!("{scale}: svm {:.2}% below softmax {:.2}% - 2", svm.crr(), soft.crr()),
    )
}

fn clustering() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let points: Vec<Vec<f64>> = (0..300).map(|_| (0..6).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
    let fit = kmeans(&points, &KMeansConfig { tol: 0.0, ..Default::default() }).unwrap();
    if fit.inertia_history.windows(2).any(|w| w[1] > w[0]) {
        return Err("inertia increased".into());
    }
    for (c, center) in fit.centers.iter().enumerate() {
        let members: Vec<&Vec<f64>> = points.iter().zip(&fit.labels).filter(|(_, &l)| l == c + 1).map(|(p, _)| p).collect();
        for d in 0..6 {
            let mean = members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64;
            if (mean - center[d]).abs() > 1e-9 * mean.abs().max(center[d].abs()).max(f64::MIN_POSITIVE) {
                return Err(format!("center {c} is not its members' mean"));
            }
        }
    }

    // Two blobs, brute force over every 2-partition.
    let blob: Vec<Vec<f64>> = (0..12)
        .map(|i| {
            let base = if i < 6 { [0.0, 0.0] } else { [5.0, 1.0] };
            vec![base[0] + rng.random_range(-0.5..0.5), base[1] + rng.random_range(-0.5..0.5)]
        })
        .collect();
    let sse = |labels: &[usize]| -> f64 {
        (0..2)
            .map(|c| {
                let m: Vec<&Vec<f64>> = blob.iter().zip(labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
                let mean: Vec<f64> = (0..2).map(|d| m.iter().map(|p| p[d]).sum::<f64>() / m.len() as f64).collect();
                m.iter().map(|p| (p[0] - mean[0]).powi(2) + (p[1] - mean[1]).powi(2)).sum::<f64>()
            })
            .sum()
    };
    let best = (1u32..(1 << 12) - 1)
        .map(|mask| sse(&(0..12).map(|i| (mask >> i & 1) as usize).collect::<Vec<_>>()))
        .fold(f64::INFINITY, f64::min);
    let two = kmeans(&blob, &KMeansConfig { k: 2, ..Default::default() }).unwrap();
    if (two.inertia - best).abs() > 1e-9 * best {
        return Err(format!("two-blob inertia {} vs optimum {best}", two.inertia));
    }

    let centers: Vec<Vec<f64>> = (0..13).map(|_| (0..16).map(|_| rng.random_range(-100.0..100.0)).collect()).collect();
    let mut planted = Vec::new();
    let mut truth = Vec::new();
    for (g, c) in centers.iter().enumerate() {
        for _ in 0..10 {
            planted.push(c.iter().map(|v| v + rng.random_range(-0.5..0.5)).collect());
            truth.push(g);
        }
    }
    let fit = kmeans(&planted, &KMeansConfig::default()).unwrap();
    let ari = adjusted_rand_index(&fit.labels, &truth).unwrap();
    check(
        ari == 1.0,
        format!("monotone inertia, centers = means, two-blob optimum, planted ARI {ari}"),
        format!("planted ARI {ari}"),
    )
}

fn evaluation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let n = rng.random_range(1..300);
        let items: Vec<(ClassId, ClassId)> = (0..n)
            .map(|_| {
                let t = ClassId::new(rng.random_range(1..=28), 28).unwrap();
                let p = if rng.random_bool(0.7) { t } else { ClassId::new(rng.random_range(1..=28), 28).unwrap() };
                (t, p)
            })
            .collect();
        let run = |xs: &[(ClassId, ClassId)]| {
            evaluate(Head::Softmax, xs, |x| x.0, |part| Ok(part.iter().map(|x| x.1).collect())).unwrap()
        };
        let r = run(&items);
        if (r.crr() + r.ecr() - 100.0).abs() > 1e-9 {
            return Err("CRR + ECR != 100".into());
        }
        let trace: usize = (0..28).map(|i| r.confusion[i][i]).sum();
        if (100.0 * trace as f64 / n as f64 - r.crr()).abs() > 1e-9 {
            return Err("confusion trace disagrees with CRR".into());
        }
        let mut shuffled = items.clone();
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        if run(&shuffled) != r {
            return Err("evaluate depends on sample order".into());
        }
    }
    Ok("CRR + ECR = 100, trace matches CRR, order invariant (20 random cases)".into())
}

fn ahcr(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ahcr"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("ahcr {args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn pipeline_run(root: &Path, tag: &str) -> Result<PathBuf, String> {
    let out = root.join(tag);
    let s = |p: PathBuf| p.to_str().unwrap().to_string();
    let data = s(root.join("data"));
    let model = s(out.join("model.ahcr"));
    let o = s(out.clone());
    let common = ["--data", &data, "--seed", "7", "--out", &o];
    ahcr(&[&["train", "--widths", "4,4,8", "--epochs", "2"][..], &common[..]].concat())?;
    ahcr(&[&["svm-train", "--model", &model, "--set", "svm_epochs=3"][..], &common[..]].concat())?;
    ahcr(&[&["eval", "--model", &model, "--head", "both", "--by-cluster"][..], &common[..]].concat())?;
    ahcr(&[&["extract-features", "--model", &model][..], &common[..]].concat())?;
    ahcr(&[&["cluster", "--model", &model][..], &common[..]].concat())?;
    Ok(out)
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = root.path().join("data");
    ahcr(&["synth-data", "--seed", "2", "--per-class", "5", "--out", data.to_str().unwrap()])?;
    let a = pipeline_run(root.path(), "a")?;
    let b = pipeline_run(root.path(), "b")?;
    let mut names: Vec<String> = std::fs::read_dir(&a)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "config.txt")
        .collect();
    names.sort();
    for n in &names {
        let x = std::fs::read(a.join(n)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.join(n)).map_err(|e| e.to_string())?;
        if x != y {
            return Err(format!("{n} differs between runs"));
        }
    }
    Ok(format!("{} outputs byte-identical across two runs: {}", names.len(), names.join(", ")))
}

fn persistence() -> Outcome {
    let model = Model::<f32>::init(ModelConfig::with_widths([2, 3, 4]), 9).unwrap();
    let mut c = Container::new();
    c.put_model(&model);
    let bytes = c.to_bytes();
    let back = Container::from_bytes(&bytes).map_err(|e| e.to_string())?.model::<f32>().unwrap();
    let exact = back
        .params()
        .iter()
        .zip(model.params())
        .all(|(a, b)| a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    if !exact {
        return Err("round trip is not bit-exact".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let mut bad = bytes.clone();
        let i = rng.random_range(0..bad.len());
        bad[i] ^= 1 << rng.random_range(0..8);
        if Container::from_bytes(&bad).is_ok() {
            return Err(format!("flipped byte {i} went undetected"));
        }
    }
    Ok(format!("bit-exact round trip of {} bytes; 200 random bit flips detected", bytes.len()))
}

fn main() {
    let mut failed = false;
    let mut report = |n: usize, name: &str, outcome: Option<Outcome>, started: Instant| {
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Some(Ok(msg)) => println!("criterion {n} {name}: PASS ({msg}) [{secs:.1}s]"),
            Some(Err(msg)) => {
                failed = true;
                println!("criterion {n} {name}: FAIL ({msg}) [{secs:.1}s]");
            }
            None => println!("criterion {n} {name}: SKIP (set AHCD_DIR to the AHCD CSV directory)"),
        }
    };

    let t = Instant::now();
    report(1, "gradient correctness", Some(gradients()), t);
    let t = Instant::now();
    report(2, "shape pipeline", Some(shape_pipeline()), t);
    let t = Instant::now();
    report(3, "overfit smoke", Some(overfit()), t);

    let data = ahcd();
    let mut desk_model = None;
    let t = Instant::now();
    report(4, "reduced-scale end-to-end", reduced_scale(&data, &mut desk_model), t);
    let t = Instant::now();
    report(5, "svm head", Some(svm_head(&data, desk_model)), t);
    let t = Instant::now();
    report(6, "k-means", Some(clustering()), t);
    let t = Instant::now();
    report(7, "evaluation identities", Some(evaluation()), t);
    let t = Instant::now();
    report(8, "determinism", Some(determinism()), t);
    let t = Instant::now();
    report(9, "persistence", Some(persistence()), t);

    if failed {
        std::process::exit(1);
    }
}
