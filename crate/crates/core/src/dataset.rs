//! Glyph samples: CSV ingestion, resizing to the network input, and a
//! seeded generator of synthetic handwriting-like glyphs.
//!
//! The on-disk format is a pair of headerless CSV files. Each image row
//! holds `S * S` grayscale values in `0..=255` (row-major); the label file
//! has one 1-based class id per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::catalog::{ClassId, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::model::INPUT_SIDE;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const PIXELS: usize = INPUT_SIDE * INPUT_SIDE;

/// One 64x64 grayscale image in `[0, 1]` and its class.
#[derive(Clone, Debug, PartialEq)]
pub struct GlyphSample {
    image: Vec<f32>,
    pub label: ClassId,
}

impl GlyphSample {
    pub fn new(image: Vec<f32>, label: ClassId) -> Result<Self> {
        if image.len() != PIXELS {
            return Err(Error::shape(format!("glyph must have {PIXELS} pixels, got {}", image.len())));
        }
        if image.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::input("glyph pixels must lie in [0, 1]"));
        }
        Ok(GlyphSample { image, label })
    }

    /// Row-major 64x64 pixels.
    pub fn image(&self) -> &[f32] {
        &self.image
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<GlyphSample>,
    pub test: Vec<GlyphSample>,
}

/// Per-class sample counts, indexed by class index.
pub fn class_counts(samples: &[GlyphSample]) -> Vec<usize> {
    let mut counts = vec![0; NUM_CLASSES];
    for s in samples {
        counts[s.label.index()] += 1;
    }
    counts
}

/// Stacks samples into a `[N, 1, 64, 64]` batch.
pub fn to_batch<'a, T: Scalar>(samples: impl IntoIterator<Item = &'a GlyphSample>) -> Result<Tensor<T>> {
    let mut data = Vec::new();
    let mut n = 0;
    for s in samples {
        data.extend(s.image.iter().map(|&v| T::from_f64(v as f64)));
        n += 1;
    }
    Tensor::from_vec(&[n, 1, INPUT_SIDE, INPUT_SIDE], data)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LoadOptions {
    /// Map every pixel `p` to `1 - p` after scaling.
    pub invert: bool,
}

fn format_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Non-blank lines of a CSV file with their 1-based line numbers.
fn csv_rows(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        rows.push((i + 1, line.split(',').map(|f| f.trim().to_string()).collect()));
    }
    Ok(rows)
}

fn parse_field(path: &Path, line: usize, field: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| format_err(path, line, format!("not a number: {field:?}")))
}

/// Parses one image row of `0..=255` values into a 64x64 image in `[0, 1]`.
fn parse_image_row(path: &Path, line: usize, fields: &[String], opts: LoadOptions) -> Result<Vec<f32>> {
    let side = (fields.len() as f64).sqrt().round() as usize;
    if side * side != fields.len() {
        return Err(format_err(
            path,
            line,
            format!("{} columns is not a perfect square", fields.len()),
        ));
    }
    let mut pixels = Vec::with_capacity(fields.len());
    for f in fields {
        let v = parse_field(path, line, f)?;
        if !(0.0..=255.0).contains(&v) {
            return Err(format_err(path, line, format!("pixel value {v} outside 0..255")));
        }
        let p = (v / 255.0) as f32;
        pixels.push(if opts.invert { 1.0 - p } else { p });
    }
    if side == INPUT_SIDE {
        return Ok(pixels);
    }
    resize_to_64(&pixels, side).map_err(|e| format_err(path, line, e.to_string()))
}

/// Reads an image CSV and its companion label CSV.
pub fn load_csv(images: &Path, labels: &Path, opts: LoadOptions) -> Result<Vec<GlyphSample>> {
    let image_rows = csv_rows(images)?;
    let label_rows = csv_rows(labels)?;
    if image_rows.len() != label_rows.len() {
        return Err(format_err(
            labels,
            label_rows.last().map_or(0, |r| r.0),
            format!("{} labels for {} images", label_rows.len(), image_rows.len()),
        ));
    }
    image_rows
        .iter()
        .zip(&label_rows)
        .map(|((iline, ifields), (lline, lfields))| {
            let image = parse_image_row(images, *iline, ifields, opts)?;
            if lfields.len() != 1 {
                return Err(format_err(labels, *lline, "label rows must have exactly one column"));
            }
            let v = parse_field(labels, *lline, &lfields[0])?;
            if v.fract() != 0.0 || v < 1.0 || v > NUM_CLASSES as f64 {
                return Err(format_err(labels, *lline, format!("label {v} outside 1..={NUM_CLASSES}")));
            }
            let label = ClassId::new(v as usize, NUM_CLASSES)?;
            Ok(GlyphSample { image, label })
        })
        .collect()
}

/// Reads an image CSV without labels, e.g. for prediction.
pub fn load_images(images: &Path, opts: LoadOptions) -> Result<Vec<Vec<f32>>> {
    csv_rows(images)?
        .iter()
        .map(|(line, fields)| parse_image_row(images, *line, fields, opts))
        .collect()
}

/// Writes `[N, D]` features as headerless CSV rows, each followed by the
/// sample's label. Values use the shortest exact decimal form.
pub fn write_features_csv(features: &Tensor<f32>, labels: &[ClassId], path: &Path) -> Result<()> {
    let [n, d] = features.shape()[..] else {
        return Err(Error::shape("features must be a matrix"));
    };
    if n != labels.len() {
        return Err(Error::shape(format!("{n} feature rows for {} labels", labels.len())));
    }
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for (row, label) in features.data().chunks(d).zip(labels) {
        let mut line = String::with_capacity(d * 8);
        for v in row {
            line.push_str(&v.to_string());
            line.push(',');
        }
        writeln!(out, "{line}{label}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a file written by [`write_features_csv`].
pub fn load_features_csv(path: &Path) -> Result<(Tensor<f32>, Vec<ClassId>)> {
    let rows = csv_rows(path)?;
    let Some((first_line, first)) = rows.first() else {
        return Err(format_err(path, 0, "no feature rows"));
    };
    if first.len() < 2 {
        return Err(format_err(path, *first_line, "rows need at least one feature and a label"));
    }
    let d = first.len() - 1;
    let mut data = Vec::with_capacity(rows.len() * d);
    let mut labels = Vec::with_capacity(rows.len());
    for (line, fields) in &rows {
        if fields.len() != d + 1 {
            return Err(format_err(path, *line, format!("expected {} columns, got {}", d + 1, fields.len())));
        }
        for f in &fields[..d] {
            let v = f.parse::<f32>().map_err(|_| format_err(path, *line, format!("not a number: {f:?}")))?;
            if !v.is_finite() {
                return Err(format_err(path, *line, "non-finite feature"));
            }
            data.push(v);
        }
        let v = parse_field(path, *line, &fields[d])?;
        if v.fract() != 0.0 || v < 1.0 || v > NUM_CLASSES as f64 {
            return Err(format_err(path, *line, format!("label {v} outside 1..={NUM_CLASSES}")));
        }
        labels.push(ClassId::new(v as usize, NUM_CLASSES)?);
    }
    Ok((Tensor::from_vec(&[rows.len(), d], data)?, labels))
}

/// Writes samples as a 64x64 image CSV (values `round(255 p)`) plus labels.
pub fn write_csv(samples: &[GlyphSample], images: &Path, labels: &Path) -> Result<()> {
    let mut img = BufWriter::new(File::create(images).map_err(|e| Error::io(images, e))?);
    let mut lab = BufWriter::new(File::create(labels).map_err(|e| Error::io(labels, e))?);
    for s in samples {
        let row: Vec<String> = s
            .image
            .iter()
            .map(|&p| ((p as f64 * 255.0).round() as u32).to_string())
            .collect();
        writeln!(img, "{}", row.join(",")).map_err(|e| Error::io(images, e))?;
        writeln!(lab, "{}", s.label).map_err(|e| Error::io(labels, e))?;
    }
    img.flush().map_err(|e| Error::io(images, e))?;
    lab.flush().map_err(|e| Error::io(labels, e))
}

/// Bilinear resize of an `S x S` image to 64x64 with corner-aligned
/// sampling: output pixel `i` reads source coordinate `i (S - 1) / 63`.
pub fn resize_to_64(image: &[f32], side: usize) -> Result<Vec<f32>> {
    if side < 2 {
        return Err(Error::input(format!("cannot resize a {side}x{side} image")));
    }
    if image.len() != side * side {
        return Err(Error::shape(format!("{} pixels is not {side}x{side}", image.len())));
    }
    if side == INPUT_SIDE {
        return Ok(image.to_vec());
    }
    let scale = (side - 1) as f64 / (INPUT_SIDE - 1) as f64;
    let sample = |i: usize| {
        let pos = i as f64 * scale;
        let lo = (pos.floor() as usize).min(side - 2);
        (lo, pos - lo as f64)
    };
    let mut out = Vec::with_capacity(PIXELS);
    for i in 0..INPUT_SIDE {
        let (r, fy) = sample(i);
        for j in 0..INPUT_SIDE {
            let (c, fx) = sample(j);
            let at = |y: usize, x: usize| image[y * side + x] as f64;
            let top = at(r, c) * (1.0 - fx) + at(r, c + 1) * fx;
            let bottom = at(r + 1, c) * (1.0 - fx) + at(r + 1, c + 1) * fx;
            let v = top * (1.0 - fy) + bottom * fy;
            out.push(v as f32);
        }
    }
    // clamp away rounding drift so the output never leaves [min, max]
    let (lo, hi) = image
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    for v in &mut out {
        *v = v.clamp(lo, hi);
    }
    Ok(out)
}

/// A quadratic Bezier stroke through three control points.
#[derive(Clone, Copy, Debug)]
struct Stroke([(f64, f64); 3]);

impl Stroke {
    fn point(&self, t: f64) -> (f64, f64) {
        let [a, b, c] = self.0;
        let u = 1.0 - t;
        (
            u * u * a.0 + 2.0 * u * t * b.0 + t * t * c.0,
            u * u * a.1 + 2.0 * u * t * b.1 + t * t * c.1,
        )
    }
}

/// Fixed per-class shape: a few strokes plus dots.
#[derive(Clone, Debug)]
struct Skeleton {
    strokes: Vec<Stroke>,
    dots: Vec<(f64, f64)>,
}

fn random_skeleton(rng: &mut ChaCha8Rng) -> Skeleton {
    let pt = |rng: &mut ChaCha8Rng| (rng.random_range(14.0..50.0), rng.random_range(14.0..50.0));
    let strokes = (0..rng.random_range(2..=3))
        .map(|_| Stroke([pt(rng), pt(rng), pt(rng)]))
        .collect();
    let dots = (0..rng.random_range(0..=2)).map(|_| pt(rng)).collect();
    Skeleton { strokes, dots }
}

fn dist_to_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

/// Renders one writer-jittered instance of a skeleton.
fn render(skel: &Skeleton, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let angle: f64 = rng.random_range(-0.14..0.14);
    let scale: f64 = rng.random_range(0.9..1.1);
    let shift = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
    let radius: f64 = rng.random_range(1.3..2.2);
    let jitter = Normal::new(0.0, 0.8).expect("valid std");
    let (sin, cos) = angle.sin_cos();
    let c = INPUT_SIDE as f64 / 2.0;
    let warp = |p: (f64, f64), rng: &mut ChaCha8Rng| {
        let (x, y) = (p.0 + jitter.sample(rng) - c, p.1 + jitter.sample(rng) - c);
        (
            c + scale * (cos * x - sin * y) + shift.0,
            c + scale * (sin * x + cos * y) + shift.1,
        )
    };

    let mut segments = Vec::new();
    for stroke in &skel.strokes {
        let ctrl = Stroke([warp(stroke.0[0], rng), warp(stroke.0[1], rng), warp(stroke.0[2], rng)]);
        let pts: Vec<_> = (0..=16).map(|i| ctrl.point(i as f64 / 16.0)).collect();
        segments.extend(pts.windows(2).map(|w| (w[0], w[1])));
    }
    for &d in &skel.dots {
        let p = warp(d, rng);
        segments.push((p, p));
    }

    let noise = Normal::new(0.0, 0.04).expect("valid std");
    let mut image = Vec::with_capacity(PIXELS);
    for y in 0..INPUT_SIDE {
        for x in 0..INPUT_SIDE {
            let p = (x as f64 + 0.5, y as f64 + 0.5);
            let d = segments
                .iter()
                .map(|&(a, b)| dist_to_segment(p, a, b))
                .fold(f64::INFINITY, f64::min);
            let ink = (radius + 0.5 - d).clamp(0.0, 1.0) + noise.sample(rng);
            image.push(ink.clamp(0.0, 1.0) as f32);
        }
    }
    image
}

/// Deterministic synthetic glyph dataset.
///
/// Every class gets a fixed random stroke skeleton; each sample is that
/// skeleton under a random small rotation, scale, shift, control-point
/// jitter, stroke width and pixel noise. Per class, `max(1, round(n / 5))`
/// samples go to the test split and the rest to training.
pub fn synth_dataset(seed: u64, per_class: usize, num_classes: usize) -> Result<DatasetSplit> {
    if per_class < 2 {
        return Err(Error::input("synthetic data needs at least 2 samples per class"));
    }
    if num_classes == 0 || num_classes > NUM_CLASSES {
        return Err(Error::input(format!("num_classes must be in 1..={NUM_CLASSES}")));
    }
    let mut skel_rng = ChaCha8Rng::seed_from_u64(seed);
    let skeletons: Vec<Skeleton> = (0..num_classes).map(|_| random_skeleton(&mut skel_rng)).collect();

    let n_test = ((per_class as f64 * 0.2).round() as usize).max(1);
    let n_train = per_class - n_test;
    let mut split = DatasetSplit::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
    for (c, skel) in skeletons.iter().enumerate() {
        let label = ClassId::from_index(c);
        for i in 0..per_class {
            let sample = GlyphSample {
                image: render(skel, &mut rng),
                label,
            };
            if i < n_train {
                split.train.push(sample);
            } else {
                split.test.push(sample);
            }
        }
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        let mut f = File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn zero_row_becomes_zero_glyph() {
        let dir = tempfile::tempdir().unwrap();
        let img = write(dir.path(), "i.csv", &format!("{}\n", vec!["0"; 1024].join(",")));
        let lab = write(dir.path(), "l.csv", "1\n");
        let s = load_csv(&img, &lab, LoadOptions::default()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].label.get(), 1);
        assert_eq!(s[0].image().len(), 4096);
        assert!(s[0].image().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_size_rows_skip_resize() {
        let dir = tempfile::tempdir().unwrap();
        let row: Vec<String> = (0..4096).map(|i| (i % 256).to_string()).collect();
        let img = write(dir.path(), "i.csv", &(row.join(",") + "\n"));
        let lab = write(dir.path(), "l.csv", "28\n");
        let s = load_csv(&img, &lab, LoadOptions::default()).unwrap();
        for (i, &v) in s[0].image().iter().enumerate() {
            assert_eq!(v, ((i % 256) as f64 / 255.0) as f32);
        }
        let inv = load_csv(&img, &lab, LoadOptions { invert: true }).unwrap();
        assert_eq!(inv[0].image()[255], 0.0);
    }

    #[test]
    fn format_errors() {
        let dir = tempfile::tempdir().unwrap();
        let lab = write(dir.path(), "l.csv", "1\n");
        let bad_cols = write(dir.path(), "a.csv", "0,0,0\n");
        assert!(matches!(load_csv(&bad_cols, &lab, LoadOptions::default()), Err(Error::Format { .. })));
        let bad_val = write(dir.path(), "b.csv", "0,0,0,256\n");
        assert!(matches!(load_csv(&bad_val, &lab, LoadOptions::default()), Err(Error::Format { .. })));
        let two = write(dir.path(), "c.csv", "0,0,0,0\n0,0,0,0\n");
        assert!(matches!(load_csv(&two, &lab, LoadOptions::default()), Err(Error::Format { .. })));
        let ok = write(dir.path(), "d.csv", "0,0,0,0\n");
        let bad_label = write(dir.path(), "m.csv", "29\n");
        assert!(matches!(load_csv(&ok, &bad_label, LoadOptions::default()), Err(Error::Format { .. })));
    }

    #[test]
    fn resize_examples() {
        let c = resize_to_64(&[0.3; 9], 3).unwrap();
        assert!(c.iter().all(|&v| v == 0.3));

        let id: Vec<f32> = (0..4096).map(|i| (i % 97) as f32 / 96.0).collect();
        assert_eq!(resize_to_64(&id, 64).unwrap(), id);

        let ramp = resize_to_64(&[0.0, 1.0, 0.0, 1.0], 2).unwrap();
        for row in ramp.chunks_exact(64) {
            // closed form at corner-aligned coordinates: x = j / 63
            for (j, &v) in row.iter().enumerate() {
                assert!((v as f64 - j as f64 / 63.0).abs() < 1e-6);
            }
            assert!(row.windows(2).all(|w| w[0] < w[1]));
        }
        assert!(resize_to_64(&[1.0], 1).is_err());
    }

    #[test]
    fn synth_is_seeded_and_split_80_20() {
        let a = synth_dataset(5, 10, 28).unwrap();
        assert_eq!(a, synth_dataset(5, 10, 28).unwrap());
        assert_eq!(class_counts(&a.train), vec![8; 28]);
        assert_eq!(class_counts(&a.test), vec![2; 28]);
        assert_ne!(a.train[0], synth_dataset(6, 10, 28).unwrap().train[0]);
        assert!(synth_dataset(1, 1, 28).is_err());
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let split = synth_dataset(9, 2, 3).unwrap();
        let (i1, l1) = (dir.path().join("i1.csv"), dir.path().join("l1.csv"));
        write_csv(&split.train, &i1, &l1).unwrap();
        let once = load_csv(&i1, &l1, LoadOptions::default()).unwrap();
        let (i2, l2) = (dir.path().join("i2.csv"), dir.path().join("l2.csv"));
        write_csv(&once, &i2, &l2).unwrap();
        let twice = load_csv(&i2, &l2, LoadOptions::default()).unwrap();
        assert_eq!(once, twice);
        assert_eq!(std::fs::read(&i1).unwrap(), std::fs::read(&i2).unwrap());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn resize_stays_within_input_range(
                (side, px) in (2usize..20).prop_flat_map(|s| (Just(s), prop::collection::vec(0.0f32..=1.0, s * s)))
            ) {
                let out = resize_to_64(&px, side).unwrap();
                let lo = px.iter().copied().fold(f32::INFINITY, f32::min);
                let hi = px.iter().copied().fold(f32::NEG_INFINITY, f32::max);
                prop_assert!(out.iter().all(|&v| v >= lo && v <= hi));
            }
        }
    }

    #[test]
    fn features_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let vals = vec![0.1f32, -3.5e-7, 1.0 / 3.0, 0.0, 7.25, f32::MIN_POSITIVE];
        let feats = Tensor::from_vec(&[2, 3], vals).unwrap();
        let labels = [ClassId::new(28, 28).unwrap(), ClassId::new(1, 28).unwrap()];
        write_features_csv(&feats, &labels, &path).unwrap();
        let (back, back_labels) = load_features_csv(&path).unwrap();
        assert_eq!(back, feats);
        assert_eq!(back_labels, labels);
    }

    #[test]
    fn ragged_features_are_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(dir.path(), "f.csv", "1,2,3\n1,2\n");
        assert!(matches!(load_features_csv(&path), Err(Error::Format { line: 2, .. })));
    }
}
