//! Grouping of the 28 classes into master-stroke clusters: class centroids
//! in feature space, k-means over them, and agreement with a reference
//! partition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::catalog::{ClassId, ReferencePartition, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Mean feature vector of one class.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassCentroid {
    pub class: ClassId,
    pub mean: Vec<f64>,
}

/// Per-class arithmetic means of `[N, D]` features. Every one of the
/// `num_classes` classes must have at least one sample.
pub fn class_centroids<T: Scalar>(
    features: &Tensor<T>,
    labels: &[ClassId],
    num_classes: usize,
) -> Result<Vec<ClassCentroid>> {
    let [n, d] = features.shape()[..] else {
        return Err(Error::shape(format!("features must be [N, D], got {:?}", features.shape())));
    };
    if labels.len() != n {
        return Err(Error::shape(format!("{} labels for {n} feature rows", labels.len())));
    }
    let mut sums = vec![vec![0.0f64; d]; num_classes];
    let mut counts = vec![0usize; num_classes];
    for (row, label) in features.data().chunks_exact(d).zip(labels) {
        let c = label.index();
        if c >= num_classes {
            return Err(Error::input(format!("label {label} outside 1..={num_classes}")));
        }
        counts[c] += 1;
        for (s, &v) in sums[c].iter_mut().zip(row) {
            *s += v.as_f64();
        }
    }
    sums.into_iter()
        .zip(counts)
        .enumerate()
        .map(|(c, (sum, count))| {
            let class = ClassId::from_index(c);
            if count == 0 {
                return Err(Error::input(format!("class {} ({}) has no samples", class, class.name())));
            }
            Ok(ClassCentroid {
                class,
                mean: sum.into_iter().map(|s| s / count as f64).collect(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once an iteration improves inertia by less than this.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            k: crate::catalog::NUM_GROUPS,
            seed: 0,
            max_iter: 300,
            tol: 1e-8,
        }
    }
}

/// Result of [`kmeans`].
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterAssignment {
    /// 1-based cluster of each input point.
    pub labels: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    /// Sum of squared distances from points to their centers.
    pub inertia: f64,
    /// Inertia after each Lloyd iteration.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest center; ties go to the lowest index.
fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// k-means++ seeding: first center uniform, then each next center drawn
/// with probability proportional to squared distance to the chosen set.
fn plus_plus_seeds(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = d2.iter().rposition(|&d| d > 0.0).expect("total > 0");
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    idx = i;
                    break;
                }
                target -= d;
            }
            idx
        } else {
            // every point coincides with a center already
            rng.random_range(0..points.len())
        };
        centers.push(points[pick].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &centers[centers.len() - 1]));
        }
    }
    centers
}

fn recompute_centers(points: &[Vec<f64>], assign: &[usize], k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assign) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|v| *v /= c as f64);
    }
    sums
}

/// Moves into each empty cluster the point farthest from its own center,
/// taken from clusters that keep at least one member.
fn repair_empty(points: &[Vec<f64>], assign: &mut [usize], centers: &[Vec<f64>], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        assign.iter().for_each(|&a| counts[a] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let victim = (0..points.len())
            .filter(|&i| counts[assign[i]] > 1)
            .map(|i| (i, sq_dist(&points[i], &centers[assign[i]])))
            .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            })
            .map(|(i, _)| i)
            .expect("#points >= k guarantees a donor");
        assign[victim] = empty;
    }
}

fn inertia(points: &[Vec<f64>], assign: &[usize], centers: &[Vec<f64>]) -> f64 {
    points.iter().zip(assign).map(|(p, &a)| sq_dist(p, &centers[a])).sum()
}

/// Lloyd's algorithm from k-means++ seeds.
///
/// Each iteration assigns every point to its nearest center, refills empty
/// clusters, then moves each center to the mean of its points. Returned
/// centers are always the means of their assigned points.
pub fn kmeans(points: &[Vec<f64>], config: &KMeansConfig) -> Result<ClusterAssignment> {
    let k = config.k;
    if k == 0 {
        return Err(Error::input("k must be at least 1"));
    }
    if points.len() < k {
        return Err(Error::input(format!("{} points cannot form {k} clusters", points.len())));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::shape("all points must have the same dimension"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut centers = plus_plus_seeds(points, k, &mut rng);
    let mut assign = vec![0usize; points.len()];
    let mut history: Vec<f64> = Vec::new();
    let mut iterations = 0;

    while iterations < config.max_iter.max(1) {
        iterations += 1;
        for (a, p) in assign.iter_mut().zip(points) {
            *a = nearest(p, &centers).0;
        }
        repair_empty(points, &mut assign, &centers, k);
        centers = recompute_centers(points, &assign, k, dim);
        let current = inertia(points, &assign, &centers);
        let improved = history.last().map_or(f64::INFINITY, |prev| prev - current);
        history.push(current);
        if improved < config.tol {
            break;
        }
    }

    Ok(ClusterAssignment {
        labels: assign.iter().map(|a| a + 1).collect(),
        centers,
        inertia: *history.last().expect("at least one iteration"),
        inertia_history: history,
        iterations,
    })
}

fn choose2(n: usize) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index between two labelings of the same items.
///
/// Returns 1 for identical partitions, including the degenerate case where
/// both are all-singletons or all-in-one.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::input(format!(
            "partitions cover {} and {} items",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::input("empty partitions"));
    }
    let ka = a.iter().max().copied().unwrap_or(0) + 1;
    let kb = b.iter().max().copied().unwrap_or(0) + 1;
    let mut table = vec![vec![0usize; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let index: f64 = table.iter().flatten().map(|&n| choose2(n)).sum();
    let row: f64 = table.iter().map(|r| choose2(r.iter().sum())).sum();
    let col: f64 = (0..kb).map(|j| choose2(table.iter().map(|r| r[j]).sum())).sum();
    let expected = row * col / choose2(a.len());
    let max = (row + col) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// ARI between a class-to-cluster assignment and a reference partition.
pub fn compare_partition(assignment: &[usize], reference: &ReferencePartition) -> Result<f64> {
    if assignment.len() != NUM_CLASSES || reference.groups().len() != NUM_CLASSES {
        return Err(Error::input(format!(
            "both partitions must cover all {NUM_CLASSES} classes"
        )));
    }
    adjusted_rand_index(assignment, reference.groups())
}
