//! Two-way k-means over one video's hidden representations.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{sq_dist, Matrix};
use crate::rng::RngHandle;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iters: 100,
            tol: 1e-6,
        }
    }
}

impl KMeansConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_iters == 0 || !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "invalid k-means settings {self:?}"
            )));
        }
        Ok(())
    }
}

/// Output of a two-way clustering. Label `0` belongs to `centers[0]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterResult {
    pub labels: Vec<u8>,
    pub centers: [Vec<f64>; 2],
    /// Euclidean distance between the two centers.
    pub distance: f64,
    /// Within-cluster sum of squared distances.
    pub sse: f64,
    /// All points coincide (or there is only one), so no real split exists.
    pub degenerate: bool,
}

impl ClusterResult {
    pub fn cluster_sizes(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - ones, ones]
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}

fn means(points: &Matrix, labels: &[u8]) -> [Vec<f64>; 2] {
    let d = points.cols();
    let mut sums = [vec![0.0; d], vec![0.0; d]];
    let mut counts = [0usize; 2];
    for (row, &l) in points.row_iter().zip(labels) {
        let l = l as usize;
        counts[l] += 1;
        for (s, &v) in sums[l].iter_mut().zip(row) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            let n = c as f64;
            s.iter_mut().for_each(|v| *v /= n);
        }
    }
    sums
}

/// Within-cluster SSE of a labeling, using the labeling's own means.
pub fn partition_sse(points: &Matrix, labels: &[u8]) -> f64 {
    let centers = means(points, labels);
    points
        .row_iter()
        .zip(labels)
        .map(|(row, &l)| sq_dist(row, &centers[l as usize]))
        .sum()
}

fn degenerate_result(points: &Matrix) -> ClusterResult {
    let p = points.row(0).to_vec();
    ClusterResult {
        labels: vec![0; points.rows()],
        centers: [p.clone(), p],
        distance: 0.0,
        sse: 0.0,
        degenerate: true,
    }
}

fn check_finite(points: &Matrix) -> Result<()> {
    match points.first_non_finite() {
        Some((row, col)) => Err(Error::NonFinite { row, col }),
        None => Ok(()),
    }
}

/// Result for a single-point video: one cluster, zero distance.
pub fn cluster_degenerate(points: &Matrix) -> Result<ClusterResult> {
    if points.rows() != 1 {
        return Err(Error::DegenerateInput(format!(
            "single-point clustering called with {} points",
            points.rows()
        )));
    }
    check_finite(points)?;
    Ok(degenerate_result(points))
}

fn seed_plus_plus<R: Rng>(points: &Matrix, rng: &mut R) -> [Vec<f64>; 2] {
    let m = points.rows();
    let first = rng.random_range(0..m);
    let c0 = points.row(first);
    let weights: Vec<f64> = points.row_iter().map(|r| sq_dist(r, c0)).collect();
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    let mut second = weights.iter().rposition(|&w| w > 0.0).unwrap_or(first);
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 && target < w {
            second = i;
            break;
        }
        target -= w;
    }
    [c0.to_vec(), points.row(second).to_vec()]
}

fn assign(points: &Matrix, centers: &[Vec<f64>; 2], labels: &mut [u8]) {
    for (row, l) in points.row_iter().zip(labels.iter_mut()) {
        *l = u8::from(sq_dist(row, &centers[1]) < sq_dist(row, &centers[0]));
    }
}

/// If one side is empty, move the point farthest from the surviving center
/// into it.
fn repair_empty(points: &Matrix, centers: &[Vec<f64>; 2], labels: &mut [u8]) {
    let ones = labels.iter().filter(|&&l| l == 1).count();
    let empty = match ones {
        0 => 1u8,
        n if n == labels.len() => 0u8,
        _ => return,
    };
    let survivor = &centers[1 - empty as usize];
    let mut far = 0;
    let mut far_d = f64::NEG_INFINITY;
    for (i, row) in points.row_iter().enumerate() {
        let d = sq_dist(row, survivor);
        if d > far_d {
            far_d = d;
            far = i;
        }
    }
    labels[far] = empty;
}

fn lloyd<R: Rng>(points: &Matrix, cfg: &KMeansConfig, rng: &mut R) -> (Vec<u8>, [Vec<f64>; 2]) {
    let mut centers = seed_plus_plus(points, rng);
    let mut labels = vec![0u8; points.rows()];
    let mut prev: Option<Vec<u8>> = None;
    for _ in 0..cfg.max_iters {
        assign(points, &centers, &mut labels);
        repair_empty(points, &centers, &mut labels);
        let next = means(points, &labels);
        let shift = next
            .iter()
            .zip(&centers)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centers = next;
        if prev.as_deref() == Some(&labels[..]) || shift < cfg.tol {
            break;
        }
        prev = Some(labels.clone());
    }
    (labels, centers)
}

/// Single-point transfers: move a point to the other cluster whenever that
/// strictly lowers the SSE. Escapes Lloyd fixed points that are not optimal.
fn hartigan(points: &Matrix, labels: &mut [u8], centers: &mut [Vec<f64>; 2], max_passes: usize) {
    let mut counts = [0usize; 2];
    labels.iter().for_each(|&l| counts[l as usize] += 1);
    for _ in 0..max_passes {
        let mut moved = false;
        for (i, row) in points.row_iter().enumerate() {
            let a = labels[i] as usize;
            let b = 1 - a;
            if counts[a] < 2 {
                continue;
            }
            let (na, nb) = (counts[a] as f64, counts[b] as f64);
            let gain = na / (na - 1.0) * sq_dist(row, &centers[a]);
            let cost = nb / (nb + 1.0) * sq_dist(row, &centers[b]);
            if cost < gain * (1.0 - 1e-12) {
                for (c, &v) in centers[a].iter_mut().zip(row) {
                    *c = (*c * na - v) / (na - 1.0);
                }
                for (c, &v) in centers[b].iter_mut().zip(row) {
                    *c = (*c * nb + v) / (nb + 1.0);
                }
                counts[a] -= 1;
                counts[b] += 1;
                labels[i] = b as u8;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    // Recompute exactly rather than carry incremental rounding.
    *centers = means(points, labels);
}

/// Two-way k-means: k-means++ seeding, Lloyd iterations refined by
/// single-point transfers, best of
/// `cfg.restarts` runs by SSE. Output orientation is canonical: label 0 is
/// the cluster whose center is lexicographically smaller.
pub fn kmeans2(points: &Matrix, rng: RngHandle, cfg: &KMeansConfig) -> Result<ClusterResult> {
    cfg.validate()?;
    if points.rows() < 2 {
        return Err(Error::DegenerateInput(format!(
            "two-way clustering needs at least 2 points, got {}",
            points.rows()
        )));
    }
    check_finite(points)?;
    let first = points.row(0);
    if points.row_iter().all(|r| r == first) {
        return Ok(degenerate_result(points));
    }

    let mut r = rng.stream();
    let mut best: Option<(f64, Vec<u8>, [Vec<f64>; 2])> = None;
    for _ in 0..cfg.restarts {
        let (mut labels, mut centers) = lloyd(points, cfg, &mut r);
        hartigan(points, &mut labels, &mut centers, cfg.max_iters);
        let sse: f64 = points
            .row_iter()
            .zip(&labels)
            .map(|(row, &l)| sq_dist(row, &centers[l as usize]))
            .sum();
        if best.as_ref().is_none_or(|(b, _, _)| sse < *b) {
            best = Some((sse, labels, centers));
        }
    }
    let (sse, mut labels, mut centers) = best.expect("restarts >= 1");
    if lexicographic(&centers[1], &centers[0]) == Ordering::Less {
        centers.swap(0, 1);
        labels.iter_mut().for_each(|l| *l ^= 1);
    }
    let distance = sq_dist(&centers[0], &centers[1]).sqrt();
    Ok(ClusterResult {
        labels,
        centers,
        distance,
        sse,
        degenerate: false,
    })
}

/// Gradient of the center distance with respect to every point, holding the
/// assignments fixed:
/// `(C0 - C1) / (d * |cluster 0|)` for points in cluster 0 and the negation
/// scaled by `1 / |cluster 1|` for points in cluster 1.
pub fn center_distance_gradient(points: &Matrix, result: &ClusterResult) -> Result<Matrix> {
    if result.degenerate || result.distance <= 0.0 {
        return Err(Error::DegenerateInput(
            "center distance gradient undefined at d = 0".into(),
        ));
    }
    if result.labels.len() != points.rows() || result.centers[0].len() != points.cols() {
        return Err(Error::Shape("cluster result does not match points".into()));
    }
    let sizes = result.cluster_sizes();
    let d = result.distance;
    let diff: Vec<f64> = result.centers[0]
        .iter()
        .zip(&result.centers[1])
        .map(|(a, b)| a - b)
        .collect();
    let mut g = Matrix::zeros(points.rows(), points.cols());
    for (i, &l) in result.labels.iter().enumerate() {
        let scale = if l == 0 {
            1.0 / (d * sizes[0] as f64)
        } else {
            -1.0 / (d * sizes[1] as f64)
        };
        for (o, &v) in g.row_mut(i).iter_mut().zip(&diff) {
            *o = v * scale;
        }
    }
    Ok(g)
}
