use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{squared_distance, RowMatrix};

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub centers: RowMatrix,
    /// Index of the nearest center for every point.
    pub assignment: Vec<usize>,
    /// Total squared distance to the nearest center: initial value, then one entry per iteration.
    pub distortion: Vec<f64>,
}

/// Lloyd's algorithm started from `k` distinct points drawn with `seed`.
pub fn kmeans(points: &RowMatrix, k: usize, iters: usize, seed: u64) -> Result<KMeansFit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    kmeans_with_rng(points, k, iters, &mut rng)
}

pub(crate) fn nearest(centers: &RowMatrix, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.rows().enumerate() {
        let d = squared_distance(c, x);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign(points: &RowMatrix, centers: &RowMatrix, assignment: &mut [usize]) -> f64 {
    let mut total = 0.0;
    for (a, x) in assignment.iter_mut().zip(points.rows()) {
        let (j, d) = nearest(centers, x);
        *a = j;
        total += d;
    }
    total
}

pub(crate) fn kmeans_with_rng<R: Rng>(points: &RowMatrix, k: usize, iters: usize, rng: &mut R) -> Result<KMeansFit> {
    let n = points.nrows();
    let dim = points.ncols();
    if k == 0 {
        return Err(Error::InvalidArgument("k-means needs at least one cluster".into()));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("k-means with k = {k} on {n} points")));
    }
    let init = rand::seq::index::sample(rng, n, k).into_vec();
    let mut centers = points.select_rows(&init);
    let mut assignment = vec![0; n];
    let mut distortion = vec![assign(points, &centers, &mut assignment)];

    for _ in 0..iters {
        let mut sums = RowMatrix::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for (x, &j) in points.rows().zip(&assignment) {
            counts[j] += 1;
            for (s, v) in sums.row_mut(j).iter_mut().zip(x) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                let inv = 1.0 / counts[j] as f64;
                for (c, s) in centers.row_mut(j).iter_mut().zip(sums.row(j)) {
                    *c = s * inv;
                }
            }
        }
        // empty clusters take over the point farthest from its own center
        for j in (0..k).filter(|&j| counts[j] == 0) {
            let far = (0..n)
                .map(|i| (i, squared_distance(points.row(i), centers.row(assignment[i]))))
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .unwrap();
            centers.row_mut(j).copy_from_slice(points.row(far));
            assignment[far] = j;
        }
        distortion.push(assign(points, &centers, &mut assignment));
    }
    Ok(KMeansFit { centers, assignment, distortion })
}
