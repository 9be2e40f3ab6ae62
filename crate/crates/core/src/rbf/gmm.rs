use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kmeans::kmeans_with_rng;
use crate::error::{Error, Result};
use crate::matrix::{squared_distance, RowMatrix};

pub const VARIANCE_FLOOR: f64 = 1e-8;
const COLLAPSE_MASS: f64 = 1e-10;

/// Gaussian mixture with one scalar (isotropic) variance per component.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    pub means: RowMatrix,
    pub variances: Vec<f64>,
    pub mixing_weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GmmFit {
    pub model: GmmModel,
    /// Total log-likelihood of the data under the initial model and after every epoch.
    pub log_likelihood: Vec<f64>,
    /// Components re-seeded after losing all responsibility mass.
    pub reseeded: usize,
}

impl GmmModel {
    fn log_densities(&self, x: &[f64], out: &mut [f64]) {
        let dim = self.means.ncols() as f64;
        for (j, o) in out.iter_mut().enumerate() {
            let v = self.variances[j];
            *o = self.mixing_weights[j].ln()
                - 0.5 * dim * (2.0 * PI * v).ln()
                - squared_distance(self.means.row(j), x) / (2.0 * v);
        }
    }

    /// Total log-likelihood of `points`.
    pub fn log_likelihood(&self, points: &RowMatrix) -> f64 {
        let mut buf = vec![0.0; self.variances.len()];
        points
            .rows()
            .map(|x| {
                self.log_densities(x, &mut buf);
                log_sum_exp(&buf)
            })
            .sum()
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn global_variance(points: &RowMatrix) -> f64 {
    let n = points.nrows();
    let dim = points.ncols();
    let mut mean = vec![0.0; dim];
    for x in points.rows() {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let ss: f64 = points.rows().map(|x| squared_distance(x, &mean)).sum();
    (ss / (n * dim) as f64).max(VARIANCE_FLOOR)
}

/// Fits `k` isotropic Gaussians by EM, starting from a few k-means iterations.
pub fn em_gmm_circular(points: &RowMatrix, k: usize, epochs: usize, kmeans_iters: usize, seed: u64) -> Result<GmmFit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    em_gmm_circular_with_rng(points, k, epochs, kmeans_iters, &mut rng)
}

pub(crate) fn em_gmm_circular_with_rng<R: Rng>(
    points: &RowMatrix,
    k: usize,
    epochs: usize,
    kmeans_iters: usize,
    rng: &mut R,
) -> Result<GmmFit> {
    let n = points.nrows();
    let dim = points.ncols();
    if epochs == 0 {
        return Err(Error::InvalidArgument("EM needs at least one epoch".into()));
    }
    let init = kmeans_with_rng(points, k, kmeans_iters, rng)?;
    let fallback_var = global_variance(points);

    let mut counts = vec![0usize; k];
    let mut spread = vec![0.0; k];
    for (x, &j) in points.rows().zip(&init.assignment) {
        counts[j] += 1;
        spread[j] += squared_distance(x, init.centers.row(j));
    }
    let variances = (0..k)
        .map(|j| {
            if counts[j] < 2 || spread[j] <= 0.0 {
                fallback_var
            } else {
                (spread[j] / (counts[j] * dim) as f64).max(VARIANCE_FLOOR)
            }
        })
        .collect();
    let total: usize = counts.iter().map(|&c| c.max(1)).sum();
    let mixing_weights = counts.iter().map(|&c| c.max(1) as f64 / total as f64).collect();
    let mut model = GmmModel { means: init.centers, variances, mixing_weights };

    let mut resp = RowMatrix::zeros(n, k);
    let mut row_ll = vec![0.0; n];
    let mut log_likelihood = Vec::with_capacity(epochs + 1);
    let mut reseeded = 0;

    for _ in 0..epochs {
        // E-step
        let mut ll = 0.0;
        for (i, x) in points.rows().enumerate() {
            let r = resp.row_mut(i);
            model.log_densities(x, r);
            let lse = log_sum_exp(r);
            r.iter_mut().for_each(|v| *v = (*v - lse).exp());
            row_ll[i] = lse;
            ll += lse;
        }
        log_likelihood.push(ll);

        // M-step
        let mut mass = vec![0.0; k];
        let mut sums = RowMatrix::zeros(k, dim);
        for (x, r) in points.rows().zip(resp.rows()) {
            for j in 0..k {
                mass[j] += r[j];
                for (s, v) in sums.row_mut(j).iter_mut().zip(x) {
                    *s += r[j] * v;
                }
            }
        }
        for j in 0..k {
            if mass[j] > COLLAPSE_MASS {
                for (m, s) in model.means.row_mut(j).iter_mut().zip(sums.row(j)) {
                    *m = s / mass[j];
                }
            }
        }
        let mut ss = vec![0.0; k];
        for (x, r) in points.rows().zip(resp.rows()) {
            for j in 0..k {
                ss[j] += r[j] * squared_distance(x, model.means.row(j));
            }
        }
        for j in 0..k {
            if mass[j] > COLLAPSE_MASS {
                model.variances[j] = (ss[j] / (mass[j] * dim as f64)).max(VARIANCE_FLOOR);
                model.mixing_weights[j] = mass[j] / n as f64;
            } else {
                // worst-explained point becomes the new mean
                let worst = (0..n).min_by(|&a, &b| row_ll[a].total_cmp(&row_ll[b])).unwrap();
                log::warn!("GMM component {j} collapsed; re-seeding at point {worst}");
                model.means.row_mut(j).copy_from_slice(points.row(worst));
                model.variances[j] = fallback_var;
                model.mixing_weights[j] = 1.0 / n as f64;
                reseeded += 1;
            }
        }
        let wsum: f64 = model.mixing_weights.iter().sum();
        model.mixing_weights.iter_mut().for_each(|w| *w /= wsum);
    }
    log_likelihood.push(model.log_likelihood(points));
    Ok(GmmFit { model, log_likelihood, reseeded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn single_component_is_closed_form_mle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pts = RowMatrix::new((0..300).map(|_| rng.random_range(-2.0..3.0)).collect(), 3).unwrap();
        let fit = em_gmm_circular(&pts, 1, 3, 5, 0).unwrap();
        let n = pts.nrows() as f64;
        let mut mean = [0.0; 3];
        for x in pts.rows() {
            for k in 0..3 {
                mean[k] += x[k] / n;
            }
        }
        let var = pts.rows().map(|x| squared_distance(x, &mean)).sum::<f64>() / (n * 3.0);
        for k in 0..3 {
            assert!((fit.model.means.row(0)[k] - mean[k]).abs() < 1e-9);
        }
        assert!((fit.model.variances[0] - var).abs() < 1e-9);
        assert!((fit.model.mixing_weights[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_two_blobs_and_proportions() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let mut rows = Vec::new();
        for _ in 0..140 {
            rows.push([-8.0 + noise.sample(&mut rng), noise.sample(&mut rng)]);
        }
        for _ in 0..60 {
            rows.push([8.0 + noise.sample(&mut rng), 4.0 + noise.sample(&mut rng)]);
        }
        let pts = RowMatrix::from_rows(&rows).unwrap();
        let fit = em_gmm_circular(&pts, 2, 10, 5, 3).unwrap();
        let m = &fit.model;
        let left = if m.means.row(0)[0] < 0.0 { 0 } else { 1 };
        let right = 1 - left;
        assert!(squared_distance(m.means.row(left), &[-8.0, 0.0]).sqrt() < 1.5);
        assert!(squared_distance(m.means.row(right), &[8.0, 4.0]).sqrt() < 1.5);
        assert!((m.mixing_weights[left] - 0.7).abs() < 0.05);
        assert!((m.mixing_weights[right] - 0.3).abs() < 0.05);
    }

    #[test]
    fn log_likelihood_is_monotone() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let pts = RowMatrix::new((0..400).map(|_| rng.random_range(-1.0..1.0)).collect(), 4).unwrap();
            let fit = em_gmm_circular(&pts, 4, 10, 2, seed).unwrap();
            for w in fit.log_likelihood.windows(2) {
                assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "{:?}", fit.log_likelihood);
            }
            let s: f64 = fit.model.mixing_weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let pts = RowMatrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(em_gmm_circular(&pts, 3, 10, 5, 0).is_err());
        assert!(em_gmm_circular(&pts, 1, 0, 5, 0).is_err());
    }
}
