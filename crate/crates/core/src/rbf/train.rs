use std::collections::HashSet;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::gmm::{em_gmm_circular_with_rng, GmmModel};
use super::lstsq::solve_output_layer;
use super::{spread_to_bias, RbfNetwork};
use crate::dsp::TrainingSet;
use crate::error::{Error, Result};
use crate::matrix::{dot, squared_distance, RowMatrix};

pub const DEFAULT_KMEANS_ITERS: usize = 5;

/// Relative squared norm below which a candidate column adds nothing new.
const DEPENDENT_COLUMN: f64 = 1e-12;

/// Result of greedy (RBF-1) training.
#[derive(Debug, Clone)]
pub struct Rbf1Fit {
    pub network: RbfNetwork,
    /// Training-set row index of each committed center, in commit order.
    pub selected: Vec<usize>,
    /// Training MSE after each commit.
    pub mse_history: Vec<f64>,
}

/// Design matrix `[activations..., 1]` for the given units.
fn design_matrix(inputs: &RowMatrix, centers: &RowMatrix, biases: &[f64], with_bias: bool) -> RowMatrix {
    let s = centers.nrows();
    let cols = s + usize::from(with_bias);
    let mut data = Vec::with_capacity(inputs.nrows() * cols);
    for x in inputs.rows() {
        for (c, b) in centers.rows().zip(biases) {
            data.push((-squared_distance(c, x) * b * b).exp());
        }
        if with_bias {
            data.push(1.0);
        }
    }
    RowMatrix::new(data, cols).expect("non-empty design")
}

fn fit_output_layer(
    data: &TrainingSet,
    centers: RowMatrix,
    biases: Vec<f64>,
    with_bias: bool,
) -> Result<(RbfNetwork, f64)> {
    let design = design_matrix(&data.inputs, &centers, &biases, with_bias);
    let mut w = solve_output_layer(&design, &data.targets)?;
    let out_bias = if with_bias { w.pop().unwrap() } else { 0.0 };
    let mse = design
        .rows()
        .zip(&data.targets)
        .map(|(r, t)| {
            let e = t - dot(&r[..w.len()], &w) - out_bias;
            e * e
        })
        .sum::<f64>()
        / data.len() as f64;
    Ok((RbfNetwork::new(centers, biases, w, out_bias)?, mse))
}

/// Greedy forward selection of centers among the training inputs.
///
/// Every iteration commits the candidate whose addition (with the output layer re-solved by
/// least squares) gives the lowest training error. Candidate scores come from the residual
/// projected onto each candidate column orthogonalized against the committed ones, which
/// equals the error reduction of the full re-solve.
pub fn train_rbf1(data: &TrainingSet, max_neurons: usize, spread: f64, goal_mse: f64) -> Result<Rbf1Fit> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if max_neurons == 0 {
        return Err(Error::InvalidArgument("need at least one neuron".into()));
    }
    let bias = spread_to_bias(spread)?;
    let n = data.len();
    let inputs = &data.inputs;

    let mut seen = HashSet::new();
    let candidates: Vec<usize> = (0..n)
        .filter(|&i| seen.insert(inputs.row(i).iter().map(|v| v.to_bits()).collect::<Vec<_>>()))
        .collect();

    // orthogonalized candidate activation columns, one contiguous block of n per candidate
    let b2 = bias * bias;
    let mut cols = vec![0.0; candidates.len() * n];
    for (col, &c) in cols.chunks_exact_mut(n).zip(&candidates) {
        let center = inputs.row(c);
        for (v, x) in col.iter_mut().zip(inputs.rows()) {
            *v = (-squared_distance(center, x) * b2).exp();
        }
    }
    let orig_norm: Vec<f64> = cols.chunks_exact(n).map(|c| dot(c, c)).collect();

    // the output bias column is always in the model
    let ones = vec![1.0 / (n as f64).sqrt(); n];
    let mut residual = data.targets.clone();
    let proj = dot(&ones, &residual);
    residual.iter_mut().zip(&ones).for_each(|(r, q)| *r -= proj * q);
    for col in cols.chunks_exact_mut(n) {
        let p = dot(&ones, col);
        col.iter_mut().zip(&ones).for_each(|(v, q)| *v -= p * q);
    }

    let mut active = vec![true; candidates.len()];
    let mut selected = Vec::new();
    let mut mse_history = Vec::new();
    let mut best_fit = None;

    while selected.len() < max_neurons {
        let mut best: Option<(usize, f64)> = None;
        for (ci, col) in cols.chunks_exact(n).enumerate() {
            if !active[ci] {
                continue;
            }
            let norm = dot(col, col);
            if norm <= DEPENDENT_COLUMN * orig_norm[ci] || norm == 0.0 {
                active[ci] = false;
                continue;
            }
            let p = dot(col, &residual);
            let gain = p * p / norm;
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((ci, gain));
            }
        }
        let Some((ci, _)) = best else {
            log::debug!("no independent candidates left after {} neurons", selected.len());
            break;
        };
        active[ci] = false;
        selected.push(candidates[ci]);

        let mut q = cols[ci * n..(ci + 1) * n].to_vec();
        let norm = dot(&q, &q).sqrt();
        q.iter_mut().for_each(|v| *v /= norm);
        let p = dot(&q, &residual);
        residual.iter_mut().zip(&q).for_each(|(r, qv)| *r -= p * qv);
        for (cj, col) in cols.chunks_exact_mut(n).enumerate() {
            if active[cj] {
                let p = dot(&q, col);
                col.iter_mut().zip(&q).for_each(|(v, qv)| *v -= p * qv);
            }
        }

        let centers = inputs.select_rows(&selected);
        let (net, mse) = fit_output_layer(data, centers, vec![bias; selected.len()], true)?;
        mse_history.push(mse);
        best_fit = Some(net);
        if mse <= goal_mse {
            break;
        }
    }

    let network = best_fit.ok_or_else(|| Error::InvalidArgument("no usable training vectors".into()))?;
    if selected.len() < max_neurons && mse_history.last().is_some_and(|&m| m > goal_mse) {
        log::info!("RBF-1 stopped at {} of {} requested neurons", selected.len(), max_neurons);
    }
    Ok(Rbf1Fit { network, selected, mse_history })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rbf2Config {
    pub neurons: usize,
    pub em_epochs: usize,
    pub kmeans_iters: usize,
    /// Include a constant column (output bias) in the least-squares fit.
    pub output_bias: bool,
}

impl Default for Rbf2Config {
    fn default() -> Self {
        Self { neurons: 20, em_epochs: 10, kmeans_iters: DEFAULT_KMEANS_ITERS, output_bias: true }
    }
}

#[derive(Debug, Clone)]
pub struct Rbf2Fit {
    pub network: RbfNetwork,
    pub gmm: GmmModel,
    pub log_likelihood: Vec<f64>,
    /// Shared Gaussian variance of the hidden units.
    pub variance: f64,
    pub mse: f64,
}

/// Mixture-model centers, a shared width from the widest center pair, least-squares output.
pub fn train_rbf2(data: &TrainingSet, config: &Rbf2Config, seed: u64) -> Result<Rbf2Fit> {
    let s = config.neurons;
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if s == 0 {
        return Err(Error::InvalidArgument("need at least one neuron".into()));
    }
    if s > data.len() {
        return Err(Error::InvalidArgument(format!("{s} neurons for {} training vectors", data.len())));
    }
    let dim = data.input_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Standard-normal initial parameters with unit variances; every one of them is replaced
    // below, but drawing them keeps the random stream aligned with the documented procedure.
    let _initial_centers: Vec<f64> = (0..s * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let _initial_weights: Vec<f64> = (0..=s).map(|_| StandardNormal.sample(&mut rng)).collect();
    let _initial_variances = vec![1.0; s];

    let mut em_rng = ChaCha8Rng::seed_from_u64(rng.next_u64());
    let gmm = em_gmm_circular_with_rng(&data.inputs, s, config.em_epochs, config.kmeans_iters, &mut em_rng)?;
    let centers = gmm.model.means.clone();

    let mut variance = 0.0f64;
    for i in 0..s {
        for j in i + 1..s {
            variance = variance.max(squared_distance(centers.row(i), centers.row(j)));
        }
    }
    if variance <= 0.0 {
        // single center (or coincident centers): mean squared distance of the data to it
        variance = data.inputs.rows().map(|x| squared_distance(x, centers.row(0))).sum::<f64>() / data.len() as f64;
    }
    if !(variance > 0.0) {
        return Err(Error::InvalidArgument("training inputs are all identical".into()));
    }
    let bias = 1.0 / (variance.sqrt() * std::f64::consts::SQRT_2);
    let (network, mse) = fit_output_layer(data, centers, vec![bias; s], config.output_bias)?;
    Ok(Rbf2Fit { network, gmm: gmm.model, log_likelihood: gmm.log_likelihood, variance, mse })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_set(seed: u64, n: usize, dim: usize) -> TrainingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = RowMatrix::new((0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect(), dim).unwrap();
        let targets = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        TrainingSet { inputs, targets, order: dim, augmented: false }
    }

    /// Training MSE of the given centers with a normal-equations output solve.
    fn brute_mse(data: &TrainingSet, centers: &[usize], bias: f64) -> f64 {
        let c = data.inputs.select_rows(centers);
        let design = design_matrix(&data.inputs, &c, &vec![bias; centers.len()], true);
        let p = design.ncols();
        let mut ata = vec![vec![0.0; p + 1]; p];
        for (r, t) in design.rows().zip(&data.targets) {
            for i in 0..p {
                for j in 0..p {
                    ata[i][j] += r[i] * r[j];
                }
                ata[i][p] += r[i] * t;
            }
        }
        for c in 0..p {
            let piv = (c..p).max_by(|&a, &b| ata[a][c].abs().total_cmp(&ata[b][c].abs())).unwrap();
            ata.swap(c, piv);
            for i in c + 1..p {
                let f = ata[i][c] / ata[c][c];
                for j in c..=p {
                    ata[i][j] -= f * ata[c][j];
                }
            }
        }
        let mut w = vec![0.0; p];
        for i in (0..p).rev() {
            let s: f64 = (i + 1..p).map(|j| ata[i][j] * w[j]).sum();
            w[i] = (ata[i][p] - s) / ata[i][i];
        }
        design.rows().zip(&data.targets).map(|(r, t)| (t - dot(r, &w)).powi(2)).sum::<f64>() / data.len() as f64
    }

    #[test]
    fn greedy_choice_matches_exhaustive_search() {
        for seed in 0..10 {
            let data = random_set(seed, 25, 3);
            let spread = 0.8;
            let bias = spread_to_bias(spread).unwrap();
            let fit = train_rbf1(&data, 3, spread, 0.0).unwrap();
            let mut chosen: Vec<usize> = Vec::new();
            for &sel in &fit.selected {
                let best = (0..data.len())
                    .filter(|i| !chosen.contains(i))
                    .map(|i| {
                        let mut c = chosen.clone();
                        c.push(i);
                        (i, brute_mse(&data, &c, bias))
                    })
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap();
                assert_eq!(sel, best.0, "seed {seed}");
                chosen.push(sel);
            }
        }
    }

    #[test]
    fn interpolates_with_one_center_per_input() {
        let data = random_set(3, 15, 2);
        let fit = train_rbf1(&data, 15, 0.5, 0.0).unwrap();
        assert!(*fit.mse_history.last().unwrap() <= 1e-6);
    }

    #[test]
    fn mse_non_increasing_and_biases_equal() {
        let data = random_set(4, 60, 4);
        let fit = train_rbf1(&data, 12, 0.6, 0.0).unwrap();
        assert_eq!(fit.network.num_neurons(), 12);
        assert!(fit.mse_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let b = spread_to_bias(0.6).unwrap();
        assert!(fit.network.biases().iter().all(|&x| x == b));
    }

    #[test]
    fn duplicate_inputs_cap_neuron_count() {
        let mut data = random_set(5, 4, 2);
        let dup = data.inputs.select_rows(&[0, 1, 0, 1, 0, 1]);
        data.inputs = dup;
        data.targets = vec![0.1, 0.4, 0.1, 0.4, 0.1, 0.4];
        let fit = train_rbf1(&data, 5, 0.5, 0.0).unwrap();
        assert!(fit.network.num_neurons() <= 2);
    }

    #[test]
    fn goal_mse_stops_early() {
        let data = random_set(6, 40, 3);
        let fit = train_rbf1(&data, 20, 0.7, 1e9).unwrap();
        assert_eq!(fit.network.num_neurons(), 1);
        let fit = train_rbf1(&data, 7, 0.7, 0.0).unwrap();
        assert_eq!(fit.network.num_neurons(), 7);
    }

    #[test]
    fn rbf2_is_deterministic() {
        let data = random_set(7, 200, 3);
        let cfg = Rbf2Config { neurons: 6, ..Default::default() };
        let a = train_rbf2(&data, &cfg, 42).unwrap();
        let b = train_rbf2(&data, &cfg, 42).unwrap();
        assert_eq!(a.network, b.network);
    }

    #[test]
    fn rbf2_two_centers_share_pair_width() {
        let data = random_set(8, 100, 2);
        let cfg = Rbf2Config { neurons: 2, ..Default::default() };
        let fit = train_rbf2(&data, &cfg, 1).unwrap();
        let c = fit.network.centers();
        let d = squared_distance(c.row(0), c.row(1)).sqrt();
        for &b in fit.network.biases() {
            assert!((b - 1.0 / (d * std::f64::consts::SQRT_2)).abs() < 1e-12);
        }
    }

    #[test]
    fn rbf2_single_center_uses_data_spread() {
        let data = random_set(9, 50, 2);
        let cfg = Rbf2Config { neurons: 1, ..Default::default() };
        let fit = train_rbf2(&data, &cfg, 1).unwrap();
        let c = fit.network.centers().row(0).to_vec();
        let v = data.inputs.rows().map(|x| squared_distance(x, &c)).sum::<f64>() / 50.0;
        assert!((fit.variance - v).abs() < 1e-12);
    }

    #[test]
    fn rbf2_recovers_known_output_layer() {
        let mut data = random_set(10, 150, 3);
        let cfg = Rbf2Config { neurons: 5, ..Default::default() };
        let probe = train_rbf2(&data, &cfg, 5).unwrap();
        let net = probe.network;
        let truth = RbfNetwork::new(
            net.centers().clone(),
            net.biases().to_vec(),
            vec![0.5, -1.0, 0.25, 2.0, -0.75],
            0.1,
        )
        .unwrap();
        data.targets = data.inputs.rows().map(|x| truth.forward(x).unwrap()).collect();
        let fit = train_rbf2(&data, &cfg, 5).unwrap();
        assert!(fit.mse <= 1e-8, "{}", fit.mse);
    }

    #[test]
    fn rbf2_rejects_too_many_neurons() {
        let data = random_set(11, 5, 2);
        let cfg = Rbf2Config { neurons: 6, ..Default::default() };
        assert!(train_rbf2(&data, &cfg, 0).is_err());
    }
}
