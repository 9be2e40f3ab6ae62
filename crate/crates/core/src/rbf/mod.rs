//! Radial basis function networks and their training algorithms.
//!
//! A network has `S` Gaussian units followed by one linear output:
//!
//! ```text
//! y(x) = out_bias + sum_i out_weights[i] * radbas(|centers[i] - x| * biases[i])
//! radbas(n) = exp(-n^2)
//! ```

mod gmm;
mod kmeans;
mod lstsq;
mod train;

pub use gmm::{em_gmm_circular, GmmFit, GmmModel};
pub use kmeans::{kmeans, KMeansFit};
pub use lstsq::{lstsq_min_norm, solve_output_layer};
pub use train::{train_rbf1, train_rbf2, Rbf1Fit, Rbf2Config, Rbf2Fit, DEFAULT_KMEANS_ITERS};

use crate::error::{Error, Result};
use crate::matrix::{squared_distance, RowMatrix};

/// Input at which [`radbas`] equals one half (`sqrt(ln 2)` to four places).
pub const HALF_AMPLITUDE_INPUT: f64 = 0.8326;

#[inline]
pub fn radbas(n: f64) -> f64 {
    (-n * n).exp()
}

/// Bias that puts a unit's half-amplitude point at distance `spread` from its center.
pub fn spread_to_bias(spread: f64) -> Result<f64> {
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(Error::InvalidArgument(format!("spread must be positive, got {spread}")));
    }
    Ok(HALF_AMPLITUDE_INPUT / spread)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbfNetwork {
    centers: RowMatrix,
    biases: Vec<f64>,
    out_weights: Vec<f64>,
    out_bias: f64,
}

impl RbfNetwork {
    pub fn new(centers: RowMatrix, biases: Vec<f64>, out_weights: Vec<f64>, out_bias: f64) -> Result<Self> {
        let s = centers.nrows();
        if biases.len() != s {
            return Err(Error::DimensionMismatch { expected: s, got: biases.len() });
        }
        if out_weights.len() != s {
            return Err(Error::DimensionMismatch { expected: s, got: out_weights.len() });
        }
        if let Some(b) = biases.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(Error::InvalidArgument(format!("RBF bias must be positive, got {b}")));
        }
        Ok(Self { centers, biases, out_weights, out_bias })
    }

    pub fn num_neurons(&self) -> usize {
        self.biases.len()
    }

    pub fn input_dim(&self) -> usize {
        self.centers.ncols()
    }

    pub fn centers(&self) -> &RowMatrix {
        &self.centers
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn out_weights(&self) -> &[f64] {
        &self.out_weights
    }

    pub fn out_bias(&self) -> f64 {
        self.out_bias
    }

    /// Hidden-layer outputs for `x`.
    pub fn activations(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self
            .centers
            .rows()
            .zip(&self.biases)
            .map(|(c, b)| (-squared_distance(c, x) * b * b).exp())
            .collect())
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> f64 {
        let mut y = self.out_bias;
        for ((c, b), w) in self.centers.rows().zip(&self.biases).zip(&self.out_weights) {
            y += w * (-squared_distance(c, x) * b * b).exp();
        }
        y
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        Ok(())
    }
}

/// Shorthand for [`RbfNetwork::forward`].
pub fn rbf_forward(net: &RbfNetwork, x: &[f64]) -> Result<f64> {
    net.forward(x)
}
