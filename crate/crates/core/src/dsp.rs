//! Training-pair extraction, delta parameters, the LPC baseline and the SEGSNR metric.

use crate::error::{Error, Result};
use crate::matrix::RowMatrix;
use crate::signal::Signal;

/// Default SEGSNR frame: 20 ms at 8 kHz.
pub const DEFAULT_FRAME_LEN: usize = 160;
/// Frames whose reference energy is below this are ignored.
pub const SILENT_FRAME_ENERGY: f64 = 1e-10;
/// Upper clamp on a single frame's SNR.
pub const MAX_FRAME_SNR_DB: f64 = 80.0;

/// First-order differences of a window of `L + 1` consecutive samples.
pub fn compute_delta(window: &[f64], order: usize) -> Result<Vec<f64>> {
    if window.len() != order + 1 {
        return Err(Error::LengthMismatch { left: window.len(), right: order + 1 });
    }
    Ok(window.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Builds one predictor input vector from a chronological window.
///
/// Plain inputs use the last `order` samples of `window`; augmented inputs need
/// `order + 1` samples and produce `[deltas, samples]` of width `2 * order`.
pub(crate) fn assemble_input(window: &[f64], order: usize, augmented: bool, out: &mut Vec<f64>) {
    out.clear();
    let n = window.len();
    if augmented {
        let w = &window[n - order - 1..];
        out.extend(w.windows(2).map(|p| p[1] - p[0]));
        out.extend_from_slice(&w[1..]);
    } else {
        out.extend_from_slice(&window[n - order..]);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub inputs: RowMatrix,
    pub targets: Vec<f64>,
    pub order: usize,
    pub augmented: bool,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    /// Evenly strided subset of at most `max_rows` pairs (first row always kept).
    pub fn subsample(&self, max_rows: usize) -> TrainingSet {
        if max_rows == 0 || self.len() <= max_rows {
            return self.clone();
        }
        let n = self.len();
        let idx: Vec<usize> = (0..max_rows).map(|i| i * n / max_rows).collect();
        TrainingSet {
            inputs: self.inputs.select_rows(&idx),
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
            order: self.order,
            augmented: self.augmented,
        }
    }
}

/// Slides a window over `samples` and collects (input, next sample) pairs.
pub fn make_training_pairs(samples: &[f64], order: usize, augmented: bool) -> Result<TrainingSet> {
    make_training_pairs_from(samples, samples, order, augmented)
}

/// Like [`make_training_pairs`], but inputs are read from `history` and targets from `targets`.
pub fn make_training_pairs_from(
    history: &[f64],
    targets: &[f64],
    order: usize,
    augmented: bool,
) -> Result<TrainingSet> {
    if history.len() != targets.len() {
        return Err(Error::LengthMismatch { left: history.len(), right: targets.len() });
    }
    if order == 0 {
        return Err(Error::InvalidArgument("prediction order must be positive".into()));
    }
    let need = order + usize::from(augmented);
    let n = history.len();
    if n <= need + 1 {
        return Err(Error::TooShort { len: n, needed: need + 1 });
    }
    let dim = if augmented { 2 * order } else { order };
    let rows = n - need;
    let mut data = Vec::with_capacity(rows * dim);
    let mut out = Vec::with_capacity(rows);
    let mut buf = Vec::with_capacity(dim);
    for t in need..n {
        assemble_input(&history[t - need..t], order, augmented, &mut buf);
        data.extend_from_slice(&buf);
        out.push(targets[t]);
    }
    Ok(TrainingSet { inputs: RowMatrix::new(data, dim)?, targets: out, order, augmented })
}

pub fn make_training_set(signal: &Signal, order: usize, augmented: bool) -> Result<TrainingSet> {
    make_training_pairs(signal.samples(), order, augmented)
}

/// Linear predictor: `x(n) ~ sum_k coefficients[k] * x(n - 1 - k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpcModel {
    coefficients: Vec<f64>,
}

impl LpcModel {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidArgument("LPC order must be at least 1".into()));
        }
        Ok(Self { coefficients })
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    /// Coefficients, most recent lag first.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Predicts the sample following `history` (chronological, most recent last).
    pub fn predict(&self, history: &[f64]) -> Result<f64> {
        if history.len() < self.order() {
            return Err(Error::InsufficientHistory { have: history.len(), need: self.order() });
        }
        Ok(self
            .coefficients
            .iter()
            .zip(history.iter().rev())
            .map(|(a, x)| a * x)
            .sum())
    }
}

/// Output of [`levinson_durbin`].
#[derive(Debug, Clone)]
pub struct LevinsonSolution {
    pub model: LpcModel,
    pub reflection: Vec<f64>,
    /// Prediction error energy after each order, starting with order 0.
    pub errors: Vec<f64>,
}

/// Biased autocorrelation `r(k) = sum_n x(n) x(n+k)` for `k = 0..=max_lag`.
pub fn autocorrelation(samples: &[f64], max_lag: usize) -> Vec<f64> {
    (0..=max_lag)
        .map(|k| {
            if k >= samples.len() {
                0.0
            } else {
                samples[..samples.len() - k].iter().zip(&samples[k..]).map(|(a, b)| a * b).sum()
            }
        })
        .collect()
}

/// Solves the Toeplitz normal equations for an order `autocorr.len() - 1` predictor.
pub fn levinson_durbin(autocorr: &[f64]) -> Result<LevinsonSolution> {
    if autocorr.len() < 2 {
        return Err(Error::InvalidArgument("need at least r(0) and r(1)".into()));
    }
    if !(autocorr[0] > 0.0) {
        return Err(Error::InvalidAutocorrelation { order: 0 });
    }
    let order = autocorr.len() - 1;
    let mut a = vec![0.0; order];
    let mut prev = vec![0.0; order];
    let mut reflection = Vec::with_capacity(order);
    let mut errors = Vec::with_capacity(order + 1);
    let mut err = autocorr[0];
    errors.push(err);

    for i in 0..order {
        let mut acc = autocorr[i + 1];
        for j in 0..i {
            acc -= a[j] * autocorr[i - j];
        }
        let k = acc / err;
        prev[..i].copy_from_slice(&a[..i]);
        a[i] = k;
        for j in 0..i {
            a[j] = prev[j] - k * prev[i - 1 - j];
        }
        err *= 1.0 - k * k;
        if !(err > 0.0) || !k.is_finite() {
            return Err(Error::InvalidAutocorrelation { order: i + 1 });
        }
        reflection.push(k);
        errors.push(err);
    }
    Ok(LevinsonSolution { model: LpcModel::new(a)?, reflection, errors })
}

/// Per-frame SNR statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SegSnrReport {
    pub per_frame_db: Vec<f64>,
    pub mean_db: f64,
    pub std_db: f64,
    pub frame_len: usize,
}

/// Arithmetic mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn segsnr_samples(original: &[f64], reconstructed: &[f64], frame_len: usize) -> Result<SegSnrReport> {
    if original.len() != reconstructed.len() {
        return Err(Error::LengthMismatch { left: original.len(), right: reconstructed.len() });
    }
    if frame_len == 0 {
        return Err(Error::InvalidArgument("frame length must be at least 1".into()));
    }
    let per_frame_db: Vec<f64> = original
        .chunks_exact(frame_len)
        .zip(reconstructed.chunks_exact(frame_len))
        .filter_map(|(x, y)| {
            let signal: f64 = x.iter().map(|v| v * v).sum();
            if signal < SILENT_FRAME_ENERGY {
                return None;
            }
            let noise: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            let db = if noise > 0.0 { 10.0 * (signal / noise).log10() } else { MAX_FRAME_SNR_DB };
            Some(db.min(MAX_FRAME_SNR_DB))
        })
        .collect();
    if per_frame_db.is_empty() {
        return Err(Error::NoRetainedFrames);
    }
    let (mean_db, std_db) = mean_std(&per_frame_db);
    Ok(SegSnrReport { per_frame_db, mean_db, std_db, frame_len })
}

pub fn segsnr(original: &Signal, reconstructed: &Signal, frame_len: usize) -> Result<SegSnrReport> {
    segsnr_samples(original.samples(), reconstructed.samples(), frame_len)
}

/// SEGSNR aggregated over several sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSummary {
    /// Mean of per-sentence means.
    pub mean_db: f64,
    /// Population deviation of per-sentence means.
    pub std_db: f64,
    /// Mean over all retained frames of all sentences.
    pub pooled_mean_db: f64,
    /// Population deviation over all retained frames.
    pub pooled_std_db: f64,
    pub sentences: usize,
}

impl CorpusSummary {
    pub fn from_reports(reports: &[SegSnrReport]) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::NoRetainedFrames);
        }
        let means: Vec<f64> = reports.iter().map(|r| r.mean_db).collect();
        let (mean_db, std_db) = mean_std(&means);
        let pooled: Vec<f64> = reports.iter().flat_map(|r| r.per_frame_db.iter().copied()).collect();
        let (pooled_mean_db, pooled_std_db) = mean_std(&pooled);
        Ok(Self { mean_db, std_db, pooled_mean_db, pooled_std_db, sentences: reports.len() })
    }
}
