//! Sample predictors (LPC or RBF, optionally delta-augmented) and committees of them.

use crate::bitstream::ByteReader;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dsp::{assemble_input, autocorrelation, levinson_durbin, make_training_pairs_from, LpcModel, TrainingSet};
use crate::error::{Error, Result};
use crate::model_io::{read_model, write_model, Model};
use crate::rbf::{train_rbf1, train_rbf2, Rbf2Config};
use crate::signal::Signal;

/// Training rows kept for greedy RBF-1 by default; its cost grows with the square of this.
pub const DEFAULT_RBF1_TRAIN_ROWS: usize = 1000;

/// Default power of the white noise added to training inputs, relative to the signal power.
///
/// In the closed loop a predictor sees reconstructed samples, i.e. the signal plus
/// quantization noise. Training on clean inputs alone yields predictors with a high noise
/// gain that can lock the 2-bit loop into a self-sustained oscillation.
pub const DEFAULT_INPUT_NOISE: f64 = 0.03;

/// Seed offset keeping the input-noise stream apart from training draws.
const INPUT_NOISE_STREAM: u64 = 0x6E01_5E00;

/// Anything the ADPCM loop can ask for the next sample.
pub trait SamplePredictor {
    /// Raw prediction order `L` shared by all models involved.
    fn order(&self) -> usize;
    /// Number of past samples consumed.
    fn history_len(&self) -> usize;
    /// Prediction for the sample after `history` (chronological), clamped to [-1, 1].
    fn predict(&self, history: &[f64]) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    model: Model,
    order: usize,
    augmented: bool,
}

impl Predictor {
    pub fn new(model: Model, order: usize, augmented: bool) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("prediction order must be positive".into()));
        }
        if augmented && matches!(model, Model::Lpc(_)) {
            return Err(Error::InvalidArgument("delta inputs are only supported for RBF predictors".into()));
        }
        let expected = if augmented { 2 * order } else { order };
        if model.input_dim() != expected {
            return Err(Error::DimensionMismatch { expected, got: model.input_dim() });
        }
        Ok(Self { model, order, augmented })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn is_augmented(&self) -> bool {
        self.augmented
    }

    /// Unclamped model output; `history` must hold at least `history_len()` samples.
    fn raw_prediction(&self, history: &[f64], buf: &mut Vec<f64>) -> f64 {
        match &self.model {
            Model::Lpc(m) => m.coefficients().iter().zip(history.iter().rev()).map(|(a, x)| a * x).sum(),
            Model::Rbf(net) => {
                assemble_input(history, self.order, self.augmented, buf);
                net.forward_unchecked(buf)
            }
        }
    }

    fn check_history(&self, history: &[f64]) -> Result<()> {
        if history.len() < self.history_len() {
            return Err(Error::InsufficientHistory { have: history.len(), need: self.history_len() });
        }
        Ok(())
    }

    fn write(&self, out: &mut Vec<u8>) -> Result<()> {
        out.push(u8::from(self.augmented));
        let order = u16::try_from(self.order)
            .map_err(|_| Error::InvalidArgument(format!("order {} too large", self.order)))?;
        out.extend_from_slice(&order.to_le_bytes());
        write_model(&self.model, out)
    }

    fn read(reader: &mut ByteReader<'_>) -> Result<Self> {
        let augmented = match reader.u8("delta flag")? {
            0 => false,
            1 => true,
            v => return Err(Error::InvalidHeader(format!("bad delta flag {v}"))),
        };
        let order = reader.u16("predictor order")? as usize;
        let model = read_model(reader)?;
        Self::new(model, order, augmented).map_err(|e| Error::InvalidHeader(e.to_string()))
    }
}

impl SamplePredictor for Predictor {
    fn order(&self) -> usize {
        self.order
    }

    fn history_len(&self) -> usize {
        self.order + usize::from(self.augmented)
    }

    fn predict(&self, history: &[f64]) -> Result<f64> {
        self.check_history(history)?;
        let mut buf = Vec::new();
        Ok(clamp_unit(self.raw_prediction(history, &mut buf)))
    }
}

#[inline]
fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-1.0, 1.0)
    }
}

/// Predictors whose outputs are averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct Committee {
    members: Vec<Predictor>,
}

impl Committee {
    pub fn new(members: Vec<Predictor>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(Error::InvalidArgument("committee needs at least one member".into()));
        };
        if let Some(p) = members.iter().find(|p| p.order != first.order) {
            return Err(Error::InvalidArgument(format!(
                "committee members disagree on order ({} vs {})",
                first.order, p.order
            )));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[Predictor] {
        &self.members
    }
}

impl SamplePredictor for Committee {
    fn order(&self) -> usize {
        self.members[0].order
    }

    fn history_len(&self) -> usize {
        self.members.iter().map(|p| p.history_len()).max().unwrap()
    }

    fn predict(&self, history: &[f64]) -> Result<f64> {
        for p in &self.members {
            p.check_history(history)?;
        }
        let mut buf = Vec::new();
        let sum: f64 = self.members.iter().map(|p| clamp_unit(p.raw_prediction(history, &mut buf))).sum();
        Ok(clamp_unit(sum / self.members.len() as f64))
    }
}

/// The predictor carried by a coded stream: a single model or a committee.
#[derive(Debug, Clone, PartialEq)]
pub enum CodecPredictor {
    Single(Predictor),
    Committee(Committee),
}

const PAYLOAD_SINGLE: u8 = 0;
const PAYLOAD_COMMITTEE: u8 = 1;

impl CodecPredictor {
    pub fn members(&self) -> &[Predictor] {
        match self {
            CodecPredictor::Single(p) => std::slice::from_ref(p),
            CodecPredictor::Committee(c) => c.members(),
        }
    }

    /// Header payload: `0 | member` or `1 | count u8 | member...`, each member being
    /// `delta u8 | order u16 | model`.
    pub fn to_payload(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        match self {
            CodecPredictor::Single(p) => {
                out.push(PAYLOAD_SINGLE);
                p.write(&mut out)?;
            }
            CodecPredictor::Committee(c) => {
                out.push(PAYLOAD_COMMITTEE);
                let count = u8::try_from(c.members.len())
                    .map_err(|_| Error::InvalidArgument("at most 255 committee members".into()))?;
                out.push(count);
                for p in &c.members {
                    p.write(&mut out)?;
                }
            }
        }
        Ok(out)
    }

    pub fn from_payload(bytes: &[u8]) -> Result<Self> {
        let mut reader = ByteReader::new(bytes);
        let predictor = match reader.u8("predictor kind")? {
            PAYLOAD_SINGLE => CodecPredictor::Single(Predictor::read(&mut reader)?),
            PAYLOAD_COMMITTEE => {
                let count = reader.u8("committee size")?;
                let members = (0..count).map(|_| Predictor::read(&mut reader)).collect::<Result<Vec<_>>>()?;
                CodecPredictor::Committee(Committee::new(members).map_err(|e| Error::InvalidHeader(e.to_string()))?)
            }
            v => return Err(Error::InvalidHeader(format!("unknown predictor kind {v}"))),
        };
        if reader.remaining() > 0 {
            return Err(Error::TrailingData(reader.remaining()));
        }
        Ok(predictor)
    }
}

impl From<Predictor> for CodecPredictor {
    fn from(p: Predictor) -> Self {
        CodecPredictor::Single(p)
    }
}

impl From<Committee> for CodecPredictor {
    fn from(c: Committee) -> Self {
        CodecPredictor::Committee(c)
    }
}

impl SamplePredictor for CodecPredictor {
    fn order(&self) -> usize {
        match self {
            CodecPredictor::Single(p) => p.order(),
            CodecPredictor::Committee(c) => c.order(),
        }
    }

    fn history_len(&self) -> usize {
        match self {
            CodecPredictor::Single(p) => p.history_len(),
            CodecPredictor::Committee(c) => c.history_len(),
        }
    }

    fn predict(&self, history: &[f64]) -> Result<f64> {
        match self {
            CodecPredictor::Single(p) => p.predict(history),
            CodecPredictor::Committee(c) => c.predict(history),
        }
    }
}

/// Allocation-free prediction used inside the codec loop.
pub(crate) struct PredictionScratch {
    buf: Vec<f64>,
}

impl PredictionScratch {
    pub(crate) fn new() -> Self {
        Self { buf: Vec::with_capacity(64) }
    }

    /// `history` must already hold `history_len()` samples.
    pub(crate) fn predict(&mut self, p: &CodecPredictor, history: &[f64]) -> f64 {
        match p {
            CodecPredictor::Single(p) => clamp_unit(p.raw_prediction(history, &mut self.buf)),
            CodecPredictor::Committee(c) => {
                let sum: f64 =
                    c.members.iter().map(|m| clamp_unit(m.raw_prediction(history, &mut self.buf))).sum();
                clamp_unit(sum / c.members.len() as f64)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PredictorKind {
    Lpc,
    Rbf1 { neurons: usize, spread: f64, goal_mse: f64 },
    Rbf2(Rbf2Config),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictorConfig {
    pub kind: PredictorKind,
    pub order: usize,
    pub augmented: bool,
    /// Cap on training rows (evenly strided subset); 0 keeps every row.
    pub max_train_rows: usize,
    /// Relative power of white noise added to the inputs (not the targets) during training;
    /// 0 trains on the clean signal.
    pub input_noise: f64,
}

impl PredictorConfig {
    pub fn lpc(order: usize) -> Self {
        Self { kind: PredictorKind::Lpc, order, augmented: false, max_train_rows: 0, input_noise: DEFAULT_INPUT_NOISE }
    }

    pub fn rbf1(order: usize, neurons: usize, spread: f64) -> Self {
        Self {
            kind: PredictorKind::Rbf1 { neurons, spread, goal_mse: 0.0 },
            order,
            augmented: false,
            max_train_rows: DEFAULT_RBF1_TRAIN_ROWS,
            input_noise: DEFAULT_INPUT_NOISE,
        }
    }

    pub fn rbf2(order: usize, neurons: usize, em_epochs: usize) -> Self {
        Self {
            kind: PredictorKind::Rbf2(Rbf2Config { neurons, em_epochs, ..Default::default() }),
            order,
            augmented: false,
            max_train_rows: 0,
            input_noise: DEFAULT_INPUT_NOISE,
        }
    }

    pub fn with_delta(mut self, augmented: bool) -> Self {
        self.augmented = augmented;
        self
    }

    pub fn with_input_noise(mut self, input_noise: f64) -> Self {
        self.input_noise = input_noise;
        self
    }
}

/// Training pairs whose inputs come from the signal plus white noise of relative power
/// `input_noise`; targets stay clean.
fn training_data(config: &PredictorConfig, signal: &Signal, seed: u64) -> Result<TrainingSet> {
    let x = signal.samples();
    let data = if config.input_noise > 0.0 {
        let power = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        let scale = (config.input_noise * power).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ INPUT_NOISE_STREAM);
        let noisy: Vec<f64> =
            x.iter().map(|v| v + scale * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        make_training_pairs_from(&noisy, x, config.order, config.augmented)?
    } else {
        make_training_pairs_from(x, x, config.order, config.augmented)?
    };
    Ok(data.subsample(config.max_train_rows))
}

fn check_input_noise(input_noise: f64) -> Result<()> {
    if input_noise.is_finite() && input_noise >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("input noise must be finite and non-negative, got {input_noise}")))
    }
}

/// Trains a predictor on the whole signal, with inputs optionally perturbed as configured.
pub fn fit_predictor(config: &PredictorConfig, signal: &Signal, seed: u64) -> Result<Predictor> {
    let order = config.order;
    check_input_noise(config.input_noise)?;
    match config.kind {
        PredictorKind::Lpc => {
            if config.augmented {
                return Err(Error::InvalidArgument("delta inputs are only supported for RBF predictors".into()));
            }
            if signal.len() <= order + 1 {
                return Err(Error::TooShort { len: signal.len(), needed: order + 1 });
            }
            // expected effect of white input noise on the normal equations
            let mut r = autocorrelation(signal.samples(), order);
            r[0] *= 1.0 + config.input_noise;
            let sol = levinson_durbin(&r)?;
            Predictor::new(Model::Lpc(sol.model), order, false)
        }
        PredictorKind::Rbf1 { neurons, spread, goal_mse } => {
            let data = training_data(config, signal, seed)?;
            let fit = train_rbf1(&data, neurons, spread, goal_mse)?;
            Predictor::new(Model::Rbf(fit.network), order, config.augmented)
        }
        PredictorKind::Rbf2(cfg) => {
            let data = training_data(config, signal, seed)?;
            let fit = train_rbf2(&data, &cfg, seed)?;
            Predictor::new(Model::Rbf(fit.network), order, config.augmented)
        }
    }
}

/// Fits every member (member `i` gets `seed + i`) and wraps them: one config gives a
/// single predictor, several give a committee.
pub fn fit_codec_predictor(configs: &[PredictorConfig], signal: &Signal, seed: u64) -> Result<CodecPredictor> {
    let members = configs
        .iter()
        .enumerate()
        .map(|(i, c)| fit_predictor(c, signal, seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    match members.len() {
        0 => Err(Error::InvalidArgument("no predictor configured".into())),
        1 => Ok(CodecPredictor::Single(members.into_iter().next().unwrap())),
        _ => Ok(CodecPredictor::Committee(Committee::new(members)?)),
    }
}

/// Convenience for a linear model with explicit coefficients.
pub fn lpc_predictor(coefficients: Vec<f64>) -> Result<Predictor> {
    let order = coefficients.len();
    Predictor::new(Model::Lpc(LpcModel::new(coefficients)?), order, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::RowMatrix;
    use crate::dsp::make_training_pairs;
    use crate::rbf::RbfNetwork;
    use proptest::prelude::*;

    fn rbf_single(center: Vec<f64>, w: f64, order: usize, augmented: bool) -> Predictor {
        let d = center.len();
        let net = RbfNetwork::new(RowMatrix::new(center, d).unwrap(), vec![1.0], vec![w], 0.0).unwrap();
        Predictor::new(Model::Rbf(net), order, augmented).unwrap()
    }

    #[test]
    fn unit_lpc_repeats_last_sample() {
        let p = lpc_predictor(vec![1.0]).unwrap();
        assert_eq!(p.predict(&[0.9, -0.3, 0.4]).unwrap(), 0.4);
    }

    #[test]
    fn rbf_at_center() {
        let p = rbf_single(vec![0.1, 0.2], 0.7, 2, false);
        assert_eq!(p.predict(&[0.5, 0.1, 0.2]).unwrap(), 0.7);
    }

    #[test]
    fn augmented_input_assembly() {
        // history [0.1, 0.2, 0.4], L = 2: deltas [0.1, 0.2], samples [0.2, 0.4]
        let x = [0.1, 0.2, 0.4];
        let expected = vec![x[1] - x[0], x[2] - x[1], x[1], x[2]];
        let p = rbf_single(expected.clone(), 0.7, 2, true);
        assert_eq!(p.predict(&x).unwrap(), 0.7);
        let mut buf = Vec::new();
        assemble_input(&x, 2, true, &mut buf);
        assert_eq!(buf, expected);
    }

    #[test]
    fn insufficient_history() {
        let p = rbf_single(vec![0.0; 4], 0.7, 2, true);
        assert!(matches!(p.predict(&[0.1, 0.2]), Err(Error::InsufficientHistory { have: 2, need: 3 })));
    }

    #[test]
    fn output_is_clamped() {
        let p = lpc_predictor(vec![3.0]).unwrap();
        assert_eq!(p.predict(&[0.9]).unwrap(), 1.0);
        let p = rbf_single(vec![0.0], -5.0, 1, false);
        assert_eq!(p.predict(&[0.0]).unwrap(), -1.0);
    }

    #[test]
    fn committee_averages() {
        let a = lpc_predictor(vec![0.5]).unwrap();
        let b = lpc_predictor(vec![1.0]).unwrap();
        let one = Committee::new(vec![a.clone()]).unwrap();
        assert_eq!(one.predict(&[0.4]).unwrap(), a.predict(&[0.4]).unwrap());
        let two = Committee::new(vec![a.clone(), b.clone()]).unwrap();
        assert!((two.predict(&[0.4]).unwrap() - 0.3).abs() < 1e-15);
        let same = Committee::new(vec![b.clone(), b.clone()]).unwrap();
        assert_eq!(same.predict(&[0.4]).unwrap(), 0.4);
        assert!(Committee::new(vec![]).is_err());
    }

    #[test]
    fn committee_rejects_mixed_orders() {
        let a = lpc_predictor(vec![0.5]).unwrap();
        let b = lpc_predictor(vec![0.5, 0.1]).unwrap();
        assert!(Committee::new(vec![a, b]).is_err());
    }

    proptest! {
        #[test]
        fn committee_permutation_invariant(ws in prop::collection::vec(-2.0f64..2.0, 2..5), h in -1.0f64..1.0) {
            let members: Vec<Predictor> = ws.iter().map(|&w| lpc_predictor(vec![w]).unwrap()).collect();
            let mut rev = members.clone();
            rev.reverse();
            let a = Committee::new(members).unwrap().predict(&[h]).unwrap();
            let b = Committee::new(rev).unwrap().predict(&[h]).unwrap();
            prop_assert!((a - b).abs() < 1e-15);
            prop_assert!((-1.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn payload_round_trip() {
        let a = lpc_predictor(vec![0.5, -0.2]).unwrap();
        let b = rbf_single(vec![0.1, 0.2, 0.3, 0.4], 0.3, 2, true);
        for p in [CodecPredictor::from(a.clone()), Committee::new(vec![a.clone(), b.clone()]).unwrap().into()] {
            let bytes = p.to_payload().unwrap();
            assert_eq!(CodecPredictor::from_payload(&bytes).unwrap(), p);
        }
        let one: CodecPredictor = Committee::new(vec![a]).unwrap().into();
        assert!(matches!(CodecPredictor::from_payload(&one.to_payload().unwrap()).unwrap(), CodecPredictor::Committee(_)));
        assert!(CodecPredictor::from_payload(&[7]).is_err());
    }

    fn ar2_signal(n: usize, seed: u64) -> Signal {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut x = vec![0.0f64; n];
        for i in 2..n {
            x[i] = 1.2 * x[i - 1] - 0.5 * x[i - 2] + rng.random_range(-1.0..1.0);
        }
        crate::signal::normalize(&x, 8000).unwrap()
    }

    /// Covariance-method least squares via Gaussian elimination on the normal equations.
    fn normal_equations_lpc(x: &[f64], order: usize) -> Vec<f64> {
        let mut a = vec![vec![0.0; order + 1]; order];
        for t in order..x.len() {
            for i in 0..order {
                for j in 0..order {
                    a[i][j] += x[t - 1 - i] * x[t - 1 - j];
                }
                a[i][order] += x[t - 1 - i] * x[t];
            }
        }
        for c in 0..order {
            let p = (c..order).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, p);
            for r in 0..order {
                if r != c {
                    let f = a[r][c] / a[c][c];
                    for k in c..=order {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
        }
        (0..order).map(|i| a[i][order] / a[i][i]).collect()
    }

    #[test]
    fn clean_lpc_fit_recovers_ar2() {
        let s = ar2_signal(200_000, 1);
        let p = fit_predictor(&PredictorConfig::lpc(10).with_input_noise(0.0), &s, 0).unwrap();
        let Model::Lpc(m) = p.model() else { panic!() };
        let oracle = normal_equations_lpc(s.samples(), 10);
        for (c, o) in m.coefficients().iter().zip(&oracle) {
            assert!((c - o).abs() < 1e-3, "{c} vs {o}");
        }
        assert!((m.coefficients()[0] - 1.2).abs() < 0.02);
        assert!((m.coefficients()[1] + 0.5).abs() < 0.02);
        assert!(m.coefficients()[2..].iter().all(|c| c.abs() < 0.02));
    }

    #[test]
    fn lpc_input_noise_loads_the_diagonal() {
        let s = ar2_signal(5000, 5);
        let fit = |lambda: f64| {
            let p = fit_predictor(&PredictorConfig::lpc(6).with_input_noise(lambda), &s, 0).unwrap();
            let Model::Lpc(m) = p.model().clone() else { panic!() };
            m
        };
        let mut r = autocorrelation(s.samples(), 6);
        assert_eq!(fit(0.0), levinson_durbin(&r).unwrap().model);
        r[0] *= 1.1;
        assert_eq!(fit(0.1), levinson_durbin(&r).unwrap().model);
        // noise shrinks the predictor's white-noise gain
        let gain = |m: &LpcModel| m.coefficients().iter().map(|c| c * c).sum::<f64>();
        assert!(gain(&fit(0.1)) < gain(&fit(0.0)));
        assert!(fit_predictor(&PredictorConfig::lpc(6).with_input_noise(-1.0), &s, 0).is_err());
        assert!(fit_predictor(&PredictorConfig::lpc(6).with_input_noise(f64::NAN), &s, 0).is_err());
    }

    #[test]
    fn rbf_input_noise_perturbs_inputs_only() {
        let s = ar2_signal(600, 6);
        let cfg = PredictorConfig::rbf1(4, 3, 0.5);
        let clean = training_data(&cfg.with_input_noise(0.0), &s, 0).unwrap();
        let noisy = training_data(&cfg, &s, 0).unwrap();
        assert_eq!(clean.targets, noisy.targets);
        assert_ne!(clean.inputs, noisy.inputs);
        assert_eq!(noisy, training_data(&cfg, &s, 0).unwrap());
        assert_ne!(noisy, training_data(&cfg, &s, 1).unwrap());
        assert_eq!(clean, make_training_pairs(s.samples(), 4, false).unwrap().subsample(DEFAULT_RBF1_TRAIN_ROWS));
    }

    #[test]
    fn rbf1_fit_has_requested_neurons() {
        let s = ar2_signal(3000, 2);
        let p = fit_predictor(&PredictorConfig::rbf1(10, 20, 0.22), &s, 0).unwrap();
        let Model::Rbf(net) = p.model() else { panic!() };
        assert_eq!(net.num_neurons(), 20);
    }

    #[test]
    fn fits_are_deterministic() {
        let s = ar2_signal(3000, 3);
        for cfg in [PredictorConfig::rbf2(10, 8, 10).with_delta(true), PredictorConfig::rbf1(10, 5, 0.4)] {
            let a = fit_codec_predictor(&[cfg], &s, 9).unwrap().to_payload().unwrap();
            let b = fit_codec_predictor(&[cfg], &s, 9).unwrap().to_payload().unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn lpc_with_delta_is_rejected() {
        let s = ar2_signal(500, 4);
        assert!(fit_predictor(&PredictorConfig::lpc(4).with_delta(true), &s, 0).is_err());
    }
}
