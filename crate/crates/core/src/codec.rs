//! Closed-loop ADPCM with a multiplier-adapted mid-rise quantizer.

use crate::bitstream::{check_bits, Bitstream, CodecHeader};
use crate::error::{Error, Result};
use crate::predictor::{CodecPredictor, PredictionScratch, SamplePredictor};
use crate::signal::Signal;

pub const DEFAULT_INITIAL_STEP: f64 = 0.02;
pub const DEFAULT_STEP_MIN: f64 = 1e-5;
pub const DEFAULT_STEP_MAX: f64 = 1.0;
pub const DEFAULT_ORDER: usize = 10;

/// Step multipliers indexed by code magnitude, for 2..=5 bits.
pub fn default_multipliers(nq_bits: u8) -> Result<Vec<f64>> {
    check_bits(nq_bits)?;
    Ok(match nq_bits {
        2 => vec![0.8, 1.6],
        3 => vec![0.9, 0.9, 1.25, 1.75],
        4 => vec![0.9, 0.9, 0.9, 0.9, 1.2, 1.6, 2.0, 2.4],
        _ => vec![0.9, 0.9, 0.9, 0.9, 0.95, 0.95, 0.95, 0.95, 1.2, 1.5, 1.8, 2.1, 2.4, 2.7, 3.0, 3.3],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerState {
    step: f64,
    nq_bits: u8,
    multipliers: Vec<f64>,
    step_min: f64,
    step_max: f64,
}

impl QuantizerState {
    pub fn new(nq_bits: u8, step: f64, multipliers: Vec<f64>, step_min: f64, step_max: f64) -> Result<Self> {
        check_bits(nq_bits)?;
        let levels = 1usize << (nq_bits - 1);
        if multipliers.len() != levels {
            return Err(Error::InvalidArgument(format!(
                "{} multipliers for {levels} magnitude levels",
                multipliers.len()
            )));
        }
        if multipliers.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidArgument("multipliers must be positive".into()));
        }
        if !(step_min > 0.0 && step_min <= step_max && step_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("bad step bounds [{step_min}, {step_max}]")));
        }
        if !(step_min..=step_max).contains(&step) {
            return Err(Error::InvalidArgument(format!(
                "initial step {step} outside [{step_min}, {step_max}]"
            )));
        }
        Ok(Self { step, nq_bits, multipliers, step_min, step_max })
    }

    pub fn with_defaults(nq_bits: u8) -> Result<Self> {
        Self::new(nq_bits, DEFAULT_INITIAL_STEP, default_multipliers(nq_bits)?, DEFAULT_STEP_MIN, DEFAULT_STEP_MAX)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn nq_bits(&self) -> u8 {
        self.nq_bits
    }

    pub fn multipliers(&self) -> &[f64] {
        &self.multipliers
    }

    fn max_magnitude(&self) -> u8 {
        (1u8 << (self.nq_bits - 1)) - 1
    }

    /// Reconstruction level for `code` at the current step, then adapts the step.
    fn reconstruct_and_adapt(&mut self, negative: bool, magnitude: u8) -> f64 {
        let level = (f64::from(magnitude) + 0.5) * self.step;
        self.step = (self.step * self.multipliers[usize::from(magnitude)]).clamp(self.step_min, self.step_max);
        if negative {
            -level
        } else {
            level
        }
    }

    /// Quantizes a prediction residual; returns the code and its reconstruction.
    pub fn quantize(&mut self, e: f64) -> Result<(u8, f64)> {
        if e.is_nan() {
            return Err(Error::NonFinite("prediction residual"));
        }
        let negative = e < 0.0;
        let cells = (e.abs() / self.step).floor();
        let magnitude = if cells >= f64::from(self.max_magnitude()) { self.max_magnitude() } else { cells as u8 };
        let code = (u8::from(negative) << (self.nq_bits - 1)) | magnitude;
        Ok((code, self.reconstruct_and_adapt(negative, magnitude)))
    }

    /// Decoder mirror of [`quantize`](Self::quantize).
    pub fn dequantize(&mut self, code: u8) -> Result<f64> {
        if u32::from(code) >> self.nq_bits != 0 {
            return Err(Error::CodeOutOfRange { code: code.into(), bits: self.nq_bits });
        }
        let negative = code >> (self.nq_bits - 1) != 0;
        let magnitude = code & self.max_magnitude();
        Ok(self.reconstruct_and_adapt(negative, magnitude))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodecConfig {
    pub nq_bits: u8,
    pub initial_step: f64,
    pub step_min: f64,
    pub step_max: f64,
    /// Overrides the default table for `nq_bits` when set.
    pub multipliers: Option<Vec<f64>>,
}

impl CodecConfig {
    pub fn new(nq_bits: u8) -> Self {
        Self {
            nq_bits,
            initial_step: DEFAULT_INITIAL_STEP,
            step_min: DEFAULT_STEP_MIN,
            step_max: DEFAULT_STEP_MAX,
            multipliers: None,
        }
    }

    pub fn quantizer(&self) -> Result<QuantizerState> {
        let multipliers = match &self.multipliers {
            Some(m) => m.clone(),
            None => default_multipliers(self.nq_bits)?,
        };
        QuantizerState::new(self.nq_bits, self.initial_step, multipliers, self.step_min, self.step_max)
    }

    /// Bit rate for a given sample rate.
    pub fn rate_bps(&self, sample_rate_hz: u32) -> u64 {
        u64::from(self.nq_bits) * u64::from(sample_rate_hz)
    }
}

#[derive(Debug, Clone)]
pub struct Encoded {
    pub bitstream: Bitstream,
    /// Encoder-side reconstruction, normalized like the input.
    pub reconstructed: Signal,
}

/// Runs the shared closed loop; `step` supplies the reconstructed residual for sample `t`
/// given the prediction.
fn run_loop(
    predictor: &CodecPredictor,
    seed: &[f64],
    total: usize,
    mut step: impl FnMut(usize, f64) -> Result<f64>,
) -> Result<Vec<f64>> {
    let need = predictor.history_len();
    let mut recon = Vec::with_capacity(total);
    recon.extend_from_slice(seed);
    let mut scratch = PredictionScratch::new();
    let mut padded = vec![0.0; need];
    for t in seed.len()..total {
        let prediction = if t >= need {
            scratch.predict(predictor, &recon[t - need..t])
        } else {
            // history before the first sample reads as silence
            padded.iter_mut().for_each(|v| *v = 0.0);
            padded[need - t..].copy_from_slice(&recon[..t]);
            scratch.predict(predictor, &padded)
        };
        let eq = step(t, prediction)?;
        recon.push((prediction + eq).clamp(-1.0, 1.0));
    }
    Ok(recon)
}

pub fn adpcm_encode(signal: &Signal, predictor: &CodecPredictor, config: &CodecConfig) -> Result<Encoded> {
    let order = predictor.order();
    let n = signal.len();
    if n < order {
        return Err(Error::TooShort { len: n, needed: order });
    }
    let prediction_order = u16::try_from(order)
        .map_err(|_| Error::InvalidArgument(format!("prediction order {order} too large")))?;
    let mut quantizer = config.quantizer()?;
    let header_quantizer = quantizer.clone();
    let x = signal.samples();
    let mut codes = Vec::with_capacity(n - order);
    let recon = run_loop(predictor, &x[..order], n, |t, prediction| {
        let (code, eq) = quantizer.quantize(x[t] - prediction)?;
        codes.push(code);
        Ok(eq)
    })?;

    let header = CodecHeader {
        nq_bits: config.nq_bits,
        prediction_order,
        sample_rate_hz: signal.sample_rate_hz(),
        num_samples: n as u64,
        gain: signal.gain(),
        initial_step: header_quantizer.step,
        step_min: header_quantizer.step_min,
        step_max: header_quantizer.step_max,
        multipliers: header_quantizer.multipliers,
        seed_samples: x[..order].to_vec(),
        predictor_payload: predictor.to_payload()?,
    };
    Ok(Encoded {
        bitstream: Bitstream { header, codes },
        reconstructed: Signal::with_gain(recon, signal.sample_rate_hz(), signal.gain())?,
    })
}

/// Reconstructs the normalized signal; its gain is the one recorded in the header.
pub fn adpcm_decode(bits: &Bitstream) -> Result<Signal> {
    let h = &bits.header;
    let predictor = CodecPredictor::from_payload(&h.predictor_payload)?;
    if predictor.order() != usize::from(h.prediction_order) {
        return Err(Error::InvalidHeader(format!(
            "predictor order {} differs from header order {}",
            predictor.order(),
            h.prediction_order
        )));
    }
    if bits.codes.len() != h.num_codes() {
        return Err(Error::InvalidHeader(format!(
            "{} codes for {} samples",
            bits.codes.len(),
            h.num_samples
        )));
    }
    let mut quantizer = QuantizerState::new(h.nq_bits, h.initial_step, h.multipliers.clone(), h.step_min, h.step_max)
        .map_err(|e| Error::InvalidHeader(e.to_string()))?;
    if h.seed_samples.iter().any(|s| !(s.abs() <= 1.0)) {
        return Err(Error::InvalidHeader("seed sample outside [-1, 1]".into()));
    }
    let order = h.seed_samples.len();
    let recon = run_loop(&predictor, &h.seed_samples, h.num_samples as usize, |t, _| {
        quantizer.dequantize(bits.codes[t - order])
    })?;
    Signal::with_gain(recon, h.sample_rate_hz, h.gain).map_err(|e| Error::InvalidHeader(e.to_string()))
}
