//! Normalized mono signals and WAV input/output.

use std::path::Path;

use crate::error::{Error, Result};

/// Sample rate the codec is tuned for.
pub const NOMINAL_SAMPLE_RATE: u32 = 8000;

const PCM16_SCALE: f64 = 32768.0;
const RANGE_SLACK: f64 = 1e-12;

/// Mono signal scaled to a peak magnitude of at most one, with the removed gain kept aside.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate_hz: u32,
    gain: f64,
}

impl Signal {
    /// Wraps samples that are already within [-1, 1] (gain 1).
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        Self::with_gain(samples, sample_rate_hz, 1.0)
    }

    pub fn with_gain(samples: Vec<f64>, sample_rate_hz: u32, gain: f64) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(Error::InvalidArgument(format!("gain must be positive, got {gain}")));
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !(s.abs() <= 1.0 + RANGE_SLACK))
        {
            return Err(Error::SampleOutOfRange { index, value });
        }
        Ok(Self { samples, sample_rate_hz, gain })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    /// Samples scaled back to the original amplitude.
    pub fn denormalized(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s * self.gain).collect()
    }
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Scales `raw` so that its peak magnitude is exactly one.
pub fn normalize(raw: &[f64], sample_rate_hz: u32) -> Result<Signal> {
    if raw.is_empty() {
        return Err(Error::EmptySignal);
    }
    if raw.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("input sample"));
    }
    let peak = max_abs(raw);
    if peak == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let samples = raw.iter().map(|x| x / peak).collect();
    Signal::with_gain(samples, sample_rate_hz, peak)
}

/// Converts PCM16 samples to reals in [-1, 1) and normalizes them.
pub fn from_pcm16(pcm: &[i16], sample_rate_hz: u32) -> Result<Signal> {
    let raw: Vec<f64> = pcm.iter().map(|&s| f64::from(s) / PCM16_SCALE).collect();
    normalize(&raw, sample_rate_hz)
}

/// Denormalizes and rounds to PCM16, saturating at the format limits.
pub fn to_pcm16(signal: &Signal) -> Vec<i16> {
    signal
        .samples
        .iter()
        .map(|s| {
            let v = (s * signal.gain * PCM16_SCALE).round();
            v.clamp(f64::from(i16::MIN), f64::from(i16::MAX)) as i16
        })
        .collect()
}

pub fn load_wav(path: impl AsRef<Path>) -> Result<Signal> {
    let reader = hound::WavReader::open(path.as_ref())?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Format(format!("expected mono, found {} channels", spec.channels)));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::Format(format!(
            "expected 16-bit integer PCM, found {}-bit {:?}",
            spec.bits_per_sample, spec.sample_format
        )));
    }
    if spec.sample_rate != NOMINAL_SAMPLE_RATE {
        log::warn!(
            "{}: sample rate {} Hz differs from the nominal {} Hz",
            path.as_ref().display(),
            spec.sample_rate,
            NOMINAL_SAMPLE_RATE
        );
    }
    let pcm = reader.into_samples::<i16>().collect::<std::result::Result<Vec<_>, _>>()?;
    from_pcm16(&pcm, spec.sample_rate)
}

pub fn save_wav(path: impl AsRef<Path>, signal: &Signal) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path.as_ref(), spec)?;
    for s in to_pcm16(signal) {
        writer.write_sample(s)?;
    }
    writer.finalize()?;
    Ok(())
}
