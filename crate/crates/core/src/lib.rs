//! Nonlinear-predictive ADPCM speech coding.
//!
//! The codec predicts each sample from past reconstructed samples, quantizes the residual
//! with a multiplier-adapted scalar quantizer and transmits the codes together with the
//! predictor parameters. Predictors can be linear (LPC), radial basis function networks
//! trained greedily (RBF-1) or from a Gaussian mixture (RBF-2), optionally fed with
//! first-difference "delta" inputs, and averaged in committees.
//!
//! ```
//! use nlpc::codec::{adpcm_decode, adpcm_encode, CodecConfig};
//! use nlpc::predictor::{fit_codec_predictor, PredictorConfig};
//! use nlpc::signal::normalize;
//!
//! let raw: Vec<f64> = (0..800).map(|n| (n as f64 * 0.05).sin() * 0.3).collect();
//! let signal = normalize(&raw, 8000).unwrap();
//! let predictor = fit_codec_predictor(&[PredictorConfig::lpc(10)], &signal, 0).unwrap();
//! let encoded = adpcm_encode(&signal, &predictor, &CodecConfig::new(4)).unwrap();
//! let decoded = adpcm_decode(&encoded.bitstream).unwrap();
//! assert_eq!(decoded, encoded.reconstructed);
//! ```

pub mod bitstream;
pub mod codec;
pub mod corpus;
pub mod dsp;
pub mod error;
pub mod experiment;
pub mod matrix;
pub mod model_io;
pub mod predictor;
pub mod rbf;
pub mod signal;

pub use error::{Error, Result};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 0x5EED;
