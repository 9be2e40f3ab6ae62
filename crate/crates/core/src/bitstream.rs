//! Coded-file container: a self-describing header followed by packed quantizer codes.
//!
//! Layout (all integers and reals little-endian):
//!
//! ```text
//! magic            4 bytes  "NLPC"
//! version          u8
//! nq_bits          u8       2..=5
//! prediction_order u16
//! sample_rate_hz   u32
//! num_samples      u64
//! gain             f64
//! initial_step     f64
//! step_min         f64
//! step_max         f64
//! multipliers      2^(nq_bits-1) x f64
//! seed_samples     prediction_order x f64
//! payload_len      u32
//! payload          payload_len bytes
//! codes            (num_samples - prediction_order) x nq_bits, MSB-first, zero padded
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"NLPC";
pub const VERSION: u8 = 1;
pub const MIN_BITS: u8 = 2;
pub const MAX_BITS: u8 = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct CodecHeader {
    pub nq_bits: u8,
    pub prediction_order: u16,
    pub sample_rate_hz: u32,
    pub num_samples: u64,
    pub gain: f64,
    pub initial_step: f64,
    pub step_min: f64,
    pub step_max: f64,
    pub multipliers: Vec<f64>,
    pub seed_samples: Vec<f64>,
    pub predictor_payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bitstream {
    pub header: CodecHeader,
    pub codes: Vec<u8>,
}

pub fn check_bits(nq_bits: u8) -> Result<()> {
    if (MIN_BITS..=MAX_BITS).contains(&nq_bits) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "quantizer bits must be in {MIN_BITS}..={MAX_BITS}, got {nq_bits}"
        )))
    }
}

impl CodecHeader {
    fn validate(&self) -> Result<()> {
        check_bits(self.nq_bits).map_err(|e| Error::InvalidHeader(e.to_string()))?;
        let order = usize::from(self.prediction_order);
        if order == 0 {
            return Err(Error::InvalidHeader("prediction order must be positive".into()));
        }
        if self.num_samples < order as u64 {
            return Err(Error::InvalidHeader(format!(
                "{} samples cannot hold {} seed samples",
                self.num_samples, order
            )));
        }
        if self.seed_samples.len() != order {
            return Err(Error::InvalidHeader(format!(
                "{} seed samples for prediction order {}",
                self.seed_samples.len(),
                order
            )));
        }
        let levels = 1usize << (self.nq_bits - 1);
        if self.multipliers.len() != levels {
            return Err(Error::InvalidHeader(format!(
                "{} multipliers for {} magnitude levels",
                self.multipliers.len(),
                levels
            )));
        }
        if self.predictor_payload.len() > u32::MAX as usize {
            return Err(Error::InvalidHeader("predictor payload too large".into()));
        }
        Ok(())
    }

    /// Number of packed codes that follow this header.
    pub fn num_codes(&self) -> usize {
        (self.num_samples - u64::from(self.prediction_order)) as usize
    }

    pub fn encode(&self, out: &mut Vec<u8>) -> Result<()> {
        self.validate()?;
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.nq_bits);
        out.extend_from_slice(&self.prediction_order.to_le_bytes());
        out.extend_from_slice(&self.sample_rate_hz.to_le_bytes());
        out.extend_from_slice(&self.num_samples.to_le_bytes());
        for v in [self.gain, self.initial_step, self.step_min, self.step_max] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in self.multipliers.iter().chain(&self.seed_samples) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.predictor_payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.predictor_payload);
        Ok(())
    }

    pub fn decode(reader: &mut ByteReader<'_>) -> Result<Self> {
        let magic: [u8; 4] = reader.take(4, "magic")?.try_into().unwrap();
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let version = reader.u8("version")?;
        if version != VERSION {
            return Err(Error::VersionMismatch { found: version, expected: VERSION });
        }
        let nq_bits = reader.u8("nq_bits")?;
        check_bits(nq_bits).map_err(|e| Error::InvalidHeader(e.to_string()))?;
        let prediction_order = reader.u16("prediction_order")?;
        let sample_rate_hz = reader.u32("sample_rate")?;
        let num_samples = reader.u64("num_samples")?;
        let gain = reader.f64("gain")?;
        let initial_step = reader.f64("initial_step")?;
        let step_min = reader.f64("step_min")?;
        let step_max = reader.f64("step_max")?;
        let multipliers = reader.f64_vec(1 << (nq_bits - 1), "multipliers")?;
        let seed_samples = reader.f64_vec(usize::from(prediction_order), "seed_samples")?;
        let payload_len = reader.u32("payload_len")? as usize;
        let predictor_payload = reader.take(payload_len, "predictor payload")?.to_vec();
        let header = Self {
            nq_bits,
            prediction_order,
            sample_rate_hz,
            num_samples,
            gain,
            initial_step,
            step_min,
            step_max,
            multipliers,
            seed_samples,
            predictor_payload,
        };
        header.validate()?;
        Ok(header)
    }
}

/// Cursor over a byte slice with little-endian readers that fail on truncation.
pub struct ByteReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Truncated { what, needed: n - self.remaining() });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self, what: &'static str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub fn u16(&mut self, what: &'static str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    pub fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub fn u64(&mut self, what: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub fn f64(&mut self, what: &'static str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub fn f64_vec(&mut self, n: usize, what: &'static str) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or(Error::Truncated { what, needed: usize::MAX })?, what)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Packs `codes` MSB-first, `bits` bits each, zero-padding the last byte.
pub fn pack_codes(codes: &[u8], bits: u8) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity((codes.len() * usize::from(bits)).div_ceil(8));
    let mut acc: u32 = 0;
    let mut filled: u32 = 0;
    for &code in codes {
        if u32::from(code) >> bits != 0 {
            return Err(Error::CodeOutOfRange { code: code.into(), bits });
        }
        acc = (acc << bits) | u32::from(code);
        filled += u32::from(bits);
        while filled >= 8 {
            filled -= 8;
            out.push((acc >> filled) as u8);
        }
        acc &= (1 << filled) - 1;
    }
    if filled > 0 {
        out.push((acc << (8 - filled)) as u8);
    }
    Ok(out)
}

/// Inverse of [`pack_codes`] for `count` codes.
pub fn unpack_codes(bytes: &[u8], bits: u8, count: usize) -> Result<Vec<u8>> {
    let needed = (count * usize::from(bits)).div_ceil(8);
    if bytes.len() < needed {
        return Err(Error::Truncated { what: "codes", needed: needed - bytes.len() });
    }
    let mask = (1u32 << bits) - 1;
    let mut out = Vec::with_capacity(count);
    let mut acc: u32 = 0;
    let mut filled: u32 = 0;
    let mut iter = bytes.iter();
    for _ in 0..count {
        while filled < u32::from(bits) {
            acc = (acc << 8) | u32::from(*iter.next().unwrap());
            filled += 8;
        }
        filled -= u32::from(bits);
        out.push(((acc >> filled) & mask) as u8);
        acc &= (1 << filled) - 1;
    }
    Ok(out)
}

impl Bitstream {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.codes.len() != self.header.num_codes() {
            return Err(Error::InvalidHeader(format!(
                "{} codes but header announces {}",
                self.codes.len(),
                self.header.num_codes()
            )));
        }
        let mut out = Vec::new();
        self.header.encode(&mut out)?;
        out.extend(pack_codes(&self.codes, self.header.nq_bits)?);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut reader = ByteReader::new(bytes);
        let header = CodecHeader::decode(&mut reader)?;
        let count = header.num_codes();
        let packed_len = (count * usize::from(header.nq_bits)).div_ceil(8);
        let packed = reader.take(packed_len, "codes")?;
        if reader.remaining() > 0 {
            return Err(Error::TrailingData(reader.remaining()));
        }
        let codes = unpack_codes(packed, header.nq_bits, count)?;
        Ok(Self { header, codes })
    }
}

pub fn write_bitstream(path: impl AsRef<Path>, bitstream: &Bitstream) -> Result<()> {
    fs::write(path, bitstream.to_bytes()?)?;
    Ok(())
}

pub fn read_bitstream(path: impl AsRef<Path>) -> Result<Bitstream> {
    Bitstream::from_bytes(&fs::read(path)?)
}
