//! Binary model encoding: a one-byte type tag, little-endian `u16` dimensions and
//! little-endian `f64` parameters in row-major order.
//!
//! ```text
//! LPC: 0x01 | order u16 | coefficients[order]
//! RBF: 0x02 | S u16 | D u16 | centers[S*D] | biases[S] | out_weights[S] | out_bias
//! ```

use crate::bitstream::ByteReader;
use crate::dsp::LpcModel;
use crate::error::{Error, Result};
use crate::matrix::RowMatrix;
use crate::rbf::RbfNetwork;

pub const TAG_LPC: u8 = 1;
pub const TAG_RBF: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Lpc(LpcModel),
    Rbf(RbfNetwork),
}

impl Model {
    pub fn input_dim(&self) -> usize {
        match self {
            Model::Lpc(m) => m.order(),
            Model::Rbf(n) => n.input_dim(),
        }
    }
}

fn dim_u16(v: usize, what: &str) -> Result<[u8; 2]> {
    u16::try_from(v)
        .map(u16::to_le_bytes)
        .map_err(|_| Error::InvalidArgument(format!("{what} {v} does not fit in 16 bits")))
}

fn put_f64s<'a>(out: &mut Vec<u8>, values: impl IntoIterator<Item = &'a f64>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn write_model(model: &Model, out: &mut Vec<u8>) -> Result<()> {
    match model {
        Model::Lpc(m) => {
            out.push(TAG_LPC);
            out.extend_from_slice(&dim_u16(m.order(), "LPC order")?);
            put_f64s(out, m.coefficients());
        }
        Model::Rbf(n) => {
            out.push(TAG_RBF);
            out.extend_from_slice(&dim_u16(n.num_neurons(), "neuron count")?);
            out.extend_from_slice(&dim_u16(n.input_dim(), "input dimension")?);
            put_f64s(out, n.centers().as_slice());
            put_f64s(out, n.biases());
            put_f64s(out, n.out_weights());
            put_f64s(out, [n.out_bias()].iter());
        }
    }
    Ok(())
}

pub fn read_model(reader: &mut ByteReader<'_>) -> Result<Model> {
    match reader.u8("model tag")? {
        TAG_LPC => {
            let order = reader.u16("LPC order")? as usize;
            let coefficients = reader.f64_vec(order, "LPC coefficients")?;
            Ok(Model::Lpc(LpcModel::new(coefficients)?))
        }
        TAG_RBF => {
            let s = reader.u16("neuron count")? as usize;
            let d = reader.u16("input dimension")? as usize;
            if d == 0 {
                return Err(Error::InvalidHeader("RBF input dimension is zero".into()));
            }
            let centers = RowMatrix::new(reader.f64_vec(s * d, "RBF centers")?, d)?;
            let biases = reader.f64_vec(s, "RBF biases")?;
            let out_weights = reader.f64_vec(s, "RBF output weights")?;
            let out_bias = reader.f64("RBF output bias")?;
            Ok(Model::Rbf(RbfNetwork::new(centers, biases, out_weights, out_bias)?))
        }
        tag => Err(Error::UnknownModelTag(tag)),
    }
}

pub fn model_serialize(model: &Model) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_model(model, &mut out)?;
    Ok(out)
}

pub fn model_deserialize(bytes: &[u8]) -> Result<Model> {
    let mut reader = ByteReader::new(bytes);
    let model = read_model(&mut reader)?;
    if reader.remaining() > 0 {
        return Err(Error::TrailingData(reader.remaining()));
    }
    Ok(model)
}
