//! Flat binary container for denoiser weights.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic   4 bytes  "SDNZ"
//! version u32      1
//! layers  u32      layer count
//! resid   u8       residual flag (0/1)
//! per layer:
//!   out_c u32, in_c u32, kh u32, kw u32, relu u8
//!   weights: out_c*in_c*kh*kw f64, row-major [out][in][ky][kx]
//!   bias:    out_c f64
//! lambda  f64      regularization weight stored with the checkpoint
//! ```

use crate::error::{Error, Result};
use crate::recon::denoiser::{ConvLayer, DenoiserModel};
use ndarray::{Array1, Array4};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"SDNZ";
const VERSION: u32 = 1;

/// Serialize a model and its regularization weight.
pub fn save_model<W: Write>(mut writer: W, model: &DenoiserModel, lambda: f64) -> Result<()> {
    model.validate()?;
    writer.write_all(MAGIC)?;
    writer.write_all(&VERSION.to_le_bytes())?;
    writer.write_all(&(model.layers.len() as u32).to_le_bytes())?;
    writer.write_all(&[model.residual as u8])?;
    for layer in &model.layers {
        let (o, c, kh, kw) = layer.weights.dim();
        for dim in [o, c, kh, kw] {
            writer.write_all(&(dim as u32).to_le_bytes())?;
        }
        writer.write_all(&[layer.relu as u8])?;
        for v in layer.weights.iter() {
            writer.write_all(&v.to_le_bytes())?;
        }
        for v in layer.bias.iter() {
            writer.write_all(&v.to_le_bytes())?;
        }
    }
    writer.write_all(&lambda.to_le_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(reader: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    reader.read_exact(&mut buf).map_err(|_| Error::MalformedContainer("truncated u32".into()))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u8<R: Read>(reader: &mut R) -> Result<u8> {
    let mut buf = [0u8; 1];
    reader.read_exact(&mut buf).map_err(|_| Error::MalformedContainer("truncated u8".into()))?;
    Ok(buf[0])
}

fn read_f64<R: Read>(reader: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    reader.read_exact(&mut buf).map_err(|_| Error::MalformedContainer("truncated f64".into()))?;
    Ok(f64::from_le_bytes(buf))
}

/// Deserialize a model and its regularization weight.
pub fn load_model<R: Read>(mut reader: R) -> Result<(DenoiserModel, f64)> {
    let mut magic = [0u8; 4];
    reader
        .read_exact(&mut magic)
        .map_err(|_| Error::MalformedContainer("missing magic".into()))?;
    if &magic != MAGIC {
        return Err(Error::MalformedContainer(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut reader)?;
    if version != VERSION {
        return Err(Error::MalformedContainer(format!("unsupported version {version}")));
    }
    let layer_count = read_u32(&mut reader)? as usize;
    if layer_count == 0 || layer_count > 1024 {
        return Err(Error::MalformedContainer(format!("implausible layer count {layer_count}")));
    }
    let residual = read_u8(&mut reader)? != 0;
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let o = read_u32(&mut reader)? as usize;
        let c = read_u32(&mut reader)? as usize;
        let kh = read_u32(&mut reader)? as usize;
        let kw = read_u32(&mut reader)? as usize;
        if o == 0 || c == 0 || o * c * kh * kw > 1 << 26 {
            return Err(Error::MalformedContainer(format!(
                "implausible layer dims {o}x{c}x{kh}x{kw}"
            )));
        }
        let relu = read_u8(&mut reader)? != 0;
        let mut weights = Vec::with_capacity(o * c * kh * kw);
        for _ in 0..o * c * kh * kw {
            weights.push(read_f64(&mut reader)?);
        }
        let weights = Array4::from_shape_vec((o, c, kh, kw), weights)
            .map_err(|e| Error::MalformedContainer(e.to_string()))?;
        let mut bias = Vec::with_capacity(o);
        for _ in 0..o {
            bias.push(read_f64(&mut reader)?);
        }
        layers.push(ConvLayer { weights, bias: Array1::from_vec(bias), relu });
    }
    let lambda = read_f64(&mut reader)?;
    let model = DenoiserModel { layers, residual };
    model.validate()?;
    Ok((model, lambda))
}

/// Save to a file path.
pub fn save_model_file<P: AsRef<Path>>(path: P, model: &DenoiserModel, lambda: f64) -> Result<()> {
    save_model(BufWriter::new(File::create(path)?), model, lambda)
}

/// Load from a file path.
pub fn load_model_file<P: AsRef<Path>>(path: P) -> Result<(DenoiserModel, f64)> {
    load_model(BufReader::new(File::open(path)?))
}
