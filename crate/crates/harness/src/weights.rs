//! Binary weight files.
//!
//! Layout, all little-endian: magic `FTNW`, `u32` version (1), `u32` layer
//! count, then per layer `u32` rows, `u32` cols, `rows * cols` row-major
//! `f32` weights and `rows` `f32` biases. Rows are output neurons.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use ftn_core::neural::{Layer, Mlp};
use ftn_core::Real;
use ndarray::{Array1, Array2};

use crate::HarnessError;

pub const MAGIC: &[u8; 4] = b"FTNW";
pub const VERSION: u32 = 1;

/// Serializes a network, rounding every parameter to `f32`.
pub fn encode_weights<T: Real>(net: &Mlp<T>) -> Vec<u8> {
    let net: Mlp<f32> = net.cast();
    let mut out = Vec::with_capacity(12 + 4 * net.param_count() + 8 * net.layers().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for layer in net.layers() {
        let (rows, cols) = layer.weights.dim();
        out.extend_from_slice(&(rows as u32).to_le_bytes());
        out.extend_from_slice(&(cols as u32).to_le_bytes());
        for w in layer.weights.iter() {
            out.extend_from_slice(&w.to_le_bytes());
        }
        for b in layer.biases.iter() {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
    out
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32s(r: &mut impl Read, n: usize) -> io::Result<Vec<f32>> {
    let mut buf = vec![0u8; 4 * n];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn decode_weights(bytes: &[u8]) -> Result<Mlp<f32>, HarnessError> {
    let bad = |m: String| HarnessError::WeightFormat(m);
    let mut r = bytes;
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| bad("file too short".into()))?;
    if &magic != MAGIC {
        return Err(bad("bad magic".into()));
    }
    let version = read_u32(&mut r).map_err(|_| bad("truncated header".into()))?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut r).map_err(|_| bad("truncated header".into()))? as usize;
    let mut layers = Vec::with_capacity(count);
    for i in 0..count {
        let trunc = |_| bad(format!("truncated layer {i}"));
        let rows = read_u32(&mut r).map_err(trunc)? as usize;
        let cols = read_u32(&mut r).map_err(trunc)? as usize;
        let w = read_f32s(&mut r, rows * cols).map_err(trunc)?;
        let b = read_f32s(&mut r, rows).map_err(trunc)?;
        layers.push(Layer {
            weights: Array2::from_shape_vec((rows, cols), w).map_err(|e| bad(e.to_string()))?,
            biases: Array1::from(b),
        });
    }
    if !r.is_empty() {
        return Err(bad(format!("{} trailing bytes", r.len())));
    }
    Ok(Mlp::from_layers(layers)?)
}

pub fn save_weights<T: Real>(path: &Path, net: &Mlp<T>) -> Result<(), HarnessError> {
    let mut f = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    f.write_all(&encode_weights(net)).map_err(|e| HarnessError::io(path, e))
}

pub fn load_weights(path: &Path) -> Result<Mlp<f32>, HarnessError> {
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    decode_weights(&bytes)
}
