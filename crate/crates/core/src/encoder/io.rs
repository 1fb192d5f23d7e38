//! Model file: one line of JSON header (config, vocabulary, tensor shapes,
//! format version) followed by every tensor as little-endian `f64`, in
//! header order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{EncoderConfig, ModelParams, Tensor};
use super::vocab::Vocab;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const FORMAT_NAME: &str = "lovesim-encoder";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorHeader {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    format_version: u32,
    config: EncoderConfig,
    vocab: Vocab,
    tensors: Vec<TensorHeader>,
}

pub fn write_model<T: Scalar, W: Write>(mut w: W, params: &ModelParams<T>, vocab: &Vocab) -> Result<()> {
    let header = Header {
        format: FORMAT_NAME.into(),
        format_version: FORMAT_VERSION,
        config: params.config.clone(),
        vocab: vocab.clone(),
        tensors: params
            .tensors
            .iter()
            .map(|t| TensorHeader { name: t.name.clone(), shape: t.shape.clone() })
            .collect(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for t in &params.tensors {
        for v in &t.data {
            w.write_all(&v.as_f64().to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_model<T: Scalar, R: BufRead>(mut r: R) -> Result<(ModelParams<T>, Vocab)> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: Header = serde_json::from_str(line.trim_end())
        .map_err(|e| Error::validation(format!("model header: {e}")))?;
    if header.format != FORMAT_NAME || header.format_version != FORMAT_VERSION {
        return Err(Error::validation(format!(
            "unsupported model format {} v{}",
            header.format, header.format_version
        )));
    }
    if header.vocab.len() != header.config.vocab_size {
        return Err(Error::validation("model vocabulary size disagrees with its config"));
    }
    let layout = ModelParams::<T>::layout(&header.config);
    if layout.len() != header.tensors.len() {
        return Err(Error::validation("model tensor list disagrees with its config"));
    }
    let mut tensors = Vec::with_capacity(layout.len());
    let mut buf = [0u8; 8];
    for ((name, shape, decay), declared) in layout.into_iter().zip(&header.tensors) {
        if name != declared.name || shape != declared.shape {
            return Err(Error::validation(format!("unexpected tensor {}", declared.name)));
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut buf)?;
            data.push(T::of(f64::from_le_bytes(buf)));
        }
        tensors.push(Tensor { name, shape, data, decay });
    }
    if r.read(&mut buf)? != 0 {
        return Err(Error::validation("trailing bytes after model tensors"));
    }
    let params = ModelParams { config: header.config, tensors };
    params.validate()?;
    Ok((params, header.vocab))
}

pub fn save_model<T: Scalar>(path: &Path, params: &ModelParams<T>, vocab: &Vocab) -> Result<()> {
    write_model(BufWriter::new(File::create(path)?), params, vocab)
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<(ModelParams<T>, Vocab)> {
    read_model(BufReader::new(File::open(path)?))
}
