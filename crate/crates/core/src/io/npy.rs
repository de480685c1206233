//! Tensor files: a byte-exact NPY v1.0 subset (little-endian `<f4`/`<f8`,
//! C order only, header padded to a 64-byte boundary).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAGIC: &[u8; 6] = b"\x93NUMPY";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn descr(self) -> &'static str {
        match self {
            Dtype::F32 => "<f4",
            Dtype::F64 => "<f8",
        }
    }

    fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

/// An array as stored on disk: dtype, shape, row-major values.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl TensorFile {
    pub fn from_tensor(t: &Tensor, dtype: Dtype) -> Self {
        Self {
            dtype,
            shape: t.shape().to_vec(),
            data: t.data().to_vec(),
        }
    }

    pub fn into_tensor(self) -> Result<Tensor> {
        Tensor::new(self.shape, self.data)
    }
}

fn header_dict(dtype: Dtype, shape: &[usize]) -> String {
    let shape_str = match shape.len() {
        0 => "()".to_string(),
        1 => format!("({},)", shape[0]),
        _ => format!(
            "({})",
            shape
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        dtype.descr(),
        shape_str
    )
}

/// Write a tensor file. The 10-byte preamble plus header always ends on a
/// 64-byte boundary, with space padding and a final newline.
pub fn save_tensor(t: &TensorFile, path: &Path) -> Result<()> {
    let dict = header_dict(t.dtype, &t.shape);
    let unpadded = 10 + dict.len() + 1; // preamble + dict + '\n'
    let padded = unpadded.div_ceil(64) * 64;
    let header_len = padded - 10;
    let mut bytes = Vec::with_capacity(padded + t.data.len() * t.dtype.size());
    bytes.extend_from_slice(MAGIC);
    bytes.push(1);
    bytes.push(0);
    bytes.extend_from_slice(&(header_len as u16).to_le_bytes());
    bytes.extend_from_slice(dict.as_bytes());
    bytes.resize(padded - 1, b' ');
    bytes.push(b'\n');
    match t.dtype {
        Dtype::F64 => {
            for v in &t.data {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        Dtype::F32 => {
            for v in &t.data {
                bytes.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn parse_header(header: &str) -> Result<(Dtype, bool, Vec<usize>)> {
    let descr = extract_quoted(header, "'descr':")
        .ok_or_else(|| Error::param("npy header missing descr"))?;
    let dtype = match descr.as_str() {
        "<f4" => Dtype::F32,
        "<f8" => Dtype::F64,
        other => {
            return Err(Error::UnsupportedDtype {
                descr: other.to_string(),
            })
        }
    };
    let fortran = {
        let rest = header
            .split("'fortran_order':")
            .nth(1)
            .ok_or_else(|| Error::param("npy header missing fortran_order"))?
            .trim_start();
        if rest.starts_with("True") {
            true
        } else if rest.starts_with("False") {
            false
        } else {
            return Err(Error::param("npy fortran_order must be True or False"));
        }
    };
    let shape_src = header
        .split("'shape':")
        .nth(1)
        .ok_or_else(|| Error::param("npy header missing shape"))?;
    let open = shape_src
        .find('(')
        .ok_or_else(|| Error::param("npy shape is not a tuple"))?;
    let close = shape_src
        .find(')')
        .ok_or_else(|| Error::param("npy shape is not a tuple"))?;
    let mut shape = Vec::new();
    for part in shape_src[open + 1..close].split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        shape.push(
            part.parse::<usize>()
                .map_err(|_| Error::param(format!("bad npy shape entry {part:?}")))?,
        );
    }
    Ok((dtype, fortran, shape))
}

fn extract_quoted(src: &str, key: &str) -> Option<String> {
    let rest = src.split(key).nth(1)?.trim_start();
    let rest = rest.strip_prefix('\'')?;
    let end = rest.find('\'')?;
    Some(rest[..end].to_string())
}

pub fn load_tensor(path: &Path) -> Result<TensorFile> {
    let bytes = fs::read(path)?;
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes[6] != 1 || bytes[7] != 0 {
        return Err(Error::BadMagic);
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    if bytes.len() < 10 + header_len {
        return Err(Error::param("npy header truncated"));
    }
    let header = std::str::from_utf8(&bytes[10..10 + header_len])
        .map_err(|_| Error::param("npy header is not UTF-8"))?;
    let (dtype, fortran, shape) = parse_header(header)?;
    if fortran {
        return Err(Error::FortranOrderUnsupported);
    }
    let count: usize = shape.iter().product();
    let body = &bytes[10 + header_len..];
    if body.len() != count * dtype.size() {
        return Err(Error::param(format!(
            "npy payload holds {} bytes, expected {}",
            body.len(),
            count * dtype.size()
        )));
    }
    let data = match dtype {
        Dtype::F64 => body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        Dtype::F32 => body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
    };
    Ok(TensorFile { dtype, shape, data })
}
