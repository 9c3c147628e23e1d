//! IDX tensors (the MNIST container): `00 00 08 k`, then `k` big-endian `u32`
//! sizes, then the unsigned-byte payload in row-major order.

use faer::Mat;

use super::LabeledDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxTensor {
    pub shape: Vec<usize>,
    pub data: Vec<u8>,
}

fn parse_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        message: message.into(),
    }
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxTensor> {
    if bytes.len() < 4 {
        return Err(parse_err(
            bytes.len(),
            "truncated header: need 4 magic bytes",
        ));
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(parse_err(
            0,
            format!("bad magic prefix {:02x} {:02x}", bytes[0], bytes[1]),
        ));
    }
    if bytes[2] != 0x08 {
        return Err(parse_err(
            2,
            format!("unsupported element type 0x{:02x}, expected 0x08", bytes[2]),
        ));
    }
    let rank = bytes[3] as usize;
    let mut shape = Vec::with_capacity(rank);
    let mut offset = 4;
    for _ in 0..rank {
        let Some(word) = bytes.get(offset..offset + 4) else {
            return Err(parse_err(
                bytes.len(),
                format!("truncated header: size field at offset {offset}"),
            ));
        };
        shape.push(u32::from_be_bytes([word[0], word[1], word[2], word[3]]) as usize);
        offset += 4;
    }
    let expected = shape
        .iter()
        .try_fold(1usize, |acc, &s| acc.checked_mul(s))
        .ok_or_else(|| parse_err(4, "payload size overflows"))?;
    let payload = &bytes[offset..];
    if payload.len() < expected {
        return Err(parse_err(
            bytes.len(),
            format!(
                "truncated payload: expected {expected} bytes after offset {offset}, found {}",
                payload.len()
            ),
        ));
    }
    if payload.len() > expected {
        return Err(parse_err(offset + expected, "trailing bytes after payload"));
    }
    Ok(IdxTensor {
        shape,
        data: payload.to_vec(),
    })
}

/// Combine an image tensor `(n, rows, cols)` (or `(n, features)`) with a label
/// tensor `(n)`. Pixels are scaled to `[0, 1]`; the class count is 10 or one
/// more than the largest label, whichever is larger.
pub fn load_idx_dataset(images: &IdxTensor, labels: &IdxTensor) -> Result<LabeledDataset> {
    if labels.shape.len() != 1 {
        return Err(Error::invalid(format!(
            "label tensor must be 1-D, got shape {:?}",
            labels.shape
        )));
    }
    if images.shape.is_empty() {
        return Err(Error::invalid("image tensor has rank 0"));
    }
    let n = images.shape[0];
    if labels.shape[0] != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: labels.shape[0],
        });
    }
    let d: usize = images.shape[1..].iter().product();
    let features = Mat::from_fn(n, d, |i, j| f64::from(images.data[i * d + j]) / 255.0);
    let ys: Vec<usize> = labels.data.iter().map(|&b| b as usize).collect();
    let classes = ys.iter().copied().max().map_or(10, |m| (m + 1).max(10));
    LabeledDataset::new(features, ys, classes)
}
