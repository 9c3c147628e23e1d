//! JSON model files. The feature map is stored by `(d, m, sigma, seed)` and
//! resampled on load; weights are written in shortest round-trip form so a
//! save/load cycle reproduces them bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::{sample_feature_map, Head, Model};
use crate::error::{Error, Result};

const FORMAT: &str = "dd-model";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    d: usize,
    m: usize,
    sigma: f64,
    seed: u64,
    head: Head,
    lambda: f64,
    classes: usize,
    /// Row-major, `m` rows of `c_out` values.
    weights: Vec<Vec<f64>>,
}

pub fn write_model<W: Write>(model: &Model, out: W) -> Result<()> {
    let w = model.weights();
    let file = ModelFile {
        format: FORMAT.into(),
        version: VERSION,
        d: model.map().d(),
        m: model.m(),
        sigma: model.map().sigma(),
        seed: model.map().seed(),
        head: model.head(),
        lambda: model.lambda(),
        classes: model.classes(),
        weights: (0..w.nrows())
            .map(|i| (0..w.ncols()).map(|j| w[(i, j)]).collect())
            .collect(),
    };
    serde_json::to_writer_pretty(out, &file)?;
    Ok(())
}

pub fn read_model<R: Read>(input: R) -> Result<Model> {
    let file: ModelFile = serde_json::from_reader(input)?;
    if file.format != FORMAT || file.version != VERSION {
        return Err(Error::Parse {
            offset: 0,
            message: format!("unsupported model file {} v{}", file.format, file.version),
        });
    }
    if file.weights.len() != file.m {
        return Err(Error::DimensionMismatch {
            expected: file.m,
            found: file.weights.len(),
        });
    }
    let c_out = file.weights.first().map_or(0, Vec::len);
    if file.weights.iter().any(|r| r.len() != c_out) {
        return Err(Error::Parse {
            offset: 0,
            message: "ragged weight rows".into(),
        });
    }
    let map = sample_feature_map(file.m, file.d, file.sigma, file.seed)?;
    let weights = Mat::from_fn(file.m, c_out, |i, j| file.weights[i][j]);
    Model::new(map, weights, file.head, file.lambda, file.classes)
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_model(model, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Model> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rff::{fit_ridge, sample_feature_map};

    #[test]
    fn save_load_is_bit_exact() {
        let map = sample_feature_map(7, 3, 5.0, 11).unwrap();
        let x = Mat::from_fn(9, 3, |i, j| ((i * 3 + j) as f64).sin());
        let y = Mat::from_fn(9, 1, |i, _| (i % 2) as f64);
        let model = fit_ridge(&map, x.as_ref(), y.as_ref(), 1e-4).unwrap();
        let mut buf = Vec::new();
        write_model(&model, &mut buf).unwrap();
        let back = read_model(buf.as_slice()).unwrap();
        assert_eq!(back, model);
        for i in 0..7 {
            assert_eq!(
                back.weights()[(i, 0)].to_bits(),
                model.weights()[(i, 0)].to_bits()
            );
        }
    }

    #[test]
    fn rejects_wrong_format_tag() {
        let text = r#"{"format":"other","version":1,"d":1,"m":1,"sigma":1.0,"seed":0,"head":"logistic","lambda":0.0,"classes":2,"weights":[[0.0]]}"#;
        assert!(read_model(text.as_bytes()).is_err());
    }
}
