use std::io::{Read, Write};

use faer::Mat;

use super::LabeledDataset;
use crate::error::{Error, Result};

/// Header `x0,...,x{d-1},label`; floats in shortest round-trip form.
pub fn write_labeled_csv<W: Write>(ds: &LabeledDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..ds.dim()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for i in 0..ds.len() {
        let mut rec: Vec<String> = (0..ds.dim())
            .map(|j| ds.features()[(i, j)].to_string())
            .collect();
        rec.push(ds.labels()[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Read the format written by [`write_labeled_csv`]. Without `classes`, the
/// class count is `max(label) + 1` (at least 2).
pub fn read_labeled_csv<R: Read>(input: R, classes: Option<usize>) -> Result<LabeledDataset> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let d = header
        .len()
        .checked_sub(1)
        .filter(|&d| d > 0)
        .ok_or_else(|| Error::Parse {
            offset: 0,
            message: "header needs at least one feature column and a label".into(),
        })?;
    for (j, name) in header.iter().take(d).enumerate() {
        if name != format!("x{j}") {
            return Err(Error::Parse {
                offset: 0,
                message: format!("unexpected column {name:?} at {j}"),
            });
        }
    }
    if &header[d] != "label" {
        return Err(Error::Parse {
            offset: 0,
            message: format!("last column must be label, got {:?}", &header[d]),
        });
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let offset = rec.position().map_or(0, |p| p.byte() as usize);
        let bad = |what: &str| Error::Parse {
            offset,
            message: format!("cannot parse {what}"),
        };
        for field in rec.iter().take(d) {
            values.push(field.trim().parse::<f64>().map_err(|_| bad(field))?);
        }
        labels.push(rec[d].trim().parse::<usize>().map_err(|_| bad(&rec[d]))?);
    }
    let n = labels.len();
    let features = Mat::from_fn(n, d, |i, j| values[i * d + j]);
    let classes =
        classes.unwrap_or_else(|| labels.iter().copied().max().map_or(2, |m| (m + 1).max(2)));
    LabeledDataset::new(features, labels, classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_gaussian_binary;

    #[test]
    fn round_trips_exactly() {
        let ds = gen_gaussian_binary(12, 3, 0.4, 5).unwrap();
        let mut buf = Vec::new();
        write_labeled_csv(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x0,x1,x2,label\n"));
        let back = read_labeled_csv(buf.as_slice(), Some(2)).unwrap();
        assert_eq!(back.features(), ds.features());
        assert_eq!(back.labels(), ds.labels());
    }

    #[test]
    fn rejects_bad_header() {
        assert!(read_labeled_csv("a,label\n1,0\n".as_bytes(), None).is_err());
        assert!(read_labeled_csv("x0,y\n1,0\n".as_bytes(), None).is_err());
    }
}
