use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{CellStatus, SweepResult};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 13] = [
    "m",
    "curve",
    "teacher_m",
    "test_err",
    "train_err",
    "test_xent",
    "train_xent",
    "entropy",
    "mae_alpha_1",
    "mae_alpha_2",
    "mae_alpha_5",
    "mae_alpha_inf",
    "status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Rows in key order; wall times are left out so reruns match byte for byte.
pub fn write_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &result.rows {
        w.write_record([
            r.m.to_string(),
            r.curve.as_str().to_string(),
            r.teacher_m.map(|t| t.to_string()).unwrap_or_default(),
            cell(r.test_err),
            cell(r.train_err),
            cell(r.test_xent),
            cell(r.train_xent),
            cell(r.entropy),
            cell(r.mae_alpha_1),
            cell(r.mae_alpha_2),
            cell(r.mae_alpha_5),
            cell(r.mae_alpha_inf),
            match r.status {
                CellStatus::Ok => "ok".to_string(),
                CellStatus::Failed => "failed".to_string(),
            },
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn write_json<W: Write>(result: &SweepResult, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, result)?;
    out.write_all(b"\n")
        .map_err(|e| Error::io("<json writer>", e))?;
    Ok(())
}

pub fn read_json<R: Read>(input: R) -> Result<SweepResult> {
    Ok(serde_json::from_reader(input)?)
}

pub fn emit(result: &SweepResult, format: OutputFormat, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        OutputFormat::Csv => write_csv(result, &mut w)?,
        OutputFormat::Json => write_json(result, &mut w)?,
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::{run_sweep, SweepConfig};

    fn small() -> SweepResult {
        let cfg = SweepConfig::from_toml(
            r#"
m_grid = [1, 3]
sigma = 1.0
head = "ridge"
label_modes = ["soft", "hard"]
[train]
lambda = 1e-2
[data]
kind = "gaussian"
d = 2
mu = 1.0
n_teacher = 12
n_student = 12
n_test = 12
"#,
        )
        .unwrap();
        run_sweep(&cfg).unwrap()
    }

    fn csv_of(r: &SweepResult) -> String {
        let mut buf = Vec::new();
        write_csv(r, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn empty_result_gives_header_only() {
        let mut r = small();
        r.rows.clear();
        assert_eq!(csv_of(&r), format!("{}\n", CSV_HEADER.join(",")));
    }

    #[test]
    fn json_round_trip_reproduces_csv() {
        let r = small();
        let mut buf = Vec::new();
        write_json(&r, &mut buf).unwrap();
        let back = read_json(buf.as_slice()).unwrap();
        assert_eq!(back, r);
        assert_eq!(csv_of(&back), csv_of(&r));
    }

    #[test]
    fn failed_rows_have_empty_metrics() {
        let mut r = small();
        r.rows[0] =
            super::super::SweepRow::failed(1, super::super::Curve::Teacher, None, "boom".into());
        let text = csv_of(&r);
        let line = text.lines().nth(1).unwrap();
        assert_eq!(line, "1,teacher,,,,,,,,,,,failed");
    }

    #[test]
    fn unwritable_path_is_an_io_error() {
        let r = small();
        let err = emit(&r, OutputFormat::Csv, Path::new("/nonexistent-dir/x.csv")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
