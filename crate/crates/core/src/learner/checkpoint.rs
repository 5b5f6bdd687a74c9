//! Plain-text checkpoint: a version line, then per tensor a
//! `tensor,<name>,<rows>,<cols>` header followed by `rows` CSV lines.

use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::Array2;

use super::model::ModelParams;
use crate::{Error, Result};

pub const VERSION_LINE: &str = "uygraph-checkpoint,1";

pub fn write_checkpoint<W: Write>(params: &ModelParams, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{VERSION_LINE}")?;
    for (name, t) in params.names.iter().zip(&params.tensors) {
        writeln!(out, "tensor,{name},{},{}", t.nrows(), t.ncols())?;
        for row in t.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(input: R, source: &Path) -> Result<ModelParams> {
    let err = |line: u64, msg: String| Error::Parse { file: source.to_path_buf(), line, msg };
    let mut lines = input.lines().enumerate().map(|(i, l)| (i as u64 + 1, l));
    match lines.next() {
        Some((_, Ok(l))) if l.trim() == VERSION_LINE => {}
        Some((n, _)) => return Err(err(n, format!("expected {VERSION_LINE:?}"))),
        None => return Err(err(0, "empty checkpoint".into())),
    }
    let mut params = ModelParams { names: Vec::new(), tensors: Vec::new() };
    while let Some((n, header)) = lines.next() {
        let header = header?;
        if header.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = header.split(',').collect();
        if parts.len() != 4 || parts[0] != "tensor" {
            return Err(err(n, format!("bad tensor header {header:?}")));
        }
        let rows: usize = parts[2].parse().map_err(|_| err(n, "bad row count".into()))?;
        let cols: usize = parts[3].parse().map_err(|_| err(n, "bad column count".into()))?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (m, line) = lines.next().ok_or_else(|| err(n, "truncated tensor".into()))?;
            let line = line?;
            let before = data.len();
            if cols > 0 {
                for v in line.split(',') {
                    data.push(v.trim().parse::<f64>().map_err(|_| err(m, format!("bad value {v:?}")))?);
                }
            }
            if data.len() - before != cols {
                return Err(err(m, format!("expected {cols} values")));
            }
        }
        let t = Array2::from_shape_vec((rows, cols), data).expect("shape checked");
        params.names.push(parts[1].to_string());
        params.tensors.push(t);
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let params = ModelParams {
            names: vec!["a".into(), "b".into()],
            tensors: vec![
                ndarray::array![[0.1, -1e-300, 1.0 / 3.0]],
                Array2::from_shape_fn((2, 2), |(i, j)| (i as f64 + 0.7).powf(j as f64 + 0.3)),
            ],
        };
        let mut buf = Vec::new();
        write_checkpoint(&params, &mut buf).unwrap();
        let back = read_checkpoint(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back, params);
    }

    #[test]
    fn rejects_bad_version() {
        let e = read_checkpoint("nope\n".as_bytes(), Path::new("x.ckpt")).unwrap_err();
        assert!(e.to_string().contains("x.ckpt"));
    }
}
