//! MatrixMarket text I/O for dense real matrices.
//!
//! Reads `array` and `coordinate` files (real or integer, general or symmetric); writes
//! `coordinate` for matrices and `array` for vectors, with 17 significant digits so values
//! round-trip exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Array,
    Coordinate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

pub fn parse(text: &str, origin: &str) -> Result<DMatrix<f64>> {
    let err = |line: usize, msg: String| Error::Parse { path: origin.to_string(), line, msg };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    let (lno, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let words: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(err(lno, format!("bad header `{header}`")));
    }
    let layout = match words[2].as_str() {
        "array" => Layout::Array,
        "coordinate" => Layout::Coordinate,
        other => return Err(err(lno, format!("unsupported format `{other}`"))),
    };
    if !matches!(words[3].as_str(), "real" | "integer" | "double") {
        return Err(err(lno, format!("unsupported field `{}`", words[3])));
    }
    let symmetry = match words[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(err(lno, format!("unsupported symmetry `{other}`"))),
    };

    let mut data = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));
    let (lno, size_line) = data.next().ok_or_else(|| err(lno + 1, "missing size line".into()))?;
    let sizes: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| err(lno, format!("bad size `{t}`"))))
        .collect::<Result<_>>()?;
    let num = |lno: usize, t: &str| -> Result<f64> { t.parse().map_err(|_| err(lno, format!("bad number `{t}`"))) };

    match layout {
        Layout::Array => {
            let [rows, cols] = sizes[..] else {
                return Err(err(lno, "array size line needs rows and cols".into()));
            };
            let mut x = DMatrix::zeros(rows, cols);
            let positions: Vec<(usize, usize)> = match symmetry {
                Symmetry::General => (0..cols).flat_map(|j| (0..rows).map(move |i| (i, j))).collect(),
                Symmetry::Symmetric => (0..cols).flat_map(|j| (j..rows).map(move |i| (i, j))).collect(),
            };
            let mut pos = positions.iter();
            let mut last = lno;
            for (lno, line) in data {
                last = lno;
                for t in line.split_whitespace() {
                    let &(i, j) = pos.next().ok_or_else(|| err(lno, "too many entries".into()))?;
                    let v = num(lno, t)?;
                    x[(i, j)] = v;
                    if symmetry == Symmetry::Symmetric {
                        x[(j, i)] = v;
                    }
                }
            }
            if pos.next().is_some() {
                return Err(err(last, "too few entries".into()));
            }
            Ok(x)
        }
        Layout::Coordinate => {
            let [rows, cols, nnz] = sizes[..] else {
                return Err(err(lno, "coordinate size line needs rows, cols and nnz".into()));
            };
            let mut x = DMatrix::zeros(rows, cols);
            let mut count = 0;
            let mut last = lno;
            for (lno, line) in data {
                last = lno;
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != 3 {
                    return Err(err(lno, "expected `row col value`".into()));
                }
                let idx = |t: &str, max: usize| -> Result<usize> {
                    match t.parse::<usize>() {
                        Ok(k) if k >= 1 && k <= max => Ok(k - 1),
                        _ => Err(err(lno, format!("index `{t}` out of range"))),
                    }
                };
                let (i, j) = (idx(toks[0], rows)?, idx(toks[1], cols)?);
                let v = num(lno, toks[2])?;
                x[(i, j)] += v;
                if symmetry == Symmetry::Symmetric && i != j {
                    x[(j, i)] += v;
                }
                count += 1;
            }
            if count != nnz {
                return Err(err(last, format!("expected {nnz} entries, found {count}")));
            }
            Ok(x)
        }
    }
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path)?;
    parse(&text, &path.display().to_string())
}

pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let x = read_matrix(path)?;
    if x.ncols() != 1 {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 2,
            msg: format!("expected a single column, found {}", x.ncols()),
        });
    }
    Ok(x.column(0).into_owned())
}

/// Coordinate format; symmetric matrices store only their lower triangle.
pub fn format_coordinate(x: &DMatrix<f64>) -> String {
    let symmetric = x.is_square() && x == &x.transpose();
    let mut entries = Vec::new();
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            if x[(i, j)] != 0.0 && (!symmetric || i >= j) {
                entries.push((i, j, x[(i, j)]));
            }
        }
    }
    let kind = if symmetric { "symmetric" } else { "general" };
    let mut s = format!("%%MatrixMarket matrix coordinate real {kind}\n{} {} {}\n", x.nrows(), x.ncols(), entries.len());
    for (i, j, v) in entries {
        let _ = writeln!(s, "{} {} {:.16e}", i + 1, j + 1, v);
    }
    s
}

pub fn format_array(x: &DMatrix<f64>) -> String {
    let mut s = format!("%%MatrixMarket matrix array real general\n{} {}\n", x.nrows(), x.ncols());
    for v in x.iter() {
        let _ = writeln!(s, "{v:.16e}");
    }
    s
}

pub fn write_matrix(path: &Path, x: &DMatrix<f64>) -> Result<()> {
    Ok(fs::write(path, format_coordinate(x))?)
}

pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    let x = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
    Ok(fs::write(path, format_array(&x))?)
}
