//! Matrix Market text formats.
//!
//! Matrices use the coordinate format with 1-based indices, vectors the array
//! format. Values are printed with 17 significant digits so a write/read round
//! trip reproduces them exactly. Stored zeros are written out, so the sparsity
//! structure survives as well.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use crate::{Error, Result, SparseMatrix};

pub fn write_matrix_market(a: &SparseMatrix) -> String {
    let mut out = String::with_capacity(32 * a.nnz() + 64);
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz());
    for (i, j, v) in a.triplets() {
        let _ = writeln!(out, "{} {} {:.16e}", i + 1, j + 1, v);
    }
    out
}

pub fn write_vector(v: &[f64]) -> String {
    let mut out = String::with_capacity(26 * v.len() + 64);
    out.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(out, "{} 1", v.len());
    for x in v {
        let _ = writeln!(out, "{x:.16e}");
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

struct Header {
    array: bool,
    field: Field,
    symmetry: Symmetry,
}

fn parse_err(line: usize, message: impl ToString) -> Error {
    Error::Parse { line, message: message.to_string() }
}

fn parse_header(line: &str) -> Result<Header> {
    let words: Vec<String> = line.split_whitespace().map(|w| w.to_ascii_lowercase()).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(parse_err(1, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    let array = match words[2].as_str() {
        "coordinate" => false,
        "array" => true,
        other => return Err(parse_err(1, format!("unsupported format '{other}'"))),
    };
    let field = match words[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "pattern" if !array => Field::Pattern,
        other => return Err(parse_err(1, format!("unsupported field '{other}'"))),
    };
    let symmetry = match words[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(parse_err(1, format!("unsupported symmetry '{other}'"))),
    };
    Ok(Header { array, field, symmetry })
}

/// Data lines after the header, skipping comments and blank lines, paired
/// with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .skip(1)
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('%'))
}

fn parse_usize(tok: Option<&str>, line: usize, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| parse_err(line, format!("invalid {what} '{tok}'")))
}

fn parse_f64(tok: Option<&str>, line: usize) -> Result<f64> {
    let tok = tok.ok_or_else(|| parse_err(line, "missing value"))?;
    tok.parse().map_err(|_| parse_err(line, format!("invalid value '{tok}'")))
}

pub fn read_matrix_market(text: &str) -> Result<SparseMatrix> {
    let first = text.lines().next().ok_or_else(|| parse_err(1, "empty input"))?;
    let header = parse_header(first)?;
    let mut lines = data_lines(text);
    let (size_line, size) = lines.next().ok_or_else(|| parse_err(2, "missing size line"))?;
    let mut toks = size.split_whitespace();
    let n_rows = parse_usize(toks.next(), size_line, "row count")?;
    let n_cols = parse_usize(toks.next(), size_line, "column count")?;
    if header.symmetry != Symmetry::General && n_rows != n_cols {
        return Err(parse_err(size_line, "symmetric storage needs a square matrix"));
    }
    let mut triplets = Vec::new();
    if header.array {
        if toks.next().is_some() {
            return Err(parse_err(size_line, "array size line has extra fields"));
        }
        let mut count = 0usize;
        let mut last_line = size_line;
        for (ln, l) in lines {
            last_line = ln;
            let v = parse_f64(l.split_whitespace().next(), ln)?;
            // column-major order
            let (i, j) = (count % n_rows.max(1), count / n_rows.max(1));
            if j >= n_cols {
                return Err(parse_err(ln, "more entries than the header declares"));
            }
            triplets.push((i, j, v));
            count += 1;
        }
        if count != n_rows * n_cols {
            return Err(parse_err(last_line, format!("expected {} entries, found {count}", n_rows * n_cols)));
        }
        return SparseMatrix::from_triplets(n_rows, n_cols, &triplets);
    }
    let nnz = parse_usize(toks.next(), size_line, "entry count")?;
    let mut count = 0usize;
    let mut last_line = size_line;
    for (ln, l) in lines {
        last_line = ln;
        count += 1;
        if count > nnz {
            return Err(parse_err(ln, format!("more entries than the declared {nnz}")));
        }
        let mut t = l.split_whitespace();
        let i = parse_usize(t.next(), ln, "row index")?;
        let j = parse_usize(t.next(), ln, "column index")?;
        if i == 0 || j == 0 || i > n_rows || j > n_cols {
            return Err(parse_err(ln, format!("index ({i}, {j}) outside {n_rows}x{n_cols}")));
        }
        let v = match header.field {
            Field::Pattern => 1.0,
            _ => parse_f64(t.next(), ln)?,
        };
        let (i, j) = (i - 1, j - 1);
        triplets.push((i, j, v));
        if i != j {
            match header.symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => triplets.push((j, i, v)),
                Symmetry::SkewSymmetric => triplets.push((j, i, -v)),
            }
        }
    }
    if count != nnz {
        return Err(parse_err(last_line, format!("expected {nnz} entries, found {count}")));
    }
    SparseMatrix::from_triplets(n_rows, n_cols, &triplets)
}

/// Reads a single-column array (or coordinate) file as a vector.
pub fn read_vector(text: &str) -> Result<Vec<f64>> {
    let m = read_matrix_market(text)?;
    if m.n_cols() != 1 {
        return Err(parse_err(2, format!("expected one column, found {}", m.n_cols())));
    }
    let mut v = alloc::vec![0.0; m.n_rows()];
    for (i, _, x) in m.triplets() {
        v[i] = x;
    }
    Ok(v)
}
