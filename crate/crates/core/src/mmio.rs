//! MatrixMarket exchange format.
//!
//! Reads `coordinate` and `array` files with `real`, `integer` or `pattern` fields
//! and `general`, `symmetric` or `skew-symmetric` symmetry. Pattern entries get
//! value 1.0; symmetric storage is expanded; repeated coordinates are summed.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{JdsvdError, Result};
use crate::sparse::SparseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Field {
    Real,
    Pattern,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

fn parse_err(line: usize, msg: impl Into<String>) -> JdsvdError {
    JdsvdError::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_header(line: &str) -> Result<(Layout, Field, Symmetry)> {
    let lower = line.trim().to_ascii_lowercase();
    let mut tok = lower.split_whitespace();
    if tok.next() != Some("%%matrixmarket") {
        return Err(parse_err(1, "header must start with %%MatrixMarket"));
    }
    if tok.next() != Some("matrix") {
        return Err(parse_err(1, "only `matrix` objects are supported"));
    }
    let layout = match tok.next() {
        Some("coordinate") => Layout::Coordinate,
        Some("array") => Layout::Array,
        other => return Err(parse_err(1, format!("unknown format {other:?}"))),
    };
    let field = match tok.next() {
        Some("real") | Some("double") | Some("integer") => Field::Real,
        Some("pattern") => Field::Pattern,
        Some(f @ ("complex" | "hermitian")) => return Err(JdsvdError::UnsupportedField(f.into())),
        other => return Err(parse_err(1, format!("unknown field {other:?}"))),
    };
    let symmetry = match tok.next() {
        Some("general") => Symmetry::General,
        Some("symmetric") => Symmetry::Symmetric,
        Some("skew-symmetric") => Symmetry::SkewSymmetric,
        Some("hermitian") => return Err(JdsvdError::UnsupportedField("hermitian".into())),
        other => return Err(parse_err(1, format!("unknown symmetry {other:?}"))),
    };
    if layout == Layout::Array && field == Field::Pattern {
        return Err(parse_err(1, "array layout cannot have a pattern field"));
    }
    Ok((layout, field, symmetry))
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("malformed {what}")))
}

/// Reads a MatrixMarket file into a [`SparseMatrix`].
pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    let path = path.as_ref();
    let io_err = |source| JdsvdError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    read_matrix_market(BufReader::new(file)).map_err(|e| match e {
        JdsvdError::Io { source, .. } => io_err(source),
        other => other,
    })
}

/// Parses MatrixMarket text from any buffered reader.
pub fn read_matrix_market(reader: impl BufRead) -> Result<SparseMatrix> {
    let mut lines = reader.lines().enumerate();
    let io = |source| JdsvdError::Io {
        path: "<reader>".into(),
        source,
    };

    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let (layout, field, symmetry) = parse_header(&header.map_err(io)?)?;

    // size line: first non-comment, non-blank line
    let mut size_line = None;
    for (idx, line) in lines.by_ref() {
        let line = line.map_err(io)?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        size_line = Some((idx + 1, t.to_string()));
        break;
    }
    let (size_lno, size_line) = size_line.ok_or_else(|| parse_err(2, "missing size line"))?;
    let mut tok = size_line.split_whitespace();
    let nrows: usize = parse_num(tok.next(), size_lno, "row count")?;
    let ncols: usize = parse_num(tok.next(), size_lno, "column count")?;
    let declared: usize = match layout {
        Layout::Coordinate => parse_num(tok.next(), size_lno, "entry count")?,
        Layout::Array => match symmetry {
            Symmetry::General => nrows * ncols,
            Symmetry::Symmetric => nrows * (nrows + 1) / 2,
            Symmetry::SkewSymmetric => nrows * (nrows.saturating_sub(1)) / 2,
        },
    };
    if nrows == 0 || ncols == 0 {
        return Err(parse_err(size_lno, "matrix dimensions must be positive"));
    }
    if symmetry != Symmetry::General && nrows != ncols {
        return Err(parse_err(size_lno, "symmetric storage requires a square matrix"));
    }

    let mut triplets = Vec::with_capacity(match symmetry {
        Symmetry::General => declared,
        _ => 2 * declared,
    });
    let mut push = |r: usize, c: usize, v: f64| {
        triplets.push((r, c, v));
        if r != c {
            match symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => triplets.push((c, r, v)),
                Symmetry::SkewSymmetric => triplets.push((c, r, -v)),
            }
        }
    };

    // array layout walks column-major, over the lower triangle when symmetric
    let mut array_pos = (0usize, 0usize);
    let mut count = 0usize;
    for (idx, line) in lines {
        let lno = idx + 1;
        let line = line.map_err(io)?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        if count == declared {
            return Err(parse_err(lno, format!("more than the declared {declared} entries")));
        }
        let mut tok = t.split_whitespace();
        match layout {
            Layout::Coordinate => {
                let r: usize = parse_num(tok.next(), lno, "row index")?;
                let c: usize = parse_num(tok.next(), lno, "column index")?;
                let v: f64 = match field {
                    Field::Pattern => 1.0,
                    Field::Real => parse_num(tok.next(), lno, "value")?,
                };
                if r == 0 || c == 0 || r > nrows || c > ncols {
                    return Err(JdsvdError::IndexOutOfBounds {
                        row: r,
                        col: c,
                        nrows,
                        ncols,
                    });
                }
                push(r - 1, c - 1, v);
            }
            Layout::Array => {
                let v: f64 = parse_num(tok.next(), lno, "value")?;
                let (r, c) = array_pos;
                if v != 0.0 {
                    push(r, c, v);
                }
                let first_row = |c: usize| match symmetry {
                    Symmetry::General => 0,
                    Symmetry::Symmetric => c,
                    Symmetry::SkewSymmetric => c + 1,
                };
                array_pos = if r + 1 < nrows {
                    (r + 1, c)
                } else {
                    (first_row(c + 1), c + 1)
                };
            }
        }
        count += 1;
    }
    if count < declared {
        return Err(parse_err(
            0,
            format!("expected {declared} entries, found {count}"),
        ));
    }
    SparseMatrix::from_triplets(nrows, ncols, triplets)
}

/// Writes `a` as `coordinate real general` with full 17-digit values.
pub fn write_matrix_market(a: &SparseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| JdsvdError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    (|| -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
        for (i, j, v) in a.triplets() {
            writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
        }
        w.flush()
    })()
    .map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<SparseMatrix> {
        read_matrix_market(s.as_bytes())
    }

    #[test]
    fn diagonal_read_back() {
        let a = parse(
            "%%MatrixMarket matrix coordinate real general\n% comment\n2 2 2\n1 1 3.0\n2 2 4.0\n",
        )
        .unwrap();
        assert_eq!((a.nrows(), a.ncols(), a.nnz()), (2, 2, 2));
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(1, 1), 4.0);
        assert_eq!(a.get(0, 1), 0.0);
    }

    #[test]
    fn duplicates_sum() {
        let a = parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n1 1 1.0\n")
            .unwrap();
        assert_eq!(a.nnz(), 1);
        assert_eq!(a.get(0, 0), 2.0);
    }

    #[test]
    fn pattern_and_symmetric() {
        let a = parse("%%MatrixMarket matrix coordinate pattern symmetric\n3 3 2\n2 1\n3 3\n")
            .unwrap();
        assert_eq!(a.get(1, 0), 1.0);
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(2, 2), 1.0);
        assert_eq!(a.nnz(), 3);
    }

    #[test]
    fn skew_symmetric_and_integer() {
        let a = parse("%%MatrixMarket matrix coordinate integer skew-symmetric\n2 2 1\n2 1 5\n")
            .unwrap();
        assert_eq!(a.get(1, 0), 5.0);
        assert_eq!(a.get(0, 1), -5.0);
    }

    #[test]
    fn array_general_and_symmetric() {
        let a = parse("%%MatrixMarket matrix array real general\n2 3\n1\n2\n3\n4\n5\n6\n").unwrap();
        assert_eq!(a.to_dense().row(0), vec![1.0, 3.0, 5.0]);
        assert_eq!(a.to_dense().row(1), vec![2.0, 4.0, 6.0]);
        let s = parse("%%MatrixMarket matrix array real symmetric\n2 2\n1\n2\n3\n").unwrap();
        assert_eq!(s.to_dense().row(0), vec![1.0, 2.0]);
        assert_eq!(s.to_dense().row(1), vec![2.0, 3.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n"),
            Err(JdsvdError::UnsupportedField(_))
        ));
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n"),
            Err(JdsvdError::IndexOutOfBounds { .. })
        ));
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1.0\n"),
            Err(JdsvdError::Parse { line: 3, .. })
        ));
        assert!(parse("%%NotMatrixMarket\n").is_err());
        assert!(parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n").is_err());
        assert!(parse("").is_err());
    }

    #[test]
    fn write_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.mtx");
        let a = SparseMatrix::from_triplets(3, 2, vec![(0, 1, 0.1), (2, 0, -1.0 / 3.0)]).unwrap();
        write_matrix_market(&a, &p).unwrap();
        let b = load_matrix_market(&p).unwrap();
        assert_eq!(a.to_dense(), b.to_dense());
        assert!(matches!(
            load_matrix_market(dir.path().join("missing.mtx")),
            Err(JdsvdError::Io { .. })
        ));
    }
}
