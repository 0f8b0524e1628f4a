//! Matrix Market exchange format, coordinate and array layouts.
//!
//! Supported fields are `real`, `integer` and `pattern` (read as 1.0) with
//! `general`, `symmetric` and `skew-symmetric` symmetry. Symmetric storage is
//! expanded to general on read.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::RowMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    Skew,
}

struct Header {
    layout: Layout,
    field: Field,
    symmetry: Symmetry,
}

fn parse_header(line: &str) -> std::result::Result<Header, String> {
    let tokens: Vec<String> = line.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" {
        return Err("expected `%%MatrixMarket matrix <layout> <field> <symmetry>`".into());
    }
    if tokens[1] != "matrix" {
        return Err(format!("unsupported object `{}`", tokens[1]));
    }
    let layout = match tokens[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(format!("unknown layout `{other}`")),
    };
    let field = match tokens[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        "complex" => return Err("complex matrices are not supported".into()),
        other => return Err(format!("unknown field `{other}`")),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::Skew,
        "hermitian" => return Err("hermitian matrices are not supported".into()),
        other => return Err(format!("unknown symmetry `{other}`")),
    };
    if layout == Layout::Array && field == Field::Pattern {
        return Err("pattern field requires coordinate layout".into());
    }
    Ok(Header {
        layout,
        field,
        symmetry,
    })
}

fn parse_usize(tok: Option<&str>, what: &str) -> std::result::Result<usize, String> {
    let tok = tok.ok_or_else(|| format!("missing {what}"))?;
    tok.parse().map_err(|_| format!("invalid {what} `{tok}`"))
}

fn parse_value(tok: Option<&str>, field: Field) -> std::result::Result<f64, String> {
    match field {
        Field::Pattern => Ok(1.0),
        Field::Integer => {
            let tok = tok.ok_or("missing value")?;
            tok.parse::<i64>()
                .map(|v| v as f64)
                .map_err(|_| format!("invalid integer `{tok}`"))
        }
        Field::Real => {
            let tok = tok.ok_or("missing value")?;
            tok.parse::<f64>().map_err(|_| format!("invalid real `{tok}`"))
        }
    }
}

/// Reads a Matrix Market file into a [`RowMatrix`].
pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<RowMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_market(BufReader::new(file), path)
}

/// Parses Matrix Market content from any reader; `path` is used in error messages.
pub fn parse_matrix_market<R: BufRead>(reader: R, path: &Path) -> Result<RowMatrix> {
    let mut lines = reader.lines().enumerate();
    let err = |line: usize, msg: String| Error::parse(path, line, msg);

    let (_, first) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let first = first.map_err(|e| Error::io(path, e))?;
    let header = parse_header(&first).map_err(|m| err(1, m))?;

    let mut size: Option<(usize, usize, usize)> = None;
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    let mut seen = 0usize;
    // array layout cursor, column-major
    let (mut ai, mut aj) = (0usize, 0usize);

    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let mut toks = trimmed.split_whitespace();
        let Some((m, n, declared)) = size else {
            let m = parse_usize(toks.next(), "row count").map_err(|e| err(lineno, e))?;
            let n = parse_usize(toks.next(), "column count").map_err(|e| err(lineno, e))?;
            let declared = match header.layout {
                Layout::Coordinate => parse_usize(toks.next(), "entry count").map_err(|e| err(lineno, e))?,
                Layout::Array => match header.symmetry {
                    Symmetry::General => m * n,
                    Symmetry::Symmetric => n * (n + 1) / 2,
                    Symmetry::Skew => n * n.saturating_sub(1) / 2,
                },
            };
            if m == 0 || n == 0 {
                return Err(err(lineno, format!("matrix must be at least 1x1, got {m}x{n}")));
            }
            if header.symmetry != Symmetry::General && m != n {
                return Err(err(lineno, format!("symmetric storage requires a square matrix, got {m}x{n}")));
            }
            size = Some((m, n, declared));
            if header.layout == Layout::Array && header.symmetry == Symmetry::Skew {
                ai = 1;
            }
            continue;
        };
        if seen >= declared {
            return Err(err(lineno, format!("more entries than the declared {declared}")));
        }
        let (i, j, v) = match header.layout {
            Layout::Coordinate => {
                let i = parse_usize(toks.next(), "row index").map_err(|e| err(lineno, e))?;
                let j = parse_usize(toks.next(), "column index").map_err(|e| err(lineno, e))?;
                if i == 0 || j == 0 || i > m || j > n {
                    return Err(err(lineno, format!("index ({i}, {j}) out of bounds for {m}x{n}")));
                }
                let v = parse_value(toks.next(), header.field).map_err(|e| err(lineno, e))?;
                (i - 1, j - 1, v)
            }
            Layout::Array => {
                let v = parse_value(toks.next(), header.field).map_err(|e| err(lineno, e))?;
                let at = (ai, aj);
                ai += 1;
                if ai == m {
                    aj += 1;
                    ai = match header.symmetry {
                        Symmetry::General => 0,
                        Symmetry::Symmetric => aj,
                        Symmetry::Skew => aj + 1,
                    };
                }
                (at.0, at.1, v)
            }
        };
        if header.symmetry != Symmetry::General && i < j {
            return Err(err(lineno, format!("entry ({}, {}) above the diagonal in symmetric storage", i + 1, j + 1)));
        }
        match header.symmetry {
            Symmetry::General => entries.push((i, j, v)),
            Symmetry::Symmetric => {
                entries.push((i, j, v));
                if i != j {
                    entries.push((j, i, v));
                }
            }
            Symmetry::Skew => {
                if i == j {
                    if v != 0.0 {
                        return Err(err(lineno, "nonzero diagonal entry in skew-symmetric storage".into()));
                    }
                } else {
                    entries.push((i, j, v));
                    entries.push((j, i, -v));
                }
            }
        }
        seen += 1;
    }

    let (m, n, declared) = size.ok_or_else(|| err(1, "missing size line".into()))?;
    if seen != declared {
        return Err(err(0, format!("expected {declared} entries, found {seen}")));
    }
    RowMatrix::from_triplets(m, n, &entries)
}

/// Writes `matrix` as `coordinate real general` with 17 significant digits,
/// which round-trips every finite double exactly.
pub fn write_matrix_market(path: impl AsRef<Path>, matrix: &RowMatrix) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_matrix_market_to(&mut out, matrix).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_matrix_market_to<W: Write>(out: &mut W, matrix: &RowMatrix) -> std::io::Result<()> {
    let triplets = matrix.triplets();
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", matrix.nrows(), matrix.ncols(), triplets.len())?;
    for (i, j, v) in triplets {
        writeln!(out, "{} {} {:.16e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn parse(text: &str) -> Result<RowMatrix> {
        parse_matrix_market(Cursor::new(text.as_bytes()), Path::new("test.mtx"))
    }

    #[test]
    fn identity_coordinate() {
        let a = parse("%%MatrixMarket matrix coordinate real general\n% comment\n2 2 2\n1 1 1.0\n2 2 1.0\n").unwrap();
        assert_eq!(a.triplets(), vec![(0, 0, 1.0), (1, 1, 1.0)]);
    }

    #[test]
    fn symmetric_is_mirrored() {
        let a = parse("%%MatrixMarket matrix coordinate real symmetric\n3 3 2\n1 1 4.0\n3 1 -2.5\n").unwrap();
        assert_eq!(a.triplets(), vec![(0, 0, 4.0), (0, 2, -2.5), (2, 0, -2.5)]);
    }

    #[test]
    fn skew_and_pattern_and_integer() {
        let a = parse("%%MatrixMarket matrix coordinate integer skew-symmetric\n2 2 1\n2 1 3\n").unwrap();
        assert_eq!(a.triplets(), vec![(0, 1, -3.0), (1, 0, 3.0)]);
        let p = parse("%%MatrixMarket matrix coordinate pattern general\n2 3 2\n1 3\n2 1\n").unwrap();
        assert_eq!(p.triplets(), vec![(0, 2, 1.0), (1, 0, 1.0)]);
    }

    #[test]
    fn array_layouts() {
        let a = parse("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n").unwrap();
        // column-major
        assert_eq!(a.to_nalgebra(), nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 4.0]));
        let s = parse("%%MatrixMarket matrix array real symmetric\n2 2\n1\n2\n3\n").unwrap();
        assert_eq!(s.to_nalgebra(), nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]));
    }

    #[test]
    fn malformed_inputs() {
        assert!(parse("").is_err());
        assert!(parse("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n").is_err());
        assert!(parse("%%MatrixMarket vector coordinate real general\n1 1 1\n1 1 1\n").is_err());
        assert!(parse("%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 1\n").is_err());
        assert!(parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n").is_err());
        assert!(parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n").is_err());
        assert!(parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 x\n").is_err());
        assert!(parse("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 2 1.0\n").is_err());
    }

    proptest! {
        #[test]
        fn write_then_read_is_exact(
            m in 1usize..8,
            n in 1usize..8,
            raw in proptest::collection::vec((0usize..8, 0usize..8, -1e6f64..1e6), 0..20),
        ) {
            let entries: Vec<_> = raw.into_iter().map(|(i, j, v)| (i % m, j % n, v)).collect();
            let a = RowMatrix::from_triplets(m, n, &entries).unwrap();
            let mut buf = Vec::new();
            write_matrix_market_to(&mut buf, &a).unwrap();
            let b = parse_matrix_market(Cursor::new(buf), Path::new("mem")).unwrap();
            prop_assert_eq!((b.nrows(), b.ncols()), (m, n));
            prop_assert_eq!(a.triplets(), b.triplets());
        }
    }
}
