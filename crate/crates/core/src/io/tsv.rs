use std::io::{BufRead, Write};
use std::str::FromStr;

use ndarray::Array2;

use crate::error::{Error, Result};

/// A data row of a tab-separated file with its 1-based line number.
#[derive(Debug)]
pub struct Row {
    pub line: usize,
    pub fields: Vec<String>,
}

impl Row {
    pub fn expect_len(&self, n: usize) -> Result<()> {
        if self.fields.len() != n {
            return Err(Error::parse(
                self.line,
                format!("expected {n} columns, found {}", self.fields.len()),
            ));
        }
        Ok(())
    }

    pub fn get<T: FromStr>(&self, idx: usize, what: &str) -> Result<T> {
        let raw = self
            .fields
            .get(idx)
            .ok_or_else(|| Error::parse(self.line, format!("missing column `{what}`")))?;
        raw.parse()
            .map_err(|_| Error::parse(self.line, format!("invalid {what} `{raw}`")))
    }

    /// Parses a finite, non-negative real.
    pub fn get_nonneg_f64(&self, idx: usize, what: &str) -> Result<f64> {
        let v: f64 = self.get(idx, what)?;
        if !v.is_finite() || v < 0.0 {
            return Err(Error::parse(self.line, format!("{what} must be finite and >= 0")));
        }
        Ok(v)
    }
}

/// Reads rows, skipping blank lines and lines starting with `#`.
pub fn read_rows<R: BufRead>(reader: R) -> Result<Vec<Row>> {
    read_rows_after(reader, 0)
}

/// Like [`read_rows`] for a reader already advanced past `consumed` lines.
pub fn read_rows_after<R: BufRead>(mut reader: R, consumed: usize) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    let mut buf = Vec::new();
    let mut line_no = consumed;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        while matches!(buf.last(), Some(b'\n' | b'\r')) {
            buf.pop();
        }
        if buf.is_empty() || buf[0] == b'#' {
            continue;
        }
        let text = std::str::from_utf8(&buf)
            .map_err(|_| Error::parse(line_no, "line is not valid UTF-8"))?;
        rows.push(Row {
            line: line_no,
            fields: text.split('\t').map(str::to_string).collect(),
        });
    }
    Ok(rows)
}

/// Checks that row ids are exactly `0..n` in order, as required for per-unitig tables.
pub fn check_dense_ids(ids: &[(usize, usize)]) -> Result<()> {
    for (expected, &(line, id)) in ids.iter().enumerate() {
        if id != expected {
            return Err(Error::parse(
                line,
                format!("unitig ids must be dense and ordered: expected {expected}, found {id}"),
            ));
        }
    }
    Ok(())
}

/// Writes `unitig_id<TAB>{column}` rows of 0/1 labels.
pub fn write_labels_tsv<W: Write>(column: &str, labels: &[u8], mut w: W) -> Result<()> {
    writeln!(w, "#unitig_id\t{column}")?;
    for (i, l) in labels.iter().enumerate() {
        writeln!(w, "{i}\t{l}")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads dense `unitig_id<TAB>label` rows with labels in {0, 1}; extra columns are ignored.
pub fn read_labels_tsv<R: BufRead>(reader: R) -> Result<Vec<u8>> {
    let rows = read_rows(reader)?;
    let mut ids = Vec::with_capacity(rows.len());
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        if row.fields.len() < 2 {
            return Err(Error::parse(row.line, "expected unitig_id and label"));
        }
        ids.push((row.line, row.get::<usize>(0, "unitig_id")?));
        out.push(match row.fields[1].as_str() {
            "0" => 0,
            "1" => 1,
            other => return Err(Error::parse(row.line, format!("label must be 0 or 1, got `{other}`"))),
        });
    }
    check_dense_ids(&ids)?;
    Ok(out)
}

/// Writes a real matrix with a `#unitig_id` header naming its columns.
pub fn write_matrix_tsv<W: Write>(names: &[String], m: &Array2<f64>, mut w: W) -> Result<()> {
    if names.len() != m.ncols() {
        return Err(Error::Shape(format!("{} names for {} columns", names.len(), m.ncols())));
    }
    write!(w, "#unitig_id")?;
    for n in names {
        write!(w, "\t{n}")?;
    }
    writeln!(w)?;
    for (i, row) in m.outer_iter().enumerate() {
        write!(w, "{i}")?;
        for v in row {
            write!(w, "\t{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a matrix written by [`write_matrix_tsv`]; values must be finite.
pub fn read_matrix_tsv<R: BufRead>(mut reader: R) -> Result<(Vec<String>, Array2<f64>)> {
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let header = header.trim_end_matches(['\n', '\r']);
    let mut cols = header.split('\t');
    if cols.next() != Some("#unitig_id") {
        return Err(Error::parse(1, "expected a `#unitig_id` header"));
    }
    let names: Vec<String> = cols.map(str::to_string).collect();
    if names.is_empty() || names.iter().any(|n| n.is_empty()) {
        return Err(Error::parse(1, "header must name every column"));
    }
    let rows = read_rows_after(reader, 1)?;
    let mut ids = Vec::with_capacity(rows.len());
    let mut m = Array2::zeros((rows.len(), names.len()));
    for (i, row) in rows.iter().enumerate() {
        row.expect_len(names.len() + 1)?;
        ids.push((row.line, row.get::<usize>(0, "unitig_id")?));
        for (j, name) in names.iter().enumerate() {
            let v: f64 = row.get(j + 1, name)?;
            if !v.is_finite() {
                return Err(Error::parse(row.line, format!("{name} is not finite")));
            }
            m[[i, j]] = v;
        }
    }
    check_dense_ids(&ids)?;
    Ok((names, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_roundtrip() {
        let mut buf = Vec::new();
        write_labels_tsv("y_rf", &[1, 0, 0, 1], &mut buf).unwrap();
        assert!(buf.starts_with(b"#unitig_id\ty_rf\n"));
        assert_eq!(read_labels_tsv(&buf[..]).unwrap(), vec![1, 0, 0, 1]);
        assert!(read_labels_tsv(&b"0\t2\n"[..]).is_err());
        assert!(read_labels_tsv(&b"1\t1\n"[..]).is_err());
        assert_eq!(read_labels_tsv(&b"0\t1\tpseudo\n"[..]).unwrap(), vec![1]);
    }

    #[test]
    fn matrix_roundtrip() {
        let m = ndarray::array![[1.5, -2.0], [0.1, 3e-7]];
        let names = vec!["a".to_string(), "b".to_string()];
        let mut buf = Vec::new();
        write_matrix_tsv(&names, &m, &mut buf).unwrap();
        let (n2, m2) = read_matrix_tsv(&buf[..]).unwrap();
        assert_eq!((n2, m2), (names, m));
        assert!(matches!(
            read_matrix_tsv(&b"#unitig_id\ta\n0\t1\n2\t1\n"[..]),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(read_matrix_tsv(&b"0\t1\n"[..]).is_err());
    }

    #[test]
    fn skips_comments_and_reports_lines() {
        let rows = read_rows(&b"#h\n\n1\t2\n3\tx\n"[..]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].line, 4);
        assert_eq!(rows[0].get::<u32>(1, "b").unwrap(), 2);
        assert!(matches!(rows[1].get::<u32>(1, "b"), Err(Error::Parse { line: 4, .. })));
        assert!(rows[0].expect_len(3).is_err());
    }
}
