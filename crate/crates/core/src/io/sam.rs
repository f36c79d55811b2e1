//! Minimal text SAM reader covering the fields needed to rebuild a mapping table.

use std::io::BufRead;

use crate::error::{Error, Result};

pub const FLAG_PAIRED: u16 = 0x1;
pub const FLAG_UNMAPPED: u16 = 0x4;
pub const FLAG_FIRST: u16 = 0x40;
pub const FLAG_SECOND: u16 = 0x80;
pub const FLAG_SECONDARY: u16 = 0x100;
pub const FLAG_SUPPLEMENTARY: u16 = 0x800;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CigarOp {
    pub len: u32,
    pub op: u8,
}

impl CigarOp {
    pub fn consumes_reference(self) -> bool {
        matches!(self.op, b'M' | b'D' | b'N' | b'=' | b'X')
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamRecord {
    pub line: usize,
    pub qname: String,
    pub flag: u16,
    /// `None` when RNAME is `*`.
    pub rname: Option<String>,
    /// 1-based leftmost position; 0 when unavailable.
    pub pos: u64,
    pub cigar: Vec<CigarOp>,
}

impl SamRecord {
    pub fn is_unmapped(&self) -> bool {
        self.flag & FLAG_UNMAPPED != 0 || self.rname.is_none()
    }

    pub fn is_second_mate(&self) -> bool {
        self.flag & FLAG_SECOND != 0
    }

    /// Number of reference bases covered by the alignment.
    pub fn reference_span(&self) -> u64 {
        self.cigar
            .iter()
            .filter(|c| c.consumes_reference())
            .map(|c| c.len as u64)
            .sum()
    }
}

pub fn parse_cigar(text: &str) -> Option<Vec<CigarOp>> {
    if text == "*" {
        return Some(Vec::new());
    }
    let mut ops = Vec::new();
    let mut len: u64 = 0;
    let mut have_digits = false;
    for b in text.bytes() {
        if b.is_ascii_digit() {
            len = len * 10 + (b - b'0') as u64;
            if len > u32::MAX as u64 {
                return None;
            }
            have_digits = true;
        } else {
            if !have_digits || !matches!(b, b'M' | b'I' | b'D' | b'N' | b'S' | b'H' | b'P' | b'=' | b'X') {
                return None;
            }
            ops.push(CigarOp { len: len as u32, op: b });
            len = 0;
            have_digits = false;
        }
    }
    if have_digits || ops.is_empty() {
        return None;
    }
    Some(ops)
}

/// Parses one alignment line (not a header line).
pub fn parse_sam_line(line: &str, line_no: usize) -> Result<SamRecord> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() < 11 {
        return Err(Error::parse(
            line_no,
            format!("expected at least 11 tab-separated fields, found {}", fields.len()),
        ));
    }
    let flag: u16 = fields[1]
        .parse()
        .map_err(|_| Error::parse(line_no, format!("invalid FLAG `{}`", fields[1])))?;
    let pos: u64 = fields[3]
        .parse()
        .map_err(|_| Error::parse(line_no, format!("invalid POS `{}`", fields[3])))?;
    let cigar = parse_cigar(fields[5])
        .ok_or_else(|| Error::parse(line_no, format!("invalid CIGAR `{}`", fields[5])))?;
    let rname = match fields[2] {
        "*" => None,
        "" => return Err(Error::parse(line_no, "empty RNAME")),
        name => Some(name.to_string()),
    };
    if fields[0].is_empty() {
        return Err(Error::parse(line_no, "empty QNAME"));
    }
    Ok(SamRecord {
        line: line_no,
        qname: fields[0].to_string(),
        flag,
        rname,
        pos,
        cigar,
    })
}

/// Reads all alignment records; `@` header lines and blank lines are skipped.
pub fn parse_sam<R: BufRead>(mut reader: R) -> Result<Vec<SamRecord>> {
    let mut out = Vec::new();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        while matches!(buf.last(), Some(b'\n' | b'\r')) {
            buf.pop();
        }
        if buf.is_empty() || buf[0] == b'@' {
            continue;
        }
        let line = std::str::from_utf8(&buf)
            .map_err(|_| Error::parse(line_no, "line is not valid UTF-8"))?;
        out.push(parse_sam_line(line, line_no)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cigar_spans() {
        let ops = parse_cigar("5S10M2I3D4=1X").unwrap();
        assert_eq!(ops.len(), 6);
        let rec = SamRecord {
            line: 1,
            qname: "q".into(),
            flag: 0,
            rname: Some("0".into()),
            pos: 1,
            cigar: ops,
        };
        assert_eq!(rec.reference_span(), 18);
        assert!(parse_cigar("10").is_none());
        assert!(parse_cigar("M").is_none());
        assert!(parse_cigar("3Q").is_none());
        assert_eq!(parse_cigar("*"), Some(vec![]));
    }

    #[test]
    fn header_skipped_and_errors_carry_line() {
        let text = "@HD\tVN:1.6\n@SQ\tSN:0\tLN:100\nr1\t67\t0\t5\t60\t51M\t=\t1\t0\t*\t*\n";
        let recs = parse_sam(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].line, 3);
        assert_eq!(recs[0].pos, 5);

        let bad = "@HD\tVN:1.6\nr1\tx\t0\t5\t60\t51M\t=\t1\t0\t*\t*\n";
        assert!(matches!(parse_sam(bad.as_bytes()), Err(Error::Parse { line: 2, .. })));
        let short = "r1\t0\t0\n";
        assert!(matches!(parse_sam(short.as_bytes()), Err(Error::Parse { line: 1, .. })));
    }
}
