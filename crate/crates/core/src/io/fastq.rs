use std::io::{BufRead, Write};

use super::fasta::{clean_bases, header_id, SeqRecord};
use crate::error::{Error, Result};

/// Constant quality character written for simulated reads.
pub const CONST_QUAL: u8 = b'I';

struct Lines<R> {
    reader: R,
    line_no: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self, buf: &mut Vec<u8>) -> Result<bool> {
        buf.clear();
        if self.reader.read_until(b'\n', buf)? == 0 {
            return Ok(false);
        }
        self.line_no += 1;
        while matches!(buf.last(), Some(b'\n' | b'\r')) {
            buf.pop();
        }
        Ok(true)
    }
}

/// Reads FASTQ records (four lines each). Qualities are validated for length and discarded.
/// Blank lines between records are skipped.
pub fn parse_fastq<R: BufRead>(reader: R) -> Result<Vec<SeqRecord>> {
    let mut lines = Lines { reader, line_no: 0 };
    let mut records = Vec::new();
    let mut rec: [Vec<u8>; 4] = Default::default();
    loop {
        let mut have_header = false;
        while lines.next_line(&mut rec[0])? {
            if !rec[0].is_empty() {
                have_header = true;
                break;
            }
        }
        if !have_header {
            return Ok(records);
        }
        let start = lines.line_no;
        for line in rec.iter_mut().skip(1) {
            if !lines.next_line(line)? {
                return Err(Error::parse(lines.line_no + 1, "truncated FASTQ record"));
            }
        }
        push_record(&rec, start, &mut records)?;
    }
}

fn push_record(lines: &[Vec<u8>; 4], start: usize, records: &mut Vec<SeqRecord>) -> Result<()> {
    if lines[0].first() != Some(&b'@') {
        return Err(Error::parse(start, "FASTQ header must start with '@'"));
    }
    if lines[2].first() != Some(&b'+') {
        return Err(Error::parse(start + 2, "FASTQ separator must start with '+'"));
    }
    if lines[1].len() != lines[3].len() {
        return Err(Error::parse(
            start + 3,
            "quality string length differs from sequence length",
        ));
    }
    let id = header_id(&lines[0][1..]);
    if id.is_empty() {
        return Err(Error::parse(start, "empty FASTQ header"));
    }
    let seq = clean_bases(&lines[1], start + 1)?;
    records.push(SeqRecord { id, seq });
    Ok(())
}

/// Removes a trailing `/1` or `/2` mate suffix.
pub fn strip_mate_suffix(id: &str) -> &str {
    id.strip_suffix("/1")
        .or_else(|| id.strip_suffix("/2"))
        .unwrap_or(id)
}

pub fn write_fastq_record<W: Write>(w: &mut W, id: &str, seq: &[u8]) -> Result<()> {
    w.write_all(b"@")?;
    w.write_all(id.as_bytes())?;
    w.write_all(b"\n")?;
    w.write_all(seq)?;
    w.write_all(b"\n+\n")?;
    w.write_all(&vec![CONST_QUAL; seq.len()])?;
    w.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_records_and_blank_lines() {
        let text = b"@r1/1 extra\nACGT\n+\nIIII\n\n@r2/1\nGGCA\n+r2\nIIII\n";
        let recs = parse_fastq(&text[..]).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].id, "r1/1");
        assert_eq!(strip_mate_suffix(&recs[0].id), "r1");
        assert_eq!(recs[1].seq, b"GGCA");
    }

    #[test]
    fn error_lines() {
        let err = parse_fastq(&b"@r\nACGT\n+\nIII\n"[..]).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
        let err = parse_fastq(&b"@r\nACGT\n"[..]).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_fastq(&b">r\nACGT\n+\nIIII\n"[..]).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        let err = parse_fastq(&b"@r\nACNT\n+\nIIII\n"[..]).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn writer_output_parses() {
        let mut out = Vec::new();
        write_fastq_record(&mut out, "p0/2", b"ACGTT").unwrap();
        let recs = parse_fastq(&out[..]).unwrap();
        assert_eq!(recs[0].seq, b"ACGTT");
        assert_eq!(recs[0].id, "p0/2");
    }
}
