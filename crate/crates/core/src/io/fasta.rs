use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// One named sequence from a FASTA or FASTQ file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeqRecord {
    pub id: String,
    pub seq: Vec<u8>,
}

/// Upper-cases a sequence line and rejects anything outside `ACGT`.
pub(crate) fn clean_bases(raw: &[u8], line: usize) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(raw.len());
    for &b in raw {
        let u = b.to_ascii_uppercase();
        match u {
            b'A' | b'C' | b'G' | b'T' => out.push(u),
            b'N' => return Err(Error::parse(line, "ambiguous base 'N' is not supported")),
            _ => {
                return Err(Error::parse(
                    line,
                    format!("invalid nucleotide byte 0x{b:02x}"),
                ))
            }
        }
    }
    Ok(out)
}

pub(crate) fn header_id(header: &[u8]) -> String {
    let text = String::from_utf8_lossy(header);
    text.split_whitespace().next().unwrap_or("").to_string()
}

fn trim_eol(line: &mut Vec<u8>) {
    while matches!(line.last(), Some(b'\n' | b'\r')) {
        line.pop();
    }
}

/// Reads every record of a FASTA stream. Multi-line sequences are joined.
pub fn parse_fasta<R: BufRead>(mut reader: R) -> Result<Vec<SeqRecord>> {
    let mut records = Vec::new();
    let mut current: Option<SeqRecord> = None;
    let mut buf = Vec::new();
    let mut line_no = 0usize;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        trim_eol(&mut buf);
        if buf.is_empty() {
            continue;
        }
        if buf[0] == b'>' {
            if let Some(rec) = current.take() {
                records.push(rec);
            }
            let id = header_id(&buf[1..]);
            if id.is_empty() {
                return Err(Error::parse(line_no, "empty FASTA header"));
            }
            current = Some(SeqRecord { id, seq: Vec::new() });
        } else {
            let rec = current
                .as_mut()
                .ok_or_else(|| Error::parse(line_no, "sequence data before the first '>' header"))?;
            let bases = clean_bases(&buf, line_no)?;
            rec.seq.extend_from_slice(&bases);
        }
    }
    if let Some(rec) = current {
        records.push(rec);
    }
    Ok(records)
}

pub fn write_fasta<W: Write>(mut w: W, records: impl IntoIterator<Item = (String, Vec<u8>)>) -> Result<()> {
    for (id, seq) in records {
        writeln!(w, ">{id}")?;
        for chunk in seq.chunks(80) {
            w.write_all(chunk)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_line_records() {
        let text = b">g1 first genome\nACGT\nacgg\n\n>g2\nTTTT\n";
        let recs = parse_fasta(&text[..]).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].id, "g1");
        assert_eq!(recs[0].seq, b"ACGTACGG");
        assert_eq!(recs[1].seq, b"TTTT");
    }

    #[test]
    fn rejects_ambiguous_and_orphan_sequence() {
        let err = parse_fasta(&b">a\nACNT\n"[..]).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_fasta(&b"ACGT\n>a\n"[..]).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn write_then_read() {
        let mut out = Vec::new();
        let seq: Vec<u8> = b"ACGT".iter().cycle().take(170).copied().collect();
        write_fasta(&mut out, vec![("x".to_string(), seq.clone())]).unwrap();
        let recs = parse_fasta(&out[..]).unwrap();
        assert_eq!(recs[0].seq, seq);
    }
}
