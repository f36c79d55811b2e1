//! Unitig assembly from reads and read-prefix mapping back onto the unitigs.

mod dbg;
mod mapping;

use std::io::{BufRead, Write};

use rayon::prelude::*;

pub use dbg::KmerGraph;
pub use mapping::{finalize_coverage, import_sam, map_read_prefixes, MappingTable, MateHits};

use crate::dna::MAX_K;
use crate::error::{Error, Result};
use crate::io::tsv::{check_dense_ids, read_rows};
use crate::io::{self, SeqRecord};
use crate::simdata::ReadPair;

/// k-mer size used throughout the pipeline by default.
pub const DEFAULT_K: usize = 51;

#[derive(Clone, Debug, PartialEq)]
pub struct UnitigRecord {
    /// Dense index in `0..N`.
    pub id: usize,
    /// Name used by external tools (FASTA header); equals `id` for internally built unitigs.
    pub name: String,
    pub sequence: Vec<u8>,
    /// Mean per-base read depth.
    pub mean_coverage: f64,
}

impl UnitigRecord {
    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }
}

fn check_k(k: usize) -> Result<()> {
    if !(2..=MAX_K).contains(&k) {
        return Err(Error::invalid(format!("k must lie in 2..={MAX_K}, got {k}")));
    }
    Ok(())
}

/// Builds unitigs from both mates of every read pair.
pub fn build_unitigs(reads: &[ReadPair], k: usize) -> Result<Vec<UnitigRecord>> {
    check_k(k)?;
    if reads.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(r) = reads.iter().find(|r| r.fwd.len() < k || r.rev.len() < k) {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the length of a mate in read pair {}",
            r.id
        )));
    }
    let mates: Vec<&[u8]> = reads
        .par_iter()
        .flat_map_iter(|r| [r.fwd.as_slice(), r.rev.as_slice()])
        .collect();
    Ok(unitigs_from_sequences(mates, k))
}

/// Unitigs over arbitrary sequences (no length precondition beyond `k`).
pub fn unitigs_from_sequences(seqs: Vec<&[u8]>, k: usize) -> Vec<UnitigRecord> {
    let graph = KmerGraph::from_sequences(seqs, k);
    graph
        .unitigs()
        .into_iter()
        .enumerate()
        .map(|(id, sequence)| UnitigRecord {
            id,
            name: id.to_string(),
            sequence,
            mean_coverage: 0.0,
        })
        .collect()
}

/// Pairs two mate files by position, checking that ids agree up to `/1`/`/2`.
pub fn pair_mates(r1: Vec<SeqRecord>, r2: Vec<SeqRecord>) -> Result<Vec<ReadPair>> {
    use crate::io::fastq::strip_mate_suffix;
    if r1.len() != r2.len() {
        return Err(Error::invalid(format!(
            "mate files differ in record count ({} vs {})",
            r1.len(),
            r2.len()
        )));
    }
    r1.into_iter()
        .zip(r2)
        .enumerate()
        .map(|(i, (a, b))| {
            let ia = strip_mate_suffix(&a.id);
            let ib = strip_mate_suffix(&b.id);
            if ia != ib {
                return Err(Error::invalid(format!(
                    "mate ids disagree at record {}: `{}` vs `{}`",
                    i + 1,
                    a.id,
                    b.id
                )));
            }
            Ok(ReadPair {
                id: ia.to_string(),
                fwd: a.seq,
                rev: b.seq,
                origin: None,
            })
        })
        .collect()
}

pub fn write_unitigs_fasta<W: Write>(unitigs: &[UnitigRecord], w: W) -> Result<()> {
    io::write_fasta(
        w,
        unitigs.iter().map(|u| (u.name.clone(), u.sequence.clone())),
    )
}

/// Unitigs read from FASTA get dense ids in file order and keep their header names.
pub fn unitigs_from_fasta<R: BufRead>(reader: R) -> Result<Vec<UnitigRecord>> {
    let recs = io::parse_fasta(reader)?;
    let mut seen = rustc_hash::FxHashSet::default();
    recs.into_iter()
        .enumerate()
        .map(|(id, r)| {
            if !seen.insert(r.id.clone()) {
                return Err(Error::invalid(format!("duplicate unitig name `{}`", r.id)));
            }
            Ok(UnitigRecord {
                id,
                name: r.id,
                sequence: r.seq,
                mean_coverage: 0.0,
            })
        })
        .collect()
}

pub fn write_unitig_table<W: Write>(unitigs: &[UnitigRecord], mut w: W) -> Result<()> {
    writeln!(w, "#unitig_id\tlength\tmean_coverage")?;
    for u in unitigs {
        writeln!(w, "{}\t{}\t{}", u.id, u.len(), u.mean_coverage)?;
    }
    w.flush()?;
    Ok(())
}

/// Row of the unitig table: `(id, length, mean_coverage)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitigStats {
    pub id: usize,
    pub length: usize,
    pub mean_coverage: f64,
}

pub fn read_unitig_table<R: BufRead>(reader: R) -> Result<Vec<UnitigStats>> {
    let rows = read_rows(reader)?;
    let mut out = Vec::with_capacity(rows.len());
    let mut ids = Vec::with_capacity(rows.len());
    for row in rows {
        row.expect_len(3)?;
        let id: usize = row.get(0, "unitig_id")?;
        ids.push((row.line, id));
        out.push(UnitigStats {
            id,
            length: row.get(1, "length")?,
            mean_coverage: row.get_nonneg_f64(2, "mean_coverage")?,
        });
    }
    check_dense_ids(&ids)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(fwd: &[u8], rev: &[u8]) -> ReadPair {
        ReadPair {
            id: "p".into(),
            fwd: fwd.to_vec(),
            rev: rev.to_vec(),
            origin: None,
        }
    }

    #[test]
    fn rejects_short_mates_and_bad_k() {
        let r = vec![pair(b"ACGT", b"ACGTA")];
        assert!(build_unitigs(&r, 5).is_err());
        assert!(build_unitigs(&r, 1).is_err());
        assert!(build_unitigs(&[], 51).unwrap().is_empty());
    }

    #[test]
    fn unitig_table_roundtrip_and_dense_ids() {
        let us = vec![
            UnitigRecord {
                id: 0,
                name: "0".into(),
                sequence: b"ACGTA".to_vec(),
                mean_coverage: 2.5,
            },
            UnitigRecord {
                id: 1,
                name: "1".into(),
                sequence: b"ACG".to_vec(),
                mean_coverage: 0.0,
            },
        ];
        let mut buf = Vec::new();
        write_unitig_table(&us, &mut buf).unwrap();
        let back = read_unitig_table(&buf[..]).unwrap();
        assert_eq!(back[0].length, 5);
        assert_eq!(back[0].mean_coverage, 2.5);
        assert!(read_unitig_table(&b"1\t5\t1.0\n"[..]).is_err());
        assert!(read_unitig_table(&b"0\t5\t-1.0\n"[..]).is_err());
    }

    #[test]
    fn pairing_checks_ids() {
        let a = vec![SeqRecord { id: "x/1".into(), seq: b"AC".to_vec() }];
        let b = vec![SeqRecord { id: "x/2".into(), seq: b"GT".to_vec() }];
        assert_eq!(pair_mates(a.clone(), b).unwrap()[0].id, "x");
        let c = vec![SeqRecord { id: "y/2".into(), seq: b"GT".to_vec() }];
        assert!(pair_mates(a, c).is_err());
    }
}
