//! Text formats: FASTA, FASTQ, SAM and the tab-separated interchange tables.

pub mod fasta;
pub mod fastq;
pub mod sam;
pub mod tsv;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};

pub use fasta::{parse_fasta, write_fasta, SeqRecord};
pub use fastq::{parse_fastq, write_fastq_record};
pub use sam::{parse_sam, SamRecord};

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::invalid(format!("cannot open {}: {e}", path.display())))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Reads a FASTA or FASTQ file, dispatching on the first non-blank byte.
pub fn read_sequences(path: &Path) -> Result<Vec<SeqRecord>> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    parse_sequences(&bytes)
}

pub fn parse_sequences(bytes: &[u8]) -> Result<Vec<SeqRecord>> {
    match bytes.iter().find(|b| !b.is_ascii_whitespace()) {
        Some(b'@') => parse_fastq(bytes),
        Some(b'>') => parse_fasta(bytes),
        None => Ok(Vec::new()),
        Some(_) => Err(Error::parse(1, "neither FASTA ('>') nor FASTQ ('@')")),
    }
}
