use std::io::{BufRead, Write};

use rayon::prelude::*;
use rustc_hash::FxHashMap;

use super::UnitigRecord;
use crate::dna::{canonical, pack, KmerIter};
use crate::error::{Error, Result};
use crate::io::sam::{parse_sam, FLAG_PAIRED};
use crate::io::tsv::read_rows;
use crate::simdata::ReadPair;

/// Unitig ids hit by the two mates of one read pair (sorted, deduplicated).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MateHits {
    pub fwd: Vec<u32>,
    pub rev: Vec<u32>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MappingTable {
    pub n_unitigs: usize,
    pub pairs: Vec<MateHits>,
    /// Per-unitig sum of per-base depth over all match sites.
    pub depth_bases: Vec<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Site {
    unitig: u32,
    pos: u32,
}

/// Exact k-mer index over unitigs in both orientations.
struct PrefixIndex {
    k: usize,
    first: FxHashMap<u128, Site>,
    more: FxHashMap<u128, Vec<Site>>,
}

impl PrefixIndex {
    fn build(unitigs: &[UnitigRecord], k: usize) -> Self {
        let mut first = FxHashMap::default();
        let mut more: FxHashMap<u128, Vec<Site>> = FxHashMap::default();
        for u in unitigs {
            for (pos, f, r) in KmerIter::new(&u.sequence, k) {
                let site = Site {
                    unitig: u.id as u32,
                    pos: pos as u32,
                };
                let key = f.min(r);
                if first.contains_key(&key) {
                    more.entry(key).or_default().push(site);
                } else {
                    first.insert(key, site);
                }
            }
        }
        PrefixIndex { k, first, more }
    }

    fn lookup(&self, prefix: &[u8], sites: &mut Vec<Site>) {
        sites.clear();
        if prefix.len() < self.k {
            return;
        }
        let Some(x) = pack(&prefix[..self.k]) else {
            return;
        };
        let key = canonical(x, self.k);
        if let Some(&s) = self.first.get(&key) {
            sites.push(s);
            if let Some(extra) = self.more.get(&key) {
                sites.extend_from_slice(extra);
            }
        }
    }
}

fn unitig_set(sites: &[Site]) -> Vec<u32> {
    let mut ids: Vec<u32> = sites.iter().map(|s| s.unitig).collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// Matches the first `k` bases of every mate exactly (either strand) against the
/// unitigs. Every match site is recorded, so repeats yield multi-unitig hit sets.
pub fn map_read_prefixes(reads: &[ReadPair], unitigs: &[UnitigRecord], k: usize) -> MappingTable {
    let index = PrefixIndex::build(unitigs, k);
    let n = unitigs.len();
    const CHUNK: usize = 4096;
    let parts: Vec<(Vec<MateHits>, Vec<u64>)> = reads
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut depth = vec![0u64; n];
            let mut sites = Vec::new();
            let mut hits = Vec::with_capacity(chunk.len());
            for r in chunk {
                let mut pair = MateHits::default();
                for (mate, out) in [(&r.fwd, &mut pair.fwd), (&r.rev, &mut pair.rev)] {
                    index.lookup(mate, &mut sites);
                    for s in &sites {
                        depth[s.unitig as usize] += k as u64;
                    }
                    *out = unitig_set(&sites);
                }
                hits.push(pair);
            }
            (hits, depth)
        })
        .collect();
    let mut table = MappingTable {
        n_unitigs: n,
        pairs: Vec::with_capacity(reads.len()),
        depth_bases: vec![0; n],
    };
    for (hits, depth) in parts {
        table.pairs.extend(hits);
        for (acc, d) in table.depth_bases.iter_mut().zip(depth) {
            *acc += d;
        }
    }
    table
}

/// Mean coverage = total per-base depth / unitig length.
pub fn finalize_coverage(unitigs: &[UnitigRecord], table: &MappingTable) -> Result<Vec<UnitigRecord>> {
    if table.depth_bases.len() != unitigs.len() {
        return Err(Error::Shape(format!(
            "mapping covers {} unitigs, expected {}",
            table.depth_bases.len(),
            unitigs.len()
        )));
    }
    Ok(unitigs
        .iter()
        .zip(&table.depth_bases)
        .map(|(u, &d)| UnitigRecord {
            mean_coverage: if u.is_empty() { 0.0 } else { d as f64 / u.len() as f64 },
            ..u.clone()
        })
        .collect())
}

/// Builds a mapping table from SAM alignments against the unitigs (matched by name).
/// Primary, secondary and supplementary records all contribute; unmapped records
/// leave their mate's set empty.
pub fn import_sam<R: BufRead>(unitigs: &[UnitigRecord], reader: R) -> Result<MappingTable> {
    let records = parse_sam(reader)?;
    let names: FxHashMap<&str, usize> = unitigs.iter().map(|u| (u.name.as_str(), u.id)).collect();
    let mut unknown: Vec<String> = Vec::new();
    let mut order: FxHashMap<String, usize> = FxHashMap::default();
    let mut pairs: Vec<MateHits> = Vec::new();
    let mut depth = vec![0u64; unitigs.len()];
    for rec in &records {
        let slot = *order.entry(rec.qname.clone()).or_insert_with(|| {
            pairs.push(MateHits::default());
            pairs.len() - 1
        });
        if rec.is_unmapped() {
            continue;
        }
        let name = rec.rname.as_deref().unwrap_or("*");
        let Some(&uid) = names.get(name) else {
            if !unknown.iter().any(|n| n == name) {
                unknown.push(name.to_string());
            }
            continue;
        };
        let second = rec.flag & FLAG_PAIRED != 0 && rec.is_second_mate();
        let set = if second { &mut pairs[slot].rev } else { &mut pairs[slot].fwd };
        set.push(uid as u32);
        let len = unitigs[uid].len() as u64;
        let start = rec.pos.saturating_sub(1).min(len);
        depth[uid] += rec.reference_span().min(len - start);
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownReference(unknown));
    }
    for p in &mut pairs {
        p.fwd.sort_unstable();
        p.fwd.dedup();
        p.rev.sort_unstable();
        p.rev.dedup();
    }
    Ok(MappingTable {
        n_unitigs: unitigs.len(),
        pairs,
        depth_bases: depth,
    })
}

fn write_ids<W: Write>(w: &mut W, ids: &[u32]) -> std::io::Result<()> {
    if ids.is_empty() {
        return w.write_all(b"-");
    }
    for (i, id) in ids.iter().enumerate() {
        if i > 0 {
            w.write_all(b",")?;
        }
        write!(w, "{id}")?;
    }
    Ok(())
}

impl MappingTable {
    /// Writes `#n_unitigs=N` followed by one `fwd_ids<TAB>rev_ids` row per pair
    /// (comma-separated ids, `-` when empty).
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "#n_unitigs={}", self.n_unitigs)?;
        for p in &self.pairs {
            write_ids(&mut w, &p.fwd)?;
            w.write_all(b"\t")?;
            write_ids(&mut w, &p.rev)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the hit sets back. Depth accumulators are not stored in this format
    /// and come back as zeros.
    pub fn read_tsv<R: BufRead>(mut reader: R) -> Result<Self> {
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let n_unitigs: usize = first
            .trim_end()
            .strip_prefix("#n_unitigs=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse(1, "expected `#n_unitigs=N` header"))?;
        let rows = read_rows(reader)?;
        let mut pairs = Vec::with_capacity(rows.len());
        for row in rows {
            row.expect_len(2)?;
            let line = row.line + 1;
            let parse = |s: &str| -> Result<Vec<u32>> {
                if s == "-" {
                    return Ok(Vec::new());
                }
                let mut ids = s
                    .split(',')
                    .map(|t| {
                        let id: u32 = t
                            .parse()
                            .map_err(|_| Error::parse(line, format!("invalid unitig id `{t}`")))?;
                        if id as usize >= n_unitigs {
                            return Err(Error::parse(line, format!("unitig id {id} >= {n_unitigs}")));
                        }
                        Ok(id)
                    })
                    .collect::<Result<Vec<u32>>>()?;
                ids.sort_unstable();
                ids.dedup();
                Ok(ids)
            };
            pairs.push(MateHits {
                fwd: parse(&row.fields[0])?,
                rev: parse(&row.fields[1])?,
            });
        }
        Ok(MappingTable {
            n_unitigs,
            pairs,
            depth_bases: vec![0; n_unitigs],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dna::revcomp;

    fn unitig(id: usize, seq: &[u8]) -> UnitigRecord {
        UnitigRecord {
            id,
            name: id.to_string(),
            sequence: seq.to_vec(),
            mean_coverage: 0.0,
        }
    }

    fn pair(fwd: &[u8], rev: &[u8]) -> ReadPair {
        ReadPair {
            id: "p".into(),
            fwd: fwd.to_vec(),
            rev: rev.to_vec(),
            origin: None,
        }
    }

    #[test]
    fn unique_shared_and_mismatched_prefixes() {
        let k = 5;
        let us = vec![
            unitig(0, b"AAAAACGTTGCA"),
            unitig(1, b"CCCCCGGATCAC"),
            unitig(2, b"TTTTTGGATCTT"),
            unitig(3, b"GGATCGGGGG"),
        ];
        // unique forward match
        let t = map_read_prefixes(&[pair(b"CGTTGAAAA", b"ACGTA")], &us, k);
        assert_eq!(t.pairs[0].fwd, vec![0]);
        // reverse-complement prefix of unitig 0 content
        let t = map_read_prefixes(&[pair(&revcomp(b"TTGCA"), b"AAAA")], &us, k);
        assert_eq!(t.pairs[0].fwd, vec![0]);
        assert!(t.pairs[0].rev.is_empty());
        // GGATC planted in three unitigs
        let t = map_read_prefixes(&[pair(b"GGATCAAAA", b"GGATC")], &us, k);
        assert_eq!(t.pairs[0].fwd, vec![1, 2, 3]);
        assert_eq!(t.depth_bases, vec![0, 10, 10, 10]);
        // substitution inside the prefix
        let t = map_read_prefixes(&[pair(b"CGATGAAA", b"CGATG")], &us, k);
        assert!(t.pairs[0].fwd.is_empty());
    }

    #[test]
    fn coverage_from_depth() {
        let k = 4;
        let us = vec![unitig(0, b"ACGT"), unitig(1, b"GGGCTTTA")];
        let mut reads = vec![pair(b"ACGTAAA", b"TTTT"); 10];
        reads.extend(vec![pair(b"GGGCAA", b"CCCC"); 5]);
        let t = map_read_prefixes(&reads, &us, k);
        let cov = finalize_coverage(&us, &t).unwrap();
        assert_eq!(cov[0].mean_coverage, 10.0);
        assert_eq!(cov[1].mean_coverage, 2.5);

        let empty = map_read_prefixes(&[], &us, k);
        let cov = finalize_coverage(&us, &empty).unwrap();
        assert_eq!(cov[1].mean_coverage, 0.0);
    }

    #[test]
    fn sam_import() {
        let us = vec![unitig(0, &[b'A'; 60]), unitig(1, &[b'C'; 60]), unitig(2, &[b'G'; 60])];
        let sam = "@HD\tVN:1.6\n\
            q1\t67\t0\t1\t60\t51M\t1\t1\t0\t*\t*\n\
            q1\t131\t1\t5\t60\t51M\t0\t1\t0\t*\t*\n\
            q2\t77\t*\t0\t0\t*\t*\t0\t0\t*\t*\n\
            q2\t141\t*\t0\t0\t*\t*\t0\t0\t*\t*\n\
            q3\t65\t0\t1\t0\t51M\t*\t0\t0\t*\t*\n\
            q3\t321\t1\t1\t0\t51M\t*\t0\t0\t*\t*\n\
            q3\t321\t2\t20\t0\t10S41M\t*\t0\t0\t*\t*\n";
        let t = import_sam(&us, sam.as_bytes()).unwrap();
        assert_eq!(t.pairs.len(), 3);
        assert_eq!(t.pairs[0], MateHits { fwd: vec![0], rev: vec![1] });
        assert_eq!(t.pairs[1], MateHits::default());
        assert_eq!(t.pairs[2].fwd, vec![0, 1, 2]);
        assert_eq!(t.depth_bases, vec![102, 102, 41]);

        let bad = "q\t0\tnope\t1\t0\t5M\t*\t0\t0\t*\t*\n";
        match import_sam(&us, bad.as_bytes()) {
            Err(Error::UnknownReference(names)) => assert_eq!(names, vec!["nope"]),
            other => panic!("unexpected {other:?}"),
        }
        let malformed = "q\t0\t0\n";
        assert!(matches!(import_sam(&us, malformed.as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn mapping_tsv_roundtrip() {
        let t = MappingTable {
            n_unitigs: 4,
            pairs: vec![
                MateHits { fwd: vec![0, 3], rev: vec![] },
                MateHits { fwd: vec![], rev: vec![2] },
            ],
            depth_bases: vec![0; 4],
        };
        let mut buf = Vec::new();
        t.write_tsv(&mut buf).unwrap();
        assert_eq!(MappingTable::read_tsv(&buf[..]).unwrap(), t);
        assert!(MappingTable::read_tsv(&b"#n_unitigs=2\n5\t-\n"[..]).is_err());
    }
}
