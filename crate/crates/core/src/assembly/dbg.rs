//! Node-centric de Bruijn graph over canonical k-mers and unitig compaction.
//!
//! Nodes are canonical k-mers; an oriented k-mer `x` has an edge to `y` when the
//! (k-1)-suffix of `x` equals the (k-1)-prefix of `y`. Unitigs are maximal paths
//! whose interior links have out-degree 1 on the left and in-degree 1 on the right.

use rayon::prelude::*;
use rustc_hash::FxHashSet;

use crate::dna::{self, canonical, push_left, push_right, rc_packed, KmerIter};

/// Frozen set of canonical k-mers.
pub struct KmerGraph {
    k: usize,
    kmers: FxHashSet<u128>,
}

impl KmerGraph {
    /// Collects the canonical k-mers of all sequences. Counting is sharded across
    /// worker threads and merged once.
    pub fn from_sequences<'a, I>(seqs: I, k: usize) -> Self
    where
        I: IntoParallelIterator<Item = &'a [u8]>,
    {
        let kmers = seqs
            .into_par_iter()
            .fold(FxHashSet::default, |mut set, seq| {
                for (_, f, r) in KmerIter::new(seq, k) {
                    set.insert(f.min(r));
                }
                set
            })
            .reduce(FxHashSet::default, |mut a, mut b| {
                if a.len() < b.len() {
                    std::mem::swap(&mut a, &mut b);
                }
                a.extend(b);
                a
            });
        KmerGraph { k, kmers }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.kmers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kmers.is_empty()
    }

    pub fn contains(&self, oriented: u128) -> bool {
        self.kmers.contains(&canonical(oriented, self.k))
    }

    pub fn successors(&self, x: u128) -> impl Iterator<Item = u128> + '_ {
        (0..4u8)
            .map(move |b| push_right(x, b, self.k))
            .filter(move |&y| self.contains(y))
    }

    pub fn predecessors(&self, x: u128) -> impl Iterator<Item = u128> + '_ {
        (0..4u8)
            .map(move |b| push_left(x, b, self.k))
            .filter(move |&y| self.contains(y))
    }

    fn sole_successor(&self, x: u128) -> Option<u128> {
        let mut it = self.successors(x);
        let first = it.next()?;
        if it.next().is_some() {
            None
        } else {
            Some(first)
        }
    }

    fn in_degree(&self, x: u128) -> usize {
        self.predecessors(x).count()
    }

    /// Walks right from `start` while links are unambiguous, marking k-mers used.
    fn extend_right(&self, start: u128, used: &mut FxHashSet<u128>) -> Vec<u128> {
        let k = self.k;
        let mut path = Vec::new();
        let mut cur = start;
        while let Some(next) = self.sole_successor(cur) {
            if self.in_degree(next) != 1 {
                break;
            }
            if !used.insert(canonical(next, k)) {
                break;
            }
            path.push(next);
            cur = next;
        }
        path
    }

    /// Emits every unitig as a base sequence. Each canonical k-mer lands in exactly
    /// one unitig. Output is sorted and each sequence is reported in its
    /// lexicographically smaller orientation.
    pub fn unitigs(&self) -> Vec<Vec<u8>> {
        let k = self.k;
        let mut seeds: Vec<u128> = self.kmers.iter().copied().collect();
        seeds.sort_unstable();
        let mut used: FxHashSet<u128> = FxHashSet::default();
        used.reserve(seeds.len());
        let mut out = Vec::new();
        for seed in seeds {
            if !used.insert(seed) {
                continue;
            }
            let right = self.extend_right(seed, &mut used);
            let left = self.extend_right(rc_packed(seed, k), &mut used);

            let mut seq = Vec::with_capacity(k + left.len() + right.len());
            // left extension is in reverse-complement orientation; flip it back
            let start = match left.last() {
                Some(&x) => rc_packed(x, k),
                None => seed,
            };
            seq.extend(dna::unpack(start, k));
            for &x in left.iter().rev().skip(1) {
                seq.push(dna::decode(dna::first_base(x, k) ^ 3));
            }
            if !left.is_empty() {
                seq.push(dna::decode(dna::last_base(seed)));
            }
            for &x in &right {
                seq.push(dna::decode(dna::last_base(x)));
            }
            let rc = dna::revcomp(&seq);
            out.push(if rc < seq { rc } else { seq });
        }
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spelled_kmers(seq: &[u8], k: usize) -> Vec<u128> {
        KmerIter::new(seq, k).map(|(_, f, r)| f.min(r)).collect()
    }

    #[test]
    fn single_read_single_unitig() {
        let g = KmerGraph::from_sequences(vec![&b"ACGTAC"[..]], 6);
        let u = g.unitigs();
        assert_eq!(u.len(), 1);
        assert!(u[0] == b"ACGTAC" || u[0] == dna::revcomp(b"ACGTAC"));
    }

    #[test]
    fn linear_string_reconstructs() {
        let g = KmerGraph::from_sequences(vec![&b"AAACCCGGG"[..]], 3);
        let u = g.unitigs();
        // CCG/CGG and their reverse complements interact; check k-mer partition instead
        let mut all: Vec<u128> = u.iter().flat_map(|s| spelled_kmers(s, 3)).collect();
        let mut want = spelled_kmers(b"AAACCCGGG", 3);
        all.sort_unstable();
        want.sort_unstable();
        want.dedup();
        assert_eq!(all, want);
    }

    #[test]
    fn left_extension_spelling() {
        // no (k-1)-mer occurs twice in either orientation, so the read is one unitig
        let read = b"GGATCACAGTCTACACTGCTCACT";
        let g = KmerGraph::from_sequences(vec![&read[..]], 7);
        let u = g.unitigs();
        assert_eq!(u.len(), 1);
        assert!(u[0] == read.to_vec() || u[0] == dna::revcomp(read));
    }
}
