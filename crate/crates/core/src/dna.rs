//! Nucleotide helpers and 2-bit packed k-mers.
//!
//! Bases are encoded A=0, C=1, G=2, T=3 so that the complement of `b` is `3 - b`.
//! A k-mer of length `k <= 64` is packed into a `u128`, first base in the most
//! significant position.

pub const BASES: [u8; 4] = *b"ACGT";

/// Longest k-mer that fits the packed representation.
pub const MAX_K: usize = 64;

#[inline]
pub fn encode(base: u8) -> Option<u8> {
    match base {
        b'A' | b'a' => Some(0),
        b'C' | b'c' => Some(1),
        b'G' | b'g' => Some(2),
        b'T' | b't' => Some(3),
        _ => None,
    }
}

#[inline]
pub fn decode(code: u8) -> u8 {
    BASES[(code & 3) as usize]
}

#[inline]
pub fn complement(base: u8) -> u8 {
    match base {
        b'A' => b'T',
        b'C' => b'G',
        b'G' => b'C',
        b'T' => b'A',
        b'a' => b't',
        b'c' => b'g',
        b'g' => b'c',
        b't' => b'a',
        other => other,
    }
}

pub fn revcomp(seq: &[u8]) -> Vec<u8> {
    seq.iter().rev().map(|&b| complement(b)).collect()
}

/// True when every byte is one of `ACGT` (upper case).
pub fn is_acgt(seq: &[u8]) -> bool {
    seq.iter().all(|b| matches!(b, b'A' | b'C' | b'G' | b'T'))
}

#[inline]
fn mask(k: usize) -> u128 {
    if k >= 64 {
        u128::MAX
    } else {
        (1u128 << (2 * k)) - 1
    }
}

/// Packs `seq` (length `k`) into a `u128`. Returns `None` on a non-ACGT base.
pub fn pack(seq: &[u8]) -> Option<u128> {
    debug_assert!(seq.len() <= MAX_K);
    let mut x = 0u128;
    for &b in seq {
        x = (x << 2) | encode(b)? as u128;
    }
    Some(x)
}

pub fn unpack(x: u128, k: usize) -> Vec<u8> {
    (0..k)
        .map(|i| decode(((x >> (2 * (k - 1 - i))) & 3) as u8))
        .collect()
}

/// Reverse complement of a packed k-mer.
pub fn rc_packed(x: u128, k: usize) -> u128 {
    let mut fwd = x;
    let mut rc = 0u128;
    for _ in 0..k {
        rc = (rc << 2) | (3 - (fwd & 3));
        fwd >>= 2;
    }
    rc
}

#[inline]
pub fn canonical(x: u128, k: usize) -> u128 {
    x.min(rc_packed(x, k))
}

/// Appends `code` at the right end, dropping the leftmost base.
#[inline]
pub fn push_right(x: u128, code: u8, k: usize) -> u128 {
    ((x << 2) | code as u128) & mask(k)
}

/// Prepends `code` at the left end, dropping the rightmost base.
#[inline]
pub fn push_left(x: u128, code: u8, k: usize) -> u128 {
    (x >> 2) | ((code as u128) << (2 * (k - 1)))
}

#[inline]
pub fn last_base(x: u128) -> u8 {
    (x & 3) as u8
}

#[inline]
pub fn first_base(x: u128, k: usize) -> u8 {
    ((x >> (2 * (k - 1))) & 3) as u8
}

/// Rolling iterator over `(position, forward k-mer, reverse-complement k-mer)`.
/// Windows containing a non-ACGT base are skipped.
pub struct KmerIter<'a> {
    seq: &'a [u8],
    k: usize,
    pos: usize,
    fwd: u128,
    rev: u128,
    valid: usize,
}

impl<'a> KmerIter<'a> {
    pub fn new(seq: &'a [u8], k: usize) -> Self {
        assert!((1..=MAX_K).contains(&k), "k must be in 1..=64");
        KmerIter {
            seq,
            k,
            pos: 0,
            fwd: 0,
            rev: 0,
            valid: 0,
        }
    }
}

impl Iterator for KmerIter<'_> {
    type Item = (usize, u128, u128);

    fn next(&mut self) -> Option<Self::Item> {
        let k = self.k;
        while self.pos < self.seq.len() {
            let b = self.seq[self.pos];
            self.pos += 1;
            match encode(b) {
                Some(c) => {
                    self.fwd = push_right(self.fwd, c, k);
                    self.rev = push_left(self.rev, 3 - c, k);
                    self.valid += 1;
                    if self.valid >= k {
                        return Some((self.pos - k, self.fwd, self.rev));
                    }
                }
                None => self.valid = 0,
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn revcomp_roundtrip() {
        assert_eq!(revcomp(b"AACGT"), b"ACGTT");
        assert_eq!(revcomp(&revcomp(b"GATTACA")), b"GATTACA");
    }

    #[test]
    fn pack_unpack_and_rc() {
        let s = b"ACGTTGCA";
        let x = pack(s).unwrap();
        assert_eq!(unpack(x, 8), s);
        assert_eq!(unpack(rc_packed(x, 8), 8), revcomp(s));
        assert!(pack(b"ACNT").is_none());
    }

    #[test]
    fn rolling_matches_direct_packing() {
        let s = b"ACGGTACNGTTACGATCCA";
        let k = 5;
        let got: Vec<_> = KmerIter::new(s, k).collect();
        let mut want = Vec::new();
        for i in 0..=s.len() - k {
            if let Some(x) = pack(&s[i..i + k]) {
                want.push((i, x, pack(&revcomp(&s[i..i + k])).unwrap()));
            }
        }
        assert_eq!(got, want);
    }

    #[test]
    fn k64_edges() {
        let s: Vec<u8> = (0..64).map(|i| BASES[i % 4]).collect();
        let x = pack(&s).unwrap();
        assert_eq!(unpack(x, 64), s);
        assert_eq!(unpack(rc_packed(x, 64), 64), revcomp(&s));
        assert_eq!(first_base(x, 64), 0);
        assert_eq!(last_base(x), 3);
    }
}
