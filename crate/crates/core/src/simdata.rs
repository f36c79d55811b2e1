//! Backbone genomes with planted repeats, and a paired-end read simulator with
//! substitution errors and per-fragment point mutations.
//!
//! All generators are pure functions of their parameters and seed. Reads are
//! produced in fixed-size chunks with derived seeds, so the output does not
//! depend on the number of worker threads.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dna::{revcomp, BASES};
use crate::error::{Error, Result};
use crate::io::fastq::write_fastq_record;
use crate::seeds::derive_seed;

/// Base composition of planted repeat units, in `ACGT` order.
pub const REPEAT_BASE_SKEW: [f64; 4] = [0.4, 0.3, 0.2, 0.1];

pub const SHARED_REPEAT_ID: &str = "shared";

const READ_CHUNK: usize = 8192;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepeatInterval {
    pub start: usize,
    pub end: usize,
    pub repeat_id: String,
}

impl RepeatInterval {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Genome {
    pub id: String,
    pub sequence: Vec<u8>,
    /// Sorted by start, pairwise disjoint.
    pub repeat_intervals: Vec<RepeatInterval>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReadOrigin {
    /// Index into the genome slice the reads were simulated from.
    pub genome: u32,
    pub fwd_start: u32,
    pub rev_start: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReadPair {
    pub id: String,
    pub fwd: Vec<u8>,
    /// Sequencing orientation: reverse complement of the reference span.
    pub rev: Vec<u8>,
    pub origin: Option<ReadOrigin>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadSimConfig {
    pub read_len: usize,
    pub outer_dist: usize,
    pub err_rate: f64,
    pub mut_rate: f64,
}

impl Default for ReadSimConfig {
    fn default() -> Self {
        ReadSimConfig {
            read_len: 101,
            outer_dist: 500,
            err_rate: 0.02,
            mut_rate: 0.001,
        }
    }
}

/// Uniform i.i.d. backbone sequence.
pub fn gen_backbone(id: &str, length: usize, rng_seed: u64) -> Result<Genome> {
    if length == 0 {
        return Err(Error::invalid("backbone length must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let sequence = (0..length).map(|_| BASES[rng.gen_range(0..4)]).collect();
    Ok(Genome {
        id: id.to_string(),
        sequence,
        repeat_intervals: Vec::new(),
    })
}

/// Repeat unit drawn from [`REPEAT_BASE_SKEW`].
pub fn gen_repeat_unit(length: usize, rng_seed: u64) -> Result<Vec<u8>> {
    if length == 0 {
        return Err(Error::invalid("repeat length must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let cumulative = [0.4, 0.7, 0.9];
    Ok((0..length)
        .map(|_| {
            let u: f64 = rng.gen();
            let idx = cumulative.iter().position(|&c| u < c).unwrap_or(3);
            BASES[idx]
        })
        .collect())
}

/// Plants one genome-private unit and one unit shared by all genomes, each `copies`
/// times per genome, overwriting backbone bases at uniformly random non-overlapping
/// positions.
pub fn insert_repeats(
    genomes: &[Genome],
    repeat_len: usize,
    copies: usize,
    rng_seed: u64,
) -> Result<Vec<Genome>> {
    if genomes.len() < 2 {
        return Err(Error::invalid("repeat insertion needs at least two genomes"));
    }
    if copies == 0 {
        return Ok(genomes.to_vec());
    }
    if repeat_len == 0 {
        return Err(Error::invalid("repeat length must be at least 1"));
    }
    let shared = gen_repeat_unit(repeat_len, derive_seed(rng_seed, 0))?;
    let mut out = Vec::with_capacity(genomes.len());
    for (g, genome) in genomes.iter().enumerate() {
        let len = genome.sequence.len();
        let n_intervals = 2 * copies;
        let needed = n_intervals * repeat_len;
        if needed > len {
            return Err(Error::Capacity {
                needed,
                available: len,
            });
        }
        let private = gen_repeat_unit(repeat_len, derive_seed(rng_seed, 1 + g as u64))?;
        let private_id = format!("private_{}", genome.id);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(rng_seed, 1_000_003 + g as u64));

        // Uniform placement of n disjoint blocks: sorted offsets into the free space.
        let free = len - needed;
        let mut offsets: Vec<usize> = (0..n_intervals).map(|_| rng.gen_range(0..=free)).collect();
        offsets.sort_unstable();
        let mut is_shared: Vec<bool> = (0..n_intervals).map(|i| i < copies).collect();
        is_shared.shuffle(&mut rng);

        let mut seq = genome.sequence.clone();
        let mut intervals = genome.repeat_intervals.clone();
        for (i, (&off, &sh)) in offsets.iter().zip(&is_shared).enumerate() {
            let start = off + i * repeat_len;
            let unit = if sh { &shared } else { &private };
            seq[start..start + repeat_len].copy_from_slice(unit);
            intervals.push(RepeatInterval {
                start,
                end: start + repeat_len,
                repeat_id: if sh {
                    SHARED_REPEAT_ID.to_string()
                } else {
                    private_id.clone()
                },
            });
        }
        intervals.sort_by_key(|iv| iv.start);
        for pair in intervals.windows(2) {
            if pair[0].end > pair[1].start {
                return Err(Error::invalid(format!(
                    "genome {} already carries intervals overlapping the new repeats",
                    genome.id
                )));
            }
        }
        out.push(Genome {
            id: genome.id.clone(),
            sequence: seq,
            repeat_intervals: intervals,
        });
    }
    Ok(out)
}

fn substitute<R: Rng>(rng: &mut R, base: u8) -> u8 {
    let others: [u8; 3] = match base {
        b'A' => *b"CGT",
        b'C' => *b"AGT",
        b'G' => *b"ACT",
        _ => *b"ACG",
    };
    others[rng.gen_range(0..3)]
}

/// Simulates `n_pairs` read pairs. The genome of each fragment is chosen with
/// probability proportional to its length and the start uniformly among valid
/// positions. The forward mate is the first `read_len` bases of the fragment; the
/// reverse mate is the reverse complement of the last `read_len` bases.
pub fn simulate_reads(
    genomes: &[Genome],
    n_pairs: usize,
    cfg: &ReadSimConfig,
    rng_seed: u64,
) -> Result<Vec<ReadPair>> {
    if n_pairs == 0 {
        return Ok(Vec::new());
    }
    if genomes.is_empty() {
        return Err(Error::invalid("no genomes to simulate from"));
    }
    if cfg.read_len == 0 || cfg.read_len > cfg.outer_dist {
        return Err(Error::invalid("require 1 <= read_len <= outer_dist"));
    }
    for rate in [cfg.err_rate, cfg.mut_rate] {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::invalid("error and mutation rates must lie in [0, 1]"));
        }
    }
    if let Some(g) = genomes.iter().find(|g| g.sequence.len() < cfg.outer_dist) {
        return Err(Error::invalid(format!(
            "outer distance {} exceeds length of genome {} ({} bp)",
            cfg.outer_dist,
            g.id,
            g.sequence.len()
        )));
    }
    let total: usize = genomes.iter().map(|g| g.sequence.len()).sum();
    let cumulative: Vec<usize> = genomes
        .iter()
        .scan(0usize, |acc, g| {
            *acc += g.sequence.len();
            Some(*acc)
        })
        .collect();

    let n_chunks = n_pairs.div_ceil(READ_CHUNK);
    let chunks: Vec<Vec<ReadPair>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(rng_seed, c as u64));
            let lo = c * READ_CHUNK;
            let hi = (lo + READ_CHUNK).min(n_pairs);
            (lo..hi)
                .map(|idx| simulate_pair(&mut rng, genomes, &cumulative, total, cfg, idx))
                .collect()
        })
        .collect();
    Ok(chunks.into_iter().flatten().collect())
}

fn simulate_pair(
    rng: &mut ChaCha8Rng,
    genomes: &[Genome],
    cumulative: &[usize],
    total: usize,
    cfg: &ReadSimConfig,
    idx: usize,
) -> ReadPair {
    let pick = rng.gen_range(0..total);
    let g = cumulative.partition_point(|&c| c <= pick);
    let genome = &genomes[g].sequence;
    let start = rng.gen_range(0..=genome.len() - cfg.outer_dist);
    let mut fragment = genome[start..start + cfg.outer_dist].to_vec();

    // Only bases that end up in a mate matter; mutate each once.
    if cfg.mut_rate > 0.0 {
        let rev_lo = cfg.outer_dist - cfg.read_len;
        for i in 0..cfg.outer_dist {
            if i >= cfg.read_len && i < rev_lo {
                continue;
            }
            if rng.gen::<f64>() < cfg.mut_rate {
                fragment[i] = substitute(rng, fragment[i]);
            }
        }
    }
    let mut fwd = fragment[..cfg.read_len].to_vec();
    let mut rev = revcomp(&fragment[cfg.outer_dist - cfg.read_len..]);
    if cfg.err_rate > 0.0 {
        for mate in [&mut fwd, &mut rev] {
            for b in mate.iter_mut() {
                if rng.gen::<f64>() < cfg.err_rate {
                    *b = substitute(rng, *b);
                }
            }
        }
    }
    ReadPair {
        id: format!("r{idx}"),
        fwd,
        rev,
        origin: Some(ReadOrigin {
            genome: g as u32,
            fwd_start: start as u32,
            rev_start: (start + cfg.outer_dist - cfg.read_len) as u32,
        }),
    }
}

/// Writes `/1` and `/2` FASTQ streams with constant qualities.
pub fn write_read_pairs<W1: Write, W2: Write>(reads: &[ReadPair], mut w1: W1, mut w2: W2) -> Result<()> {
    for r in reads {
        write_fastq_record(&mut w1, &format!("{}/1", r.id), &r.fwd)?;
        write_fastq_record(&mut w2, &format!("{}/2", r.id), &r.rev)?;
    }
    w1.flush()?;
    w2.flush()?;
    Ok(())
}

/// Truth intervals as `genome_id, start, end, repeat_id`.
pub fn write_truth_intervals<W: Write>(genomes: &[Genome], mut w: W) -> Result<()> {
    writeln!(w, "#genome_id\tstart\tend\trepeat_id")?;
    for g in genomes {
        for iv in &g.repeat_intervals {
            writeln!(w, "{}\t{}\t{}\t{}", g.id, iv.start, iv.end, iv.repeat_id)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parameters of the two-genome simulated community.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommunityConfig {
    pub n_genomes: usize,
    pub genome_len: usize,
    pub repeat_len: usize,
    pub copies: usize,
    pub n_pairs: usize,
    pub reads: ReadSimConfig,
    pub seed: u64,
}

pub struct Community {
    pub genomes: Vec<Genome>,
    pub reads: Vec<ReadPair>,
}

/// Backbones, repeat insertion and read simulation in one call.
pub fn simulate_community(cfg: &CommunityConfig) -> Result<Community> {
    let backbones = (0..cfg.n_genomes)
        .map(|g| gen_backbone(&format!("genome{}", g + 1), cfg.genome_len, derive_seed(cfg.seed, 100 + g as u64)))
        .collect::<Result<Vec<_>>>()?;
    let genomes = insert_repeats(&backbones, cfg.repeat_len, cfg.copies, derive_seed(cfg.seed, 200))?;
    let reads = simulate_reads(&genomes, cfg.n_pairs, &cfg.reads, derive_seed(cfg.seed, 300))?;
    Ok(Community { genomes, reads })
}
