#![allow(dead_code)]

pub mod oracles;

use repgraph::graphfeat::BetweennessMode;
use repgraph::pipeline::{exact_truth, prepare, GraphData};
use repgraph::simdata::{simulate_community, CommunityConfig, ReadSimConfig};

/// Two error-free genomes of 250 kbp with `copies` inserts of a `repeat_len` unit.
pub fn community(repeat_len: usize, copies: usize, seed: u64) -> CommunityConfig {
    CommunityConfig {
        n_genomes: 2,
        genome_len: 250_000,
        repeat_len,
        copies,
        n_pairs: 100_000,
        reads: ReadSimConfig {
            read_len: 101,
            outer_dist: 500,
            err_rate: 0.0,
            mut_rate: 0.0,
        },
        seed,
    }
}

pub struct Fixture {
    pub data: GraphData,
    pub truth: Vec<u8>,
}

pub fn build_fixture(cfg: &CommunityConfig, k: usize) -> Fixture {
    let com = simulate_community(cfg).unwrap();
    let prep = prepare(&com.reads, k, 50, BetweennessMode::Exact).unwrap();
    let refs: Vec<&[u8]> = com.genomes.iter().map(|g| g.sequence.as_slice()).collect();
    let truth = exact_truth(&prep.unitigs, &refs).is_repeat();
    Fixture {
        data: prep.data,
        truth,
    }
}

/// Erdos-Renyi graph with weights in `1..=5`.
pub fn random_graph<R: rand::Rng>(rng: &mut R, n: usize, p_edge: f64) -> repgraph::unigraph::UnitigGraph {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(p_edge) {
                edges.push((a as u32, b as u32, rng.gen_range(1..=5)));
            }
        }
    }
    repgraph::unigraph::UnitigGraph::from_edges(n, edges).unwrap()
}

/// Uniform random permutation of `0..n`.
pub fn random_perm<R: rand::Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// Graph with a short, high-coverage group and a long, low-coverage group plus
/// a middle band, so both pseudo-label classes are populated.
pub fn two_class_data(n: usize, seed: u64) -> GraphData {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let g = random_graph(&mut rng, n, 4.0 / n as f64);
    let mut lengths = Vec::with_capacity(n);
    let mut coverages = Vec::with_capacity(n);
    for i in 0..n {
        let (l, c) = match i % 3 {
            0 => (rng.gen_range(60.0..200.0), rng.gen_range(60.0..90.0)),
            1 => (rng.gen_range(5_000.0..20_000.0), rng.gen_range(5.0..15.0)),
            _ => (rng.gen_range(500.0..3_000.0), rng.gen_range(20.0..40.0)),
        };
        lengths.push(l);
        coverages.push(c);
    }
    let features = repgraph::graphfeat::compute_features(&g, BetweennessMode::Exact).unwrap();
    GraphData::new(g, features, repgraph::graphfeat::SequencingFeatures { lengths, coverages }).unwrap()
}
