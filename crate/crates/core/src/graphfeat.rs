//! Pre-defined node features of the pruned unitig graph.
//!
//! Column order of the feature matrix is fixed: betweenness, k-core, degree,
//! weighted degree, clustering coefficient. Betweenness uses the unweighted
//! topology, undirected convention (each unordered pair counted once), endpoints
//! excluded, no normalisation.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use ndarray::{Array2, Axis};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::tsv::{check_dense_ids, read_rows};
use crate::unigraph::UnitigGraph;

pub const N_GRAPH_FEATURES: usize = 5;
pub const FEATURE_NAMES: [&str; N_GRAPH_FEATURES] =
    ["betweenness", "kcore", "degree", "weighted_degree", "clustering"];

/// How betweenness is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BetweennessMode {
    #[default]
    Exact,
    /// Brandes accumulation from `sources` uniformly sampled sources, rescaled by `N / sources`.
    Sampled { sources: usize, seed: u64 },
}

const SOURCE_CHUNK: usize = 64;

/// Single-source dependency accumulation (Brandes), added into `acc`.
fn accumulate_from(g: &UnitigGraph, s: usize, acc: &mut [f64], scratch: &mut Scratch) {
    let n = g.n_nodes();
    let Scratch { dist, sigma, delta, preds, stack, queue } = scratch;
    stack.clear();
    queue.clear();
    for v in 0..n {
        dist[v] = -1;
        sigma[v] = 0.0;
        delta[v] = 0.0;
        preds[v].clear();
    }
    dist[s] = 0;
    sigma[s] = 1.0;
    queue.push_back(s);
    while let Some(v) = queue.pop_front() {
        stack.push(v);
        for w in g.neighbors(v) {
            if dist[w] < 0 {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
            if dist[w] == dist[v] + 1 {
                sigma[w] += sigma[v];
                preds[w].push(v);
            }
        }
    }
    while let Some(w) = stack.pop() {
        for &v in &preds[w] {
            delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
        }
        if w != s {
            acc[w] += delta[w];
        }
    }
}

struct Scratch {
    dist: Vec<i64>,
    sigma: Vec<f64>,
    delta: Vec<f64>,
    preds: Vec<Vec<usize>>,
    stack: Vec<usize>,
    queue: VecDeque<usize>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            dist: vec![-1; n],
            sigma: vec![0.0; n],
            delta: vec![0.0; n],
            preds: vec![Vec::new(); n],
            stack: Vec::with_capacity(n),
            queue: VecDeque::with_capacity(n),
        }
    }
}

/// Sums per-source accumulations in fixed chunk order so results do not depend on
/// the thread count.
fn brandes_over(g: &UnitigGraph, sources: &[usize]) -> Vec<f64> {
    let n = g.n_nodes();
    let partials: Vec<Vec<f64>> = sources
        .par_chunks(SOURCE_CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; n];
            let mut scratch = Scratch::new(n);
            for &s in chunk {
                accumulate_from(g, s, &mut acc, &mut scratch);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; n];
    for p in partials {
        for (t, x) in total.iter_mut().zip(p) {
            *t += x;
        }
    }
    total
}

/// Exact betweenness centrality.
pub fn betweenness(g: &UnitigGraph) -> Vec<f64> {
    let sources: Vec<usize> = (0..g.n_nodes()).collect();
    brandes_over(g, &sources)
        .into_iter()
        .map(|x| x / 2.0)
        .collect()
}

/// Source-sampled estimate of [`betweenness`].
pub fn betweenness_sampled(g: &UnitigGraph, n_sources: usize, seed: u64) -> Vec<f64> {
    let n = g.n_nodes();
    if n_sources >= n {
        return betweenness(g);
    }
    if n_sources == 0 {
        return vec![0.0; n];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sources = sample(&mut rng, n, n_sources).into_vec();
    sources.sort_unstable();
    let scale = n as f64 / n_sources as f64 / 2.0;
    brandes_over(g, &sources)
        .into_iter()
        .map(|x| x * scale)
        .collect()
}

/// Core number of every node by iterative minimum-degree peeling.
pub fn kcore(g: &UnitigGraph) -> Vec<usize> {
    let n = g.n_nodes();
    let mut deg: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
    let max_deg = deg.iter().copied().max().unwrap_or(0);
    // bucket sort nodes by degree
    let mut bin = vec![0usize; max_deg + 1];
    for &d in &deg {
        bin[d] += 1;
    }
    let mut start = 0;
    for b in bin.iter_mut() {
        let c = *b;
        *b = start;
        start += c;
    }
    let mut pos = vec![0usize; n];
    let mut vert = vec![0usize; n];
    for v in 0..n {
        pos[v] = bin[deg[v]];
        vert[pos[v]] = v;
        bin[deg[v]] += 1;
    }
    for d in (1..=max_deg).rev() {
        bin[d] = bin[d - 1];
    }
    bin[0] = 0;
    for i in 0..n {
        let v = vert[i];
        for u in g.neighbors(v) {
            if deg[u] > deg[v] {
                let du = deg[u];
                let pu = pos[u];
                let pw = bin[du];
                let w = vert[pw];
                if u != w {
                    pos[u] = pw;
                    vert[pu] = w;
                    pos[w] = pu;
                    vert[pw] = u;
                }
                bin[du] += 1;
                deg[u] -= 1;
            }
        }
    }
    deg
}

pub fn degree(g: &UnitigGraph) -> Vec<usize> {
    (0..g.n_nodes()).map(|v| g.degree(v)).collect()
}

/// Sum of retained edge weights.
pub fn weighted_degree(g: &UnitigGraph) -> Vec<u64> {
    (0..g.n_nodes())
        .map(|v| g.incident(v).iter().map(|&(_, w)| w).sum())
        .collect()
}

/// Local clustering coefficient `2 T(v) / (d (d - 1))`, 0 when `d < 2`.
pub fn clustering(g: &UnitigGraph) -> Vec<f64> {
    let n = g.n_nodes();
    (0..n)
        .into_par_iter()
        .map_init(
            || vec![false; n],
            |mark, v| {
                let d = g.degree(v);
                if d < 2 {
                    return 0.0;
                }
                for u in g.neighbors(v) {
                    mark[u] = true;
                }
                let mut links = 0usize;
                for u in g.neighbors(v) {
                    links += g.neighbors(u).filter(|&w| mark[w]).count();
                }
                for u in g.neighbors(v) {
                    mark[u] = false;
                }
                // each triangle edge seen from both endpoints
                links as f64 / (d * (d - 1)) as f64
            },
        )
        .collect()
}

/// Length and mean coverage per unitig. Never part of the feature matrix.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SequencingFeatures {
    pub lengths: Vec<f64>,
    pub coverages: Vec<f64>,
}

impl SequencingFeatures {
    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }
}

/// Raw and column-standardized graph features.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub raw: Array2<f64>,
    pub standardized: Array2<f64>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.raw.nrows()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = FEATURE_NAMES.iter().position(|&f| f == name)?;
        Some(self.raw.column(j).to_vec())
    }

    /// Z-scores every column of `raw` (population std, replaced by 1 when zero).
    pub fn from_raw(raw: Array2<f64>) -> Result<Self> {
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("feature matrix contains non-finite values"));
        }
        let (standardized, means, stds) = standardize(&raw);
        Ok(FeatureMatrix {
            raw,
            standardized,
            means,
            stds,
        })
    }

    /// Permutes rows: row `v` moves to `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut raw = self.raw.clone();
        for (v, &p) in perm.iter().enumerate() {
            raw.row_mut(p).assign(&self.raw.row(v));
        }
        FeatureMatrix::from_raw(raw).expect("finite")
    }
}

/// Column z-scores of any matrix, with the std guard.
pub fn standardize(m: &Array2<f64>) -> (Array2<f64>, Vec<f64>, Vec<f64>) {
    let n = m.nrows().max(1) as f64;
    let means: Vec<f64> = m.axis_iter(Axis(1)).map(|c| c.sum() / n).collect();
    let stds: Vec<f64> = m
        .axis_iter(Axis(1))
        .zip(&means)
        .map(|(c, &mu)| {
            let s = (c.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n).sqrt();
            if s > 1e-12 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let mut out = m.clone();
    for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
        col.mapv_inplace(|x| (x - means[j]) / stds[j]);
    }
    (out, means, stds)
}

/// Stacks the five feature vectors in the fixed column order and standardizes them.
pub fn assemble_x(
    betweenness: &[f64],
    kcore: &[usize],
    degree: &[usize],
    weighted_degree: &[u64],
    clustering: &[f64],
) -> Result<FeatureMatrix> {
    let n = betweenness.len();
    if [kcore.len(), degree.len(), weighted_degree.len(), clustering.len()]
        .iter()
        .any(|&l| l != n)
    {
        return Err(Error::Shape("feature vectors differ in length".into()));
    }
    let mut raw = Array2::zeros((n, N_GRAPH_FEATURES));
    for i in 0..n {
        raw[[i, 0]] = betweenness[i];
        raw[[i, 1]] = kcore[i] as f64;
        raw[[i, 2]] = degree[i] as f64;
        raw[[i, 3]] = weighted_degree[i] as f64;
        raw[[i, 4]] = clustering[i];
    }
    FeatureMatrix::from_raw(raw)
}

/// All five features for a graph.
pub fn compute_features(g: &UnitigGraph, mode: BetweennessMode) -> Result<FeatureMatrix> {
    let bc = match mode {
        BetweennessMode::Exact => betweenness(g),
        BetweennessMode::Sampled { sources, seed } => betweenness_sampled(g, sources, seed),
    };
    assemble_x(&bc, &kcore(g), &degree(g), &weighted_degree(g), &clustering(g))
}

/// Writes `unitig_id`, the five raw features, `length` and `mean_coverage`.
pub fn write_features_tsv<W: Write>(x: &FeatureMatrix, seq: &SequencingFeatures, mut w: W) -> Result<()> {
    if seq.len() != x.n_rows() {
        return Err(Error::Shape("sequencing features and feature matrix differ in rows".into()));
    }
    write!(w, "#unitig_id")?;
    for name in FEATURE_NAMES {
        write!(w, "\t{name}")?;
    }
    writeln!(w, "\tlength\tmean_coverage")?;
    for i in 0..x.n_rows() {
        write!(w, "{i}")?;
        for j in 0..N_GRAPH_FEATURES {
            write!(w, "\t{}", x.raw[[i, j]])?;
        }
        writeln!(w, "\t{}\t{}", seq.lengths[i], seq.coverages[i])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features_tsv<R: BufRead>(reader: R) -> Result<(FeatureMatrix, SequencingFeatures)> {
    let rows = read_rows(reader)?;
    let n = rows.len();
    let mut raw = Array2::zeros((n, N_GRAPH_FEATURES));
    let mut seq = SequencingFeatures::default();
    let mut ids = Vec::with_capacity(n);
    for (i, row) in rows.iter().enumerate() {
        row.expect_len(N_GRAPH_FEATURES + 3)?;
        ids.push((row.line, row.get::<usize>(0, "unitig_id")?));
        for (j, name) in FEATURE_NAMES.iter().enumerate() {
            raw[[i, j]] = row.get_nonneg_f64(j + 1, name)?;
        }
        seq.lengths.push(row.get_nonneg_f64(6, "length")?);
        seq.coverages.push(row.get_nonneg_f64(7, "mean_coverage")?);
    }
    check_dense_ids(&ids)?;
    if let Some(row) = rows.iter().enumerate().find(|(i, _)| raw[[*i, 4]] > 1.0).map(|(_, r)| r) {
        return Err(Error::parse(row.line, "clustering coefficient exceeds 1"));
    }
    Ok((FeatureMatrix::from_raw(raw)?, seq))
}
