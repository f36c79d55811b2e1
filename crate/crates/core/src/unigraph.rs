//! Weighted unitig graph induced by read-pair hit sets.
//!
//! Every read pair contributes +1 to each edge it induces: adjacency edges join
//! every unitig hit by the forward mate to every unitig hit by the reverse mate,
//! and repeat edges join all unitigs within one mate's hit set. Both kinds are
//! summed into a single weight per unordered pair, after which the lowest weight
//! quartile is discarded.

use std::io::{BufRead, Write};

use log::{info, warn};
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::assembly::MappingTable;
use crate::error::{Error, Result};
use crate::io::tsv::read_rows;
use crate::stats::percentile_nearest_rank;

/// Default cap on a mate's hit-set size for repeat-edge generation.
pub const DEFAULT_MAX_MULTIMAP: usize = 50;

/// Merged edge weights keyed by `(min, max)` node pair.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EdgeCounts {
    pub n_nodes: usize,
    pub weights: FxHashMap<(u32, u32), u64>,
    /// Mates whose hit set exceeded the multimap cap.
    pub capped_mates: usize,
}

impl EdgeCounts {
    pub fn sorted(&self) -> Vec<(u32, u32, u64)> {
        let mut v: Vec<_> = self.weights.iter().map(|(&(a, b), &w)| (a, b, w)).collect();
        v.sort_unstable();
        v
    }
}

#[inline]
fn key(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn add_pair_contributions(
    fwd: &[u32],
    rev: &[u32],
    max_multimap: usize,
    map: &mut FxHashMap<(u32, u32), u64>,
    capped: &mut usize,
) {
    for &a in fwd {
        for &b in rev {
            if a != b {
                *map.entry(key(a, b)).or_insert(0) += 1;
            }
        }
    }
    for set in [fwd, rev] {
        if set.len() > max_multimap {
            *capped += 1;
            continue;
        }
        for (i, &a) in set.iter().enumerate() {
            for &b in &set[i + 1..] {
                if a != b {
                    *map.entry(key(a, b)).or_insert(0) += 1;
                }
            }
        }
    }
}

/// Counts adjacency and repeat contributions over all read pairs.
pub fn build_edges(table: &MappingTable, max_multimap: usize) -> EdgeCounts {
    let (weights, capped_mates) = table
        .pairs
        .par_chunks(4096)
        .map(|chunk| {
            let mut map = FxHashMap::default();
            let mut capped = 0;
            for p in chunk {
                add_pair_contributions(&p.fwd, &p.rev, max_multimap, &mut map, &mut capped);
            }
            (map, capped)
        })
        .reduce(
            || (FxHashMap::default(), 0),
            |(mut a, ca), (mut b, cb)| {
                if a.len() < b.len() {
                    std::mem::swap(&mut a, &mut b);
                }
                for (k, w) in b {
                    *a.entry(k).or_insert(0) += w;
                }
                (a, ca + cb)
            },
        );
    if capped_mates > 0 {
        info!("{capped_mates} mates exceeded the multimap cap of {max_multimap}; their repeat edges were skipped");
    }
    EdgeCounts {
        n_nodes: table.n_unitigs,
        weights,
        capped_mates,
    }
}

/// Pruned, undirected, simple graph. Weights are kept only for weighted degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnitigGraph {
    n_nodes: usize,
    /// Sorted `(u, v, weight)` with `u < v`.
    edges: Vec<(u32, u32, u64)>,
    /// Sorted neighbor lists with the weight of each incident edge.
    adj: Vec<Vec<(u32, u64)>>,
}

/// Summary written next to the edge list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphHeader {
    #[serde(rename = "N")]
    pub n_nodes: usize,
    #[serde(rename = "Q1")]
    pub q1: u64,
    pub edges_before: usize,
    pub edges_after: usize,
    /// Edges with weight `<= threshold` were removed (0 when nothing was pruned).
    pub threshold: u64,
}

impl UnitigGraph {
    /// Builds a graph from `(u, v, weight)` triples. Self loops and zero weights are rejected;
    /// duplicate pairs have their weights summed.
    pub fn from_edges(n_nodes: usize, edges: impl IntoIterator<Item = (u32, u32, u64)>) -> Result<Self> {
        let mut merged: FxHashMap<(u32, u32), u64> = FxHashMap::default();
        for (a, b, w) in edges {
            if a == b {
                return Err(Error::invalid(format!("self loop on node {a}")));
            }
            if a as usize >= n_nodes || b as usize >= n_nodes {
                return Err(Error::invalid(format!("edge ({a}, {b}) outside 0..{n_nodes}")));
            }
            if w == 0 {
                return Err(Error::invalid(format!("edge ({a}, {b}) has zero weight")));
            }
            *merged.entry(key(a, b)).or_insert(0) += w;
        }
        let mut edges: Vec<_> = merged.into_iter().map(|((a, b), w)| (a, b, w)).collect();
        edges.sort_unstable();
        let mut adj = vec![Vec::new(); n_nodes];
        for &(a, b, w) in &edges {
            adj[a as usize].push((b, w));
            adj[b as usize].push((a, w));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Ok(UnitigGraph { n_nodes, edges, adj })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32, u64)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> impl ExactSizeIterator<Item = usize> + '_ {
        self.adj[v].iter().map(|&(u, _)| u as usize)
    }

    pub fn incident(&self, v: usize) -> &[(u32, u64)] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search_by_key(&(b as u32), |&(u, _)| u).is_ok()
    }

    /// Relabels nodes: node `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        UnitigGraph::from_edges(
            self.n_nodes,
            self.edges
                .iter()
                .map(|&(a, b, w)| (perm[a as usize] as u32, perm[b as usize] as u32, w)),
        )
        .expect("permutation of a valid graph is valid")
    }

    /// Writes `u<TAB>v<TAB>weight` rows.
    pub fn write_edge_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "#u\tv\tweight")?;
        for &(a, b, wt) in &self.edges {
            writeln!(w, "{a}\t{b}\t{wt}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_edge_tsv<R: BufRead>(n_nodes: usize, reader: R) -> Result<Self> {
        let rows = read_rows(reader)?;
        let mut edges = Vec::with_capacity(rows.len());
        for row in rows {
            row.expect_len(3)?;
            let a: u32 = row.get(0, "u")?;
            let b: u32 = row.get(1, "v")?;
            let w: u64 = row.get(2, "weight")?;
            if a == b || a as usize >= n_nodes || b as usize >= n_nodes || w == 0 {
                return Err(Error::parse(
                    row.line,
                    format!("invalid edge ({a}, {b}, {w}) for {n_nodes} nodes"),
                ));
            }
            edges.push((a, b, w));
        }
        UnitigGraph::from_edges(n_nodes, edges)
    }
}

/// Removes edges whose weight is at or below the `percentile`-th nearest-rank
/// weight. When every edge has the same weight nothing is removed.
pub fn prune_at_percentile(counts: &EdgeCounts, percentile: f64) -> (UnitigGraph, GraphHeader) {
    let edges = counts.sorted();
    let weights: Vec<u64> = edges.iter().map(|e| e.2).collect();
    let Some(q) = percentile_nearest_rank(&weights, percentile) else {
        warn!("edge set is empty; the unitig graph has no edges");
        let g = UnitigGraph::from_edges(counts.n_nodes, Vec::new()).expect("empty graph");
        return (
            g,
            GraphHeader {
                n_nodes: counts.n_nodes,
                q1: 0,
                edges_before: 0,
                edges_after: 0,
                threshold: 0,
            },
        );
    };
    let uniform = weights.iter().all(|&w| w == weights[0]);
    let threshold = if uniform { 0 } else { q };
    let kept: Vec<_> = edges.iter().copied().filter(|e| e.2 > threshold).collect();
    if kept.is_empty() {
        warn!("pruning at weight <= {threshold} removed every edge");
    }
    let after = kept.len();
    let g = UnitigGraph::from_edges(counts.n_nodes, kept).expect("edge counts are valid");
    (
        g,
        GraphHeader {
            n_nodes: counts.n_nodes,
            q1: q,
            edges_before: edges.len(),
            edges_after: after,
            threshold,
        },
    )
}

/// Quartile pruning: drop edges with weight `<= Q1`.
pub fn prune_lowest_quartile(counts: &EdgeCounts) -> (UnitigGraph, GraphHeader) {
    prune_at_percentile(counts, 25.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::MateHits;

    fn table(n: usize, pairs: &[(&[u32], &[u32])]) -> MappingTable {
        MappingTable {
            n_unitigs: n,
            pairs: pairs
                .iter()
                .map(|(a, b)| MateHits { fwd: a.to_vec(), rev: b.to_vec() })
                .collect(),
            depth_bases: vec![0; n],
        }
    }

    fn counts_from(n: usize, w: &[(u32, u32, u64)]) -> EdgeCounts {
        EdgeCounts {
            n_nodes: n,
            weights: w.iter().map(|&(a, b, w)| ((a, b), w)).collect(),
            capped_mates: 0,
        }
    }

    #[test]
    fn adjacency_and_repeat_edges() {
        let e = build_edges(&table(4, &[(&[1, 2], &[3])]), 50);
        assert_eq!(e.sorted(), vec![(1, 2, 1), (1, 3, 1), (2, 3, 1)]);
        let e = build_edges(&table(6, &[(&[5], &[5])]), 50);
        assert!(e.weights.is_empty());
        let e = build_edges(&table(3, &[(&[1, 2], &[1]), (&[1, 2], &[1])]), 50);
        assert_eq!(e.sorted(), vec![(1, 2, 4)]);
    }

    #[test]
    fn multimap_cap_skips_repeat_edges_only() {
        let e = build_edges(&table(5, &[(&[0, 1, 2], &[4])]), 2);
        assert_eq!(e.sorted(), vec![(0, 4, 1), (1, 4, 1), (2, 4, 1)]);
        assert_eq!(e.capped_mates, 1);
    }

    #[test]
    fn quartile_rules() {
        let (g, h) = prune_lowest_quartile(&counts_from(5, &[(0, 1, 1), (1, 2, 2), (2, 3, 3), (3, 4, 4)]));
        assert_eq!(h.q1, 1);
        assert_eq!(g.n_edges(), 3);
        assert!(!g.has_edge(0, 1));

        let (g, h) = prune_lowest_quartile(&counts_from(4, &[(0, 1, 2), (1, 2, 2), (2, 3, 2)]));
        assert_eq!(g.n_edges(), 3);
        assert_eq!(h.threshold, 0);

        let (g, h) = prune_lowest_quartile(&counts_from(
            6,
            &[(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 4, 1), (4, 5, 10)],
        ));
        assert_eq!(h.q1, 1);
        assert_eq!(g.edges(), &[(4, 5, 10)]);

        let (g, h) = prune_lowest_quartile(&counts_from(3, &[]));
        assert_eq!(g.n_edges(), 0);
        assert_eq!(h.edges_before, 0);
    }

    #[test]
    fn edge_tsv_roundtrip_and_validation() {
        let g = UnitigGraph::from_edges(4, vec![(0, 1, 3), (2, 1, 5)]).unwrap();
        let mut buf = Vec::new();
        g.write_edge_tsv(&mut buf).unwrap();
        assert_eq!(UnitigGraph::read_edge_tsv(4, &buf[..]).unwrap(), g);
        assert!(UnitigGraph::read_edge_tsv(4, &b"1\t1\t3\n"[..]).is_err());
        assert!(UnitigGraph::read_edge_tsv(2, &b"0\t3\t3\n"[..]).is_err());
        assert!(UnitigGraph::from_edges(2, vec![(0, 0, 1)]).is_err());
    }
}
