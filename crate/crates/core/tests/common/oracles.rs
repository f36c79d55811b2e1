//! Slow reference implementations used to check the library.

use std::collections::VecDeque;

use repgraph::unigraph::UnitigGraph;

pub fn adjacency(g: &UnitigGraph) -> Vec<Vec<bool>> {
    let n = g.n_nodes();
    let mut a = vec![vec![false; n]; n];
    for &(u, v, _) in g.edges() {
        a[u as usize][v as usize] = true;
        a[v as usize][u as usize] = true;
    }
    a
}

fn bfs_dist(a: &[Vec<bool>], s: usize) -> Vec<Option<usize>> {
    let n = a.len();
    let mut d = vec![None; n];
    d[s] = Some(0);
    let mut q = VecDeque::from([s]);
    while let Some(v) = q.pop_front() {
        for w in 0..n {
            if a[v][w] && d[w].is_none() {
                d[w] = Some(d[v].unwrap() + 1);
                q.push_back(w);
            }
        }
    }
    d
}

/// Enumerates every shortest path explicitly for each unordered pair and
/// credits interior nodes with the fraction of paths through them.
pub fn betweenness(g: &UnitigGraph) -> Vec<f64> {
    let a = adjacency(g);
    let n = a.len();
    let dists: Vec<_> = (0..n).map(|s| bfs_dist(&a, s)).collect();
    let mut bc = vec![0.0; n];
    for s in 0..n {
        for t in s + 1..n {
            let Some(len) = dists[s][t] else { continue };
            let mut paths: Vec<Vec<usize>> = Vec::new();
            let mut stack = vec![vec![s]];
            while let Some(p) = stack.pop() {
                let last = *p.last().unwrap();
                if last == t {
                    paths.push(p);
                    continue;
                }
                for w in 0..n {
                    // stay on geodesics: each step must get one closer to t
                    if a[last][w] && dists[w][t] == Some(len - p.len()) {
                        let mut q = p.clone();
                        q.push(w);
                        stack.push(q);
                    }
                }
            }
            let total = paths.len() as f64;
            for p in &paths {
                for &v in &p[1..p.len() - 1] {
                    bc[v] += 1.0 / total;
                }
            }
        }
    }
    bc
}

/// Largest k such that the node survives repeated deletion of nodes with degree < k.
pub fn kcore(g: &UnitigGraph) -> Vec<usize> {
    let a = adjacency(g);
    let n = a.len();
    let mut core = vec![0; n];
    for k in 1..=n {
        let mut alive = vec![true; n];
        loop {
            let mut changed = false;
            for v in 0..n {
                if alive[v] && (0..n).filter(|&w| alive[w] && a[v][w]).count() < k {
                    alive[v] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        for v in 0..n {
            if alive[v] {
                core[v] = k;
            }
        }
    }
    core
}

/// Ordered neighbour pairs that are themselves adjacent, over d(d-1).
pub fn clustering(g: &UnitigGraph) -> Vec<f64> {
    let a = adjacency(g);
    let n = a.len();
    (0..n)
        .map(|v| {
            let nb: Vec<usize> = (0..n).filter(|&w| a[v][w]).collect();
            let d = nb.len();
            if d < 2 {
                return 0.0;
            }
            let mut links = 0;
            for &x in &nb {
                for &y in &nb {
                    if x != y && a[x][y] {
                        links += 1;
                    }
                }
            }
            links as f64 / (d * (d - 1)) as f64
        })
        .collect()
}
