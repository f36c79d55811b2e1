//! Heuristic repeat detectors used for comparison.
//!
//! All standard deviations are population standard deviations. Percentiles
//! use linear interpolation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pseudolabel::{LabelPartition, PseudoLabel};
use crate::stats::{mean, percentile_linear, std_pop};
use crate::unigraph::UnitigGraph;

pub const METHODS: [&str; 6] = ["baseline", "opera", "sopra", "mip", "bambus2", "metacarvel"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub opera_factor: f64,
    pub sopra_factor: f64,
    pub mip_factor: f64,
    pub mip_degree: usize,
    pub bambus_c: f64,
    /// Number of upper-quartile features needed in the second metacarvel step.
    pub metacarvel_flag_threshold: usize,
    /// An edge is skewed when the larger endpoint coverage exceeds this multiple of the smaller.
    pub skew_ratio: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            opera_factor: 1.5,
            sopra_factor: 2.5,
            mip_factor: 2.5,
            mip_degree: 50,
            bambus_c: 0.0,
            metacarvel_flag_threshold: 2,
            skew_ratio: 2.0,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        let factors = [self.opera_factor, self.sopra_factor, self.mip_factor, self.skew_ratio];
        if factors.iter().any(|&f| !(f > 0.0 && f.is_finite())) {
            return Err(Error::invalid("baseline factors must be positive and finite"));
        }
        if !(1..=3).contains(&self.metacarvel_flag_threshold) {
            return Err(Error::invalid("metacarvel flag threshold must be 1, 2 or 3"));
        }
        if !self.bambus_c.is_finite() {
            return Err(Error::invalid("bambus c must be finite"));
        }
        Ok(())
    }
}

/// Repeat exactly on the repeat pseudo-labels.
pub fn baseline_heuristic(partition: &LabelPartition) -> Vec<u8> {
    partition
        .labels()
        .iter()
        .map(|&l| u8::from(l == PseudoLabel::Repeat))
        .collect()
}

/// Repeat iff coverage exceeds `factor` times the mean coverage.
pub fn coverage_filter(coverages: &[f64], factor: f64) -> Vec<u8> {
    let t = factor * mean(coverages);
    coverages.iter().map(|&c| u8::from(c > t)).collect()
}

pub fn opera(coverages: &[f64], factor: f64) -> Vec<u8> {
    coverage_filter(coverages, factor)
}

pub fn sopra(coverages: &[f64], factor: f64) -> Vec<u8> {
    coverage_filter(coverages, factor)
}

/// High coverage and degree at least `min_degree`.
pub fn mip(coverages: &[f64], degrees: &[usize], factor: f64, min_degree: usize) -> Vec<u8> {
    coverage_filter(coverages, factor)
        .into_iter()
        .zip(degrees)
        .map(|(c, &d)| c & u8::from(d >= min_degree))
        .collect()
}

/// Betweenness per base above `mean + c * std`.
pub fn bambus2(betweenness: &[f64], lengths: &[f64], c: f64) -> Vec<u8> {
    let ratio: Vec<f64> = betweenness.iter().zip(lengths).map(|(b, l)| b / l).collect();
    let t = mean(&ratio) + c * std_pop(&ratio);
    ratio.iter().map(|&r| u8::from(r > t)).collect()
}

/// Fraction of each node's edges whose endpoint coverages differ by more than `ratio`.
/// An edge with one zero-coverage endpoint is skewed unless both are zero.
pub fn skewed_edge_ratio(g: &UnitigGraph, coverages: &[f64], ratio: f64) -> Vec<f64> {
    (0..g.n_nodes())
        .map(|v| {
            let d = g.degree(v);
            if d == 0 {
                return 0.0;
            }
            let skewed = g
                .neighbors(v)
                .filter(|&u| {
                    let (a, b) = (coverages[u].min(coverages[v]), coverages[u].max(coverages[v]));
                    if a > 0.0 {
                        b / a > ratio
                    } else {
                        b > 0.0
                    }
                })
                .count();
            skewed as f64 / d as f64
        })
        .collect()
}

/// Two-step rule: very high betweenness (`>= mean + 3 std`), otherwise at least
/// `flag_threshold` of coverage, degree and skewed-edge ratio strictly above
/// their 75th percentiles. The first step is skipped when every betweenness
/// value is the same.
pub fn metacarvel_variant(
    betweenness: &[f64],
    coverages: &[f64],
    degrees: &[usize],
    skew_ratios: &[f64],
    flag_threshold: usize,
) -> Vec<u8> {
    let n = betweenness.len();
    if n == 0 {
        return Vec::new();
    }
    let bc_std = std_pop(betweenness);
    let bc_cut = mean(betweenness) + 3.0 * bc_std;
    let deg: Vec<f64> = degrees.iter().map(|&d| d as f64).collect();
    let q = |v: &[f64]| percentile_linear(v, 75.0).expect("non-empty");
    let (qc, qd, qs) = (q(coverages), q(&deg), q(skew_ratios));
    (0..n)
        .map(|i| {
            if bc_std > 0.0 && betweenness[i] >= bc_cut {
                return 1;
            }
            let flags =
                usize::from(coverages[i] > qc) + usize::from(deg[i] > qd) + usize::from(skew_ratios[i] > qs);
            u8::from(flags >= flag_threshold)
        })
        .collect()
}

/// Inputs shared by every method.
pub struct BaselineInputs<'a> {
    pub partition: &'a LabelPartition,
    pub graph: &'a UnitigGraph,
    pub betweenness: &'a [f64],
    pub lengths: &'a [f64],
    pub coverages: &'a [f64],
}

/// Labels per method, keyed by method name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineResults {
    pub config: BaselineConfig,
    pub labels: BTreeMap<String, Vec<u8>>,
}

pub fn run_all(inp: &BaselineInputs, cfg: &BaselineConfig) -> Result<BaselineResults> {
    cfg.validate()?;
    let n = inp.graph.n_nodes();
    if [inp.partition.len(), inp.betweenness.len(), inp.lengths.len(), inp.coverages.len()]
        .iter()
        .any(|&l| l != n)
    {
        return Err(Error::Shape("baseline inputs differ in length".into()));
    }
    let degrees: Vec<usize> = (0..n).map(|v| inp.graph.degree(v)).collect();
    let skew = skewed_edge_ratio(inp.graph, inp.coverages, cfg.skew_ratio);
    let mut labels = BTreeMap::new();
    labels.insert("baseline".to_string(), baseline_heuristic(inp.partition));
    labels.insert("opera".to_string(), opera(inp.coverages, cfg.opera_factor));
    labels.insert("sopra".to_string(), sopra(inp.coverages, cfg.sopra_factor));
    labels.insert(
        "mip".to_string(),
        mip(inp.coverages, &degrees, cfg.mip_factor, cfg.mip_degree),
    );
    labels.insert(
        "bambus2".to_string(),
        bambus2(inp.betweenness, inp.lengths, cfg.bambus_c),
    );
    labels.insert(
        "metacarvel".to_string(),
        metacarvel_variant(
            inp.betweenness,
            inp.coverages,
            &degrees,
            &skew,
            cfg.metacarvel_flag_threshold,
        ),
    );
    Ok(BaselineResults {
        config: *cfg,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coverage_filter_example() {
        assert_eq!(opera(&[10.0, 10.0, 10.0, 70.0], 1.5), vec![0, 0, 0, 1]);
        assert_eq!(sopra(&[5.0; 6], 2.5), vec![0; 6]);
    }

    #[test]
    fn mip_degree_bound_is_inclusive() {
        let cov = [1.0, 1.0, 1.0, 1.0, 100.0];
        assert_eq!(mip(&cov, &[0, 0, 0, 0, 49], 2.5, 50), vec![0; 5]);
        assert_eq!(mip(&cov, &[0, 0, 0, 0, 50], 2.5, 50), vec![0, 0, 0, 0, 1]);
    }

    #[test]
    fn bambus_moments() {
        // ratios [1, 2, 3, 6]: mean 3, population std sqrt(3.5)
        let bc = [10.0, 20.0, 30.0, 60.0];
        let len = [10.0; 4];
        assert_eq!(bambus2(&bc, &len, 0.0), vec![0, 0, 0, 1]);
        assert_eq!(bambus2(&bc, &len, 1.0), vec![0, 0, 0, 1]);
        assert_eq!(bambus2(&bc, &len, 2.0), vec![0; 4]);
        assert_eq!(bambus2(&[4.0; 3], &[2.0; 3], 0.0), vec![0; 3]);
    }

    #[test]
    fn metacarvel_needs_two_flags() {
        let bc = [0.0; 8];
        let cov = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 9.0];
        let deg = [1usize; 8];
        let skew = [0.0; 8];
        assert_eq!(metacarvel_variant(&bc, &cov, &deg, &skew, 2), vec![0; 8]);
        let mut deg2 = deg;
        deg2[7] = 5;
        assert_eq!(metacarvel_variant(&bc, &cov, &deg2, &skew, 2)[7], 1);
    }

    #[test]
    fn metacarvel_betweenness_step() {
        let mut bc = vec![0.0; 20];
        bc[0] = 100.0;
        let r = metacarvel_variant(&bc, &[1.0; 20], &[1; 20], &[0.0; 20], 2);
        assert_eq!(r[0], 1);
        assert_eq!(r[1..].iter().sum::<u8>(), 0);
    }

    #[test]
    fn skew_ratio_by_edge() {
        let g = UnitigGraph::from_edges(3, vec![(0, 1, 1), (1, 2, 1)]).unwrap();
        let s = skewed_edge_ratio(&g, &[10.0, 10.0, 30.0], 2.0);
        assert_eq!(s, vec![0.0, 0.5, 1.0]);
    }
}
