//! Ground truth from exact occurrence counts, classification metrics, and the
//! percentile sweep and semi-supervised experiments.

use std::io::{BufRead, Write};

use memchr::memmem::Finder;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dna::{revcomp, KmerIter};
use crate::error::{Error, Result};
use crate::io::tsv::{check_dense_ids, read_rows};
use crate::pipeline::{run_self_supervised, run_semi_supervised, GraphData, LearnConfig};
use crate::stats::{mean, std_pop};

/// Seed length of the reference index used by [`label_exact_repeats`].
const ANCHOR: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthCriterion {
    /// Full-length exact matches counted internally.
    Exact,
    /// Counts taken from an external alignment table.
    Imported,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruthLabels {
    pub counts: Vec<usize>,
    pub criterion: TruthCriterion,
}

impl TruthLabels {
    pub fn from_counts(counts: Vec<usize>, criterion: TruthCriterion) -> Self {
        TruthLabels { counts, criterion }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Repeat iff the sequence occurs at two or more places.
    pub fn is_repeat(&self) -> Vec<u8> {
        self.counts.iter().map(|&c| u8::from(c >= 2)).collect()
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "#unitig_id\tcount\tis_repeat")?;
        for (i, &c) in self.counts.iter().enumerate() {
            writeln!(w, "{i}\t{c}\t{}", u8::from(c >= 2))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let rows = read_rows(reader)?;
        let mut ids = Vec::with_capacity(rows.len());
        let mut counts = Vec::with_capacity(rows.len());
        for row in rows {
            row.expect_len(3)?;
            ids.push((row.line, row.get::<usize>(0, "unitig_id")?));
            let c: usize = row.get(1, "count")?;
            let r: u8 = row.get(2, "is_repeat")?;
            if r != u8::from(c >= 2) {
                return Err(Error::parse(row.line, "is_repeat disagrees with count"));
            }
            counts.push(c);
        }
        check_dense_ids(&ids)?;
        Ok(TruthLabels::from_counts(counts, TruthCriterion::Exact))
    }

    /// Reads externally computed `unitig_id<TAB>count` rows, e.g. hits at a
    /// relaxed identity threshold. Unitigs absent from the table count zero.
    pub fn read_alignment_counts<R: BufRead>(reader: R, n_unitigs: usize) -> Result<Self> {
        let mut counts = vec![0usize; n_unitigs];
        let mut seen = vec![false; n_unitigs];
        for row in read_rows(reader)? {
            row.expect_len(2)?;
            let id: usize = row.get(0, "unitig_id")?;
            if id >= n_unitigs {
                return Err(Error::parse(row.line, format!("unitig id {id} out of range")));
            }
            if std::mem::replace(&mut seen[id], true) {
                return Err(Error::parse(row.line, format!("duplicate unitig id {id}")));
            }
            counts[id] = row.get(1, "count")?;
        }
        Ok(TruthLabels::from_counts(counts, TruthCriterion::Imported))
    }
}

/// Sorted `(anchor, reference, position)` triples over all references.
struct AnchorIndex {
    entries: Vec<(u128, u32, u32)>,
}

impl AnchorIndex {
    fn new(refs: &[&[u8]]) -> Self {
        let mut entries: Vec<(u128, u32, u32)> = refs
            .par_iter()
            .enumerate()
            .flat_map_iter(|(r, seq)| KmerIter::new(seq, ANCHOR).map(move |(pos, f, _)| (f, r as u32, pos as u32)))
            .collect();
        entries.par_sort_unstable();
        AnchorIndex { entries }
    }

    fn hits(&self, key: u128) -> &[(u128, u32, u32)] {
        let lo = self.entries.partition_point(|e| e.0 < key);
        let hi = self.entries.partition_point(|e| e.0 <= key);
        &self.entries[lo..hi]
    }
}

fn anchor_key(seq: &[u8]) -> Option<u128> {
    KmerIter::new(&seq[..ANCHOR], ANCHOR).next().map(|(_, f, _)| f)
}

/// All start positions of `pat` in `hay`, overlapping ones included.
fn find_all(finder: &Finder, hay: &[u8]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < hay.len() {
        match finder.find(&hay[start..]) {
            Some(i) => {
                out.push(start + i);
                start += i + 1;
            }
            None => break,
        }
    }
    out
}

/// Number of distinct reference positions where the full unitig or its
/// reverse complement matches exactly. A palindromic match counts once.
pub fn label_exact_repeats(unitigs: &[&[u8]], refs: &[&[u8]]) -> TruthLabels {
    let index = AnchorIndex::new(refs);
    let counts = unitigs
        .par_iter()
        .map(|&u| {
            let mut sites: Vec<(u32, u32)> = Vec::new();
            for pat in [u.to_vec(), revcomp(u)] {
                if pat.is_empty() {
                    continue;
                }
                if pat.len() >= ANCHOR {
                    let Some(key) = anchor_key(&pat) else { continue };
                    for &(_, r, pos) in index.hits(key) {
                        let hay = refs[r as usize];
                        let p = pos as usize;
                        if hay.len() >= p + pat.len() && hay[p..p + pat.len()] == pat[..] {
                            sites.push((r, pos));
                        }
                    }
                } else {
                    let finder = Finder::new(&pat);
                    for (r, hay) in refs.iter().enumerate() {
                        sites.extend(find_all(&finder, hay).into_iter().map(|p| (r as u32, p as u32)));
                    }
                }
            }
            sites.sort_unstable();
            sites.dedup();
            sites.len()
        })
        .collect();
    TruthLabels::from_counts(counts, TruthCriterion::Exact)
}

/// Binary classification metrics with repeat as the positive class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when nothing was predicted positive; precision is then reported as 0.
    pub precision_undefined: bool,
    /// Set when nothing is truly positive; recall is then reported as 0.
    pub recall_undefined: bool,
}

pub fn metrics(pred: &[u8], truth: &[u8]) -> Result<Metrics> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} truth labels",
            pred.len(),
            truth.len()
        )));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p != 0, t != 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let n = pred.len();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Metrics {
        tp,
        fp,
        tn,
        fn_,
        accuracy: ratio(tp + tn, n),
        precision,
        recall,
        f1,
        precision_undefined: tp + fp == 0,
        recall_undefined: tp + fn_ == 0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        MeanStd {
            mean: mean(values),
            std: std_pop(values),
        }
    }
}

/// Per-seed metrics with their mean and spread.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub seeds: Vec<u64>,
    pub runs: Vec<Metrics>,
    pub accuracy: MeanStd,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
}

impl MetricsReport {
    pub fn new(seeds: Vec<u64>, runs: Vec<Metrics>) -> Self {
        let col = |f: fn(&Metrics) -> f64| MeanStd::of(&runs.iter().map(f).collect::<Vec<_>>());
        MetricsReport {
            accuracy: col(|m| m.accuracy),
            precision: col(|m| m.precision),
            recall: col(|m| m.recall),
            f1: col(|m| m.f1),
            seeds,
            runs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: f64,
    pub training_size: usize,
    pub report: MetricsReport,
}

/// Runs pseudo-labelling, training and fine-tuning for every `p` and seed on a
/// fixed graph and feature set, scoring the final labels.
pub fn p_sweep(
    data: &GraphData,
    truth: &[u8],
    p_values: &[f64],
    seeds: &[u64],
    cfg: &LearnConfig,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(p_values.len());
    for &p in p_values {
        let cfg = LearnConfig { p, ..cfg.clone() };
        let mut runs = Vec::with_capacity(seeds.len());
        let mut training_size = 0;
        for &s in seeds {
            let out = run_self_supervised(data, &cfg, s)?;
            training_size = out.training.len();
            runs.push(metrics(&out.final_labels.labels, truth)?);
        }
        rows.push(SweepRow {
            p,
            training_size,
            report: MetricsReport::new(seeds.to_vec(), runs),
        });
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(
        w,
        "p,training_size,n_seeds,accuracy_mean,accuracy_std,precision_mean,precision_std,recall_mean,recall_std,f1_mean,f1_std"
    )?;
    for r in rows {
        let m = &r.report;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.p,
            r.training_size,
            m.seeds.len(),
            m.accuracy.mean,
            m.accuracy.std,
            m.precision.mean,
            m.precision.std,
            m.recall.mean,
            m.recall.std,
            m.f1.mean,
            m.f1.std
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Trains on a random, size-matched sample of true labels for every seed and
/// scores the resulting labels.
pub fn semi_supervised_run(data: &GraphData, truth: &[u8], seeds: &[u64], cfg: &LearnConfig) -> Result<MetricsReport> {
    let mut runs = Vec::with_capacity(seeds.len());
    for &s in seeds {
        let out = run_semi_supervised(data, truth, cfg, s)?;
        runs.push(metrics(&out.final_labels.labels, truth)?);
    }
    Ok(MetricsReport::new(seeds.to_vec(), runs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_identities() {
        // TP=8, FP=2, FN=4, TN=6
        let mut pred = vec![1u8; 10];
        pred.extend(vec![0u8; 10]);
        let mut truth = vec![1u8; 8];
        truth.extend([0, 0, 1, 1, 1, 1]);
        truth.extend(vec![0u8; 6]);
        let m = metrics(&pred, &truth).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_, m.tn), (8, 2, 4, 6));
        assert!((m.precision - 0.8).abs() < 1e-12);
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.f1 - 8.0 / 11.0).abs() < 1e-12);
        assert!((m.accuracy - 0.7).abs() < 1e-12);
    }

    #[test]
    fn undefined_precision_flagged() {
        let m = metrics(&[0, 0, 0], &[1, 0, 1]).unwrap();
        assert!(m.precision_undefined && !m.recall_undefined);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert!(metrics(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn occurrences_fold_orientation() {
        let unit = b"ACGTTGCAAGGCTTACCGATGGCATTCAGG";
        let mut genome = b"TTTTTTTTTT".to_vec();
        genome.extend_from_slice(unit);
        genome.extend_from_slice(b"CCCCCCCCCC");
        genome.extend(revcomp(unit));
        genome.extend_from_slice(b"AAAAAAA");
        let other = b"GATTACAGATTACA".to_vec();
        let t = label_exact_repeats(&[&unit[..], &b"GATTACA"[..], &b"CCCCCCCCCCCCC"[..]], &[&genome, &other]);
        assert_eq!(t.counts, vec![2, 2, 0]);
        assert_eq!(t.is_repeat(), vec![1, 1, 0]);
    }

    #[test]
    fn overlapping_and_palindromic() {
        let g = b"AAAAAA".to_vec();
        // AAA at 0..=3 forward; TTT never occurs
        let t = label_exact_repeats(&[&b"AAA"[..], &b"ACGT"[..]], &[&g]);
        assert_eq!(t.counts, vec![4, 0]);
        let pal = b"GAATTC".to_vec();
        let t = label_exact_repeats(&[&pal[..]], &[&b"TTGAATTCTT"[..]]);
        assert_eq!(t.counts, vec![1]);
    }

    #[test]
    fn truth_tsv_roundtrip() {
        let t = TruthLabels::from_counts(vec![1, 3, 0], TruthCriterion::Exact);
        let mut buf = Vec::new();
        t.write_tsv(&mut buf).unwrap();
        assert_eq!(TruthLabels::read_tsv(&buf[..]).unwrap(), t);
        assert!(TruthLabels::read_tsv(&b"0\t2\t0\n"[..]).is_err());
    }

    #[test]
    fn alignment_counts_import() {
        let t = TruthLabels::read_alignment_counts(&b"2\t5\n0\t1\n"[..], 4).unwrap();
        assert_eq!(t.counts, vec![1, 0, 5, 0]);
        assert_eq!(t.criterion, TruthCriterion::Imported);
        assert!(TruthLabels::read_alignment_counts(&b"7\t1\n"[..], 4).is_err());
        assert!(TruthLabels::read_alignment_counts(&b"1\t1\n1\t2\n"[..], 4).is_err());
    }
}
