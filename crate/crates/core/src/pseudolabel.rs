//! Percentile pseudo-labels from unitig length and coverage.
//!
//! Short, high-coverage unitigs become repeat examples; long, low-coverage
//! unitigs become non-repeat examples; everything else stays unlabelled.
//! All comparisons are strict, so ties at a threshold stay unlabelled.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphfeat::SequencingFeatures;
use crate::io::tsv::{check_dense_ids, read_rows};
use crate::stats::percentile_linear;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PseudoLabel {
    Repeat,
    NonRepeat,
    Unlabeled,
}

impl PseudoLabel {
    pub fn code(self) -> char {
        match self {
            PseudoLabel::Repeat => 'R',
            PseudoLabel::NonRepeat => 'N',
            PseudoLabel::Unlabeled => 'U',
        }
    }

    /// Binary training target, `None` when unlabelled.
    pub fn target(self) -> Option<usize> {
        match self {
            PseudoLabel::Repeat => Some(1),
            PseudoLabel::NonRepeat => Some(0),
            PseudoLabel::Unlabeled => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub len_low: f64,
    pub len_high: f64,
    pub cov: f64,
}

/// Disjoint, exhaustive split of the nodes into repeat, non-repeat and unlabelled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelPartition {
    labels: Vec<PseudoLabel>,
    pub p: f64,
    /// Absent when the labels did not come from percentile thresholds.
    pub thresholds: Option<Thresholds>,
}

impl LabelPartition {
    pub fn from_labels(labels: Vec<PseudoLabel>, p: f64) -> Self {
        LabelPartition {
            labels,
            p,
            thresholds: None,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[PseudoLabel] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> PseudoLabel {
        self.labels[i]
    }

    fn members(&self, which: PseudoLabel) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == which)
            .collect()
    }

    pub fn repeats(&self) -> Vec<usize> {
        self.members(PseudoLabel::Repeat)
    }

    pub fn non_repeats(&self) -> Vec<usize> {
        self.members(PseudoLabel::NonRepeat)
    }

    pub fn unlabeled(&self) -> Vec<usize> {
        self.members(PseudoLabel::Unlabeled)
    }

    /// `(node, target)` for every labelled node.
    pub fn training_set(&self) -> Vec<(usize, usize)> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.target().map(|t| (i, t)))
            .collect()
    }

    pub fn training_size(&self) -> usize {
        self.labels.iter().filter(|l| l.target().is_some()).count()
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "#unitig_id\tlabel")?;
        for (i, l) in self.labels.iter().enumerate() {
            writeln!(w, "{i}\t{}", l.code())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `unitig_id<TAB>{R|N|U}`; thresholds are not stored in this format.
    pub fn read_tsv<R: BufRead>(reader: R, p: f64) -> Result<Self> {
        let rows = read_rows(reader)?;
        let mut ids = Vec::with_capacity(rows.len());
        let mut labels = Vec::with_capacity(rows.len());
        for row in rows {
            row.expect_len(2)?;
            ids.push((row.line, row.get::<usize>(0, "unitig_id")?));
            labels.push(match row.fields[1].as_str() {
                "R" => PseudoLabel::Repeat,
                "N" => PseudoLabel::NonRepeat,
                "U" => PseudoLabel::Unlabeled,
                other => return Err(Error::parse(row.line, format!("unknown label `{other}`"))),
            });
        }
        check_dense_ids(&ids)?;
        Ok(LabelPartition::from_labels(labels, p))
    }
}

pub fn check_p(p: f64) -> Result<()> {
    if !(0.0..=50.0).contains(&p) {
        return Err(Error::invalid(format!("percentile p must lie in [0, 50], got {p}")));
    }
    Ok(())
}

/// `len_low` = p-th percentile of lengths, `len_high` = (100-p)-th percentile of
/// lengths, `cov` = (100-p)-th percentile of coverages (linear interpolation).
pub fn compute_thresholds(lengths: &[f64], coverages: &[f64], p: f64) -> Result<Thresholds> {
    check_p(p)?;
    if lengths.is_empty() || lengths.len() != coverages.len() {
        return Err(Error::Shape(
            "lengths and coverages must be non-empty and of equal length".into(),
        ));
    }
    Ok(Thresholds {
        len_low: percentile_linear(lengths, p).expect("non-empty"),
        len_high: percentile_linear(lengths, 100.0 - p).expect("non-empty"),
        cov: percentile_linear(coverages, 100.0 - p).expect("non-empty"),
    })
}

pub fn partition(lengths: &[f64], coverages: &[f64], t: Thresholds, p: f64) -> Result<LabelPartition> {
    if lengths.len() != coverages.len() {
        return Err(Error::Shape("lengths and coverages differ in length".into()));
    }
    let labels = lengths
        .iter()
        .zip(coverages)
        .map(|(&len, &cov)| {
            if len < t.len_low && cov > t.cov {
                PseudoLabel::Repeat
            } else if len > t.len_high && cov < t.cov {
                PseudoLabel::NonRepeat
            } else {
                PseudoLabel::Unlabeled
            }
        })
        .collect();
    Ok(LabelPartition {
        labels,
        p,
        thresholds: Some(t),
    })
}

/// Thresholds and partition in one step.
pub fn pseudo_label(seq: &SequencingFeatures, p: f64) -> Result<LabelPartition> {
    let t = compute_thresholds(&seq.lengths, &seq.coverages, p)?;
    partition(&seq.lengths, &seq.coverages, t, p)
}
