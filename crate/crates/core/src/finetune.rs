//! Outlier-based correction of forest predictions on the unlabelled nodes.
//!
//! Unlabelled nodes are split by their forest prediction. Inside the predicted
//! repeats, long low-coverage nodes are flipped to non-repeat; inside the
//! predicted non-repeats, short high-coverage nodes are flipped to repeat.
//! Thresholds are percentiles computed within each set only.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::tsv::{check_dense_ids, read_rows};
use crate::pseudolabel::{check_p, LabelPartition, PseudoLabel};
use crate::stats::percentile_linear;

/// Where a node's final label came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Fixed by its pseudo-label.
    Pseudo,
    /// Forest prediction kept.
    Model,
    /// Forest prediction reversed as an outlier.
    Flipped,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Pseudo => "pseudo",
            Provenance::Model => "model",
            Provenance::Flipped => "flipped",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "pseudo" => Some(Provenance::Pseudo),
            "model" => Some(Provenance::Model),
            "flipped" => Some(Provenance::Flipped),
            _ => None,
        }
    }
}

/// Thresholds and flipped sets. Thresholds are `None` for an empty set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FlipReport {
    pub u1: Vec<usize>,
    pub u0: Vec<usize>,
    pub rho_len_high: Option<f64>,
    pub rho_cov_low: Option<f64>,
    pub rho_len_low: Option<f64>,
    pub rho_cov_high: Option<f64>,
    pub flips_1to0: Vec<usize>,
    pub flips_0to1: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FinalLabels {
    pub labels: Vec<u8>,
    pub provenance: Vec<Provenance>,
}

impl FinalLabels {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "#unitig_id\tlabel\tprovenance")?;
        for (i, (l, p)) in self.labels.iter().zip(&self.provenance).enumerate() {
            writeln!(w, "{i}\t{l}\t{}", p.as_str())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let rows = read_rows(reader)?;
        let mut ids = Vec::with_capacity(rows.len());
        let mut labels = Vec::with_capacity(rows.len());
        let mut provenance = Vec::with_capacity(rows.len());
        for row in rows {
            row.expect_len(3)?;
            ids.push((row.line, row.get::<usize>(0, "unitig_id")?));
            labels.push(match row.fields[1].as_str() {
                "0" => 0,
                "1" => 1,
                other => return Err(Error::parse(row.line, format!("label must be 0 or 1, got `{other}`"))),
            });
            provenance.push(
                Provenance::parse(&row.fields[2])
                    .ok_or_else(|| Error::parse(row.line, format!("unknown provenance `{}`", row.fields[2])))?,
            );
        }
        check_dense_ids(&ids)?;
        Ok(FinalLabels { labels, provenance })
    }
}

/// Percentile over the members of `set`, or `None` when it is empty.
fn set_percentile(values: &[f64], set: &[usize], q: f64) -> Option<f64> {
    let sub: Vec<f64> = set.iter().map(|&i| values[i]).collect();
    percentile_linear(&sub, q)
}

/// Applies the outlier flips to `y_rf` and assembles the final labels.
pub fn finetune(
    y_rf: &[u8],
    partition: &LabelPartition,
    lengths: &[f64],
    coverages: &[f64],
    p: f64,
) -> Result<(FinalLabels, FlipReport)> {
    check_p(p)?;
    let n = partition.len();
    if y_rf.len() != n || lengths.len() != n || coverages.len() != n {
        return Err(Error::Shape(format!(
            "finetune inputs differ in length: labels {n}, y_rf {}, lengths {}, coverages {}",
            y_rf.len(),
            lengths.len(),
            coverages.len()
        )));
    }
    let unlabeled = partition.unlabeled();
    let (u1, u0): (Vec<usize>, Vec<usize>) = unlabeled.iter().partition(|&&i| y_rf[i] == 1);

    let rho_len_high = set_percentile(lengths, &u1, 100.0 - p);
    let rho_cov_low = set_percentile(coverages, &u1, p);
    let rho_len_low = set_percentile(lengths, &u0, p);
    let rho_cov_high = set_percentile(coverages, &u0, 100.0 - p);

    let flips_1to0: Vec<usize> = match (rho_len_high, rho_cov_low) {
        (Some(lh), Some(cl)) => u1
            .iter()
            .copied()
            .filter(|&i| lengths[i] > lh && coverages[i] < cl)
            .collect(),
        _ => Vec::new(),
    };
    let flips_0to1: Vec<usize> = match (rho_len_low, rho_cov_high) {
        (Some(ll), Some(ch)) => u0
            .iter()
            .copied()
            .filter(|&i| lengths[i] < ll && coverages[i] > ch)
            .collect(),
        _ => Vec::new(),
    };

    let mut labels = vec![0u8; n];
    let mut provenance = vec![Provenance::Model; n];
    for i in 0..n {
        match partition.label(i) {
            PseudoLabel::Repeat => {
                labels[i] = 1;
                provenance[i] = Provenance::Pseudo;
            }
            PseudoLabel::NonRepeat => {
                labels[i] = 0;
                provenance[i] = Provenance::Pseudo;
            }
            PseudoLabel::Unlabeled => labels[i] = y_rf[i],
        }
    }
    for &i in flips_1to0.iter().chain(&flips_0to1) {
        labels[i] ^= 1;
        provenance[i] = Provenance::Flipped;
    }
    let report = FlipReport {
        u1,
        u0,
        rho_len_high,
        rho_cov_low,
        rho_len_low,
        rho_cov_high,
        flips_1to0,
        flips_0to1,
    };
    Ok((FinalLabels { labels, provenance }, report))
}

/// Final labels without the outlier step: pseudo-labels where present, the
/// model prediction elsewhere.
pub fn merge_without_flips(y_model: &[u8], partition: &LabelPartition) -> Result<FinalLabels> {
    if y_model.len() != partition.len() {
        return Err(Error::Shape("prediction and partition differ in length".into()));
    }
    let mut labels = y_model.to_vec();
    let mut provenance = vec![Provenance::Model; labels.len()];
    for (i, l) in partition.labels().iter().enumerate() {
        if let Some(t) = l.target() {
            labels[i] = t as u8;
            provenance[i] = Provenance::Pseudo;
        }
    }
    Ok(FinalLabels { labels, provenance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use PseudoLabel::*;

    #[test]
    fn pseudo_labels_win() {
        let part = LabelPartition::from_labels(vec![Repeat, NonRepeat, Unlabeled], 25.0);
        let (f, _) = finetune(&[0, 1, 1], &part, &[10.0, 10.0, 10.0], &[1.0, 1.0, 1.0], 25.0).unwrap();
        assert_eq!(f.labels, vec![1, 0, 1]);
        assert_eq!(f.provenance, vec![Provenance::Pseudo, Provenance::Pseudo, Provenance::Model]);
    }

    #[test]
    fn empty_side_has_no_flips() {
        let part = LabelPartition::from_labels(vec![Unlabeled; 4], 25.0);
        let lengths = [10.0, 20.0, 300.0, 400.0];
        let covs = [90.0, 50.0, 5.0, 1.0];
        let (f, r) = finetune(&[0; 4], &part, &lengths, &covs, 25.0).unwrap();
        assert!(r.u1.is_empty() && r.flips_1to0.is_empty());
        assert_eq!(r.rho_len_high, None);
        // within U0: len p25 = 17.5, cov p75 = 60; only node 0 is below and above
        assert_eq!(r.rho_len_low, Some(17.5));
        assert_eq!(r.rho_cov_high, Some(60.0));
        assert_eq!(r.flips_0to1, vec![0]);
        assert_eq!(f.labels, vec![1, 0, 0, 0]);
        assert_eq!(f.provenance[0], Provenance::Flipped);
    }

    #[test]
    fn singleton_sets_never_flip() {
        let part = LabelPartition::from_labels(vec![Unlabeled, Unlabeled], 10.0);
        let (f, r) = finetune(&[1, 0], &part, &[5.0, 500.0], &[1.0, 100.0], 10.0).unwrap();
        assert!(r.flips_1to0.is_empty() && r.flips_0to1.is_empty());
        assert_eq!(f.labels, vec![1, 0]);
    }

    #[test]
    fn tsv_roundtrip() {
        let f = FinalLabels {
            labels: vec![1, 0, 1],
            provenance: vec![Provenance::Pseudo, Provenance::Flipped, Provenance::Model],
        };
        let mut buf = Vec::new();
        f.write_tsv(&mut buf).unwrap();
        assert_eq!(FinalLabels::read_tsv(&buf[..]).unwrap(), f);
    }

    #[test]
    fn merge_keeps_pseudo() {
        let part = LabelPartition::from_labels(vec![Repeat, Unlabeled, NonRepeat], 25.0);
        let f = merge_without_flips(&[0, 1, 1], &part).unwrap();
        assert_eq!(f.labels, vec![1, 1, 0]);
    }
}
