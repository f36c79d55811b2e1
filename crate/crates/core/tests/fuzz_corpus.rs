//! Replays the checked-in fuzz seeds through the same entry points the fuzz
//! targets exercise, so a regression in any parser shows up in a plain test run.

use std::fs;
use std::path::Path;

use repgraph::assembly::{import_sam, read_unitig_table, unitigs_from_fasta, MappingTable, UnitigRecord};
use repgraph::config::RunConfig;
use repgraph::evaluate::TruthLabels;
use repgraph::finetune::FinalLabels;
use repgraph::forest::ForestModel;
use repgraph::graphfeat::{read_features_tsv, write_features_tsv};
use repgraph::io::sam::parse_cigar;
use repgraph::io::tsv::{read_labels_tsv, read_matrix_tsv, write_labels_tsv};
use repgraph::io::{parse_fasta, parse_fastq, parse_sam, parse_sequences, write_fasta, write_fastq_record};
use repgraph::pseudolabel::LabelPartition;
use repgraph::sagenet::SageParams;
use repgraph::unigraph::UnitigGraph;

/// Runs one seed; returns whether the input parsed.
fn replay(target: &str, data: &[u8]) -> bool {
    match target {
        "fasta" => parse_fasta(data)
            .map(|recs| {
                let mut out = Vec::new();
                write_fasta(&mut out, recs.iter().map(|r| (r.id.clone(), r.seq.clone()))).unwrap();
                assert_eq!(parse_fasta(out.as_slice()).unwrap(), recs);
            })
            .is_ok(),
        "fastq" => parse_fastq(data)
            .map(|recs| {
                let mut out = Vec::new();
                for r in &recs {
                    write_fastq_record(&mut out, &r.id, &r.seq).unwrap();
                }
                assert_eq!(parse_fastq(out.as_slice()).unwrap(), recs);
            })
            .is_ok(),
        "sequences" => parse_sequences(data).is_ok(),
        "unitigs_fasta" => unitigs_from_fasta(data).is_ok(),
        "sam" => {
            let unitigs: Vec<UnitigRecord> = (0..3)
                .map(|id| UnitigRecord {
                    id,
                    name: format!("u{id}"),
                    sequence: b"ACGTACGTAC".to_vec(),
                    mean_coverage: 0.0,
                })
                .collect();
            parse_sam(data).is_ok() && import_sam(&unitigs, data).is_ok()
        }
        "cigar" => std::str::from_utf8(data).is_ok_and(|s| parse_cigar(s).is_some()),
        "edge_tsv" => {
            let Some((&n, rest)) = data.split_first() else { return false };
            UnitigGraph::read_edge_tsv(n as usize, rest)
                .map(|g| {
                    let mut out = Vec::new();
                    g.write_edge_tsv(&mut out).unwrap();
                    assert_eq!(UnitigGraph::read_edge_tsv(n as usize, out.as_slice()).unwrap(), g);
                })
                .is_ok()
        }
        "features_tsv" => read_features_tsv(data)
            .map(|(x, seq)| {
                let mut out = Vec::new();
                write_features_tsv(&x, &seq, &mut out).unwrap();
                assert_eq!(read_features_tsv(out.as_slice()).unwrap(), (x, seq));
            })
            .is_ok(),
        "labels_tsv" => read_labels_tsv(data)
            .map(|l| {
                let mut out = Vec::new();
                write_labels_tsv("label", &l, &mut out).unwrap();
                assert_eq!(read_labels_tsv(out.as_slice()).unwrap(), l);
            })
            .is_ok(),
        "matrix_tsv" => read_matrix_tsv(data).is_ok(),
        "unitig_table" => read_unitig_table(data).is_ok(),
        "mapping_tsv" => MappingTable::read_tsv(data).is_ok(),
        "truth_tsv" => TruthLabels::read_tsv(data).is_ok(),
        "alignment_counts" => {
            let Some((&n, rest)) = data.split_first() else { return false };
            TruthLabels::read_alignment_counts(rest, n as usize).is_ok()
        }
        "pseudo_labels" => LabelPartition::read_tsv(data, 25.0).is_ok(),
        "final_labels" => FinalLabels::read_tsv(data).is_ok(),
        "config" => std::str::from_utf8(data).is_ok_and(|t| {
            RunConfig::from_kv_text(t)
                .map(|c| assert_eq!(RunConfig::from_kv_text(&c.to_kv_text()).unwrap(), c))
                .is_ok()
        }),
        "gnn_params" => SageParams::read_json(data).is_ok(),
        "forest_json" => ForestModel::read_json(data)
            .map(|f| {
                let mut out = Vec::new();
                f.write_json(&mut out).unwrap();
                assert_eq!(ForestModel::read_json(out.as_slice()).unwrap(), f);
            })
            .is_ok(),
        other => panic!("no replay for fuzz target {other}"),
    }
}

#[test]
fn every_seed_replays() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz");
    let targets: Vec<String> = fs::read_dir(root.join("fuzz_targets"))
        .unwrap()
        .map(|e| e.unwrap().path().file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(targets.len(), 19);
    for t in &targets {
        let dir = root.join("corpus").join(t);
        let mut parsed = 0;
        let mut total = 0;
        for e in fs::read_dir(&dir).unwrap_or_else(|_| panic!("no corpus for {t}")) {
            let data = fs::read(e.unwrap().path()).unwrap();
            total += 1;
            parsed += usize::from(replay(t, &data));
        }
        assert!(parsed > 0, "no seed for {t} parses ({total} seeds)");
    }
}

#[test]
fn malformed_seeds_are_rejected() {
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    for (t, f) in [
        ("fastq", "truncated.fq"),
        ("fasta", "no_header.fa"),
        ("edge_tsv", "self_loop.bin"),
        ("alignment_counts", "duplicate.bin"),
        ("forest_json", "truncated.json"),
        ("sam", "unknown_ref.sam"),
        ("sam", "short_row.sam"),
        ("config", "bad_value.txt"),
        ("config", "unknown_key.txt"),
    ] {
        let data = fs::read(corpus.join(t).join(f)).unwrap();
        assert!(!replay(t, &data), "{t}/{f} should be rejected");
    }
}
