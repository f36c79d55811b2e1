mod common;

use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use repgraph::evaluate::metrics;
use repgraph::finetune::{finetune, Provenance};
use repgraph::forest::{train_rf, ForestConfig, ForestModel};
use repgraph::graphfeat::{self, standardize};
use repgraph::pseudolabel::{compute_thresholds, partition, PseudoLabel};
use repgraph::sagenet::{self, SageParams};
use repgraph::unigraph::{prune_at_percentile, EdgeCounts, UnitigGraph};

use common::oracles;

fn graph_strategy(max_n: usize) -> impl Strategy<Value = UnitigGraph> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec((0..n as u32, 0..n as u32, 1u64..6), 0..3 * n).prop_map(move |es| {
            let mut seen = std::collections::HashSet::new();
            let edges: Vec<_> = es
                .into_iter()
                .filter(|&(a, b, _)| a != b && seen.insert((a.min(b), a.max(b))))
                .collect();
            UnitigGraph::from_edges(n, edges).unwrap()
        })
    })
}

fn seq_features() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..50).prop_flat_map(|n| {
        (
            prop::collection::vec((1u32..40).prop_map(f64::from), n),
            prop::collection::vec((0u32..40).prop_map(f64::from), n),
        )
    })
}

proptest! {
    #[test]
    fn features_match_brute_force(g in graph_strategy(10)) {
        let bc = graphfeat::betweenness(&g);
        for (a, b) in bc.iter().zip(oracles::betweenness(&g)) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        prop_assert_eq!(graphfeat::kcore(&g), oracles::kcore(&g));
        for (a, b) in graphfeat::clustering(&g).iter().zip(oracles::clustering(&g)) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        let deg: Vec<usize> = oracles::adjacency(&g).iter().map(|r| r.iter().filter(|&&x| x).count()).collect();
        prop_assert_eq!(graphfeat::degree(&g), deg);
        let mut wd = vec![0u64; g.n_nodes()];
        for &(a, b, w) in g.edges() {
            wd[a as usize] += w;
            wd[b as usize] += w;
        }
        prop_assert_eq!(graphfeat::weighted_degree(&g), wd);
    }

    #[test]
    fn sampling_every_source_is_exact(g in graph_strategy(10), seed in any::<u64>()) {
        prop_assert_eq!(graphfeat::betweenness_sampled(&g, g.n_nodes(), seed), graphfeat::betweenness(&g));
    }

    #[test]
    fn standardized_columns_have_zero_mean_unit_std(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 4), 2..40)) {
        let n = rows.len();
        let m = Array2::from_shape_fn((n, 4), |(i, j)| rows[i][j]);
        let (z, means, stds) = standardize(&m);
        for j in 0..4 {
            let c = z.column(j);
            let mu = c.sum() / n as f64;
            prop_assert!(mu.abs() < 1e-9);
            let var = c.iter().map(|x| x * x).sum::<f64>() / n as f64;
            if stds[j] == 1.0 && means[j] == m[[0, j]] {
                // constant column
                prop_assert!(var < 1e-18);
            } else {
                prop_assert!((var - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn partition_is_disjoint_and_follows_thresholds((lengths, coverages) in seq_features(), p in 0u32..=50) {
        let p = f64::from(p);
        let t = compute_thresholds(&lengths, &coverages, p).unwrap();
        let part = partition(&lengths, &coverages, t, p).unwrap();
        prop_assert!(t.len_low <= t.len_high);
        for i in 0..lengths.len() {
            let want = if lengths[i] < t.len_low && coverages[i] > t.cov {
                PseudoLabel::Repeat
            } else if lengths[i] > t.len_high && coverages[i] < t.cov {
                PseudoLabel::NonRepeat
            } else {
                PseudoLabel::Unlabeled
            };
            prop_assert_eq!(part.label(i), want);
        }
        let r = part.repeats().len();
        let nr = part.non_repeats().len();
        prop_assert_eq!(r + nr + part.unlabeled().len(), lengths.len());
        prop_assert_eq!(part.training_size(), r + nr);
    }

    #[test]
    fn finetune_preserves_pseudo_labels((lengths, coverages) in seq_features(), p in 0u32..=50, bits in prop::collection::vec(0u8..2, 50)) {
        let p = f64::from(p);
        let n = lengths.len();
        let y_rf = &bits[..n];
        let t = compute_thresholds(&lengths, &coverages, p).unwrap();
        let part = partition(&lengths, &coverages, t, p).unwrap();
        let (fin, rep) = finetune(y_rf, &part, &lengths, &coverages, p).unwrap();
        for i in 0..n {
            match part.label(i) {
                PseudoLabel::Repeat => prop_assert_eq!((fin.labels[i], fin.provenance[i]), (1, Provenance::Pseudo)),
                PseudoLabel::NonRepeat => prop_assert_eq!((fin.labels[i], fin.provenance[i]), (0, Provenance::Pseudo)),
                PseudoLabel::Unlabeled => {
                    let flipped = fin.provenance[i] == Provenance::Flipped;
                    prop_assert_eq!(fin.labels[i], y_rf[i] ^ u8::from(flipped));
                }
            }
        }
        for &i in &rep.flips_1to0 {
            prop_assert!(rep.u1.contains(&i) && fin.labels[i] == 0);
        }
        for &i in &rep.flips_0to1 {
            prop_assert!(rep.u0.contains(&i) && fin.labels[i] == 1);
        }
    }

    #[test]
    fn pruning_keeps_edges_above_q1(ws in prop::collection::vec(1u64..10, 1..30)) {
        let mut counts = EdgeCounts { n_nodes: ws.len() + 1, ..Default::default() };
        for (i, &w) in ws.iter().enumerate() {
            counts.weights.insert((0, i as u32 + 1), w);
        }
        let (g, h) = prune_at_percentile(&counts, 25.0);
        let mut s = ws.clone();
        s.sort_unstable();
        let q1 = s[((ws.len() as f64 * 0.25).ceil() as usize).max(1) - 1];
        prop_assert_eq!(h.q1, q1);
        let kept = if s[0] == s[s.len() - 1] { ws.len() } else { ws.iter().filter(|&&w| w > q1).count() };
        prop_assert_eq!(g.n_edges(), kept);
        prop_assert_eq!(h.edges_before, ws.len());
    }

    #[test]
    fn metric_identities(pairs in prop::collection::vec((0u8..2, 0u8..2), 1..100)) {
        let (pred, truth): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
        let m = metrics(&pred, &truth).unwrap();
        prop_assert_eq!(m.tp + m.fp + m.tn + m.fn_, pred.len());
        prop_assert!((m.accuracy - (m.tp + m.tn) as f64 / pred.len() as f64).abs() < 1e-12);
        if m.tp > 0 {
            let f1 = 2.0 * m.tp as f64 / (2 * m.tp + m.fp + m.fn_) as f64;
            prop_assert!((m.f1 - f1).abs() < 1e-12);
        } else {
            prop_assert_eq!(m.f1, 0.0);
        }
        let swapped = metrics(&truth, &pred).unwrap();
        prop_assert!((swapped.f1 - m.f1).abs() < 1e-12);
    }

    #[test]
    fn encoder_is_permutation_equivariant(g in graph_strategy(15), seed in any::<u64>()) {
        use rand::Rng;
        let n = g.n_nodes();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let perm = common::random_perm(&mut rng, n);
        let x = Array2::from_shape_fn((n, 5), |_| rng.gen_range(-2.0..2.0));
        let mut xp = x.clone();
        for (v, &p) in perm.iter().enumerate() {
            xp.row_mut(p).assign(&x.row(v));
        }
        let params = SageParams::glorot(5, [16, 8], seed);
        let e = sagenet::forward(&x, &g, &params).unwrap();
        let ep = sagenet::forward(&xp, &g.permuted(&perm), &params).unwrap();
        for v in 0..n {
            for (a, b) in e.z.row(v).iter().zip(ep.z.row(perm[v])) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn forest_json_roundtrip_and_determinism() {
    let data = common::two_class_data(60, 1);
    let x = data.features.standardized.clone();
    let training: Vec<(usize, usize)> = (0..60).filter(|i| i % 3 != 2).map(|i| (i, usize::from(i % 3 == 0))).collect();
    let names: Vec<String> = graphfeat::FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    let cfg = ForestConfig {
        n_trees: 25,
        seed: 4,
        mtry: None,
    };
    let a = train_rf(&x, &training, names.clone(), &cfg).unwrap();
    let b = train_rf(&x, &training, names, &cfg).unwrap();
    assert_eq!(a, b);
    let mut buf = Vec::new();
    a.write_json(&mut buf).unwrap();
    let back = ForestModel::read_json(buf.as_slice()).unwrap();
    assert_eq!(back, a);
    assert_eq!(back.predict(&x).unwrap(), a.predict(&x).unwrap());
    let imp = a.feature_importance();
    assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn params_json_roundtrip() {
    let p = SageParams::glorot(5, [16, 8], 9);
    let mut buf = Vec::new();
    p.write_json(42, &mut buf).unwrap();
    let (q, seed) = SageParams::read_json(buf.as_slice()).unwrap();
    assert_eq!(seed, 42);
    assert_eq!(q, p);
}

#[test]
fn training_is_deterministic() {
    let data = common::two_class_data(45, 2);
    let cfg = repgraph::config::LearnConfig {
        p: 25.0,
        epochs: 60,
        n_trees: 15,
        ..Default::default()
    };
    let a = repgraph::pipeline::run_self_supervised(&data, &cfg, 7).unwrap();
    let b = repgraph::pipeline::run_self_supervised(&data, &cfg, 7).unwrap();
    assert_eq!(a.gnn.train.params, b.gnn.train.params);
    assert_eq!(a.final_labels, b.final_labels);
    assert_eq!(a.forest, b.forest);
}
