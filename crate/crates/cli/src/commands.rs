//! One function per subcommand. Stage commands read and write the same file
//! names as `detect`, so their output directories can be chained.

use std::path::Path;

use anyhow::Result;
use log::info;
use ndarray::s;
use serde_json::json;

use repgraph::assembly::{
    build_unitigs, finalize_coverage, import_sam, map_read_prefixes, pair_mates, read_unitig_table,
    unitigs_from_fasta, write_unitig_table, write_unitigs_fasta, MappingTable,
};
use repgraph::baselines::{run_all, BaselineInputs};
use repgraph::config::{LearnConfig, Mode};
use repgraph::evaluate::{label_exact_repeats, metrics, p_sweep, semi_supervised_run, write_sweep_csv, MetricsReport, TruthLabels};
use repgraph::finetune::finetune as finetune_labels;
use repgraph::forest::default_feature_names;
use repgraph::graphfeat::{compute_features, read_features_tsv, write_features_tsv, SequencingFeatures, FEATURE_NAMES};
use repgraph::io::read_sequences;
use repgraph::io::tsv::{read_labels_tsv, read_matrix_tsv, write_labels_tsv, write_matrix_tsv};
use repgraph::pipeline::{
    self, betweenness_mode, files, fit_forest, fit_gnn, importance_table, load_experiment, load_graph, read_file,
    read_json, save_baselines, save_community, save_graph, write_file, write_json, write_loss_csv,
};
use repgraph::pseudolabel::{pseudo_label, LabelPartition, Thresholds};
use repgraph::simdata::{simulate_community, CommunityConfig, ReadSimConfig};
use repgraph::unigraph::{build_edges, prune_lowest_quartile};
use repgraph::{forest, Error};

use crate::*;

fn learn_config(g: &Globals) -> LearnConfig {
    g.config.learn.clone()
}

fn load_reads(paths: &[std::path::PathBuf]) -> Result<Vec<repgraph::simdata::ReadPair>> {
    let [r1, r2] = paths else {
        return Err(Error::invalid("--reads takes two files").into());
    };
    let a = read_sequences(r1).map_err(|e| e.at_path(r1))?;
    let b = read_sequences(r2).map_err(|e| e.at_path(r2))?;
    Ok(pair_mates(a, b)?)
}

fn sequencing_from_table(dir: &Path) -> Result<SequencingFeatures> {
    let stats = read_file(&dir.join(files::UNITIG_TABLE), read_unitig_table)?;
    Ok(SequencingFeatures {
        lengths: stats.iter().map(|s| s.length as f64).collect(),
        coverages: stats.iter().map(|s| s.mean_coverage).collect(),
    })
}

#[derive(serde::Serialize, serde::Deserialize)]
struct LabelMeta {
    p: f64,
    thresholds: Option<Thresholds>,
}

fn read_partition(dir: &Path, fallback_p: f64) -> Result<LabelPartition> {
    let meta_path = dir.join("thresholds.json");
    let (p, thresholds) = if meta_path.exists() {
        let m: LabelMeta = read_json(&meta_path)?;
        (m.p, m.thresholds)
    } else {
        (fallback_p, None)
    };
    let mut part = read_file(&dir.join(files::LABELS), |r| LabelPartition::read_tsv(r, p))?;
    part.thresholds = thresholds;
    Ok(part)
}

pub fn simulate(g: &Globals, a: SimulateArgs) -> Result<()> {
    let cfg = CommunityConfig {
        n_genomes: a.genomes,
        genome_len: a.genome_len,
        repeat_len: a.repeat_len,
        copies: a.copies,
        n_pairs: a.pairs,
        reads: ReadSimConfig {
            read_len: a.read_len,
            outer_dist: a.outer_dist,
            err_rate: a.err,
            mut_rate: a.mutation,
        },
        seed: g.seed,
    };
    let com = simulate_community(&cfg)?;
    save_community(&a.out, &com)?;
    write_json(&a.out.join("simulation.json"), &cfg)?;
    println!("{} genomes, {} read pairs -> {}", com.genomes.len(), com.reads.len(), a.out.display());
    Ok(())
}

pub fn assemble(g: &Globals, a: AssembleArgs) -> Result<()> {
    let k = a.k.unwrap_or(g.config.k);
    let reads = load_reads(&a.reads)?;
    let unitigs = build_unitigs(&reads, k)?;
    write_file(&a.out.join(files::UNITIGS_FA), |w| write_unitigs_fasta(&unitigs, w))?;
    write_file(&a.out.join(files::UNITIG_TABLE), |w| write_unitig_table(&unitigs, w))?;
    println!("{} unitigs from {} read pairs", unitigs.len(), reads.len());
    Ok(())
}

pub fn map(g: &Globals, a: MapArgs) -> Result<()> {
    let k = a.k.unwrap_or(g.config.k);
    let unitigs = read_file(&a.unitigs, unitigs_from_fasta)?;
    let table = match &a.sam {
        Some(sam) => read_file(sam, |r| import_sam(&unitigs, r))?,
        None => map_read_prefixes(&load_reads(&a.reads)?, &unitigs, k),
    };
    let unitigs = finalize_coverage(&unitigs, &table)?;
    write_file(&a.out.join(files::MAPPING), |w| table.write_tsv(w))?;
    write_file(&a.out.join(files::UNITIG_TABLE), |w| write_unitig_table(&unitigs, w))?;
    write_file(&a.out.join(files::UNITIGS_FA), |w| write_unitigs_fasta(&unitigs, w))?;
    let mapped = table.pairs.iter().filter(|p| !p.fwd.is_empty() || !p.rev.is_empty()).count();
    println!("{mapped} of {} pairs mapped to {} unitigs", table.pairs.len(), unitigs.len());
    Ok(())
}

fn copy_unitig_table(from: &Path, to: &Path) -> Result<()> {
    let src = from.join(files::UNITIG_TABLE);
    if from != to {
        std::fs::create_dir_all(to)?;
        std::fs::copy(&src, to.join(files::UNITIG_TABLE)).map_err(|e| Error::from(e).at_path(&src))?;
    }
    Ok(())
}

pub fn build_graph(g: &Globals, a: BuildGraphArgs) -> Result<()> {
    let max_multimap = a.max_multimap.unwrap_or(g.config.max_multimap);
    let table = read_file(&a.mapping.join(files::MAPPING), MappingTable::read_tsv)?;
    let (graph, header) = prune_lowest_quartile(&build_edges(&table, max_multimap));
    save_graph(&a.out, &graph, &header)?;
    copy_unitig_table(&a.mapping, &a.out)?;
    println!(
        "{} nodes, {} of {} edges kept (Q1 = {})",
        header.n_nodes, header.edges_after, header.edges_before, header.q1
    );
    Ok(())
}

pub fn features(g: &Globals, a: FeaturesArgs) -> Result<()> {
    let samples = a.approx_betweenness.unwrap_or(g.config.approx_betweenness);
    let (graph, _) = load_graph(&a.graph)?;
    let seq = sequencing_from_table(&a.graph)?;
    if seq.len() != graph.n_nodes() {
        return Err(Error::Shape("unitig table and graph differ in size".into()).into());
    }
    let f = compute_features(&graph, betweenness_mode(samples, g.seed))?;
    write_file(&a.out.join(files::FEATURES), |w| write_features_tsv(&f, &seq, w))?;
    println!("features for {} unitigs", f.n_rows());
    Ok(())
}

pub fn pseudolabel(g: &Globals, a: PseudolabelArgs) -> Result<()> {
    let p = a.p.unwrap_or(g.config.learn.p);
    let (_, seq) = read_file(&a.features.join(files::FEATURES), read_features_tsv)?;
    let part = pseudo_label(&seq, p)?;
    write_file(&a.out.join(files::LABELS), |w| part.write_tsv(w))?;
    write_json(
        &a.out.join("thresholds.json"),
        &LabelMeta {
            p,
            thresholds: part.thresholds,
        },
    )?;
    println!(
        "p = {p}: {} repeat, {} non-repeat, {} unlabelled",
        part.repeats().len(),
        part.non_repeats().len(),
        part.unlabeled().len()
    );
    Ok(())
}

pub fn gnn_train(g: &Globals, a: GnnTrainArgs) -> Result<()> {
    let mut cfg = learn_config(g);
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(lr) = a.lr {
        cfg.lr = lr;
    }
    cfg.validate()?;
    let (features, _) = read_file(&a.features.join(files::FEATURES), read_features_tsv)?;
    let (graph, _) = load_graph(&a.graph)?;
    let part = read_partition(&a.labels, cfg.p)?;
    let training = part.training_set();
    if training.is_empty() {
        return Err(Error::EmptyTrainingSet.in_stage("gnn-train").into());
    }
    let x = &features.standardized;
    let fit = fit_gnn(x, &graph, &training, &cfg, g.seed).map_err(|e| e.in_stage("gnn-train"))?;
    let z = &fit.embeddings.z;
    let xbar = forest::augment(x, z)?;
    let names = forest::augmented_feature_names(&FEATURE_NAMES, z.ncols());
    write_file(&a.out.join(files::GNN_PARAMS), |w| fit.train.params.write_json(fit.seed, w))?;
    write_file(&a.out.join(files::LOSS), |w| write_loss_csv(&fit.train.loss_trace, w))?;
    write_file(&a.out.join(files::XBAR), |w| write_matrix_tsv(&names, &xbar, w))?;
    write_file(&a.out.join(files::Y_GNN), |w| write_labels_tsv("y_gnn", &fit.y_gnn, w))?;
    let trace = &fit.train.loss_trace;
    println!(
        "loss {:.4} -> {:.4} over {} epochs",
        trace[0],
        trace[trace.len() - 1],
        cfg.epochs
    );
    Ok(())
}

pub fn rf(g: &Globals, a: RfArgs) -> Result<()> {
    let mut cfg = learn_config(g);
    if let Some(t) = a.trees {
        cfg.n_trees = t;
    }
    cfg.exclude_gnn |= a.exclude_gnn;
    cfg.validate()?;
    let (names, xbar) = read_file(&a.xbar.join(files::XBAR), read_matrix_tsv)?;
    let (names, xbar) = if cfg.exclude_gnn {
        let n = FEATURE_NAMES.len().min(xbar.ncols());
        (names[..n].to_vec(), xbar.slice(s![.., ..n]).to_owned())
    } else {
        if names != default_feature_names() {
            log::warn!("forest input columns differ from the 5 graph features + 8 embeddings layout");
        }
        (names, xbar)
    };
    let part = read_partition(&a.labels, cfg.p)?;
    if part.len() != xbar.nrows() {
        return Err(Error::Shape("labels and feature matrix differ in size".into()).into());
    }
    let (model, y_rf) =
        fit_forest(&xbar, names, &part.training_set(), &cfg, g.seed).map_err(|e| e.in_stage("rf"))?;
    write_file(&a.out.join(files::FOREST), |w| model.write_json(w))?;
    write_file(&a.out.join(files::Y_RF), |w| write_labels_tsv("y_rf", &y_rf, w))?;
    write_json(&a.out.join(files::IMPORTANCE), &importance_table(&model))?;
    println!(
        "{} trees, {} of {} unitigs predicted repeat",
        model.trees.len(),
        y_rf.iter().filter(|&&v| v == 1).count(),
        y_rf.len()
    );
    Ok(())
}

pub fn finetune(g: &Globals, a: FinetuneArgs) -> Result<()> {
    let p = a.p.unwrap_or(g.config.learn.p);
    let y_rf = read_file(&a.rf.join(files::Y_RF), read_labels_tsv)?;
    let part = read_partition(&a.labels, p)?;
    let (_, seq) = read_file(&a.features.join(files::FEATURES), read_features_tsv)?;
    let (labels, report) = finetune_labels(&y_rf, &part, &seq.lengths, &seq.coverages, p)?;
    write_file(&a.out.join(files::FINAL_LABELS), |w| labels.write_tsv(w))?;
    write_json(&a.out.join(files::FLIPS), &report)?;
    println!(
        "{} flipped 1->0, {} flipped 0->1",
        report.flips_1to0.len(),
        report.flips_0to1.len()
    );
    Ok(())
}

pub fn baselines(g: &Globals, a: BaselinesArgs) -> Result<()> {
    let mut cfg = g.config.baselines;
    if let Some(c) = a.bambus_c {
        cfg.bambus_c = c;
    }
    let p = a.p.unwrap_or(g.config.learn.p);
    let (features, seq) = read_file(&a.features.join(files::FEATURES), read_features_tsv)?;
    let (graph, _) = load_graph(&a.graph)?;
    let part = pseudo_label(&seq, p)?;
    let bc = features.raw.column(0).to_vec();
    let inputs = BaselineInputs {
        partition: &part,
        graph: &graph,
        betweenness: &bc,
        lengths: &seq.lengths,
        coverages: &seq.coverages,
    };
    let results = run_all(&inputs, &cfg)?;
    let truth = match &a.truth {
        Some(t) => Some(read_file(t, TruthLabels::read_tsv)?.is_repeat()),
        None => None,
    };
    save_baselines(&a.out, &results, truth.as_deref())?;
    for (name, labels) in &results.labels {
        println!("{name:<12} {}", labels.iter().filter(|&&v| v == 1).count());
    }
    Ok(())
}

pub fn truth(_g: &Globals, a: TruthArgs) -> Result<()> {
    let unitigs = read_file(&a.unitigs, unitigs_from_fasta)?;
    let t = if let Some(refs) = &a.refs {
        let recs = read_sequences(refs).map_err(|e| e.at_path(refs))?;
        let refs: Vec<&[u8]> = recs.iter().map(|r| r.seq.as_slice()).collect();
        let seqs: Vec<&[u8]> = unitigs.iter().map(|u| u.sequence.as_slice()).collect();
        label_exact_repeats(&seqs, &refs)
    } else {
        let path = a.alignment_counts.as_ref().expect("clap requires one source");
        read_file(path, |r| TruthLabels::read_alignment_counts(r, unitigs.len()))?
    };
    write_file(&a.out.join(files::TRUTH), |w| t.write_tsv(w))?;
    println!(
        "{} of {} unitigs are repeats",
        t.is_repeat().iter().filter(|&&v| v == 1).count(),
        t.len()
    );
    Ok(())
}

pub fn eval(_g: &Globals, a: EvalArgs) -> Result<()> {
    let pred = read_file(&a.pred, read_labels_tsv)?;
    let truth = read_file(&a.truth, TruthLabels::read_tsv)?.is_repeat();
    let m = metrics(&pred, &truth)?;
    write_json(&a.out.join(files::METRICS), &m)?;
    println!(
        "accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}",
        m.accuracy, m.precision, m.recall, m.f1
    );
    Ok(())
}

fn seed_range(g: &Globals, n: u64) -> Vec<u64> {
    (g.seed..g.seed + n).collect()
}

pub fn sweep(g: &Globals, a: SweepArgs) -> Result<()> {
    let (data, truth) = load_experiment(&a.run)?;
    let seeds = seed_range(g, a.seeds);
    let rows = p_sweep(&data, &truth, &a.p, &seeds, &learn_config(g))?;
    let out = a.out.unwrap_or(a.run);
    write_file(&out.join(files::SWEEP), |w| write_sweep_csv(&rows, w))?;
    for r in &rows {
        println!(
            "p {:>5}  training {:>6}  f1 {:.4} ± {:.4}",
            r.p, r.training_size, r.report.f1.mean, r.report.f1.std
        );
    }
    Ok(())
}

fn self_report(data: &pipeline::GraphData, truth: &[u8], seeds: &[u64], cfg: &LearnConfig) -> Result<MetricsReport> {
    let runs = seeds
        .iter()
        .map(|&s| {
            let out = pipeline::run_self_supervised(data, cfg, s)?;
            metrics(&out.final_labels.labels, truth)
        })
        .collect::<repgraph::Result<Vec<_>>>()?;
    Ok(MetricsReport::new(seeds.to_vec(), runs))
}

pub fn semi(g: &Globals, a: SemiArgs) -> Result<()> {
    let (data, truth) = load_experiment(&a.run)?;
    let mut cfg = learn_config(g);
    if let Some(p) = a.p {
        cfg.p = p;
    }
    let seeds = seed_range(g, a.seeds);
    let semi = semi_supervised_run(&data, &truth, &seeds, &cfg)?;
    println!("semi-supervised  f1 {:.4} ± {:.4}", semi.f1.mean, semi.f1.std);
    let mut doc = json!({ "p": cfg.p, "semi_supervised": semi });
    if a.compare {
        let selfr = self_report(&data, &truth, &seeds, &cfg)?;
        println!("self-supervised  f1 {:.4} ± {:.4}", selfr.f1.mean, selfr.f1.std);
        doc["self_supervised"] = serde_json::to_value(selfr)?;
    }
    let out = a.out.unwrap_or(a.run);
    write_json(&out.join(files::SEMI), &doc)?;
    Ok(())
}

pub fn detect(g: Globals, a: DetectArgs, seed_flag: Option<u64>) -> Result<()> {
    let mut cfg = g.config;
    if let [r1, r2] = a.reads.as_slice() {
        cfg.reads1 = Some(r1.clone());
        cfg.reads2 = Some(r2.clone());
    }
    macro_rules! apply {
        ($($src:expr => $dst:expr),* $(,)?) => {
            $(if let Some(v) = $src { $dst = v; })*
        };
    }
    apply! {
        a.unitigs.map(Some) => cfg.unitigs,
        a.sam.map(Some) => cfg.sam,
        a.refs.map(Some) => cfg.refs,
        a.alignment_counts.map(Some) => cfg.alignment_counts,
        a.k => cfg.k,
        a.p => cfg.learn.p,
        a.epochs => cfg.learn.epochs,
        a.lr => cfg.learn.lr,
        a.trees => cfg.learn.n_trees,
        a.max_multimap => cfg.max_multimap,
        a.approx_betweenness => cfg.approx_betweenness,
        a.bambus_c => cfg.baselines.bambus_c,
        a.out => cfg.out,
    }
    if let Some(m) = a.mode {
        cfg.mode = m.parse::<Mode>()?;
    }
    cfg.learn.exclude_gnn |= a.exclude_gnn;
    if !a.seeds.is_empty() {
        cfg.seeds = a.seeds;
    } else if let Some(s) = seed_flag {
        cfg.seeds = vec![s];
    }
    cfg.resume = a.resume;
    if cfg.unitigs.is_none() && cfg.reads1.is_none() && !cfg.resume {
        return Err(Error::invalid("detect needs --reads R1 R2 or --unitigs").into());
    }
    info!("config hash {}", cfg.hash());
    let report = pipeline::detect(&cfg)?;
    print!("{}", report.to_text());
    Ok(())
}

pub fn report(_g: &Globals, a: ReportArgs) -> Result<()> {
    let r = pipeline::report(&a.run)?;
    write_json(&a.run.join(files::REPORT_JSON), &r)?;
    write_file(&a.run.join(files::REPORT_TXT), |w| Ok(std::io::Write::write_all(w, r.to_text().as_bytes())?))?;
    print!("{}", r.to_text());
    Ok(())
}
