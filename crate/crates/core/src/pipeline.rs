//! Stage orchestration, artifact persistence and run reports.
//!
//! A run directory holds the deterministic artifacts (unitigs, mapping, graph,
//! features, truth, baselines) at the top level and one `seed_<s>` directory
//! per seed for the stochastic stages.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use crate::config::{LearnConfig, Mode, RunConfig};

use crate::assembly::{
    build_unitigs, finalize_coverage, import_sam, map_read_prefixes, pair_mates, read_unitig_table,
    unitigs_from_fasta, write_unitig_table, write_unitigs_fasta, MappingTable, UnitigRecord,
};
use crate::baselines::{self, BaselineInputs, BaselineResults, METHODS};
use crate::error::{Error, Result};
use crate::evaluate::{label_exact_repeats, metrics, MeanStd, Metrics, MetricsReport, TruthLabels};
use crate::finetune::{finetune, merge_without_flips, FinalLabels, FlipReport};
use crate::forest::{augment, augmented_feature_names, train_rf, ForestConfig, ForestModel, N_AUGMENTED_FEATURES};
use crate::graphfeat::{
    compute_features, read_features_tsv, standardize, write_features_tsv, BetweennessMode, FeatureMatrix,
    SequencingFeatures, FEATURE_NAMES,
};
use crate::io::tsv::{read_labels_tsv, write_labels_tsv, write_matrix_tsv};
use crate::io::{self, read_sequences, write_fasta};
use crate::pseudolabel::{pseudo_label, LabelPartition, PseudoLabel};
use crate::sagenet::{self, argmax_labels, Embeddings, TrainConfig, TrainOutput};
use crate::seeds::derive_seed;
use crate::simdata::{write_read_pairs, write_truth_intervals, Community, ReadPair};
use crate::unigraph::{build_edges, prune_lowest_quartile, GraphHeader, UnitigGraph};

/// File names inside a run directory.
pub mod files {
    pub const GENOMES: &str = "genomes.fa";
    pub const READS1: &str = "reads_1.fq";
    pub const READS2: &str = "reads_2.fq";
    pub const TRUTH_INTERVALS: &str = "truth_intervals.tsv";
    pub const UNITIGS_FA: &str = "unitigs.fa";
    pub const UNITIG_TABLE: &str = "unitigs.tsv";
    pub const MAPPING: &str = "mapping.tsv";
    pub const EDGES: &str = "edges.tsv";
    pub const GRAPH_HEADER: &str = "graph.json";
    pub const FEATURES: &str = "features.tsv";
    pub const LABELS: &str = "labels.tsv";
    pub const GNN_PARAMS: &str = "gnn_params.json";
    pub const LOSS: &str = "loss.csv";
    pub const XBAR: &str = "xbar.tsv";
    pub const Y_GNN: &str = "y_gnn.tsv";
    pub const FOREST: &str = "forest.json";
    pub const Y_RF: &str = "y_rf.tsv";
    pub const IMPORTANCE: &str = "importance.json";
    pub const FINAL_LABELS: &str = "final_labels.tsv";
    pub const FLIPS: &str = "flips.json";
    pub const TRUTH: &str = "truth.tsv";
    pub const METRICS: &str = "metrics.json";
    pub const BASELINE_DIR: &str = "baselines";
    pub const COMPARISON: &str = "comparison.json";
    pub const CONFIG: &str = "config.txt";
    pub const TIMINGS: &str = "timings.json";
    pub const REPORT_JSON: &str = "report.json";
    pub const REPORT_TXT: &str = "report.txt";
    pub const SWEEP: &str = "sweep.csv";
    pub const SEMI: &str = "semi.json";
}

pub fn seed_dir(run: &Path, seed: u64) -> PathBuf {
    run.join(format!("seed_{seed}"))
}

/// Opens `path` and runs `f`, tagging failures with the path.
pub fn read_file<T>(path: &Path, f: impl FnOnce(BufReader<File>) -> Result<T>) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingArtifacts(vec![path.display().to_string()]));
    }
    let r = io::open(path)?;
    f(r).map_err(|e| e.at_path(path))
}

/// Creates `path` (and its parent directories) and runs `f` on a buffered writer.
pub fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = io::create(path).map_err(|e| e.at_path(path))?;
    f(&mut w).map_err(|e| e.at_path(path))?;
    w.flush().map_err(|e| Error::from(e).at_path(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    read_file(path, |r| Ok(serde_json::from_reader(r)?))
}

/// Graph, standardized features and sequencing features of one assembly.
#[derive(Clone, Debug)]
pub struct GraphData {
    pub graph: UnitigGraph,
    pub features: FeatureMatrix,
    pub seq: SequencingFeatures,
}

impl GraphData {
    pub fn new(graph: UnitigGraph, features: FeatureMatrix, seq: SequencingFeatures) -> Result<Self> {
        let n = graph.n_nodes();
        if features.n_rows() != n || seq.len() != n {
            return Err(Error::Shape(format!(
                "graph has {n} nodes but features have {} rows and sequencing features {}",
                features.n_rows(),
                seq.len()
            )));
        }
        Ok(GraphData { graph, features, seq })
    }

    pub fn n_nodes(&self) -> usize {
        self.graph.n_nodes()
    }

    /// Loads `graph.json`, `edges.tsv` and `features.tsv` from `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        let (graph, _) = load_graph(dir)?;
        let (features, seq) = read_file(&dir.join(files::FEATURES), read_features_tsv)?;
        GraphData::new(graph, features, seq)
    }
}

pub fn load_graph(dir: &Path) -> Result<(UnitigGraph, GraphHeader)> {
    let header: GraphHeader = read_json(&dir.join(files::GRAPH_HEADER))?;
    let graph = read_file(&dir.join(files::EDGES), |r| UnitigGraph::read_edge_tsv(header.n_nodes, r))?;
    Ok((graph, header))
}

pub fn save_graph(dir: &Path, graph: &UnitigGraph, header: &GraphHeader) -> Result<()> {
    write_file(&dir.join(files::EDGES), |w| graph.write_edge_tsv(w))?;
    write_json(&dir.join(files::GRAPH_HEADER), header)
}

/// Trained encoder, its embeddings and the arg-max labels of its head.
pub struct GnnFit {
    pub seed: u64,
    pub train: TrainOutput,
    pub embeddings: Embeddings,
    pub y_gnn: Vec<u8>,
}

/// Trains the encoder on `x` with a seed derived from the run seed.
pub fn fit_gnn(
    x: &Array2<f64>,
    graph: &UnitigGraph,
    training: &[(usize, usize)],
    cfg: &LearnConfig,
    run_seed: u64,
) -> Result<GnnFit> {
    let seed = derive_seed(run_seed, 1);
    let tc = TrainConfig {
        epochs: cfg.epochs,
        lr: cfg.lr,
        seed,
        hidden: cfg.hidden,
    };
    let train = sagenet::train(x, graph, training, &tc)?;
    let embeddings = sagenet::forward(x, graph, &train.params)?;
    let y_gnn = argmax_labels(&embeddings.logits);
    Ok(GnnFit {
        seed,
        train,
        embeddings,
        y_gnn,
    })
}

/// Trains the forest with a seed derived from the run seed and predicts every row.
pub fn fit_forest(
    xbar: &Array2<f64>,
    names: Vec<String>,
    training: &[(usize, usize)],
    cfg: &LearnConfig,
    run_seed: u64,
) -> Result<(ForestModel, Vec<u8>)> {
    let fc = ForestConfig {
        n_trees: cfg.n_trees,
        seed: derive_seed(run_seed, 2),
        mtry: None,
    };
    let forest = train_rf(xbar, training, names, &fc)?;
    let y_rf = forest.predict(xbar)?;
    Ok((forest, y_rf))
}

/// Everything produced by the seeded stages of one run.
pub struct LearnOutputs {
    pub seed: u64,
    /// Percentile pseudo-labels (used for the baseline in both modes).
    pub pseudo: LabelPartition,
    /// Labels the models were trained on: `pseudo`, or sampled true labels.
    pub training_labels: LabelPartition,
    pub training: Vec<(usize, usize)>,
    pub y_base: Vec<u8>,
    pub gnn: GnnFit,
    pub xbar: Array2<f64>,
    pub xbar_names: Vec<String>,
    pub forest: ForestModel,
    pub y_rf: Vec<u8>,
    pub final_labels: FinalLabels,
    pub flips: Option<FlipReport>,
}

fn fit_models(
    data: &GraphData,
    x: &Array2<f64>,
    x_names: &[&str],
    training: &[(usize, usize)],
    cfg: &LearnConfig,
    seed: u64,
) -> Result<(GnnFit, Array2<f64>, Vec<String>, ForestModel, Vec<u8>)> {
    let gnn = fit_gnn(x, &data.graph, training, cfg, seed).map_err(|e| e.in_stage("gnn-train"))?;
    let (xbar, names) = if cfg.exclude_gnn {
        (x.clone(), x_names.iter().map(|s| s.to_string()).collect())
    } else {
        let z = &gnn.embeddings.z;
        (augment(x, z)?, augmented_feature_names(x_names, z.ncols()))
    };
    let (forest, y_rf) = fit_forest(&xbar, names.clone(), training, cfg, seed).map_err(|e| e.in_stage("rf"))?;
    Ok((gnn, xbar, names, forest, y_rf))
}

/// Pseudo-labels, encoder, forest and fine-tuning on the five graph features.
pub fn run_self_supervised(data: &GraphData, cfg: &LearnConfig, seed: u64) -> Result<LearnOutputs> {
    cfg.validate()?;
    let pseudo = pseudo_label(&data.seq, cfg.p).map_err(|e| e.in_stage("pseudolabel"))?;
    let training = pseudo.training_set();
    if training.is_empty() {
        return Err(Error::EmptyTrainingSet.in_stage("pseudolabel"));
    }
    let x = &data.features.standardized;
    let (gnn, xbar, xbar_names, forest, y_rf) = fit_models(data, x, &FEATURE_NAMES, &training, cfg, seed)?;
    if !cfg.exclude_gnn && xbar.ncols() != N_AUGMENTED_FEATURES && cfg.hidden[1] == 8 {
        return Err(Error::Shape(format!("forest input has {} columns", xbar.ncols())).in_stage("rf"));
    }
    let (final_labels, flips) = finetune(&y_rf, &pseudo, &data.seq.lengths, &data.seq.coverages, cfg.p)
        .map_err(|e| e.in_stage("finetune"))?;
    Ok(LearnOutputs {
        seed,
        y_base: baselines::baseline_heuristic(&pseudo),
        training_labels: pseudo.clone(),
        pseudo,
        training,
        gnn,
        xbar,
        xbar_names,
        forest,
        y_rf,
        final_labels,
        flips: Some(flips),
    })
}

pub const SEMI_FEATURE_NAMES: [&str; 7] = [
    FEATURE_NAMES[0],
    FEATURE_NAMES[1],
    FEATURE_NAMES[2],
    FEATURE_NAMES[3],
    FEATURE_NAMES[4],
    "length",
    "mean_coverage",
];

/// Standardized graph features followed by standardized length and coverage.
pub fn semi_features(data: &GraphData) -> Array2<f64> {
    let n = data.n_nodes();
    let seq = Array2::from_shape_fn((n, 2), |(i, j)| {
        if j == 0 {
            data.seq.lengths[i]
        } else {
            data.seq.coverages[i]
        }
    });
    let (seq_z, _, _) = standardize(&seq);
    ndarray::concatenate![ndarray::Axis(1), data.features.standardized, seq_z]
}

/// Uniform sample of `size` nodes labelled with their true class. Samples with a
/// single class are redrawn up to `retries` times.
pub fn sample_true_labels(truth: &[u8], size: usize, seed: u64, retries: usize) -> Result<LabelPartition> {
    if size == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let n = truth.len();
    let size = size.min(n);
    for attempt in 0..=retries {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 10 + attempt as u64));
        let picked = rand::seq::index::sample(&mut rng, n, size);
        let mut labels = vec![PseudoLabel::Unlabeled; n];
        for i in picked.iter() {
            labels[i] = if truth[i] == 1 {
                PseudoLabel::Repeat
            } else {
                PseudoLabel::NonRepeat
            };
        }
        let part = LabelPartition::from_labels(labels, f64::NAN);
        if !part.repeats().is_empty() && !part.non_repeats().is_empty() {
            return Ok(part);
        }
    }
    Err(Error::SingleClass)
}

/// Trains on a size-matched sample of true labels with length and coverage as
/// extra node features. No fine-tuning: sampled nodes keep their label and the
/// forest decides the rest.
pub fn run_semi_supervised(data: &GraphData, truth: &[u8], cfg: &LearnConfig, seed: u64) -> Result<LearnOutputs> {
    cfg.validate()?;
    if truth.len() != data.n_nodes() {
        return Err(Error::Shape("truth labels and graph differ in size".into()));
    }
    let pseudo = pseudo_label(&data.seq, cfg.p).map_err(|e| e.in_stage("pseudolabel"))?;
    let mut sampled = sample_true_labels(truth, pseudo.training_size(), seed, cfg.semi_retries)
        .map_err(|e| e.in_stage("semi-sample"))?;
    sampled.p = cfg.p;
    let training = sampled.training_set();
    let x = semi_features(data);
    let (gnn, xbar, xbar_names, forest, y_rf) = fit_models(data, &x, &SEMI_FEATURE_NAMES, &training, cfg, seed)?;
    let final_labels = merge_without_flips(&y_rf, &sampled)?;
    Ok(LearnOutputs {
        seed,
        y_base: baselines::baseline_heuristic(&pseudo),
        pseudo,
        training_labels: sampled,
        training,
        gnn,
        xbar,
        xbar_names,
        forest,
        y_rf,
        final_labels,
        flips: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub importance: f64,
}

pub fn importance_table(forest: &ForestModel) -> Vec<FeatureImportance> {
    forest
        .feature_names
        .iter()
        .zip(forest.feature_importance())
        .map(|(f, v)| FeatureImportance {
            feature: f.clone(),
            importance: v,
        })
        .collect()
}

pub fn write_loss_csv<W: Write>(trace: &[f64], mut w: W) -> Result<()> {
    writeln!(w, "epoch,loss")?;
    for (e, l) in trace.iter().enumerate() {
        writeln!(w, "{e},{l}")?;
    }
    w.flush()?;
    Ok(())
}

/// Stage labels scored against the truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageMetrics {
    pub y_base: Metrics,
    pub y_gnn: Metrics,
    pub y_rf: Metrics,
    pub y_final: Metrics,
}

impl LearnOutputs {
    pub fn stage_metrics(&self, truth: &[u8]) -> Result<StageMetrics> {
        Ok(StageMetrics {
            y_base: metrics(&self.y_base, truth)?,
            y_gnn: metrics(&self.gnn.y_gnn, truth)?,
            y_rf: metrics(&self.y_rf, truth)?,
            y_final: metrics(&self.final_labels.labels, truth)?,
        })
    }

    /// Writes every per-seed artifact into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        write_file(&dir.join(files::LABELS), |w| self.training_labels.write_tsv(w))?;
        write_file(&dir.join(files::GNN_PARAMS), |w| self.gnn.train.params.write_json(self.gnn.seed, w))?;
        write_file(&dir.join(files::LOSS), |w| write_loss_csv(&self.gnn.train.loss_trace, w))?;
        write_file(&dir.join(files::XBAR), |w| write_matrix_tsv(&self.xbar_names, &self.xbar, w))?;
        write_file(&dir.join(files::Y_GNN), |w| write_labels_tsv("y_gnn", &self.gnn.y_gnn, w))?;
        write_file(&dir.join(files::FOREST), |w| self.forest.write_json(w))?;
        write_file(&dir.join(files::Y_RF), |w| write_labels_tsv("y_rf", &self.y_rf, w))?;
        write_json(&dir.join(files::IMPORTANCE), &importance_table(&self.forest))?;
        write_file(&dir.join(files::FINAL_LABELS), |w| self.final_labels.write_tsv(w))?;
        if let Some(f) = &self.flips {
            write_json(&dir.join(files::FLIPS), f)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Timings {
    /// Wall-clock seconds per stage.
    pub seconds: BTreeMap<String, f64>,
}

impl Timings {
    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        info!("stage {stage}");
        let start = Instant::now();
        let out = f().map_err(|e| match e {
            Error::Stage { .. } => e,
            other => other.in_stage(stage),
        });
        *self.seconds.entry(stage.to_string()).or_default() += start.elapsed().as_secs_f64();
        out
    }
}

fn load_reads(cfg: &RunConfig) -> Result<Vec<ReadPair>> {
    let (Some(r1), Some(r2)) = (&cfg.reads1, &cfg.reads2) else {
        return Err(Error::invalid("reads1 and reads2 are required for this stage"));
    };
    let a = read_sequences(r1).map_err(|e| e.at_path(r1))?;
    let b = read_sequences(r2).map_err(|e| e.at_path(r2))?;
    pair_mates(a, b)
}

fn reusable(cfg: &RunConfig, paths: &[PathBuf]) -> bool {
    cfg.resume && paths.iter().all(|p| p.exists())
}

/// Attaches stored coverages to unitigs read from FASTA.
pub fn with_coverage(unitigs: Vec<UnitigRecord>, table_path: &Path) -> Result<Vec<UnitigRecord>> {
    let stats = read_file(table_path, read_unitig_table)?;
    if stats.len() != unitigs.len() {
        return Err(Error::Shape(format!(
            "unitig table has {} rows for {} unitigs",
            stats.len(),
            unitigs.len()
        ))
        .at_path(table_path));
    }
    unitigs
        .into_iter()
        .zip(stats)
        .map(|(u, s)| {
            if s.length != u.len() {
                return Err(Error::Shape(format!("length mismatch for unitig {}", u.id)).at_path(table_path));
            }
            Ok(UnitigRecord {
                mean_coverage: s.mean_coverage,
                ..u
            })
        })
        .collect()
}

pub fn sequencing_features(unitigs: &[UnitigRecord]) -> SequencingFeatures {
    SequencingFeatures {
        lengths: unitigs.iter().map(|u| u.len() as f64).collect(),
        coverages: unitigs.iter().map(|u| u.mean_coverage).collect(),
    }
}

pub fn betweenness_mode(samples: usize, seed: u64) -> BetweennessMode {
    if samples == 0 {
        BetweennessMode::Exact
    } else {
        BetweennessMode::Sampled {
            sources: samples,
            seed: derive_seed(seed, 3),
        }
    }
}

/// Writes genomes, paired reads and repeat intervals of a simulated community.
pub fn save_community(dir: &Path, com: &Community) -> Result<()> {
    write_file(&dir.join(files::GENOMES), |w| {
        write_fasta(w, com.genomes.iter().map(|g| (g.id.clone(), g.sequence.clone())))
    })?;
    let r1 = dir.join(files::READS1);
    let r2 = dir.join(files::READS2);
    let mut w2 = io::create(&r2).map_err(|e| e.at_path(&r2))?;
    write_file(&r1, |w1| write_read_pairs(&com.reads, w1, &mut w2))?;
    write_file(&dir.join(files::TRUTH_INTERVALS), |w| write_truth_intervals(&com.genomes, w))
}

/// In-memory result of the deterministic stages.
pub struct Prepared {
    pub unitigs: Vec<UnitigRecord>,
    pub mapping: MappingTable,
    pub header: GraphHeader,
    pub data: GraphData,
}

/// Assembly, prefix mapping, graph construction and features without touching disk.
pub fn prepare(reads: &[ReadPair], k: usize, max_multimap: usize, mode: BetweennessMode) -> Result<Prepared> {
    let unitigs = build_unitigs(reads, k).map_err(|e| e.in_stage("assemble"))?;
    let mapping = map_read_prefixes(reads, &unitigs, k);
    let unitigs = finalize_coverage(&unitigs, &mapping).map_err(|e| e.in_stage("map"))?;
    let (graph, header) = prune_lowest_quartile(&build_edges(&mapping, max_multimap));
    let features = compute_features(&graph, mode).map_err(|e| e.in_stage("features"))?;
    let data = GraphData::new(graph, features, sequencing_features(&unitigs))?;
    Ok(Prepared {
        unitigs,
        mapping,
        header,
        data,
    })
}

/// Exact-match truth of `unitigs` against reference sequences.
pub fn exact_truth(unitigs: &[UnitigRecord], refs: &[&[u8]]) -> TruthLabels {
    let seqs: Vec<&[u8]> = unitigs.iter().map(|u| u.sequence.as_slice()).collect();
    label_exact_repeats(&seqs, refs)
}

/// Repeat labels for the unitigs from references or an alignment-count table.
pub fn truth_for(cfg: &RunConfig, unitigs: &[UnitigRecord]) -> Result<Option<TruthLabels>> {
    if let Some(refs) = &cfg.refs {
        let recs = read_sequences(refs).map_err(|e| e.at_path(refs))?;
        let ref_seqs: Vec<&[u8]> = recs.iter().map(|r| r.seq.as_slice()).collect();
        return Ok(Some(exact_truth(unitigs, &ref_seqs)));
    }
    if let Some(path) = &cfg.alignment_counts {
        let t = read_file(path, |r| TruthLabels::read_alignment_counts(r, unitigs.len()))?;
        return Ok(Some(t));
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub positives: usize,
    pub metrics: Option<Metrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub config: baselines::BaselineConfig,
    pub methods: BTreeMap<String, MethodSummary>,
}

pub fn compare_baselines(results: &BaselineResults, truth: Option<&[u8]>) -> Result<Comparison> {
    let mut methods = BTreeMap::new();
    for (name, labels) in &results.labels {
        methods.insert(
            name.clone(),
            MethodSummary {
                positives: labels.iter().filter(|&&l| l == 1).count(),
                metrics: truth.map(|t| metrics(labels, t)).transpose()?,
            },
        );
    }
    Ok(Comparison {
        config: results.config,
        methods,
    })
}

/// Writes `<method>.tsv` per method and `comparison.json` into `dir`.
pub fn save_baselines(dir: &Path, results: &BaselineResults, truth: Option<&[u8]>) -> Result<()> {
    for (name, labels) in &results.labels {
        write_file(&dir.join(format!("{name}.tsv")), |w| write_labels_tsv("label", labels, w))?;
    }
    write_json(&dir.join(files::COMPARISON), &compare_baselines(results, truth)?)
}

/// Runs every stage, persisting artifacts under `cfg.out`, and returns the report.
pub fn detect(cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    let out = cfg.out.clone();
    std::fs::create_dir_all(&out)?;
    write_file(&out.join(files::CONFIG), |w| {
        writeln!(w, "# config_hash = {}", cfg.hash())?;
        w.write_all(cfg.to_kv_text().as_bytes())?;
        Ok(())
    })?;
    let mut t = Timings::default();
    let mut reads: Option<Vec<ReadPair>> = None;

    let unitig_fa = out.join(files::UNITIGS_FA);
    let unitigs = t.time("assemble", || {
        if let Some(path) = &cfg.unitigs {
            let u = read_file(path, unitigs_from_fasta)?;
            write_file(&unitig_fa, |w| write_unitigs_fasta(&u, w))?;
            return Ok(u);
        }
        if reusable(cfg, std::slice::from_ref(&unitig_fa)) {
            return read_file(&unitig_fa, unitigs_from_fasta);
        }
        let r = reads.insert(load_reads(cfg)?);
        let u = build_unitigs(r, cfg.k)?;
        write_file(&unitig_fa, |w| write_unitigs_fasta(&u, w))?;
        Ok(u)
    })?;
    info!("{} unitigs", unitigs.len());

    let mapping_path = out.join(files::MAPPING);
    let table_path = out.join(files::UNITIG_TABLE);
    let (unitigs, table) = t.time("map", || {
        if reusable(cfg, &[mapping_path.clone(), table_path.clone()]) {
            let table = read_file(&mapping_path, MappingTable::read_tsv)?;
            return Ok((with_coverage(unitigs, &table_path)?, table));
        }
        let table = if let Some(sam) = &cfg.sam {
            read_file(sam, |r| import_sam(&unitigs, r))?
        } else {
            if reads.is_none() {
                reads = Some(load_reads(cfg)?);
            }
            map_read_prefixes(reads.as_deref().expect("loaded"), &unitigs, cfg.k)
        };
        let unitigs = finalize_coverage(&unitigs, &table)?;
        write_file(&mapping_path, |w| table.write_tsv(w))?;
        write_file(&table_path, |w| write_unitig_table(&unitigs, w))?;
        Ok((unitigs, table))
    })?;
    drop(reads);

    let (graph, header) = t.time("build-graph", || {
        if reusable(cfg, &[out.join(files::EDGES), out.join(files::GRAPH_HEADER)]) {
            return load_graph(&out);
        }
        let counts = build_edges(&table, cfg.max_multimap);
        let (g, h) = prune_lowest_quartile(&counts);
        save_graph(&out, &g, &h)?;
        Ok((g, h))
    })?;
    info!("graph: {} nodes, {} edges (Q1 = {})", header.n_nodes, header.edges_after, header.q1);

    let seq = sequencing_features(&unitigs);
    let features = t.time("features", || {
        let path = out.join(files::FEATURES);
        if reusable(cfg, std::slice::from_ref(&path)) {
            let (f, stored) = read_file(&path, read_features_tsv)?;
            if stored != seq {
                return Err(Error::Shape("stored sequencing features disagree with the unitig table".into()));
            }
            return Ok(f);
        }
        let seed = cfg.seeds.first().copied().unwrap_or(0);
        let f = compute_features(&graph, betweenness_mode(cfg.approx_betweenness, seed))?;
        write_file(&path, |w| write_features_tsv(&f, &seq, w))?;
        Ok(f)
    })?;
    let data = GraphData::new(graph, features, seq)?;

    let truth = t.time("truth", || {
        let path = out.join(files::TRUTH);
        if cfg.refs.is_some() && reusable(cfg, std::slice::from_ref(&path)) {
            return read_file(&path, TruthLabels::read_tsv).map(Some);
        }
        let truth = truth_for(cfg, &unitigs)?;
        if let Some(tr) = &truth {
            write_file(&path, |w| tr.write_tsv(w))?;
        }
        Ok(truth)
    })?;
    let truth_labels = truth.as_ref().map(|t| t.is_repeat());
    if truth_labels.as_ref().is_some_and(|t| t.len() != data.n_nodes()) {
        return Err(Error::Shape("truth table does not match the unitigs".into()).in_stage("truth"));
    }

    t.time("baselines", || {
        let pseudo = pseudo_label(&data.seq, cfg.learn.p)?;
        let bc = data.features.raw.column(0).to_vec();
        let inputs = BaselineInputs {
            partition: &pseudo,
            graph: &data.graph,
            betweenness: &bc,
            lengths: &data.seq.lengths,
            coverages: &data.seq.coverages,
        };
        let results = baselines::run_all(&inputs, &cfg.baselines)?;
        save_baselines(&out.join(files::BASELINE_DIR), &results, truth_labels.as_deref())
    })?;

    for &seed in &cfg.seeds {
        let outputs = t.time("learn", || match cfg.mode {
            Mode::SelfSupervised => run_self_supervised(&data, &cfg.learn, seed),
            Mode::SemiSupervised => run_semi_supervised(
                &data,
                truth_labels.as_deref().expect("validated: truth available"),
                &cfg.learn,
                seed,
            ),
        })?;
        let dir = seed_dir(&out, seed);
        outputs.save(&dir)?;
        if let Some(tl) = &truth_labels {
            write_json(&dir.join(files::METRICS), &outputs.stage_metrics(tl)?)?;
        }
    }
    write_json(&out.join(files::TIMINGS), &t)?;
    let report = report(&out)?;
    write_json(&out.join(files::REPORT_JSON), &report)?;
    write_file(&out.join(files::REPORT_TXT), |w| Ok(w.write_all(report.to_text().as_bytes())?))?;
    Ok(report)
}

/// One row of the report table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    /// Number of unitigs labelled repeat, across seeds.
    pub positives: MeanStd,
    pub metrics: Option<MetricsReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config_hash: String,
    pub mode: String,
    pub seeds: Vec<u64>,
    pub n_unitigs: usize,
    pub n_edges: usize,
    pub stages: Vec<ReportRow>,
    pub baselines: Vec<ReportRow>,
    /// Mean forest importance across seeds, renormalized to sum 1.
    pub importance: Vec<FeatureImportance>,
    pub timings: BTreeMap<String, f64>,
}

fn row(name: &str, per_seed: &[Vec<u8>], seeds: &[u64], truth: Option<&[u8]>) -> Result<ReportRow> {
    let positives: Vec<f64> = per_seed
        .iter()
        .map(|l| l.iter().filter(|&&v| v == 1).count() as f64)
        .collect();
    let metrics = match truth {
        Some(t) => {
            let runs = per_seed.iter().map(|l| metrics(l, t)).collect::<Result<Vec<_>>>()?;
            Some(MetricsReport::new(seeds.to_vec(), runs))
        }
        None => None,
    };
    Ok(ReportRow {
        name: name.to_string(),
        positives: MeanStd::of(&positives),
        metrics,
    })
}

/// Builds the summary of a finished run directory from its artifacts.
pub fn report(run: &Path) -> Result<Report> {
    let config_path = run.join(files::CONFIG);
    let mut required = vec![
        config_path.clone(),
        run.join(files::GRAPH_HEADER),
        run.join(files::TIMINGS),
    ];
    required.extend(
        METHODS
            .iter()
            .map(|m| run.join(files::BASELINE_DIR).join(format!("{m}.tsv"))),
    );
    let cfg = if config_path.exists() {
        let text = std::fs::read_to_string(&config_path)?;
        Some(RunConfig::from_kv_text(&text).map_err(|e| e.at_path(&config_path))?)
    } else {
        None
    };
    if let Some(cfg) = &cfg {
        for &s in &cfg.seeds {
            let d = seed_dir(run, s);
            for f in [files::Y_GNN, files::Y_RF, files::FINAL_LABELS, files::FOREST] {
                required.push(d.join(f));
            }
        }
    }
    let missing: Vec<String> = required
        .iter()
        .filter(|p| !p.exists())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingArtifacts(missing));
    }
    let cfg = cfg.expect("config present");
    let header: GraphHeader = read_json(&run.join(files::GRAPH_HEADER))?;
    let timings: Timings = read_json(&run.join(files::TIMINGS))?;
    let truth_path = run.join(files::TRUTH);
    let truth = if truth_path.exists() {
        Some(read_file(&truth_path, TruthLabels::read_tsv)?.is_repeat())
    } else {
        None
    };
    let truth = truth.as_deref();
    let seeds = &cfg.seeds;
    let read_labels = |p: PathBuf| read_file(&p, read_labels_tsv);

    let y_base = read_labels(run.join(files::BASELINE_DIR).join("baseline.tsv"))?;
    let mut per_stage: Vec<(&str, Vec<Vec<u8>>)> = vec![
        ("y_base", vec![y_base; seeds.len()]),
        ("y_gnn", Vec::new()),
        ("y_rf", Vec::new()),
        ("y_final", Vec::new()),
    ];
    let mut importance: Vec<FeatureImportance> = Vec::new();
    for &s in seeds {
        let d = seed_dir(run, s);
        per_stage[1].1.push(read_labels(d.join(files::Y_GNN))?);
        per_stage[2].1.push(read_labels(d.join(files::Y_RF))?);
        per_stage[3].1.push(read_labels(d.join(files::FINAL_LABELS))?);
        let forest = read_file(&d.join(files::FOREST), ForestModel::read_json)?;
        let table = importance_table(&forest);
        if importance.is_empty() {
            importance = table.iter().map(|f| FeatureImportance { importance: 0.0, ..f.clone() }).collect();
        }
        if table.len() != importance.len() {
            return Err(Error::Shape("forests of different seeds use different features".into()));
        }
        for (acc, f) in importance.iter_mut().zip(&table) {
            acc.importance += f.importance;
        }
    }
    let total: f64 = importance.iter().map(|f| f.importance).sum();
    if total > 0.0 {
        importance.iter_mut().for_each(|f| f.importance /= total);
    }

    let stages = per_stage
        .iter()
        .map(|(name, labels)| row(name, labels, seeds, truth))
        .collect::<Result<Vec<_>>>()?;
    let baselines = METHODS
        .iter()
        .map(|m| {
            let l = read_labels(run.join(files::BASELINE_DIR).join(format!("{m}.tsv")))?;
            row(m, &[l], &[], truth)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Report {
        config_hash: cfg.hash(),
        mode: cfg.mode.as_str().to_string(),
        seeds: seeds.clone(),
        n_unitigs: header.n_nodes,
        n_edges: header.edges_after,
        stages,
        baselines,
        importance,
        timings: timings.seconds,
    })
}

impl Report {
    /// Plain-text table of the report.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "run {}  mode {}  unitigs {}  edges {}  seeds {:?}",
            &self.config_hash[..12.min(self.config_hash.len())],
            self.mode,
            self.n_unitigs,
            self.n_edges,
            self.seeds
        );
        let header = |s: &mut String, title: &str| {
            let _ = writeln!(
                s,
                "\n{title:<12} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
                "repeats", "accuracy", "precision", "recall", "f1", "f1_std"
            );
        };
        let line = |s: &mut String, r: &ReportRow| {
            let _ = write!(s, "{:<12} {:>9.1}", r.name, r.positives.mean);
            match &r.metrics {
                Some(m) => {
                    let _ = writeln!(
                        s,
                        " {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
                        m.accuracy.mean, m.precision.mean, m.recall.mean, m.f1.mean, m.f1.std
                    );
                }
                None => {
                    let _ = writeln!(s);
                }
            }
        };
        header(&mut s, "stage");
        for r in &self.stages {
            line(&mut s, r);
        }
        header(&mut s, "method");
        for r in &self.baselines {
            line(&mut s, r);
        }
        let _ = writeln!(s, "\nfeature importance");
        for f in &self.importance {
            let _ = writeln!(s, "  {:<18} {:.4}", f.feature, f.importance);
        }
        let _ = writeln!(s, "\ntimings (s)");
        for (k, v) in &self.timings {
            let _ = writeln!(s, "  {k:<18} {v:.2}");
        }
        s
    }
}

/// Loads the graph, features and truth of a finished run for the experiments.
pub fn load_experiment(run: &Path) -> Result<(GraphData, Vec<u8>)> {
    let data = GraphData::load(run)?;
    let truth = read_file(&run.join(files::TRUTH), TruthLabels::read_tsv)?.is_repeat();
    if truth.len() != data.n_nodes() {
        return Err(Error::Shape("truth table does not match the graph".into()));
    }
    Ok((data, truth))
}
