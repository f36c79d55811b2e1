use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use repgraph::io::write_fasta;
use repgraph::pipeline::{files, save_community};
use repgraph::simdata::{simulate_community, CommunityConfig, ReadSimConfig};

fn repgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_repgraph"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = repgraph(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    repgraph(args).status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Simulated reads plus a perfect assembly: backbone pieces and one copy of each repeat unit.
fn community(dir: &Path) {
    let cfg = CommunityConfig {
        n_genomes: 2,
        genome_len: 40_000,
        repeat_len: 400,
        copies: 4,
        n_pairs: 16_000,
        reads: ReadSimConfig {
            read_len: 101,
            outer_dist: 500,
            err_rate: 0.0,
            mut_rate: 0.0,
        },
        seed: 5,
    };
    let com = simulate_community(&cfg).unwrap();
    save_community(dir, &com).unwrap();
    let mut pieces = Vec::new();
    let mut units: Vec<(String, Vec<u8>)> = Vec::new();
    for g in &com.genomes {
        let mut at = 0;
        for iv in &g.repeat_intervals {
            pieces.push((format!("{}_{at}", g.id), g.sequence[at..iv.start].to_vec()));
            if !units.iter().any(|u| u.0 == iv.repeat_id) {
                units.push((iv.repeat_id.clone(), g.sequence[iv.start..iv.end].to_vec()));
            }
            at = iv.end;
        }
        pieces.push((format!("{}_{at}", g.id), g.sequence[at..].to_vec()));
    }
    pieces.retain(|x| !x.1.is_empty());
    pieces.extend(units);
    write_fasta(fs::File::create(dir.join("ideal.fa")).unwrap(), pieces).unwrap();
}

#[test]
fn stage_commands_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    community(d);
    let run = d.join("run");
    let (r1, r2) = (d.join(files::READS1), d.join(files::READS2));
    let fa = d.join("ideal.fa");
    let run_s = p(&run);

    ok(&["map", "--unitigs", p(&fa), "--reads", p(&r1), p(&r2), "--out", run_s]);
    ok(&["build-graph", "--mapping", run_s, "--out", run_s]);
    ok(&["features", "--graph", run_s, "--out", run_s]);
    ok(&["pseudolabel", "--features", run_s, "--p", "25", "--out", run_s]);
    ok(&["--seed", "3", "gnn-train", "--features", run_s, "--graph", run_s, "--labels", run_s, "--epochs", "80", "--out", run_s]);
    ok(&["--seed", "3", "rf", "--xbar", run_s, "--labels", run_s, "--trees", "20", "--out", run_s]);
    ok(&["finetune", "--rf", run_s, "--labels", run_s, "--features", run_s, "--p", "25", "--out", run_s]);
    let stdout = ok(&["truth", "--unitigs", p(&run.join(files::UNITIGS_FA)), "--refs", p(&d.join(files::GENOMES)), "--out", run_s]);
    assert!(stdout.starts_with("3 of "), "{stdout}");
    ok(&["baselines", "--features", run_s, "--graph", run_s, "--truth", p(&run.join(files::TRUTH)), "--out", run_s]);
    let stdout = ok(&["eval", "--pred", p(&run.join(files::FINAL_LABELS)), "--truth", p(&run.join(files::TRUTH)), "--out", run_s]);
    assert!(stdout.contains("f1"));

    for f in [files::XBAR, files::FOREST, files::Y_RF, files::FINAL_LABELS, files::FLIPS, files::METRICS, files::COMPARISON] {
        assert!(run.join(f).exists(), "{f} missing");
    }
    let xbar = fs::read_to_string(run.join(files::XBAR)).unwrap();
    assert_eq!(xbar.lines().next().unwrap().split('\t').count(), 14);

    ok(&["sweep", "--run", run_s, "--p", "20,30", "--seeds", "2", "--set", "epochs=40", "--set", "trees=10"]);
    let sweep = fs::read_to_string(run.join(files::SWEEP)).unwrap();
    assert_eq!(sweep.lines().count(), 3);
}

#[test]
fn detect_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    community(d);
    let run = d.join("out");
    let stdout = ok(&[
        "detect",
        "--reads",
        p(&d.join(files::READS1)),
        p(&d.join(files::READS2)),
        "--unitigs",
        p(&d.join("ideal.fa")),
        "--refs",
        p(&d.join(files::GENOMES)),
        "--p",
        "25",
        "--seeds",
        "1,2",
        "--epochs",
        "60",
        "--trees",
        "15",
        "--out",
        p(&run),
    ]);
    assert!(stdout.contains("y_final"));
    let first = fs::read_to_string(run.join(files::REPORT_JSON)).unwrap();
    ok(&["report", "--run", p(&run)]);
    assert_eq!(fs::read_to_string(run.join(files::REPORT_JSON)).unwrap(), first);
    let config = fs::read_to_string(run.join(files::CONFIG)).unwrap();
    assert!(config.contains("seeds = 1,2"));
}

#[test]
fn simulate_and_assemble() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let sim = d.join("sim");
    ok(&["--seed", "4", "simulate", "--len", "3000", "--L", "100", "--C", "2", "--pairs", "400", "--out", p(&sim)]);
    for f in [files::GENOMES, files::READS1, files::READS2, files::TRUTH_INTERVALS] {
        assert!(sim.join(f).exists(), "{f} missing");
    }
    let asm = d.join("asm");
    ok(&["assemble", "--reads", p(&sim.join(files::READS1)), p(&sim.join(files::READS2)), "--k", "31", "--out", p(&asm)]);
    assert!(fs::read_to_string(asm.join(files::UNITIGS_FA)).unwrap().starts_with('>'));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    // missing artifacts are an input problem
    assert_eq!(code(&["report", "--run", p(&d.join("nothing"))]), 2);
    // out-of-range percentile
    assert_eq!(code(&["pseudolabel", "--features", p(d), "--p", "70", "--out", p(d)]), 2);
    // unknown config key
    assert_eq!(code(&["--set", "bogus=1", "report", "--run", p(d)]), 2);
    // malformed input file
    let bad = d.join("bad.fa");
    fs::write(&bad, "ACGT\n").unwrap();
    assert_eq!(code(&["assemble", "--reads", p(&bad), p(&bad), "--out", p(d)]), 2);
    // p = 0 leaves no pseudo-labels, so training fails as a stage (3)
    community(d);
    let run = d.join("run");
    let run_s = p(&run);
    ok(&["map", "--unitigs", p(&d.join("ideal.fa")), "--reads", p(&d.join(files::READS1)), p(&d.join(files::READS2)), "--out", run_s]);
    ok(&["build-graph", "--mapping", run_s, "--out", run_s]);
    ok(&["features", "--graph", run_s, "--out", run_s]);
    ok(&["pseudolabel", "--features", run_s, "--p", "0", "--out", run_s]);
    assert_eq!(code(&["gnn-train", "--features", run_s, "--graph", run_s, "--labels", run_s, "--out", run_s]), 3);
    // argument errors come from clap
    assert_eq!(code(&["map", "--unitigs", "x.fa", "--out", "y"]), 2);
}
