use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use cocontrast::cli::{self, Extension, RunConfig};
use cocontrast::data::{self, EmbeddingMatrix};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

const SMALL: &str = r#"
seed = 2
[synth]
per_class = 10
[train]
dim = 16
max_epochs = 6
lr = 0.005
[gan]
k0 = 2
k_d = 1
k_g = 1
i_dg = 1
k_h = 2
max_outer = 2
[eval]
labels_per_class = [3]
val_size = 3
test_size = 0
repeats = 2
kmeans_restarts = 2
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cocontrast"))
}

fn config_file(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn small(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::parse(SMALL).unwrap();
    cfg.out = Some(out.to_path_buf());
    cfg.resolve(&cli::Flags::default())
}

fn exit_code(args: &[&str]) -> i32 {
    bin().args(args).output().unwrap().status.code().unwrap()
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    assert_eq!(exit_code(&["--help"]), 0);
    assert_eq!(exit_code(&["train", "--bogus"]), 1);
    assert_eq!(exit_code(&["train", "--extension", "moco"]), 1);

    let typo = config_file(dir.path(), "[train]\ntua = 0.5\n");
    let out = bin().args(["train", "--config"]).arg(&typo).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tua"));

    let bad_tau = config_file(dir.path(), "[train]\ntau = 0.0\n[synth]\n");
    assert_eq!(bin().args(["train", "--config"]).arg(&bad_tau).arg("--out").arg(dir.path()).status().unwrap().code(), Some(1));

    let missing = config_file(dir.path(), "dataset = \"nowhere\"\n");
    assert_eq!(bin().args(["train", "--config"]).arg(&missing).arg("--out").arg(dir.path()).status().unwrap().code(), Some(2));

    // an exploding learning rate drives the parameters to non-finite values
    let explode = config_file(dir.path(), "[synth]\nper_class = 5\n[train]\ndim = 8\nlr = 1e300\nmax_epochs = 20\npatience = 20\n");
    let out = bin().args(["train", "--config"]).arg(&explode).arg("--out").arg(dir.path().join("x")).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_writes_identical_bytes_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let cfg_path = config_file(dir.path(), "[synth]\nper_class = 10\ncross = 0.0\n");
    let mut dumps = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let status = bin().args(["synth", "--config"]).arg(&cfg_path).arg("--out").arg(&out).status().unwrap();
        assert!(status.success());
        let mut files: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        dumps.push(files.iter().map(|f| (f.file_name().unwrap().to_owned(), fs::read(f).unwrap())).collect::<Vec<_>>());
    }
    assert_eq!(dumps[0], dumps[1]);
    let names: Vec<String> = dumps[0].iter().map(|(n, _)| n.to_string_lossy().into_owned()).collect();
    for f in ["manifest.txt", "nodes.tsv", "pa.tsv", "ps.tsv", "P.feat", "labels.tsv"] {
        assert!(names.iter().any(|n| n == f), "missing {f}");
    }
    let ds = data::load_dataset(&dir.path().join("a")).unwrap();
    for m in &ds.metapaths {
        let mpg = cocontrast::hin::build_metapath_graph(&ds.graph, m).unwrap();
        assert!(mpg.adjacency().pairs().all(|(i, j)| ds.labels[i] == ds.labels[j]));
    }
}

#[test]
fn train_embed_eval_pipeline() {
    let dir = TempDir::new().unwrap();
    let cfg = small(&dir.path().join("run"));
    let output = cli::cmd_train(&cfg).unwrap();
    let run = dir.path().join("run");
    for f in [cli::EMBEDDINGS_FILE, cli::LOSS_TRACE_FILE, cli::ATTENTION_TRACE_FILE, cli::CHECKPOINT_FILE, cli::CONFIG_SNAPSHOT_FILE] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let saved = data::load_embeddings(&run.join(cli::EMBEDDINGS_FILE)).unwrap();
    assert_eq!(saved, output.embeddings);
    assert_eq!(saved.values.dim(), (30, 16));

    // the snapshot reproduces the run configuration
    let snap: RunConfig = data::load_config_snapshot(&run.join(cli::CONFIG_SNAPSHOT_FILE)).unwrap();
    assert_eq!(snap.resolve(&cli::Flags::default()), cfg);

    let mut embed_cfg = cfg.clone();
    embed_cfg.out = Some(dir.path().join("embed"));
    let again = cli::cmd_embed(&embed_cfg, &run.join(cli::CHECKPOINT_FILE)).unwrap();
    assert_eq!(again.values, output.embeddings.values);

    let mut eval_cfg = cfg.clone();
    eval_cfg.out = Some(dir.path().join("eval"));
    let report = cli::cmd_eval(&eval_cfg, &run.join(cli::EMBEDDINGS_FILE)).unwrap();
    assert!(report.get("3", "micro_f1").is_some());
    assert!(report.get("kmeans", "nmi").is_some());
    let tsv = fs::read_to_string(dir.path().join("eval").join(cli::REPORT_TSV_FILE)).unwrap();
    assert!(tsv.starts_with("setting\tmetric\tmean\tstd\n"));
}

#[test]
fn extensions_run_and_gan_trace_has_phases() {
    let dir = TempDir::new().unwrap();
    let mut cfg = small(&dir.path().join("mu"));
    cfg.extension = Extension::Mu;
    cli::cmd_train(&cfg).unwrap();

    cfg.extension = Extension::Gan;
    cfg.out = Some(dir.path().join("gan"));
    cli::cmd_train(&cfg).unwrap();
    let trace = fs::read_to_string(dir.path().join("gan").join(cli::LOSS_TRACE_FILE)).unwrap();
    let phases: std::collections::BTreeSet<&str> = trace.lines().map(|l| l.split('\t').nth(4).unwrap()).collect();
    for p in ["warmup", "disc", "gen", "contrast"] {
        assert!(phases.contains(p), "phase {p} missing from {phases:?}");
    }
}

#[test]
fn binary_train_matches_library_and_flag_overrides() {
    let dir = TempDir::new().unwrap();
    let cfg_path = config_file(dir.path(), &SMALL.replace("seed = 2\n", ""));
    let out = dir.path().join("bin");
    let status = bin()
        .args(["train", "--seed", "2", "--extension", "none", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let lib = small(&dir.path().join("lib"));
    cli::cmd_train(&lib).unwrap();
    for f in [cli::EMBEDDINGS_FILE, cli::LOSS_TRACE_FILE, cli::ATTENTION_TRACE_FILE] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(dir.path().join("lib").join(f)).unwrap(), "{f}");
    }
}

fn eval_with(values: Array2<f64>, labels_cfg: &str) -> cocontrast::eval::MetricsReport {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("e.txt");
    let e = EmbeddingMatrix { values, view: "test".into(), epoch: 0, config_hash: String::new() };
    data::save_embeddings(&path, &e).unwrap();
    let cfg = RunConfig::parse(labels_cfg).unwrap().resolve(&cli::Flags::default());
    cli::cmd_eval(&cfg, &path).unwrap()
}

const EVAL_60: &str = "[synth]\nper_class = 60\n[eval]\nlabels_per_class = [20]\nval_size = 30\ntest_size = 0\nrepeats = 3\nkmeans_restarts = 3\n";

#[test]
fn eval_perfect_and_chance_embeddings() {
    let labels: Vec<usize> = (0..180).map(|i| i / 60).collect();
    let onehot = Array2::from_shape_fn((180, 3), |(i, c)| if labels[i] == c { 1.0 } else { 0.0 });
    let report = eval_with(onehot, EVAL_60);
    assert_eq!(report.get("20", "micro_f1").unwrap().mean, 1.0);
    assert!((report.get("kmeans", "nmi").unwrap().mean - 1.0).abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let noise = Array2::from_shape_simple_fn((180, 8), || rng.random_range(-1.0..1.0));
    let micro = eval_with(noise, EVAL_60).get("20", "micro_f1").unwrap().mean;
    // 3 repeats of 45 test nodes: chance level 1/3 with a generous margin
    assert!((micro - 1.0 / 3.0).abs() < 0.15, "micro-F1 {micro}");
}

#[test]
fn eval_rejects_row_mismatch() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("e.txt");
    let e = EmbeddingMatrix { values: Array2::zeros((5, 2)), view: String::new(), epoch: 0, config_hash: String::new() };
    data::save_embeddings(&path, &e).unwrap();
    let cfg = RunConfig::parse("[synth]\n").unwrap();
    let err = cli::cmd_eval(&cfg, &path).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}
