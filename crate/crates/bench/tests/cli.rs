use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sdl_core::linalg::io::{read_labels, read_matrix_csv, read_table_csv, write_labels, write_matrix_csv};
use sdl_core::loss::{Mode, SdlProblem};
use sdl_core::solvers::conditioning;
use sdl_core::DenseMatrix;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sdl-bench"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

struct SimFiles {
    data: String,
    aux: String,
    labels: String,
}

impl SimFiles {
    fn args(&self) -> Vec<&str> {
        vec!["--data", &self.data, "--aux", &self.aux, "--labels", &self.labels]
    }
}

fn simulate(dir: &Path) -> SimFiles {
    let cfg = dir.join("sim.toml");
    std::fs::write(&cfg, "[simulate]\np = 10\nq = 2\nn = 80\n").unwrap();
    let out = dir.join("sim");
    run_ok(&["simulate", "--config", &s(&cfg), "--seed", "4", "--out", &s(&out)]);
    SimFiles { data: s(&out.join("data.csv")), aux: s(&out.join("aux.csv")), labels: s(&out.join("labels.csv")) }
}

#[test]
fn bcd_train_trace_is_monotone() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("m");
    run_ok(&["train", "--iters", "50", "--out", &s(&out)]);
    let trace = read_table_csv(&out.join("report.csv")).unwrap();
    let loss = trace.column_f64("loss").unwrap();
    assert_eq!(loss.len(), 51);
    assert!(loss.windows(2).all(|w| w[1] <= w[0]));
    for f in ["W.csv", "H.csv", "beta.csv", "model.json", "metrics.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(!out.join("gamma.csv").exists());
}

#[test]
fn repeated_runs_write_identical_models() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = simulate(tmp.path());
    let mut outputs = Vec::new();
    for run_id in ["a", "b"] {
        let out = tmp.path().join(run_id);
        let mut args = vec!["train", "--solver", "bcd-feat", "--iters", "20", "--seed", "3", "--out"];
        let o = s(&out);
        args.push(&o);
        args.extend(sim.args());
        run_ok(&args);
        let files: Vec<Vec<u8>> = ["W.csv", "H.csv", "beta.csv", "gamma.csv", "model.json", "metrics.json"]
            .iter()
            .map(|f| std::fs::read(out.join(f)).unwrap())
            .collect();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn seed_changes_the_model() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(&["train", "--iters", "5", "--seed", "1", "--out", &s(&a)]);
    run_ok(&["train", "--iters", "5", "--seed", "2", "--out", &s(&b)]);
    assert_ne!(std::fs::read(a.join("W.csv")).unwrap(), std::fs::read(b.join("W.csv")).unwrap());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = s(&tmp.path().join("x"));
    let code = |args: &[&str]| run(args).status.code().unwrap();
    assert_eq!(code(&["train", "--mode", "filter", "--solver", "conv-feat", "--out", &out]), 2);
    assert_eq!(code(&["train", "--data", "/nonexistent.csv", "--labels", "/nonexistent.csv", "--out", &out]), 2);
    assert_eq!(code(&["train", "--xi", "abc"]), 2);
    assert_eq!(code(&["train", "--rank", "0", "--out", &out]), 2);
    assert_eq!(code(&["predict", "--out", &out]), 2);
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "[model]\nnot_a_key = 1\n").unwrap();
    assert_eq!(code(&["train", "--config", &s(&bad), "--out", &out]), 2);
    let ragged = tmp.path().join("ragged.csv");
    std::fs::write(&ragged, "1,2\n3\n").unwrap();
    assert_eq!(code(&["train", "--data", &s(&ragged), "--labels", &s(&ragged), "--out", &out]), 2);
}

#[test]
fn divergent_stepsize_exits_numeric() {
    let tmp = tempfile::tempdir().unwrap();
    let out = s(&tmp.path().join("x"));
    let status = run(&["train", "--solver", "conv-filt", "--tau", "1000", "--iters", "200", "--out", &out]).status;
    assert_eq!(status.code(), Some(3));
}

#[test]
fn predict_reproduces_training_predictions() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = simulate(tmp.path());
    let model = tmp.path().join("model");
    let mut args = vec!["train", "--iters", "30", "--out"];
    let m = s(&model);
    args.push(&m);
    args.extend(sim.args());
    run_ok(&args);
    let pred_dir = tmp.path().join("pred");
    let p = s(&pred_dir);
    let mut args = vec!["predict", "--model", &m, "--out", &p];
    args.extend(sim.args());
    run_ok(&args);
    let probs = read_matrix_csv(&pred_dir.join("probabilities.csv")).unwrap();
    let pred = read_labels(&pred_dir.join("predictions.csv")).unwrap();
    assert_eq!(probs.shape(), (80, 2));
    for i in 0..80 {
        assert!((probs.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let train: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(model.join("metrics.json")).unwrap()).unwrap();
    let test: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(pred_dir.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(train["train"]["accuracy"], test["test"]["accuracy"]);
    assert_eq!(pred.len(), 80);
}

/// Rank-3 data in p = 6 with `ν = nL*` and `ξ = ν + nL*/2`, as files.
fn well_conditioned(dir: &Path) -> (Vec<String>, f64, f64) {
    let (p, n, k) = (6, 40, 2);
    let mut g = ChaCha8Rng::seed_from_u64(21);
    let mut u = |r, c| DenseMatrix::from_fn(r, c, |_, _| 2.0 * g.random::<f64>() - 1.0);
    let x = u(p, 3).matmul(&u(3, n));
    let labels: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % (k + 1)).collect();
    let l_star = conditioning(&SdlProblem::new(x.clone(), None, labels.clone(), k, 4, 0.0, 0.0, Mode::Filter).unwrap(), 1.0)
        .unwrap()
        .l_star;
    let nu = n as f64 * l_star;
    let xi = nu + 0.5 * n as f64 * l_star;
    let (xp, lp) = (dir.join("x.csv"), dir.join("y.csv"));
    write_matrix_csv(&xp, &x).unwrap();
    write_labels(&lp, &labels).unwrap();
    (vec!["--data".into(), s(&xp), "--labels".into(), s(&lp), "--rank".into(), "4".into()], xi, nu)
}

#[test]
fn conv_filt_loss_gap_halves_at_the_predicted_rate() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, xi, nu) = well_conditioned(tmp.path());
    let (xi, nu) = (format!("{xi:e}"), format!("{nu:e}"));
    let mut base: Vec<&str> = data.iter().map(String::as_str).collect();
    base.extend(["--xi", &xi, "--nu", &nu]);

    let out = run_ok(&[&["check-conditioning"][..], &base].concat());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["condition_ok"], true);
    let rho = report["rho"].as_f64().unwrap();
    assert!(rho < 1.0);
    let every = (2f64.ln() / (1.0 / rho).ln()).ceil() as usize;

    let model = s(&tmp.path().join("conv"));
    run_ok(&[&["train", "--solver", "conv-filt", "--iters", "200", "--out", &model][..], &base].concat());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(Path::new(&model).join("model.json")).unwrap()).unwrap();
    assert_eq!(manifest["tau"].as_f64(), report["tau_midpoint"].as_f64());
    let loss = read_table_csv(&Path::new(&model).join("report.csv")).unwrap().column_f64("loss").unwrap();
    let l_inf = *loss.last().unwrap();
    let floor = 1e-12 * l_inf.abs().max(1.0);
    let mut checked = 0;
    for t in 3..loss.len() - every {
        let gap = loss[t] - l_inf;
        if gap > floor {
            assert!(loss[t + every] - l_inf <= 0.5 * gap + floor, "t={t}");
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn check_conditioning_writes_only_with_out() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, _, _) = well_conditioned(tmp.path());
    let args: Vec<&str> = data.iter().map(String::as_str).collect();
    let before = std::fs::read_dir(tmp.path()).unwrap().count();
    let a = run_ok(&[&["check-conditioning", "--xi", "100"][..], &args].concat());
    assert_eq!(std::fs::read_dir(tmp.path()).unwrap().count(), before);
    let report: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(report["condition_ok"], false);
    assert!(report["tau_interval"].is_null());
    let out = tmp.path().join("c");
    let b = run_ok(&[&["check-conditioning", "--xi", "100", "--out", &s(&out)][..], &args].concat());
    assert_eq!(std::fs::read(out.join("conditioning.json")).unwrap(), b.stdout);
}

fn csv_files(dir: &Path, acc: &mut Vec<PathBuf>) {
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            csv_files(&p, acc);
        } else if p.extension().is_some_and(|x| x == "csv") {
            acc.push(p);
        }
    }
}

const TAG_COLUMNS: [&str; 1] = ["method"];

#[test]
fn every_csv_loads_with_the_core_readers() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cfg = root.join("run.toml");
    std::fs::write(
        &cfg,
        "[model]\niters = 10\n[pareto]\nseeds = 2\nxi_grid = [1.0]\niters = 10\n\
         [curves]\nxi_grid = [1.0]\niters = 5\n[consistency]\nn_grid = [40, 80]\nseeds = 2\n\
         [simulate]\nkind = \"semisynthetic\"\nn = 60\n",
    )
    .unwrap();
    let c = s(&cfg);
    let o = |name: &str| s(&root.join(name));
    run_ok(&["simulate", "--config", &c, "--out", &o("semi")]);
    let sim = simulate(root);
    let mut train = vec!["train", "--config", &c, "--solver", "conv-filt", "--out"];
    let t = o("conv");
    train.push(&t);
    train.extend(sim.args());
    run_ok(&train);
    run_ok(&["predict", "--config", &c, "--model", &t, "--data", &sim.data, "--aux", &sim.aux, "--out", &o("pred")]);
    run_ok(&["bench-pareto", "--config", &c, "--out", &o("pareto")]);
    run_ok(&["bench-curves", "--config", &c, "--out", &o("curves")]);
    run_ok(&["consistency", "--config", &c, "--out", &o("consistency")]);

    let mut files = Vec::new();
    csv_files(root, &mut files);
    assert!(files.len() >= 20);
    for f in files {
        let text = std::fs::read_to_string(&f).unwrap();
        assert!(!text.contains('\r') && text.ends_with('\n'), "{}", f.display());
        let first = text.lines().next().unwrap();
        if first.chars().next().is_some_and(|ch| ch.is_ascii_alphabetic()) {
            let table = read_table_csv(&f).unwrap();
            let numeric: Vec<&str> = table.header.iter().map(String::as_str).filter(|h| !TAG_COLUMNS.contains(h)).collect();
            let m = table.numeric(&numeric).unwrap();
            assert_eq!(m.rows(), table.rows.len());
        } else {
            let m = read_matrix_csv(&f).unwrap();
            assert!(m.len() > 0, "{}", f.display());
        }
    }
}

#[test]
fn pareto_cli_matches_protocol() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("p.toml");
    std::fs::write(&cfg, "[pareto]\nmethods = [\"lr\", \"nmf-lr\", \"sdl-filt\"]\nxi_grid = [0.1, 10.0]\nseeds = 2\niters = 10\n")
        .unwrap();
    let out = tmp.path().join("out");
    run_ok(&["bench-pareto", "--config", &s(&cfg), "--out", &s(&out)]);
    let t = read_table_csv(&out.join("pareto.csv")).unwrap();
    assert_eq!(&t.header[..6], &["method", "xi", "recon_rel", "accuracy", "f_score", "seed"]);
    assert_eq!(t.column("method").unwrap(), vec!["lr", "lr", "nmf-lr", "nmf-lr", "sdl-filt", "sdl-filt"]);
    let recon = t.column_f64("recon_rel").unwrap();
    assert_eq!(&recon[..2], &[1.0, 1.0]);
    assert!(recon[2] < 1.0);
}
