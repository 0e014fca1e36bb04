use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ntmp(sub: &str, config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ntmp"))
        .args([sub, "--config"])
        .arg(config)
        .env_remove("NTMP_OUTPUT_ROOT")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn small_config(dir: &Path, methods: &str, seeds: &str, extra: &str) -> PathBuf {
    let text = format!(
        r#"
methods = {methods}
seeds = {seeds}
output_dir = "out"

[task]
kind = "gaussian"
dim = 2
prior_pi = 0.5
separation = 3.0
n_test = 600
n_val = 200

[tuples]
n = 3
m = 1
n_tuples = 120

[train]
epochs = 4
batch_tuples = 16
learning_rate = 0.01
{extra}
"#
    );
    let p = dir.join("exp.toml");
    fs::write(&p, text).unwrap();
    p
}

fn data_rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn gen_writes_files_deterministically() {
    let d = tempfile::tempdir().unwrap();
    let cfg = small_config(d.path(), r#"["ntmp-abs"]"#, "[7]", "");
    ok(&ntmp("gen", &cfg));
    let seed_dir = d.path().join("out/data/seed-7");
    let tuples = fs::read_to_string(seed_dir.join("tuples.jsonl")).unwrap();
    assert_eq!(tuples.lines().count(), 120);
    assert!(tuples.lines().all(|l| l.contains("\"n\":3,\"m\":1")));
    let audit = fs::read_to_string(seed_dir.join("tuples_audit.jsonl")).unwrap();
    assert_eq!(audit.lines().count(), 120);
    let inst = fs::read_to_string(seed_dir.join("tuple_instances.csv")).unwrap();
    assert!(inst.starts_with("# config_sha256="));
    assert_eq!(data_rows(&inst).len(), 360);
    assert_eq!(data_rows(&fs::read_to_string(seed_dir.join("unlabeled.csv")).unwrap()).len(), 360);

    let before: Vec<Vec<u8>> = ["tuples.jsonl", "tuple_instances.csv", "tuples_audit.jsonl", "unlabeled.csv", "test.csv"]
        .iter()
        .map(|f| fs::read(seed_dir.join(f)).unwrap())
        .collect();
    ok(&ntmp("gen", &cfg));
    for (k, f) in ["tuples.jsonl", "tuple_instances.csv", "tuples_audit.jsonl", "unlabeled.csv", "test.csv"]
        .iter()
        .enumerate()
    {
        assert_eq!(fs::read(seed_dir.join(f)).unwrap(), before[k], "{f} changed on rerun");
    }
}

#[test]
fn infeasible_tuple_spec_fails_before_writing() {
    let d = tempfile::tempdir().unwrap();
    let cfg = small_config(d.path(), r#"["ntmp-abs"]"#, "[0]", "");
    let text = fs::read_to_string(&cfg).unwrap().replace("m = 1", "m = 5");
    fs::write(&cfg, text).unwrap();
    let out = ntmp("gen", &cfg);
    assert_eq!(out.status.code(), Some(3));
    assert!(!d.path().join("out").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let d = tempfile::tempdir().unwrap();
    let cfg = small_config(d.path(), "[]", "[0]", "");
    assert_eq!(ntmp("train", &cfg).status.code(), Some(2));
    let cfg = small_config(d.path(), r#"["ntmp-abs"]"#, "[]", "");
    assert_eq!(ntmp("train", &cfg).status.code(), Some(2));
    assert_eq!(ntmp("train", &d.path().join("missing.toml")).status.code(), Some(2));
}

#[test]
fn train_two_methods_five_seeds() {
    let d = tempfile::tempdir().unwrap();
    let cfg = small_config(d.path(), r#"["ntmp-ure", "ntmp-abs"]"#, "[0, 1, 2, 3, 4]", "");
    ok(&ntmp("train", &cfg));
    let out = d.path().join("out");
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(data_rows(&metrics).len(), 10);
    let sig = fs::read_to_string(out.join("significance.csv")).unwrap();
    let lines: Vec<&str> = sig.lines().collect();
    assert!(lines[0].starts_with("# config_sha256="));
    assert_eq!(lines[1], "method,AP,AUROC,ECE_TS,Brier_TS,p_Holm,Cliff's δ");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("ntmp-ure,") && lines[2].ends_with(",--,--"));
    assert_eq!(data_rows(&fs::read_to_string(out.join("traces.csv")).unwrap()).len(), 40);
    assert!(out.join("scorers/ntmp-abs-seed3.json").exists());

    // reruns and regenerated tables are byte-identical
    let first: Vec<Vec<u8>> = ["metrics.csv", "significance.csv", "summary.csv", "traces.csv", "reports.json"]
        .iter()
        .map(|f| fs::read(out.join(f)).unwrap())
        .collect();
    ok(&ntmp("train", &cfg));
    ok(&ntmp("report", &cfg));
    for (k, f) in ["metrics.csv", "significance.csv", "summary.csv", "traces.csv", "reports.json"]
        .iter()
        .enumerate()
    {
        assert_eq!(fs::read(out.join(f)).unwrap(), first[k], "{f} differs");
    }
}

#[test]
fn single_method_has_empty_significance_table() {
    let d = tempfile::tempdir().unwrap();
    let cfg = small_config(d.path(), r#"["ntmp-abs"]"#, "[0, 1]", "");
    ok(&ntmp("train", &cfg));
    let sig = fs::read_to_string(d.path().join("out/significance.csv")).unwrap();
    assert!(sig.lines().nth(1).unwrap().starts_with("# note:"));
    assert!(data_rows(&sig).is_empty());
}

#[test]
fn every_baseline_trains() {
    let d = tempfile::tempdir().unwrap();
    let cfg = small_config(
        d.path(),
        r#"["ntmp-ure", "ntmp-abs", "ntmp-relu", "uu", "uucor", "km", "km++", "llp-bagce", "llp-js"]"#,
        "[0]",
        "",
    );
    ok(&ntmp("train", &cfg));
    let metrics = fs::read_to_string(d.path().join("out/metrics.csv")).unwrap();
    assert_eq!(data_rows(&metrics).len(), 9);
}

#[test]
fn sweep_emits_rows_and_window() {
    let d = tempfile::tempdir().unwrap();
    let cfg = small_config(
        d.path(),
        r#"["ntmp-abs"]"#,
        "[0, 1]",
        "\n[sweep]\ndeltas = [-0.1, 0.0, 0.1]\nbootstrap_b = 200\n",
    );
    ok(&ntmp("sweep", &cfg));
    let out = d.path().join("out");
    let agg = fs::read_to_string(out.join("sweep_aggregate.csv")).unwrap();
    assert_eq!(data_rows(&agg).len(), 3);
    assert_eq!(data_rows(&fs::read_to_string(out.join("sweep_rows.csv")).unwrap()).len(), 6);
    let w: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("window.json")).unwrap()).unwrap();
    assert!(w["delta_min"].as_f64().unwrap() <= w["delta_max"].as_f64().unwrap());
}

#[test]
fn sweep_across_the_tuple_rate_flags_ill_conditioned_points() {
    let d = tempfile::tempdir().unwrap();
    let cfg = small_config(
        d.path(),
        r#"["ntmp-abs"]"#,
        "[0]",
        "\n[sweep]\ndeltas = [-0.2, -0.1, 0.0, 0.1]\nbootstrap_b = 50\n",
    );
    // center 1/3 + 0.1 puts the -0.1 grid point on alpha = 1/3
    let text = fs::read_to_string(&cfg)
        .unwrap()
        .replace("[train]", "[prior]\nregime = \"known\"\npi = 0.43333333333333335\n\n[train]");
    fs::write(&cfg, text).unwrap();
    ok(&ntmp("sweep", &cfg));
    let agg = fs::read_to_string(d.path().join("out/sweep_aggregate.csv")).unwrap();
    assert!(data_rows(&agg).iter().any(|r| r.contains(",inf,true,")), "{agg}");
}

#[test]
fn perturb_identity_row_and_conditioning_flags() {
    let d = tempfile::tempdir().unwrap();
    let cfg = small_config(
        d.path(),
        r#"["ntmp-abs"]"#,
        "[0, 1]",
        "\n[perturb]\nprior_noise = [-0.3, 0.0, 0.3]\nflip_probs = [0.0, 0.3]\npi_grid = [0.3333333333333333, 0.5]\n",
    );
    ok(&ntmp("perturb", &cfg));
    ok(&ntmp("train", &cfg));
    let out = d.path().join("out");
    let runs = fs::read_to_string(out.join("perturb_runs.csv")).unwrap();
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    for seed in ["0", "1"] {
        let train_row = data_rows(&metrics).into_iter().find(|r| r.starts_with(&format!("ntmp-abs,{seed},"))).unwrap();
        let train_vals: Vec<&str> = train_row.split(',').skip(5).collect();
        for fam in ["prior_noise,0,", "count_flip,0,"] {
            let r = data_rows(&runs)
                .into_iter()
                .find(|r| r.starts_with(&format!("{fam}{seed},")))
                .unwrap();
            let vals: Vec<&str> = r.split(',').skip(4).collect();
            assert_eq!(vals, train_vals, "{fam} seed {seed}");
        }
    }
    let agg = fs::read_to_string(out.join("perturb.csv")).unwrap();
    let row = data_rows(&agg).into_iter().find(|r| r.starts_with("pi_grid,0.3333333333333333,")).unwrap();
    assert!(row.ends_with(",true"), "{row}");
    assert_eq!(data_rows(&agg).len(), 3 + 2 + 2);
}

#[test]
fn files_task_trains_from_generated_data() {
    let d = tempfile::tempdir().unwrap();
    let cfg = small_config(d.path(), r#"["ntmp-abs"]"#, "[3]", "");
    ok(&ntmp("gen", &cfg));
    let files_cfg = d.path().join("files.toml");
    fs::write(
        &files_cfg,
        r#"
methods = ["ntmp-abs"]
seeds = [3]
output_dir = "out2"

[task]
kind = "files"
dir = "out/data/seed-3"

[prior]
regime = "known"
pi = 0.5

[tuples]
n = 3
m = 1
n_tuples = 120

[train]
epochs = 4
batch_tuples = 16
learning_rate = 0.01
"#,
    )
    .unwrap();
    ok(&ntmp("train", &files_cfg));
    let b = fs::read_to_string(d.path().join("out2/metrics.csv")).unwrap();
    assert_eq!(data_rows(&b).len(), 1);
    // same data and training seed as a direct run
    ok(&ntmp("train", &cfg));
    let a = fs::read_to_string(d.path().join("out/metrics.csv")).unwrap();
    let strip = |s: &str| data_rows(s).join("\n");
    assert_eq!(strip(&a), strip(&b));
}

fn write_labeled_csv(path: &Path, n: usize, flip: bool) {
    let mut s = String::from("f1,f2,label\n");
    for i in 0..n {
        let pos = i % 2 == 0;
        let x = if pos { 1.5 } else { -1.5 } + ((i * 37 % 17) as f64 / 17.0 - 0.5);
        let y = (i * 53 % 29) as f64 / 29.0 - 0.5;
        let lab = match (pos, flip) {
            (true, _) => "1",
            (false, false) => "0",
            (false, true) => "-1",
        };
        s.push_str(&format!("{x},{y},{lab}\n"));
    }
    fs::write(path, s).unwrap();
}

#[test]
fn csv_task_ingests_and_reports_bad_rows() {
    let d = tempfile::tempdir().unwrap();
    write_labeled_csv(&d.path().join("source.csv"), 600, false);
    write_labeled_csv(&d.path().join("test.csv"), 300, true);
    let mut u = String::new();
    for i in 0..400 {
        u.push_str(&format!("{},{}\n", if i % 2 == 0 { 1.4 } else { -1.6 }, (i % 7) as f64 / 7.0));
    }
    fs::write(d.path().join("u.csv"), u).unwrap();
    let cfg = d.path().join("csv.toml");
    let text = r#"
methods = ["ntmp-abs"]
seeds = [0]
output_dir = "out"

[task]
kind = "csv"
source = "source.csv"
unlabeled = "u.csv"
test = "test.csv"

[prior]
regime = "known"
pi = 0.5

[tuples]
n = 3
m = 1
n_tuples = 100

[train]
epochs = 4
batch_tuples = 16
learning_rate = 0.01
"#;
    fs::write(&cfg, text).unwrap();
    ok(&ntmp("train", &cfg));

    fs::write(d.path().join("test.csv"), "f1,f2,label\n1,2,1\n3,oops,0\n").unwrap();
    let out = ntmp("train", &cfg);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 3"), "{err}");

    fs::write(d.path().join("test.csv"), "").unwrap();
    let out = ntmp("train", &cfg);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_root_env_is_honored() {
    let d = tempfile::tempdir().unwrap();
    let root = tempfile::tempdir().unwrap();
    let cfg = small_config(d.path(), r#"["km"]"#, "[0]", "");
    let out = Command::new(env!("CARGO_BIN_EXE_ntmp"))
        .args(["train", "--config"])
        .arg(&cfg)
        .env("NTMP_OUTPUT_ROOT", root.path())
        .output()
        .unwrap();
    ok(&out);
    assert!(root.path().join("out/metrics.csv").exists());
    assert!(!d.path().join("out").exists());
}

#[test]
fn estimate_prior_writes_estimates() {
    let d = tempfile::tempdir().unwrap();
    let cfg = small_config(
        d.path(),
        r#"["ntmp-abs"]"#,
        "[0]",
        "\n[prior]\nregime = \"estimated\"\n\n[prior.score_model]\nhidden_width = 16\nepochs = 3\nvalidation_min = 100\n\n[prior.mpe]\nbootstrap_b = 50\n",
    );
    ok(&ntmp("estimate-prior", &cfg));
    let t = fs::read_to_string(d.path().join("out/prior_estimates.csv")).unwrap();
    let rows = data_rows(&t);
    assert_eq!(rows.len(), 1);
    let pi_hat: f64 = rows[0].split(',').nth(1).unwrap().parse().unwrap();
    assert!(pi_hat > 0.0 && pi_hat <= 1.0);
}
