use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use warfarin_gate::eval::EvalReport;
use warfarin_gate::svm::SvmModel;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_warfarin-gate"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn warfarin-gate")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A synthetic cohort written by the `synth` command.
fn cohort(dir: &Path, n: usize) -> PathBuf {
    let out = run(&["synth", "--n", &n.to_string(), "--seed", "5", "--out", s(dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("cohort.tsv")
}

fn train(input: &Path, out_dir: &Path) {
    let out = run(&["train", "--input", s(input), "--out", s(out_dir), "--c-grid", "1", "--seed", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["train"])), 1);
    assert_eq!(code(&run(&["train", "--input", "x.tsv", "--threshold", "1.5"])), 1);
    assert_eq!(code(&run(&["dose", "age_decade=5"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "seed=1\ncolour=blue\n").unwrap();
    let out = run(&["train", "--config", s(&conf)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["ingest", "--input", s(&dir.path().join("missing.tsv")), "--out", s(dir.path())])), 2);
    let bad = dir.path().join("bad.tsv");
    std::fs::write(&bad, "foo\tbar\n1\t2\n").unwrap();
    let out = run(&["ingest", "--input", s(&bad), "--out", s(dir.path())]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(code(&run(&["report", s(&bad)])), 2);
}

#[test]
fn all_high_risk_gate_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let input = cohort(dir.path(), 300);
    train(&input, dir.path());
    let model = SvmModel::load(&dir.path().join("model.svm")).unwrap();
    SvmModel::constant(model.feature_names().to_vec(), 1.0).save(&dir.path().join("model.svm")).unwrap();
    let out = run(&["evaluate", "--input", s(&input), "--out", s(dir.path()), "--seed", "2"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("high-risk"));
}

#[test]
fn dose_matches_the_published_model() {
    let patient = ["age_decade=5", "height_cm=170", "weight_kg=80", "race=white", "enzyme=0", "amiodarone=0"];
    let out = run(&[&["dose"][..], &patient].concat());
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("dose_mg_week=34.136\n"));

    let dir = tempfile::tempdir().unwrap();
    let safe = dir.path().join("safe.svm");
    let risky = dir.path().join("risky.svm");
    SvmModel::constant(vec!["aspirin".into()], -1.0).save(&safe).unwrap();
    SvmModel::constant(vec!["aspirin".into()], 1.0).save(&risky).unwrap();

    let missing = run(&[&["dose", "--model", s(&safe)][..], &patient].concat());
    assert_eq!(code(&missing), 1);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("aspirin"));

    let with_flag: Vec<&str> = patient.iter().copied().chain(["aspirin=1"]).collect();
    let out = run(&[&["dose", "--model", s(&safe)][..], &with_flag].concat());
    let text = stdout(&out);
    assert!(text.contains("dose_mg_week=34.136\n") && text.contains("label=safe_for_model"));
    assert!(!text.contains("not recommended"));
    let out = run(&[&["dose", "--model", s(&risky)][..], &with_flag].concat());
    assert!(stdout(&out).contains("label=high_risk") && stdout(&out).contains("model not recommended"));
}

#[test]
fn coefficient_override_needs_consent() {
    let dir = tempfile::tempdir().unwrap();
    let coeffs = dir.path().join("coeffs.txt");
    std::fs::write(&coeffs, warfarin_gate::iwpc_dose::IwpcCoefficients::PUBLISHED.to_text().replace("4.0376", "4.5"))
        .unwrap();
    let patient = ["age_decade=5", "height_cm=170", "weight_kg=80", "race=white", "enzyme=0", "amiodarone=0"];
    let refused = run(&[&["dose", "--coefficients", s(&coeffs)][..], &patient].concat());
    assert_ne!(code(&refused), 0);
    let accepted =
        run(&[&["dose", "--coefficients", s(&coeffs), "--allow-coefficient-override"][..], &patient].concat());
    assert_eq!(code(&accepted), 0);
    assert!(!stdout(&accepted).contains("34.136"));
}

#[test]
fn identity_and_oracle_gates_need_no_model() {
    let dir = tempfile::tempdir().unwrap();
    let input = cohort(dir.path(), 300);
    let base = ["evaluate", "--input", s(&input), "--out", s(dir.path()), "--seed", "2", "--gate"];
    let identity = run(&[&base[..], &["identity"]].concat());
    assert_eq!(code(&identity), 0, "{}", String::from_utf8_lossy(&identity.stderr));
    let r = EvalReport::from_json(&std::fs::read_to_string(dir.path().join("evaluation.json")).unwrap()).unwrap();
    assert_eq!(r.n_shrunken, r.n_original);
    assert_eq!(r.rmse_shrunken, Some(r.rmse_original));

    assert_eq!(code(&run(&[&base[..], &["oracle"]].concat())), 0);
    let r = EvalReport::from_json(&std::fs::read_to_string(dir.path().join("evaluation.json")).unwrap()).unwrap();
    assert_eq!(r.metrics.accuracy, 1.0);
    assert!(r.rmse_shrunken.unwrap() <= r.rmse_original);
    assert_eq!(code(&run(&[&base[..], &["psychic"]].concat())), 1);
}

#[test]
fn train_evaluate_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let input = cohort(dir.path(), 300);
    train(&input, dir.path());
    for file in
        ["model.svm", "imputation.txt", "removed_variables.txt", "selection.txt", "selection.json", "train.conf"]
    {
        assert!(dir.path().join(file).exists(), "{file}");
    }
    let out = run(&["evaluate", "--input", s(&input), "--out", s(dir.path()), "--seed", "2", "--compare"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("comparison.tsv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert!(table.contains("SVM (Sigmoid)"));

    let json = dir.path().join("evaluation.json");
    let rendered = run(&["report", s(&json), "--format", "json"]);
    assert_eq!(stdout(&rendered), std::fs::read_to_string(&json).unwrap());
    let text = run(&["report", s(&json)]);
    assert_eq!(stdout(&text), std::fs::read_to_string(dir.path().join("evaluation.txt")).unwrap());
    assert_eq!(code(&run(&["report", s(&json), "--format", "xml"])), 1);

    let conf = std::fs::read_to_string(dir.path().join("evaluate.conf")).unwrap();
    assert!(conf.contains("seed=2\n") && conf.contains("c_grid=0.1,1,10,100\n"));
}

#[test]
fn gate_emits_one_json_object_per_patient() {
    let dir = tempfile::tempdir().unwrap();
    let input = cohort(dir.path(), 300);
    train(&input, dir.path());
    let out = run(&["gate", "--input", s(&input), "--out", s(dir.path()), "--jsonl"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(!lines.is_empty());
    for v in &lines {
        assert!(v["predicted_dose_mg_week"].as_f64().unwrap() > 0.0);
        let label = v["label"].as_str().unwrap();
        let decision = v["decision_value"].as_f64().unwrap();
        assert_eq!(label == "high_risk", decision >= 0.0);
        assert_eq!(v["model_version"].as_str().unwrap().len(), 16);
    }
    let plain = run(&["gate", "--input", s(&input), "--out", s(dir.path())]);
    assert!(stdout(&plain).contains(&format!("# patients={}", lines.len())));
}

#[test]
fn ingest_writes_its_reports() {
    let dir = tempfile::tempdir().unwrap();
    let input = cohort(dir.path(), 200);
    let out_dir = dir.path().join("ingested");
    let out = run(&["ingest", "--input", s(&input), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0);
    for file in ["cohort.tsv", "exclusions.txt", "removed_variables.txt", "ingest.conf"] {
        assert!(out_dir.join(file).exists(), "{file}");
    }
    assert!(stdout(&out).contains("cohort: "));
}
