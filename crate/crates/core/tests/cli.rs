use std::path::Path;
use std::process::{Command, Output};

fn socialnav(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_socialnav"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("run socialnav")
}

const CONFIG: &str = r#"
[dataset]
max_train = 96

[model]
epochs = 2
batch_size = 32

[run]
rollouts = 1
max_steps = 3
out_dir = "out"
"#;

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
    dir
}

fn ok(o: &Output) {
    assert!(o.status.success(), "status {:?}\n{}", o.status, String::from_utf8_lossy(&o.stderr));
}

#[test]
fn train_then_eval_labels_variant() {
    let d = setup();
    let p = d.path();
    ok(&socialnav(p, &["train", "-c", "run.toml", "--set", "safety.alpha1=0", "--set", "safety.alpha2=0"]));
    assert!(p.join("out/model.json").is_file());
    ok(&socialnav(p, &["eval", "-c", "run.toml", "--checkpoint", "out/model.json"]));
    let metrics = std::fs::read_to_string(p.join("out/metrics_no_stl.jsonl")).unwrap();
    assert!(metrics.lines().next().unwrap().contains("\"no-STL\""));
    ok(&socialnav(p, &["report", "out/metrics_no_stl.jsonl", "--out", "rep"]));
    assert!(p.join("rep/summary.csv").is_file());
}

#[test]
fn train_and_simulate_are_reproducible() {
    let d = setup();
    let p = d.path();
    let mut traces = Vec::new();
    let mut logs = Vec::new();
    for run in ["a", "b"] {
        let out = format!("run.out_dir=\"{run}\"");
        ok(&socialnav(p, &["train", "-c", "run.toml", "--set", &out]));
        traces.push(std::fs::read(p.join(run).join("train_trace.jsonl")).unwrap());
        let ckpt = format!("{run}/model.json");
        ok(&socialnav(p, &["simulate", "-c", "run.toml", "--set", &out, "--checkpoint", &ckpt]));
        let dir = p.join(run).join("rollouts");
        let mut files: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        assert_eq!(files.len(), 1);
        logs.push(std::fs::read(&files[0]).unwrap());
    }
    assert_eq!(traces[0], traces[1]);
    assert_eq!(logs[0], logs[1]);
}

#[test]
fn ingest_writes_archives_and_plan_prints_json() {
    let d = setup();
    let p = d.path();
    ok(&socialnav(p, &["ingest", "-c", "run.toml"]));
    assert!(p.join("out/train.samples").is_file() && p.join("out/test.samples").is_file());
    let o = socialnav(p, &["plan", "-c", "run.toml"]);
    ok(&o);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.is_object());
}

#[test]
fn exit_codes() {
    let d = setup();
    let p = d.path();
    let code = |args: &[&str]| socialnav(p, args).status.code().unwrap();
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["bogus"]), 1);
    assert_eq!(code(&["train", "-c", "run.toml", "--set", "model.lr=-1"]), 1);
    assert_eq!(code(&["train", "-c", "run.toml", "--set", "nonsense"]), 1);
    assert_eq!(code(&["eval", "-c", "run.toml", "--checkpoint", "missing.json"]), 2);
    assert_eq!(code(&["simulate", "-c", "run.toml", "--set", "run.ego_ids=[99999]"]), 2);
    assert_eq!(code(&["report", "run.toml"]), 2);
}
