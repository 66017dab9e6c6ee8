use std::path::Path;
use std::process::{Command, Output};

use echo_core::data::{load_libsvm, load_records};
use echo_core::optim::StepBudget;

fn bench(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_echo-bench"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

const QUICK: [&str; 14] = [
    "--seeds",
    "2",
    "--grid-lo",
    "0.1",
    "--grid-hi",
    "1",
    "--per-decade",
    "4",
    "--subsample",
    "1000",
    "--threshold",
    "0.35",
    "--step-cap",
    "20000",
];

fn quick(cmd: &str, extra: &[&str]) -> Vec<String> {
    let mut v = vec![cmd.to_string()];
    v.extend(QUICK.iter().map(|s| s.to_string()));
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

fn run_ok(args: &[String], out: &Path) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = bench(&refs, out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    o
}

#[test]
fn unknown_flag_prints_usage_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = bench(&["run", "--no-such-flag"], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn identical_invocations_write_identical_csv() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = quick("run", &["--B", "8", "--K", "2"]);
    run_ok(&args, a.path());
    run_ok(&args, b.path());
    let ra = std::fs::read(a.path().join("records.csv")).unwrap();
    assert_eq!(ra, std::fs::read(b.path().join("records.csv")).unwrap());
    assert_eq!(load_records(a.path().join("records.csv")).unwrap().len(), 2);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "# quick run\nB = 8\nseeds = 3\neta = 0.5\nthreshold = 0.35\nstep-cap = 20000\n",
    )
    .unwrap();
    let args = vec![
        "run".to_string(),
        "--config".into(),
        cfg.to_str().unwrap().into(),
        "--B".into(),
        "4".into(),
    ];
    run_ok(&args, dir.path());
    let records = load_records(dir.path().join("records.csv")).unwrap();
    assert_eq!(records.len(), 3);
    assert!(records.iter().all(|r| r.batch_size == 4 && r.eta == 0.5));
}

#[test]
fn schedule_runs_account_for_the_cycled_budget() {
    let dir = tempfile::tempdir().unwrap();
    let args = quick(
        "run",
        &[
            "--algorithm",
            "prox",
            "--gamma",
            "0.1",
            "--K-schedule",
            "2,3,5",
            "--eta",
            "0.2",
            "--B",
            "8",
        ],
    );
    run_ok(&args, dir.path());
    let records = load_records(dir.path().join("records.csv")).unwrap();
    let budget: StepBudget = "2;3;5".parse().unwrap();
    for r in &records {
        assert_eq!(r.k, "2;3;5");
        assert!(r.converged, "{r:?}");
        // fresh batches opened until the step count was reached
        let (mut steps, mut batches) = (0u64, 0usize);
        while steps < r.steps_to_converge {
            steps += budget.k_at(batches) as u64;
            batches += 1;
        }
        assert_eq!(r.samples_consumed, 8 * batches as u64);
    }
}

#[test]
fn sweep_covers_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let args = quick("sweep", &["--B", "4,8", "--K", "1,2"]);
    run_ok(&args, dir.path());
    let records = load_records(dir.path().join("records.csv")).unwrap();
    assert_eq!(records.len(), 2 * 2 * 2);
    let cells = std::fs::read_to_string(dir.path().join("cells.csv")).unwrap();
    assert_eq!(cells.lines().count(), 1 + 4);
    let svgs = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "svg")
        })
        .count();
    assert_eq!(svgs, 2);
}

#[test]
fn verify_lists_every_oracle_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = bench(&["verify"], dir.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    for name in ["regret", "stability", "Chebyshev", "excess-risk", "echoing"] {
        assert!(stdout.contains(name), "missing {name} in {stdout}");
    }
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn datagen_writes_readable_problems() {
    let dir = tempfile::tempdir().unwrap();
    let o = bench(
        &[
            "datagen",
            "--kind",
            "quadratic",
            "--n",
            "3",
            "--count",
            "50",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let doc: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("synthetic-quadratic.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(doc["b"].as_array().unwrap().len(), 50);
    assert_eq!(doc["w_star"].as_array().unwrap().len(), 3);
    assert!(doc["f_star"].as_f64().unwrap() < 0.0);

    let o = bench(
        &["datagen", "--kind", "logistic", "--n", "4", "--count", "30"],
        dir.path(),
    );
    assert!(o.status.success());
    let d = load_libsvm(dir.path().join("synthetic-logistic.libsvm"), Some(4)).unwrap();
    assert_eq!((d.len(), d.n_features), (30, 5));
}
