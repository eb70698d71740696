use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_oodb-cluster-sim"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn data_rows(path: &Path) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# oodb-cluster-sim v1"));
    lines.skip(1).map(str::to_owned).collect()
}

#[test]
fn buffer_sweep_writes_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("buf.csv");
    let o = run(&[
        "--sweep",
        "buffer=10..30:10",
        "--policy",
        "ck,orion",
        "--seeds",
        "2",
        "--out",
        out.to_str().unwrap(),
        "horizon_transactions=50",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 2 * 3 * 2);
    assert!(rows[0].starts_with("ck,BUFSIZE,10,1,"));
    assert!(rows.last().unwrap().starts_with("orion,BUFSIZE,30,2,"));
    let summary = data_rows(&dir.path().join("buf.summary.csv"));
    assert_eq!(summary.len(), 2 * 3);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("policy"));
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = run(&["--out", p.to_str().unwrap(), "horizon_transactions=80", "NOBJ=150"]);
        assert!(o.status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.cfg");
    fs::write(&cfg, "# oodb-cluster-sim v1\nBUFSIZE = 50\nreplications = 4\nhorizon_transactions = 40\n").unwrap();
    let out = dir.path().join("r.csv");
    let o = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--policy",
        "cactis",
        "--seeds",
        "1",
        "--out",
        out.to_str().unwrap(),
        "NOBJ=120",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 1);
    let objects_col = {
        let text = fs::read_to_string(&out).unwrap();
        let header: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        header.iter().position(|h| *h == "objects").unwrap()
    };
    let objects: usize = rows[0].split(',').nth(objects_col).unwrap().parse().unwrap();
    assert!(objects >= 120);
}

#[test]
fn query_isolation_runs_each_query() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("q.csv");
    let o = run(&[
        "--sweep",
        "query_isolation",
        "--policy",
        "orion",
        "--out",
        out.to_str().unwrap(),
        "horizon_transactions=30",
        "NOBJ=100",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(data_rows(&out).len(), 12);
}

#[test]
fn dump_layout_lists_every_object() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("l.csv");
    let o = run(&["--policy", "ck", "--dump-layout", "--out", out.to_str().unwrap(), "horizon_transactions=20", "NOBJ=100"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let layout = fs::read_to_string(dir.path().join("l.ck.layout")).unwrap();
    assert!(layout.lines().count() >= 100);
    assert!(layout.lines().all(|l| l.split(' ').count() >= 3));
}

#[test]
fn bad_config_fails_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "BUFSIZE = 20\nPGSIZE = -1\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "--out", dir.path().join("x.csv").to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn bad_flags_fail() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let out = out.to_str().unwrap();
    for args in [
        vec!["--policy", "btree", "--out", out],
        vec!["--sweep", "heat", "--out", out],
        vec!["--sweep", "buffer=50..10:5", "--out", out],
        vec!["--seeds", "0", "--out", out],
        vec!["NOSUCHKEY=1", "--out", out],
        vec!["BUFSIZE", "--out", out],
    ] {
        let o = run(&args);
        assert!(!o.status.success(), "{args:?} should fail");
    }
    assert!(!Path::new(out).exists());
}
