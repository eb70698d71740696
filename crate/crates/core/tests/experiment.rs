use oodbsim::experiment::{write_runs_csv, write_summary_csv};
use oodbsim::{run_experiment, ExperimentSpec, SimConfig, SweepKind, FORMAT_TAG};

fn quick(sweep: SweepKind, seeds: u64) -> ExperimentSpec {
    let mut base = SimConfig::default();
    base.horizon_transactions = 30;
    let mut spec = ExperimentSpec::new(sweep, base);
    spec.seeds = seeds;
    spec
}

#[test]
fn db_size_sweep_gives_45_rows() {
    let spec = quick(SweepKind::DbSize, 5);
    let results = run_experiment(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs.csv");
    let summary = dir.path().join("summary.csv");
    write_runs_csv(&runs, &results).unwrap();
    write_summary_csv(&summary, &results).unwrap();

    let text = std::fs::read_to_string(&runs).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(FORMAT_TAG));
    let header = lines.next().unwrap();
    assert!(header.starts_with(
        "policy,sweep_param,sweep_value,seed,mean_response_ms,txn_ios,clust_ios,pages_used,throughput_tps"
    ));
    assert_eq!(lines.count(), 45);
    assert_eq!(std::fs::read_to_string(&summary).unwrap().lines().count(), 2 + 9);
}

#[test]
fn csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let paths = [dir.path().join("a.csv"), dir.path().join("b.csv")];
    for p in &paths {
        write_runs_csv(p, &run_experiment(&quick(SweepKind::Buffer, 2)).unwrap()).unwrap();
    }
    assert_eq!(std::fs::read(&paths[0]).unwrap(), std::fs::read(&paths[1]).unwrap());
}

#[test]
fn query_isolation_uses_one_query_per_run() {
    let spec = quick(SweepKind::QueryIsolation, 1);
    let points = spec.points().unwrap();
    assert_eq!(points.len(), 12 * 3);
    for p in &points {
        let nonzero = p.config.pq.iter().filter(|w| **w > 0.0).count();
        assert_eq!(nonzero, 1);
        assert!(p.config.pq[p.value as usize - 1] > 0.0);
    }
}

#[test]
fn write_to_missing_directory_names_path() {
    let results = run_experiment(&quick(SweepKind::Single, 1)).unwrap();
    let err = write_runs_csv(std::path::Path::new("/nonexistent/dir/r.csv"), &results).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/dir/r.csv"));
}
