//! Parameter sweeps over policies and seeds, and their CSV output.

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::config::{PolicyKind, SimConfig, FORMAT_TAG};
use crate::engine::run_simulation;
use crate::error::{Result, SimError};
use crate::metrics::{aggregate, MetricsReport, Stat};
use crate::workload::TransactionKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SweepKind {
    Single,
    DbSize,
    Buffer,
    RwRatio,
    QueryIsolation,
}

impl SweepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::Single => "single",
            SweepKind::DbSize => "db_size",
            SweepKind::Buffer => "buffer",
            SweepKind::RwRatio => "rw_ratio",
            SweepKind::QueryIsolation => "query_isolation",
        }
    }

    /// Name of the swept parameter in CSV output.
    pub fn param(self) -> &'static str {
        match self {
            SweepKind::Single => "none",
            SweepKind::DbSize => "NOBJ",
            SweepKind::Buffer => "BUFSIZE",
            SweepKind::RwRatio => "read_scale",
            SweepKind::QueryIsolation => "query",
        }
    }

    /// Values swept by default.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepKind::Single => vec![0.0],
            SweepKind::DbSize => vec![100.0, 400.0, 1000.0],
            SweepKind::Buffer => vec![10.0, 25.0, 50.0, 100.0],
            SweepKind::RwRatio => vec![1.0, 0.5, 0.25, 0.1],
            SweepKind::QueryIsolation => (1..=12).map(f64::from).collect(),
        }
    }

    /// Applies sweep value `v` to `config`.
    pub fn apply(self, config: &mut SimConfig, v: f64) -> Result<()> {
        let whole = |what: &str| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(SimError::InvalidConfig(format!("{what} sweep value {v} is not a positive integer")))
            }
        };
        match self {
            SweepKind::Single => {}
            SweepKind::DbSize => config.nobj = whole("NOBJ")?,
            SweepKind::Buffer => config.bufsize = whole("BUFSIZE")?,
            SweepKind::RwRatio => config.read_scale = v,
            SweepKind::QueryIsolation => {
                let q = whole("query")?;
                let kind = TransactionKind::query(q)
                    .ok_or_else(|| SimError::InvalidConfig(format!("no query Q{q}")))?;
                // the isolated query keeps the whole read share
                let total: f64 = config.pq.iter().sum();
                config.pq = [0.0; 12];
                config.pq[kind.index()] = total;
            }
        }
        config.validate()
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(SweepKind::Single),
            "db_size" => Ok(SweepKind::DbSize),
            "buffer" => Ok(SweepKind::Buffer),
            "rw_ratio" => Ok(SweepKind::RwRatio),
            "query_isolation" => Ok(SweepKind::QueryIsolation),
            other => Err(SimError::InvalidConfig(format!("unknown sweep kind {other:?}"))),
        }
    }
}

/// Parses `lo..hi:step` (or a single value) into the list of swept values.
pub fn parse_range(text: &str) -> Result<Vec<f64>> {
    let bad = || SimError::InvalidConfig(format!("bad sweep range {text:?}, expected lo..hi:step"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let Some((lo, rest)) = text.split_once("..") else {
        return Ok(vec![num(text)?]);
    };
    let (hi, step) = rest.split_once(':').ok_or_else(bad)?;
    let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
    if !(step > 0.0) || hi < lo {
        return Err(bad());
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + step * i as f64).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub sweep: SweepKind,
    pub values: Vec<f64>,
    pub policies: Vec<PolicyKind>,
    /// Replications per point; seeds are `base.seed`, `base.seed + 1`, ...
    pub seeds: u64,
    pub base: SimConfig,
}

impl ExperimentSpec {
    pub fn new(sweep: SweepKind, base: SimConfig) -> Self {
        ExperimentSpec {
            sweep,
            values: sweep.default_values(),
            policies: PolicyKind::ALL.to_vec(),
            seeds: base.replications.max(1) as u64,
            base,
        }
    }

    /// Every (policy, value, seed) run, in output order.
    pub fn points(&self) -> Result<Vec<RunPoint>> {
        let mut out = Vec::new();
        for &policy in &self.policies {
            for &value in &self.values {
                for i in 0..self.seeds {
                    let mut config = self.base.clone().with_policy(policy);
                    config.seed = self.base.seed + i;
                    self.sweep.apply(&mut config, value)?;
                    out.push(RunPoint { policy, sweep: self.sweep, value, seed: config.seed, config });
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunPoint {
    pub policy: PolicyKind,
    pub sweep: SweepKind,
    pub value: f64,
    pub seed: u64,
    pub config: SimConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub point: RunPoint,
    pub report: MetricsReport,
}

/// Runs every point, in parallel; results come back in point order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<RunResult>> {
    let points = spec.points()?;
    points
        .into_par_iter()
        .map(|point| {
            let report = run_simulation(&point.config)?;
            Ok(RunResult { point, report })
        })
        .collect()
}

/// Results grouped by (policy, value), in first-appearance order.
pub fn group(results: &[RunResult]) -> Vec<(PolicyKind, f64, Vec<&MetricsReport>)> {
    let mut out: Vec<(PolicyKind, f64, Vec<&MetricsReport>)> = Vec::new();
    for r in results {
        match out.iter_mut().find(|(p, v, _)| *p == r.point.policy && *v == r.point.value) {
            Some(g) => g.2.push(&r.report),
            None => out.push((r.point.policy, r.point.value, vec![&r.report])),
        }
    }
    out
}

fn open(path: &Path) -> Result<File> {
    let mut f = File::create(path).map_err(|source| SimError::Io { path: path.to_path_buf(), source })?;
    writeln!(f, "{FORMAT_TAG}").map_err(|source| SimError::Io { path: path.to_path_buf(), source })?;
    Ok(f)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// One row per run.
pub fn write_runs_csv(path: &Path, results: &[RunResult]) -> Result<()> {
    let csv_err = |source| SimError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_writer(open(path)?);
    let mut header: Vec<String> = [
        "policy",
        "sweep_param",
        "sweep_value",
        "seed",
        "mean_response_ms",
        "txn_ios",
        "clust_ios",
        "pages_used",
        "throughput_tps",
        "rw_ratio",
        "reorganizations",
        "objects",
    ]
    .map(String::from)
    .to_vec();
    header.extend(TransactionKind::ALL.iter().map(|k| format!("resp_{k}")));
    w.write_record(&header).map_err(csv_err)?;
    for r in results {
        let rep = &r.report;
        let mut row = vec![
            r.point.policy.to_string(),
            r.point.sweep.param().to_string(),
            r.point.value.to_string(),
            r.point.seed.to_string(),
            format!("{:.6}", rep.mean_response_ms),
            rep.txn_ios().to_string(),
            rep.clust_ios().to_string(),
            format!("{:.6}", rep.mean_pages_used),
            format!("{:.6}", rep.throughput_tps),
            format!("{:.6}", rep.read_write_ratio()),
            rep.reorganizations.to_string(),
            rep.objects.to_string(),
        ];
        row.extend(TransactionKind::ALL.iter().map(|k| fmt_opt(rep.kind(*k).mean_response_ms())));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| SimError::Io { path: path.to_path_buf(), source })
}

/// Mean and standard deviation per (policy, value).
pub fn write_summary_csv(path: &Path, results: &[RunResult]) -> Result<()> {
    let csv_err = |source| SimError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_writer(open(path)?);
    let metrics = ["mean_response_ms", "txn_ios", "clust_ios", "pages_used", "throughput_tps", "rw_ratio"];
    let mut header = vec!["policy".to_string(), "sweep_param".into(), "sweep_value".into(), "n".into()];
    for m in metrics {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_sd"));
    }
    w.write_record(&header).map_err(csv_err)?;
    let param = results.first().map(|r| r.point.sweep.param()).unwrap_or("none");
    for (policy, value, reports) in group(results) {
        let owned: Vec<MetricsReport> = reports.into_iter().cloned().collect();
        let s = aggregate(&owned)?;
        let stats: [Stat; 6] =
            [s.mean_response_ms, s.txn_ios, s.clust_ios, s.mean_pages_used, s.throughput_tps, s.read_write_ratio];
        let mut row = vec![policy.to_string(), param.to_string(), value.to_string(), owned.len().to_string()];
        for st in stats {
            row.push(format!("{:.6}", st.mean));
            row.push(format!("{:.6}", st.stddev));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| SimError::Io { path: path.to_path_buf(), source })
}
