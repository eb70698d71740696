//! `oodb-cluster-sim`: runs clustering experiments and writes plot-ready CSV.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;
use oodbsim::experiment::{group, parse_range, write_runs_csv, write_summary_csv};
use oodbsim::{aggregate, parse_config, run_experiment, ExperimentSpec, MetricsReport, PolicyKind, Simulation, SweepKind};

#[derive(Parser, Debug)]
#[command(name = "oodb-cluster-sim", version, about = "Compare Cactis, ORION and CK object clustering")]
struct Args {
    /// Config file of `KEY = value` lines.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Comma-separated policies (cactis, orion, ck).
    #[arg(long, value_name = "LIST", default_value = "cactis,orion,ck")]
    policy: String,

    /// Sweep kind, optionally with values: `db_size=100..1000:300`, `buffer`, `single`.
    #[arg(long, value_name = "KIND[=lo..hi:step]", default_value = "single")]
    sweep: String,

    /// Replications per point; overrides `replications`.
    #[arg(long, value_name = "N")]
    seeds: Option<u64>,

    /// Per-run CSV path; the summary goes next to it as `<stem>.summary.csv`.
    #[arg(long, value_name = "PATH", default_value = "results.csv")]
    out: PathBuf,

    /// Write the final object layout of each policy's first run as `<stem>.<policy>.layout`.
    #[arg(long)]
    dump_layout: bool,

    /// Config overrides applied after the file, e.g. `BUFSIZE=50 seed=7`.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn parse_policies(list: &str) -> Result<Vec<PolicyKind>> {
    let mut out = Vec::new();
    for tok in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let p: PolicyKind = tok.parse().map_err(anyhow::Error::msg)?;
        if !out.contains(&p) {
            out.push(p);
        }
    }
    if out.is_empty() {
        bail!("--policy needs at least one of cactis, orion, ck");
    }
    Ok(out)
}

fn build_spec(args: &Args) -> Result<ExperimentSpec> {
    let mut base = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_config(&text).with_context(|| path.display().to_string())?
        }
        None => Default::default(),
    };
    for kv in &args.overrides {
        let (k, v) = kv.split_once('=').with_context(|| format!("override {kv:?} is not KEY=VALUE"))?;
        base.set(k.trim(), v.trim()).map_err(|m| anyhow::anyhow!("override {kv:?}: {m}"))?;
    }
    if let Some(n) = args.seeds {
        if n == 0 {
            bail!("--seeds must be at least 1");
        }
        base.replications = n as usize;
    }
    base.validate()?;

    let (kind, range) = match args.sweep.split_once('=') {
        Some((k, r)) => (k, Some(r)),
        None => (args.sweep.as_str(), None),
    };
    let sweep: SweepKind = kind.trim().parse()?;
    let mut spec = ExperimentSpec::new(sweep, base);
    if let Some(r) = range {
        spec.values = parse_range(r)?;
    }
    spec.policies = parse_policies(&args.policy)?;
    spec.points()?;
    Ok(spec)
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "results".into());
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn dump_layouts(spec: &ExperimentSpec, out: &Path) -> Result<()> {
    for point in spec.points()?.into_iter().filter(|p| p.seed == spec.base.seed) {
        if point.value != spec.values[0] {
            continue;
        }
        let mut sim = Simulation::new(&point.config)?;
        sim.run()?;
        let path = sibling(out, &format!("{}.layout", point.policy.as_str()));
        let mut f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        sim.dump_layout(&mut f).with_context(|| format!("writing {}", path.display()))?;
        log::info!("layout written to {}", path.display());
    }
    Ok(())
}

fn print_summary(results: &[oodbsim::RunResult], param: &str) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "{:<7} {:>12} {:>14} {:>10} {:>10} {:>8} {:>8}", "policy", param, "response_ms", "txn_ios", "clust_ios", "pages", "tps")?;
    for (policy, value, reps) in group(results) {
        let owned: Vec<MetricsReport> = reps.into_iter().cloned().collect();
        let s = aggregate(&owned)?;
        writeln!(
            out,
            "{:<7} {:>12} {:>14.1} {:>10.0} {:>10.0} {:>8.1} {:>8.4}",
            policy.as_str(),
            value,
            s.mean_response_ms.mean,
            s.txn_ios.mean,
            s.clust_ios.mean,
            s.mean_pages_used.mean,
            s.throughput_tps.mean
        )?;
    }
    Ok(())
}

fn run(args: Args) -> Result<()> {
    let spec = build_spec(&args)?;
    log::info!(
        "{} sweep: {} values x {} policies x {} seeds",
        spec.sweep,
        spec.values.len(),
        spec.policies.len(),
        spec.seeds
    );
    let results = run_experiment(&spec)?;
    write_runs_csv(&args.out, &results)?;
    let summary = sibling(&args.out, "summary.csv");
    write_summary_csv(&summary, &results)?;
    log::info!("wrote {} and {}", args.out.display(), summary.display());
    if args.dump_layout {
        dump_layouts(&spec, &args.out)?;
    }
    print_summary(&results, spec.sweep.param())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
