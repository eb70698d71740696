//! Performance measures of a run and their aggregation over replications.

use crate::config::PolicyKind;
use crate::error::{Result, SimError};
use crate::storage::IoCounters;
use crate::workload::TransactionKind;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KindStats {
    pub count: u64,
    pub total_response_ms: f64,
    /// Transaction I/Os performed while serving transactions of this kind.
    pub txn_ios: u64,
    /// Distinct pages touched, summed over transactions.
    pub pages_touched: u64,
    pub objects_accessed: u64,
}

impl KindStats {
    pub fn mean_response_ms(&self) -> Option<f64> {
        (self.count > 0).then(|| self.total_response_ms / self.count as f64)
    }

    pub fn ios_per_txn(&self) -> Option<f64> {
        (self.count > 0).then(|| self.txn_ios as f64 / self.count as f64)
    }

    /// Transaction I/Os per distinct page touched.
    pub fn ios_per_page(&self) -> Option<f64> {
        (self.pages_touched > 0).then(|| self.txn_ios as f64 / self.pages_touched as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub policy: PolicyKind,
    pub seed: u64,
    pub completed: u64,
    pub sim_time_ms: f64,
    pub mean_response_ms: f64,
    pub per_kind: Vec<KindStats>,
    pub io: IoCounters,
    pub mean_pages_used: f64,
    pub final_pages_used: usize,
    pub throughput_tps: f64,
    pub reorganizations: u64,
    pub objects: usize,
}

impl MetricsReport {
    pub fn txn_ios(&self) -> u64 {
        self.io.txn()
    }

    pub fn clust_ios(&self) -> u64 {
        self.io.clust()
    }

    pub fn total_ios(&self) -> u64 {
        self.io.total()
    }

    pub fn kind(&self, kind: TransactionKind) -> &KindStats {
        &self.per_kind[kind.index()]
    }

    /// Completed queries per completed update (attribute updates and
    /// instance creations); infinite when no update ran.
    pub fn read_write_ratio(&self) -> f64 {
        let count = |f: fn(TransactionKind) -> bool| -> u64 {
            TransactionKind::ALL.iter().filter(|k| f(**k)).map(|k| self.kind(*k).count).sum()
        };
        let reads = count(TransactionKind::is_query);
        let writes = count(TransactionKind::is_update);
        if writes == 0 {
            f64::INFINITY
        } else {
            reads as f64 / writes as f64
        }
    }
}

/// Collects measures while a run progresses.
#[derive(Clone, Debug)]
pub struct Recorder {
    per_kind: Vec<KindStats>,
    completed: u64,
    total_response_ms: f64,
    pages_area: f64,
    last_time: f64,
    last_pages: usize,
    reorganizations: u64,
}

impl Recorder {
    pub fn new(initial_pages: usize) -> Self {
        Recorder {
            per_kind: vec![KindStats::default(); TransactionKind::COUNT],
            completed: 0,
            total_response_ms: 0.0,
            pages_area: 0.0,
            last_time: 0.0,
            last_pages: initial_pages,
            reorganizations: 0,
        }
    }

    pub fn completed(&self) -> u64 {
        self.completed
    }

    pub fn complete(&mut self, kind: TransactionKind, response_ms: f64, txn_ios: u64, pages: u64, objects: u64) {
        let s = &mut self.per_kind[kind.index()];
        s.count += 1;
        s.total_response_ms += response_ms;
        s.txn_ios += txn_ios;
        s.pages_touched += pages;
        s.objects_accessed += objects;
        self.completed += 1;
        self.total_response_ms += response_ms;
    }

    pub fn reorganized(&mut self) {
        self.reorganizations += 1;
    }

    /// Records that `pages` pages are in use from `now` on.
    pub fn sample_pages(&mut self, now: f64, pages: usize) {
        if now > self.last_time {
            self.pages_area += self.last_pages as f64 * (now - self.last_time);
            self.last_time = now;
        }
        self.last_pages = pages;
    }

    pub fn finish(mut self, policy: PolicyKind, seed: u64, now: f64, io: IoCounters, objects: usize) -> MetricsReport {
        let final_pages = self.last_pages;
        self.sample_pages(now, final_pages);
        let mean_pages_used = if now > 0.0 { self.pages_area / now } else { final_pages as f64 };
        MetricsReport {
            policy,
            seed,
            completed: self.completed,
            sim_time_ms: now,
            mean_response_ms: if self.completed > 0 { self.total_response_ms / self.completed as f64 } else { 0.0 },
            per_kind: self.per_kind,
            io,
            mean_pages_used,
            final_pages_used: final_pages,
            throughput_tps: if now > 0.0 { self.completed as f64 / (now / 1000.0) } else { 0.0 },
            reorganizations: self.reorganizations,
            objects,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub stddev: f64,
    pub n: usize,
}

/// Sample mean and (n−1)-denominator standard deviation.
pub fn stat(values: &[f64]) -> Result<Stat> {
    if values.is_empty() {
        return Err(SimError::EmptyAggregate);
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let stddev = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(Stat { mean, stddev, n })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub mean_response_ms: Stat,
    pub txn_ios: Stat,
    pub clust_ios: Stat,
    pub mean_pages_used: Stat,
    pub throughput_tps: Stat,
    pub read_write_ratio: Stat,
    /// Mean response per kind over the replications in which it ran.
    pub kind_response_ms: Vec<Option<Stat>>,
    pub kind_ios_per_txn: Vec<Option<Stat>>,
    pub kind_ios_per_page: Vec<Option<Stat>>,
}

pub fn aggregate(reports: &[MetricsReport]) -> Result<Summary> {
    let over = |f: &dyn Fn(&MetricsReport) -> f64| -> Result<Stat> {
        stat(&reports.iter().map(f).collect::<Vec<_>>())
    };
    let per_kind = |f: &dyn Fn(&KindStats) -> Option<f64>| -> Vec<Option<Stat>> {
        TransactionKind::ALL
            .iter()
            .map(|k| {
                let vals: Vec<f64> = reports.iter().filter_map(|r| f(r.kind(*k))).collect();
                stat(&vals).ok()
            })
            .collect()
    };
    Ok(Summary {
        mean_response_ms: over(&|r| r.mean_response_ms)?,
        txn_ios: over(&|r| r.txn_ios() as f64)?,
        clust_ios: over(&|r| r.clust_ios() as f64)?,
        mean_pages_used: over(&|r| r.mean_pages_used)?,
        throughput_tps: over(&|r| r.throughput_tps)?,
        read_write_ratio: over(&|r| r.read_write_ratio())?,
        kind_response_ms: per_kind(&KindStats::mean_response_ms),
        kind_ios_per_txn: per_kind(&KindStats::ios_per_txn),
        kind_ios_per_page: per_kind(&KindStats::ios_per_page),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stat_of_two() {
        let s = stat(&[2.0, 4.0]).unwrap();
        assert_eq!(s.mean, 3.0);
        assert!((s.stddev - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn stat_of_identical() {
        assert_eq!(stat(&[5.0; 4]).unwrap().stddev, 0.0);
        assert!(matches!(stat(&[]), Err(SimError::EmptyAggregate)));
        assert!(matches!(aggregate(&[]), Err(SimError::EmptyAggregate)));
    }

    #[test]
    fn recorder_arithmetic() {
        let mut r = Recorder::new(4);
        r.complete(TransactionKind::NameLookup, 3.0, 1, 1, 1);
        r.complete(TransactionKind::NameLookup, 5.0, 0, 1, 1);
        r.sample_pages(6000.0, 8);
        r.complete(TransactionKind::SequentialScan, 7.0, 4, 2, 9);
        let report = r.finish(PolicyKind::Ck, 1, 12_000.0, IoCounters::default(), 10);
        assert_eq!(report.mean_response_ms, 5.0);
        assert!((report.throughput_tps - 0.25).abs() < 1e-12);
        assert_eq!(report.mean_pages_used, 6.0);
        assert_eq!(report.kind(TransactionKind::NameLookup).mean_response_ms(), Some(4.0));
        assert_eq!(report.kind(TransactionKind::SequentialScan).ios_per_page(), Some(2.0));
        assert_eq!(report.read_write_ratio(), f64::INFINITY);
    }

    #[test]
    fn kind_means_reproduce_overall() {
        let mut r = Recorder::new(0);
        for (i, k) in TransactionKind::ALL.iter().enumerate() {
            for j in 0..=i {
                r.complete(*k, (i * 10 + j) as f64, 0, 0, 0);
            }
        }
        let report = r.finish(PolicyKind::Cactis, 0, 1.0, IoCounters::default(), 0);
        let weighted: f64 = report.per_kind.iter().map(|s| s.mean_response_ms().unwrap() * s.count as f64).sum();
        assert!((weighted / report.completed as f64 - report.mean_response_ms).abs() < 1e-9);
    }
}
