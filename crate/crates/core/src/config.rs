//! Simulation parameters and the line-oriented `KEY = value` config format.
//!
//! Keys for the static and dynamic model parameters use their upper-case
//! symbols (`PGSIZE`, `BUFSIZE`, `PQ7`, ...). Simulator plumbing uses
//! lower-case keys (`seed`, `policy`, `ck.lookup_cost`, ...). Every key is
//! optional; omitted keys keep their defaults.

use std::fmt;
use std::str::FromStr;

use crate::error::{Result, SimError};
use crate::model::ClassId;

/// Leading comment line of every config and CSV file this tool writes.
pub const FORMAT_TAG: &str = "# oodb-cluster-sim v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    Cactis,
    Orion,
    Ck,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Cactis, PolicyKind::Orion, PolicyKind::Ck];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Cactis => "cactis",
            PolicyKind::Orion => "orion",
            PolicyKind::Ck => "ck",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cactis" => Ok(PolicyKind::Cactis),
            "orion" => Ok(PolicyKind::Orion),
            "ck" => Ok(PolicyKind::Ck),
            other => Err(format!("unknown policy `{other}` (expected cactis, orion or ck)")),
        }
    }
}

/// Whether CK may split a full candidate page.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitPolicy {
    NoSplit,
    PageSplit,
}

impl FromStr for SplitPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "no_split" => Ok(SplitPolicy::NoSplit),
            "page_split" => Ok(SplitPolicy::PageSplit),
            other => Err(format!("unknown cluster policy `{other}` (expected no_split or page_split)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CkParams {
    pub lookup_cost: f64,
    /// Cost per cached byte; `None` means one lookup per full page (1 / PGSIZE).
    pub storage_cost: Option<f64>,
    pub prob_version: f64,
    pub prob_configuration: f64,
    pub prob_equivalence: f64,
    pub cluster_policy: SplitPolicy,
}

impl Default for CkParams {
    fn default() -> Self {
        CkParams {
            lookup_cost: 1.0,
            storage_cost: None,
            prob_version: 0.4,
            prob_configuration: 0.4,
            prob_equivalence: 0.2,
            cluster_policy: SplitPolicy::NoSplit,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OrionParams {
    /// Class lists that share one segment each.
    pub cluster_messages: Vec<Vec<ClassId>>,
    /// When false, a CLUST transaction only migrates classes named in
    /// cluster messages instead of repacking every segment.
    pub messages_only: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    // Static parameters.
    pub multi: usize,
    pub wdsize: u32,
    pub pgsize: u32,
    /// Mean time between two transaction arrivals, in seconds.
    pub minter_s: f64,
    pub cct_ms: f64,
    pub accm_ms: f64,
    pub test_ms: f64,
    pub seek_ms: f64,
    pub latency_ms: f64,
    pub transfer_ms: f64,

    // Dynamic parameters.
    pub ncl: usize,
    pub nobj: usize,
    pub mnver: u32,
    pub mnattr: u32,
    pub msattr: u32,
    pub bufsize: usize,
    pub maxdepth: u32,
    pub psuper: f64,
    pub pcomp: f64,
    pub pequi: f64,
    pub pq: [f64; 12],
    pub pu1: f64,
    pub pu2: f64,
    /// `None` takes the per-policy default, see [`SimConfig::effective_pclust`].
    pub pclust: Option<f64>,

    // Simulator plumbing.
    pub seed: u64,
    pub horizon_transactions: usize,
    pub replications: usize,
    pub policy: PolicyKind,
    pub p_copy: f64,
    pub range_sel: f64,
    pub objhdr_words: u32,
    /// Multiplier applied to all twelve query weights before normalization.
    pub read_scale: f64,
    pub ck: CkParams,
    pub orion: OrionParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            multi: 10,
            wdsize: 4,
            pgsize: 2048,
            minter_s: 4.0,
            cct_ms: 0.5,
            accm_ms: 0.0001,
            test_ms: 0.0007,
            seek_ms: 28.0,
            latency_ms: 8.33,
            transfer_ms: 1.28,

            ncl: 20,
            nobj: 400,
            mnver: 3,
            mnattr: 10,
            msattr: 1,
            bufsize: 10,
            maxdepth: 5,
            psuper: 0.9,
            pcomp: 0.5,
            pequi: 0.1,
            pq: [0.065; 12],
            pu1: 0.065,
            pu2: 0.05,
            pclust: None,

            seed: 1,
            horizon_transactions: 2500,
            replications: 1,
            policy: PolicyKind::Cactis,
            p_copy: 0.5,
            range_sel: 0.1,
            objhdr_words: 2,
            read_scale: 1.0,
            ck: CkParams::default(),
            orion: OrionParams::default(),
        }
    }
}

impl SimConfig {
    pub fn with_policy(mut self, policy: PolicyKind) -> Self {
        self.policy = policy;
        self
    }

    /// Reclustering weight: explicit `PCLUST`, else 0.02 for the
    /// reorganizing policies and 0 for CK, which clusters at creation time.
    pub fn effective_pclust(&self) -> f64 {
        match (self.pclust, self.policy) {
            (Some(p), _) => p,
            (None, PolicyKind::Ck) => 0.0,
            (None, _) => 0.02,
        }
    }

    pub fn storage_cost(&self) -> f64 {
        self.ck.storage_cost.unwrap_or(1.0 / f64::from(self.pgsize))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.multi == 0 {
            return bad("MULTI must be at least 1".into());
        }
        if self.wdsize == 0 || self.pgsize == 0 {
            return bad("WDSIZE and PGSIZE must be positive".into());
        }
        for (name, v) in [
            ("MINTER", self.minter_s),
            ("CCT", self.cct_ms),
            ("ACCM", self.accm_ms),
            ("TEST", self.test_ms),
            ("SEEK", self.seek_ms),
            ("LATENCY", self.latency_ms),
            ("TRANSFER", self.transfer_ms),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be a non-negative time"));
            }
        }
        if self.minter_s <= 0.0 {
            return bad("MINTER must be positive".into());
        }
        if self.ncl == 0 {
            return bad("NCL must be at least 1".into());
        }
        if self.nobj == 0 {
            return bad("NOBJ must be at least 1".into());
        }
        if self.mnver == 0 || self.mnattr == 0 || self.msattr == 0 {
            return bad("MNVER, MNATTR and MSATTR must be at least 1".into());
        }
        if self.bufsize == 0 {
            return bad("BUFSIZE must be at least 1".into());
        }
        if self.maxdepth == 0 {
            return bad("MAXDEPTH must be at least 1".into());
        }
        let mut probs: Vec<(String, f64)> = vec![
            ("PSUPER".into(), self.psuper),
            ("PCOMP".into(), self.pcomp),
            ("PEQUI".into(), self.pequi),
            ("PU1".into(), self.pu1),
            ("PU2".into(), self.pu2),
            ("PCLUST".into(), self.effective_pclust()),
            ("p_copy".into(), self.p_copy),
        ];
        probs.extend(self.pq.iter().enumerate().map(|(i, &p)| (format!("PQ{}", i + 1), p)));
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.range_sel > 0.0 && self.range_sel <= 1.0) {
            return bad("RANGE_SEL must lie in (0, 1]".into());
        }
        if !(self.read_scale.is_finite() && self.read_scale >= 0.0) {
            return bad("read_scale must be non-negative".into());
        }
        for (name, p) in [
            ("ck.prob_version", self.ck.prob_version),
            ("ck.prob_configuration", self.ck.prob_configuration),
            ("ck.prob_equivalence", self.ck.prob_equivalence),
        ] {
            if !(p > 0.0 && p <= 1.0) {
                return bad(format!("{name} must lie in (0, 1]"));
            }
        }
        if !(self.ck.lookup_cost >= 0.0) || !(self.storage_cost() >= 0.0) {
            return bad("CK costs must be non-negative".into());
        }
        let weights = self.pq.iter().sum::<f64>() * self.read_scale
            + self.pu1
            + self.pu2
            + self.effective_pclust();
        if weights <= 0.0 {
            return bad("all transaction weights are zero".into());
        }
        for list in &self.orion.cluster_messages {
            if let Some(c) = list.iter().find(|c| c.index() >= self.ncl) {
                return bad(format!("orion.cluster_messages names unknown class {c}"));
            }
        }
        Ok(())
    }

    /// Applies one `key = value` setting. Used by the file parser and by
    /// command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let value = value.trim();
        match key.trim() {
            "MULTI" => self.multi = parse_count(value)?,
            "WDSIZE" => self.wdsize = parse_positive(value)?,
            "PGSIZE" => self.pgsize = parse_positive(value)?,
            "MINTER" => self.minter_s = parse_time(value)?,
            "CCT" => self.cct_ms = parse_time(value)?,
            "ACCM" => self.accm_ms = parse_time(value)?,
            "TEST" => self.test_ms = parse_time(value)?,
            "SEEK" => self.seek_ms = parse_time(value)?,
            "LATENCY" => self.latency_ms = parse_time(value)?,
            "TRANSFER" => self.transfer_ms = parse_time(value)?,
            "NCL" => self.ncl = parse_count(value)?,
            "NOBJ" => self.nobj = parse_count(value)?,
            "MNVER" => self.mnver = parse_positive(value)?,
            "MNATTR" => self.mnattr = parse_positive(value)?,
            "MSATTR" => self.msattr = parse_positive(value)?,
            "BUFSIZE" => self.bufsize = parse_count(value)?,
            "MAXDEPTH" => self.maxdepth = parse_positive(value)?,
            "PSUPER" => self.psuper = parse_prob(value)?,
            "PCOMP" => self.pcomp = parse_prob(value)?,
            "PEQUI" => self.pequi = parse_prob(value)?,
            "PU1" => self.pu1 = parse_prob(value)?,
            "PU2" => self.pu2 = parse_prob(value)?,
            "PCLUST" => self.pclust = Some(parse_prob(value)?),
            "seed" => self.seed = value.parse().map_err(|_| format!("bad seed `{value}`"))?,
            "horizon_transactions" => {
                self.horizon_transactions =
                    value.parse().map_err(|_| format!("bad horizon `{value}`"))?
            }
            "replications" => self.replications = parse_count(value)?,
            "policy" => self.policy = value.parse()?,
            "p_copy" => self.p_copy = parse_prob(value)?,
            "RANGE_SEL" => {
                let v = parse_prob(value)?;
                if v == 0.0 {
                    return Err("RANGE_SEL must be positive".into());
                }
                self.range_sel = v
            }
            "OBJHDR_WORDS" => {
                self.objhdr_words = value.parse().map_err(|_| format!("bad word count `{value}`"))?
            }
            "read_scale" => self.read_scale = parse_time(value)?,
            "ck.lookup_cost" => self.ck.lookup_cost = parse_time(value)?,
            "ck.storage_cost" => self.ck.storage_cost = Some(parse_time(value)?),
            "ck.prob_version" => self.ck.prob_version = parse_open_prob(value)?,
            "ck.prob_configuration" => self.ck.prob_configuration = parse_open_prob(value)?,
            "ck.prob_equivalence" => self.ck.prob_equivalence = parse_open_prob(value)?,
            "ck.cluster_policy" => self.ck.cluster_policy = value.parse()?,
            "orion.cluster_messages" => self.orion.cluster_messages = parse_class_lists(value)?,
            "orion.messages_only" => {
                self.orion.messages_only =
                    value.parse().map_err(|_| format!("expected true or false, got `{value}`"))?
            }
            k => {
                if let Some(n) = k.strip_prefix("PQ") {
                    match n.parse::<usize>() {
                        Ok(i @ 1..=12) => {
                            self.pq[i - 1] = parse_prob(value)?;
                            return Ok(());
                        }
                        _ => {}
                    }
                }
                return Err(format!("unknown key `{k}`"));
            }
        }
        Ok(())
    }
}

fn parse_f64(value: &str) -> std::result::Result<f64, String> {
    let v: f64 = value.parse().map_err(|_| format!("expected a number, got `{value}`"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("expected a finite number, got `{value}`"))
    }
}

fn parse_time(value: &str) -> std::result::Result<f64, String> {
    let v = parse_f64(value)?;
    if v < 0.0 {
        return Err(format!("value must be non-negative, got {v}"));
    }
    Ok(v)
}

fn parse_prob(value: &str) -> std::result::Result<f64, String> {
    let v = parse_f64(value)?;
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("probability must lie in [0, 1], got {v}"));
    }
    Ok(v)
}

fn parse_open_prob(value: &str) -> std::result::Result<f64, String> {
    let v = parse_prob(value)?;
    if v == 0.0 {
        return Err("access probability must be positive".into());
    }
    Ok(v)
}

fn parse_positive(value: &str) -> std::result::Result<u32, String> {
    match value.parse::<i64>() {
        Ok(v) if v >= 1 && v <= i64::from(u32::MAX) => Ok(v as u32),
        Ok(v) => Err(format!("value must be a positive integer, got {v}")),
        Err(_) => Err(format!("expected an integer, got `{value}`")),
    }
}

fn parse_count(value: &str) -> std::result::Result<usize, String> {
    parse_positive(value).map(|v| v as usize)
}

/// `C1 C2; C5,C6` or `1 2; 5 6` (class numbers are 1-based).
fn parse_class_lists(value: &str) -> std::result::Result<Vec<Vec<ClassId>>, String> {
    value
        .split(';')
        .map(str::trim)
        .filter(|group| !group.is_empty())
        .map(|group| {
            group
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|tok| !tok.is_empty())
                .map(|tok| tok.parse::<ClassId>())
                .collect()
        })
        .collect()
}

/// Parses a config file. Blank lines and `#` comments are ignored.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    let mut config = SimConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| SimError::Parse {
            line: line_no,
            message: format!("expected `KEY = value`, got `{line}`"),
        })?;
        config
            .set(key, value)
            .map_err(|message| SimError::Parse { line: line_no, message })?;
    }
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, SimConfig::default());
        assert_eq!(c.pgsize, 2048);
        assert_eq!(c.bufsize, 10);
        assert_eq!(c.nobj, 400);
        assert_eq!(c.multi, 10);
        assert_eq!(c.seek_ms, 28.0);
    }

    #[test]
    fn single_override() {
        let c = parse_config("# oodb-cluster-sim v1\nBUFSIZE = 50\n").unwrap();
        let mut expected = SimConfig::default();
        expected.bufsize = 50;
        assert_eq!(c, expected);
    }

    #[test]
    fn negative_page_size_names_line() {
        let err = parse_config("NCL = 4\nPGSIZE = -1\n").unwrap_err();
        match err {
            SimError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn unknown_key_and_malformed_line() {
        assert!(matches!(parse_config("FOO = 1"), Err(SimError::Parse { line: 1, .. })));
        assert!(matches!(parse_config("\nBUFSIZE 10"), Err(SimError::Parse { line: 2, .. })));
        assert!(matches!(parse_config("PQ13 = 0.1"), Err(SimError::Parse { .. })));
        assert!(matches!(parse_config("PSUPER = 1.5"), Err(SimError::Parse { .. })));
    }

    #[test]
    fn query_weights_and_namespaces() {
        let c = parse_config(
            "PQ3 = 0.2\npolicy = ck\nck.cluster_policy = page_split\norion.cluster_messages = C1 C2; 4,5\n",
        )
        .unwrap();
        assert_eq!(c.pq[2], 0.2);
        assert_eq!(c.policy, PolicyKind::Ck);
        assert_eq!(c.ck.cluster_policy, SplitPolicy::PageSplit);
        assert_eq!(
            c.orion.cluster_messages,
            vec![vec![ClassId(0), ClassId(1)], vec![ClassId(3), ClassId(4)]]
        );
    }

    #[test]
    fn pclust_defaults_depend_on_policy() {
        let c = SimConfig::default();
        assert_eq!(c.clone().with_policy(PolicyKind::Ck).effective_pclust(), 0.0);
        assert!(c.clone().with_policy(PolicyKind::Cactis).effective_pclust() > 0.0);
        let mut explicit = c.with_policy(PolicyKind::Ck);
        explicit.pclust = Some(0.3);
        assert_eq!(explicit.effective_pclust(), 0.3);
    }

    #[test]
    fn all_zero_weights_rejected() {
        let mut c = SimConfig::default().with_policy(PolicyKind::Ck);
        c.pq = [0.0; 12];
        c.pu1 = 0.0;
        c.pu2 = 0.0;
        assert!(matches!(c.validate(), Err(SimError::InvalidConfig(_))));
    }

    #[test]
    fn class_list_rejects_unknown_class() {
        assert!(parse_config("NCL = 3\norion.cluster_messages = C1 C9").is_err());
    }
}
