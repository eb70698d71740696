//! Transaction generation and resolution of a transaction into the ordered
//! list of object accesses it performs.

use std::collections::HashSet;
use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::config::SimConfig;
use crate::error::{Result, SimError};
use crate::model::{ClassId, Direction, ObjectGraph, Oid, RelKind};

/// Number of distinct attribute values; attributes are drawn from `[0, 99]`.
pub const VALUE_DOMAIN: u32 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TransactionKind {
    NameLookup,
    RangeLookup,
    GroupLookupVersion,
    GroupLookupConfiguration,
    GroupLookupEquivalence,
    ReferenceLookupVersion,
    ReferenceLookupConfiguration,
    SequentialScan,
    ClosureVersion,
    ClosureConfiguration,
    ClosureEquivalence,
    ClosureRandom,
    AttributeUpdate,
    InstanceCreation,
    Recluster,
}

impl TransactionKind {
    pub const COUNT: usize = 15;

    pub const ALL: [TransactionKind; 15] = [
        TransactionKind::NameLookup,
        TransactionKind::RangeLookup,
        TransactionKind::GroupLookupVersion,
        TransactionKind::GroupLookupConfiguration,
        TransactionKind::GroupLookupEquivalence,
        TransactionKind::ReferenceLookupVersion,
        TransactionKind::ReferenceLookupConfiguration,
        TransactionKind::SequentialScan,
        TransactionKind::ClosureVersion,
        TransactionKind::ClosureConfiguration,
        TransactionKind::ClosureEquivalence,
        TransactionKind::ClosureRandom,
        TransactionKind::AttributeUpdate,
        TransactionKind::InstanceCreation,
        TransactionKind::Recluster,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// `Q1` .. `Q12`, `U1`, `U2`, `CLUST`.
    pub fn code(self) -> &'static str {
        const CODES: [&str; 15] = [
            "Q1", "Q2", "Q3", "Q4", "Q5", "Q6", "Q7", "Q8", "Q9", "Q10", "Q11", "Q12", "U1", "U2", "CLUST",
        ];
        CODES[self.index()]
    }

    /// The query with 1-based number `n` (Q1..Q12).
    pub fn query(n: usize) -> Option<TransactionKind> {
        (1..=12).contains(&n).then(|| Self::ALL[n - 1])
    }

    pub fn is_query(self) -> bool {
        self.index() < 12
    }

    pub fn is_update(self) -> bool {
        matches!(self, TransactionKind::AttributeUpdate | TransactionKind::InstanceCreation)
    }

    fn weight(self, config: &SimConfig) -> f64 {
        match self {
            TransactionKind::AttributeUpdate => config.pu1,
            TransactionKind::InstanceCreation => config.pu2,
            TransactionKind::Recluster => config.effective_pclust(),
            q => config.pq[q.index()] * config.read_scale,
        }
    }
}

impl fmt::Display for TransactionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TxnParams {
    None,
    Start(Oid),
    Class(ClassId),
    /// Instances of `class` whose first attribute lies in `[lo, hi]`.
    Range { class: ClassId, lo: u32, hi: u32 },
    Closure { start: Oid, depth: u32 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transaction {
    pub id: u64,
    pub kind: TransactionKind,
    pub params: TxnParams,
    pub t_submit: f64,
    pub t_complete: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AccessMode {
    Read,
    Write,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Crossing {
    pub from: Oid,
    pub to: Oid,
    pub kind: RelKind,
    pub direction: Direction,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AccessPlan {
    pub entries: Vec<(Oid, AccessMode)>,
    pub crossings: Vec<Crossing>,
}

impl AccessPlan {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn read(&mut self, oid: Oid) {
        self.entries.push((oid, AccessMode::Read));
    }

    fn cross(&mut self, from: Oid, to: Oid, kind: RelKind, direction: Direction) {
        self.crossings.push(Crossing { from, to, kind, direction });
        self.read(to);
    }
}

/// Draws transaction kinds in proportion to their configured weights.
#[derive(Clone, Debug)]
pub struct TransactionMix {
    dist: WeightedIndex<f64>,
}

impl TransactionMix {
    pub fn new(config: &SimConfig) -> Result<Self> {
        let weights: Vec<f64> = TransactionKind::ALL.iter().map(|k| k.weight(config)).collect();
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
            return Err(SimError::InvalidConfig("transaction weights must be non-negative with a positive sum".into()));
        }
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| SimError::InvalidConfig(format!("transaction weights: {e}")))?;
        Ok(TransactionMix { dist })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TransactionKind {
        TransactionKind::ALL[self.dist.sample(rng)]
    }
}

/// Normalized probability of each kind under `config`.
pub fn kind_probabilities(config: &SimConfig) -> [f64; TransactionKind::COUNT] {
    let mut out = [0.0; TransactionKind::COUNT];
    let total: f64 = TransactionKind::ALL.iter().map(|k| k.weight(config)).sum();
    for k in TransactionKind::ALL {
        out[k.index()] = if total > 0.0 { k.weight(config) / total } else { 0.0 };
    }
    out
}

/// Draws parameters for a transaction of `kind` against the current graph.
pub fn draw_params<R: Rng + ?Sized>(
    kind: TransactionKind,
    graph: &ObjectGraph,
    config: &SimConfig,
    rng: &mut R,
) -> TxnParams {
    let random_object = |rng: &mut R| Oid(rng.random_range(0..graph.len() as u32));
    let random_class = |rng: &mut R| ClassId(rng.random_range(0..graph.classes.len() as u32));
    use TransactionKind::*;
    match kind {
        RangeLookup => {
            let width = ((config.range_sel * f64::from(VALUE_DOMAIN)).round() as u32).clamp(1, VALUE_DOMAIN);
            let class = random_class(rng);
            let lo = rng.random_range(0..=VALUE_DOMAIN - width);
            TxnParams::Range { class, lo, hi: lo + width - 1 }
        }
        SequentialScan | InstanceCreation => TxnParams::Class(random_class(rng)),
        ClosureVersion | ClosureConfiguration | ClosureEquivalence | ClosureRandom => {
            let start = random_object(rng);
            TxnParams::Closure { start, depth: rng.random_range(1..=config.maxdepth) }
        }
        Recluster => TxnParams::None,
        _ => TxnParams::Start(random_object(rng)),
    }
}

/// Draws one transaction: kind by weight, then its parameters.
pub fn draw_transaction<R: Rng + ?Sized>(
    mix: &TransactionMix,
    graph: &ObjectGraph,
    config: &SimConfig,
    rng: &mut R,
) -> (TransactionKind, TxnParams) {
    let kind = mix.sample(rng);
    (kind, draw_params(kind, graph, config, rng))
}

fn neighbours(graph: &ObjectGraph, oid: Oid, kind: RelKind, direction: Option<Direction>) -> Vec<(Oid, Direction)> {
    graph
        .object(oid)
        .edges
        .iter()
        .filter(|e| e.kind == kind && direction.is_none_or(|d| d == e.direction))
        .map(|e| (e.target, e.direction))
        .collect()
}

/// Start plus everything reachable along `direction` edges of `kind`.
fn closure(graph: &ObjectGraph, plan: &mut AccessPlan, start: Oid, kind: RelKind, direction: Direction) {
    plan.read(start);
    let mut seen = HashSet::from([start]);
    let mut frontier = vec![start];
    let mut head = 0;
    while head < frontier.len() {
        let cur = frontier[head];
        head += 1;
        for (next, dir) in neighbours(graph, cur, kind, Some(direction)) {
            if seen.insert(next) {
                plan.cross(cur, next, kind, dir);
                frontier.push(next);
            }
        }
    }
}

/// Resolves `params` into the access plan of `kind` and records the usage
/// statistics: one access per plan entry and one crossing per traversed edge.
pub fn resolve_targets<R: Rng + ?Sized>(
    kind: TransactionKind,
    params: TxnParams,
    graph: &mut ObjectGraph,
    rng: &mut R,
) -> Result<AccessPlan> {
    let plan = build_plan(kind, params, graph, rng)?;
    for &(oid, _) in &plan.entries {
        graph.record_access(oid);
    }
    for c in &plan.crossings {
        graph.record_crossing(c.from, c.to, c.kind, c.direction);
    }
    Ok(plan)
}

fn build_plan<R: Rng + ?Sized>(
    kind: TransactionKind,
    params: TxnParams,
    graph: &ObjectGraph,
    rng: &mut R,
) -> Result<AccessPlan> {
    use TransactionKind::*;
    let mut plan = AccessPlan::default();
    let check = |oid: Oid| {
        if graph.contains(oid) {
            Ok(oid)
        } else {
            Err(SimError::InvalidConfig(format!("transaction names unknown object {oid}")))
        }
    };
    let start = match params {
        TxnParams::Start(o) | TxnParams::Closure { start: o, .. } => Some(check(o)?),
        _ => None,
    };
    match (kind, params) {
        (NameLookup, _) => plan.read(start.expect("start object")),
        (RangeLookup, TxnParams::Range { class, lo, hi }) => {
            for &oid in graph.extent(class) {
                let value = graph.object(oid).attrs.first().map(|a| a.value);
                if value.is_some_and(|v| (lo..=hi).contains(&v)) {
                    plan.read(oid);
                }
            }
        }
        (GroupLookupVersion, _) => closure(graph, &mut plan, start.unwrap(), RelKind::Version, Direction::Forward),
        (GroupLookupConfiguration, _) => {
            closure(graph, &mut plan, start.unwrap(), RelKind::Configuration, Direction::Forward)
        }
        (GroupLookupEquivalence, _) => {
            let s = start.unwrap();
            plan.read(s);
            let mut seen = HashSet::from([s]);
            for (next, dir) in neighbours(graph, s, RelKind::Equivalence, None) {
                if seen.insert(next) {
                    plan.cross(s, next, RelKind::Equivalence, dir);
                }
            }
        }
        (ReferenceLookupVersion, _) => closure(graph, &mut plan, start.unwrap(), RelKind::Version, Direction::Reverse),
        (ReferenceLookupConfiguration, _) => {
            let s = start.unwrap();
            plan.read(s);
            if let Some((composite, dir)) = neighbours(graph, s, RelKind::Configuration, Some(Direction::Reverse)).first() {
                plan.cross(s, *composite, RelKind::Configuration, *dir);
            }
        }
        (SequentialScan, TxnParams::Class(class)) => {
            for &oid in graph.extent(class) {
                plan.read(oid);
            }
        }
        (ClosureVersion | ClosureConfiguration | ClosureEquivalence | ClosureRandom, TxnParams::Closure { depth, .. }) => {
            let mut cur = start.unwrap();
            plan.read(cur);
            for _ in 0..depth {
                let rel = match kind {
                    ClosureVersion => RelKind::Version,
                    ClosureConfiguration => RelKind::Configuration,
                    ClosureEquivalence => RelKind::Equivalence,
                    _ => RelKind::ALL[rng.random_range(0..3)],
                };
                let direction = match rel {
                    RelKind::Equivalence => None,
                    _ => Some(Direction::Forward),
                };
                let options = neighbours(graph, cur, rel, direction);
                if options.is_empty() {
                    break;
                }
                let (next, dir) = options[rng.random_range(0..options.len())];
                plan.cross(cur, next, rel, dir);
                cur = next;
            }
        }
        (AttributeUpdate, _) => plan.entries.push((start.unwrap(), AccessMode::Write)),
        (InstanceCreation | Recluster, _) => {}
        (k, p) => {
            return Err(SimError::InvalidConfig(format!("parameters {p:?} do not fit transaction {k}")));
        }
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PolicyKind;
    use crate::model::{generate_schema, EdgeProbs};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// One class, no class links, objects added by hand.
    fn bare_graph(n: usize) -> ObjectGraph {
        let config = SimConfig { ncl: 1, psuper: 0.0, pcomp: 0.0, pequi: 0.0, ..SimConfig::default() };
        let schema = generate_schema(&config, &mut rng(0)).unwrap();
        let mut g = ObjectGraph::empty(schema, EdgeProbs::from_config(&config));
        for _ in 0..n {
            g.push_object(ClassId(0), &mut rng(1));
        }
        g
    }

    #[test]
    fn query_frequencies_match_weights() {
        let config = SimConfig::default().with_policy(PolicyKind::Cactis);
        let mix = TransactionMix::new(&config).unwrap();
        let probs = kind_probabilities(&config);
        let mut counts = [0usize; TransactionKind::COUNT];
        let mut r = rng(11);
        let n = 100_000;
        for _ in 0..n {
            counts[mix.sample(&mut r).index()] += 1;
        }
        for k in TransactionKind::ALL {
            let freq = counts[k.index()] as f64 / n as f64;
            assert!((freq - probs[k.index()]).abs() <= 0.01, "{k}: {freq} vs {}", probs[k.index()]);
        }
    }

    #[test]
    fn only_instance_creation() {
        let config = SimConfig { pq: [0.0; 12], pu1: 0.0, pclust: Some(0.0), ..SimConfig::default() };
        let mix = TransactionMix::new(&config).unwrap();
        let mut r = rng(1);
        assert!((0..1000).all(|_| mix.sample(&mut r) == TransactionKind::InstanceCreation));
    }

    #[test]
    fn zero_weights_rejected() {
        let config = SimConfig { pq: [0.0; 12], pu1: 0.0, pu2: 0.0, pclust: Some(0.0), ..SimConfig::default() };
        assert!(TransactionMix::new(&config).is_err());
    }

    #[test]
    fn closure_depths_bounded() {
        let config = SimConfig::default();
        let g = bare_graph(10);
        let mut r = rng(3);
        let mut seen = HashSet::new();
        for _ in 0..2000 {
            if let TxnParams::Closure { depth, .. } = draw_params(TransactionKind::ClosureRandom, &g, &config, &mut r) {
                seen.insert(depth);
            }
        }
        assert_eq!(seen, (1..=5).collect());
    }

    #[test]
    fn read_scale_keeps_query_mix() {
        let base = SimConfig { pq: [0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.1, 0.11, 0.12], ..SimConfig::default() };
        let scaled = SimConfig { read_scale: 0.3, ..base.clone() };
        let a = kind_probabilities(&base);
        let b = kind_probabilities(&scaled);
        let qa: f64 = a[..12].iter().sum();
        let qb: f64 = b[..12].iter().sum();
        for i in 0..12 {
            assert!((a[i] / qa - b[i] / qb).abs() < 1e-12);
        }
        assert!(qb < qa);
    }

    #[test]
    fn sequential_scan_reads_whole_extent() {
        let mut g = bare_graph(7);
        let plan = resolve_targets(TransactionKind::SequentialScan, TxnParams::Class(ClassId(0)), &mut g, &mut rng(1)).unwrap();
        assert_eq!(plan.len(), 7);
        assert!(plan.entries.iter().all(|&(_, m)| m == AccessMode::Read));
        assert!(g.objects().all(|o| o.access_count == 1));
    }

    #[test]
    fn closure_without_edge_is_start_only() {
        let mut g = bare_graph(3);
        let plan = resolve_targets(
            TransactionKind::ClosureVersion,
            TxnParams::Closure { start: Oid(1), depth: 4 },
            &mut g,
            &mut rng(1),
        )
        .unwrap();
        assert_eq!(plan.entries, vec![(Oid(1), AccessMode::Read)]);
    }

    /// Brute-force transitive closure by repeated relaxation.
    fn reachable_forward(g: &ObjectGraph, start: Oid, kind: RelKind) -> HashSet<Oid> {
        let mut set = HashSet::from([start]);
        loop {
            let before = set.len();
            for o in set.clone() {
                for e in g.object(o).edges_of(kind, Direction::Forward) {
                    set.insert(e.target);
                }
            }
            if set.len() == before {
                return set;
            }
        }
    }

    #[test]
    fn group_lookup_from_chain_root() {
        let mut g = bare_graph(4);
        g.link(RelKind::Version, Oid(0), Oid(1));
        g.link(RelKind::Version, Oid(1), Oid(2));
        g.link(RelKind::Version, Oid(2), Oid(3));
        let expected = reachable_forward(&g, Oid(0), RelKind::Version);
        assert_eq!(expected.len(), 4);
        let plan = resolve_targets(TransactionKind::GroupLookupVersion, TxnParams::Start(Oid(0)), &mut g, &mut rng(1)).unwrap();
        assert_eq!(plan.len(), 4);
        assert_eq!(plan.entries.iter().map(|e| e.0).collect::<HashSet<_>>(), expected);
        assert_eq!(plan.crossings.len(), 3);
    }

    #[test]
    fn statistics_follow_plan() {
        let mut g = bare_graph(5);
        g.link(RelKind::Configuration, Oid(0), Oid(1));
        g.link(RelKind::Configuration, Oid(0), Oid(2));
        g.link(RelKind::Configuration, Oid(2), Oid(3));
        g.link(RelKind::Equivalence, Oid(3), Oid(4));
        let mut r = rng(5);
        for kind in TransactionKind::ALL {
            let params = match kind {
                TransactionKind::RangeLookup => TxnParams::Range { class: ClassId(0), lo: 0, hi: 99 },
                TransactionKind::SequentialScan | TransactionKind::InstanceCreation => TxnParams::Class(ClassId(0)),
                TransactionKind::Recluster => TxnParams::None,
                k if k.index() >= 8 && k.index() < 12 => TxnParams::Closure { start: Oid(0), depth: 3 },
                _ => TxnParams::Start(Oid(0)),
            };
            let access_before: u64 = g.objects().map(|o| o.access_count).sum();
            let usage_before: u64 = g.objects().flat_map(|o| o.edges.iter()).map(|e| e.usage_count).sum();
            let plan = resolve_targets(kind, params, &mut g, &mut r).unwrap();
            let access_after: u64 = g.objects().map(|o| o.access_count).sum();
            let usage_after: u64 = g.objects().flat_map(|o| o.edges.iter()).map(|e| e.usage_count).sum();
            assert_eq!(access_after - access_before, plan.len() as u64, "{kind}");
            assert_eq!(usage_after - usage_before, plan.crossings.len() as u64, "{kind}");
            if kind.index() >= 8 && kind.index() < 12 {
                assert!(plan.len() <= 4);
            }
        }
    }

    #[test]
    fn range_lookup_filters_first_attribute() {
        let mut g = bare_graph(30);
        let plan = resolve_targets(
            TransactionKind::RangeLookup,
            TxnParams::Range { class: ClassId(0), lo: 10, hi: 19 },
            &mut g,
            &mut rng(1),
        )
        .unwrap();
        for (oid, _) in &plan.entries {
            assert!((10..=19).contains(&g.object(*oid).attrs[0].value));
        }
        let expected = g.objects().filter(|o| (10..=19).contains(&o.attrs[0].value)).count();
        assert_eq!(plan.len(), expected);
    }

    #[test]
    fn empty_class_scan_is_empty() {
        let config = SimConfig { ncl: 2, psuper: 0.0, pcomp: 0.0, pequi: 0.0, ..SimConfig::default() };
        let schema = generate_schema(&config, &mut rng(0)).unwrap();
        let mut g = ObjectGraph::empty(schema, EdgeProbs::from_config(&config));
        g.push_object(ClassId(0), &mut rng(1));
        let plan = resolve_targets(TransactionKind::SequentialScan, TxnParams::Class(ClassId(1)), &mut g, &mut rng(1)).unwrap();
        assert!(plan.is_empty());
    }
}
