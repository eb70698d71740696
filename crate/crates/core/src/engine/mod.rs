//! Discrete-event simulation of transactions running against the storage
//! subsystem under one clustering policy.

mod queue;

use std::collections::{HashSet, VecDeque};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::clustering::{make_policy, ClusteringPolicy};
use crate::config::SimConfig;
use crate::error::{Result, SimError};
use crate::metrics::{MetricsReport, Recorder};
use crate::model::{create_instance, AttrImpl, ObjectGraph, Oid};
use crate::storage::{io_time_ms, IoCause, PageId, PageStore};
use crate::workload::{draw_params, resolve_targets, AccessMode, AccessPlan, Transaction, TransactionKind, TransactionMix, TxnParams};

pub use queue::{Event, EventKind, EventQueue};

/// Random streams derived from the run seed; each transaction draws from
/// its own stream.
const STREAM_DATABASE: u64 = 1;
const STREAM_ARRIVALS: u64 = 2;
const STREAM_KINDS: u64 = 3;
const STREAM_TXN_BASE: u64 = 1 << 32;

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

struct Active {
    txn: Transaction,
    plan: AccessPlan,
    next: usize,
    created: bool,
    rng: ChaCha8Rng,
    txn_ios: u64,
    pages: HashSet<PageId>,
}

pub struct Simulation {
    config: SimConfig,
    io_time: f64,
    graph: ObjectGraph,
    store: PageStore,
    policy: Box<dyn ClusteringPolicy>,
    mix: TransactionMix,
    interarrival: Exp<f64>,
    arrivals_rng: ChaCha8Rng,
    kinds_rng: ChaCha8Rng,
    queue: EventQueue,
    now: f64,
    waiting: VecDeque<Transaction>,
    active: Vec<Option<Active>>,
    in_service: usize,
    arrivals: u64,
    admission_open: bool,
    /// Recluster transaction waiting for the system to drain.
    pending_recluster: Option<usize>,
    recorder: Recorder,
    next_progress: u64,
}

impl Simulation {
    /// Builds the database and lays it out under the configured policy.
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let mut graph = ObjectGraph::generate(config, &mut stream(config.seed, STREAM_DATABASE))?;
        let mut store = PageStore::from_config(config);
        let mut policy = make_policy(config)?;
        policy.load(&mut graph, &mut store, config)?;
        store.settle();
        let interarrival = Exp::new(1.0 / (config.minter_s * 1000.0))
            .map_err(|e| SimError::InvalidConfig(format!("MINTER: {e}")))?;
        Ok(Simulation {
            config: config.clone(),
            io_time: io_time_ms(config),
            mix: TransactionMix::new(config)?,
            interarrival,
            arrivals_rng: stream(config.seed, STREAM_ARRIVALS),
            kinds_rng: stream(config.seed, STREAM_KINDS),
            queue: EventQueue::default(),
            now: 0.0,
            waiting: VecDeque::new(),
            active: Vec::new(),
            in_service: 0,
            arrivals: 0,
            admission_open: true,
            pending_recluster: None,
            recorder: Recorder::new(store.pages_used()),
            next_progress: 1,
            graph,
            store,
            policy,
        })
    }

    pub fn graph(&self) -> &ObjectGraph {
        &self.graph
    }

    pub fn store(&self) -> &PageStore {
        &self.store
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Runs until `horizon_transactions` transactions have completed.
    pub fn run(&mut self) -> Result<MetricsReport> {
        while self.advance()?.is_some() {}
        Ok(self.report())
    }

    /// Processes the next event and returns its kind, or `None` once the
    /// horizon is reached.
    pub fn advance(&mut self) -> Result<Option<EventKind>> {
        let horizon = self.config.horizon_transactions as u64;
        if horizon > 0 && self.arrivals == 0 && self.queue.is_empty() {
            self.schedule_arrival();
        }
        if self.recorder.completed() >= horizon {
            return Ok(None);
        }
        let Some(ev) = self.queue.pop() else { return Ok(None) };
        debug_assert!(ev.time >= self.now);
        self.now = ev.time;
        match ev.kind {
            EventKind::Arrival => self.arrive()?,
            EventKind::Step(slot) => self.step(slot)?,
            EventKind::ReclusterEnd(slot) => {
                self.admission_open = true;
                self.complete(slot)?;
            }
        }
        self.recorder.sample_pages(self.now, self.store.pages_used());
        Ok(Some(ev.kind))
    }

    /// Measures collected so far.
    pub fn report(&self) -> MetricsReport {
        self.recorder.clone().finish(self.config.policy, self.config.seed, self.now, self.store.io(), self.graph.len())
    }

    /// Structural checks that must hold between events.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        self.store.check_invariants()?;
        if let Some(o) = self.graph.oids().find(|&o| !self.store.is_placed(o)) {
            return Err(format!("{o} has no page"));
        }
        let placed: usize = self.store.pages().map(|p| p.residents.len()).sum();
        if placed != self.graph.len() {
            return Err(format!("{placed} residents for {} objects", self.graph.len()));
        }
        if !self.graph.edges_symmetric() {
            return Err("relationship edges are not mirrored".into());
        }
        if self.in_service > self.config.multi {
            return Err(format!("{} transactions in service", self.in_service));
        }
        Ok(())
    }

    /// One line per object: oid, class, page and related objects.
    pub fn dump_layout(&self, out: &mut impl Write) -> std::io::Result<()> {
        for obj in self.graph.objects() {
            let page = self.store.lookup_page(obj.oid).map(|p| p.to_string()).unwrap_or_else(|_| "-".into());
            let edges: Vec<String> =
                obj.edges.iter().map(|e| format!("{}:{:?}:{}", e.kind, e.direction, e.target)).collect();
            writeln!(out, "{} {} {} {}", obj.oid, obj.class_id, page, edges.join(","))?;
        }
        Ok(())
    }

    fn schedule_arrival(&mut self) {
        let gap = self.interarrival.sample(&mut self.arrivals_rng);
        self.queue.push(self.now + gap, EventKind::Arrival);
    }

    fn arrive(&mut self) -> Result<()> {
        let id = self.arrivals;
        self.arrivals += 1;
        let kind = self.mix.sample(&mut self.kinds_rng);
        self.waiting.push_back(Transaction { id, kind, params: TxnParams::None, t_submit: self.now, t_complete: None });
        if self.arrivals < self.config.horizon_transactions as u64 {
            self.schedule_arrival();
        }
        self.admit_waiting()
    }

    fn admit_waiting(&mut self) -> Result<()> {
        while self.admission_open && self.in_service < self.config.multi {
            let Some(txn) = self.waiting.pop_front() else { break };
            self.admit(txn)?;
        }
        Ok(())
    }

    fn admit(&mut self, mut txn: Transaction) -> Result<()> {
        let mut rng = stream(self.config.seed, STREAM_TXN_BASE + txn.id);
        txn.params = draw_params(txn.kind, &self.graph, &self.config, &mut rng);
        let plan = resolve_targets(txn.kind, txn.params, &mut self.graph, &mut rng)?;
        let kind = txn.kind;
        let active = Active { txn, plan, next: 0, created: false, rng, txn_ios: 0, pages: HashSet::new() };
        let slot = match self.active.iter().position(Option::is_none) {
            Some(i) => {
                self.active[i] = Some(active);
                i
            }
            None => {
                self.active.push(Some(active));
                self.active.len() - 1
            }
        };
        self.in_service += 1;
        if kind == TransactionKind::Recluster && self.policy.reorganizes() {
            self.admission_open = false;
            self.pending_recluster = Some(slot);
            self.try_recluster()
        } else {
            self.queue.push(self.now + self.config.cct_ms, EventKind::Step(slot));
            Ok(())
        }
    }

    /// Starts a pending reorganization once it is the only transaction left.
    fn try_recluster(&mut self) -> Result<()> {
        let Some(slot) = self.pending_recluster else { return Ok(()) };
        if self.in_service != 1 {
            return Ok(());
        }
        self.pending_recluster = None;
        let before = self.store.io();
        self.policy.on_recluster(&mut self.graph, &mut self.store, &self.config)?;
        let ios = (self.store.io() - before).total();
        self.recorder.reorganized();
        log::debug!("{} reorganization: {ios} I/Os at t={:.0} ms", self.config.policy, self.now);
        let end = self.now + self.config.cct_ms + ios as f64 * self.io_time;
        self.queue.push(end, EventKind::ReclusterEnd(slot));
        Ok(())
    }

    fn step(&mut self, slot: usize) -> Result<()> {
        let mut a = self.active[slot].take().expect("stepped transaction is active");
        let before = self.store.io();
        let cpu = if a.next < a.plan.len() {
            let (oid, mode) = a.plan.entries[a.next];
            a.next += 1;
            Some(self.access(&mut a, oid, mode)?)
        } else if a.txn.kind == TransactionKind::InstanceCreation && !a.created {
            a.created = true;
            Some(self.create(&mut a)?)
        } else {
            None
        };
        let delta = self.store.io() - before;
        a.txn_ios += delta.txn();
        self.active[slot] = Some(a);
        match cpu {
            Some(cpu) => {
                let cost = cpu + delta.total() as f64 * self.io_time;
                self.queue.push(self.now + cost, EventKind::Step(slot));
                Ok(())
            }
            None => self.complete(slot),
        }
    }

    fn lookup(&mut self, a: &mut Active, oid: Oid) -> Result<PageId> {
        let page = self.store.lookup_page(oid)?;
        a.pages.insert(page);
        self.store.fetch_page(page, IoCause::Transaction)?;
        Ok(page)
    }

    /// One plan entry; returns its processing time without I/O.
    fn access(&mut self, a: &mut Active, oid: Oid, mode: AccessMode) -> Result<f64> {
        let page = self.lookup(a, oid)?;
        let obj = self.graph.object(oid);
        let specs = &self.graph.class_of(oid).attr_specs;
        let words = match mode {
            AccessMode::Read => obj
                .attrs
                .iter()
                .zip(specs)
                .map(|(at, s)| if at.imp == AttrImpl::InheritedByReference { 1 } else { s.size_words })
                .sum(),
            AccessMode::Write => {
                if obj.attrs.is_empty() {
                    0
                } else {
                    let i = a.rng.random_range(0..obj.attrs.len());
                    let words = specs[i].size_words;
                    let value = a.rng.random_range(0..crate::workload::VALUE_DOMAIN);
                    self.graph.object_mut(oid).attrs[i].value = value;
                    self.store.mark_dirty(page)?;
                    words
                }
            }
        };
        Ok(self.config.test_ms + self.config.accm_ms * (1.0 + f64::from(words)))
    }

    /// Instance creation: the related objects record the new relationship,
    /// then the policy places the new object.
    fn create(&mut self, a: &mut Active) -> Result<f64> {
        let TxnParams::Class(class) = a.txn.params else {
            return Err(SimError::InvalidConfig("instance creation without a class".into()));
        };
        let creation = create_instance(&mut self.graph, class, self.config.p_copy, &mut a.rng)?;
        let per_lookup = self.config.test_ms + self.config.accm_ms;
        let mut cpu = 0.0;
        for &n in &creation.touched {
            let page = self.lookup(a, n)?;
            cpu += per_lookup + self.config.accm_ms;
            let size = self.graph.size_of(n, &self.config);
            let room = self.store.free_bytes(page)? + self.store.stored_size(n).unwrap_or(0);
            if size <= room {
                self.store.resize_object(n, size)?;
                self.store.mark_dirty(page)?;
            } else {
                self.policy.relocate(&mut self.graph, &mut self.store, &self.config, n)?;
            }
        }
        self.policy.on_instance_created(&mut self.graph, &mut self.store, &self.config, creation.oid)?;
        let words = self.graph.size_of(creation.oid, &self.config) / self.config.wdsize;
        cpu += per_lookup + self.config.accm_ms * f64::from(words);
        Ok(cpu)
    }

    fn complete(&mut self, slot: usize) -> Result<()> {
        let mut a = self.active[slot].take().expect("completed transaction is active");
        a.txn.t_complete = Some(self.now);
        self.in_service -= 1;
        self.recorder.complete(
            a.txn.kind,
            self.now - a.txn.t_submit,
            a.txn_ios,
            a.pages.len() as u64,
            a.plan.len() as u64,
        );
        let horizon = self.config.horizon_transactions as u64;
        let done = self.recorder.completed();
        if done * 10 >= self.next_progress * horizon {
            log::info!("{} seed {}: {}% ({done}/{horizon}) at t={:.0} ms", self.config.policy, self.config.seed, self.next_progress * 10, self.now);
            self.next_progress += 1;
        }
        self.try_recluster()?;
        self.admit_waiting()
    }
}

/// Builds and runs one simulation.
pub fn run_simulation(config: &SimConfig) -> Result<MetricsReport> {
    Simulation::new(config)?.run()
}
