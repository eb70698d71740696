//! Usage-driven greedy packing. Objects and relationships carry access
//! statistics; a reorganization packs the database block by block.

use crate::config::{PolicyKind, SimConfig};
use crate::error::Result;
use crate::model::{ObjectGraph, Oid};
use crate::storage::{IoCause, PageId, PageStore};

use super::{fresh_page, put, ClusteringPolicy, Dirtied};

/// Greedy block packing over `oids`.
///
/// Each block is seeded with the most accessed unassigned object and grown
/// along the relationship of highest total usage from a block member to an
/// unassigned object. A block closes when the chosen object does not fit or
/// no such relationship remains. Ties go to the smaller oid.
pub fn pack_blocks(graph: &ObjectGraph, oids: &[Oid], size: impl Fn(Oid) -> u32, capacity: u32) -> Vec<Vec<Oid>> {
    let n = graph.len();
    let mut in_scope = vec![false; n];
    for o in oids {
        in_scope[o.index()] = true;
    }
    let mut assigned = vec![false; n];
    let mut order: Vec<Oid> = oids.to_vec();
    order.sort_by_key(|&o| (std::cmp::Reverse(graph.object(o).access_count), o));

    let mut blocks = Vec::new();
    for &seed in &order {
        if assigned[seed.index()] {
            continue;
        }
        assigned[seed.index()] = true;
        let mut block = vec![seed];
        let mut used = size(seed);
        loop {
            // (usage, target, member), best = highest usage then smallest oids
            let mut best: Option<(u64, Oid, Oid)> = None;
            for &member in &block {
                for e in &graph.object(member).edges {
                    let t = e.target;
                    if !in_scope[t.index()] || assigned[t.index()] {
                        continue;
                    }
                    let usage = graph.total_usage(member, t, e.kind);
                    let better = match best {
                        None => true,
                        Some((u, bt, bm)) => usage > u || (usage == u && (t, member) < (bt, bm)),
                    };
                    if better {
                        best = Some((usage, t, member));
                    }
                }
            }
            let Some((_, target, _)) = best else { break };
            let s = size(target);
            if used + s > capacity {
                break;
            }
            used += s;
            assigned[target.index()] = true;
            block.push(target);
        }
        blocks.push(block);
    }
    blocks
}

#[derive(Debug, Default)]
pub struct Cactis {
    insertion: Option<PageId>,
}

impl Cactis {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reads the statistics of every page, packs the whole database and
    /// writes it to fresh pages; the old pages are freed.
    pub fn reorganize(&mut self, graph: &ObjectGraph, store: &mut PageStore, config: &SimConfig) -> Result<Vec<Vec<Oid>>> {
        let old_pages = store.page_ids();
        for &p in &old_pages {
            store.fetch_page(p, IoCause::Clustering)?;
        }
        let oids: Vec<Oid> = graph.oids().filter(|&o| store.is_placed(o)).collect();
        let blocks = pack_blocks(graph, &oids, |o| graph.size_of(o, config), store.page_size());
        let mut dirtied = Dirtied::default();
        for block in &blocks {
            let page = fresh_page(store)?;
            for &oid in block {
                store.fetch_page(store.lookup_page(oid)?, IoCause::Clustering)?;
                put(graph, store, config, oid, page, &mut dirtied)?;
            }
            self.insertion = Some(page);
        }
        dirtied.flush(store)?;
        super::free_empty(store, &old_pages)?;
        Ok(blocks)
    }

    fn insertion_page(&mut self, store: &mut PageStore, size: u32) -> Result<PageId> {
        if let Some(p) = self.insertion {
            if store.free_bytes(p).is_ok_and(|f| f >= size) {
                return Ok(p);
            }
        }
        let p = fresh_page(store)?;
        self.insertion = Some(p);
        Ok(p)
    }
}

impl ClusteringPolicy for Cactis {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Cactis
    }

    fn load(&mut self, graph: &mut ObjectGraph, store: &mut PageStore, config: &SimConfig) -> Result<()> {
        let mut page = store.allocate_page();
        for oid in graph.oids() {
            let size = graph.size_of(oid, config);
            if store.free_bytes(page)? < size {
                page = store.allocate_page();
            }
            store.place_object(oid, size, page)?;
        }
        self.reorganize(graph, store, config)?;
        Ok(())
    }

    fn on_instance_created(
        &mut self,
        graph: &mut ObjectGraph,
        store: &mut PageStore,
        config: &SimConfig,
        oid: Oid,
    ) -> Result<()> {
        self.relocate(graph, store, config, oid)
    }

    fn relocate(&mut self, graph: &mut ObjectGraph, store: &mut PageStore, config: &SimConfig, oid: Oid) -> Result<()> {
        let page = self.insertion_page(store, graph.size_of(oid, config))?;
        let mut dirtied = Dirtied::default();
        put(graph, store, config, oid, page, &mut dirtied)?;
        dirtied.flush(store)
    }

    fn reorganizes(&self) -> bool {
        true
    }

    fn on_recluster(&mut self, graph: &mut ObjectGraph, store: &mut PageStore, config: &SimConfig) -> Result<()> {
        self.reorganize(graph, store, config).map(|_| ())
    }
}
