//! Clustering policies: where objects live and how the layout is rebuilt.

pub mod cactis;
pub mod ck;
pub mod orion;

use std::collections::BTreeSet;

use crate::config::{PolicyKind, SimConfig};
use crate::error::Result;
use crate::model::{ObjectGraph, Oid};
use crate::storage::{IoCause, PageId, PageStore};

pub use cactis::Cactis;
pub use ck::Ck;
pub use orion::Orion;

/// A placement policy. Every call leaves each object on exactly one page.
pub trait ClusteringPolicy: Send {
    fn kind(&self) -> PolicyKind;

    /// Lays out the initial database. The caller settles the store afterwards.
    fn load(&mut self, graph: &mut ObjectGraph, store: &mut PageStore, config: &SimConfig) -> Result<()>;

    /// Places an object created after the initial load.
    fn on_instance_created(
        &mut self,
        graph: &mut ObjectGraph,
        store: &mut PageStore,
        config: &SimConfig,
        oid: Oid,
    ) -> Result<()>;

    /// Moves a placed object that has outgrown its page.
    fn relocate(&mut self, graph: &mut ObjectGraph, store: &mut PageStore, config: &SimConfig, oid: Oid) -> Result<()>;

    /// Whether a recluster transaction rebuilds the layout.
    fn reorganizes(&self) -> bool;

    /// Rebuilds the layout. Runs with no transaction in service.
    fn on_recluster(&mut self, graph: &mut ObjectGraph, store: &mut PageStore, config: &SimConfig) -> Result<()>;
}

pub fn make_policy(config: &SimConfig) -> Result<Box<dyn ClusteringPolicy>> {
    Ok(match config.policy {
        PolicyKind::Cactis => Box::new(Cactis::new()),
        PolicyKind::Orion => Box::new(Orion::new(&config.orion)?),
        PolicyKind::Ck => Box::new(Ck::new(config)),
    })
}

/// Pages dirtied by one clustering step, written back when the step completes.
#[derive(Debug, Default)]
pub(crate) struct Dirtied(BTreeSet<PageId>);

impl Dirtied {
    pub(crate) fn add(&mut self, page: PageId) {
        self.0.insert(page);
    }

    pub(crate) fn flush(self, store: &mut PageStore) -> Result<()> {
        for page in self.0 {
            if store.page(page).is_some() {
                store.write_page(page, IoCause::Clustering)?;
            }
        }
        Ok(())
    }
}

/// Moves `oid` onto `page`, bringing the page in for the clustering step.
pub(crate) fn put(
    graph: &ObjectGraph,
    store: &mut PageStore,
    config: &SimConfig,
    oid: Oid,
    page: PageId,
    dirtied: &mut Dirtied,
) -> Result<()> {
    store.fetch_page(page, IoCause::Clustering)?;
    store.place_object(oid, graph.size_of(oid, config), page)?;
    dirtied.add(page);
    Ok(())
}

/// Allocates a page and installs it in the buffer without a read.
pub(crate) fn fresh_page(store: &mut PageStore) -> Result<PageId> {
    let page = store.allocate_page();
    store.admit_new_page(page, IoCause::Clustering)?;
    Ok(page)
}

/// Frees every listed page that no longer holds objects.
pub(crate) fn free_empty(store: &mut PageStore, pages: &[PageId]) -> Result<()> {
    for &p in pages {
        if store.page(p).is_some_and(|pg| pg.residents.is_empty()) {
            store.free_page(p)?;
        }
    }
    Ok(())
}
