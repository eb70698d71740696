//! Class-segment clustering: the instances of a class share a segment, and
//! cluster messages let several classes share one.

use std::collections::BTreeSet;

use crate::config::{OrionParams, PolicyKind, SimConfig};
use crate::error::{Result, SimError};
use crate::model::{ClassId, ObjectGraph, Oid};
use crate::storage::{IoCause, PageId, PageStore, SegmentId};

use super::{fresh_page, put, ClusteringPolicy, Dirtied};

#[derive(Debug)]
pub struct Orion {
    directives: Vec<Vec<ClassId>>,
    messages_only: bool,
}

impl Orion {
    pub fn new(params: &OrionParams) -> Result<Self> {
        Ok(Orion { directives: params.cluster_messages.clone(), messages_only: params.messages_only })
    }

    /// Makes `classes` share one segment from now on. Existing instances
    /// move at the next recluster.
    pub fn cluster_message(&mut self, store: &mut PageStore, classes: &[ClassId]) -> Result<()> {
        if classes.len() <= 1 {
            if let Some(&c) = classes.first() {
                segment_for(store, c);
            }
            return Ok(());
        }
        for &c in classes {
            let shared = store
                .segment_of_class(c)
                .and_then(|s| store.segment(s))
                .is_some_and(|s| s.member_classes.len() > 1);
            if shared {
                return Err(SimError::SegmentConflict(c));
            }
        }
        store.create_segment(classes);
        Ok(())
    }

    /// Puts `oid` on the first page of its class segment with room, adding
    /// a page to the segment when none has.
    pub fn place_instance(&mut self, graph: &ObjectGraph, store: &mut PageStore, config: &SimConfig, oid: Oid) -> Result<PageId> {
        let mut dirtied = Dirtied::default();
        let page = self.place_with(graph, store, config, oid, &mut dirtied)?;
        dirtied.flush(store)?;
        Ok(page)
    }

    fn place_with(
        &mut self,
        graph: &ObjectGraph,
        store: &mut PageStore,
        config: &SimConfig,
        oid: Oid,
        dirtied: &mut Dirtied,
    ) -> Result<PageId> {
        let seg = segment_for(store, graph.object(oid).class_id);
        let size = graph.size_of(oid, config);
        let pages = store.segment(seg).map(|s| s.pages.clone()).unwrap_or_default();
        let page = match pages.into_iter().find(|&p| store.free_bytes(p).is_ok_and(|f| f >= size)) {
            Some(p) => p,
            None => {
                let p = fresh_page(store)?;
                store.add_page_to_segment(seg, p)?;
                p
            }
        };
        put(graph, store, config, oid, page, dirtied)?;
        Ok(page)
    }

    /// Rewrites every segment densely in oid order. Each segment is
    /// collected by its own pass over the whole database.
    pub fn repack(&mut self, graph: &ObjectGraph, store: &mut PageStore, config: &SimConfig) -> Result<()> {
        let old_pages = store.page_ids();
        let segments: Vec<(SegmentId, BTreeSet<ClassId>)> = store
            .segments()
            .filter(|s| !s.member_classes.is_empty())
            .map(|s| (s.id, s.member_classes.clone()))
            .collect();
        let mut dirtied = Dirtied::default();
        for (seg, classes) in segments {
            let mut members = Vec::new();
            let database: Vec<PageId> =
                store.pages().filter(|pg| !pg.residents.is_empty()).map(|pg| pg.id).collect();
            for p in database {
                store.fetch_page(p, IoCause::Clustering)?;
                let residents = &store.page(p).expect("page exists").residents;
                members.extend(residents.iter().copied().filter(|&o| classes.contains(&graph.object(o).class_id)));
            }
            members.sort();
            let mut current: Option<PageId> = None;
            for oid in members {
                let size = graph.size_of(oid, config);
                let page = match current {
                    Some(p) if store.free_bytes(p)? >= size => p,
                    _ => {
                        let p = fresh_page(store)?;
                        store.add_page_to_segment(seg, p)?;
                        p
                    }
                };
                current = Some(page);
                store.fetch_page(store.lookup_page(oid)?, IoCause::Clustering)?;
                put(graph, store, config, oid, page, &mut dirtied)?;
            }
        }
        dirtied.flush(store)?;
        super::free_empty(store, &old_pages)?;
        store.prune_segments();
        Ok(())
    }

    /// Moves only the instances that live outside their class segment, as
    /// left behind by cluster messages. One pass over the database.
    pub fn apply_messages(&mut self, graph: &ObjectGraph, store: &mut PageStore, config: &SimConfig) -> Result<()> {
        let old_pages = store.page_ids();
        let mut misplaced = Vec::new();
        for &p in &old_pages {
            if store.page(p).is_none_or(|pg| pg.residents.is_empty()) {
                continue;
            }
            store.fetch_page(p, IoCause::Clustering)?;
            let here = store.segment_of_page(p);
            for &o in &store.page(p).expect("page exists").residents {
                if store.segment_of_class(graph.object(o).class_id) != here {
                    misplaced.push(o);
                }
            }
        }
        misplaced.sort();
        let mut dirtied = Dirtied::default();
        for oid in misplaced {
            store.fetch_page(store.lookup_page(oid)?, IoCause::Clustering)?;
            self.place_with(graph, store, config, oid, &mut dirtied)?;
        }
        dirtied.flush(store)?;
        super::free_empty(store, &old_pages)?;
        store.prune_segments();
        Ok(())
    }
}

fn segment_for(store: &mut PageStore, class: ClassId) -> SegmentId {
    match store.segment_of_class(class) {
        Some(s) => s,
        None => store.create_segment(&[class]),
    }
}

impl ClusteringPolicy for Orion {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Orion
    }

    fn load(&mut self, graph: &mut ObjectGraph, store: &mut PageStore, config: &SimConfig) -> Result<()> {
        for list in self.directives.clone() {
            self.cluster_message(store, &list)?;
        }
        let mut dirtied = Dirtied::default();
        for oid in graph.oids() {
            self.place_with(graph, store, config, oid, &mut dirtied)?;
        }
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
        self.place_instance(graph, store, config, oid).map(|_| ())
    }

    fn reorganizes(&self) -> bool {
        true
    }

    fn on_recluster(&mut self, graph: &mut ObjectGraph, store: &mut PageStore, config: &SimConfig) -> Result<()> {
        if self.messages_only {
            self.apply_messages(graph, store, config)
        } else {
            self.repack(graph, store, config)
        }
    }
}
