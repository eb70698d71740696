//! Creation-time clustering driven by user-supplied relationship access
//! probabilities. A new object goes to the candidate page where looking up
//! its inherited attributes costs least, either caching copied attributes
//! on the page or replacing them by references.

use std::collections::BTreeMap;

use crate::config::{CkParams, PolicyKind, SimConfig, SplitPolicy};
use crate::error::Result;
use crate::model::{AttrImpl, ObjectGraph, Oid};
use crate::storage::{IoCause, PageId, PageStore};

use super::{fresh_page, put, ClusteringPolicy, Dirtied};

/// Variant 1 looks copied attributes up remotely; variant 2 stores them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Reference = 1,
    Cache = 2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CkCandidate {
    pub page: PageId,
    pub weight: f64,
    pub ref_lookup: f64,
    pub copy_lookup: f64,
    pub copy_storage: u32,
    pub total: [f64; 2],
}

impl CkCandidate {
    pub fn cost(&self, v: Variant) -> f64 {
        self.total[v as usize - 1]
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CkCostTable {
    /// One entry per candidate page, in page order.
    pub candidates: Vec<CkCandidate>,
}

impl CkCostTable {
    /// All (page, variant) options, cheapest first; ties favour the lower
    /// page, then variant 1.
    pub fn ranked(&self) -> Vec<(f64, PageId, Variant)> {
        let mut out: Vec<_> = self
            .candidates
            .iter()
            .flat_map(|c| [Variant::Reference, Variant::Cache].map(|v| (c.cost(v), c.page, v)))
            .collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        out
    }

    /// Cheapest option whose page has room for the object in that variant.
    pub fn choose(&self, free: impl Fn(PageId) -> u32, sizes: [u32; 2]) -> Option<(PageId, Variant)> {
        self.ranked()
            .into_iter()
            .find(|&(_, p, v)| free(p) >= sizes[v as usize - 1])
            .map(|(_, p, v)| (p, v))
    }
}

/// Candidate pages of `oid` with the access probability of the strongest
/// relationship anchoring each: pages of the sources of inherited
/// attributes (version relationship) and pages of related objects.
pub fn page_set(graph: &ObjectGraph, store: &PageStore, oid: Oid) -> BTreeMap<PageId, f64> {
    let mut set: BTreeMap<PageId, f64> = BTreeMap::new();
    let mut add = |page: PageId, prob: f64| {
        let e = set.entry(page).or_insert(prob);
        *e = e.max(prob);
    };
    let obj = graph.object(oid);
    let version = graph.edge_probs().version;
    for a in &obj.attrs {
        if let Some(p) = a.source.and_then(|s| store.lookup_page(s).ok()) {
            add(p, version);
        }
    }
    for e in &obj.edges {
        if e.target == oid {
            continue;
        }
        if let Ok(p) = store.lookup_page(e.target) {
            add(p, e.access_prob);
        }
    }
    set
}

/// Lookup and storage costs of putting `oid` on each candidate page.
pub fn cost_table(graph: &ObjectGraph, store: &PageStore, config: &SimConfig, oid: Oid) -> CkCostTable {
    let obj = graph.object(oid);
    let class = graph.class_of(oid);
    let lookup = config.ck.lookup_cost;
    let storage = config.storage_cost();
    let candidates = page_set(graph, store, oid)
        .into_iter()
        .map(|(page, prob)| {
            let weight = 1.0 / prob;
            let mut c = CkCandidate { page, weight, ref_lookup: 0.0, copy_lookup: 0.0, copy_storage: 0, total: [0.0; 2] };
            for (a, spec) in obj.attrs.iter().zip(&class.attr_specs) {
                let remote = a.source.is_some_and(|s| store.lookup_page(s).ok() != Some(page));
                match a.imp {
                    AttrImpl::InheritedByReference if remote => c.ref_lookup += weight,
                    AttrImpl::InheritedByCopy if remote => {
                        c.copy_storage += spec.size_words * config.wdsize;
                        c.copy_lookup += weight;
                    }
                    _ => {}
                }
            }
            c.total = [
                (c.ref_lookup + c.copy_lookup) * lookup,
                c.ref_lookup * lookup + f64::from(c.copy_storage) * storage,
            ];
            c
        })
        .collect();
    CkCostTable { candidates }
}

/// Size of `oid` in each variant.
pub fn variant_sizes(graph: &ObjectGraph, config: &SimConfig, oid: Oid) -> [u32; 2] {
    let cached = graph.size_of(oid, config);
    let saved: u32 = graph
        .object(oid)
        .attrs
        .iter()
        .zip(&graph.class_of(oid).attr_specs)
        .filter(|(a, _)| a.imp == AttrImpl::InheritedByCopy)
        .map(|(_, s)| (s.size_words.saturating_sub(1)) * config.wdsize)
        .sum();
    [cached - saved, cached]
}

/// Turns every copied attribute of `oid` into a reference to the object
/// that stores the value.
pub fn demote_copies(graph: &mut ObjectGraph, oid: Oid) {
    let holders: Vec<Option<Oid>> = graph
        .object(oid)
        .attrs
        .iter()
        .enumerate()
        .map(|(i, a)| match (a.imp, a.source) {
            (AttrImpl::InheritedByCopy, Some(src)) => {
                let up = graph.object(src).attrs[i];
                Some(if up.imp == AttrImpl::InheritedByReference { up.source.unwrap_or(src) } else { src })
            }
            _ => None,
        })
        .collect();
    for (a, h) in graph.object_mut(oid).attrs.iter_mut().zip(holders) {
        if let Some(h) = h {
            a.imp = AttrImpl::InheritedByReference;
            a.source = Some(h);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CkPlacement {
    pub page: PageId,
    pub variant: Variant,
    pub table: CkCostTable,
}

#[derive(Debug)]
pub struct Ck {
    params: CkParams,
}

impl Ck {
    pub fn new(config: &SimConfig) -> Self {
        Ck { params: config.ck.clone() }
    }

    /// Places the newly created `oid` on the cheapest candidate page.
    pub fn cluster_object(
        &self,
        graph: &mut ObjectGraph,
        store: &mut PageStore,
        config: &SimConfig,
        oid: Oid,
    ) -> Result<CkPlacement> {
        self.place(graph, store, config, oid, true)
    }

    fn place(
        &self,
        graph: &mut ObjectGraph,
        store: &mut PageStore,
        config: &SimConfig,
        oid: Oid,
        new_object: bool,
    ) -> Result<CkPlacement> {
        let table = cost_table(graph, store, config, oid);
        let sizes = if new_object {
            variant_sizes(graph, config, oid)
        } else {
            [graph.size_of(oid, config); 2]
        };
        let free = |p: PageId| store.free_bytes(p).unwrap_or(0);
        let mut dirtied = Dirtied::default();
        let (page, variant) = if table.candidates.is_empty() {
            let page = match least_filled(store, sizes[1]) {
                Some(p) => p,
                None => fresh_page(store)?,
            };
            (page, Variant::Cache)
        } else if let Some(choice) = table.choose(free, sizes) {
            choice
        } else {
            let (_, best, variant) = table.ranked()[0];
            let size = sizes[variant as usize - 1];
            let page = match self.params.cluster_policy {
                SplitPolicy::NoSplit => fresh_page(store)?,
                SplitPolicy::PageSplit => {
                    let other = split_page(graph, store, config, best, &mut dirtied)?;
                    if free_of(store, best) >= size {
                        best
                    } else if free_of(store, other) >= size {
                        other
                    } else {
                        fresh_page(store)?
                    }
                }
            };
            (page, variant)
        };
        if new_object && variant == Variant::Reference {
            demote_copies(graph, oid);
        }
        put(graph, store, config, oid, page, &mut dirtied)?;
        dirtied.flush(store)?;
        Ok(CkPlacement { page, variant, table })
    }
}

fn free_of(store: &PageStore, page: PageId) -> u32 {
    store.free_bytes(page).unwrap_or(0)
}

/// The emptiest page with room for `size` bytes, lowest id on ties.
fn least_filled(store: &PageStore, size: u32) -> Option<PageId> {
    store
        .pages()
        .filter(|p| store.page_size() - p.used_bytes >= size)
        .min_by_key(|p| (p.used_bytes, p.id))
        .map(|p| p.id)
}

/// Moves the heavier half of `page`'s residents (by bytes) to a new page
/// and returns that page.
fn split_page(
    graph: &ObjectGraph,
    store: &mut PageStore,
    config: &SimConfig,
    page: PageId,
    dirtied: &mut Dirtied,
) -> Result<PageId> {
    store.fetch_page(page, IoCause::Clustering)?;
    let residents = store.page(page).expect("candidate page exists").residents.clone();
    let (first, second) = residents.split_at(residents.len() / 2);
    let bytes = |half: &[Oid]| -> u32 { half.iter().filter_map(|&o| store.stored_size(o)).sum() };
    let moved = if bytes(first) > bytes(second) { first } else { second };
    let target = fresh_page(store)?;
    for &o in moved {
        put(graph, store, config, o, target, dirtied)?;
    }
    dirtied.add(page);
    Ok(target)
}

impl ClusteringPolicy for Ck {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Ck
    }

    fn load(&mut self, graph: &mut ObjectGraph, store: &mut PageStore, config: &SimConfig) -> Result<()> {
        for oid in graph.oids().collect::<Vec<_>>() {
            self.cluster_object(graph, store, config, oid)?;
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
        self.cluster_object(graph, store, config, oid).map(|_| ())
    }

    fn relocate(&mut self, graph: &mut ObjectGraph, store: &mut PageStore, config: &SimConfig, oid: Oid) -> Result<()> {
        self.place(graph, store, config, oid, false).map(|_| ())
    }

    fn reorganizes(&self) -> bool {
        false
    }

    fn on_recluster(&mut self, _graph: &mut ObjectGraph, _store: &mut PageStore, _config: &SimConfig) -> Result<()> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_schema, AttrValue, ClassId, EdgeProbs, RelKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (SimConfig, ObjectGraph, PageStore) {
        let config = SimConfig { ncl: 1, mnattr: 1, psuper: 0.0, pcomp: 0.0, pequi: 0.0, ..SimConfig::default() };
        let mut schema = generate_schema(&config, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        schema[0].attr_specs.truncate(1);
        let g = ObjectGraph::empty(schema, EdgeProbs::from_config(&config));
        (config.with_policy(PolicyKind::Ck), g, PageStore::new(2048, 10))
    }

    fn obj(g: &mut ObjectGraph) -> Oid {
        g.push_object(ClassId(0), &mut ChaCha8Rng::seed_from_u64(0))
    }

    #[test]
    fn weight_is_reciprocal() {
        let (mut config, mut g, mut store) = setup();
        config.ck.prob_configuration = 0.5;
        let g2 = ObjectGraph::empty(g.classes.clone(), EdgeProbs::from_config(&config));
        g = g2;
        let a = obj(&mut g);
        let b = obj(&mut g);
        g.link(RelKind::Configuration, a, b);
        let p = store.allocate_page();
        store.place_object(a, g.size_of(a, &config), p).unwrap();
        let t = cost_table(&g, &store, &config, b);
        assert_eq!(t.candidates.len(), 1);
        assert_eq!(t.candidates[0].weight, 2.0);
    }

    #[test]
    fn reference_source_page_is_free() {
        let (mut config, mut g, mut store) = setup();
        config.ck.prob_version = 1.0;
        config.ck.prob_configuration = 1.0;
        g = ObjectGraph::empty(g.classes.clone(), EdgeProbs::from_config(&config));
        let src = obj(&mut g);
        let other = obj(&mut g);
        let t = obj(&mut g);
        g.link(RelKind::Configuration, other, t);
        g.object_mut(t).attrs[0] =
            AttrValue { attr_id: 0, value: 1, imp: AttrImpl::InheritedByReference, source: Some(src) };
        let p1 = store.allocate_page();
        let p2 = store.allocate_page();
        store.place_object(src, 12, p1).unwrap();
        store.place_object(other, 12, p2).unwrap();
        let table = cost_table(&g, &store, &config, t);
        let cost = |p| table.candidates.iter().find(|c| c.page == p).unwrap().total;
        assert_eq!(cost(p1), [0.0, 0.0]);
        assert_eq!(cost(p2), [1.0, 1.0]);
        let placed = Ck::new(&config).cluster_object(&mut g, &mut store, &config, t).unwrap();
        assert_eq!(placed.page, p1);
    }

    #[test]
    fn full_candidate_falls_to_next_min() {
        let (mut config, mut g, mut store) = setup();
        config.ck.prob_version = 1.0;
        g = ObjectGraph::empty(g.classes.clone(), EdgeProbs::from_config(&config));
        let src = obj(&mut g);
        let other = obj(&mut g);
        let t = obj(&mut g);
        g.link(RelKind::Equivalence, t, other);
        g.object_mut(t).attrs[0] =
            AttrValue { attr_id: 0, value: 1, imp: AttrImpl::InheritedByReference, source: Some(src) };
        let p1 = store.allocate_page();
        let p2 = store.allocate_page();
        store.place_object(src, 2048, p1).unwrap();
        store.place_object(other, 12, p2).unwrap();
        let placed = Ck::new(&config).cluster_object(&mut g, &mut store, &config, t).unwrap();
        assert_eq!(placed.table.ranked()[0].1, p1);
        assert_eq!(placed.page, p2);
    }

    #[test]
    fn nothing_fits_no_split_opens_page() {
        let (config, mut g, mut store) = setup();
        let a = obj(&mut g);
        let b = obj(&mut g);
        g.link(RelKind::Version, a, b);
        let p = store.allocate_page();
        store.place_object(a, 2048, p).unwrap();
        let placed = Ck::new(&config).cluster_object(&mut g, &mut store, &config, b).unwrap();
        assert_ne!(placed.page, p);
        assert_eq!(store.allocated_pages(), 2);
    }

    #[test]
    fn page_split_moves_heavier_half() {
        let (mut config, mut g, mut store) = setup();
        config.ck.cluster_policy = SplitPolicy::PageSplit;
        let olds: Vec<Oid> = (0..4).map(|_| obj(&mut g)).collect();
        let t = obj(&mut g);
        g.link(RelKind::Version, olds[0], t);
        let p = store.allocate_page();
        for (o, s) in olds.iter().zip([500, 500, 524, 524]) {
            store.place_object(*o, s, p).unwrap();
        }
        let placed = Ck::new(&config).cluster_object(&mut g, &mut store, &config, t).unwrap();
        assert_eq!(placed.page, p);
        assert_eq!(store.lookup_page(olds[0]).unwrap(), p);
        assert_ne!(store.lookup_page(olds[2]).unwrap(), p);
        store.check_invariants().unwrap();
    }

    #[test]
    fn unrelated_object_goes_to_least_filled() {
        let (config, mut g, mut store) = setup();
        let a = obj(&mut g);
        let b = obj(&mut g);
        let c = obj(&mut g);
        let p1 = store.allocate_page();
        let p2 = store.allocate_page();
        store.place_object(a, 600, p1).unwrap();
        store.place_object(b, 100, p2).unwrap();
        let placed = Ck::new(&config).cluster_object(&mut g, &mut store, &config, c).unwrap();
        assert_eq!(placed.page, p2);
        assert!(placed.table.candidates.is_empty());
    }

    #[test]
    fn reference_variant_demotes_copies() {
        let (config, mut g, mut store) = setup();
        let anc = obj(&mut g);
        let other = obj(&mut g);
        let t = obj(&mut g);
        g.link(RelKind::Configuration, other, t);
        g.object_mut(t).attrs[0] = AttrValue { attr_id: 0, value: 1, imp: AttrImpl::InheritedByCopy, source: Some(anc) };
        let p1 = store.allocate_page();
        let p2 = store.allocate_page();
        store.place_object(anc, 12, p1).unwrap();
        store.place_object(other, 12, p2).unwrap();
        let placed = Ck::new(&config).cluster_object(&mut g, &mut store, &config, t).unwrap();
        assert_eq!(placed.page, p1);
        assert_eq!(placed.variant, Variant::Reference);
        assert_eq!(g.object(t).attrs[0].imp, AttrImpl::InheritedByReference);
        assert_eq!(g.object(t).attrs[0].source, Some(anc));
    }
}
