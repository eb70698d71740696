//! Synthetic object database: class schema, instances and the three
//! structural relationships (version, configuration, equivalence), with the
//! usage statistics the clustering policies read.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::config::SimConfig;
use crate::error::{Result, SimError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Oid(pub u32);

impl Oid {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Oid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "o{}", self.0)
    }
}

/// Zero-based class index; displayed 1-based as `C1`, `C2`, ...
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassId(pub u32);

impl ClassId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.0 + 1)
    }
}

impl FromStr for ClassId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let digits = s.strip_prefix(['C', 'c']).unwrap_or(s);
        match digits.parse::<u32>() {
            Ok(n) if n >= 1 => Ok(ClassId(n - 1)),
            _ => Err(format!("bad class name `{s}` (expected C1, C2, ... or 1, 2, ...)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttrSpec {
    pub attr_id: u32,
    pub size_words: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassDef {
    pub class_id: ClassId,
    pub attr_specs: Vec<AttrSpec>,
    pub superclass: Option<ClassId>,
    /// Instances of this class are components of instances of the named class.
    pub component_of: Option<ClassId>,
    pub equivalent_to: Option<ClassId>,
    pub mean_versions: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttrImpl {
    Owned,
    InheritedByCopy,
    InheritedByReference,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttrValue {
    pub attr_id: u32,
    pub value: u32,
    pub imp: AttrImpl,
    /// Version ancestor holding the inherited value.
    pub source: Option<Oid>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelKind {
    Version,
    Configuration,
    Equivalence,
}

impl RelKind {
    pub const ALL: [RelKind; 3] = [RelKind::Version, RelKind::Configuration, RelKind::Equivalence];
}

impl fmt::Display for RelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelKind::Version => "version",
            RelKind::Configuration => "configuration",
            RelKind::Equivalence => "equivalence",
        })
    }
}

/// Forward edges run ancestor to descendant, composite to component, and
/// from an instance to its equivalent partner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Reverse,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelEdge {
    pub kind: RelKind,
    pub direction: Direction,
    pub target: Oid,
    pub usage_count: u64,
    pub access_prob: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectInstance {
    pub oid: Oid,
    pub class_id: ClassId,
    pub attrs: Vec<AttrValue>,
    pub edges: Vec<RelEdge>,
    pub access_count: u64,
}

impl ObjectInstance {
    pub fn edges_of(&self, kind: RelKind, direction: Direction) -> impl Iterator<Item = &RelEdge> {
        self.edges
            .iter()
            .filter(move |e| e.kind == kind && e.direction == direction)
    }

    /// The immediate version ancestor, if any.
    pub fn version_parent(&self) -> Option<Oid> {
        self.edges_of(RelKind::Version, Direction::Reverse).next().map(|e| e.target)
    }
}

/// Per-kind access probabilities attached to edges when they are created.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeProbs {
    pub version: f64,
    pub configuration: f64,
    pub equivalence: f64,
}

impl EdgeProbs {
    pub fn from_config(config: &SimConfig) -> Self {
        EdgeProbs {
            version: config.ck.prob_version,
            configuration: config.ck.prob_configuration,
            equivalence: config.ck.prob_equivalence,
        }
    }

    pub fn get(&self, kind: RelKind) -> f64 {
        match kind {
            RelKind::Version => self.version,
            RelKind::Configuration => self.configuration,
            RelKind::Equivalence => self.equivalence,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectGraph {
    pub classes: Vec<ClassDef>,
    objects: Vec<ObjectInstance>,
    extents: Vec<Vec<Oid>>,
    probs: EdgeProbs,
}

/// Result of instantiating one object after the initial load.
#[derive(Clone, Debug, PartialEq)]
pub struct Creation {
    pub oid: Oid,
    /// Existing objects that gained a relationship to the new one.
    pub touched: Vec<Oid>,
}

/// Uniform integer on `[1, 2·mean − 1]`, whose mean is exactly `mean`.
pub fn draw_around_mean<R: Rng + ?Sized>(rng: &mut R, mean: u32) -> u32 {
    rng.random_range(1..=2 * mean.max(1) - 1)
}

pub fn generate_schema<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Result<Vec<ClassDef>> {
    if config.ncl == 0 {
        return Err(SimError::InvalidConfig("NCL must be at least 1".into()));
    }
    for p in [config.psuper, config.pcomp, config.pequi] {
        if !(0.0..=1.0).contains(&p) {
            return Err(SimError::InvalidConfig("class link probabilities must lie in [0, 1]".into()));
        }
    }
    let mut classes = Vec::with_capacity(config.ncl);
    for i in 0..config.ncl as u32 {
        // Links only point at earlier classes; the class graph is acyclic.
        let mut link = |p: f64| -> Option<ClassId> {
            if i > 0 && rng.random_bool(p) {
                Some(ClassId(rng.random_range(0..i)))
            } else {
                None
            }
        };
        let superclass = link(config.psuper);
        let component_of = link(config.pcomp);
        let equivalent_to = link(config.pequi);
        let n_attrs = draw_around_mean(rng, config.mnattr);
        let attr_specs = (0..n_attrs)
            .map(|attr_id| AttrSpec { attr_id, size_words: draw_around_mean(rng, config.msattr) })
            .collect();
        classes.push(ClassDef {
            class_id: ClassId(i),
            attr_specs,
            superclass,
            component_of,
            equivalent_to,
            mean_versions: config.mnver,
        });
    }
    Ok(classes)
}

/// Builds the initial database of `nobj` instances.
///
/// Each class's instances (in oid order) are cut into consecutive version
/// chains of length drawn around `mean_versions`; later versions inherit
/// attribute values from their immediate ancestor. A component-class
/// instance is attached to one random instance of its composite class, and
/// an instance of a class with an equivalent class is paired with one
/// random instance of that class.
pub fn generate_database<R: Rng + ?Sized>(
    schema: Vec<ClassDef>,
    nobj: usize,
    config: &SimConfig,
    rng: &mut R,
) -> Result<ObjectGraph> {
    if schema.is_empty() {
        return Err(SimError::InvalidConfig("schema has no classes".into()));
    }
    if nobj == 0 {
        return Err(SimError::InvalidConfig("NOBJ must be at least 1".into()));
    }
    let mut graph = ObjectGraph::empty(schema, EdgeProbs::from_config(config));
    let n_classes = graph.classes.len() as u32;
    for _ in 0..nobj {
        let class_id = ClassId(rng.random_range(0..n_classes));
        graph.push_object(class_id, rng);
    }

    for c in 0..graph.classes.len() {
        let extent = graph.extents[c].clone();
        let mut rest = extent.as_slice();
        while !rest.is_empty() {
            let len = (draw_around_mean(rng, graph.classes[c].mean_versions) as usize).min(rest.len());
            let (chain, tail) = rest.split_at(len);
            for pair in chain.windows(2) {
                graph.link(RelKind::Version, pair[0], pair[1]);
                graph.inherit_attrs(pair[1], pair[0], config.p_copy, rng);
            }
            rest = tail;
        }
    }

    for c in 0..graph.classes.len() {
        let class = graph.classes[c].clone();
        for oid in graph.extents[c].clone() {
            if let Some(owner) = class.component_of {
                if let Some(composite) = graph.random_instance(owner, rng) {
                    graph.link(RelKind::Configuration, composite, oid);
                }
            }
            if let Some(other) = class.equivalent_to {
                if let Some(partner) = graph.random_instance(other, rng) {
                    graph.link(RelKind::Equivalence, oid, partner);
                }
            }
        }
    }
    Ok(graph)
}

/// Adds one instance of `class_id` as the newest version of a uniformly
/// chosen existing chain of the class (a new chain when the class is
/// empty). Each attribute is inherited from the ancestor by copy with
/// probability `p_copy`, by reference otherwise.
pub fn create_instance<R: Rng + ?Sized>(
    graph: &mut ObjectGraph,
    class_id: ClassId,
    p_copy: f64,
    rng: &mut R,
) -> Result<Creation> {
    let class = graph
        .classes
        .get(class_id.index())
        .cloned()
        .ok_or(SimError::UnknownClass(class_id))?;
    let tails: Vec<Oid> = graph.extents[class_id.index()]
        .iter()
        .copied()
        .filter(|&o| graph.object(o).edges_of(RelKind::Version, Direction::Forward).next().is_none())
        .collect();
    let ancestor = if tails.is_empty() { None } else { Some(tails[rng.random_range(0..tails.len())]) };

    let oid = graph.push_object(class_id, rng);
    let mut touched = Vec::new();
    if let Some(anc) = ancestor {
        graph.link(RelKind::Version, anc, oid);
        graph.inherit_attrs(oid, anc, p_copy, rng);
        touched.push(anc);
    }
    if let Some(owner) = class.component_of {
        // A new version stays part of its ancestor's composite.
        let composite = ancestor
            .and_then(|a| {
                graph.object(a).edges_of(RelKind::Configuration, Direction::Reverse).next().map(|e| e.target)
            })
            .or_else(|| graph.random_instance(owner, rng));
        if let Some(comp) = composite {
            graph.link(RelKind::Configuration, comp, oid);
            touched.push(comp);
        }
    }
    if let Some(other) = class.equivalent_to {
        if let Some(partner) = graph.random_instance(other, rng) {
            graph.link(RelKind::Equivalence, oid, partner);
            touched.push(partner);
        }
    }
    touched.sort();
    touched.dedup();
    Ok(Creation { oid, touched })
}

/// Stored size: header words, every owned or copied attribute, one word per
/// by-reference attribute and one word per relationship edge.
pub fn object_size_bytes(obj: &ObjectInstance, class: &ClassDef, config: &SimConfig) -> u32 {
    let mut words = config.objhdr_words;
    for (attr, spec) in obj.attrs.iter().zip(&class.attr_specs) {
        words += match attr.imp {
            AttrImpl::Owned | AttrImpl::InheritedByCopy => spec.size_words,
            AttrImpl::InheritedByReference => 1,
        };
    }
    words += obj.edges.len() as u32;
    words * config.wdsize
}

impl ObjectGraph {
    pub fn empty(classes: Vec<ClassDef>, probs: EdgeProbs) -> Self {
        let extents = vec![Vec::new(); classes.len()];
        ObjectGraph { classes, objects: Vec::new(), extents, probs }
    }

    /// Generates schema and database from `config` using the given stream.
    pub fn generate<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Result<Self> {
        let schema = generate_schema(config, rng)?;
        generate_database(schema, config.nobj, config, rng)
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn next_oid(&self) -> Oid {
        Oid(self.objects.len() as u32)
    }

    pub fn contains(&self, oid: Oid) -> bool {
        oid.index() < self.objects.len()
    }

    pub fn object(&self, oid: Oid) -> &ObjectInstance {
        &self.objects[oid.index()]
    }

    pub fn object_mut(&mut self, oid: Oid) -> &mut ObjectInstance {
        &mut self.objects[oid.index()]
    }

    pub fn objects(&self) -> impl Iterator<Item = &ObjectInstance> {
        self.objects.iter()
    }

    pub fn oids(&self) -> impl Iterator<Item = Oid> {
        (0..self.objects.len() as u32).map(Oid)
    }

    pub fn class(&self, id: ClassId) -> &ClassDef {
        &self.classes[id.index()]
    }

    pub fn class_of(&self, oid: Oid) -> &ClassDef {
        self.class(self.object(oid).class_id)
    }

    /// Instances of a class in oid order.
    pub fn extent(&self, id: ClassId) -> &[Oid] {
        &self.extents[id.index()]
    }

    pub fn edge_probs(&self) -> EdgeProbs {
        self.probs
    }

    pub fn size_of(&self, oid: Oid, config: &SimConfig) -> u32 {
        object_size_bytes(self.object(oid), self.class_of(oid), config)
    }

    /// Adds an object with owned attributes drawn uniformly from `[0, 99]`.
    pub fn push_object<R: Rng + ?Sized>(&mut self, class_id: ClassId, rng: &mut R) -> Oid {
        let oid = self.next_oid();
        let attrs = self.classes[class_id.index()]
            .attr_specs
            .iter()
            .map(|spec| AttrValue {
                attr_id: spec.attr_id,
                value: rng.random_range(0..100),
                imp: AttrImpl::Owned,
                source: None,
            })
            .collect();
        self.objects.push(ObjectInstance { oid, class_id, attrs, edges: Vec::new(), access_count: 0 });
        self.extents[class_id.index()].push(oid);
        oid
    }

    /// Adds a forward edge `from -> to` and its mirror `to -> from`.
    pub fn link(&mut self, kind: RelKind, from: Oid, to: Oid) {
        let access_prob = self.probs.get(kind);
        self.objects[from.index()].edges.push(RelEdge {
            kind,
            direction: Direction::Forward,
            target: to,
            usage_count: 0,
            access_prob,
        });
        self.objects[to.index()].edges.push(RelEdge {
            kind,
            direction: Direction::Reverse,
            target: from,
            usage_count: 0,
            access_prob,
        });
    }

    fn inherit_attrs<R: Rng + ?Sized>(&mut self, child: Oid, ancestor: Oid, p_copy: f64, rng: &mut R) {
        let parent_attrs = self.objects[ancestor.index()].attrs.clone();
        for (attr, parent) in self.objects[child.index()].attrs.iter_mut().zip(parent_attrs) {
            attr.value = parent.value;
            if rng.random_bool(p_copy) {
                attr.imp = AttrImpl::InheritedByCopy;
                attr.source = Some(ancestor);
            } else {
                attr.imp = AttrImpl::InheritedByReference;
                // Reference the ancestor that actually stores the value.
                attr.source = match parent.imp {
                    AttrImpl::InheritedByReference => parent.source,
                    _ => Some(ancestor),
                };
            }
        }
    }

    fn random_instance<R: Rng + ?Sized>(&self, class: ClassId, rng: &mut R) -> Option<Oid> {
        let extent = &self.extents[class.index()];
        if extent.is_empty() {
            None
        } else {
            Some(extent[rng.random_range(0..extent.len())])
        }
    }

    pub fn record_access(&mut self, oid: Oid) {
        self.objects[oid.index()].access_count += 1;
    }

    /// Counts one crossing of `from`'s edge of `kind`/`direction` to `to`.
    pub fn record_crossing(&mut self, from: Oid, to: Oid, kind: RelKind, direction: Direction) {
        if let Some(edge) = self.objects[from.index()]
            .edges
            .iter_mut()
            .find(|e| e.target == to && e.kind == kind && e.direction == direction)
        {
            edge.usage_count += 1;
        }
    }

    /// Usage of a relationship summed over both of its stored directions.
    pub fn total_usage(&self, a: Oid, b: Oid, kind: RelKind) -> u64 {
        let side = |x: Oid, y: Oid| -> u64 {
            self.objects[x.index()]
                .edges
                .iter()
                .filter(|e| e.target == y && e.kind == kind)
                .map(|e| e.usage_count)
                .sum()
        };
        side(a, b) + side(b, a)
    }

    /// Every edge has its mirror on the target.
    pub fn edges_symmetric(&self) -> bool {
        self.objects.iter().all(|obj| {
            obj.edges.iter().all(|e| {
                self.contains(e.target) && {
                    let mirror = match e.direction {
                        Direction::Forward => Direction::Reverse,
                        Direction::Reverse => Direction::Forward,
                    };
                    let want = obj.edges.iter().filter(|x| x.target == e.target && x.kind == e.kind && x.direction == e.direction).count();
                    let have = self.objects[e.target.index()]
                        .edges
                        .iter()
                        .filter(|x| x.target == obj.oid && x.kind == e.kind && x.direction == mirror)
                        .count();
                    want == have
                }
            })
        })
    }

    /// Lengths of all version chains (one entry per chain root).
    pub fn version_chain_lengths(&self) -> Vec<usize> {
        self.objects
            .iter()
            .filter(|o| o.version_parent().is_none())
            .map(|root| {
                let mut len = 1;
                let mut cur = root.oid;
                while let Some(next) =
                    self.object(cur).edges_of(RelKind::Version, Direction::Forward).next().map(|e| e.target)
                {
                    len += 1;
                    cur = next;
                }
                len
            })
            .collect()
    }
}
