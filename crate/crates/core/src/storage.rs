//! Pages, ORION segments, the object-to-page directory, the FIFO buffer and
//! the disk cost model. I/O counters are split by cause.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use crate::config::SimConfig;
use crate::error::{Result, SimError};
use crate::model::{ClassId, Oid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PageId(pub u32);

impl fmt::Display for PageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SegmentId(pub u32);

/// Cost of one page read or write: seek + latency + transfer.
pub fn io_time_ms(config: &SimConfig) -> f64 {
    config.seek_ms + config.latency_ms + config.transfer_ms
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IoCause {
    Transaction,
    Clustering,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IoCounters {
    pub txn_reads: u64,
    pub txn_writes: u64,
    pub clust_reads: u64,
    pub clust_writes: u64,
}

impl IoCounters {
    pub fn txn(&self) -> u64 {
        self.txn_reads + self.txn_writes
    }

    pub fn clust(&self) -> u64 {
        self.clust_reads + self.clust_writes
    }

    pub fn total(&self) -> u64 {
        self.txn() + self.clust()
    }

    fn read(&mut self, cause: IoCause) {
        match cause {
            IoCause::Transaction => self.txn_reads += 1,
            IoCause::Clustering => self.clust_reads += 1,
        }
    }

    fn write(&mut self, cause: IoCause) {
        match cause {
            IoCause::Transaction => self.txn_writes += 1,
            IoCause::Clustering => self.clust_writes += 1,
        }
    }
}

impl std::ops::Sub for IoCounters {
    type Output = IoCounters;

    fn sub(self, rhs: IoCounters) -> IoCounters {
        IoCounters {
            txn_reads: self.txn_reads - rhs.txn_reads,
            txn_writes: self.txn_writes - rhs.txn_writes,
            clust_reads: self.clust_reads - rhs.clust_reads,
            clust_writes: self.clust_writes - rhs.clust_writes,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Page {
    pub id: PageId,
    pub used_bytes: u32,
    pub residents: Vec<Oid>,
    pub dirty: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub id: SegmentId,
    pub member_classes: BTreeSet<ClassId>,
    pub pages: Vec<PageId>,
}

/// Main-memory buffer. Replacement drops the page that was loaded first;
/// re-referencing a resident page does not change its position.
#[derive(Clone, Debug)]
pub struct Buffer {
    capacity: usize,
    resident: VecDeque<PageId>,
    members: HashSet<PageId>,
}

impl Buffer {
    pub fn new(capacity: usize) -> Self {
        Buffer { capacity: capacity.max(1), resident: VecDeque::new(), members: HashSet::new() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn contains(&self, page: PageId) -> bool {
        self.members.contains(&page)
    }

    pub fn len(&self) -> usize {
        self.resident.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resident.is_empty()
    }

    /// Resident pages, oldest first.
    pub fn pages(&self) -> impl Iterator<Item = PageId> + '_ {
        self.resident.iter().copied()
    }

    /// Appends `page` as newest; returns the evicted page if the buffer was full.
    fn push(&mut self, page: PageId) -> Option<PageId> {
        let victim = if self.resident.len() >= self.capacity {
            let v = self.resident.pop_front();
            if let Some(v) = v {
                self.members.remove(&v);
            }
            v
        } else {
            None
        };
        self.resident.push_back(page);
        self.members.insert(page);
        victim
    }

    fn remove(&mut self, page: PageId) {
        if self.members.remove(&page) {
            self.resident.retain(|&p| p != page);
        }
    }

    fn clear(&mut self) {
        self.resident.clear();
        self.members.clear();
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fetch {
    Hit,
    Miss,
}

#[derive(Clone, Debug)]
pub struct PageStore {
    page_size: u32,
    pages: BTreeMap<PageId, Page>,
    next_page: u32,
    directory: Vec<Option<PageId>>,
    sizes: Vec<u32>,
    buffer: Buffer,
    io: IoCounters,
    segments: BTreeMap<SegmentId, Segment>,
    class_segment: HashMap<ClassId, SegmentId>,
    page_segment: HashMap<PageId, SegmentId>,
    next_segment: u32,
}

impl PageStore {
    pub fn new(page_size: u32, buffer_pages: usize) -> Self {
        PageStore {
            page_size,
            pages: BTreeMap::new(),
            next_page: 0,
            directory: Vec::new(),
            sizes: Vec::new(),
            buffer: Buffer::new(buffer_pages),
            io: IoCounters::default(),
            segments: BTreeMap::new(),
            class_segment: HashMap::new(),
            page_segment: HashMap::new(),
            next_segment: 0,
        }
    }

    pub fn from_config(config: &SimConfig) -> Self {
        Self::new(config.pgsize, config.bufsize)
    }

    pub fn page_size(&self) -> u32 {
        self.page_size
    }

    pub fn io(&self) -> IoCounters {
        self.io
    }

    pub fn buffer(&self) -> &Buffer {
        &self.buffer
    }

    pub fn page(&self, id: PageId) -> Option<&Page> {
        self.pages.get(&id)
    }

    pub fn pages(&self) -> impl Iterator<Item = &Page> {
        self.pages.values()
    }

    pub fn page_ids(&self) -> Vec<PageId> {
        self.pages.keys().copied().collect()
    }

    pub fn allocated_pages(&self) -> usize {
        self.pages.len()
    }

    /// Allocated pages holding at least one object.
    pub fn pages_used(&self) -> usize {
        self.pages.values().filter(|p| !p.residents.is_empty()).count()
    }

    pub fn free_bytes(&self, id: PageId) -> Result<u32> {
        let page = self.pages.get(&id).ok_or(SimError::UnknownPage(id))?;
        Ok(self.page_size - page.used_bytes)
    }

    pub fn is_placed(&self, oid: Oid) -> bool {
        self.directory.get(oid.index()).copied().flatten().is_some()
    }

    pub fn lookup_page(&self, oid: Oid) -> Result<PageId> {
        self.directory.get(oid.index()).copied().flatten().ok_or(SimError::DirectoryMiss(oid))
    }

    /// Size recorded for a placed object.
    pub fn stored_size(&self, oid: Oid) -> Option<u32> {
        if self.is_placed(oid) {
            Some(self.sizes[oid.index()])
        } else {
            None
        }
    }

    pub fn allocate_page(&mut self) -> PageId {
        let id = PageId(self.next_page);
        self.next_page += 1;
        self.pages.insert(id, Page { id, used_bytes: 0, residents: Vec::new(), dirty: false });
        id
    }

    /// Removes an empty page from the store, the buffer and its segment.
    pub fn free_page(&mut self, id: PageId) -> Result<()> {
        let page = self.pages.get(&id).ok_or(SimError::UnknownPage(id))?;
        if !page.residents.is_empty() {
            return Err(SimError::NonEmptyFree(id));
        }
        self.pages.remove(&id);
        self.buffer.remove(id);
        if let Some(seg) = self.page_segment.remove(&id) {
            if let Some(s) = self.segments.get_mut(&seg) {
                s.pages.retain(|&p| p != id);
            }
        }
        Ok(())
    }

    /// Brings `id` into the buffer. A miss costs one read charged to
    /// `cause`, preceded by a write if the evicted page is dirty.
    pub fn fetch_page(&mut self, id: PageId, cause: IoCause) -> Result<Fetch> {
        if !self.pages.contains_key(&id) {
            return Err(SimError::UnknownPage(id));
        }
        if self.buffer.contains(id) {
            return Ok(Fetch::Hit);
        }
        self.make_room(cause);
        self.io.read(cause);
        self.buffer.push(id);
        Ok(Fetch::Miss)
    }

    /// Installs a page that was just allocated; nothing is read from disk.
    pub fn admit_new_page(&mut self, id: PageId, cause: IoCause) -> Result<()> {
        if !self.pages.contains_key(&id) {
            return Err(SimError::UnknownPage(id));
        }
        if !self.buffer.contains(id) {
            self.make_room(cause);
            self.buffer.push(id);
        }
        Ok(())
    }

    fn make_room(&mut self, cause: IoCause) {
        if self.buffer.len() < self.buffer.capacity() {
            return;
        }
        if let Some(&victim) = self.buffer.resident.front() {
            if let Some(page) = self.pages.get_mut(&victim) {
                if page.dirty {
                    page.dirty = false;
                    self.io.write(cause);
                }
            }
            self.buffer.resident.pop_front();
            self.buffer.members.remove(&victim);
        }
    }

    /// Writes `id` if it is dirty.
    pub fn write_page(&mut self, id: PageId, cause: IoCause) -> Result<bool> {
        let page = self.pages.get_mut(&id).ok_or(SimError::UnknownPage(id))?;
        if page.dirty {
            page.dirty = false;
            self.io.write(cause);
            Ok(true)
        } else {
            Ok(false)
        }
    }

    pub fn mark_dirty(&mut self, id: PageId) -> Result<()> {
        self.pages.get_mut(&id).ok_or(SimError::UnknownPage(id))?.dirty = true;
        Ok(())
    }

    /// Puts `oid` (of `size` bytes) on `page`, releasing its previous page.
    pub fn place_object(&mut self, oid: Oid, size: u32, page: PageId) -> Result<()> {
        if size > self.page_size {
            return Err(SimError::ObjectTooLarge { oid, size, page_size: self.page_size });
        }
        let current = self.directory.get(oid.index()).copied().flatten();
        if current == Some(page) {
            return self.resize_object(oid, size);
        }
        let target = self.pages.get(&page).ok_or(SimError::UnknownPage(page))?;
        let free = self.page_size - target.used_bytes;
        if size > free {
            return Err(SimError::PageFull { page, free, needed: size });
        }
        if let Some(old) = current {
            let old_size = self.sizes[oid.index()];
            let old_page = self.pages.get_mut(&old).expect("directory points at live page");
            old_page.used_bytes -= old_size;
            old_page.residents.retain(|&o| o != oid);
        }
        let target = self.pages.get_mut(&page).expect("checked above");
        target.used_bytes += size;
        target.residents.push(oid);
        target.dirty = true;
        if self.directory.len() <= oid.index() {
            self.directory.resize(oid.index() + 1, None);
            self.sizes.resize(oid.index() + 1, 0);
        }
        self.directory[oid.index()] = Some(page);
        self.sizes[oid.index()] = size;
        Ok(())
    }

    /// Records a new size for a placed object that stays on its page.
    pub fn resize_object(&mut self, oid: Oid, size: u32) -> Result<()> {
        let page_id = self.lookup_page(oid)?;
        let old = self.sizes[oid.index()];
        if old == size {
            return Ok(());
        }
        let page = self.pages.get_mut(&page_id).expect("directory points at live page");
        let free = self.page_size - page.used_bytes + old;
        if size > free {
            return Err(SimError::PageFull { page: page_id, free, needed: size });
        }
        page.used_bytes = page.used_bytes - old + size;
        page.dirty = true;
        self.sizes[oid.index()] = size;
        Ok(())
    }

    /// Empties the buffer, marks every page clean and zeroes the counters.
    /// Used once the initial database has been laid out.
    pub fn settle(&mut self) {
        self.buffer.clear();
        for page in self.pages.values_mut() {
            page.dirty = false;
        }
        self.io = IoCounters::default();
    }

    pub fn segment(&self, id: SegmentId) -> Option<&Segment> {
        self.segments.get(&id)
    }

    pub fn segments(&self) -> impl Iterator<Item = &Segment> {
        self.segments.values()
    }

    pub fn segment_of_class(&self, class: ClassId) -> Option<SegmentId> {
        self.class_segment.get(&class).copied()
    }

    pub fn segment_of_page(&self, page: PageId) -> Option<SegmentId> {
        self.page_segment.get(&page).copied()
    }

    /// Creates a segment owning `classes`; the classes leave their previous
    /// segments, whose pages stay in place until they are emptied.
    pub fn create_segment(&mut self, classes: &[ClassId]) -> SegmentId {
        let id = SegmentId(self.next_segment);
        self.next_segment += 1;
        for c in classes {
            if let Some(old) = self.class_segment.insert(*c, id) {
                if let Some(s) = self.segments.get_mut(&old) {
                    s.member_classes.remove(c);
                }
            }
        }
        self.segments.insert(
            id,
            Segment { id, member_classes: classes.iter().copied().collect(), pages: Vec::new() },
        );
        id
    }

    pub fn add_page_to_segment(&mut self, seg: SegmentId, page: PageId) -> Result<()> {
        if !self.pages.contains_key(&page) {
            return Err(SimError::UnknownPage(page));
        }
        if let Some(old) = self.page_segment.insert(page, seg) {
            if let Some(s) = self.segments.get_mut(&old) {
                s.pages.retain(|&p| p != page);
            }
        }
        self.segments.get_mut(&seg).expect("segment exists").pages.push(page);
        Ok(())
    }

    /// Drops segments that own neither classes nor pages.
    pub fn prune_segments(&mut self) {
        self.segments.retain(|_, s| !s.member_classes.is_empty() || !s.pages.is_empty());
    }

    /// Objects per page plus used bytes: every directory entry matches a
    /// resident list and every page's byte count matches its residents.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let mut seen = HashSet::new();
        for page in self.pages.values() {
            if page.used_bytes > self.page_size {
                return Err(format!("{} overfull: {} bytes", page.id, page.used_bytes));
            }
            let mut sum = 0;
            for &oid in &page.residents {
                if !seen.insert(oid) {
                    return Err(format!("{oid} resident on two pages"));
                }
                if self.lookup_page(oid).ok() != Some(page.id) {
                    return Err(format!("directory disagrees for {oid}"));
                }
                sum += self.sizes[oid.index()];
            }
            if sum != page.used_bytes {
                return Err(format!("{} used_bytes {} but residents sum to {}", page.id, page.used_bytes, sum));
            }
        }
        let placed = self.directory.iter().filter(|d| d.is_some()).count();
        if placed != seen.len() {
            return Err(format!("{placed} directory entries, {} residents", seen.len()));
        }
        if self.buffer.len() > self.buffer.capacity() {
            return Err("buffer over capacity".into());
        }
        Ok(())
    }
}
