use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::model::codec::encode_nquads;
use crate::model::{Document, EntityId, GraphId, Predicate, Value};

use super::locks::LockKey;

pub const LINKS_TO: &str = "linksTo";
pub const SAME_AS: &str = "sameAs";
/// Graph credited with writes made through the transactional API.
pub const REGISTRY_GRAPH: &str = "registry";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("entity {0} already exists")]
    EntityExists(EntityId),
    #[error("entity {0} not found")]
    EntityNotFound(EntityId),
    #[error("{entity} has no {predicate} = {value}")]
    PropertyNotFound { entity: EntityId, predicate: Predicate, value: String },
    #[error("({predicate}, {value}) is already held by {holder}")]
    UniquenessViolation { predicate: Predicate, value: String, holder: EntityId },
    #[error("{kind} link {a} - {b} already exists")]
    LinkExists { kind: LinkKind, a: EntityId, b: EntityId },
    #[error("{kind} link {a} - {b} not found")]
    LinkNotFound { kind: LinkKind, a: EntityId, b: EntityId },
    #[error("{0} is reserved for links")]
    ReservedPredicate(Predicate),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LinkKind {
    LinksTo,
    SameAs,
}

impl LinkKind {
    pub fn predicate(self) -> Predicate {
        Predicate::new(self.as_str()).expect("valid predicate")
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LinkKind::LinksTo => LINKS_TO,
            LinkKind::SameAs => SAME_AS,
        }
    }

    pub fn of(predicate: &Predicate) -> Option<LinkKind> {
        match predicate.as_str() {
            LINKS_TO => Some(LinkKind::LinksTo),
            SAME_AS => Some(LinkKind::SameAs),
            _ => None,
        }
    }
}

impl fmt::Display for LinkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which stored half of a bidirectional connection an entry is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LinkHalf {
    Original,
    Inverse,
    SelfInverse,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LinkEntry {
    pub half: LinkHalf,
    pub graph: GraphId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UniquenessMode {
    /// No two subjects share a (predicate, object) pair.
    Strict,
    /// Pairs are unique per subject only.
    Lax,
}

/// The nine atomic operations.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AtomicOp {
    InsertEntity(EntityId),
    InsertProperty(EntityId, Predicate, Value),
    UpdateProperty(EntityId, Predicate, Value, Value),
    DeleteProperty(EntityId, Predicate, Value),
    DeleteEntity(EntityId),
    ShallowCopy { source: EntityId, target: EntityId },
    DeepCopy { source: EntityId, target: EntityId },
    InsertLink(EntityId, EntityId),
    DeleteLink(EntityId, EntityId),
}

impl AtomicOp {
    pub fn code(&self) -> &'static str {
        match self {
            AtomicOp::InsertEntity(_) => "IE",
            AtomicOp::InsertProperty(..) => "IP",
            AtomicOp::UpdateProperty(..) => "UP",
            AtomicOp::DeleteProperty(..) => "DP",
            AtomicOp::DeleteEntity(_) => "DE",
            AtomicOp::ShallowCopy { .. } => "SC",
            AtomicOp::DeepCopy { .. } => "DC",
            AtomicOp::InsertLink(..) => "IL",
            AtomicOp::DeleteLink(..) => "DL",
        }
    }

    /// Locks this operation needs, a pure function of the operation.
    pub fn lock_demand(&self) -> Vec<LockKey> {
        let ep = |e: &EntityId, p: Predicate| LockKey::EntityProperty(e.clone(), p);
        match self {
            AtomicOp::InsertProperty(e, p, _)
            | AtomicOp::UpdateProperty(e, p, _, _)
            | AtomicOp::DeleteProperty(e, p, _) => vec![ep(e, p.clone())],
            AtomicOp::InsertLink(a, b) | AtomicOp::DeleteLink(a, b) => {
                vec![ep(a, LinkKind::LinksTo.predicate()), ep(b, LinkKind::LinksTo.predicate())]
            }
            AtomicOp::ShallowCopy { source, target } => {
                vec![ep(source, LinkKind::SameAs.predicate()), ep(target, LinkKind::SameAs.predicate())]
            }
            AtomicOp::InsertEntity(e) | AtomicOp::DeleteEntity(e) => vec![LockKey::Entity(e.clone())],
            AtomicOp::DeepCopy { source, target } => {
                vec![LockKey::Entity(source.clone()), LockKey::Entity(target.clone())]
            }
        }
    }
}

impl fmt::Display for AtomicOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = |e: &EntityId| e.short_form();
        match self {
            AtomicOp::InsertEntity(e) | AtomicOp::DeleteEntity(e) => write!(f, "{}({})", self.code(), s(e)),
            AtomicOp::InsertProperty(e, p, v) | AtomicOp::DeleteProperty(e, p, v) => {
                write!(f, "{}({}, {}, {})", self.code(), s(e), p, v.text())
            }
            AtomicOp::UpdateProperty(e, p, old, new) => {
                write!(f, "UP({}, {}, {} -> {})", s(e), p, old.text(), new.text())
            }
            AtomicOp::ShallowCopy { source, target } | AtomicOp::DeepCopy { source, target } => {
                write!(f, "{}({} -> {})", self.code(), s(source), s(target))
            }
            AtomicOp::InsertLink(a, b) | AtomicOp::DeleteLink(a, b) => {
                write!(f, "{}({}, {})", self.code(), s(a), s(b))
            }
        }
    }
}

/// Union of the lock demands of `ops`.
pub fn lock_demand(ops: &[AtomicOp]) -> BTreeSet<LockKey> {
    ops.iter().flat_map(AtomicOp::lock_demand).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct EntityRecord {
    pub properties: BTreeMap<(Predicate, Value), GraphId>,
    pub links: BTreeMap<(LinkKind, EntityId), LinkEntry>,
}

/// One stored statement as seen by readers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegistryTriple {
    pub subject: EntityId,
    pub predicate: Predicate,
    pub object: Value,
    pub graph: GraphId,
    /// Set on the mirrored half of a link: the original subject and predicate.
    pub inverse_of: Option<(EntityId, Predicate)>,
}

/// Entity records plus the (predicate, object) index kept in lockstep.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Registry {
    entities: BTreeMap<EntityId, EntityRecord>,
    index: BTreeMap<(Predicate, Value), BTreeSet<EntityId>>,
}

/// Saved records for rollback, taken on first touch.
pub(super) type UndoLog = BTreeMap<EntityId, Option<EntityRecord>>;

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, e: &EntityId) -> bool {
        self.entities.contains_key(e)
    }

    pub fn entity(&self, e: &EntityId) -> Option<&EntityRecord> {
        self.entities.get(e)
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = &EntityId> {
        self.entities.keys()
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// The subject holding `(predicate, value)`, if any. Under lax writes
    /// several may; the smallest id is returned.
    pub fn check_uniqueness(&self, predicate: &Predicate, value: &Value) -> Option<&EntityId> {
        self.index.get(&(predicate.clone(), value.clone())).and_then(|s| s.iter().next())
    }

    pub fn holders(&self, predicate: &Predicate, value: &Value) -> impl Iterator<Item = &EntityId> {
        self.index.get(&(predicate.clone(), value.clone())).into_iter().flatten()
    }

    /// Entities linked to `e` by `kind`.
    pub fn links(&self, e: &EntityId, kind: LinkKind) -> Vec<&EntityId> {
        self.entities
            .get(e)
            .map(|r| r.links.keys().filter(|(k, _)| *k == kind).map(|(_, o)| o).collect())
            .unwrap_or_default()
    }

    pub fn linked(&self, a: &EntityId, b: &EntityId, kind: LinkKind) -> bool {
        self.entities.get(a).is_some_and(|r| r.links.contains_key(&(kind, b.clone())))
    }

    pub fn property_values<'a>(&'a self, e: &EntityId, p: &'a Predicate) -> impl Iterator<Item = &'a Value> + 'a {
        self.entities
            .get(e)
            .into_iter()
            .flat_map(move |r| r.properties.keys().filter(move |(q, _)| q == p).map(|(_, v)| v))
    }

    /// Every stored statement, link halves included.
    pub fn triples(&self) -> Vec<RegistryTriple> {
        let mut out = Vec::new();
        for (s, rec) in &self.entities {
            for ((p, v), g) in &rec.properties {
                out.push(RegistryTriple {
                    subject: s.clone(),
                    predicate: p.clone(),
                    object: v.clone(),
                    graph: g.clone(),
                    inverse_of: None,
                });
            }
            for ((kind, o), entry) in &rec.links {
                let inverse_of = (entry.half == LinkHalf::Inverse).then(|| (o.clone(), kind.predicate()));
                out.push(RegistryTriple {
                    subject: s.clone(),
                    predicate: kind.predicate(),
                    object: Value::Reference(o.clone()),
                    graph: entry.graph.clone(),
                    inverse_of,
                });
            }
        }
        out
    }

    /// One document per (entity, contributing graph).
    pub fn documents(&self) -> Vec<Document> {
        let mut docs: BTreeMap<(EntityId, GraphId), Document> = BTreeMap::new();
        for t in self.triples() {
            docs.entry((t.subject.clone(), t.graph.clone()))
                .or_insert_with(|| Document::new(t.subject.clone(), t.graph.clone()))
                .insert(t.predicate, t.object)
                .expect("registry predicates are not reserved");
        }
        docs.into_values().collect()
    }

    pub fn export_nquads(&self) -> Vec<u8> {
        encode_nquads(&self.documents())
    }

    /// Rebuilds the (predicate, object) index from the records.
    pub fn rebuilt_index(&self) -> BTreeMap<(Predicate, Value), BTreeSet<EntityId>> {
        let mut index: BTreeMap<_, BTreeSet<EntityId>> = BTreeMap::new();
        for (s, rec) in &self.entities {
            for pv in rec.properties.keys() {
                index.entry(pv.clone()).or_default().insert(s.clone());
            }
        }
        index
    }

    pub fn index_is_coherent(&self) -> bool {
        self.rebuilt_index() == self.index
    }

    /// Applies `ops` in order, all or nothing, crediting new statements to
    /// `graph`. Returns the number of stored entries written or removed.
    pub fn apply_batch(
        &mut self,
        ops: &[AtomicOp],
        mode: UniquenessMode,
        graph: &GraphId,
    ) -> Result<usize, RegistryError> {
        let mut undo = UndoLog::new();
        let mut writes = 0;
        for op in ops {
            match self.apply_op(op, mode, graph, &mut undo) {
                Ok(n) => writes += n,
                Err(err) => {
                    self.rollback(undo);
                    return Err(err);
                }
            }
        }
        Ok(writes)
    }

    /// Single operation with the strict API defaults.
    pub fn apply(&mut self, op: &AtomicOp) -> Result<usize, RegistryError> {
        self.apply_batch(std::slice::from_ref(op), UniquenessMode::Strict, &registry_graph())
    }

    fn rollback(&mut self, undo: UndoLog) {
        for (e, before) in undo {
            if let Some(now) = self.entities.remove(&e) {
                self.unindex(&e, &now);
            }
            if let Some(rec) = before {
                self.index_record(&e, &rec);
                self.entities.insert(e, rec);
            }
        }
    }

    fn unindex(&mut self, e: &EntityId, rec: &EntityRecord) {
        for pv in rec.properties.keys() {
            self.unindex_pair(e, pv);
        }
    }

    fn unindex_pair(&mut self, e: &EntityId, pv: &(Predicate, Value)) {
        if let Some(set) = self.index.get_mut(pv) {
            set.remove(e);
            if set.is_empty() {
                self.index.remove(pv);
            }
        }
    }

    fn index_record(&mut self, e: &EntityId, rec: &EntityRecord) {
        for pv in rec.properties.keys() {
            self.index.entry(pv.clone()).or_default().insert(e.clone());
        }
    }

    fn touch(&self, e: &EntityId, undo: &mut UndoLog) {
        undo.entry(e.clone()).or_insert_with(|| self.entities.get(e).cloned());
    }

    fn require(&self, e: &EntityId) -> Result<(), RegistryError> {
        if self.entities.contains_key(e) {
            Ok(())
        } else {
            Err(RegistryError::EntityNotFound(e.clone()))
        }
    }

    fn require_absent(&self, e: &EntityId) -> Result<(), RegistryError> {
        if self.entities.contains_key(e) {
            Err(RegistryError::EntityExists(e.clone()))
        } else {
            Ok(())
        }
    }

    fn record_mut(&mut self, e: &EntityId, undo: &mut UndoLog) -> &mut EntityRecord {
        self.touch(e, undo);
        self.entities.get_mut(e).expect("checked present")
    }

    fn create(&mut self, e: &EntityId, undo: &mut UndoLog) -> Result<usize, RegistryError> {
        self.require_absent(e)?;
        self.touch(e, undo);
        self.entities.insert(e.clone(), EntityRecord::default());
        Ok(1)
    }

    fn insert_property(
        &mut self,
        e: &EntityId,
        p: &Predicate,
        v: &Value,
        mode: UniquenessMode,
        graph: &GraphId,
        undo: &mut UndoLog,
    ) -> Result<usize, RegistryError> {
        self.require(e)?;
        if LinkKind::of(p).is_some() {
            return Err(RegistryError::ReservedPredicate(p.clone()));
        }
        let pv = (p.clone(), v.clone());
        let violation = |holder: &EntityId| RegistryError::UniquenessViolation {
            predicate: p.clone(),
            value: v.text(),
            holder: holder.clone(),
        };
        match mode {
            UniquenessMode::Strict => {
                if let Some(holder) = self.check_uniqueness(p, v) {
                    return Err(violation(holder));
                }
            }
            UniquenessMode::Lax => {
                if self.entities[e].properties.contains_key(&pv) {
                    return Err(violation(e));
                }
            }
        }
        self.record_mut(e, undo).properties.insert(pv.clone(), graph.clone());
        self.index.entry(pv).or_default().insert(e.clone());
        Ok(1)
    }

    fn delete_property(
        &mut self,
        e: &EntityId,
        p: &Predicate,
        v: &Value,
        undo: &mut UndoLog,
    ) -> Result<usize, RegistryError> {
        self.require(e)?;
        let pv = (p.clone(), v.clone());
        if !self.entities[e].properties.contains_key(&pv) {
            return Err(RegistryError::PropertyNotFound { entity: e.clone(), predicate: p.clone(), value: v.text() });
        }
        self.record_mut(e, undo).properties.remove(&pv);
        self.unindex_pair(e, &pv);
        Ok(1)
    }

    fn insert_link(
        &mut self,
        kind: LinkKind,
        a: &EntityId,
        b: &EntityId,
        graph: &GraphId,
        undo: &mut UndoLog,
    ) -> Result<usize, RegistryError> {
        self.require(a)?;
        self.require(b)?;
        if self.linked(a, b, kind) {
            return Err(RegistryError::LinkExists { kind, a: a.clone(), b: b.clone() });
        }
        if a == b {
            let entry = LinkEntry { half: LinkHalf::SelfInverse, graph: graph.clone() };
            self.record_mut(a, undo).links.insert((kind, a.clone()), entry);
            return Ok(1);
        }
        let original = LinkEntry { half: LinkHalf::Original, graph: graph.clone() };
        let inverse = LinkEntry { half: LinkHalf::Inverse, graph: graph.clone() };
        self.record_mut(a, undo).links.insert((kind, b.clone()), original);
        self.record_mut(b, undo).links.insert((kind, a.clone()), inverse);
        Ok(2)
    }

    fn delete_link(
        &mut self,
        kind: LinkKind,
        a: &EntityId,
        b: &EntityId,
        undo: &mut UndoLog,
    ) -> Result<usize, RegistryError> {
        self.require(a)?;
        self.require(b)?;
        if !self.linked(a, b, kind) {
            return Err(RegistryError::LinkNotFound { kind, a: a.clone(), b: b.clone() });
        }
        self.record_mut(a, undo).links.remove(&(kind, b.clone()));
        if a == b {
            return Ok(1);
        }
        self.record_mut(b, undo).links.remove(&(kind, a.clone()));
        Ok(2)
    }

    pub(super) fn create_entity(&mut self, e: &EntityId, undo: &mut UndoLog) -> Result<usize, RegistryError> {
        self.create(e, undo)
    }

    pub(super) fn add_property_lax(
        &mut self,
        e: &EntityId,
        p: &Predicate,
        v: &Value,
        graph: &GraphId,
        undo: &mut UndoLog,
    ) -> Result<usize, RegistryError> {
        self.insert_property(e, p, v, UniquenessMode::Lax, graph, undo)
    }

    pub(super) fn remove_property(
        &mut self,
        e: &EntityId,
        p: &Predicate,
        v: &Value,
        undo: &mut UndoLog,
    ) -> Result<usize, RegistryError> {
        self.delete_property(e, p, v, undo)
    }

    pub(super) fn add_link(
        &mut self,
        kind: LinkKind,
        a: &EntityId,
        b: &EntityId,
        graph: &GraphId,
        undo: &mut UndoLog,
    ) -> Result<usize, RegistryError> {
        self.insert_link(kind, a, b, graph, undo)
    }

    pub(super) fn remove_link(
        &mut self,
        kind: LinkKind,
        a: &EntityId,
        b: &EntityId,
        undo: &mut UndoLog,
    ) -> Result<usize, RegistryError> {
        self.delete_link(kind, a, b, undo)
    }

    pub(super) fn undo(&mut self, undo: UndoLog) {
        self.rollback(undo);
    }

    fn apply_op(
        &mut self,
        op: &AtomicOp,
        mode: UniquenessMode,
        graph: &GraphId,
        undo: &mut UndoLog,
    ) -> Result<usize, RegistryError> {
        match op {
            AtomicOp::InsertEntity(e) => self.create(e, undo),
            AtomicOp::DeleteEntity(e) => {
                self.require(e)?;
                self.touch(e, undo);
                let rec = self.entities.remove(e).expect("checked present");
                self.unindex(e, &rec);
                let mut writes = 1 + rec.properties.len() + rec.links.len();
                for (kind, other) in rec.links.keys() {
                    if other != e {
                        self.record_mut(other, undo).links.remove(&(*kind, e.clone()));
                        writes += 1;
                    }
                }
                Ok(writes)
            }
            AtomicOp::InsertProperty(e, p, v) => self.insert_property(e, p, v, mode, graph, undo),
            AtomicOp::UpdateProperty(e, p, old, new) => {
                let removed = self.delete_property(e, p, old, undo)?;
                Ok(removed + self.insert_property(e, p, new, mode, graph, undo)?)
            }
            AtomicOp::DeleteProperty(e, p, v) => self.delete_property(e, p, v, undo),
            AtomicOp::InsertLink(a, b) => self.insert_link(LinkKind::LinksTo, a, b, graph, undo),
            AtomicOp::DeleteLink(a, b) => self.delete_link(LinkKind::LinksTo, a, b, undo),
            AtomicOp::ShallowCopy { source, target } => {
                self.require(source)?;
                let created = self.create(target, undo)?;
                Ok(created + self.insert_link(LinkKind::SameAs, target, source, graph, undo)?)
            }
            AtomicOp::DeepCopy { source, target } => {
                self.require(source)?;
                let created = self.create(target, undo)?;
                let rec = self.entities[source].clone();
                let mut writes = created;
                // copies duplicate (p, o) pairs by construction
                for ((p, v), g) in &rec.properties {
                    writes += self.insert_property(target, p, v, UniquenessMode::Lax, g, undo)?;
                }
                for ((kind, other), entry) in &rec.links {
                    let other = if other == source { target } else { other };
                    writes += self.insert_link(*kind, target, other, &entry.graph, undo)?;
                }
                Ok(writes)
            }
        }
    }
}

pub fn registry_graph() -> GraphId {
    GraphId::new(REGISTRY_GRAPH).expect("valid graph")
}
