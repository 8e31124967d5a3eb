//! Per-node document store.
//!
//! Holds at most one [`Document`] per (entity, graph). Every mutation takes a
//! fresh sequence number, which drives the change feed used by replication.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::model::codec::{decode_model1, encode_model1};
use crate::model::{Document, EntityId, GraphId, ModelError, NodeName, Predicate, Properties, Value};
use crate::time::VTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Contributor,
    Bridge,
    Global,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Contributor => "contributor",
            Role::Bridge => "bridge",
            Role::Global => "global",
        }
    }
}

impl std::str::FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "contributor" => Ok(Role::Contributor),
            "bridge" => Ok(Role::Bridge),
            "global" => Ok(Role::Global),
            other => Err(format!("unknown role {other:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("predicate {0} is reserved; use set_flags")]
    ReservedPredicate(Predicate),
    #[error("cursor {cursor} is past the current sequence {current}")]
    CursorOutOfRange { cursor: u64, current: u64 },
    #[error("{node} is a {role}, which cannot {action}")]
    RoleViolation { node: NodeName, role: &'static str, action: &'static str },
    #[error("snapshot line {line}: {message}")]
    Snapshot { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Local,
    Replicated,
}

#[derive(Debug, Clone)]
pub struct StoreEntry {
    pub doc: Document,
    pub origin: Origin,
    pub stored_at: VTime,
    pub last_access: VTime,
    seq: u64,
    forwarded: bool,
}

impl StoreEntry {
    pub fn seq(&self) -> u64 {
        self.seq
    }

    /// Whether some peer has accepted this document since it was stored.
    pub fn forwarded(&self) -> bool {
        self.forwarded
    }
}

/// Everything a store knows about one entity, one entry per contributing
/// graph. Values from different graphs are never merged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityView {
    pub entity: EntityId,
    pub contributions: BTreeMap<GraphId, Properties>,
}

impl EntityView {
    pub fn empty(entity: EntityId) -> Self {
        Self { entity, contributions: BTreeMap::new() }
    }

    pub fn pair_count(&self) -> usize {
        self.contributions.values().flat_map(|p| p.values()).map(Vec::len).sum()
    }
}

pub type DocKey = (EntityId, GraphId);

#[derive(Debug, Clone)]
pub struct Store {
    name: NodeName,
    role: Role,
    entries: BTreeMap<DocKey, StoreEntry>,
    by_seq: BTreeMap<u64, DocKey>,
    seq: u64,
    interest: BTreeSet<EntityId>,
    cursors: BTreeMap<NodeName, u64>,
}

impl Store {
    pub fn new(name: NodeName, role: Role) -> Self {
        Self {
            name,
            role,
            entries: BTreeMap::new(),
            by_seq: BTreeMap::new(),
            seq: 0,
            interest: BTreeSet::new(),
            cursors: BTreeMap::new(),
        }
    }

    pub fn name(&self) -> &NodeName {
        &self.name
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn own_graph(&self) -> GraphId {
        GraphId::of(&self.name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Current sequence number.
    pub fn sequence(&self) -> u64 {
        self.seq
    }

    pub fn get(&self, entity: &EntityId, graph: &GraphId) -> Option<&StoreEntry> {
        self.entries.get(&(entity.clone(), graph.clone()))
    }

    pub fn entries(&self) -> impl Iterator<Item = &StoreEntry> {
        self.entries.values()
    }

    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.entries.values().map(|e| &e.doc)
    }

    /// Entries about one entity, any graph.
    pub fn entries_for<'a>(&'a self, entity: &'a EntityId) -> impl Iterator<Item = &'a StoreEntry> + 'a {
        self.entries
            .range((entity.clone(), GraphId::minimum())..)
            .take_while(move |((e, _), _)| e == entity)
            .map(|(_, v)| v)
    }

    pub fn interest_set(&self) -> &BTreeSet<EntityId> {
        &self.interest
    }

    fn require_contributor(&self, action: &'static str) -> Result<(), StoreError> {
        if self.role == Role::Contributor {
            Ok(())
        } else {
            Err(StoreError::RoleViolation { node: self.name.clone(), role: self.role.as_str(), action })
        }
    }

    fn next_seq(&mut self, key: &DocKey, previous: Option<u64>) -> u64 {
        if let Some(old) = previous {
            self.by_seq.remove(&old);
        }
        self.seq += 1;
        self.by_seq.insert(self.seq, key.clone());
        self.seq
    }

    /// Applies `mutate` to the local document for `key`, creating it if
    /// needed. A new sequence number and revision are taken only when
    /// `mutate` reports a change.
    fn mutate_local(
        &mut self,
        key: DocKey,
        now: VTime,
        mutate: impl FnOnce(&mut Document) -> Result<bool, StoreError>,
    ) -> Result<Document, StoreError> {
        let existing = self.entries.get(&key).filter(|e| e.origin == Origin::Local);
        let stored_at = existing.map_or(now, |e| e.stored_at);
        let had_local = existing.is_some();
        let mut doc = match existing {
            Some(e) => e.doc.clone(),
            None => Document::new(key.0.clone(), key.1.clone()),
        };
        let changed = mutate(&mut doc)?;
        let previous = self.entries.get(&key).map(|e| e.seq);
        if !changed && had_local {
            let entry = self.entries.get_mut(&key).expect("present");
            entry.last_access = entry.last_access.max(now);
            return Ok(entry.doc.clone());
        }
        doc.bump_revision();
        let seq = self.next_seq(&key, previous);
        self.entries.insert(
            key,
            StoreEntry { doc: doc.clone(), origin: Origin::Local, stored_at, last_access: now, seq, forwarded: false },
        );
        Ok(doc)
    }

    /// Adds `(predicate, value)` to this node's own document about `entity`.
    /// Repeating an existing pair leaves the document (and its revision)
    /// unchanged.
    pub fn put_local(
        &mut self,
        entity: &EntityId,
        predicate: Predicate,
        value: Value,
        now: VTime,
    ) -> Result<Document, StoreError> {
        self.require_contributor("author documents")?;
        if predicate.is_reserved() {
            return Err(StoreError::ReservedPredicate(predicate));
        }
        self.interest.insert(entity.clone());
        let key = (entity.clone(), self.own_graph());
        self.mutate_local(key, now, |doc| Ok(doc.insert(predicate, value)?))
    }

    /// Updates control flags of the own document about `entity`. `None`
    /// leaves a flag as is. Always takes a new revision.
    pub fn set_flags(
        &mut self,
        entity: &EntityId,
        private: Option<bool>,
        addressed_to: Option<NodeName>,
        now: VTime,
    ) -> Result<Document, StoreError> {
        self.require_contributor("author documents")?;
        let key = (entity.clone(), self.own_graph());
        self.mutate_local(key, now, |doc| {
            if let Some(p) = private {
                doc.flags.private = p;
            }
            if let Some(to) = addressed_to {
                doc.flags.addressed_to = Some(to);
            }
            Ok(true)
        })
    }

    /// Replaces this node's cached-query document for `doc.entity()`.
    pub(crate) fn put_cached(&mut self, mut doc: Document, now: VTime) -> Document {
        let key = (doc.entity().clone(), doc.graph().clone());
        let previous = self.entries.get(&key);
        let revision = previous.map_or(0, |e| e.doc.revision());
        if let Some(prev) = previous {
            if prev.doc.properties() == doc.properties() && prev.doc.flags == doc.flags {
                return prev.doc.clone();
            }
        }
        doc.set_revision(revision + 1);
        let previous_seq = previous.map(|e| e.seq);
        let seq = self.next_seq(&key, previous_seq);
        self.entries.insert(
            key,
            StoreEntry {
                doc: doc.clone(),
                origin: Origin::Local,
                stored_at: now,
                last_access: now,
                seq,
                forwarded: false,
            },
        );
        doc
    }

    /// Union view of every stored document about `entity`. Touches
    /// `last_access` of the entries read and records the entity as
    /// interesting for later pulls.
    pub fn get_entity(&mut self, entity: &EntityId, now: VTime) -> EntityView {
        self.interest.insert(entity.clone());
        let mut view = EntityView::empty(entity.clone());
        for ((e, graph), entry) in self.entries.range_mut((entity.clone(), GraphId::minimum())..) {
            if e != entity {
                break;
            }
            entry.last_access = entry.last_access.max(now);
            view.contributions.insert(graph.clone(), entry.doc.properties().clone());
        }
        view
    }

    /// Removes this node's own contribution about `entity`.
    pub fn delete_entity_contribution(&mut self, entity: &EntityId) -> bool {
        let key = (entity.clone(), self.own_graph());
        match self.entries.get(&key) {
            Some(e) if e.origin == Origin::Local => {
                let seq = e.seq;
                self.entries.remove(&key);
                self.by_seq.remove(&seq);
                true
            }
            _ => false,
        }
    }

    /// Entries with a sequence number above `cursor`, in sequence order.
    pub fn feed(&self, cursor: u64) -> Result<impl Iterator<Item = &StoreEntry>, StoreError> {
        if cursor > self.seq {
            return Err(StoreError::CursorOutOfRange { cursor, current: self.seq });
        }
        Ok(self.by_seq.range(cursor + 1..).map(|(_, key)| &self.entries[key]))
    }

    /// Documents changed after `cursor` and the cursor to resume from.
    pub fn changes_since(&self, cursor: u64) -> Result<(Vec<Document>, u64), StoreError> {
        let docs = self.feed(cursor)?.map(|e| e.doc.clone()).collect();
        Ok((docs, self.seq))
    }

    /// Whether this store already has `doc` at the same or a later revision.
    pub fn has_revision(&self, doc: &Document) -> bool {
        self.get(doc.entity(), doc.graph()).is_some_and(|e| e.doc.revision() >= doc.revision())
    }

    /// Stores a copy received from a peer. Higher revision wins; equal
    /// revisions keep the larger serialized body. Documents owned by this
    /// node are never replaced. Returns whether the store changed.
    pub fn apply_replica(&mut self, doc: Document, now: VTime) -> bool {
        if doc.graph().is_owned_by(&self.name) {
            return false;
        }
        let key = (doc.entity().clone(), doc.graph().clone());
        let previous = self.entries.get(&key);
        if let Some(existing) = previous {
            let newer = match doc.revision().cmp(&existing.doc.revision()) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                std::cmp::Ordering::Equal => encode_model1(&doc) > encode_model1(&existing.doc),
            };
            if !newer {
                return false;
            }
        }
        let previous_seq = previous.map(|e| e.seq);
        let seq = self.next_seq(&key, previous_seq);
        self.entries.insert(
            key,
            StoreEntry { doc, origin: Origin::Replicated, stored_at: now, last_access: now, seq, forwarded: false },
        );
        true
    }

    pub(crate) fn mark_forwarded(&mut self, entity: &EntityId, graph: &GraphId) {
        if let Some(e) = self.entries.get_mut(&(entity.clone(), graph.clone())) {
            e.forwarded = true;
        }
    }

    pub(crate) fn evict(&mut self, key: &DocKey) -> Option<StoreEntry> {
        let entry = self.entries.remove(key)?;
        self.by_seq.remove(&entry.seq);
        Some(entry)
    }

    pub(crate) fn keys(&self) -> impl Iterator<Item = (&DocKey, &StoreEntry)> {
        self.entries.iter()
    }

    /// Replication checkpoint for `peer`.
    pub fn cursor(&self, peer: &NodeName) -> u64 {
        self.cursors.get(peer).copied().unwrap_or(0)
    }

    /// Advances the checkpoint for `peer`; never moves it backwards.
    pub fn advance_cursor(&mut self, peer: &NodeName, cursor: u64) {
        let c = self.cursors.entry(peer.clone()).or_insert(0);
        *c = (*c).max(cursor);
    }

    /// Writes one line per document:
    /// `<model1-json>\t<private:0|1>\t<to:name|->\t<cached:0|1>\t<revision>\n`.
    pub fn write_snapshot(&self, mut out: impl Write) -> io::Result<()> {
        for entry in self.entries.values() {
            let doc = &entry.doc;
            out.write_all(&encode_model1(doc))?;
            let to = doc.flags.addressed_to.as_ref().map_or("-", |n| n.as_str());
            writeln!(
                out,
                "\t{}\t{}\t{}\t{}",
                u8::from(doc.flags.private),
                to,
                u8::from(doc.flags.cached_query),
                doc.revision()
            )?;
        }
        Ok(())
    }

    /// Rebuilds a store from [`Store::write_snapshot`] output. Documents
    /// owned by `name` come back as local, the rest as replicas.
    pub fn read_snapshot(name: NodeName, role: Role, input: impl BufRead, now: VTime) -> Result<Self, StoreError> {
        let mut store = Store::new(name, role);
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let bad = |message: String| StoreError::Snapshot { line: i + 1, message };
            let cols: Vec<&str> = line.split('\t').collect();
            let [json, private, to, cached, revision] = cols[..] else {
                return Err(bad(format!("expected 5 columns, found {}", cols.len())));
            };
            let flag = |s: &str| match s {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(bad(format!("bad flag {other:?}"))),
            };
            let mut doc = decode_model1(json.as_bytes()).map_err(|e| bad(e.to_string()))?;
            doc.flags.private = flag(private)?;
            doc.flags.cached_query = flag(cached)?;
            doc.flags.addressed_to = match to {
                "-" => None,
                n => Some(NodeName::new(n).map_err(|e| bad(e.to_string()))?),
            };
            doc.set_revision(revision.parse().map_err(|_| bad(format!("bad revision {revision:?}")))?);
            let key = (doc.entity().clone(), doc.graph().clone());
            let origin = if doc.graph().is_owned_by(&store.name) { Origin::Local } else { Origin::Replicated };
            let seq = store.next_seq(&key, None);
            store
                .entries
                .insert(key, StoreEntry { doc, origin, stored_at: now, last_access: now, seq, forwarded: false });
        }
        Ok(store)
    }
}
