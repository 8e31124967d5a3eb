//! Pairwise replication between contributors and bridges.
//!
//! A session runs both directions. Each direction reads the sender's change
//! feed from the checkpoint it keeps for the receiver, offers what the
//! receiver lacks, and lets the receiver filter by role:
//!
//! | pair | receiver persists |
//! |------|-------------------|
//! | contributor → contributor | documents addressed to it |
//! | contributor → bridge | everything not private (cached queries too) |
//! | bridge → contributor | public or addressed to it |
//! | bridge → bridge | everything not private, except cached queries |
//!
//! Contributors can still read, without persisting, public documents and
//! cached queries of a neighbouring contributor; see [`remote_view`].

use thiserror::Error;

use crate::model::{Document, GraphId, NodeName, Predicate};
use crate::store::{EntityView, Role, Store, StoreError};
use crate::time::VTime;

/// Documents per direction per session unless configured otherwise.
pub const DEFAULT_BUDGET: usize = 500;
pub const DEFAULT_GC_TTL: f64 = 1000.0;
pub const DEFAULT_GC_CAPACITY: usize = 10_000;

#[derive(Debug, Error)]
pub enum SyncError {
    #[error("{0} and {1} are not connected")]
    NotConnected(NodeName, NodeName),
    #[error("{node} is a {role}, which cannot {action}")]
    RoleViolation { node: NodeName, role: &'static str, action: &'static str },
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RolePair {
    ContributorContributor,
    ContributorBridge,
    BridgeBridge,
}

impl RolePair {
    /// None when either side is the global server, which harvests instead.
    pub fn of(a: Role, b: Role) -> Option<RolePair> {
        match (a, b) {
            (Role::Contributor, Role::Contributor) => Some(RolePair::ContributorContributor),
            (Role::Contributor, Role::Bridge) | (Role::Bridge, Role::Contributor) => Some(RolePair::ContributorBridge),
            (Role::Bridge, Role::Bridge) => Some(RolePair::BridgeBridge),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcceptReason {
    OwnData,
    PublicNeighbor,
    AddressedToMe,
    CachedQuery,
    AllNonPrivate,
    BridgeShare,
    RejectedPrivate,
    RejectedCached,
    RejectedNotAddressed,
}

impl AcceptReason {
    pub fn is_rejection(self) -> bool {
        matches!(
            self,
            AcceptReason::RejectedPrivate | AcceptReason::RejectedCached | AcceptReason::RejectedNotAddressed
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AcceptDecision {
    pub accepted: bool,
    pub reason: AcceptReason,
    /// Whether an accepted document is stored as a replica. Contributors may
    /// read a neighbour's public data without keeping it.
    pub persist: bool,
}

impl AcceptDecision {
    fn keep(reason: AcceptReason) -> Self {
        Self { accepted: true, reason, persist: true }
    }

    fn read_only(reason: AcceptReason) -> Self {
        Self { accepted: true, reason, persist: false }
    }

    fn reject(reason: AcceptReason) -> Self {
        Self { accepted: false, reason, persist: false }
    }
}

/// Whether `receiver` takes `doc` from a peer across `pair`. For
/// [`RolePair::ContributorBridge`] the direction follows from
/// `receiver_role`.
pub fn accepts(receiver_role: Role, receiver: &NodeName, doc: &Document, pair: RolePair) -> AcceptDecision {
    use AcceptReason::*;
    let flags = &doc.flags;
    if doc.graph().is_owned_by(receiver) {
        return AcceptDecision::read_only(OwnData);
    }
    if flags.private {
        return AcceptDecision::reject(RejectedPrivate);
    }
    let to_me = flags.addressed_to.as_ref() == Some(receiver);
    let to_other = flags.addressed_to.is_some() && !to_me;
    match (pair, receiver_role) {
        (RolePair::ContributorContributor, _) => {
            if to_me {
                AcceptDecision::keep(AddressedToMe)
            } else if to_other {
                AcceptDecision::reject(RejectedNotAddressed)
            } else if flags.cached_query {
                AcceptDecision::read_only(CachedQuery)
            } else {
                AcceptDecision::read_only(PublicNeighbor)
            }
        }
        (RolePair::ContributorBridge, Role::Bridge) => {
            AcceptDecision::keep(if flags.cached_query { CachedQuery } else { AllNonPrivate })
        }
        (RolePair::ContributorBridge, _) => {
            if to_me {
                AcceptDecision::keep(AddressedToMe)
            } else if to_other {
                AcceptDecision::reject(RejectedNotAddressed)
            } else if flags.cached_query {
                AcceptDecision::keep(CachedQuery)
            } else {
                AcceptDecision::keep(PublicNeighbor)
            }
        }
        (RolePair::BridgeBridge, _) => {
            if flags.cached_query {
                AcceptDecision::reject(RejectedCached)
            } else {
                AcceptDecision::keep(BridgeShare)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DirectionReport {
    pub sent: usize,
    pub accepted: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncReport {
    pub time: VTime,
    pub a: NodeName,
    pub b: NodeName,
    pub a_to_b: DirectionReport,
    pub b_to_a: DirectionReport,
}

impl SyncReport {
    pub const CSV_HEADER: &'static str = "time,node_a,node_b,sent_ab,acc_ab,sent_ba,acc_ba";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.3},{},{},{},{},{},{}",
            self.time.0, self.a, self.b, self.a_to_b.sent, self.a_to_b.accepted, self.b_to_a.sent, self.b_to_a.accepted
        )
    }
}

fn pair_of(a: &Store, b: &Store) -> Result<RolePair, SyncError> {
    let global = if a.role() == Role::Global { a } else { b };
    RolePair::of(a.role(), b.role()).ok_or_else(|| SyncError::RoleViolation {
        node: global.name().clone(),
        role: global.role().as_str(),
        action: "take part in a sync session",
    })
}

/// Bridges hand contributors only what concerns them: documents addressed to
/// them and documents about entities they have shown interest in.
fn wanted_by(to: &Store, from_role: Role, doc: &Document) -> bool {
    if from_role != Role::Bridge || to.role() != Role::Contributor {
        return true;
    }
    doc.flags.addressed_to.as_ref() == Some(to.name()) || to.interest_set().contains(doc.entity())
}

fn should_offer(from_role: Role, to: &Store, doc: &Document) -> bool {
    !doc.graph().is_owned_by(to.name()) && !to.has_revision(doc) && wanted_by(to, from_role, doc)
}

fn transfer(
    from: &mut Store,
    to: &mut Store,
    pair: RolePair,
    budget: usize,
    now: VTime,
) -> Result<DirectionReport, SyncError> {
    let cursor = from.cursor(to.name());
    let mut offers: Vec<Document> = Vec::new();
    let mut new_cursor = from.sequence();
    for entry in from.feed(cursor)? {
        if offers.len() == budget {
            break;
        }
        if should_offer(from.role(), to, &entry.doc) {
            offers.push(entry.doc.clone());
            if offers.len() == budget {
                new_cursor = entry.seq();
            }
        }
    }
    // "everything everyone said about X" for entities the contributor has
    // touched, independent of the checkpoint
    if from.role() == Role::Bridge && to.role() == Role::Contributor {
        'pull: for entity in to.interest_set() {
            for entry in from.entries_for(entity) {
                if offers.len() == budget {
                    break 'pull;
                }
                let doc = &entry.doc;
                if should_offer(from.role(), to, doc)
                    && !offers.iter().any(|o| o.entity() == doc.entity() && o.graph() == doc.graph())
                {
                    offers.push(doc.clone());
                }
            }
        }
    }
    let mut report = DirectionReport { sent: offers.len(), ..DirectionReport::default() };
    for doc in offers {
        let decision = accepts(to.role(), to.name(), &doc, pair);
        if decision.accepted && decision.persist {
            from.mark_forwarded(doc.entity(), doc.graph());
            to.apply_replica(doc, now);
            report.accepted += 1;
        } else {
            report.rejected += 1;
        }
    }
    from.advance_cursor(&to.name().clone(), new_cursor);
    Ok(report)
}

/// Runs one session in both directions, `a` to `b` first. At most `budget`
/// documents move per direction; the rest follow in later sessions.
pub fn sync_session(a: &mut Store, b: &mut Store, budget: usize, now: VTime) -> Result<SyncReport, SyncError> {
    let pair = pair_of(a, b)?;
    let a_to_b = transfer(a, b, pair, budget, now)?;
    let b_to_a = transfer(b, a, pair, budget, now)?;
    Ok(SyncReport { time: now, a: a.name().clone(), b: b.name().clone(), a_to_b, b_to_a })
}

/// Documents a contributor can read from a connected contributor without
/// storing them: the neighbour's public data and cached queries about
/// `entity`.
pub fn remote_view<'a>(
    reader: &'a NodeName,
    neighbor: &'a Store,
    entity: &'a crate::model::EntityId,
) -> impl Iterator<Item = &'a Document> + 'a {
    neighbor.entries_for(entity).map(|e| &e.doc).filter(move |doc| {
        let d = accepts(Role::Contributor, reader, doc, RolePair::ContributorContributor);
        d.accepted && !d.persist && d.reason != AcceptReason::OwnData
    })
}

/// Publishes `view` as this contributor's cached-query document for
/// `entity`. Properties are namespaced by source graph as `<author>/<predicate>`.
pub fn publish_cached_query(store: &mut Store, view: &EntityView, now: VTime) -> Result<Document, SyncError> {
    if store.role() != Role::Contributor {
        return Err(SyncError::RoleViolation {
            node: store.name().clone(),
            role: store.role().as_str(),
            action: "publish cached queries",
        });
    }
    let mut doc = Document::new(view.entity.clone(), GraphId::cache_of(store.name()));
    doc.flags.cached_query = true;
    for (graph, properties) in &view.contributions {
        for (predicate, values) in properties {
            let namespaced = Predicate::new(&format!("{}/{}", graph.author(), predicate)).map_err(StoreError::from)?;
            for v in values {
                doc.insert(namespaced.clone(), v.clone()).map_err(StoreError::from)?;
            }
        }
    }
    Ok(store.put_cached(doc, now))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GcReport {
    /// Evicted doc ids, in eviction order.
    pub evicted: Vec<String>,
    /// Entries still above capacity because nothing else was evictable.
    pub over_capacity: usize,
}

/// Drops replicated entries idle for longer than `ttl`, then the least
/// recently accessed ones until the bridge is within `capacity`. Entries no
/// peer has accepted yet are kept regardless.
pub fn gc_bridge(store: &mut Store, now: VTime, ttl: f64, capacity: usize) -> Result<GcReport, SyncError> {
    if store.role() != Role::Bridge {
        return Err(SyncError::RoleViolation {
            node: store.name().clone(),
            role: store.role().as_str(),
            action: "garbage-collect soft state",
        });
    }
    let mut candidates: Vec<_> = store
        .keys()
        .filter(|(_, e)| e.origin == crate::store::Origin::Replicated && e.forwarded())
        .map(|(k, e)| (e.last_access, e.seq(), k.clone()))
        .collect();
    candidates.sort();
    let mut report = GcReport::default();
    let mut survivors = Vec::new();
    for (last_access, seq, key) in candidates {
        if now - last_access > ttl {
            let entry = store.evict(&key).expect("candidate exists");
            report.evicted.push(entry.doc.doc_id());
        } else {
            survivors.push((last_access, seq, key));
        }
    }
    for (_, _, key) in survivors {
        if store.len() <= capacity {
            break;
        }
        let entry = store.evict(&key).expect("candidate exists");
        report.evicted.push(entry.doc.doc_id());
    }
    report.over_capacity = store.len().saturating_sub(capacity);
    Ok(report)
}
