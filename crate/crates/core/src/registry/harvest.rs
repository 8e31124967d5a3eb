use std::collections::BTreeSet;

use thiserror::Error;

use crate::model::{Document, EntityId, NodeName, Predicate, Value};
use crate::store::{Role, Store};

use super::state::{LinkHalf, LinkKind, Registry, RegistryError};

#[derive(Debug, Error)]
pub enum HarvestError {
    #[error("{0} is not connected")]
    NotConnected(NodeName),
    #[error("{node} is a {role}; only bridges are harvested")]
    NotABridge { node: NodeName, role: &'static str },
}

/// A (predicate, object) pair harvested onto a second subject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniquenessConflict {
    pub subject: EntityId,
    pub predicate: Predicate,
    pub object: Value,
    pub holder: EntityId,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HarvestReport {
    pub documents: usize,
    pub skipped_private: usize,
    pub skipped_cached: usize,
    pub added: usize,
    pub removed: usize,
    pub conflicts: Vec<UniquenessConflict>,
    /// Link predicates whose object was a literal; kept out of the registry.
    pub ignored: usize,
}

impl Registry {
    /// Folds one document into the registry: the entity is created if
    /// absent, the (entity, graph) contribution's properties are replaced by
    /// the document's, and link predicates with reference objects become
    /// links. Pairs that already exist collapse.
    pub fn fold_document(&mut self, doc: &Document, report: &mut HarvestReport) -> Result<(), RegistryError> {
        let entity = doc.entity();
        let graph = doc.graph();
        let mut props: BTreeSet<(Predicate, Value)> = BTreeSet::new();
        let mut links: BTreeSet<(LinkKind, EntityId)> = BTreeSet::new();
        for (p, v) in doc.pairs() {
            match (LinkKind::of(p), v) {
                (Some(kind), Value::Reference(target)) => {
                    links.insert((kind, target.clone()));
                }
                (Some(_), Value::Literal(_)) => report.ignored += 1,
                (None, _) => {
                    props.insert((p.clone(), v.clone()));
                }
            }
        }
        let mut undo = Default::default();
        let result = (|| {
            if !self.contains(entity) {
                self.create_entity(entity, &mut undo)?;
            }
            let stale: Vec<(Predicate, Value)> = self
                .entity(entity)
                .expect("created")
                .properties
                .iter()
                .filter(|(pv, g)| *g == graph && !props.contains(pv))
                .map(|(pv, _)| pv.clone())
                .collect();
            for (p, v) in stale {
                report.removed += self.remove_property(entity, &p, &v, &mut undo)?;
            }
            for (p, v) in &props {
                if self.entity(entity).expect("created").properties.contains_key(&(p.clone(), v.clone())) {
                    continue;
                }
                if let Some(holder) = self.holders(p, v).find(|h| *h != entity) {
                    report.conflicts.push(UniquenessConflict {
                        subject: entity.clone(),
                        predicate: p.clone(),
                        object: v.clone(),
                        holder: holder.clone(),
                    });
                }
                report.added += self.add_property_lax(entity, p, v, graph, &mut undo)?;
            }
            let stale_links: Vec<(LinkKind, EntityId)> = self
                .entity(entity)
                .expect("created")
                .links
                .iter()
                .filter(|(k, l)| l.graph == *graph && l.half != LinkHalf::Inverse && !links.contains(k))
                .map(|(k, _)| k.clone())
                .collect();
            for (kind, target) in stale_links {
                report.removed += self.remove_link(kind, entity, &target, &mut undo)?;
            }
            for (kind, target) in &links {
                if self.linked(entity, target, *kind) {
                    continue;
                }
                if !self.contains(target) {
                    report.added += self.create_entity(target, &mut undo)?;
                }
                report.added += self.add_link(*kind, entity, target, graph, &mut undo)?;
            }
            Ok(())
        })();
        if result.is_err() {
            self.undo(undo);
        }
        result
    }

    /// Pulls everything new on `bridge` since the last harvest by `global`.
    /// Private documents and cached-query results never enter the registry.
    pub fn harvest(&mut self, global: &NodeName, bridge: &mut Store) -> Result<HarvestReport, HarvestError> {
        if bridge.role() != Role::Bridge {
            return Err(HarvestError::NotABridge { node: bridge.name().clone(), role: bridge.role().as_str() });
        }
        let cursor = bridge.cursor(global);
        let docs: Vec<Document> =
            bridge.feed(cursor).expect("own checkpoint is never ahead").map(|e| e.doc.clone()).collect();
        let mut report = HarvestReport::default();
        for doc in docs {
            if doc.flags.private {
                report.skipped_private += 1;
                continue;
            }
            if doc.flags.cached_query {
                report.skipped_cached += 1;
                continue;
            }
            self.fold_document(&doc, &mut report).expect("folding into a lax registry cannot fail");
            bridge.mark_forwarded(doc.entity(), doc.graph());
            report.documents += 1;
        }
        let seq = bridge.sequence();
        bridge.advance_cursor(global, seq);
        Ok(report)
    }
}
