//! A second, deliberately naive model of the registry used as an oracle.
//! States are plain sets of strings so they can be compared against the
//! real registry after canonicalization.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use ers_core::model::{EntityId, Value};
use ers_core::registry::{AtomicOp, LinkHalf, LinkKind, Registry};

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct RefState {
    /// entity -> {(predicate, value)}
    pub entities: BTreeMap<String, BTreeSet<(String, String)>>,
    /// (kind, from, to) as originally inserted; self-links have from == to
    pub links: BTreeSet<(&'static str, String, String)>,
}

fn id(e: &EntityId) -> String {
    e.to_string()
}

fn val(v: &Value) -> String {
    match v {
        Value::Literal(s) => format!("\"{s}\""),
        Value::Reference(e) => format!("<{e}>"),
    }
}

const LINKS_TO: &str = "linksTo";
const SAME_AS: &str = "sameAs";

impl RefState {
    fn has(&self, e: &str) -> bool {
        self.entities.contains_key(e)
    }

    fn linked(&self, kind: &str, a: &str, b: &str) -> bool {
        self.links.iter().any(|(k, x, y)| *k == kind && ((x == a && y == b) || (x == b && y == a)))
    }

    fn holder_exists(&self, p: &str, v: &str) -> bool {
        self.entities.values().any(|props| props.contains(&(p.to_string(), v.to_string())))
    }

    fn op(&mut self, op: &AtomicOp) -> Result<(), String> {
        match op {
            AtomicOp::InsertEntity(e) => {
                if self.has(&id(e)) {
                    return Err("exists".into());
                }
                self.entities.insert(id(e), BTreeSet::new());
            }
            AtomicOp::DeleteEntity(e) => {
                let e = id(e);
                if self.entities.remove(&e).is_none() {
                    return Err("missing".into());
                }
                self.links.retain(|(_, a, b)| *a != e && *b != e);
            }
            AtomicOp::InsertProperty(e, p, v) => {
                let (e, p, v) = (id(e), p.to_string(), val(v));
                if !self.has(&e) {
                    return Err("missing".into());
                }
                if p == LINKS_TO || p == SAME_AS {
                    return Err("reserved".into());
                }
                if self.holder_exists(&p, &v) {
                    return Err("not unique".into());
                }
                self.entities.get_mut(&e).unwrap().insert((p, v));
            }
            AtomicOp::DeleteProperty(e, p, v) => {
                let props = self.entities.get_mut(&id(e)).ok_or("missing")?;
                if !props.remove(&(p.to_string(), val(v))) {
                    return Err("no such pair".into());
                }
            }
            AtomicOp::UpdateProperty(e, p, old, new) => {
                self.op(&AtomicOp::DeleteProperty(e.clone(), p.clone(), old.clone()))?;
                self.op(&AtomicOp::InsertProperty(e.clone(), p.clone(), new.clone()))?;
            }
            AtomicOp::InsertLink(a, b) => self.link(LINKS_TO, &id(a), &id(b))?,
            AtomicOp::DeleteLink(a, b) => {
                let (a, b) = (id(a), id(b));
                if !self.has(&a) || !self.has(&b) || !self.linked(LINKS_TO, &a, &b) {
                    return Err("no link".into());
                }
                self.links.retain(|(k, x, y)| !(*k == LINKS_TO && ((*x == a && *y == b) || (*x == b && *y == a))));
            }
            AtomicOp::ShallowCopy { source, target } => {
                if !self.has(&id(source)) || self.has(&id(target)) {
                    return Err("bad copy".into());
                }
                self.entities.insert(id(target), BTreeSet::new());
                self.link(SAME_AS, &id(target), &id(source))?;
            }
            AtomicOp::DeepCopy { source, target } => {
                let (s, t) = (id(source), id(target));
                if !self.has(&s) || self.has(&t) {
                    return Err("bad copy".into());
                }
                let props = self.entities[&s].clone();
                self.entities.insert(t.clone(), props);
                let touching: Vec<_> = self
                    .links
                    .iter()
                    .filter(|(_, x, y)| *x == s || *y == s)
                    .map(|(k, x, y)| (*k, if *x == s { y.clone() } else { x.clone() }))
                    .collect();
                for (k, other) in touching {
                    let other = if other == s { t.clone() } else { other };
                    self.links.insert((k, t.clone(), other));
                }
            }
        }
        Ok(())
    }

    fn link(&mut self, kind: &'static str, a: &str, b: &str) -> Result<(), String> {
        if !self.has(a) || !self.has(b) || self.linked(kind, a, b) {
            return Err("bad link".into());
        }
        self.links.insert((kind, a.to_string(), b.to_string()));
        Ok(())
    }

    /// Applies a whole transaction or nothing.
    pub fn apply_tx(&mut self, ops: &[AtomicOp]) -> bool {
        let mut next = self.clone();
        for op in ops {
            if next.op(op).is_err() {
                return false;
            }
        }
        *self = next;
        true
    }

    pub fn of(reg: &Registry) -> RefState {
        let mut out = RefState::default();
        for e in reg.entity_ids() {
            let rec = reg.entity(e).unwrap();
            let props = rec.properties.keys().map(|(p, v)| (p.to_string(), val(v))).collect();
            out.entities.insert(id(e), props);
            for ((kind, other), entry) in &rec.links {
                let k = match kind {
                    LinkKind::LinksTo => LINKS_TO,
                    LinkKind::SameAs => SAME_AS,
                };
                if entry.half != LinkHalf::Inverse {
                    out.links.insert((k, id(e), id(other)));
                }
            }
        }
        out
    }
}

/// Every ordering of `items`.
pub fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Whether applying the transactions in `committed`, in some order, each
/// succeeding, ends in `target`.
pub fn some_serial_order_matches(
    initial: &RefState,
    txs: &[Vec<AtomicOp>],
    committed: &[usize],
    target: &RefState,
) -> bool {
    permutations(committed).into_iter().any(|order| {
        let mut s = initial.clone();
        order.iter().all(|&i| s.apply_tx(&txs[i])) && &s == target
    })
}
