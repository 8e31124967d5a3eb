use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::model::{EntityId, Predicate};

use super::TxId;

/// A lock on an entity, or on one property of an entity. Entities need not
/// exist to be locked.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LockKey {
    EntityProperty(EntityId, Predicate),
    Entity(EntityId),
}

impl LockKey {
    pub fn entity(&self) -> &EntityId {
        match self {
            LockKey::EntityProperty(e, _) | LockKey::Entity(e) => e,
        }
    }
}

impl fmt::Display for LockKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LockKey::EntityProperty(e, p) => write!(f, "L[{}+{}]", e.short_form(), p),
            LockKey::Entity(e) => write!(f, "L[{}]", e.short_form()),
        }
    }
}

/// Whether two transactions may hold `a` and `b` at the same time.
pub fn compatible(a: &LockKey, b: &LockKey) -> bool {
    match (a, b) {
        (LockKey::EntityProperty(ea, pa), LockKey::EntityProperty(eb, pb)) => ea != eb || pa != pb,
        _ => a.entity() != b.entity(),
    }
}

/// Labels of the 6x6 compatibility grid, over entities `a`, `b` and
/// properties `c`, `d`.
pub const GRID_LABELS: [&str; 6] = ["Ea+Pc", "Ea+Pd", "Eb+Pc", "Eb+Pd", "Ea", "Eb"];

/// Expected grid; `false` marks an incompatible pair.
pub const EXPECTED_GRID: [[bool; 6]; 6] = [
    [false, true, true, true, false, true],
    [true, false, true, true, false, true],
    [true, true, false, true, true, false],
    [true, true, true, false, true, false],
    [false, false, true, true, false, true],
    [true, true, false, false, true, false],
];

pub fn grid_keys() -> [LockKey; 6] {
    let e = |l: &str| EntityId::mint("lock", l).expect("valid id");
    let p = |s: &str| Predicate::new(s).expect("valid predicate");
    [
        LockKey::EntityProperty(e("a"), p("c")),
        LockKey::EntityProperty(e("a"), p("d")),
        LockKey::EntityProperty(e("b"), p("c")),
        LockKey::EntityProperty(e("b"), p("d")),
        LockKey::Entity(e("a")),
        LockKey::Entity(e("b")),
    ]
}

/// Evaluates [`compatible`] over the grid keys.
pub fn compatibility_grid() -> [[bool; 6]; 6] {
    let keys = grid_keys();
    let mut grid = [[false; 6]; 6];
    for (i, held) in keys.iter().enumerate() {
        for (j, requested) in keys.iter().enumerate() {
            grid[i][j] = compatible(held, requested);
        }
    }
    grid
}

/// Locks currently held, by transaction. Acquisition is all or nothing.
#[derive(Debug, Clone, Default)]
pub struct LockTable {
    held: BTreeMap<TxId, BTreeSet<LockKey>>,
    by_entity: BTreeMap<EntityId, Vec<(TxId, LockKey)>>,
}

impl LockTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Grants every key in `keys` to `tx`, or nothing if any of them
    /// conflicts with a lock held by another transaction.
    pub fn try_acquire(&mut self, tx: TxId, keys: &BTreeSet<LockKey>) -> bool {
        let conflict = keys.iter().any(|k| {
            self.by_entity
                .get(k.entity())
                .is_some_and(|held| held.iter().any(|(owner, h)| *owner != tx && !compatible(h, k)))
        });
        if conflict {
            return false;
        }
        let mine = self.held.entry(tx).or_default();
        for k in keys {
            if mine.insert(k.clone()) {
                self.by_entity.entry(k.entity().clone()).or_default().push((tx, k.clone()));
            }
        }
        true
    }

    pub fn release(&mut self, tx: TxId) {
        let Some(keys) = self.held.remove(&tx) else { return };
        for k in keys {
            if let Some(list) = self.by_entity.get_mut(k.entity()) {
                list.retain(|(owner, _)| *owner != tx);
                if list.is_empty() {
                    self.by_entity.remove(k.entity());
                }
            }
        }
    }

    pub fn held_by(&self, tx: TxId) -> Option<&BTreeSet<LockKey>> {
        self.held.get(&tx)
    }

    pub fn is_empty(&self) -> bool {
        self.held.is_empty()
    }

    /// Every pair of locks held by distinct transactions is compatible.
    pub fn is_safe(&self) -> bool {
        let all: Vec<(TxId, &LockKey)> =
            self.held.iter().flat_map(|(tx, keys)| keys.iter().map(move |k| (*tx, k))).collect();
        all.iter().enumerate().all(|(i, (ta, a))| all[i + 1..].iter().all(|(tb, b)| ta == tb || compatible(a, b)))
    }
}
