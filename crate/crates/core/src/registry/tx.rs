use std::sync::{Mutex, RwLock};
use std::time::Duration;

use thiserror::Error;

use super::locks::LockTable;
use super::state::{lock_demand, registry_graph, AtomicOp, Registry, RegistryError, UniquenessMode};
use super::TxId;

/// Retries after the first attempt before a transaction gives up.
pub const MAX_RETRIES: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxState {
    Pending,
    Committed,
    Aborted,
}

#[derive(Debug, Clone)]
pub struct Transaction {
    pub id: TxId,
    pub ops: Vec<AtomicOp>,
    pub retries_used: u32,
    pub state: TxState,
}

impl Transaction {
    pub fn new(id: TxId, ops: Vec<AtomicOp>) -> Self {
        Self { id, ops, retries_used: 0, state: TxState::Pending }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TxError {
    #[error("transaction {tx} failed: {source}")]
    SemanticFailure { tx: TxId, source: RegistryError },
    #[error("transaction {tx} gave up after {retries} retries")]
    ContentionAborted { tx: TxId, retries: u32 },
    #[error("transaction {0} has no operations")]
    Empty(TxId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Committed {
    pub retries: u32,
    pub writes: usize,
}

/// Outcome of one acquire attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Attempt {
    Committed(Committed),
    Semantic(RegistryError),
    Contention,
}

/// Acquires the union of `tx`'s lock demands, applies its operations
/// atomically and releases. Contention leaves both the table and the
/// registry untouched.
pub fn attempt(locks: &mut LockTable, registry: &mut Registry, tx: &Transaction) -> Attempt {
    let keys = lock_demand(&tx.ops);
    if !locks.try_acquire(tx.id, &keys) {
        return Attempt::Contention;
    }
    let result = registry.apply_batch(&tx.ops, UniquenessMode::Strict, &registry_graph());
    locks.release(tx.id);
    match result {
        Ok(writes) => Attempt::Committed(Committed { retries: tx.retries_used, writes }),
        Err(e) => Attempt::Semantic(e),
    }
}

/// Records an attempt's result on `tx`. Returns `Some` once the
/// transaction has finished.
pub fn settle(tx: &mut Transaction, outcome: Attempt) -> Option<Result<Committed, TxError>> {
    match outcome {
        Attempt::Committed(c) => {
            tx.state = TxState::Committed;
            Some(Ok(c))
        }
        Attempt::Semantic(source) => {
            tx.state = TxState::Aborted;
            Some(Err(TxError::SemanticFailure { tx: tx.id, source }))
        }
        Attempt::Contention if tx.retries_used == MAX_RETRIES => {
            tx.state = TxState::Aborted;
            Some(Err(TxError::ContentionAborted { tx: tx.id, retries: tx.retries_used }))
        }
        Attempt::Contention => {
            tx.retries_used += 1;
            None
        }
    }
}

/// A registry shared between threads. The lock table is the only
/// serialization point for writers; readers clone a consistent snapshot.
#[derive(Debug, Default)]
pub struct SharedRegistry {
    locks: Mutex<LockTable>,
    state: RwLock<Registry>,
    next_tx: Mutex<TxId>,
    /// Backoff unit between retries; retry `n` waits `n` units.
    pub backoff: Duration,
}

impl SharedRegistry {
    pub fn new(registry: Registry, backoff: Duration) -> Self {
        Self { locks: Mutex::default(), state: RwLock::new(registry), next_tx: Mutex::new(0), backoff }
    }

    pub fn begin(&self, ops: Vec<AtomicOp>) -> Transaction {
        let mut next = self.next_tx.lock().expect("poisoned");
        *next += 1;
        Transaction::new(*next, ops)
    }

    pub fn snapshot(&self) -> Registry {
        self.state.read().expect("poisoned").clone()
    }

    pub fn execute(&self, tx: &mut Transaction) -> Result<Committed, TxError> {
        if tx.ops.is_empty() {
            return Err(TxError::Empty(tx.id));
        }
        let keys = lock_demand(&tx.ops);
        loop {
            let granted = {
                let mut locks = self.locks.lock().expect("poisoned");
                let ok = locks.try_acquire(tx.id, &keys);
                debug_assert!(locks.is_safe());
                ok
            };
            let outcome = if granted {
                let result = {
                    let mut state = self.state.write().expect("poisoned");
                    state.apply_batch(&tx.ops, UniquenessMode::Strict, &registry_graph())
                };
                self.locks.lock().expect("poisoned").release(tx.id);
                match result {
                    Ok(writes) => Attempt::Committed(Committed { retries: tx.retries_used, writes }),
                    Err(e) => Attempt::Semantic(e),
                }
            } else {
                Attempt::Contention
            };
            if let Some(done) = settle(tx, outcome) {
                return done;
            }
            std::thread::sleep(self.backoff * tx.retries_used);
        }
    }
}
