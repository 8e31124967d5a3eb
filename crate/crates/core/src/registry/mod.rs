//! The global registry: an aggregated read-only view fed by harvesting
//! bridges, plus a transactional write path with hierarchical locks.

pub mod bench;
mod harvest;
pub mod interleave;
mod locks;
mod state;
mod tx;

pub use harvest::{HarvestError, HarvestReport, UniquenessConflict};
pub use locks::{compatibility_grid, compatible, grid_keys, LockKey, LockTable, EXPECTED_GRID, GRID_LABELS};
pub use state::{
    lock_demand, registry_graph, AtomicOp, EntityRecord, LinkEntry, LinkHalf, LinkKind, Registry, RegistryError,
    RegistryTriple, UniquenessMode, LINKS_TO, REGISTRY_GRAPH, SAME_AS,
};
pub use tx::{attempt, settle, Attempt, Committed, SharedRegistry, Transaction, TxError, TxState, MAX_RETRIES};

pub type TxId = u64;
