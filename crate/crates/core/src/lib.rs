//! Entity registry for offline-first collaborative description.
//!
//! Contributors author one document per entity, replicate them through
//! bridges over intermittent links, and a global registry aggregates
//! everything behind a two-level lock table.

pub mod model;
pub mod registry;
pub mod simnet;
pub mod store;
pub mod sync;
pub mod time;

pub use model::{Document, EntityId, Flags, GraphId, ModelError, NodeName, Predicate, Properties, Quad, Value};
pub use registry::{AtomicOp, LockKey, LockTable, Registry, RegistryError, UniquenessMode};
pub use simnet::{Metrics, Scenario, ScenarioError, Simulation};
pub use store::{EntityView, Role, Store, StoreError};
pub use sync::{sync_session, AcceptDecision, AcceptReason, RolePair, SyncError, SyncReport};
pub use time::VTime;
