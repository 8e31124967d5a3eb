//! Fixtures shared by the criterion benches.

use ers_core::model::corpus::gen_corpus;
use ers_core::model::{Document, EntityId, NodeName, Predicate, Value};
use ers_core::registry::bench::seed_pool;
use ers_core::registry::Registry;
use ers_core::store::{Role, Store};
use ers_core::time::VTime;

pub fn corpus(n: usize) -> Vec<Document> {
    gen_corpus(n, 42)
}

/// Registry holding `n` pool entities with 8 to 12 properties each.
pub fn registry(n: usize) -> Registry {
    seed_pool(n, 42)
}

/// A contributor that authored `n` single-pair documents.
pub fn contributor(name: &str, n: usize) -> Store {
    let node = NodeName::new(name).unwrap();
    let mut s = Store::new(node.clone(), Role::Contributor);
    let p = Predicate::new("title").unwrap();
    for i in 0..n {
        let e = EntityId::mint(name, &format!("d{i}")).unwrap();
        s.put_local(&e, p.clone(), Value::literal(format!("doc {i}")), VTime::ZERO).unwrap();
    }
    s
}
