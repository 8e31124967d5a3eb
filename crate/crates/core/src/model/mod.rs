//! Identifiers, statements, documents and their serializations.
//!
//! A [`Document`] holds everything one author said about one entity. It is
//! the unit of storage and replication; the codecs in [`codec`] render it in
//! the layouts whose storage cost is compared by `ers encode`.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub mod codec;
pub mod corpus;
mod ids;
pub mod nquads;

pub use ids::{EntityId, GraphId, NodeName, Predicate, DEFAULT_PATH, PREDICATE_NAMESPACE, URN_PREFIX};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid URN: {0:?}")]
    InvalidUrn(String),
    #[error("invalid {what} {token:?}: {reason}")]
    InvalidToken { what: &'static str, token: String, reason: &'static str },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("malformed document: {0}")]
    Decode(String),
}

/// Object position of a statement.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Literal(String),
    Reference(EntityId),
}

impl Value {
    pub fn literal(text: impl Into<String>) -> Self {
        Value::Literal(text.into())
    }

    pub fn is_reference(&self) -> bool {
        matches!(self, Value::Reference(_))
    }

    /// Text payload: the literal itself or the canonical id.
    pub fn text(&self) -> String {
        match self {
            Value::Literal(s) => s.clone(),
            Value::Reference(id) => id.to_string(),
        }
    }

    /// Reads a value back from its document text. Anything that parses as an
    /// entity id, in canonical or `ers:` prefixed form, is a reference.
    pub fn from_text(text: &str) -> Self {
        if let Ok(id) = EntityId::parse(text) {
            return Value::Reference(id);
        }
        if let Some(local) = text.strip_prefix("ers:") {
            if let Ok(id) = EntityId::mint(DEFAULT_PATH, local) {
                return Value::Reference(id);
            }
        }
        Value::Literal(text.to_string())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Literal(s) => write!(f, "{s:?}"),
            Value::Reference(id) => write!(f, "<{id}>"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quad {
    pub subject: EntityId,
    pub predicate: Predicate,
    pub object: Value,
    pub graph: GraphId,
}

/// Control predicates. They live in [`Flags`] and only appear as keys in the
/// serialized forms.
pub const FLAG_TO: &str = "@to";
pub const FLAG_PRIVATE: &str = "@private";
pub const FLAG_CACHED_QUERY: &str = "@cachedQuery";

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Flags {
    pub private: bool,
    pub addressed_to: Option<NodeName>,
    pub cached_query: bool,
}

impl Flags {
    /// Not private and not addressed to any particular node.
    pub fn is_public(&self) -> bool {
        !self.private && self.addressed_to.is_none()
    }
}

pub type Properties = BTreeMap<Predicate, Vec<Value>>;

/// All statements one graph makes about one entity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    entity: EntityId,
    graph: GraphId,
    properties: Properties,
    pub flags: Flags,
    revision: u64,
}

impl Document {
    pub fn new(entity: EntityId, graph: GraphId) -> Self {
        Self { entity, graph, properties: Properties::new(), flags: Flags::default(), revision: 0 }
    }

    /// `<entity short form> <author>`.
    pub fn doc_id(&self) -> String {
        doc_id(&self.entity, &self.graph)
    }

    pub fn entity(&self) -> &EntityId {
        &self.entity
    }

    pub fn graph(&self) -> &GraphId {
        &self.graph
    }

    pub fn properties(&self) -> &Properties {
        &self.properties
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn set_revision(&mut self, revision: u64) {
        self.revision = revision;
    }

    pub fn bump_revision(&mut self) {
        self.revision += 1;
    }

    /// Adds a (predicate, value) pair. Pairs are a set: returns false when
    /// the pair is already present. Reserved predicates are rejected.
    pub fn insert(&mut self, predicate: Predicate, value: Value) -> Result<bool, ModelError> {
        if predicate.is_reserved() {
            return Err(ModelError::InvalidToken {
                what: "predicate",
                token: predicate.to_string(),
                reason: "reserved for control flags",
            });
        }
        let values = self.properties.entry(predicate).or_default();
        if values.contains(&value) {
            return Ok(false);
        }
        values.push(value);
        Ok(true)
    }

    /// Number of (predicate, value) pairs.
    pub fn pair_count(&self) -> usize {
        self.properties.values().map(Vec::len).sum()
    }

    /// Pairs in document order: predicates lexicographic, values in
    /// insertion order.
    pub fn pairs(&self) -> impl Iterator<Item = (&Predicate, &Value)> {
        self.properties.iter().flat_map(|(p, vs)| vs.iter().map(move |v| (p, v)))
    }

    pub fn quads(&self) -> impl Iterator<Item = Quad> + '_ {
        self.pairs().map(|(p, v)| Quad {
            subject: self.entity.clone(),
            predicate: p.clone(),
            object: v.clone(),
            graph: self.graph.clone(),
        })
    }
}

pub fn doc_id(entity: &EntityId, graph: &GraphId) -> String {
    format!("{} {}", entity.short_form(), graph.author())
}

/// Groups quads into documents, one per (subject, graph).
pub fn documents_from_quads(quads: impl IntoIterator<Item = Quad>) -> Vec<Document> {
    let mut docs: BTreeMap<(EntityId, GraphId), Document> = BTreeMap::new();
    for q in quads {
        let doc = docs.entry((q.subject.clone(), q.graph.clone())).or_insert_with(|| Document::new(q.subject, q.graph));
        if !q.predicate.is_reserved() && doc.insert(q.predicate, q.object).unwrap_or(false) {
            doc.revision = 1;
        }
    }
    docs.into_values().collect()
}
