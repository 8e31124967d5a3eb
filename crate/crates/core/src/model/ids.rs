use std::fmt;
use std::str::FromStr;

use super::ModelError;

pub const URN_PREFIX: &str = "urn:ers:";
/// Path used by the short `ers:` prefix and by author graphs.
pub const DEFAULT_PATH: &str = "ers";
/// Namespace that short predicates expand into when written as IRIs.
pub const PREDICATE_NAMESPACE: &str = "urn:ers:prop:";

fn check_token(what: &'static str, token: &str) -> Result<(), ModelError> {
    if token.is_empty() {
        return Err(ModelError::InvalidToken { what, token: token.to_string(), reason: "empty" });
    }
    if token.chars().any(char::is_whitespace) {
        return Err(ModelError::InvalidToken { what, token: token.to_string(), reason: "contains whitespace" });
    }
    if token.contains(':') {
        return Err(ModelError::InvalidToken { what, token: token.to_string(), reason: "contains ':'" });
    }
    Ok(())
}

/// Identifier of an entity, `urn:ers:<path>:<local>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId {
    path: String,
    local: String,
}

impl EntityId {
    /// Mints an id from its two segments.
    pub fn mint(path: &str, local: &str) -> Result<Self, ModelError> {
        let invalid = |_| ModelError::InvalidUrn(format!("{URN_PREFIX}{path}:{local}"));
        check_token("path", path).map_err(invalid)?;
        check_token("local", local).map_err(invalid)?;
        Ok(Self { path: path.to_string(), local: local.to_string() })
    }

    /// Parses the canonical text form.
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let invalid = || ModelError::InvalidUrn(text.to_string());
        let rest = text.strip_prefix(URN_PREFIX).ok_or_else(invalid)?;
        let (path, local) = rest.split_once(':').ok_or_else(invalid)?;
        Self::mint(path, local).map_err(|_| invalid())
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    pub fn local(&self) -> &str {
        &self.local
    }

    /// Form used inside document ids: the bare local part in the default
    /// path, the full URN otherwise.
    pub fn short_form(&self) -> String {
        if self.path == DEFAULT_PATH {
            self.local.clone()
        } else {
            self.to_string()
        }
    }

    /// Inverse of [`EntityId::short_form`].
    pub fn from_short_form(text: &str) -> Result<Self, ModelError> {
        if text.starts_with(URN_PREFIX) {
            Self::parse(text)
        } else {
            Self::mint(DEFAULT_PATH, text)
        }
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{URN_PREFIX}{}:{}", self.path, self.local)
    }
}

impl FromStr for EntityId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

/// A node name. Contributors, bridges and the global server each have one.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeName(String);

impl NodeName {
    pub fn new(name: &str) -> Result<Self, ModelError> {
        check_token("node name", name)?;
        Ok(Self(name.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for NodeName {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

const CACHE_SUFFIX: &str = "~cache";

/// A named graph. Every graph has exactly one author, so the author token is
/// the whole identity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GraphId {
    author: String,
}

impl GraphId {
    pub fn new(author: &str) -> Result<Self, ModelError> {
        check_token("graph author", author)?;
        Ok(Self { author: author.to_string() })
    }

    /// The graph a node writes its own contributions into.
    pub fn of(node: &NodeName) -> Self {
        Self { author: node.0.clone() }
    }

    /// The graph holding a node's published query results. Distinct from
    /// [`GraphId::of`] so cached views never collide with contributions.
    pub fn cache_of(node: &NodeName) -> Self {
        Self { author: format!("{}{CACHE_SUFFIX}", node.0) }
    }

    /// Sorts before every valid graph; used as a range bound.
    pub(crate) fn minimum() -> Self {
        Self { author: String::new() }
    }

    pub fn author(&self) -> &str {
        &self.author
    }

    /// The node that owns this graph, for both contribution and cache graphs.
    pub fn owner(&self) -> &str {
        self.author.strip_suffix(CACHE_SUFFIX).unwrap_or(&self.author)
    }

    pub fn is_owned_by(&self, node: &NodeName) -> bool {
        self.owner() == node.as_str()
    }

    /// The graph rendered as an IRI.
    pub fn to_iri(&self) -> String {
        format!("{URN_PREFIX}{DEFAULT_PATH}:{}", self.author)
    }
}

impl fmt::Display for GraphId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.author)
    }
}

/// A predicate token. Predicates written as `urn:ers:prop:<name>` are stored
/// in their short form `<name>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Predicate(String);

impl Predicate {
    pub fn new(text: &str) -> Result<Self, ModelError> {
        let text = text.strip_prefix(PREDICATE_NAMESPACE).unwrap_or(text);
        if text.is_empty() || text.chars().any(char::is_whitespace) {
            return Err(ModelError::InvalidToken {
                what: "predicate",
                token: text.to_string(),
                reason: "empty or contains whitespace",
            });
        }
        Ok(Self(text.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Control predicates carried in document flags rather than properties.
    pub fn is_reserved(&self) -> bool {
        self.0.starts_with('@')
    }

    /// The predicate rendered as an IRI.
    pub fn to_iri(&self) -> String {
        if self.0.contains(':') {
            self.0.clone()
        } else {
            format!("{PREDICATE_NAMESPACE}{}", self.0)
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Predicate {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mint_produces_canonical_urn() {
        assert_eq!(EntityId::mint("ers", "message1").unwrap().to_string(), "urn:ers:ers:message1");
        assert_eq!(EntityId::mint("a", "b").unwrap().to_string(), "urn:ers:a:b");
    }

    #[test]
    fn mint_rejects_bad_tokens() {
        assert!(matches!(EntityId::mint("games", "item 7"), Err(ModelError::InvalidUrn(_))));
        assert!(EntityId::mint("", "x").is_err());
        assert!(EntityId::mint("a", "").is_err());
        assert!(EntityId::mint("a:b", "c").is_err());
        assert!(EntityId::mint("a", "b\tc").is_err());
    }

    #[test]
    fn parse_round_trips_and_rejects() {
        let id = EntityId::parse("urn:ers:ers:message1").unwrap();
        assert_eq!(id, EntityId::mint("ers", "message1").unwrap());
        assert!(matches!(EntityId::parse("urn:ers:ers"), Err(ModelError::InvalidUrn(_))));
        assert!(EntityId::parse("http://example.org/x").is_err());
        assert!(EntityId::parse("urn:ers::x").is_err());
        assert!(EntityId::parse("urn:ers:a:b:c").is_err());
    }

    #[test]
    fn short_form_depends_on_path() {
        let short = EntityId::mint("ers", "message1").unwrap();
        assert_eq!(short.short_form(), "message1");
        let long = EntityId::mint("games", "item7").unwrap();
        assert_eq!(long.short_form(), "urn:ers:games:item7");
        assert_eq!(EntityId::from_short_form("message1").unwrap(), short);
        assert_eq!(EntityId::from_short_form("urn:ers:games:item7").unwrap(), long);
    }

    #[test]
    fn predicate_namespace_is_stripped() {
        assert_eq!(Predicate::new("urn:ers:prop:body").unwrap().as_str(), "body");
        assert_eq!(Predicate::new("body").unwrap().to_iri(), "urn:ers:prop:body");
        let full = Predicate::new("http://purl.org/dc/elements/1.1/title").unwrap();
        assert_eq!(full.to_iri(), "http://purl.org/dc/elements/1.1/title");
        assert!(Predicate::new("two words").is_err());
        assert!(Predicate::new("@to").unwrap().is_reserved());
    }

    #[test]
    fn cache_graph_is_distinct_but_owned() {
        let node = NodeName::new("xo1").unwrap();
        let own = GraphId::of(&node);
        let cache = GraphId::cache_of(&node);
        assert_ne!(own, cache);
        assert!(cache.is_owned_by(&node));
        assert!(own.is_owned_by(&node));
        assert_eq!(cache.owner(), "xo1");
    }
}
