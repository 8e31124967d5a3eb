//! Document serializations.
//!
//! Output is compact JSON with exactly one space after each `:` and `,`.
//! Predicates appear in lexicographic order and values keep insertion order,
//! so every encoder is a pure function of the document.

use serde_json::Value as Json;

use super::{
    Document, EntityId, GraphId, ModelError, NodeName, Predicate, Value, FLAG_CACHED_QUERY, FLAG_PRIVATE, FLAG_TO,
};

fn json_str(out: &mut String, s: &str) {
    // serde_json's string escaping; infallible for &str
    out.push_str(&serde_json::to_string(s).expect("string serialization"));
}

fn flag_pairs(doc: &Document) -> Vec<(&'static str, String)> {
    let mut pairs = Vec::new();
    if doc.flags.cached_query {
        pairs.push((FLAG_CACHED_QUERY, "true".to_string()));
    }
    if doc.flags.private {
        pairs.push((FLAG_PRIVATE, "true".to_string()));
    }
    if let Some(to) = &doc.flags.addressed_to {
        pairs.push((FLAG_TO, to.to_string()));
    }
    pairs
}

/// Model 1: one key per predicate mapping to the array of its values.
pub fn encode_model1(doc: &Document) -> Vec<u8> {
    let mut out = String::with_capacity(64 + doc.pair_count() * 32);
    out.push_str("{\"_id\": ");
    json_str(&mut out, &doc.doc_id());
    for (key, value) in flag_pairs(doc) {
        out.push_str(", ");
        json_str(&mut out, key);
        out.push_str(": [");
        json_str(&mut out, &value);
        out.push(']');
    }
    for (predicate, values) in doc.properties() {
        out.push_str(", ");
        json_str(&mut out, predicate.as_str());
        out.push_str(": [");
        for (i, v) in values.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            json_str(&mut out, &v.text());
        }
        out.push(']');
    }
    out.push('}');
    out.into_bytes()
}

/// Model 2: two parallel arrays `p` and `v`.
pub fn encode_model2(doc: &Document) -> Vec<u8> {
    let mut preds: Vec<String> = Vec::new();
    let mut values: Vec<String> = Vec::new();
    for (key, value) in flag_pairs(doc) {
        preds.push(key.to_string());
        values.push(value);
    }
    for (p, v) in doc.pairs() {
        preds.push(p.as_str().to_string());
        values.push(v.text());
    }
    let mut out = String::with_capacity(64 + values.len() * 40);
    out.push_str("{\"_id\": ");
    json_str(&mut out, &doc.doc_id());
    for (key, items) in [("p", &preds), ("v", &values)] {
        out.push_str(", \"");
        out.push_str(key);
        out.push_str("\": [");
        for (i, item) in items.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            json_str(&mut out, item);
        }
        out.push(']');
    }
    out.push('}');
    out.into_bytes()
}

/// One standalone object per (predicate, value) pair.
pub fn encode_per_quad(doc: &Document) -> Vec<Vec<u8>> {
    let doc_id = doc.doc_id();
    let subject = doc.entity().to_string();
    let graph = doc.graph().to_iri();
    doc.pairs()
        .enumerate()
        .map(|(ordinal, (p, v))| {
            let mut out = String::with_capacity(160);
            out.push_str("{\"_id\": ");
            json_str(&mut out, &format!("{doc_id} {ordinal}"));
            out.push_str(", \"subject\": ");
            json_str(&mut out, &subject);
            out.push_str(", \"predicate\": ");
            json_str(&mut out, p.as_str());
            out.push_str(", \"value\": ");
            json_str(&mut out, &v.text());
            out.push_str(", \"graph\": ");
            json_str(&mut out, &graph);
            out.push('}');
            out.into_bytes()
        })
        .collect()
}

fn escape_literal(out: &mut String, text: &str) {
    out.push('"');
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn push_statement(out: &mut String, doc: &Document, p: &Predicate, v: &Value, graph: Option<&GraphId>) {
    out.push('<');
    out.push_str(&doc.entity().to_string());
    out.push_str("> <");
    out.push_str(&p.to_iri());
    out.push_str("> ");
    match v {
        Value::Literal(s) => escape_literal(out, s),
        Value::Reference(id) => {
            out.push('<');
            out.push_str(&id.to_string());
            out.push('>');
        }
    }
    if let Some(g) = graph {
        out.push_str(" <");
        out.push_str(&g.to_iri());
        out.push('>');
    }
    out.push_str(" .\n");
}

fn encode_lines(docs: &[Document], with_graph: bool) -> Vec<u8> {
    let mut sorted: Vec<&Document> = docs.iter().collect();
    sorted.sort_by_cached_key(|d| d.doc_id());
    let mut out = String::new();
    for doc in sorted {
        for (p, v) in doc.pairs() {
            push_statement(&mut out, doc, p, v, with_graph.then(|| doc.graph()));
        }
    }
    out.into_bytes()
}

/// `<s> <p> <o> .` per pair, documents ordered by doc id.
pub fn encode_ntriples(docs: &[Document]) -> Vec<u8> {
    encode_lines(docs, false)
}

/// As [`encode_ntriples`] with the graph as fourth term.
pub fn encode_nquads(docs: &[Document]) -> Vec<u8> {
    encode_lines(docs, true)
}

fn parse_doc_id(id: &str) -> Result<(EntityId, GraphId), ModelError> {
    let (entity, author) =
        id.split_once(' ').ok_or_else(|| ModelError::Decode(format!("_id {id:?} lacks an author")))?;
    Ok((EntityId::from_short_form(entity)?, GraphId::new(author)?))
}

fn as_str(v: &Json) -> Result<&str, ModelError> {
    v.as_str().ok_or_else(|| ModelError::Decode(format!("expected string, got {v}")))
}

fn apply_pair(doc: &mut Document, key: &str, text: &str) -> Result<(), ModelError> {
    match key {
        FLAG_PRIVATE => doc.flags.private = text == "true",
        FLAG_CACHED_QUERY => doc.flags.cached_query = text == "true",
        FLAG_TO => doc.flags.addressed_to = Some(NodeName::new(text)?),
        _ => {
            doc.insert(Predicate::new(key)?, Value::from_text(text))?;
        }
    }
    Ok(())
}

fn parse_object(bytes: &[u8]) -> Result<(serde_json::Map<String, Json>, EntityId, GraphId), ModelError> {
    let json: Json = serde_json::from_slice(bytes).map_err(|e| ModelError::Decode(e.to_string()))?;
    let Json::Object(map) = json else {
        return Err(ModelError::Decode("expected an object".into()));
    };
    let id = map.get("_id").ok_or_else(|| ModelError::Decode("missing _id".into()))?;
    let (entity, graph) = parse_doc_id(as_str(id)?)?;
    Ok((map, entity, graph))
}

/// Inverse of [`encode_model1`]. The revision is not part of the encoding
/// and comes back as 0.
pub fn decode_model1(bytes: &[u8]) -> Result<Document, ModelError> {
    let (map, entity, graph) = parse_object(bytes)?;
    let mut doc = Document::new(entity, graph);
    for (key, values) in map.iter().filter(|(k, _)| k.as_str() != "_id") {
        let values = values.as_array().ok_or_else(|| ModelError::Decode(format!("{key}: expected an array")))?;
        for v in values {
            apply_pair(&mut doc, key, as_str(v)?)?;
        }
    }
    Ok(doc)
}

/// Inverse of [`encode_model2`].
pub fn decode_model2(bytes: &[u8]) -> Result<Document, ModelError> {
    let (map, entity, graph) = parse_object(bytes)?;
    let array = |key: &str| {
        map.get(key).and_then(Json::as_array).ok_or_else(|| ModelError::Decode(format!("missing array {key:?}")))
    };
    let (preds, values) = (array("p")?, array("v")?);
    if preds.len() != values.len() {
        return Err(ModelError::Decode("p and v differ in length".into()));
    }
    let mut doc = Document::new(entity, graph);
    for (p, v) in preds.iter().zip(values) {
        apply_pair(&mut doc, as_str(p)?, as_str(v)?)?;
    }
    Ok(doc)
}

/// Encoded size of a corpus under each layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SizeReport {
    pub triples: usize,
    pub ntriples: usize,
    pub model1: usize,
    pub model2: usize,
    pub per_quad: usize,
}

impl SizeReport {
    pub fn measure(docs: &[Document]) -> Self {
        let mut report = SizeReport { ntriples: encode_ntriples(docs).len(), ..SizeReport::default() };
        for doc in docs {
            report.triples += doc.pair_count();
            report.model1 += encode_model1(doc).len();
            report.model2 += encode_model2(doc).len();
            report.per_quad += encode_per_quad(doc).iter().map(Vec::len).sum::<usize>();
        }
        report
    }

    /// Rows in Table-1 order: (name, bytes).
    pub fn rows(&self) -> [(&'static str, usize); 4] {
        [("ntriples", self.ntriples), ("m1", self.model1), ("m2", self.model2), ("perquad", self.per_quad)]
    }

    /// kB (1000 bytes) per thousand triples, which is bytes per triple.
    pub fn kb_per_1k_triples(&self, bytes: usize) -> f64 {
        if self.triples == 0 {
            0.0
        } else {
            bytes as f64 / self.triples as f64
        }
    }
}
