//! Deterministic synthetic bibliography corpus.
//!
//! Entities look like publication records: 8 to 12 properties each, drawn
//! from a fixed vocabulary of full-IRI predicates, with a mix of literals and
//! references to other entities. Every block of [`BLOCK`] consecutive
//! entities is contributed by one graph.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Document, EntityId, GraphId, Predicate, Value};

pub const CORPUS_PATH: &str = "sp";
pub const BLOCK: usize = 50;
pub const MIN_PROPERTIES: usize = 8;
pub const MAX_PROPERTIES: usize = 12;

#[derive(Clone, Copy)]
enum Shape {
    Words(usize, usize),
    Number(u32, u32),
    Pages,
    Reference,
}

const VOCABULARY: [(&str, Shape); 16] = [
    ("http://purl.org/dc/elements/1.1/title", Shape::Words(6, 16)),
    ("http://purl.org/dc/elements/1.1/creator", Shape::Reference),
    ("http://purl.org/dc/terms/issued", Shape::Number(1936, 2012)),
    ("http://swrc.ontoware.org/ontology#pages", Shape::Pages),
    ("http://swrc.ontoware.org/ontology#journal", Shape::Reference),
    ("http://xmlns.com/foaf/0.1/homepage", Shape::Words(3, 6)),
    ("http://purl.org/dc/terms/references", Shape::Reference),
    ("http://swrc.ontoware.org/ontology#month", Shape::Number(1, 12)),
    ("http://swrc.ontoware.org/ontology#volume", Shape::Number(1, 60)),
    ("http://swrc.ontoware.org/ontology#number", Shape::Number(1, 12)),
    ("http://swrc.ontoware.org/ontology#note", Shape::Words(8, 24)),
    ("http://www.w3.org/2000/01/rdf-schema#seeAlso", Shape::Reference),
    ("http://swrc.ontoware.org/ontology#abstract", Shape::Words(30, 70)),
    ("http://xmlns.com/foaf/0.1/name", Shape::Words(2, 4)),
    ("http://swrc.ontoware.org/ontology#isbn", Shape::Number(100_000_000, 999_999_999)),
    ("http://purl.org/dc/terms/partOf", Shape::Reference),
];

const WORDS: [&str; 48] = [
    "adaptive",
    "algebra",
    "analysis",
    "approach",
    "bounded",
    "cache",
    "calculus",
    "channel",
    "compiler",
    "concurrent",
    "consensus",
    "data",
    "distributed",
    "dynamic",
    "efficient",
    "entity",
    "evaluation",
    "framework",
    "graph",
    "hierarchical",
    "incremental",
    "index",
    "inference",
    "kernel",
    "language",
    "linked",
    "logic",
    "memory",
    "model",
    "network",
    "optimal",
    "parallel",
    "partition",
    "protocol",
    "query",
    "random",
    "registry",
    "replication",
    "retrieval",
    "schema",
    "semantic",
    "storage",
    "stream",
    "structure",
    "system",
    "theory",
    "transaction",
    "web",
];

fn literal(rng: &mut ChaCha8Rng, shape: Shape) -> String {
    match shape {
        Shape::Words(lo, hi) => {
            let n = rng.gen_range(lo..=hi);
            (0..n).map(|_| *WORDS.choose(rng).expect("non-empty")).collect::<Vec<_>>().join(" ")
        }
        Shape::Number(lo, hi) => rng.gen_range(lo..=hi).to_string(),
        Shape::Pages => {
            let start = rng.gen_range(1..900);
            format!("{}-{}", start, start + rng.gen_range(4..40))
        }
        Shape::Reference => unreachable!("references are not literals"),
    }
}

pub fn entity(i: usize) -> EntityId {
    EntityId::mint(CORPUS_PATH, &format!("e{i}")).expect("valid corpus id")
}

/// Generates `n_entities` documents. Same arguments, same corpus.
pub fn gen_corpus(n_entities: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..VOCABULARY.len()).collect();
    (0..n_entities)
        .map(|i| {
            let graph = GraphId::new(&format!("src{}", i / BLOCK)).expect("valid graph");
            let mut doc = Document::new(entity(i), graph);
            let k = rng.gen_range(MIN_PROPERTIES..=MAX_PROPERTIES);
            order.shuffle(&mut rng);
            for &slot in &order[..k] {
                let (iri, shape) = VOCABULARY[slot];
                let value = match shape {
                    Shape::Reference => Value::Reference(entity(rng.gen_range(0..n_entities))),
                    other => Value::Literal(literal(&mut rng, other)),
                };
                doc.insert(Predicate::new(iri).expect("valid predicate"), value)
                    .expect("vocabulary has no reserved predicates");
            }
            doc.set_revision(1);
            doc
        })
        .collect()
}
