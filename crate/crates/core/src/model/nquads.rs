//! Reader for the N-Quads subset used by datasets: `<iri>` or `prefix:local`
//! terms, double-quoted literals, the graph as fourth term and a ` .`
//! terminator. Lines starting with `#` are comments.

use super::{EntityId, GraphId, ModelError, Predicate, Quad, Value, DEFAULT_PATH, PREDICATE_NAMESPACE, URN_PREFIX};

/// Prefixes understood in `prefix:local` terms.
pub const PREFIXES: [(&str, &str); 2] = [("ers-prop:", PREDICATE_NAMESPACE), ("ers:", "urn:ers:ers:")];

#[derive(Debug, PartialEq)]
enum Term {
    Iri(String),
    Literal(String),
}

struct Cursor<'a> {
    rest: &'a str,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn error(&self, message: impl Into<String>) -> ModelError {
        ModelError::Parse { line: self.line, message: message.into() }
    }

    fn skip_ws(&mut self) {
        self.rest = self.rest.trim_start_matches([' ', '\t']);
    }

    fn term(&mut self) -> Result<Term, ModelError> {
        self.skip_ws();
        let mut chars = self.rest.chars();
        match chars.next() {
            None => Err(self.error("unexpected end of line")),
            Some('<') => {
                let end = self.rest.find('>').ok_or_else(|| self.error("unterminated IRI"))?;
                let iri = &self.rest[1..end];
                if iri.is_empty() || iri.contains(char::is_whitespace) {
                    return Err(self.error(format!("bad IRI <{iri}>")));
                }
                self.rest = &self.rest[end + 1..];
                Ok(Term::Iri(iri.to_string()))
            }
            Some('"') => {
                let mut text = String::new();
                let mut consumed = 1;
                let mut escaped = false;
                let mut closed = false;
                for c in chars {
                    consumed += c.len_utf8();
                    if escaped {
                        text.push(match c {
                            '"' => '"',
                            '\\' => '\\',
                            'n' => '\n',
                            'r' => '\r',
                            't' => '\t',
                            other => return Err(self.error(format!("unknown escape \\{other}"))),
                        });
                        escaped = false;
                    } else if c == '\\' {
                        escaped = true;
                    } else if c == '"' {
                        closed = true;
                        break;
                    } else {
                        text.push(c);
                    }
                }
                if !closed {
                    return Err(self.error("unterminated literal"));
                }
                self.rest = &self.rest[consumed..];
                Ok(Term::Literal(text))
            }
            Some(_) => {
                let end = self.rest.find([' ', '\t']).unwrap_or(self.rest.len());
                let token = &self.rest[..end];
                let (prefix, expansion) = PREFIXES
                    .iter()
                    .find(|(p, _)| token.starts_with(p))
                    .ok_or_else(|| self.error(format!("unknown term {token:?}")))?;
                self.rest = &self.rest[end..];
                Ok(Term::Iri(format!("{expansion}{}", &token[prefix.len()..])))
            }
        }
    }
}

fn entity(cur: &Cursor, term: Term, role: &str) -> Result<EntityId, ModelError> {
    match term {
        Term::Iri(iri) => EntityId::parse(&iri).map_err(|e| cur.error(format!("{role}: {e}"))),
        Term::Literal(_) => Err(cur.error(format!("{role} cannot be a literal"))),
    }
}

fn parse_line(line: &str, number: usize) -> Result<Option<Quad>, ModelError> {
    let trimmed = line.trim_matches([' ', '\t']);
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let mut cur = Cursor { rest: trimmed, line: number };
    let subject_term = cur.term()?;
    let subject = entity(&cur, subject_term, "subject")?;
    let predicate = match cur.term()? {
        Term::Iri(iri) => Predicate::new(&iri).map_err(|e| cur.error(e.to_string()))?,
        Term::Literal(_) => return Err(cur.error("predicate cannot be a literal")),
    };
    let object = match cur.term()? {
        Term::Literal(text) => Value::Literal(text),
        iri => Value::Reference(entity(&cur, iri, "object")?),
    };
    let graph_term = cur.term()?;
    let graph_entity = entity(&cur, graph_term, "graph")?;
    if graph_entity.path() != DEFAULT_PATH {
        return Err(cur.error(format!("graph must be {URN_PREFIX}{DEFAULT_PATH}:<author>")));
    }
    let graph = GraphId::new(graph_entity.local()).map_err(|e| cur.error(e.to_string()))?;
    cur.skip_ws();
    let rest = cur.rest.strip_prefix('.').ok_or_else(|| cur.error("expected '.' after the graph term"))?;
    let rest = rest.trim_start_matches([' ', '\t']);
    if !rest.is_empty() && !rest.starts_with('#') {
        return Err(cur.error(format!("trailing content {rest:?}")));
    }
    Ok(Some(Quad { subject, predicate, object, graph }))
}

/// Parses N-Quads text. Errors carry the 1-based line number.
pub fn parse_nquads(text: &[u8]) -> Result<Vec<Quad>, ModelError> {
    let text = std::str::from_utf8(text).map_err(|e| ModelError::Parse {
        line: text[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1,
        message: "invalid UTF-8".into(),
    })?;
    let mut quads = Vec::new();
    for (i, line) in text.split('\n').enumerate() {
        if let Some(q) = parse_line(line.strip_suffix('\r').unwrap_or(line), i + 1)? {
            quads.push(q);
        }
    }
    Ok(quads)
}
