//! Random small deployments driven to quiescence by round-robin sync.

#![allow(dead_code)]

use std::collections::BTreeSet;

use ers_core::model::{Document, EntityId, NodeName, Predicate, Value};
use ers_core::store::{Role, Store};
use ers_core::sync::{publish_cached_query, sync_session};
use ers_core::time::VTime;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Topology {
    pub stores: Vec<Store>,
    pub links: Vec<(usize, usize)>,
}

/// Up to `max_nodes` nodes, at least one bridge, bridges connected among
/// themselves and every contributor linked to at least one bridge, plus
/// random extra links of any kind.
pub fn random_topology(seed: u64, max_nodes: usize) -> Topology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=max_nodes);
    let bridges = rng.gen_range(1..n);
    let mut stores = Vec::new();
    for i in 0..n {
        let (name, role) =
            if i < bridges { (format!("b{i}"), Role::Bridge) } else { (format!("xo{i}"), Role::Contributor) };
        stores.push(Store::new(NodeName::new(&name).unwrap(), role));
    }
    let mut links = BTreeSet::new();
    for b in 1..bridges {
        links.insert((rng.gen_range(0..b), b));
    }
    for c in bridges..n {
        links.insert((rng.gen_range(0..bridges), c));
    }
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(0.25) {
                links.insert((a, b));
            }
        }
    }
    let mut links: Vec<_> = links.into_iter().collect();
    links.shuffle(&mut rng);
    Topology { stores, links }
}

/// Each contributor writes two public documents, one private one, one
/// addressed to a random other contributor, and caches a query.
pub fn author_documents(t: &mut Topology, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5);
    let contributors: Vec<usize> = (0..t.stores.len()).filter(|&i| t.stores[i].role() == Role::Contributor).collect();
    let now = VTime(0.0);
    for &c in &contributors {
        let name = t.stores[c].name().clone();
        let s = &mut t.stores[c];
        let p = |x: &str| Predicate::new(x).unwrap();
        let ent = |l: &str| EntityId::mint(name.as_str(), l).unwrap();
        for k in 0..2 {
            s.put_local(&ent(&format!("pub{k}")), p("title"), Value::literal(format!("{name} {k}")), now).unwrap();
        }
        s.put_local(&ent("secret"), p("note"), Value::literal("keep out"), now).unwrap();
        s.set_flags(&ent("secret"), Some(true), None, now).unwrap();
        let others: Vec<usize> = contributors.iter().copied().filter(|&o| o != c).collect();
        if let Some(&to) = others.choose(&mut rng) {
            let to_name = t.stores[to].name().clone();
            let s = &mut t.stores[c];
            s.put_local(&ent("mail"), p("body"), Value::literal(format!("hello {to_name}")), now).unwrap();
            s.set_flags(&ent("mail"), None, Some(to_name), now).unwrap();
        }
        let s = &mut t.stores[c];
        let view = s.get_entity(&ent("pub0"), now);
        publish_cached_query(s, &view, now).unwrap();
    }
}

fn pair(stores: &mut [Store], a: usize, b: usize) -> (&mut Store, &mut Store) {
    assert_ne!(a, b);
    if a < b {
        let (x, y) = stores.split_at_mut(b);
        (&mut x[a], &mut y[0])
    } else {
        let (x, y) = stores.split_at_mut(a);
        (&mut y[0], &mut x[b])
    }
}

/// Runs rounds over every link until a round moves nothing. Returns the
/// number of rounds and a list of violated cursor checks.
pub fn run_to_quiescence(t: &mut Topology, budget: usize, max_rounds: usize) -> (usize, Vec<String>) {
    let mut problems = Vec::new();
    for round in 1..=max_rounds {
        let mut moved = 0;
        for &(a, b) in &t.links.clone() {
            let (sa, sb) = pair(&mut t.stores, a, b);
            let before = (sa.cursor(sb.name()), sb.cursor(sa.name()));
            let r = sync_session(sa, sb, budget, VTime(round as f64)).unwrap();
            let after = (sa.cursor(sb.name()), sb.cursor(sa.name()));
            if after.0 < before.0 || after.1 < before.1 {
                problems.push(format!("cursor moved backwards on {}-{}", sa.name(), sb.name()));
            }
            moved += r.a_to_b.accepted + r.b_to_a.accepted;
        }
        if moved == 0 {
            return (round, problems);
        }
    }
    problems.push(format!("no fixed point after {max_rounds} rounds"));
    (max_rounds, problems)
}

fn holds(s: &Store, d: &Document) -> bool {
    s.get(d.entity(), d.graph()).is_some_and(|e| e.doc.revision() >= d.revision())
}

/// Checks the fixed point. Returns one message per violation.
pub fn check_fixed_point(t: &Topology) -> Vec<String> {
    let mut bad = Vec::new();
    let authored: Vec<(usize, Document)> = t
        .stores
        .iter()
        .enumerate()
        .flat_map(|(i, s)| s.documents().filter(|d| d.graph().is_owned_by(s.name())).map(move |d| (i, d.clone())))
        .collect();
    let bridges: Vec<&Store> = t.stores.iter().filter(|s| s.role() == Role::Bridge).collect();
    for (author, d) in &authored {
        let id = d.doc_id();
        let holders: Vec<&Store> = t.stores.iter().filter(|s| s.get(d.entity(), d.graph()).is_some()).collect();
        if d.flags.private {
            if holders.len() != 1 || holders[0].name() != t.stores[*author].name() {
                bad.push(format!("private {id} left its author"));
            }
            continue;
        }
        if d.flags.cached_query {
            let linked: BTreeSet<usize> = t
                .links
                .iter()
                .filter_map(|&(a, b)| {
                    if a == *author {
                        Some(b)
                    } else if b == *author {
                        Some(a)
                    } else {
                        None
                    }
                })
                .collect();
            for (i, s) in t.stores.iter().enumerate() {
                if s.role() == Role::Bridge && s.get(d.entity(), d.graph()).is_some() && !linked.contains(&i) {
                    bad.push(format!("cached {id} reached {} beyond one hop", s.name()));
                }
            }
            continue;
        }
        for b in &bridges {
            if !holds(b, d) {
                bad.push(format!("bridge {} lacks {id}", b.name()));
            }
        }
        if let Some(to) = &d.flags.addressed_to {
            for s in t.stores.iter().filter(|s| s.role() == Role::Contributor) {
                let should = s.name() == to || s.name() == t.stores[*author].name();
                if should && !holds(s, d) {
                    bad.push(format!("{} lacks {id} addressed to it", s.name()));
                }
                if !should && s.get(d.entity(), d.graph()).is_some() {
                    bad.push(format!("{} holds {id} addressed to {to}", s.name()));
                }
            }
        }
    }
    for s in &t.stores {
        for d in s.documents() {
            if !authored.iter().any(|(_, a)| a.entity() == d.entity() && a.graph() == d.graph()) {
                bad.push(format!("{} holds {} which nobody authored", s.name(), d.doc_id()));
            }
        }
    }
    bad
}

/// A round right after quiescence must send nothing at all.
pub fn idle_round_sends(t: &mut Topology) -> usize {
    let mut sent = 0;
    for &(a, b) in &t.links.clone() {
        let (sa, sb) = pair(&mut t.stores, a, b);
        let r = sync_session(sa, sb, usize::MAX, VTime(1e6)).unwrap();
        sent += r.a_to_b.sent + r.b_to_a.sent;
    }
    sent
}

/// The whole check for one seed.
pub fn converge(seed: u64) -> Vec<String> {
    let mut t = random_topology(seed, 6);
    author_documents(&mut t, seed);
    let (_, mut problems) = run_to_quiescence(&mut t, 3, 200);
    problems.extend(check_fixed_point(&t));
    let sent = idle_round_sends(&mut t);
    if sent != 0 {
        problems.push(format!("idle round sent {sent} documents"));
    }
    problems.into_iter().map(|p| format!("seed {seed}: {p}")).collect()
}
