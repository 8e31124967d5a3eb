//! Transaction benchmark in virtual time.
//!
//! Logical clients run their transactions sequentially against one shared
//! registry. A granted transaction holds its locks for
//! `base + per_write * writes` time units; a refused one retries after
//! `backoff * retries_used`. Attempts happen on tick boundaries (one tick is
//! one backoff unit) and within a tick the oldest transaction goes first, so
//! a client finishing a transaction cannot jump ahead of older waiters.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::corpus::gen_corpus;
use crate::model::{EntityId, Predicate, Value};
use crate::time::VTime;

use super::locks::LockTable;
use super::state::{lock_demand, registry_graph, AtomicOp, LinkKind, Registry, UniquenessMode};
use super::tx::MAX_RETRIES;

/// Kinds of transaction a client can issue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TxKind {
    /// Property insert.
    Ip,
    /// Property update.
    Up,
    /// Property delete.
    Dp,
    /// Link insert.
    Il,
    /// Link update: moves one of an entity's links to another entity.
    Lu,
    /// Link delete.
    Dl,
    Sc,
    Dc,
}

impl TxKind {
    pub const ALL: [TxKind; 8] =
        [TxKind::Ip, TxKind::Up, TxKind::Dp, TxKind::Il, TxKind::Lu, TxKind::Dl, TxKind::Sc, TxKind::Dc];

    pub fn as_str(self) -> &'static str {
        match self {
            TxKind::Ip => "ip",
            TxKind::Up => "up",
            TxKind::Dp => "dp",
            TxKind::Il => "il",
            TxKind::Lu => "lu",
            TxKind::Dl => "dl",
            TxKind::Sc => "sc",
            TxKind::Dc => "dc",
        }
    }
}

impl FromStr for TxKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TxKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown transaction kind `{s}`"))
    }
}

/// Relative weights of transaction kinds.
#[derive(Debug, Clone, PartialEq)]
pub struct Mix {
    weights: Vec<(TxKind, f64)>,
}

impl Mix {
    pub fn new(weights: Vec<(TxKind, f64)>) -> Result<Self, String> {
        if weights.iter().any(|(_, w)| !w.is_finite() || *w < 0.0) {
            return Err("weights must be finite and non-negative".into());
        }
        let weights: Vec<_> = weights.into_iter().filter(|(_, w)| *w > 0.0).collect();
        if weights.is_empty() {
            return Err("at least one weight must be positive".into());
        }
        Ok(Self { weights })
    }

    /// Link insert, link update and link delete in equal parts.
    pub fn links() -> Self {
        Self::new(vec![(TxKind::Il, 1.0), (TxKind::Lu, 1.0), (TxKind::Dl, 1.0)]).expect("valid")
    }

    pub fn only(kind: TxKind) -> Self {
        Self::new(vec![(kind, 1.0)]).expect("valid")
    }

    fn pick(&self, rng: &mut impl Rng) -> TxKind {
        let total: f64 = self.weights.iter().map(|(_, w)| w).sum();
        let mut x = rng.gen::<f64>() * total;
        for (k, w) in &self.weights {
            if x < *w {
                return *k;
            }
            x -= w;
        }
        self.weights.last().expect("non-empty").0
    }
}

impl Default for Mix {
    fn default() -> Self {
        Self::links()
    }
}

/// Accepts `kind=weight,...` (kinds ip, up, dp, il, lu, dl, sc, dc) or the
/// positional form `ip:up:dp:il:dl:sc:dc`.
impl FromStr for Mix {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad weight `{t}`"));
        if s.contains('=') {
            let weights = s
                .split(',')
                .map(|part| {
                    let (k, w) = part.split_once('=').ok_or_else(|| format!("expected kind=weight, got `{part}`"))?;
                    Ok((k.trim().parse()?, num(w)?))
                })
                .collect::<Result<Vec<_>, String>>()?;
            return Mix::new(weights);
        }
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 7 {
            return Err(format!("expected 7 colon-separated weights ip:up:dp:il:dl:sc:dc, got `{s}`"));
        }
        let kinds = [TxKind::Ip, TxKind::Up, TxKind::Dp, TxKind::Il, TxKind::Dl, TxKind::Sc, TxKind::Dc];
        let weights = kinds.into_iter().zip(parts).map(|(k, w)| Ok((k, num(w)?))).collect::<Result<_, String>>()?;
        Mix::new(weights)
    }
}

impl fmt::Display for Mix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.weights.iter().map(|(k, w)| format!("{}={}", k.as_str(), w)).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub clients: usize,
    /// Transactions per client.
    pub count: usize,
    pub pool: usize,
    pub mix: Mix,
    pub seed: u64,
    pub base_cost: f64,
    pub write_cost: f64,
    pub backoff: f64,
}

impl BenchConfig {
    pub fn new(clients: usize, count: usize, pool: usize, seed: u64) -> Self {
        Self { clients, count, pool, mix: Mix::default(), seed, base_cost: 1.0, write_cost: 0.25, backoff: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub clients: usize,
    pub pool_size: usize,
    pub committed: u64,
    pub aborted_contention: u64,
    pub aborted_semantic: u64,
    pub total_retries: u64,
    pub elapsed: f64,
    pub throughput: f64,
    pub mean_retries_per_commit: f64,
    /// Largest retry count any transaction reached.
    pub max_retries: u32,
}

impl BenchRow {
    pub const CSV_HEADER: &'static str = "clients,pool_size,committed,aborted_contention,aborted_semantic,\
total_retries,elapsed,throughput_tx_per_unit,mean_retries_per_commit";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.3},{:.6},{:.6}",
            self.clients,
            self.pool_size,
            self.committed,
            self.aborted_contention,
            self.aborted_semantic,
            self.total_retries,
            self.elapsed,
            self.throughput,
            self.mean_retries_per_commit
        )
    }
}

pub fn pool_entity(i: usize) -> EntityId {
    crate::model::corpus::entity(i)
}

/// Pool entities with 8 to 12 properties each, joined in a ring by links.
pub fn seed_pool(pool: usize, seed: u64) -> Registry {
    let mut reg = Registry::new();
    let graph = registry_graph();
    for doc in gen_corpus(pool, seed) {
        let mut ops = vec![AtomicOp::InsertEntity(doc.entity().clone())];
        ops.extend(doc.pairs().map(|(p, v)| AtomicOp::InsertProperty(doc.entity().clone(), p.clone(), v.clone())));
        reg.apply_batch(&ops, UniquenessMode::Lax, &graph).expect("fresh pool entity");
    }
    for i in 0..pool {
        let (a, b) = (pool_entity(i), pool_entity((i + 1) % pool));
        if !reg.linked(&a, &b, LinkKind::LinksTo) {
            reg.apply(&AtomicOp::InsertLink(a, b)).expect("pool entities exist");
        }
    }
    reg
}

/// Draws transactions of a mix against the current registry state.
#[derive(Debug, Clone)]
pub struct TxGenerator {
    rng: ChaCha8Rng,
    mix: Mix,
    fresh: u64,
    id: usize,
}

impl TxGenerator {
    /// Generators with distinct `id`s draw independent streams and mint
    /// disjoint fresh entities and values.
    pub fn new(id: usize, seed: u64, mix: Mix) -> Self {
        let stream = seed ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(id as u64 + 1);
        Self { rng: ChaCha8Rng::seed_from_u64(stream), mix, fresh: 0, id }
    }

    pub fn next_kind(&mut self) -> TxKind {
        self.mix.pick(&mut self.rng)
    }

    /// Builds a transaction of `kind` about a random pool entity, valid
    /// against `reg` as it is now. Kinds that cannot apply to the chosen
    /// entity fall back to a neighbouring kind.
    pub fn build(&mut self, kind: TxKind, reg: &Registry, pool: &[EntityId]) -> Vec<AtomicOp> {
        let subject = pool.choose(&mut self.rng).expect("non-empty pool").clone();
        self.build_for(kind, subject, reg, pool)
    }

    fn fresh_entity(&mut self) -> EntityId {
        self.fresh += 1;
        EntityId::mint("bench", &format!("c{}n{}", self.id, self.fresh)).expect("valid id")
    }

    fn fresh_value(&mut self) -> Value {
        self.fresh += 1;
        Value::literal(format!("v{}-{}", self.id, self.fresh))
    }

    fn build_for(&mut self, kind: TxKind, a: EntityId, reg: &Registry, pool: &[EntityId]) -> Vec<AtomicOp> {
        let unlinked = |rng: &mut ChaCha8Rng| {
            let start = rng.gen_range(0..pool.len());
            (0..pool.len())
                .map(|k| &pool[(start + k) % pool.len()])
                .find(|b| !reg.linked(&a, b, LinkKind::LinksTo))
                .cloned()
        };
        let links: Vec<EntityId> = reg.links(&a, LinkKind::LinksTo).into_iter().cloned().collect();
        let props: Vec<(Predicate, Value)> =
            reg.entity(&a).map(|r| r.properties.keys().cloned().collect()).unwrap_or_default();
        match kind {
            TxKind::Il => match unlinked(&mut self.rng) {
                Some(b) => vec![AtomicOp::InsertLink(a, b)],
                None => self.build_for(TxKind::Dl, a, reg, pool),
            },
            TxKind::Dl => match links.choose(&mut self.rng) {
                Some(b) => vec![AtomicOp::DeleteLink(a, b.clone())],
                None => self.build_for(TxKind::Il, a, reg, pool),
            },
            TxKind::Lu => {
                let old = links.choose(&mut self.rng).cloned();
                match (old, unlinked(&mut self.rng)) {
                    (Some(b), Some(c)) => vec![AtomicOp::DeleteLink(a.clone(), b), AtomicOp::InsertLink(a, c)],
                    (None, _) => self.build_for(TxKind::Il, a, reg, pool),
                    (Some(b), None) => vec![AtomicOp::DeleteLink(a, b)],
                }
            }
            TxKind::Ip => {
                let p = props
                    .choose(&mut self.rng)
                    .map(|(p, _)| p.clone())
                    .unwrap_or_else(|| Predicate::new("note").expect("valid"));
                let v = self.fresh_value();
                vec![AtomicOp::InsertProperty(a, p, v)]
            }
            TxKind::Up => match props.choose(&mut self.rng).cloned() {
                Some((p, old)) => {
                    let v = self.fresh_value();
                    vec![AtomicOp::UpdateProperty(a, p, old, v)]
                }
                None => self.build_for(TxKind::Ip, a, reg, pool),
            },
            TxKind::Dp => match props.choose(&mut self.rng).cloned() {
                Some((p, v)) => vec![AtomicOp::DeleteProperty(a, p, v)],
                None => self.build_for(TxKind::Ip, a, reg, pool),
            },
            TxKind::Sc => vec![AtomicOp::ShallowCopy { source: a, target: self.fresh_entity() }],
            TxKind::Dc => vec![AtomicOp::DeepCopy { source: a, target: self.fresh_entity() }],
        }
    }
}

struct Client {
    gen: TxGenerator,
    remaining: usize,
    kind: Option<TxKind>,
    arrival: u64,
    retries: u32,
    id: usize,
}

// queued as (time, rank, arrival, event); releases rank before attempts
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    Release(usize),
    Attempt(usize),
}

/// Runs the benchmark on a freshly seeded pool.
pub fn run(cfg: &BenchConfig) -> BenchRow {
    let pool: Vec<EntityId> = (0..cfg.pool).map(pool_entity).collect();
    run_on(cfg, seed_pool(cfg.pool, cfg.seed), &pool)
}

/// Runs the benchmark against `reg`, drawing subjects from `pool`.
pub fn run_on(cfg: &BenchConfig, mut reg: Registry, pool: &[EntityId]) -> BenchRow {
    assert!(cfg.clients >= 1 && cfg.count >= 1 && !pool.is_empty());
    let mut locks = LockTable::new();
    let mut clients: Vec<Client> = (0..cfg.clients)
        .map(|id| Client {
            gen: TxGenerator::new(id, cfg.seed, cfg.mix.clone()),
            remaining: cfg.count,
            kind: None,
            arrival: 0,
            retries: 0,
            id,
        })
        .collect();
    let mut row = BenchRow {
        clients: cfg.clients,
        pool_size: pool.len(),
        committed: 0,
        aborted_contention: 0,
        aborted_semantic: 0,
        total_retries: 0,
        elapsed: 0.0,
        throughput: 0.0,
        mean_retries_per_commit: 0.0,
        max_retries: 0,
    };
    let mut committed_retries = 0u64;
    let mut arrivals = 0u64;
    let mut queue: BinaryHeap<Reverse<(VTime, u8, u64, Event)>> = BinaryHeap::new();
    for c in 0..cfg.clients {
        arrivals += 1;
        clients[c].arrival = arrivals;
        queue.push(Reverse((VTime::ZERO, 1, arrivals, Event::Attempt(c))));
    }
    let tick = cfg.backoff;
    let next_tick = |t: VTime| VTime((t.0 / tick).ceil() * tick);
    let finish = |client: &mut Client, now: VTime, queue: &mut BinaryHeap<_>, arrivals: &mut u64| {
        client.remaining -= 1;
        client.kind = None;
        client.retries = 0;
        if client.remaining > 0 {
            *arrivals += 1;
            client.arrival = *arrivals;
            queue.push(Reverse((next_tick(now), 1, *arrivals, Event::Attempt(client.id))));
        }
    };
    while let Some(Reverse((now, _, _, event))) = queue.pop() {
        match event {
            Event::Release(c) => {
                locks.release(c as u64);
                row.elapsed = row.elapsed.max(now.0);
                finish(&mut clients[c], now, &mut queue, &mut arrivals);
            }
            Event::Attempt(c) => {
                let client = &mut clients[c];
                let kind = *client.kind.get_or_insert_with(|| client.gen.next_kind());
                let ops = client.gen.build(kind, &reg, pool);
                if locks.try_acquire(c as u64, &lock_demand(&ops)) {
                    debug_assert!(locks.is_safe());
                    let hold = match reg.apply_batch(&ops, UniquenessMode::Strict, &registry_graph()) {
                        Ok(writes) => {
                            row.committed += 1;
                            committed_retries += u64::from(client.retries);
                            cfg.base_cost + cfg.write_cost * writes as f64
                        }
                        Err(_) => {
                            row.aborted_semantic += 1;
                            cfg.base_cost
                        }
                    };
                    queue.push(Reverse((now + hold, 0, client.arrival, Event::Release(c))));
                } else if client.retries == MAX_RETRIES {
                    row.aborted_contention += 1;
                    row.elapsed = row.elapsed.max(now.0);
                    finish(client, now, &mut queue, &mut arrivals);
                } else {
                    client.retries += 1;
                    row.total_retries += 1;
                    row.max_retries = row.max_retries.max(client.retries);
                    let at = now + cfg.backoff * f64::from(client.retries);
                    queue.push(Reverse((at, 1, client.arrival, Event::Attempt(c))));
                }
            }
        }
    }
    if row.elapsed > 0.0 {
        row.throughput = row.committed as f64 / row.elapsed;
    }
    if row.committed > 0 {
        row.mean_retries_per_commit = committed_retries as f64 / row.committed as f64;
    }
    row
}
