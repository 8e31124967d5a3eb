//! Deterministic virtual-time simulation of a deployment: nodes, links that
//! come and go, periodic sync sessions, and workload generators.
//!
//! Events at the same instant run in a fixed order: writes, reads,
//! transactions, then the sync tick; within a kind by target node name,
//! then by scheduling order. A sync tick walks the links in declaration
//! order, then garbage-collects every bridge, then samples the metrics.

mod scenario;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{EntityId, NodeName, Predicate, Value};
use crate::registry::bench::{pool_entity, seed_pool, TxGenerator};
use crate::registry::{attempt, settle, LockTable, Registry, Transaction};
use crate::store::{Origin, Role, Store};
use crate::sync::{gc_bridge, remote_view, sync_session, SyncReport};
use crate::time::VTime;

pub use scenario::{
    LinkSpec, NodeSpec, Pattern, Scenario, ScenarioError, WorkloadKind, WorkloadSpec, DEFAULT_CADENCE, DEFAULT_LOOKUP,
    DEFAULT_REPLICATION_COST,
};

/// Slack for events landing on the horizon after accumulated rounding.
const EPS: f64 = 1e-9;

/// Documents per contributor per unit time.
pub fn write_performance(total_documents: usize, n_nodes: usize, elapsed: f64) -> f64 {
    if total_documents == 0 || n_nodes == 0 || elapsed <= 0.0 {
        return 0.0;
    }
    total_documents as f64 / (n_nodes as f64 * elapsed)
}

/// Effective cost of one write while `n_active_sessions` links replicate.
pub fn replication_cost(base: f64, c: f64, n_active_sessions: usize) -> f64 {
    base * (1.0 + c * n_active_sessions as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub total_documents: usize,
    pub stored_copies: usize,
    pub n_nodes: usize,
    pub write_performance: f64,
    pub mean_read_latency: f64,
    pub sessions: usize,
    pub tx_committed: usize,
}

impl Sample {
    pub const CSV_HEADER: &'static str =
        "time,total_documents,stored_copies,n_nodes,write_performance,mean_read_latency,sessions,tx_committed";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.3},{},{},{},{:.6},{:.6},{},{}",
            self.time,
            self.total_documents,
            self.stored_copies,
            self.n_nodes,
            self.write_performance,
            self.mean_read_latency,
            self.sessions,
            self.tx_committed
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    /// Distinct documents across contributor and bridge stores.
    pub total_documents: usize,
    pub elapsed: f64,
    /// Contributors; the denominator of the write rate.
    pub n_nodes: usize,
    pub read_latencies: Vec<f64>,
    pub sessions: Vec<SyncReport>,
    pub samples: Vec<Sample>,
    pub authored: usize,
    pub replica_inserts: usize,
    pub evicted: usize,
    pub harvests: usize,
    pub harvested_documents: usize,
    pub tx_committed: usize,
    pub tx_aborted: usize,
}

impl Metrics {
    pub fn write_performance(&self) -> f64 {
        write_performance(self.total_documents, self.n_nodes, self.elapsed)
    }

    pub fn mean_read_latency(&self) -> f64 {
        mean(&self.read_latencies)
    }

    pub fn metrics_csv(&self) -> String {
        let mut out = String::from(Sample::CSV_HEADER);
        out.push('\n');
        for s in &self.samples {
            out.push_str(&s.csv_row());
            out.push('\n');
        }
        out
    }

    pub fn sessions_csv(&self) -> String {
        let mut out = String::from(SyncReport::CSV_HEADER);
        out.push('\n');
        for r in &self.sessions {
            writeln!(out, "{}", r.csv_row()).expect("string write");
        }
        out
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Write,
    Read,
    Tx,
    Tick,
}

/// (time, kind, target, scheduling order, workload index)
type Event = Reverse<(VTime, Kind, String, u64, usize)>;

struct LinkClock {
    spec: LinkSpec,
    rng: ChaCha8Rng,
    slots: Vec<bool>,
}

impl LinkClock {
    fn up(&mut self, t: f64) -> bool {
        match self.spec.pattern {
            Pattern::Always => true,
            Pattern::Periodic { up, down, phase } => (t - phase).rem_euclid(up + down) < up,
            Pattern::Random { p_up, slot } => {
                let k = (t / slot).floor().max(0.0) as usize;
                while self.slots.len() <= k {
                    let draw = self.rng.gen::<f64>() < p_up;
                    self.slots.push(draw);
                }
                self.slots[k]
            }
        }
    }
}

struct Global {
    registry: Registry,
    locks: LockTable,
    pool: Vec<EntityId>,
    next_tx: u64,
}

enum Driver {
    Writer { written: usize },
    Reader { rng: ChaCha8Rng },
    TxClient { generator: TxGenerator, remaining: usize },
}

pub struct Simulation {
    scenario: Scenario,
    stores: BTreeMap<NodeName, Store>,
    globals: BTreeMap<NodeName, Global>,
    links: Vec<LinkClock>,
    drivers: Vec<Driver>,
    queue: BinaryHeap<Event>,
    order: u64,
    now: VTime,
    metrics: Metrics,
    finished: bool,
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Self, ScenarioError> {
        scenario.validate()?;
        let mut stores = BTreeMap::new();
        let mut globals = BTreeMap::new();
        let pool_size = scenario
            .workloads
            .iter()
            .filter_map(|w| match w.kind {
                WorkloadKind::TxClient { pool, .. } => Some(pool),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        for n in &scenario.nodes {
            match n.role {
                Role::Global => {
                    globals.insert(
                        n.name.clone(),
                        Global {
                            registry: if pool_size > 0 { seed_pool(pool_size, scenario.seed) } else { Registry::new() },
                            locks: LockTable::new(),
                            pool: (0..pool_size).map(pool_entity).collect(),
                            next_tx: 1,
                        },
                    );
                }
                role => {
                    stores.insert(n.name.clone(), Store::new(n.name.clone(), role));
                }
            }
        }
        let links = scenario
            .links
            .iter()
            .enumerate()
            .map(|(i, spec)| LinkClock {
                spec: spec.clone(),
                rng: ChaCha8Rng::seed_from_u64(scenario.seed ^ 0x517c_c1b7_2722_0a95u64.wrapping_mul(i as u64 + 1)),
                slots: Vec::new(),
            })
            .collect();
        let drivers = scenario
            .workloads
            .iter()
            .enumerate()
            .map(|(i, w)| match &w.kind {
                WorkloadKind::Writer => Driver::Writer { written: 0 },
                WorkloadKind::Reader => Driver::Reader {
                    rng: ChaCha8Rng::seed_from_u64(
                        scenario.seed.wrapping_add(0x2545_f491_4f6c_dd1d).wrapping_mul(i as u64 + 1),
                    ),
                },
                WorkloadKind::TxClient { count, mix, .. } => {
                    Driver::TxClient { generator: TxGenerator::new(i, scenario.seed, mix.clone()), remaining: *count }
                }
            })
            .collect();
        let n_nodes = scenario.nodes_with(Role::Contributor).len();
        let mut sim = Simulation {
            scenario,
            stores,
            globals,
            links,
            drivers,
            queue: BinaryHeap::new(),
            order: 0,
            now: VTime::ZERO,
            metrics: Metrics { n_nodes, ..Metrics::default() },
            finished: false,
        };
        for i in 0..sim.drivers.len() {
            let first = sim.interval(i);
            sim.schedule(VTime(first), i);
        }
        let cadence = sim.scenario.cadence;
        sim.push(VTime(cadence), Kind::Tick, String::new(), 0);
        Ok(sim)
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        Self::new(Scenario::parse(text)?)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn now(&self) -> VTime {
        self.now
    }

    pub fn store(&self, name: &NodeName) -> Option<&Store> {
        self.stores.get(name)
    }

    /// Direct access for injecting documents before or between runs.
    /// Documents authored this way are counted as authored.
    pub fn store_mut(&mut self, name: &NodeName) -> Option<&mut Store> {
        self.stores.get_mut(name)
    }

    pub fn stores(&self) -> impl Iterator<Item = &Store> {
        self.stores.values()
    }

    pub fn registry(&self, global: &NodeName) -> Option<&Registry> {
        self.globals.get(global).map(|g| &g.registry)
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    /// Whether the link between `a` and `b` is up at `t`.
    pub fn link_up_at(&mut self, a: &NodeName, b: &NodeName, t: f64) -> Option<bool> {
        let link =
            self.links.iter_mut().find(|l| (&l.spec.a, &l.spec.b) == (a, b) || (&l.spec.a, &l.spec.b) == (b, a))?;
        Some(link.up(t))
    }

    fn push(&mut self, t: VTime, kind: Kind, target: String, workload: usize) {
        self.order += 1;
        self.queue.push(Reverse((t, kind, target, self.order, workload)));
    }

    fn schedule(&mut self, t: VTime, i: usize) {
        let w = &self.scenario.workloads[i];
        let kind = match w.kind {
            WorkloadKind::Writer => Kind::Write,
            WorkloadKind::Reader => Kind::Read,
            WorkloadKind::TxClient { .. } => Kind::Tx,
        };
        let target = w.target.to_string();
        self.push(t, kind, target, i);
    }

    fn interval(&mut self, i: usize) -> f64 {
        let w = &self.scenario.workloads[i];
        let base = 1.0 / w.rate;
        match w.kind {
            WorkloadKind::Writer => {
                let target = w.target.clone();
                let c = self.scenario.replication_cost;
                let t = self.now.0;
                let active = self
                    .links
                    .iter_mut()
                    .filter(|l| l.spec.a == target || l.spec.b == target)
                    .filter_map(|l| l.up(t).then_some(()))
                    .count();
                replication_cost(base, c, active)
            }
            _ => base,
        }
    }

    /// Runs every event up to the horizon and returns the final metrics.
    /// Calling it again after the horizon does nothing.
    pub fn run(&mut self) -> &Metrics {
        let horizon = self.scenario.horizon;
        while let Some(Reverse((t, kind, _, _, i))) = self.queue.pop() {
            if t.0 > horizon + EPS {
                break;
            }
            debug_assert!(t >= self.now, "clock went backwards");
            self.now = t;
            match kind {
                Kind::Write => self.write(i),
                Kind::Read => self.read(i),
                Kind::Tx => self.transact(i),
                Kind::Tick => self.tick(),
            }
        }
        self.queue.clear();
        if !self.finished {
            self.finished = true;
            self.now = VTime(horizon);
            let last = self.metrics.samples.last().map(|s| s.time);
            if last.is_none_or(|t| (t - horizon).abs() > EPS) {
                self.sample();
            }
            self.metrics.elapsed = horizon;
            self.metrics.total_documents = self.distinct_documents();
        }
        &self.metrics
    }

    fn write(&mut self, i: usize) {
        let target = self.scenario.workloads[i].target.clone();
        let Driver::Writer { written } = &mut self.drivers[i] else { unreachable!("writer event") };
        *written += 1;
        let k = *written;
        let store = self.stores.get_mut(&target).expect("validated target");
        let entity = EntityId::mint(target.as_str(), &format!("d{k}")).expect("node names are valid path segments");
        let now = self.now;
        store
            .put_local(
                &entity,
                Predicate::new("title").expect("valid"),
                Value::literal(format!("note {k} from {target}")),
                now,
            )
            .expect("contributor");
        store
            .put_local(&entity, Predicate::new("seq").expect("valid"), Value::literal(k.to_string()), now)
            .expect("contributor");
        self.metrics.authored += 1;
        let next = self.now + self.interval(i);
        self.schedule(next, i);
    }

    fn read(&mut self, i: usize) {
        let target = self.scenario.workloads[i].target.clone();
        let neighbours: Vec<NodeName> = self
            .up_neighbours(&target)
            .into_iter()
            .filter(|n| self.stores.get(n).is_some_and(|s| s.role() == Role::Contributor))
            .collect();
        // anything stored locally or published by a connected contributor
        let mut candidates: BTreeSet<&EntityId> = self.stores[&target].documents().map(|d| d.entity()).collect();
        for n in &neighbours {
            let s = &self.stores[n];
            candidates
                .extend(s.documents().filter(|d| d.graph().is_owned_by(n) && d.flags.is_public()).map(|d| d.entity()));
        }
        let candidates: Vec<&EntityId> = candidates.into_iter().collect();
        let Driver::Reader { rng } = &mut self.drivers[i] else { unreachable!("reader event") };
        if let Some(entity) = candidates.choose(rng).map(|e| (*e).clone()) {
            let now = self.now;
            let local = self.stores.get_mut(&target).expect("present").get_entity(&entity, now).contributions.len();
            let remote: usize = neighbours.iter().map(|n| remote_view(&target, &self.stores[n], &entity).count()).sum();
            self.metrics.read_latencies.push(self.scenario.lookup * (local + remote) as f64);
        }
        let next = self.now + self.interval(i);
        self.schedule(next, i);
    }

    fn transact(&mut self, i: usize) {
        let target = self.scenario.workloads[i].target.clone();
        let Driver::TxClient { generator, remaining } = &mut self.drivers[i] else { unreachable!("tx event") };
        let g = self.globals.get_mut(&target).expect("validated target");
        let kind = generator.next_kind();
        let ops = generator.build(kind, &g.registry, &g.pool);
        let mut tx = Transaction::new(g.next_tx, ops);
        g.next_tx += 1;
        // a single client per registry never contends, so one attempt settles
        loop {
            let outcome = attempt(&mut g.locks, &mut g.registry, &tx);
            if let Some(result) = settle(&mut tx, outcome) {
                match result {
                    Ok(_) => self.metrics.tx_committed += 1,
                    Err(_) => self.metrics.tx_aborted += 1,
                }
                break;
            }
        }
        *remaining -= 1;
        if *remaining > 0 {
            let next = self.now + self.interval(i);
            self.schedule(next, i);
        }
    }

    fn up_neighbours(&mut self, node: &NodeName) -> BTreeSet<NodeName> {
        let t = self.now.0;
        let mut out = BTreeSet::new();
        for l in &mut self.links {
            if (&l.spec.a == node || &l.spec.b == node) && l.up(t) {
                out.insert(if &l.spec.a == node { l.spec.b.clone() } else { l.spec.a.clone() });
            }
        }
        out
    }

    fn tick(&mut self) {
        let now = self.now;
        let budget = self.scenario.budget;
        for li in 0..self.links.len() {
            if !self.links[li].up(now.0) {
                continue;
            }
            let (a, b) = (self.links[li].spec.a.clone(), self.links[li].spec.b.clone());
            let (global, bridge) = match (self.globals.contains_key(&a), self.globals.contains_key(&b)) {
                (true, _) => (Some(a.clone()), b.clone()),
                (_, true) => (Some(b.clone()), a.clone()),
                _ => (None, b.clone()),
            };
            if let Some(g) = global {
                let store = self.stores.get_mut(&bridge).expect("validated link");
                let report = self.globals.get_mut(&g).expect("present").registry.harvest(&g, store).expect("bridge");
                self.metrics.harvests += 1;
                self.metrics.harvested_documents += report.documents;
                continue;
            }
            let mut sa = self.stores.remove(&a).expect("validated link");
            let mut sb = self.stores.remove(&b).expect("validated link");
            let before = sa.len() + sb.len();
            let report = sync_session(&mut sa, &mut sb, budget, now).expect("non-global endpoints");
            self.metrics.replica_inserts += sa.len() + sb.len() - before;
            self.metrics.sessions.push(report);
            self.stores.insert(a, sa);
            self.stores.insert(b, sb);
        }
        let (ttl, capacity) = (self.scenario.gc_ttl, self.scenario.gc_capacity);
        for store in self.stores.values_mut().filter(|s| s.role() == Role::Bridge) {
            self.metrics.evicted += gc_bridge(store, now, ttl, capacity).expect("bridge").evicted.len();
        }
        self.sample();
        let next = now + self.scenario.cadence;
        self.push(next, Kind::Tick, String::new(), 0);
    }

    fn distinct_documents(&self) -> usize {
        let ids: BTreeSet<(&EntityId, &crate::model::GraphId)> =
            self.stores.values().flat_map(|s| s.documents().map(|d| (d.entity(), d.graph()))).collect();
        ids.len()
    }

    /// Stored copies across every store, split by origin.
    pub fn copies(&self) -> (usize, usize) {
        let mut local = 0;
        let mut replicated = 0;
        for s in self.stores.values() {
            for e in s.entries() {
                match e.origin {
                    Origin::Local => local += 1,
                    Origin::Replicated => replicated += 1,
                }
            }
        }
        (local, replicated)
    }

    fn sample(&mut self) {
        let total = self.distinct_documents();
        let t = self.now.0;
        let m = &self.metrics;
        let sample = Sample {
            time: t,
            total_documents: total,
            stored_copies: self.stores.values().map(Store::len).sum(),
            n_nodes: m.n_nodes,
            write_performance: write_performance(total, m.n_nodes, t),
            mean_read_latency: m.mean_read_latency(),
            sessions: m.sessions.len(),
            tx_committed: m.tx_committed,
        };
        self.metrics.samples.push(sample);
    }
}

/// Parses, validates and runs a scenario to its horizon.
pub fn run(scenario: Scenario) -> Result<Metrics, ScenarioError> {
    let mut sim = Simulation::new(scenario)?;
    sim.run();
    Ok(sim.metrics)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh(n: usize, rate: f64, horizon: f64) -> String {
        let mut s = String::new();
        for i in 1..=n {
            writeln!(s, "[node] name=xo{i} role=contributor").unwrap();
            writeln!(s, "[workload] kind=writer target=xo{i} rate={rate}").unwrap();
        }
        for i in 1..=n {
            for j in i + 1..=n {
                writeln!(s, "[link] a=xo{i} b=xo{j} pattern=always").unwrap();
            }
        }
        writeln!(s, "[run] horizon={horizon} seed=3").unwrap();
        s
    }

    #[test]
    fn write_performance_formula() {
        assert!((write_performance(2193, 1, 300.0) - 7.31).abs() < 1e-9);
        assert!((write_performance(3540, 4, 300.0) - 2.95).abs() < 1e-9);
        assert_eq!(write_performance(0, 3, 300.0), 0.0);
    }

    #[test]
    fn cost_model() {
        assert_eq!(replication_cost(2.0, DEFAULT_REPLICATION_COST, 0), 2.0);
        let ratio = 1.0 / replication_cost(1.0, DEFAULT_REPLICATION_COST, 3);
        assert!((0.40..=0.50).contains(&ratio));
        assert!(
            replication_cost(1.0, DEFAULT_REPLICATION_COST, 1) < replication_cost(1.0, DEFAULT_REPLICATION_COST, 3)
        );
    }

    #[test]
    fn solo_writer_count_is_floor_rate_times_horizon() {
        for (rate, horizon) in [(7.31, 300.0), (1.0, 10.0), (0.3, 7.0), (2.5, 4.0)] {
            let m = run(Scenario::parse(&mesh(1, rate, horizon)).unwrap()).unwrap();
            assert_eq!(m.total_documents, (rate * horizon + 1e-9).floor() as usize, "rate {rate} horizon {horizon}");
        }
        let m = run(Scenario::parse(&mesh(1, 7.31, 300.0)).unwrap()).unwrap();
        assert!((m.write_performance() - 7.31).abs() < 1e-9);
    }

    #[test]
    fn mesh_slows_writers_and_replicates() {
        let rates: Vec<f64> = (1..=4)
            .map(|n| run(Scenario::parse(&mesh(n, 7.31, 300.0)).unwrap()).unwrap().write_performance())
            .collect();
        assert!(rates.windows(2).all(|w| w[1] < w[0]), "{rates:?}");
        let ratio = rates[3] / rates[0];
        assert!((0.40..=0.50).contains(&ratio), "{ratio}");
    }

    #[test]
    fn identical_runs_are_identical() {
        let text = format!("{}[node] name=b1 role=bridge\n[link] a=xo1 b=b1 pattern=random:0.5:3\n[workload] kind=reader target=xo2 rate=1\n", mesh(3, 2.0, 60.0));
        let a = run(Scenario::parse(&text).unwrap()).unwrap();
        let b = run(Scenario::parse(&text).unwrap()).unwrap();
        assert_eq!(a.metrics_csv(), b.metrics_csv());
        assert_eq!(a.sessions_csv(), b.sessions_csv());
        assert!(!a.read_latencies.is_empty());
    }

    #[test]
    fn sessions_only_on_up_links_and_copies_are_conserved() {
        let text = "\
[node] name=xo1 role=contributor
[node] name=xo2 role=contributor
[node] name=b1 role=bridge
[node] name=g role=global
[link] a=xo1 b=b1 pattern=periodic:15:15:0
[link] a=xo2 b=b1 pattern=random:0.4:10
[link] a=g b=b1 pattern=periodic:30:30:0
[workload] kind=writer target=xo1 rate=1
[workload] kind=writer target=xo2 rate=1
[run] horizon=200 seed=11 gc_ttl=25
";
        let mut sim = Simulation::parse(text).unwrap();
        sim.run();
        let sessions = sim.metrics().sessions.clone();
        assert!(!sessions.is_empty());
        for s in &sessions {
            assert_eq!(sim.link_up_at(&s.a, &s.b, s.time.0), Some(true));
        }
        let (local, replicated) = sim.copies();
        let m = sim.metrics();
        assert_eq!(local, m.authored);
        assert_eq!(replicated, m.replica_inserts - m.evicted);
        assert!(m.evicted > 0);
        assert!(m.harvested_documents > 0);
        let harvested = sim.registry(&NodeName::new("g").unwrap()).unwrap().len();
        assert!(harvested > 0 && harvested <= m.authored);
    }

    #[test]
    fn tx_clients_drive_the_registry() {
        let text = "\
[node] name=g role=global
[workload] kind=txclient target=g rate=2 pool=8 count=20
[run] horizon=100
";
        let m = run(Scenario::parse(text).unwrap()).unwrap();
        assert_eq!(m.tx_committed + m.tx_aborted, 20);
        assert!(m.tx_committed > 0);
    }
}
