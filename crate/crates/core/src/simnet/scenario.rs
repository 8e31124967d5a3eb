use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::NodeName;
use crate::registry::bench::Mix;
use crate::store::Role;
use crate::sync::{DEFAULT_BUDGET, DEFAULT_GC_CAPACITY, DEFAULT_GC_TTL};

/// One sync session per up link every this many time units.
pub const DEFAULT_CADENCE: f64 = 10.0;
/// Cost of one document lookup when composing an entity view.
pub const DEFAULT_LOOKUP: f64 = 0.05;
/// Replication cost per active session. With three sessions (a 4-node
/// mesh) a writer runs at 45% of its solo rate: 1 / (1 + 3c) = 0.45.
pub const DEFAULT_REPLICATION_COST: f64 = (1.0 / 0.45 - 1.0) / 3.0;

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct ScenarioError {
    /// 1-based; 0 for whole-scenario checks.
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> ScenarioError {
    ScenarioError { line, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pattern {
    Always,
    /// Up for `up`, then down for `down`, shifted by `phase`.
    Periodic {
        up: f64,
        down: f64,
        phase: f64,
    },
    /// Each slot of length `slot` is up with probability `p_up`.
    Random {
        p_up: f64,
        slot: f64,
    },
}

impl FromStr for Pattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| t.parse::<f64>().map_err(|_| format!("bad number `{t}` in pattern `{s}`"));
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(format!("{name} must be > 0 in pattern `{s}`"))
            }
        };
        match parts.as_slice() {
            ["always"] => Ok(Pattern::Always),
            ["periodic", up, down, phase] => {
                let phase = num(phase)?;
                if !phase.is_finite() {
                    return Err(format!("phase must be finite in pattern `{s}`"));
                }
                Ok(Pattern::Periodic { up: positive("up", num(up)?)?, down: positive("down", num(down)?)?, phase })
            }
            ["random", p, slot] => {
                let p_up = num(p)?;
                if !(0.0..=1.0).contains(&p_up) {
                    return Err(format!("probability must be in [0, 1] in pattern `{s}`"));
                }
                Ok(Pattern::Random { p_up, slot: positive("slot", num(slot)?)? })
            }
            _ => Err(format!("expected always, periodic:UP:DOWN:PHASE or random:P:SLOT, got `{s}`")),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Always => f.write_str("always"),
            Pattern::Periodic { up, down, phase } => write!(f, "periodic:{up}:{down}:{phase}"),
            Pattern::Random { p_up, slot } => write!(f, "random:{p_up}:{slot}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub name: NodeName,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub a: NodeName,
    pub b: NodeName,
    pub pattern: Pattern,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorkloadKind {
    /// New documents per time unit.
    Writer,
    /// Entity lookups per time unit.
    Reader,
    /// Transactions per time unit against the global registry.
    TxClient { pool: usize, count: usize, mix: Mix },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub kind: WorkloadKind,
    pub target: NodeName,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub nodes: Vec<NodeSpec>,
    pub links: Vec<LinkSpec>,
    pub workloads: Vec<WorkloadSpec>,
    pub horizon: f64,
    pub seed: u64,
    pub cadence: f64,
    pub replication_cost: f64,
    pub budget: usize,
    pub lookup: f64,
    pub gc_ttl: f64,
    pub gc_capacity: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            nodes: Vec::new(),
            links: Vec::new(),
            workloads: Vec::new(),
            horizon: 0.0,
            seed: 0,
            cadence: DEFAULT_CADENCE,
            replication_cost: DEFAULT_REPLICATION_COST,
            budget: DEFAULT_BUDGET,
            lookup: DEFAULT_LOOKUP,
            gc_ttl: DEFAULT_GC_TTL,
            gc_capacity: DEFAULT_GC_CAPACITY,
        }
    }
}

struct Fields<'a> {
    line: usize,
    section: &'a str,
    values: BTreeMap<&'a str, &'a str>,
}

impl<'a> Fields<'a> {
    fn parse(line: usize, section: &'a str, rest: &'a str, allowed: &[&str]) -> Result<Self, ScenarioError> {
        let mut values = BTreeMap::new();
        for token in rest.split_whitespace() {
            let (k, v) =
                token.split_once('=').ok_or_else(|| err(line, format!("expected key=value, got `{token}`")))?;
            if !allowed.contains(&k) {
                return Err(err(line, format!("unknown key `{k}` in [{section}]")));
            }
            if values.insert(k, v).is_some() {
                return Err(err(line, format!("duplicate key `{k}`")));
            }
        }
        Ok(Self { line, section, values })
    }

    fn get(&self, key: &str) -> Option<&'a str> {
        self.values.get(key).copied()
    }

    fn required(&self, key: &str) -> Result<&'a str, ScenarioError> {
        self.get(key).ok_or_else(|| err(self.line, format!("[{}] needs `{key}`", self.section)))
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, ScenarioError>
    where
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| err(self.line, format!("bad value for `{key}`: {e}"))))
            .transpose()
    }

    fn node(&self, key: &str) -> Result<NodeName, ScenarioError> {
        NodeName::new(self.required(key)?).map_err(|e| err(self.line, e.to_string()))
    }

    fn positive(&self, key: &str) -> Result<Option<f64>, ScenarioError> {
        match self.parsed::<f64>(key)? {
            Some(v) if !(v > 0.0 && v.is_finite()) => Err(err(self.line, format!("`{key}` must be > 0"))),
            other => Ok(other),
        }
    }
}

impl Scenario {
    /// Parses the line-oriented scenario format. Each line is one section
    /// header followed by `key=value` pairs:
    ///
    /// ```text
    /// [node] name=xo1 role=contributor
    /// [link] a=xo1 b=b1 pattern=periodic:20:10:0
    /// [workload] kind=writer target=xo1 rate=7.31
    /// [run] horizon=300 seed=1
    /// ```
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let mut sc = Scenario::default();
        let mut run_line = None;
        let mut line_of_node = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let rest = content.strip_prefix('[').ok_or_else(|| err(line, "expected a [section] header"))?;
            let (section, rest) = rest.split_once(']').ok_or_else(|| err(line, "unterminated section header"))?;
            match section {
                "node" => {
                    let f = Fields::parse(line, section, rest, &["name", "role"])?;
                    let name = f.node("name")?;
                    let role: Role = f.required("role")?.parse().map_err(|e: String| err(line, e))?;
                    if line_of_node.insert(name.clone(), line).is_some() {
                        return Err(err(line, format!("node `{name}` declared twice")));
                    }
                    sc.nodes.push(NodeSpec { name, role });
                }
                "link" => {
                    let f = Fields::parse(line, section, rest, &["a", "b", "pattern"])?;
                    let pattern = match f.get("pattern") {
                        Some(p) => p.parse().map_err(|e: String| err(line, e))?,
                        None => Pattern::Always,
                    };
                    sc.links.push(LinkSpec { a: f.node("a")?, b: f.node("b")?, pattern });
                    sc.check_link(sc.links.len() - 1, &line_of_node).map_err(|m| err(line, m))?;
                }
                "workload" => {
                    let f = Fields::parse(line, section, rest, &["kind", "target", "rate", "pool", "count", "mix"])?;
                    let rate = f.positive("rate")?.ok_or_else(|| err(line, "[workload] needs `rate`"))?;
                    let kind = match f.required("kind")? {
                        "writer" | "reader" if f.get("pool").or(f.get("count")).or(f.get("mix")).is_some() => {
                            return Err(err(line, "pool, count and mix only apply to txclient"));
                        }
                        "writer" => WorkloadKind::Writer,
                        "reader" => WorkloadKind::Reader,
                        "txclient" => WorkloadKind::TxClient {
                            pool: f.parsed("pool")?.unwrap_or(64),
                            count: f.parsed("count")?.unwrap_or(1000),
                            mix: f.parsed("mix")?.unwrap_or_default(),
                        },
                        other => return Err(err(line, format!("unknown workload kind `{other}`"))),
                    };
                    if let WorkloadKind::TxClient { pool: 0, .. } | WorkloadKind::TxClient { count: 0, .. } = kind {
                        return Err(err(line, "pool and count must be >= 1"));
                    }
                    sc.workloads.push(WorkloadSpec { kind, target: f.node("target")?, rate });
                    sc.check_workload(sc.workloads.len() - 1, &line_of_node).map_err(|m| err(line, m))?;
                }
                "run" => {
                    if run_line.replace(line).is_some() {
                        return Err(err(line, "[run] given twice"));
                    }
                    let keys = ["horizon", "seed", "cadence", "cost", "budget", "lookup", "gc_ttl", "gc_capacity"];
                    let f = Fields::parse(line, section, rest, &keys)?;
                    sc.horizon = f.positive("horizon")?.ok_or_else(|| err(line, "[run] needs `horizon`"))?;
                    sc.seed = f.parsed("seed")?.unwrap_or(0);
                    sc.cadence = f.positive("cadence")?.unwrap_or(DEFAULT_CADENCE);
                    sc.replication_cost = f.parsed("cost")?.unwrap_or(DEFAULT_REPLICATION_COST);
                    if !(sc.replication_cost >= 0.0 && sc.replication_cost.is_finite()) {
                        return Err(err(line, "`cost` must be >= 0"));
                    }
                    sc.budget = f.parsed("budget")?.unwrap_or(DEFAULT_BUDGET);
                    sc.lookup = f.positive("lookup")?.unwrap_or(DEFAULT_LOOKUP);
                    sc.gc_ttl = f.parsed("gc_ttl")?.unwrap_or(DEFAULT_GC_TTL);
                    sc.gc_capacity = f.parsed("gc_capacity")?.unwrap_or(DEFAULT_GC_CAPACITY);
                    if sc.budget == 0 {
                        return Err(err(line, "`budget` must be >= 1"));
                    }
                }
                other => return Err(err(line, format!("unknown section [{other}]"))),
            }
        }
        if run_line.is_none() {
            return Err(err(0, "missing [run] line"));
        }
        Ok(sc)
    }

    pub fn role_of(&self, name: &NodeName) -> Option<Role> {
        self.nodes.iter().find(|n| &n.name == name).map(|n| n.role)
    }

    fn check_link(&self, i: usize, declared: &BTreeMap<NodeName, usize>) -> Result<(), String> {
        let l = &self.links[i];
        for n in [&l.a, &l.b] {
            if !declared.contains_key(n) {
                return Err(format!("link endpoint `{n}` is not a declared node"));
            }
        }
        if l.a == l.b {
            return Err(format!("link from `{}` to itself", l.a));
        }
        let roles = (self.role_of(&l.a).expect("declared"), self.role_of(&l.b).expect("declared"));
        match roles {
            (Role::Global, Role::Bridge) | (Role::Bridge, Role::Global) => {}
            (Role::Global, _) | (_, Role::Global) => {
                return Err("the global server only connects to bridges".into());
            }
            _ => {}
        }
        let key = |l: &LinkSpec| if l.a < l.b { (l.a.clone(), l.b.clone()) } else { (l.b.clone(), l.a.clone()) };
        if self.links[..i].iter().any(|o| key(o) == key(l)) {
            return Err(format!("duplicate link {} - {}", l.a, l.b));
        }
        Ok(())
    }

    fn check_workload(&self, i: usize, declared: &BTreeMap<NodeName, usize>) -> Result<(), String> {
        let w = &self.workloads[i];
        if !declared.contains_key(&w.target) {
            return Err(format!("workload target `{}` is not a declared node", w.target));
        }
        let role = self.role_of(&w.target).expect("declared");
        match (&w.kind, role) {
            (WorkloadKind::TxClient { .. }, Role::Global) => Ok(()),
            (WorkloadKind::TxClient { .. }, _) => Err("txclient workloads target the global server".into()),
            (_, Role::Contributor) => Ok(()),
            _ => Err("writer and reader workloads target contributors".into()),
        }
    }

    /// Checks a programmatically built scenario.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut declared = BTreeMap::new();
        for n in &self.nodes {
            if declared.insert(n.name.clone(), 0).is_some() {
                return Err(err(0, format!("node `{}` declared twice", n.name)));
            }
        }
        for i in 0..self.links.len() {
            self.check_link(i, &declared).map_err(|m| err(0, m))?;
        }
        for i in 0..self.workloads.len() {
            self.check_workload(i, &declared).map_err(|m| err(0, m))?;
            if !(self.workloads[i].rate > 0.0 && self.workloads[i].rate.is_finite()) {
                return Err(err(0, "workload rates must be > 0"));
            }
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(err(0, "horizon must be > 0"));
        }
        let positive = |x: f64| x > 0.0;
        if !positive(self.cadence)
            || self.budget == 0
            || !positive(self.lookup)
            || self.replication_cost.is_nan()
            || self.replication_cost < 0.0
        {
            return Err(err(0, "cadence, budget and lookup must be positive, cost non-negative"));
        }
        Ok(())
    }

    /// Names of nodes with `role`, in declaration order.
    pub fn nodes_with(&self, role: Role) -> BTreeSet<NodeName> {
        self.nodes.iter().filter(|n| n.role == role).map(|n| n.name.clone()).collect()
    }
}
