//! End-to-end acceptance suite. Each test prints one line:
//! `criterion N [name]: PASS|FAIL (detail, elapsed)`.
//!
//! Time limits assume an optimized build (`cargo test --release`); debug
//! builds report the measured time but only fail on the functional checks
//! plus a limit scaled by ten.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ers_core::model::codec::SizeReport;
use ers_core::model::corpus::gen_corpus;
use ers_core::model::{EntityId, NodeName, Predicate, Value};
use ers_core::registry::bench::{self, BenchConfig, Mix, TxKind};
use ers_core::registry::interleave::explore;
use ers_core::registry::{compatibility_grid, AtomicOp, Registry, EXPECTED_GRID, MAX_RETRIES};
use ers_core::simnet::{Scenario, Simulation};
use ers_core::time::VTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use support::reference::{some_serial_order_matches, RefState};
use support::topology::converge;

fn limit(secs: u64) -> Duration {
    if cfg!(debug_assertions) {
        Duration::from_secs(secs * 10)
    } else {
        Duration::from_secs(secs)
    }
}

fn report(n: u32, name: &str, ok: bool, detail: String, started: Instant, secs: u64) {
    let elapsed = started.elapsed();
    let in_time = elapsed <= limit(secs);
    let verdict = if ok && in_time { "PASS" } else { "FAIL" };
    println!("criterion {n} [{name}]: {verdict} ({detail}; {:.2}s, limit {secs}s)", elapsed.as_secs_f64());
    assert!(ok, "criterion {n} failed: {detail}");
    assert!(in_time, "criterion {n} too slow: {elapsed:?}");
}

fn ers() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ers"))
}

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn load(name: &str) -> Scenario {
    Scenario::parse(&std::fs::read_to_string(scenario_path(name)).unwrap()).unwrap()
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ers-acceptance-{}-{tag}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn criterion_01_lock_matrix() {
    let t = Instant::now();
    let out = ers().arg("check-locks").output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let grid = compatibility_grid();
    let symmetric = (0..6).all(|i| (0..6).all(|j| grid[i][j] == grid[j][i]));
    let diagonal = (0..6).all(|i| !grid[i][i]);
    let incompatible = grid.iter().flatten().filter(|c| !**c).count();
    let ok = out.status.code() == Some(0)
        && grid == EXPECTED_GRID
        && stdout.contains("incompatible cells: 14")
        && symmetric
        && diagonal;
    let detail = format!(
        "exit {:?}, {incompatible} incompatible cells, symmetric {symmetric}, diagonal {diagonal}",
        out.status.code()
    );
    report(1, "lock matrix", ok, detail, t, 1);
}

fn random_op(rng: &mut impl Rng) -> AtomicOp {
    let e = |rng: &mut dyn rand::RngCore| EntityId::mint("t", &format!("e{}", rng.gen_range(0..3))).unwrap();
    let p = |rng: &mut dyn rand::RngCore| Predicate::new(["p", "q"][rng.gen_range(0..2)]).unwrap();
    let v = |rng: &mut dyn rand::RngCore| Value::literal(["x", "y"][rng.gen_range(0..2)]);
    match rng.gen_range(0..9) {
        0 => AtomicOp::InsertEntity(e(rng)),
        1 => AtomicOp::DeleteEntity(e(rng)),
        2 => AtomicOp::InsertProperty(e(rng), p(rng), v(rng)),
        3 => AtomicOp::DeleteProperty(e(rng), p(rng), v(rng)),
        4 => AtomicOp::UpdateProperty(e(rng), p(rng), v(rng), v(rng)),
        5 => AtomicOp::InsertLink(e(rng), e(rng)),
        6 => AtomicOp::DeleteLink(e(rng), e(rng)),
        7 => AtomicOp::ShallowCopy { source: e(rng), target: e(rng) },
        _ => AtomicOp::DeepCopy { source: e(rng), target: e(rng) },
    }
}

fn start_state() -> Registry {
    let e = |i: usize| EntityId::mint("t", &format!("e{i}")).unwrap();
    let mut r = Registry::new();
    r.apply(&AtomicOp::InsertEntity(e(0))).unwrap();
    r.apply(&AtomicOp::InsertEntity(e(1))).unwrap();
    r.apply(&AtomicOp::InsertProperty(e(0), Predicate::new("p").unwrap(), Value::literal("x"))).unwrap();
    r.apply(&AtomicOp::InsertLink(e(0), e(1))).unwrap();
    r
}

#[test]
fn criterion_02_serializability() {
    let t = Instant::now();
    let initial = start_state();
    let start = RefState::of(&initial);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut sets, mut outcomes, mut schedules, mut violations) = (0, 0, 0u64, Vec::new());
    for _ in 0..400 {
        let n_tx = rng.gen_range(2..=3);
        let txs: Vec<Vec<AtomicOp>> =
            (0..n_tx).map(|_| (0..rng.gen_range(1..=3)).map(|_| random_op(&mut rng)).collect()).collect();
        let ex = explore(&initial, &txs);
        sets += 1;
        schedules += ex.schedules;
        if ex.unsafe_grants > 0 || ex.max_retries > MAX_RETRIES {
            violations.push(format!("{txs:?}: unsafe grant or retry overflow"));
        }
        for o in &ex.outcomes {
            outcomes += 1;
            if !some_serial_order_matches(&start, &txs, &o.commit_order, &RefState::of(&o.state)) {
                violations.push(format!("{txs:?}: commit order {:?} not serial", o.commit_order));
            }
        }
    }
    let detail = format!(
        "{sets} transaction sets, {schedules} schedules, {outcomes} distinct outcomes, {} violations",
        violations.len()
    );
    report(2, "serializability oracle", violations.is_empty(), detail, t, 120);
}

#[test]
fn criterion_03_retry_bound_and_serialization() {
    let t = Instant::now();
    let many = bench::run(&BenchConfig::new(32, 200, 1, 42));
    let one = bench::run(&BenchConfig::new(1, 200, 1, 42));
    let ratio = many.throughput / one.throughput;
    let ok = many.max_retries <= MAX_RETRIES && one.max_retries == 0 && (ratio - 1.0).abs() <= 0.10;
    let detail = format!(
        "max retries {} (bound {MAX_RETRIES}), 32 clients {:.4} tx/unit vs 1 client {:.4}, ratio {ratio:.3}",
        many.max_retries, many.throughput, one.throughput
    );
    report(3, "retry bound at pool=1", ok, detail, t, 60);
}

#[test]
fn criterion_04_conflict_trends() {
    let t = Instant::now();
    let rows: Vec<_> =
        [1024, 256, 64, 16, 4, 1].iter().map(|&p| bench::run(&BenchConfig::new(32, 200, p, 42))).collect();
    let throughput: Vec<f64> = rows.iter().map(|r| r.throughput).collect();
    let retries: Vec<f64> = rows.iter().map(|r| r.mean_retries_per_commit).collect();
    // one adjacent pair may go the wrong way by less than 5%
    let violations = |xs: &[f64], worse: fn(f64, f64) -> bool| -> (usize, bool) {
        let bad: Vec<(f64, f64)> = xs.windows(2).filter(|w| worse(w[0], w[1])).map(|w| (w[0], w[1])).collect();
        let small = bad.iter().all(|(a, b)| (b - a).abs() < 0.05 * a.abs().max(1e-12));
        (bad.len(), bad.len() <= 1 && small)
    };
    let (tv, t_ok) = violations(&throughput, |a, b| b > a);
    let (rv, r_ok) = violations(&retries, |a, b| b < a);
    let fmt = |xs: &[f64]| xs.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    let detail = format!(
        "throughput [{}] ({tv} inversions), retries/commit [{}] ({rv} inversions)",
        fmt(&throughput),
        fmt(&retries)
    );
    report(4, "conflict trends", t_ok && r_ok, detail, t, 120);
}

#[test]
fn criterion_05_serialization_sizes() {
    let t = Instant::now();
    let r = SizeReport::measure(&gen_corpus(1000, 42));
    let nt = r.ntriples as f64 / r.model1 as f64;
    let pq = r.per_quad as f64 / r.model1 as f64;
    let ok = r.model1 <= r.ntriples && nt <= 1.15 && pq >= 2.0;
    let detail = format!(
        "m1 {} B, ntriples {} B ({nt:.3}x), perquad {} B ({pq:.3}x), m2 {} B, {} triples",
        r.model1, r.ntriples, r.per_quad, r.model2, r.triples
    );
    report(5, "serialization sizes", ok, detail, t, 10);
}

#[test]
fn criterion_06_replication_trends() {
    let t = Instant::now();
    let rate = |name: &str| {
        let mut sim = Simulation::new(load(name)).unwrap();
        sim.run().write_performance()
    };
    let mesh: Vec<f64> = (1..=4).map(|n| rate(&format!("mesh{n}.scn"))).collect();
    let star = rate("star4.scn");
    let decreasing = mesh.windows(2).all(|w| w[1] < w[0]);
    let ratio = mesh[3] / mesh[0];
    let ok = decreasing && (0.40..=0.50).contains(&ratio) && star > mesh[3];
    let detail = format!(
        "mesh 1..4 [{:.3} {:.3} {:.3} {:.3}], mesh4/solo {ratio:.3}, star4 {star:.3}",
        mesh[0], mesh[1], mesh[2], mesh[3]
    );
    report(6, "replication write performance", ok, detail, t, 30);
}

#[test]
fn criterion_07_shallow_vs_deep_copy() {
    let t = Instant::now();
    let run = |kind| {
        let mut cfg = BenchConfig::new(32, 200, 1024, 42);
        cfg.mix = Mix::only(kind);
        bench::run(&cfg)
    };
    let (sc, dc) = (run(TxKind::Sc), run(TxKind::Dc));
    let ok = sc.throughput > dc.throughput && sc.committed > 0 && dc.committed > 0;
    let detail = format!(
        "SC {:.3} tx/unit, DC {:.3} tx/unit, factor {:.2}",
        sc.throughput,
        dc.throughput,
        sc.throughput / dc.throughput
    );
    report(7, "shallow vs deep copy", ok, detail, t, 60);
}

#[test]
fn criterion_08_sync_convergence_and_privacy() {
    let t = Instant::now();
    let problems: Vec<String> = (0..100).flat_map(converge).collect();
    for p in problems.iter().take(10) {
        println!("  {p}");
    }
    let detail = format!("100 random topologies of at most 6 nodes, {} violations", problems.len());
    report(8, "sync convergence and privacy", problems.is_empty(), detail, t, 120);
}

#[test]
fn criterion_09_mailing_end_to_end() {
    let t = Instant::now();
    let node = |n: &str| NodeName::new(n).unwrap();
    let mut sim = Simulation::new(load("fig2.scn")).unwrap();
    let letter = EntityId::mint("xo6", "letter").unwrap();
    let diary = EntityId::mint("xo6", "diary").unwrap();
    {
        let xo6 = sim.store_mut(&node("xo6")).unwrap();
        let p = |s: &str| Predicate::new(s).unwrap();
        xo6.put_local(&letter, p("body"), Value::literal("greetings from the second school"), VTime::ZERO).unwrap();
        xo6.set_flags(&letter, None, Some(node("xo2")), VTime::ZERO).unwrap();
        xo6.put_local(&diary, p("body"), Value::literal("not for sharing"), VTime::ZERO).unwrap();
        xo6.set_flags(&diary, Some(true), None, VTime::ZERO).unwrap();
    }
    sim.run();
    let graph = ers_core::model::GraphId::of(&node("xo6"));
    let delivered = sim.store(&node("xo2")).unwrap().get(&letter, &graph).is_some();
    let crossed = ["b1", "b2"].iter().all(|b| sim.store(&node(b)).unwrap().get(&letter, &graph).is_some());
    let strangers = ["xo1", "xo3", "xo4", "xo5", "xo7", "xo8"]
        .iter()
        .filter(|n| sim.store(&node(n)).unwrap().get(&letter, &graph).is_some())
        .count();
    let registry = sim.registry(&node("g")).unwrap();
    let harvested = registry.entity(&letter).is_some_and(|r| !r.properties.is_empty());
    let private_leaks = sim.stores().filter(|s| s.name() != &node("xo6") && s.get(&diary, &graph).is_some()).count();
    let private_in_registry = registry.contains(&diary);
    let ok = delivered && crossed && strangers == 0 && harvested && private_leaks == 0 && !private_in_registry;
    let detail = format!(
        "delivered to xo2 {delivered}, on both bridges {crossed}, other contributors holding it {strangers}, \
         in global registry {harvested}, private copies elsewhere {private_leaks}, private in registry {private_in_registry}"
    );
    report(9, "mailing end to end", ok, detail, t, 10);
}

fn run_twice(dir: &Path, name: &str, args: &[&str], outputs: &[&str]) -> Result<(), String> {
    let mut runs = Vec::new();
    for round in 0..2 {
        let sub = dir.join(format!("{name}-{round}"));
        std::fs::create_dir_all(&sub).unwrap();
        let args: Vec<String> = args.iter().map(|a| a.replace("{dir}", sub.to_str().unwrap())).collect();
        let out = ers().args(&args).output().unwrap();
        if !out.status.success() {
            return Err(format!(
                "{name} exited with {:?}: {}",
                out.status.code(),
                String::from_utf8_lossy(&out.stderr)
            ));
        }
        let mut files = vec![out.stdout];
        for f in outputs {
            files.push(std::fs::read(sub.join(f)).map_err(|e| format!("{name}: {f}: {e}"))?);
        }
        runs.push(files);
    }
    if runs[0] == runs[1] {
        Ok(())
    } else {
        Err(format!("{name} differs between runs"))
    }
}

#[test]
fn criterion_10_determinism() {
    let t = Instant::now();
    let dir = scratch("determinism");
    let fig2 = scenario_path("fig2.scn");
    let fig2 = fig2.to_str().unwrap();
    let nq = dir.join("corpus.nq");
    std::fs::write(&nq, ers_core::model::codec::encode_nquads(&gen_corpus(50, 9))).unwrap();
    let nq = nq.to_str().unwrap();
    let cases: [(&str, Vec<&str>, Vec<&str>); 5] = [
        (
            "encode-gen",
            vec!["encode", "--gen", "1000", "--model", "all", "--out", "{dir}/sizes.csv"],
            vec!["sizes.csv"],
        ),
        ("encode-input", vec!["encode", "--input", nq, "--model", "m2", "--out", "{dir}/sizes.csv"], vec!["sizes.csv"]),
        ("sim", vec!["sim", fig2, "--seed", "7", "--out", "{dir}/fig2.csv"], vec!["fig2.csv", "fig2.sessions.csv"]),
        (
            "bench-tx",
            vec![
                "bench-tx",
                "--clients",
                "8",
                "--count",
                "50",
                "--pool-sweep",
                "64,4,1",
                "--seed",
                "3",
                "--out",
                "{dir}/tx.csv",
            ],
            vec!["tx.csv"],
        ),
        ("check-locks", vec!["check-locks"], vec![]),
    ];
    let failures: Vec<String> =
        cases.iter().filter_map(|(name, args, outs)| run_twice(&dir, name, args, outs).err()).collect();
    std::fs::remove_dir_all(&dir).ok();
    let detail = format!("{} commands run twice, {} differing: {failures:?}", cases.len(), failures.len());
    report(10, "determinism", failures.is_empty(), detail, t, 60);
}
