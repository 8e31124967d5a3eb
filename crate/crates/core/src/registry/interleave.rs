//! Exhaustive exploration of how a few concurrent transactions can
//! interleave against the lock table.
//!
//! Each transaction is a small program: acquire its locks, apply its
//! operations, release. A failed acquire counts a retry and tries again
//! later, up to the retry bound. Every scheduler choice is explored;
//! identical intermediate states are visited once.

use std::collections::BTreeMap;

use super::locks::LockTable;
use super::state::{lock_demand, registry_graph, AtomicOp, Registry, UniquenessMode};
use super::tx::MAX_RETRIES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Status {
    Running,
    Committed,
    SemanticAbort,
    ContentionAbort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Pc {
    Acquire,
    Apply,
    Release,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Thread {
    pc: Pc,
    retries: u32,
    status: Status,
}

/// One distinct way the run can end.
#[derive(Debug, Clone)]
pub struct Outcome {
    /// Indices of committed transactions in the order their effects landed.
    pub commit_order: Vec<usize>,
    pub status: Vec<Status>,
    pub retries: Vec<u32>,
    pub state: Registry,
}

#[derive(Debug, Clone, Default)]
pub struct Exploration {
    pub outcomes: Vec<Outcome>,
    /// Distinct intermediate states expanded.
    pub states: usize,
    /// Complete schedules counted, sharing included.
    pub schedules: u64,
    pub max_retries: u32,
    /// Grants after which two transactions held incompatible locks.
    pub unsafe_grants: usize,
}

type Key = (Vec<Thread>, Vec<usize>);
type Final = (Vec<usize>, Vec<Status>, Vec<u32>);

struct Explorer<'a> {
    txs: &'a [Vec<AtomicOp>],
    /// Complete schedules reachable from each expanded state.
    memo: BTreeMap<Key, u64>,
    finals: BTreeMap<Final, Registry>,
    out: Exploration,
}

impl Explorer<'_> {
    fn run(&mut self, threads: Vec<Thread>, order: Vec<usize>, locks: &LockTable, reg: &Registry) -> u64 {
        let key = (threads.clone(), order.clone());
        if let Some(&n) = self.memo.get(&key) {
            return n;
        }
        self.out.states += 1;
        if threads.iter().all(|t| t.pc == Pc::Done) {
            let status = threads.iter().map(|t| t.status).collect();
            let retries = threads.iter().map(|t| t.retries).collect();
            self.finals.entry((order, status, retries)).or_insert_with(|| reg.clone());
            self.memo.insert(key, 1);
            return 1;
        }
        let mut total = 0;
        for i in 0..threads.len() {
            let t = threads[i];
            let mut next = threads.clone();
            let mut next_order = order.clone();
            let mut locks = locks.clone();
            let mut reg = reg.clone();
            match t.pc {
                Pc::Done => continue,
                Pc::Acquire => {
                    if locks.try_acquire(i as u64, &lock_demand(&self.txs[i])) {
                        if !locks.is_safe() {
                            self.out.unsafe_grants += 1;
                        }
                        next[i].pc = Pc::Apply;
                    } else if t.retries == MAX_RETRIES {
                        next[i] = Thread { pc: Pc::Done, status: Status::ContentionAbort, ..t };
                    } else {
                        next[i].retries += 1;
                        self.out.max_retries = self.out.max_retries.max(next[i].retries);
                    }
                }
                Pc::Apply => {
                    match reg.apply_batch(&self.txs[i], UniquenessMode::Strict, &registry_graph()) {
                        Ok(_) => {
                            next[i].status = Status::Committed;
                            next_order.push(i);
                        }
                        Err(_) => next[i].status = Status::SemanticAbort,
                    }
                    next[i].pc = Pc::Release;
                }
                Pc::Release => {
                    locks.release(i as u64);
                    next[i].pc = Pc::Done;
                }
            }
            total += self.run(next, next_order, &locks, &reg);
        }
        self.memo.insert(key, total);
        total
    }
}

/// Explores every interleaving of `txs` starting from `initial`.
pub fn explore(initial: &Registry, txs: &[Vec<AtomicOp>]) -> Exploration {
    let mut ex = Explorer { txs, memo: BTreeMap::new(), finals: BTreeMap::new(), out: Exploration::default() };
    let start = vec![Thread { pc: Pc::Acquire, retries: 0, status: Status::Running }; txs.len()];
    ex.out.schedules = ex.run(start, Vec::new(), &LockTable::new(), initial);
    let finals = std::mem::take(&mut ex.finals);
    ex.out.outcomes = finals
        .into_iter()
        .map(|((commit_order, status, retries), state)| Outcome { commit_order, status, retries, state })
        .collect();
    ex.out
}
