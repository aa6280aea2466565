use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Budget, SolveResult, SolveStats, SolverConfig, Verdict};
use crate::cnf::{CnfFormula, Lit};

// Literal code: 2 * var + sign, with var zero-based and sign 1 for negation.
type Code = u32;
type ClauseRef = u32;

const NO_REASON: ClauseRef = u32::MAX;
const UNDEF: u8 = 2;
const RESTART_BASE: f64 = 100.0;
const VAR_DECAY: f64 = 0.95;
const CLAUSE_DECAY: f64 = 0.999;
const FIRST_REDUCE: u64 = 2000;
const REDUCE_INCREMENT: u64 = 300;

#[inline]
fn code(lit: Lit) -> Code {
    ((lit.var() - 1) << 1) | (!lit.is_positive()) as u32
}

#[inline]
fn var_of(c: Code) -> usize {
    (c >> 1) as usize
}

#[derive(Debug, Clone, Copy)]
struct Watcher {
    clause: ClauseRef,
    blocker: Code,
}

#[derive(Debug)]
struct Clause {
    lits: Vec<Code>,
    learnt: bool,
    deleted: bool,
    lbd: u32,
    activity: f64,
}

/// Max-heap of variables keyed by activity.
#[derive(Debug, Default)]
struct VarOrder {
    heap: Vec<u32>,
    position: Vec<usize>,
}

impl VarOrder {
    const ABSENT: usize = usize::MAX;

    fn with_vars(n: usize) -> Self {
        VarOrder {
            heap: Vec::with_capacity(n),
            position: vec![Self::ABSENT; n],
        }
    }

    fn contains(&self, v: usize) -> bool {
        self.position[v] != Self::ABSENT
    }

    fn better(act: &[f64], a: u32, b: u32) -> bool {
        let (x, y) = (act[a as usize], act[b as usize]);
        x > y || (x == y && a < b)
    }

    fn up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            if !Self::better(act, v, self.heap[parent]) {
                break;
            }
            self.heap[i] = self.heap[parent];
            self.position[self.heap[i] as usize] = i;
            i = parent;
        }
        self.heap[i] = v;
        self.position[v as usize] = i;
    }

    fn down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        loop {
            let left = 2 * i + 1;
            if left >= self.heap.len() {
                break;
            }
            let right = left + 1;
            let child = if right < self.heap.len()
                && Self::better(act, self.heap[right], self.heap[left])
            {
                right
            } else {
                left
            };
            if !Self::better(act, self.heap[child], v) {
                break;
            }
            self.heap[i] = self.heap[child];
            self.position[self.heap[i] as usize] = i;
            i = child;
        }
        self.heap[i] = v;
        self.position[v as usize] = i;
    }

    fn insert(&mut self, v: usize, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.heap.push(v as u32);
        let i = self.heap.len() - 1;
        self.position[v] = i;
        self.up(i, act);
    }

    fn bumped(&mut self, v: usize, act: &[f64]) {
        if self.contains(v) {
            self.up(self.position[v], act);
        }
    }

    fn pop(&mut self, act: &[f64]) -> Option<usize> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().unwrap();
        self.position[top as usize] = Self::ABSENT;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.position[last as usize] = 0;
            self.down(0, act);
        }
        Some(top as usize)
    }
}

fn luby(y: f64, mut x: u64) -> f64 {
    let mut size = 1u64;
    let mut seq = 0i32;
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    y.powi(seq)
}

pub(super) struct Cdcl {
    clauses: Vec<Clause>,
    watches: Vec<Vec<Watcher>>,
    values: Vec<u8>,
    level: Vec<u32>,
    reason: Vec<ClauseRef>,
    phase: Vec<bool>,
    activity: Vec<f64>,
    var_inc: f64,
    clause_inc: f64,
    order: VarOrder,
    trail: Vec<Code>,
    trail_lim: Vec<usize>,
    qhead: usize,
    seen: Vec<bool>,
    level_stamp: Vec<u64>,
    stamp: u64,
    ok: bool,
    stats: SolveStats,
}

impl Cdcl {
    pub(super) fn new(formula: &CnfFormula, config: &SolverConfig) -> Self {
        let n = formula.num_vars() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let activity: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 1e-5).collect();
        let mut order = VarOrder::with_vars(n);
        for v in 0..n {
            order.insert(v, &activity);
        }
        let mut solver = Cdcl {
            clauses: Vec::with_capacity(formula.num_clauses()),
            watches: vec![Vec::new(); 2 * n],
            values: vec![UNDEF; n],
            level: vec![0; n],
            reason: vec![NO_REASON; n],
            phase: vec![false; n],
            activity,
            var_inc: 1.0,
            clause_inc: 1.0,
            order,
            trail: Vec::with_capacity(n),
            trail_lim: Vec::new(),
            qhead: 0,
            seen: vec![false; n],
            level_stamp: vec![0; n + 1],
            stamp: 0,
            ok: true,
            stats: SolveStats::default(),
        };
        for clause in formula.clauses() {
            if !solver.add_input_clause(clause) {
                solver.ok = false;
                break;
            }
        }
        solver
    }

    #[inline]
    fn value(&self, lit: Code) -> u8 {
        let v = self.values[var_of(lit)];
        if v == UNDEF {
            UNDEF
        } else {
            v ^ (lit & 1) as u8
        }
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    /// Adds an original clause at level 0. Returns false if the formula is
    /// already refuted.
    fn add_input_clause(&mut self, clause: &[Lit]) -> bool {
        let mut lits: Vec<Code> = clause.iter().map(|&l| code(l)).collect();
        lits.sort_unstable();
        lits.dedup();
        if lits.windows(2).any(|w| w[0] ^ 1 == w[1]) {
            return true;
        }
        lits.retain(|&l| self.value(l) != 0);
        if lits.iter().any(|&l| self.value(l) == 1) {
            return true;
        }
        match lits.len() {
            0 => false,
            1 => {
                self.assign(lits[0], NO_REASON);
                self.propagate().is_none()
            }
            _ => {
                self.attach(lits, false, 0);
                true
            }
        }
    }

    fn attach(&mut self, lits: Vec<Code>, learnt: bool, lbd: u32) -> ClauseRef {
        let cref = self.clauses.len() as ClauseRef;
        self.watches[(lits[0] ^ 1) as usize].push(Watcher {
            clause: cref,
            blocker: lits[1],
        });
        self.watches[(lits[1] ^ 1) as usize].push(Watcher {
            clause: cref,
            blocker: lits[0],
        });
        self.clauses.push(Clause {
            lits,
            learnt,
            deleted: false,
            lbd,
            activity: 0.0,
        });
        cref
    }

    #[inline]
    fn assign(&mut self, lit: Code, reason: ClauseRef) {
        let v = var_of(lit);
        self.values[v] = (lit & 1 == 0) as u8;
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(lit);
    }

    fn propagate(&mut self) -> Option<ClauseRef> {
        let mut conflict = None;
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = p ^ 1;
            let mut ws = std::mem::take(&mut self.watches[p as usize]);
            let (mut i, mut j) = (0, 0);
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.value(w.blocker) == 1 {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let cref = w.clause;
                let clause = &mut self.clauses[cref as usize];
                if clause.lits[0] == false_lit {
                    clause.lits.swap(0, 1);
                }
                let first = clause.lits[0];
                let watcher = Watcher {
                    clause: cref,
                    blocker: first,
                };
                let first_value = {
                    let v = self.values[var_of(first)];
                    if v == UNDEF {
                        UNDEF
                    } else {
                        v ^ (first & 1) as u8
                    }
                };
                if first != w.blocker && first_value == 1 {
                    ws[j] = watcher;
                    j += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..clause.lits.len() {
                    let l = clause.lits[k];
                    let v = self.values[var_of(l)];
                    if v == UNDEF || v ^ (l & 1) as u8 == 1 {
                        clause.lits.swap(1, k);
                        self.watches[(l ^ 1) as usize].push(watcher);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = watcher;
                j += 1;
                if first_value == 0 {
                    conflict = Some(cref);
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.assign(first, cref);
                }
            }
            ws.truncate(j);
            self.watches[p as usize] = ws;
            if conflict.is_some() {
                self.qhead = self.trail.len();
                break;
            }
        }
        conflict
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in self.activity.iter_mut() {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.order.bumped(v, &self.activity);
    }

    fn bump_clause(&mut self, cref: ClauseRef) {
        let c = &mut self.clauses[cref as usize];
        if !c.learnt {
            return;
        }
        c.activity += self.clause_inc;
        if c.activity > 1e20 {
            for c in self.clauses.iter_mut().filter(|c| c.learnt) {
                c.activity *= 1e-20;
            }
            self.clause_inc *= 1e-20;
        }
    }

    /// First-UIP conflict analysis. Returns the learnt clause (asserting
    /// literal first, highest remaining level second) and the backjump level.
    fn analyze(&mut self, mut conflict: ClauseRef) -> (Vec<Code>, u32) {
        let mut learnt: Vec<Code> = vec![0];
        let mut pending = 0usize;
        let mut asserting: Option<Code> = None;
        let mut index = self.trail.len();
        let current = self.decision_level();
        loop {
            self.bump_clause(conflict);
            let skip = asserting.is_some() as usize;
            let len = self.clauses[conflict as usize].lits.len();
            for k in skip..len {
                let q = self.clauses[conflict as usize].lits[k];
                let v = var_of(q);
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump_var(v);
                    if self.level[v] >= current {
                        pending += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[var_of(self.trail[index])] {
                    break;
                }
            }
            let p = self.trail[index];
            let v = var_of(p);
            self.seen[v] = false;
            pending -= 1;
            asserting = Some(p);
            if pending == 0 {
                break;
            }
            conflict = self.reason[v];
        }
        learnt[0] = asserting.unwrap() ^ 1;

        // Recursive minimization: drop literals implied by the rest.
        let mut to_clear: Vec<usize> = learnt[1..].iter().map(|&l| var_of(l)).collect();
        let levels_mask = learnt[1..]
            .iter()
            .fold(0u64, |m, &l| m | 1u64 << (self.level[var_of(l)] & 63));
        let mut kept = 1;
        for k in 1..learnt.len() {
            let l = learnt[k];
            if self.reason[var_of(l)] == NO_REASON || !self.redundant(l, levels_mask, &mut to_clear)
            {
                learnt[kept] = l;
                kept += 1;
            }
        }
        learnt.truncate(kept);
        for v in to_clear {
            self.seen[v] = false;
        }

        let backjump = if learnt.len() == 1 {
            0
        } else {
            let mut best = 1;
            for k in 2..learnt.len() {
                if self.level[var_of(learnt[k])] > self.level[var_of(learnt[best])] {
                    best = k;
                }
            }
            learnt.swap(1, best);
            self.level[var_of(learnt[1])]
        };
        (learnt, backjump)
    }

    fn redundant(&mut self, lit: Code, levels_mask: u64, to_clear: &mut Vec<usize>) -> bool {
        let mut stack = vec![lit];
        let top = to_clear.len();
        while let Some(p) = stack.pop() {
            let cref = self.reason[var_of(p)];
            let len = self.clauses[cref as usize].lits.len();
            for k in 1..len {
                let q = self.clauses[cref as usize].lits[k];
                let v = var_of(q);
                if self.seen[v] || self.level[v] == 0 {
                    continue;
                }
                if self.reason[v] != NO_REASON && levels_mask & (1u64 << (self.level[v] & 63)) != 0
                {
                    self.seen[v] = true;
                    stack.push(q);
                    to_clear.push(v);
                } else {
                    for &u in &to_clear[top..] {
                        self.seen[u] = false;
                    }
                    to_clear.truncate(top);
                    return false;
                }
            }
        }
        true
    }

    fn lbd(&mut self, lits: &[Code]) -> u32 {
        self.stamp += 1;
        let mut count = 0;
        for &l in lits {
            let lv = self.level[var_of(l)] as usize;
            if self.level_stamp[lv] != self.stamp {
                self.level_stamp[lv] = self.stamp;
                count += 1;
            }
        }
        count
    }

    fn cancel_until(&mut self, level: u32) {
        if self.decision_level() <= level {
            return;
        }
        let start = self.trail_lim[level as usize];
        for k in (start..self.trail.len()).rev() {
            let lit = self.trail[k];
            let v = var_of(lit);
            self.phase[v] = lit & 1 == 0;
            self.values[v] = UNDEF;
            self.reason[v] = NO_REASON;
            self.order.insert(v, &self.activity);
        }
        self.trail.truncate(start);
        self.trail_lim.truncate(level as usize);
        self.qhead = start;
    }

    fn locked(&self, cref: ClauseRef) -> bool {
        let first = self.clauses[cref as usize].lits[0];
        self.value(first) == 1 && self.reason[var_of(first)] == cref
    }

    /// Drops about half of the learnt clauses, keeping glue clauses and
    /// clauses that are currently reasons.
    fn reduce_db(&mut self) {
        let mut candidates: Vec<ClauseRef> = (0..self.clauses.len() as ClauseRef)
            .filter(|&c| {
                let cl = &self.clauses[c as usize];
                cl.learnt && !cl.deleted && cl.lbd > 2 && cl.lits.len() > 2
            })
            .filter(|&c| !self.locked(c))
            .collect();
        candidates.sort_by(|&a, &b| {
            let (ca, cb) = (&self.clauses[a as usize], &self.clauses[b as usize]);
            cb.lbd
                .cmp(&ca.lbd)
                .then(ca.activity.total_cmp(&cb.activity))
        });
        for &c in &candidates[..candidates.len() / 2] {
            let cl = &mut self.clauses[c as usize];
            cl.deleted = true;
            cl.lits = Vec::new();
        }
        let clauses = &self.clauses;
        for ws in self.watches.iter_mut() {
            ws.retain(|w| !clauses[w.clause as usize].deleted);
        }
    }

    fn pick_branch(&mut self) -> Option<Code> {
        while let Some(v) = self.order.pop(&self.activity) {
            if self.values[v] == UNDEF {
                return Some(((v as u32) << 1) | (!self.phase[v]) as u32);
            }
        }
        None
    }

    pub(super) fn solve(mut self, assumptions: &[Lit], budget: &Budget) -> SolveResult {
        let start = Instant::now();
        let verdict = self.search(assumptions, budget, start);
        self.stats.elapsed = start.elapsed();
        let model =
            (verdict == Verdict::Sat).then(|| self.values.iter().map(|&v| v == 1).collect());
        SolveResult {
            verdict,
            model,
            stats: self.stats,
            output: None,
        }
    }

    fn search(&mut self, assumptions: &[Lit], budget: &Budget, start: Instant) -> Verdict {
        if !self.ok {
            return Verdict::Unsat;
        }
        let assumptions: Vec<Code> = assumptions.iter().map(|&l| code(l)).collect();
        let mut restart_limit = luby(2.0, 0) * RESTART_BASE;
        let mut conflicts_since_restart = 0u64;
        let mut next_reduce = FIRST_REDUCE;
        let mut reductions = 0u64;
        loop {
            if let Some(conflict) = self.propagate() {
                self.stats.conflicts += 1;
                conflicts_since_restart += 1;
                if self.decision_level() == 0 {
                    return Verdict::Unsat;
                }
                let (learnt, backjump) = self.analyze(conflict);
                self.cancel_until(backjump);
                if learnt.len() == 1 {
                    self.assign(learnt[0], NO_REASON);
                } else {
                    let lbd = self.lbd(&learnt);
                    let first = learnt[0];
                    let cref = self.attach(learnt, true, lbd);
                    self.bump_clause(cref);
                    self.assign(first, cref);
                }
                self.stats.learnt += 1;
                self.var_inc /= VAR_DECAY;
                self.clause_inc /= CLAUSE_DECAY;

                if budget
                    .max_conflicts
                    .is_some_and(|m| self.stats.conflicts >= m)
                    || budget.time_limit.is_some_and(|t| start.elapsed() >= t)
                {
                    return Verdict::Unknown;
                }
                continue;
            }

            if conflicts_since_restart as f64 >= restart_limit {
                self.stats.restarts += 1;
                conflicts_since_restart = 0;
                restart_limit = luby(2.0, self.stats.restarts) * RESTART_BASE;
                self.cancel_until(0);
            }
            if self.stats.conflicts >= next_reduce {
                reductions += 1;
                next_reduce = self.stats.conflicts + FIRST_REDUCE + REDUCE_INCREMENT * reductions;
                self.reduce_db();
            }
            if budget.time_limit.is_some_and(|t| start.elapsed() >= t) {
                return Verdict::Unknown;
            }

            let mut next = None;
            while (self.decision_level() as usize) < assumptions.len() {
                let p = assumptions[self.decision_level() as usize];
                match self.value(p) {
                    1 => self.trail_lim.push(self.trail.len()),
                    0 => return Verdict::Unsat,
                    _ => {
                        next = Some(p);
                        break;
                    }
                }
            }
            let decision = match next {
                Some(p) => p,
                None => match self.pick_branch() {
                    Some(p) => p,
                    None => return Verdict::Sat,
                },
            };
            self.stats.decisions += 1;
            self.trail_lim.push(self.trail.len());
            self.assign(decision, NO_REASON);
        }
    }
}
