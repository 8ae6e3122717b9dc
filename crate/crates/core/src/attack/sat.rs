//! Conflict-driven clause-learning SAT solver with assumptions.
//!
//! Two watched literals with blockers, first-UIP learning with local
//! minimization, Luby restarts, LBD-based learnt clause reduction and
//! phase saving. Branching defaults to the lowest-index unassigned
//! variable; VSIDS is available as an alternative.
//!
//! The solver is incremental: clauses may be added between calls, and each
//! call may carry assumption literals. [`Solver::push`] and [`Solver::pop`]
//! scope clauses behind selector literals.

use std::fmt;
use std::time::Instant;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn lit(self, positive: bool) -> Lit {
        Lit(self.0 << 1 | (!positive) as u32)
    }

    pub fn pos(self) -> Lit {
        self.lit(true)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(self) -> Lit {
        self.lit(false)
    }
}

/// A literal: variable index times two, low bit set when negated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(u32);

impl Lit {
    pub fn var(self) -> Var {
        Var(self.0 >> 1)
    }

    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    fn code(self) -> usize {
        self.0 as usize
    }

    pub fn from_dimacs(d: i32) -> Lit {
        assert!(d != 0, "DIMACS literal 0 is a terminator");
        Var(d.unsigned_abs() - 1).lit(d > 0)
    }

    pub fn to_dimacs(self) -> i32 {
        let v = self.var().0 as i32 + 1;
        if self.is_positive() {
            v
        } else {
            -v
        }
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;

    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// Anything clauses can be emitted into.
pub trait ClauseSink {
    fn new_var(&mut self) -> Var;
    fn add_clause(&mut self, lits: &[Lit]);
}

/// A formula in conjunctive normal form.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Cnf {
    pub num_vars: u32,
    pub clauses: Vec<Vec<Lit>>,
}

impl ClauseSink for Cnf {
    fn new_var(&mut self) -> Var {
        self.num_vars += 1;
        Var(self.num_vars - 1)
    }

    fn add_clause(&mut self, lits: &[Lit]) {
        for l in lits {
            self.num_vars = self.num_vars.max(l.var().0 + 1);
        }
        self.clauses.push(lits.to_vec());
    }
}

impl Cnf {
    pub fn from_dimacs_clauses(num_vars: u32, clauses: &[Vec<i32>]) -> Cnf {
        let mut cnf = Cnf {
            num_vars,
            clauses: Vec::new(),
        };
        for c in clauses {
            let lits: Vec<Lit> = c.iter().map(|&d| Lit::from_dimacs(d)).collect();
            cnf.add_clause(&lits);
        }
        cnf
    }

    pub fn is_satisfied_by(&self, model: &[bool]) -> bool {
        self.clauses
            .iter()
            .all(|c| c.iter().any(|l| model[l.var().index()] == l.is_positive()))
    }
}

/// Standard DIMACS CNF text.
pub fn export_dimacs(f: &Cnf) -> String {
    let mut s = format!("p cnf {} {}\n", f.num_vars, f.clauses.len());
    for c in &f.clauses {
        for l in c {
            s.push_str(&l.to_dimacs().to_string());
            s.push(' ');
        }
        s.push_str("0\n");
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DimacsError {
    #[error("line {0}: {1}")]
    Syntax(usize, String),
    #[error("missing `p cnf` header")]
    MissingHeader,
}

pub fn parse_dimacs(text: &str) -> Result<Cnf, DimacsError> {
    let mut header: Option<(u32, usize)> = None;
    let mut cnf = Cnf::default();
    let mut current = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('p') {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            match parts.as_slice() {
                ["cnf", v, c] => {
                    let v = v.parse().map_err(|_| DimacsError::Syntax(i + 1, "bad variable count".into()))?;
                    let c = c.parse().map_err(|_| DimacsError::Syntax(i + 1, "bad clause count".into()))?;
                    header = Some((v, c));
                    cnf.num_vars = v;
                }
                _ => return Err(DimacsError::Syntax(i + 1, "malformed header".into())),
            }
            continue;
        }
        if header.is_none() {
            return Err(DimacsError::MissingHeader);
        }
        for tok in line.split_whitespace() {
            let d: i32 = tok
                .parse()
                .map_err(|_| DimacsError::Syntax(i + 1, format!("bad literal `{tok}`")))?;
            if d == 0 {
                cnf.add_clause(&current);
                current.clear();
            } else {
                current.push(Lit::from_dimacs(d));
            }
        }
    }
    if !current.is_empty() {
        cnf.add_clause(&current);
    }
    match header {
        Some(_) => Ok(cnf),
        None => Err(DimacsError::MissingHeader),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Branching {
    /// Lowest-index unassigned variable.
    #[default]
    FirstUnassigned,
    Vsids,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Sat,
    Unsat,
    /// The conflict budget ran out.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatResult {
    Sat(Vec<bool>),
    Unsat,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("conflict budget of {0} exhausted")]
    ConflictBudget(u64),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub solves: u64,
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
    pub restarts: u64,
}

const UNDEF: i8 = 0;
const TRUE: i8 = 1;
const FALSE: i8 = -1;
const NO_REASON: u32 = u32::MAX;

/// Clause storage: every clause is a header followed by its literals in one
/// flat `u32` arena. Header words: length, flags, LBD, activity (`f32`
/// bits). The first two literals are the watched ones.
#[derive(Debug, Clone, Default)]
struct Arena {
    words: Vec<u32>,
    wasted: usize,
}

const HEADER: usize = 4;
const LEARNT: u32 = 1;
const DELETED: u32 = 2;

impl Arena {
    fn alloc(&mut self, lits: &[Lit], learnt: bool, lbd: u32) -> u32 {
        let cref = self.words.len() as u32;
        self.words.push(lits.len() as u32);
        self.words.push(if learnt { LEARNT } else { 0 });
        self.words.push(lbd);
        self.words.push(0f32.to_bits());
        self.words.extend(lits.iter().map(|l| l.0));
        cref
    }

    fn len(&self, c: u32) -> usize {
        self.words[c as usize] as usize
    }

    fn learnt(&self, c: u32) -> bool {
        self.words[c as usize + 1] & LEARNT != 0
    }

    fn deleted(&self, c: u32) -> bool {
        self.words[c as usize + 1] & DELETED != 0
    }

    fn delete(&mut self, c: u32) {
        self.words[c as usize + 1] |= DELETED;
        self.wasted += HEADER + self.len(c);
    }

    fn lbd(&self, c: u32) -> u32 {
        self.words[c as usize + 2]
    }

    fn activity(&self, c: u32) -> f32 {
        f32::from_bits(self.words[c as usize + 3])
    }

    fn set_activity(&mut self, c: u32, a: f32) {
        self.words[c as usize + 3] = a.to_bits();
    }

    fn lit(&self, c: u32, i: usize) -> Lit {
        Lit(self.words[c as usize + HEADER + i])
    }

    fn lits(&self, c: u32) -> impl Iterator<Item = Lit> + '_ {
        let start = c as usize + HEADER;
        self.words[start..start + self.len(c)].iter().map(|&w| Lit(w))
    }

    fn swap(&mut self, c: u32, i: usize, j: usize) {
        let b = c as usize + HEADER;
        self.words.swap(b + i, b + j);
    }
}

#[derive(Debug, Clone, Copy)]
struct Watcher {
    cref: u32,
    blocker: Lit,
    binary: bool,
}
/// Max-heap of variables keyed by activity.
#[derive(Debug, Clone, Default)]
struct VarHeap {
    heap: Vec<u32>,
    pos: Vec<u32>,
}

impl VarHeap {
    const ABSENT: u32 = u32::MAX;

    fn grow(&mut self, n: usize) {
        self.pos.resize(n, Self::ABSENT);
    }

    fn contains(&self, v: u32) -> bool {
        self.pos[v as usize] != Self::ABSENT
    }

    fn up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let p = (i - 1) / 2;
            if act[self.heap[p] as usize] >= act[v as usize] {
                break;
            }
            self.heap[i] = self.heap[p];
            self.pos[self.heap[i] as usize] = i as u32;
            i = p;
        }
        self.heap[i] = v;
        self.pos[v as usize] = i as u32;
    }

    fn down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        loop {
            let l = 2 * i + 1;
            if l >= self.heap.len() {
                break;
            }
            let r = l + 1;
            let c = if r < self.heap.len() && act[self.heap[r] as usize] > act[self.heap[l] as usize] {
                r
            } else {
                l
            };
            if act[self.heap[c] as usize] <= act[v as usize] {
                break;
            }
            self.heap[i] = self.heap[c];
            self.pos[self.heap[i] as usize] = i as u32;
            i = c;
        }
        self.heap[i] = v;
        self.pos[v as usize] = i as u32;
    }

    fn insert(&mut self, v: u32, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.heap.push(v);
        let i = self.heap.len() - 1;
        self.pos[v as usize] = i as u32;
        self.up(i, act);
    }

    fn bumped(&mut self, v: u32, act: &[f64]) {
        if self.contains(v) {
            self.up(self.pos[v as usize] as usize, act);
        }
    }

    fn pop(&mut self, act: &[f64]) -> Option<u32> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().unwrap();
        self.pos[top as usize] = Self::ABSENT;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last as usize] = 0;
            self.down(0, act);
        }
        Some(top)
    }
}

fn luby(mut i: u64) -> u64 {
    // Position i (0-based) of 1 1 2 1 1 2 4 ...
    let mut size = 1u64;
    let mut seq = 0u32;
    while size < i + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != i {
        size = (size - 1) >> 1;
        seq -= 1;
        i %= size;
    }
    1 << seq
}

#[derive(Debug, Clone)]
pub struct Solver {
    arena: Arena,
    originals: Vec<u32>,
    learnts: Vec<u32>,
    watches: Vec<Vec<Watcher>>,
    assigns: Vec<i8>,
    level: Vec<u32>,
    reason: Vec<u32>,
    phase: Vec<bool>,
    seen: Vec<bool>,
    activity: Vec<f64>,
    var_inc: f64,
    cla_inc: f32,
    heap: VarHeap,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    cursor: usize,
    ok: bool,
    model: Vec<bool>,
    frames: Vec<Lit>,
    branching: Branching,
    conflict_budget: Option<u64>,
    deadline: Option<Instant>,
    max_learnts: f64,
    stats: SolverStats,
}

impl Default for Solver {
    fn default() -> Self {
        Solver::new()
    }
}

impl ClauseSink for Solver {
    fn new_var(&mut self) -> Var {
        Solver::new_var(self)
    }

    fn add_clause(&mut self, lits: &[Lit]) {
        Solver::add_clause(self, lits);
    }
}

impl Solver {
    pub fn new() -> Self {
        Solver {
            arena: Arena::default(),
            originals: Vec::new(),
            learnts: Vec::new(),
            watches: Vec::new(),
            assigns: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            phase: Vec::new(),
            seen: Vec::new(),
            activity: Vec::new(),
            var_inc: 1.0,
            cla_inc: 1.0,
            heap: VarHeap::default(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            cursor: 0,
            ok: true,
            model: Vec::new(),
            frames: Vec::new(),
            branching: Branching::default(),
            conflict_budget: None,
            deadline: None,
            max_learnts: 0.0,
            stats: SolverStats::default(),
        }
    }

    pub fn with_branching(mut self, branching: Branching) -> Self {
        self.branching = branching;
        self
    }

    /// Conflicts allowed per `solve` call; `None` for unlimited.
    pub fn set_conflict_budget(&mut self, budget: Option<u64>) {
        self.conflict_budget = budget;
    }

    /// Calls running past `deadline` give up with [`SolveStatus::Unknown`].
    pub fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.deadline = deadline;
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    pub fn num_vars(&self) -> usize {
        self.assigns.len()
    }

    pub fn num_clauses(&self) -> usize {
        self.originals.len()
    }

    pub fn new_var(&mut self) -> Var {
        let v = self.assigns.len() as u32;
        self.assigns.push(UNDEF);
        self.level.push(0);
        self.reason.push(NO_REASON);
        self.phase.push(false);
        self.seen.push(false);
        self.activity.push(0.0);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        self.heap.grow(self.assigns.len());
        self.heap.insert(v, &self.activity);
        Var(v)
    }

    fn ensure_var(&mut self, v: Var) {
        while self.assigns.len() <= v.index() {
            self.new_var();
        }
    }

    fn value(&self, l: Lit) -> i8 {
        let v = self.assigns[l.var().index()];
        if l.is_positive() {
            v
        } else {
            -v
        }
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    /// Opens a clause scope; clauses added until the matching [`pop`]
    /// only hold while it is open.
    ///
    /// [`pop`]: Solver::pop
    pub fn push(&mut self) {
        let s = self.new_var();
        self.frames.push(s.pos());
    }

    /// Closes the innermost scope, permanently disabling its clauses.
    pub fn pop(&mut self) {
        if let Some(sel) = self.frames.pop() {
            self.add_clause_raw(&[!sel]);
        }
    }

    pub fn add_clause(&mut self, lits: &[Lit]) {
        match self.frames.last() {
            Some(&sel) => {
                let mut v = lits.to_vec();
                v.push(!sel);
                self.add_clause_raw(&v);
            }
            None => self.add_clause_raw(lits),
        }
    }

    fn add_clause_raw(&mut self, lits: &[Lit]) {
        if !self.ok {
            return;
        }
        if let Some(max) = lits.iter().map(|l| l.var()).max() {
            self.ensure_var(max);
        }
        debug_assert_eq!(self.decision_level(), 0);
        let mut c: Vec<Lit> = lits.to_vec();
        c.sort_unstable();
        c.dedup();
        if c.windows(2).any(|w| w[0] == !w[1]) {
            return;
        }
        if c.iter().any(|&l| self.value(l) == TRUE) {
            return;
        }
        c.retain(|&l| self.value(l) != FALSE);
        match c.len() {
            0 => self.ok = false,
            1 => {
                self.enqueue(c[0], NO_REASON);
                if self.propagate().is_some() {
                    self.ok = false;
                }
            }
            _ => {
                let cref = self.attach(&c, false, 0);
                self.originals.push(cref);
            }
        }
    }

    fn attach(&mut self, lits: &[Lit], learnt: bool, lbd: u32) -> u32 {
        let cref = self.arena.alloc(lits, learnt, lbd);
        let binary = lits.len() == 2;
        self.watches[(!lits[0]).code()].push(Watcher {
            cref,
            blocker: lits[1],
            binary,
        });
        self.watches[(!lits[1]).code()].push(Watcher {
            cref,
            blocker: lits[0],
            binary,
        });
        cref
    }

    fn enqueue(&mut self, l: Lit, reason: u32) {
        let v = l.var().index();
        self.assigns[v] = if l.is_positive() { TRUE } else { FALSE };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    /// Returns a conflicting clause, if any.
    fn propagate(&mut self) -> Option<u32> {
        let mut conflict = None;
        while self.qhead < self.trail.len() && conflict.is_none() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[p.code()]);
            let mut i = 0;
            let mut j = 0;
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                let bv = self.value(w.blocker);
                if bv == TRUE {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                if w.binary {
                    ws[j] = w;
                    j += 1;
                    if bv == FALSE {
                        conflict = Some(w.cref);
                        break;
                    }
                    self.enqueue(w.blocker, w.cref);
                    continue;
                }
                let c = w.cref;
                if self.arena.lit(c, 0) == false_lit {
                    self.arena.swap(c, 0, 1);
                }
                let first = self.arena.lit(c, 0);
                if first != w.blocker && self.value(first) == TRUE {
                    ws[j] = Watcher { blocker: first, ..w };
                    j += 1;
                    continue;
                }
                let len = self.arena.len(c);
                let mut moved = false;
                for k in 2..len {
                    let l = self.arena.lit(c, k);
                    if self.value(l) != FALSE {
                        self.arena.swap(c, 1, k);
                        self.watches[(!l).code()].push(Watcher { blocker: first, ..w });
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = Watcher { blocker: first, ..w };
                j += 1;
                if self.value(first) == FALSE {
                    conflict = Some(c);
                    break;
                }
                self.enqueue(first, c);
            }
            while i < ws.len() {
                ws[j] = ws[i];
                j += 1;
                i += 1;
            }
            ws.truncate(j);
            self.watches[p.code()] = ws;
        }
        conflict
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.bumped(v as u32, &self.activity);
    }

    fn bump_clause(&mut self, c: u32) {
        if !self.arena.learnt(c) {
            return;
        }
        let a = self.arena.activity(c) + self.cla_inc;
        self.arena.set_activity(c, a);
        if a > 1e20 {
            for &l in &self.learnts {
                let scaled = self.arena.activity(l) * 1e-20;
                self.arena.set_activity(l, scaled);
            }
            self.cla_inc *= 1e-20;
        }
    }

    /// First-UIP conflict analysis. Returns the learnt clause (asserting
    /// literal first) and the backjump level.
    fn analyze(&mut self, mut confl: u32) -> (Vec<Lit>, u32) {
        let mut learnt = vec![Lit(0)];
        let mut path = 0usize;
        let mut p: Option<Lit> = None;
        let mut idx = self.trail.len();
        let current = self.decision_level();
        loop {
            self.bump_clause(confl);
            for k in 0..self.arena.len(confl) {
                let q = self.arena.lit(confl, k);
                if Some(q) == p {
                    continue;
                }
                let v = q.var().index();
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump_var(v);
                    if self.level[v] >= current {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[self.trail[idx].var().index()] {
                    break;
                }
            }
            let lit = self.trail[idx];
            p = Some(lit);
            self.seen[lit.var().index()] = false;
            path -= 1;
            if path == 0 {
                break;
            }
            confl = self.reason[lit.var().index()];
        }
        learnt[0] = !p.unwrap();

        // Drop literals implied by the rest of the clause through their
        // reasons (local minimization).
        let mut kept = vec![learnt[0]];
        for &l in &learnt[1..] {
            let v = l.var();
            let r = self.reason[v.index()];
            let redundant = r != NO_REASON
                && self.arena.lits(r).all(|q| {
                    let u = q.var().index();
                    q.var() == v || self.seen[u] || self.level[u] == 0
                });
            if !redundant {
                kept.push(l);
            }
        }
        for l in &learnt {
            self.seen[l.var().index()] = false;
        }
        let mut learnt = kept;

        let bt = if learnt.len() == 1 {
            0
        } else {
            let (max_i, _) = learnt
                .iter()
                .enumerate()
                .skip(1)
                .max_by_key(|(_, l)| self.level[l.var().index()])
                .unwrap();
            learnt.swap(1, max_i);
            self.level[learnt[1].var().index()]
        };
        (learnt, bt)
    }

    fn lbd(&self, lits: &[Lit]) -> u32 {
        let mut levels: Vec<u32> = lits.iter().map(|l| self.level[l.var().index()]).collect();
        levels.sort_unstable();
        levels.dedup();
        levels.len() as u32
    }

    fn cancel_until(&mut self, level: u32) {
        if self.decision_level() <= level {
            return;
        }
        let lim = self.trail_lim[level as usize];
        for i in (lim..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.var().index();
            self.phase[v] = l.is_positive();
            self.assigns[v] = UNDEF;
            self.reason[v] = NO_REASON;
            self.heap.insert(v as u32, &self.activity);
            self.cursor = self.cursor.min(v);
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(level as usize);
        self.qhead = lim;
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        let v = match self.branching {
            Branching::FirstUnassigned => {
                while self.cursor < self.assigns.len() && self.assigns[self.cursor] != UNDEF {
                    self.cursor += 1;
                }
                (self.cursor < self.assigns.len()).then_some(self.cursor)
            }
            Branching::Vsids => loop {
                match self.heap.pop(&self.activity) {
                    Some(v) if self.assigns[v as usize] == UNDEF => break Some(v as usize),
                    Some(_) => continue,
                    None => break None,
                }
            },
        }?;
        Some(Var(v as u32).lit(self.phase[v]))
    }

    /// A clause is locked while it is the reason for a current assignment.
    fn locked(&self, c: u32) -> bool {
        (0..2).any(|i| {
            let l = self.arena.lit(c, i);
            self.value(l) == TRUE && self.reason[l.var().index()] == c
        })
    }

    fn reduce_db(&mut self) {
        let mut cands: Vec<u32> = self
            .learnts
            .iter()
            .copied()
            .filter(|&c| self.arena.lbd(c) > 2 && !self.locked(c))
            .collect();
        cands.sort_by(|&a, &b| {
            self.arena
                .lbd(b)
                .cmp(&self.arena.lbd(a))
                .then(self.arena.activity(a).total_cmp(&self.arena.activity(b)))
        });
        for &c in &cands[..cands.len() / 2] {
            self.arena.delete(c);
        }
        let arena = &self.arena;
        self.learnts.retain(|&c| !arena.deleted(c));
        for ws in &mut self.watches {
            ws.retain(|w| !arena.deleted(w.cref));
        }
        if self.arena.wasted * 2 > self.arena.words.len() {
            self.collect_garbage();
        }
    }

    /// Compacts the arena, forwarding every reference.
    fn collect_garbage(&mut self) {
        let mut fresh = Arena::default();
        let mut forward = |old: &Arena, c: u32| -> u32 {
            let lits: Vec<Lit> = old.lits(c).collect();
            let n = fresh.alloc(&lits, old.learnt(c), old.lbd(c));
            fresh.set_activity(n, old.activity(c));
            n
        };
        let mut map = std::collections::HashMap::with_capacity(self.originals.len() + self.learnts.len());
        for list in [&mut self.originals, &mut self.learnts] {
            for c in list.iter_mut() {
                let n = forward(&self.arena, *c);
                map.insert(*c, n);
                *c = n;
            }
        }
        for ws in &mut self.watches {
            for w in ws.iter_mut() {
                w.cref = map[&w.cref];
            }
        }
        for l in &self.trail {
            let r = &mut self.reason[l.var().index()];
            if *r != NO_REASON {
                *r = map[r];
            }
        }
        self.arena = fresh;
    }

    fn out_of_time(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    /// Solves under the open scopes plus `assumptions`.
    pub fn solve_with(&mut self, assumptions: &[Lit]) -> SolveStatus {
        self.stats.solves += 1;
        self.model.clear();
        if !self.ok {
            return SolveStatus::Unsat;
        }
        for l in assumptions {
            self.ensure_var(l.var());
        }
        let mut assumps: Vec<Lit> = self.frames.clone();
        assumps.extend_from_slice(assumptions);

        if self.max_learnts == 0.0 {
            self.max_learnts = (self.num_clauses() as f64 / 3.0).max(2000.0);
        }
        let start_conflicts = self.stats.conflicts;
        let mut restart_idx = 0u64;
        let status = 'outer: loop {
            let restart_limit = 100 * luby(restart_idx);
            restart_idx += 1;
            let mut local_conflicts = 0u64;
            loop {
                if let Some(confl) = self.propagate() {
                    self.stats.conflicts += 1;
                    local_conflicts += 1;
                    if self.decision_level() == 0 {
                        self.ok = false;
                        break 'outer SolveStatus::Unsat;
                    }
                    let (learnt, bt) = self.analyze(confl);
                    self.cancel_until(bt);
                    if learnt.len() == 1 {
                        self.enqueue(learnt[0], NO_REASON);
                    } else {
                        let lbd = self.lbd(&learnt);
                        let cref = self.attach(&learnt, true, lbd);
                        self.learnts.push(cref);
                        self.bump_clause(cref);
                        self.enqueue(learnt[0], cref);
                    }
                    self.var_inc /= 0.95;
                    self.cla_inc /= 0.999;
                    let used = self.stats.conflicts - start_conflicts;
                    if self.conflict_budget.is_some_and(|b| used >= b) || (used.is_multiple_of(256) && self.out_of_time()) {
                        break 'outer SolveStatus::Unknown;
                    }
                } else {
                    if local_conflicts >= restart_limit {
                        self.stats.restarts += 1;
                        self.cancel_until(0);
                        break;
                    }
                    if self.learnts.len() as f64 >= self.max_learnts + self.trail.len() as f64 {
                        self.reduce_db();
                        self.max_learnts *= 1.1;
                    }
                    let mut next = None;
                    while (self.decision_level() as usize) < assumps.len() {
                        let a = assumps[self.decision_level() as usize];
                        match self.value(a) {
                            TRUE => self.trail_lim.push(self.trail.len()),
                            FALSE => break 'outer SolveStatus::Unsat,
                            _ => {
                                next = Some(a);
                                break;
                            }
                        }
                    }
                    let decision = match next {
                        Some(a) => a,
                        None => match self.pick_branch() {
                            Some(l) => {
                                self.stats.decisions += 1;
                                l
                            }
                            None => {
                                self.model = self.assigns.iter().map(|&v| v == TRUE).collect();
                                break 'outer SolveStatus::Sat;
                            }
                        },
                    };
                    self.trail_lim.push(self.trail.len());
                    self.enqueue(decision, NO_REASON);
                }
            }
        };
        self.cancel_until(0);
        if status == SolveStatus::Sat {
            assert!(self.check_model(), "model violates an input clause");
        }
        status
    }

    pub fn solve(&mut self) -> SolveStatus {
        self.solve_with(&[])
    }

    /// Assignment from the last `Sat` answer, indexed by variable.
    pub fn model(&self) -> &[bool] {
        &self.model
    }

    pub fn model_value(&self, l: Lit) -> bool {
        self.model[l.var().index()] == l.is_positive()
    }

    fn check_model(&self) -> bool {
        self.originals
            .iter()
            .all(|&c| self.arena.lits(c).any(|l| self.model_value(l)))
            && self.trail.iter().all(|&l| self.model_value(l))
    }
}

/// One-shot solve of a whole formula.
pub fn sat_solve(f: &Cnf) -> Result<SatResult, SolveError> {
    sat_solve_with_budget(f, None)
}

pub fn sat_solve_with_budget(f: &Cnf, budget: Option<u64>) -> Result<SatResult, SolveError> {
    let mut s = Solver::new();
    s.set_conflict_budget(budget);
    for _ in 0..f.num_vars {
        s.new_var();
    }
    for c in &f.clauses {
        s.add_clause(c);
    }
    match s.solve() {
        SolveStatus::Sat => {
            let mut model = s.model().to_vec();
            model.truncate(f.num_vars as usize);
            assert!(f.is_satisfied_by(&model), "model violates the formula");
            Ok(SatResult::Sat(model))
        }
        SolveStatus::Unsat => Ok(SatResult::Unsat),
        SolveStatus::Unknown => Err(SolveError::ConflictBudget(budget.unwrap_or(0))),
    }
}
