//! CNF encodings of "some instance has no stable matching".
//!
//! Variables are laid out in four contiguous blocks:
//!
//! * `x` (ids from 1): group A, B, C, then agent, then the pair `(q, r)` with
//!   `q < r` in lexicographic order. The positive literal means the agent
//!   prefers `q` to `r`; the reverse preference is the negated literal.
//! * `z`: matching index (enumeration order), then candidate-triple index.
//!   A true `z` asserts that the triple blocks the matching.
//! * `y` (F' only): one per matching, true when the matching may be stable.
//! * `s` (F' only): registers of the sequential at-most-one over `y`.
//!
//! Clauses are emitted in a fixed order (symmetry units, order, z, stab,
//! at-most-one) so generated DIMACS is byte-for-byte reproducible.

use std::fmt;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::model::{
    candidate_triples, enumerate_matchings, Group, Instance, Matching, ModelError, Triple,
};
use crate::perm;

#[derive(Debug, Error)]
pub enum CnfError {
    #[error("n={n} is too small for this formula (need n >= {min})")]
    TooSmall { n: usize, min: usize },
    #[error("formula for n={n} needs {vars} variables, beyond the DIMACS id range")]
    TooLarge { n: usize, vars: u128 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("model assigns {got} variables, formula has {expected}")]
    ModelLength { expected: usize, got: usize },
    #[error("preferences of {group}{agent} are cyclic on ({}, {}, {})", fmt_agent(*.group, .cycle[0]), fmt_agent(*.group, .cycle[1]), fmt_agent(*.group, .cycle[2]))]
    Intransitive {
        group: Group,
        agent: usize,
        cycle: [usize; 3],
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn fmt_agent(group: Group, index: usize) -> String {
    format!("{}{}", group.ranked(), index + 1)
}

/// A literal with DIMACS semantics: positive for the variable, negative for
/// its negation. Zero is never a valid literal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(i32);

impl Lit {
    pub fn new(var: u32, positive: bool) -> Lit {
        assert!(
            var >= 1 && var <= i32::MAX as u32,
            "variable id out of range"
        );
        if positive {
            Lit(var as i32)
        } else {
            Lit(-(var as i32))
        }
    }

    pub fn positive(var: u32) -> Lit {
        Lit::new(var, true)
    }

    pub fn negative(var: u32) -> Lit {
        Lit::new(var, false)
    }

    pub fn from_dimacs(value: i32) -> Option<Lit> {
        (value != 0 && value != i32::MIN).then_some(Lit(value))
    }

    pub fn to_dimacs(self) -> i32 {
        self.0
    }

    pub fn var(self) -> u32 {
        self.0.unsigned_abs()
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    /// Value under `model`, where `model[v - 1]` is the value of variable `v`.
    pub fn eval(self, model: &[bool]) -> bool {
        model[self.var() as usize - 1] == self.is_positive()
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(-self.0)
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A clause list over variables `1..=num_vars`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CnfFormula {
    num_vars: u32,
    clauses: Vec<Vec<Lit>>,
}

impl CnfFormula {
    pub fn new(num_vars: u32) -> Self {
        CnfFormula {
            num_vars,
            clauses: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Vec<Lit>] {
        &self.clauses
    }

    /// Appends a clause. Panics if it mentions a variable above `num_vars`.
    pub fn add_clause(&mut self, clause: Vec<Lit>) {
        assert!(
            clause.iter().all(|l| l.var() <= self.num_vars),
            "clause mentions a variable above num_vars={}",
            self.num_vars
        );
        self.clauses.push(clause);
    }

    /// Checks the construction-time invariants: no empty clause and no
    /// clause with complementary literals.
    pub fn is_well_formed(&self) -> bool {
        self.clauses.iter().all(|c| {
            !c.is_empty()
                && c.iter().all(|&l| !c.contains(&!l))
                && c.iter().all(|l| l.var() <= self.num_vars)
        })
    }
}

/// Receives clauses as they are generated.
pub trait ClauseSink {
    fn add(&mut self, clause: &[Lit]) -> io::Result<()>;
}

impl ClauseSink for CnfFormula {
    fn add(&mut self, clause: &[Lit]) -> io::Result<()> {
        self.add_clause(clause.to_vec());
        Ok(())
    }
}

impl ClauseSink for Vec<Vec<Lit>> {
    fn add(&mut self, clause: &[Lit]) -> io::Result<()> {
        self.push(clause.to_vec());
        Ok(())
    }
}

/// Counts clauses without storing them.
#[derive(Debug, Default, Clone, Copy)]
pub struct ClauseCounter {
    pub clauses: u64,
    pub literals: u64,
}

impl ClauseSink for ClauseCounter {
    fn add(&mut self, clause: &[Lit]) -> io::Result<()> {
        self.clauses += 1;
        self.literals += clause.len() as u64;
        Ok(())
    }
}

/// Writes clauses as DIMACS lines.
pub struct DimacsSink<W: Write> {
    out: W,
    line: Vec<u8>,
}

impl<W: Write> DimacsSink<W> {
    pub fn new(out: W) -> Self {
        DimacsSink {
            out,
            line: Vec::with_capacity(1024),
        }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> ClauseSink for DimacsSink<W> {
    fn add(&mut self, clause: &[Lit]) -> io::Result<()> {
        self.line.clear();
        for lit in clause {
            push_int(&mut self.line, lit.0 as i64);
            self.line.push(b' ');
        }
        self.line.extend_from_slice(b"0\n");
        self.out.write_all(&self.line)
    }
}

fn push_int(buf: &mut Vec<u8>, value: i64) {
    if value < 0 {
        buf.push(b'-');
    }
    let mut v = value.unsigned_abs();
    let mut digits = [0u8; 20];
    let mut i = digits.len();
    loop {
        i -= 1;
        digits[i] = b'0' + (v % 10) as u8;
        v /= 10;
        if v == 0 {
            break;
        }
    }
    buf.extend_from_slice(&digits[i..]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Every matching is blocked.
    F,
    /// At most one matching is unblocked.
    FPrime,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::F => "F",
            Variant::FPrime => "F'",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which symmetry-breaking unit clauses to add.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symmetry {
    Off,
    /// Fix `a1`'s order over B, `b1`'s order over C and `c1`'s order over
    /// `a2..an`. Sound for every n.
    Relabel,
    /// `Relabel` plus `a2 >_{c1} a1`. Sound only when every instance of size
    /// `n - 1` is known to have a stable matching.
    Full,
}

impl Symmetry {
    /// Largest n for which the `a2 >_{c1} a1` unit is known to be sound.
    pub const C1_CLAUSE_MAX_N: usize = 6;

    /// The symmetry level selected by an on/off switch for a given n.
    pub fn from_switch(on: bool, n: usize) -> Symmetry {
        match (on, n <= Self::C1_CLAUSE_MAX_N) {
            (false, _) => Symmetry::Off,
            (true, true) => Symmetry::Full,
            (true, false) => Symmetry::Relabel,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Symmetry::Off => "off",
            Symmetry::Relabel => "relabel",
            Symmetry::Full => "on",
        }
    }

    pub fn from_label(label: &str) -> Option<Symmetry> {
        match label {
            "off" => Some(Symmetry::Off),
            "relabel" => Some(Symmetry::Relabel),
            "on" => Some(Symmetry::Full),
            _ => None,
        }
    }
}

/// Semantic meaning of a variable id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SemanticVar {
    /// `agent` of `group` prefers `q` to `r` (with `q < r`).
    X {
        group: Group,
        agent: usize,
        q: usize,
        r: usize,
    },
    Z {
        matching: usize,
        triple: Triple,
    },
    Y {
        matching: usize,
    },
    S {
        index: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarMap {
    n: usize,
    variant: Variant,
    pairs: u32,
    triples_per_matching: u32,
    num_matchings: u32,
    num_x: u32,
    num_z: u32,
    num_y: u32,
    num_s: u32,
}

impl VarMap {
    pub fn new(n: usize, variant: Variant) -> Result<Self, CnfError> {
        if n < 1 {
            return Err(CnfError::TooSmall { n, min: 1 });
        }
        let stats = predict_sizes(n, variant, Symmetry::Off)?;
        if stats.num_vars() > i32::MAX as u128 {
            return Err(CnfError::TooLarge {
                n,
                vars: stats.num_vars(),
            });
        }
        let pairs = (n * (n - 1) / 2) as u32;
        let triples_per_matching = (n * n.saturating_sub(1) * n.saturating_sub(2)) as u32;
        Ok(VarMap {
            n,
            variant,
            pairs,
            triples_per_matching,
            num_matchings: (perm::factorial(n) * perm::factorial(n)) as u32,
            num_x: stats.num_x as u32,
            num_z: stats.num_z as u32,
            num_y: stats.num_y as u32,
            num_s: stats.num_s as u32,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn num_x(&self) -> u32 {
        self.num_x
    }

    pub fn num_z(&self) -> u32 {
        self.num_z
    }

    pub fn num_y(&self) -> u32 {
        self.num_y
    }

    pub fn num_s(&self) -> u32 {
        self.num_s
    }

    pub fn num_vars(&self) -> u32 {
        self.num_x + self.num_z + self.num_y + self.num_s
    }

    pub fn num_matchings(&self) -> u32 {
        self.num_matchings
    }

    pub fn triples_per_matching(&self) -> u32 {
        self.triples_per_matching
    }

    fn z_base(&self) -> u32 {
        1 + self.num_x
    }

    fn y_base(&self) -> u32 {
        self.z_base() + self.num_z
    }

    fn s_base(&self) -> u32 {
        self.y_base() + self.num_y
    }

    fn pair_index(&self, q: usize, r: usize) -> u32 {
        debug_assert!(q < r);
        (q * (2 * self.n - q - 1) / 2 + (r - q - 1)) as u32
    }

    /// The explicit variable for `agent` comparing `q < r`.
    pub fn x_var(&self, group: Group, agent: usize, q: usize, r: usize) -> u32 {
        assert!(q < r && r < self.n && agent < self.n);
        1 + (group.index() as u32 * self.n as u32 + agent as u32) * self.pairs
            + self.pair_index(q, r)
    }

    /// "`agent` of `group` prefers `q` to `r`", for any distinct `q`, `r`.
    pub fn x(&self, group: Group, agent: usize, q: usize, r: usize) -> Lit {
        assert_ne!(q, r, "x literal needs two distinct agents");
        if q < r {
            Lit::positive(self.x_var(group, agent, q, r))
        } else {
            Lit::negative(self.x_var(group, agent, r, q))
        }
    }

    pub fn z(&self, matching: usize, triple_index: usize) -> Lit {
        assert!(
            matching < self.num_matchings as usize
                && triple_index < self.triples_per_matching as usize
        );
        Lit::positive(
            self.z_base() + matching as u32 * self.triples_per_matching + triple_index as u32,
        )
    }

    pub fn y(&self, matching: usize) -> Lit {
        assert!(self.variant == Variant::FPrime && matching < self.num_matchings as usize);
        Lit::positive(self.y_base() + matching as u32)
    }

    /// Sequential-counter register `index` (zero-based).
    pub fn s(&self, index: usize) -> Lit {
        assert!(index < self.num_s as usize);
        Lit::positive(self.s_base() + index as u32)
    }

    pub fn y_lits(&self) -> Vec<Lit> {
        (0..self.num_y as usize).map(|m| self.y(m)).collect()
    }

    /// Decodes a variable id; `None` when it lies outside every block.
    pub fn meaning(&self, var: u32) -> Option<SemanticVar> {
        if var == 0 || var > self.num_vars() {
            return None;
        }
        if var < self.z_base() {
            let offset = var - 1;
            let per_group = self.n as u32 * self.pairs;
            let group = Group::ALL[(offset / per_group) as usize];
            let agent = ((offset % per_group) / self.pairs) as usize;
            let mut pair = offset % self.pairs;
            for q in 0..self.n {
                let row = (self.n - q - 1) as u32;
                if pair < row {
                    return Some(SemanticVar::X {
                        group,
                        agent,
                        q,
                        r: q + 1 + pair as usize,
                    });
                }
                pair -= row;
            }
            unreachable!("pair index within range");
        }
        if var < self.y_base() {
            let offset = var - self.z_base();
            let matching = (offset / self.triples_per_matching) as usize;
            let index = (offset % self.triples_per_matching) as usize;
            let triple = candidate_triples(&matching_at(self.n, matching))[index];
            return Some(SemanticVar::Z { matching, triple });
        }
        if var < self.s_base() {
            return Some(SemanticVar::Y {
                matching: (var - self.y_base()) as usize,
            });
        }
        Some(SemanticVar::S {
            index: (var - self.s_base()) as usize,
        })
    }
}

/// The matching at position `index` of [`enumerate_matchings`].
pub fn matching_at(n: usize, index: usize) -> Matching {
    let perms = perm::permutations(n);
    let k = perms.len();
    Matching::new(perms[index / k].clone(), perms[index % k].clone()).expect("valid permutations")
}

/// Variable and clause counts of a formula, by block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormulaStats {
    pub n: usize,
    pub variant: Variant,
    pub symmetry: Symmetry,
    pub num_x: u128,
    pub num_z: u128,
    pub num_y: u128,
    pub num_s: u128,
    pub num_unit: u128,
    pub num_ord: u128,
    pub num_z_clauses: u128,
    pub num_stab: u128,
    pub num_amo: u128,
}

impl FormulaStats {
    pub fn num_vars(&self) -> u128 {
        self.num_x + self.num_z + self.num_y + self.num_s
    }

    pub fn num_clauses(&self) -> u128 {
        self.num_unit + self.num_ord + self.num_z_clauses + self.num_stab + self.num_amo
    }
}

impl fmt::Display for FormulaStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n: {}", self.n)?;
        writeln!(f, "variant: {}", self.variant)?;
        writeln!(f, "symmetry: {}", self.symmetry.label())?;
        writeln!(f, "vars_x: {}", self.num_x)?;
        writeln!(f, "vars_z: {}", self.num_z)?;
        writeln!(f, "vars_y: {}", self.num_y)?;
        writeln!(f, "vars_s: {}", self.num_s)?;
        writeln!(f, "vars_total: {}", self.num_vars())?;
        writeln!(f, "clauses_unit: {}", self.num_unit)?;
        writeln!(f, "clauses_order: {}", self.num_ord)?;
        writeln!(f, "clauses_z: {}", self.num_z_clauses)?;
        writeln!(f, "clauses_stab: {}", self.num_stab)?;
        writeln!(f, "clauses_amo: {}", self.num_amo)?;
        write!(f, "clauses_total: {}", self.num_clauses())
    }
}

fn binom2(n: u128) -> u128 {
    n * n.saturating_sub(1) / 2
}

/// Closed-form sizes; nothing is materialized.
pub fn predict_sizes(
    n: usize,
    variant: Variant,
    symmetry: Symmetry,
) -> Result<FormulaStats, CnfError> {
    if n < 1 {
        return Err(CnfError::TooSmall { n, min: 1 });
    }
    let too_large = || CnfError::TooLarge { n, vars: u128::MAX };
    let nn = n as u128;
    let fact: u128 = (1..=nn)
        .try_fold(1u128, |acc, k| acc.checked_mul(k))
        .ok_or_else(too_large)?;
    let matchings = fact.checked_mul(fact).ok_or_else(too_large)?;
    let per_matching = nn * nn.saturating_sub(1) * nn.saturating_sub(2);
    let num_x = 3 * nn * binom2(nn);
    let num_z = matchings.checked_mul(per_matching).ok_or_else(too_large)?;
    let (num_y, num_s, num_amo) = match variant {
        Variant::F => (0, 0, 0),
        Variant::FPrime if matchings >= 2 => (matchings, matchings - 1, 3 * matchings - 4),
        Variant::FPrime => (matchings, 0, 0),
    };
    let num_unit = match symmetry {
        Symmetry::Off => 0,
        Symmetry::Relabel => 2 * binom2(nn) + binom2(nn - 1),
        Symmetry::Full if n >= 2 => 2 * binom2(nn) + binom2(nn - 1) + 1,
        Symmetry::Full => 0,
    };
    let num_z_clauses = num_z.checked_mul(3).ok_or_else(too_large)?;
    let stats = FormulaStats {
        n,
        variant,
        symmetry,
        num_x,
        num_z,
        num_y,
        num_s,
        num_unit,
        num_ord: 3 * nn * per_matching,
        num_z_clauses,
        num_stab: if per_matching > 0 || variant == Variant::FPrime {
            matchings
        } else {
            0
        },
        num_amo,
    };
    stats
        .num_vars()
        .checked_add(stats.num_clauses())
        .ok_or_else(too_large)?;
    Ok(stats)
}

/// Transitivity clauses `x(p,q,r) & x(p,r,s) -> x(p,q,s)` for every agent and
/// every ordered triple of distinct targets.
pub fn encode_order_clauses<S: ClauseSink>(vm: &VarMap, sink: &mut S) -> io::Result<()> {
    let n = vm.n();
    for g in Group::ALL {
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    if r == q {
                        continue;
                    }
                    for s in 0..n {
                        if s == q || s == r {
                            continue;
                        }
                        sink.add(&[!vm.x(g, p, q, r), !vm.x(g, p, r, s), vm.x(g, p, q, s)])?;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Unit clauses fixing the agent labels.
pub fn encode_symmetry_units<S: ClauseSink>(
    vm: &VarMap,
    symmetry: Symmetry,
    sink: &mut S,
) -> io::Result<()> {
    if symmetry == Symmetry::Off || vm.n() < 2 {
        return Ok(());
    }
    let n = vm.n();
    for (g, from) in [(Group::A, 0), (Group::B, 0)] {
        for i in from..n {
            for j in i + 1..n {
                sink.add(&[vm.x(g, 0, i, j)])?;
            }
        }
    }
    if symmetry == Symmetry::Full {
        sink.add(&[vm.x(Group::C, 0, 1, 0)])?;
    }
    for i in 1..n {
        for j in i + 1..n {
            sink.add(&[vm.x(Group::C, 0, i, j)])?;
        }
    }
    Ok(())
}

/// How the third z-implication is written. `Misprint` compares `a` against
/// the index of `M(a)` instead of `M(c)`; it exists only so tests can confirm
/// that the oracle campaign notices a broken encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ZThird {
    Correct,
    #[cfg_attr(not(feature = "mutation-hooks"), allow(dead_code))]
    Misprint,
}

fn z_third_lits(vm: &VarMap, m: &Matching, t: Triple, mode: ZThird) -> Option<Lit> {
    match mode {
        ZThird::Correct => Some(vm.x(Group::C, t.c, t.a, m.partner(Group::C, t.c))),
        ZThird::Misprint => {
            let wrong = m.partner(Group::A, t.a);
            (wrong != t.a).then(|| vm.x(Group::C, t.c, t.a, wrong))
        }
    }
}

/// Three binary clauses per (matching, candidate triple):
/// `z -> b >_a M(a)`, `z -> c >_b M(b)`, `z -> a >_c M(c)`.
pub fn encode_z_clauses<S: ClauseSink>(vm: &VarMap, sink: &mut S) -> io::Result<()> {
    encode_z_clauses_with(vm, ZThird::Correct, sink)
}

fn encode_z_clauses_with<S: ClauseSink>(vm: &VarMap, mode: ZThird, sink: &mut S) -> io::Result<()> {
    for (mi, m) in enumerate_matchings(vm.n()).enumerate() {
        for (ti, t) in candidate_triples(&m).into_iter().enumerate() {
            let z = vm.z(mi, ti);
            sink.add(&[!z, vm.x(Group::A, t.a, t.b, m.partner(Group::A, t.a))])?;
            sink.add(&[!z, vm.x(Group::B, t.b, t.c, m.partner(Group::B, t.b))])?;
            match z_third_lits(vm, &m, t, mode) {
                Some(third) => sink.add(&[!z, third])?,
                // the misprinted literal compares a with itself: treat it as false
                None => sink.add(&[!z])?,
            }
        }
    }
    Ok(())
}

/// One clause per matching: some candidate triple blocks it (or, with
/// `with_y`, the matching's `y` is set).
pub fn encode_stab_clauses<S: ClauseSink>(
    vm: &VarMap,
    with_y: bool,
    sink: &mut S,
) -> io::Result<()> {
    let width = vm.triples_per_matching() as usize;
    if width == 0 && !with_y {
        return Ok(());
    }
    let mut clause = Vec::with_capacity(width + 1);
    for mi in 0..vm.num_matchings() as usize {
        clause.clear();
        if with_y {
            clause.push(vm.y(mi));
        }
        clause.extend((0..width).map(|ti| vm.z(mi, ti)));
        sink.add(&clause)?;
    }
    Ok(())
}

/// Sequential-counter at-most-one over `lits`, using fresh registers
/// `first_register ..`. Emits `3m - 4` clauses and returns the `m - 1`
/// registers used; lists shorter than two need nothing.
pub fn encode_amo_sequential<S: ClauseSink>(
    lits: &[Lit],
    first_register: u32,
    sink: &mut S,
) -> io::Result<u32> {
    let m = lits.len();
    if m < 2 {
        return Ok(0);
    }
    let s = |i: usize| Lit::positive(first_register + i as u32);
    sink.add(&[!lits[0], s(0)])?;
    for i in 1..m - 1 {
        sink.add(&[!lits[i], s(i)])?;
        sink.add(&[!s(i - 1), s(i)])?;
        sink.add(&[!lits[i], !s(i - 1)])?;
    }
    sink.add(&[!lits[m - 1], !s(m - 2)])?;
    Ok(m as u32 - 1)
}

/// What to encode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodeOptions {
    pub n: usize,
    pub variant: Variant,
    pub symmetry: Symmetry,
    z_third: ZThird,
}

impl EncodeOptions {
    pub fn new(n: usize, variant: Variant, symmetry: Symmetry) -> Self {
        EncodeOptions {
            n,
            variant,
            symmetry,
            z_third: ZThird::Correct,
        }
    }

    /// Writes the third z-implication as `x_{c,a,M(a)}`, i.e. the misprint
    /// rather than the blocking condition.
    #[cfg(feature = "mutation-hooks")]
    pub fn with_z_typo(mut self) -> Self {
        self.z_third = ZThird::Misprint;
        self
    }

    pub fn is_mutated(&self) -> bool {
        self.z_third != ZThird::Correct
    }

    pub fn stats(&self) -> Result<FormulaStats, CnfError> {
        predict_sizes(self.n, self.variant, self.symmetry)
    }

    /// Comment line identifying the formula.
    pub fn comment(&self) -> String {
        format!(
            "c3dsm n={} variant={} sym={}",
            self.n,
            match self.variant {
                Variant::F => "F",
                Variant::FPrime => "Fprime",
            },
            self.symmetry.label()
        )
    }
}

/// Streams every clause of the formula into `sink`, returning the var map.
pub fn encode<S: ClauseSink>(opts: &EncodeOptions, sink: &mut S) -> Result<VarMap, CnfError> {
    if opts.n < 3 {
        return Err(CnfError::TooSmall { n: opts.n, min: 3 });
    }
    let vm = VarMap::new(opts.n, opts.variant)?;
    encode_symmetry_units(&vm, opts.symmetry, sink)?;
    encode_order_clauses(&vm, sink)?;
    encode_z_clauses_with(&vm, opts.z_third, sink)?;
    let with_y = opts.variant == Variant::FPrime;
    encode_stab_clauses(&vm, with_y, sink)?;
    if with_y {
        let first = vm.num_x() + vm.num_z() + vm.num_y() + 1;
        encode_amo_sequential(&vm.y_lits(), first, sink)?;
    }
    Ok(vm)
}

pub fn build(opts: &EncodeOptions) -> Result<(CnfFormula, VarMap), CnfError> {
    let stats = opts.stats()?;
    let mut formula =
        CnfFormula::new(
            u32::try_from(stats.num_vars()).map_err(|_| CnfError::TooLarge {
                n: opts.n,
                vars: stats.num_vars(),
            })?,
        );
    formula.clauses.reserve(stats.num_clauses() as usize);
    let vm = encode(opts, &mut formula)?;
    Ok((formula, vm))
}

fn c1_symmetry(include_c1_clause: bool) -> Symmetry {
    if include_c1_clause {
        Symmetry::Full
    } else {
        Symmetry::Relabel
    }
}

/// Every matching blocked, plus the label-fixing units.
pub fn build_f(n: usize, include_c1_clause: bool) -> Result<CnfFormula, CnfError> {
    build(&EncodeOptions::new(
        n,
        Variant::F,
        c1_symmetry(include_c1_clause),
    ))
    .map(|(f, _)| f)
}

/// At most one matching unblocked, plus the label-fixing units.
pub fn build_f_prime(n: usize, include_c1_clause: bool) -> Result<CnfFormula, CnfError> {
    build(&EncodeOptions::new(
        n,
        Variant::FPrime,
        c1_symmetry(include_c1_clause),
    ))
    .map(|(f, _)| f)
}

/// Streams the formula as DIMACS: the identifying comment, the `p cnf`
/// header (from closed-form counts) and then each clause.
pub fn write_formula<W: Write>(opts: &EncodeOptions, out: W) -> Result<FormulaStats, CnfError> {
    let stats = opts.stats()?;
    let mut out = out;
    writeln!(out, "c {}", opts.comment())?;
    writeln!(out, "p cnf {} {}", stats.num_vars(), stats.num_clauses())?;
    let mut sink = DimacsSink::new(out);
    encode(opts, &mut sink)?;
    sink.into_inner().flush()?;
    Ok(stats)
}

pub fn write_dimacs<W: Write>(formula: &CnfFormula, out: W) -> io::Result<()> {
    write_dimacs_with_comments(formula, &[], out)
}

pub fn write_dimacs_with_comments<W: Write>(
    formula: &CnfFormula,
    comments: &[String],
    mut out: W,
) -> io::Result<()> {
    for c in comments {
        writeln!(out, "c {c}")?;
    }
    writeln!(
        out,
        "p cnf {} {}",
        formula.num_vars(),
        formula.num_clauses()
    )?;
    let mut sink = DimacsSink::new(out);
    for clause in formula.clauses() {
        sink.add(clause)?;
    }
    sink.into_inner().flush()
}

/// Reads DIMACS CNF. Clauses may span lines; `c` lines are comments.
pub fn read_dimacs<R: BufRead>(input: R) -> Result<CnfFormula, CnfError> {
    let err = |line: usize, message: String| CnfError::Parse { line, message };
    let mut header: Option<(u32, usize)> = None;
    let mut formula = CnfFormula::default();
    let mut current: Vec<Lit> = Vec::new();
    let mut line_no = 0;
    for line in input.lines() {
        line_no += 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        if trimmed.starts_with('p') {
            if header.is_some() {
                return Err(err(line_no, "duplicate problem line".into()));
            }
            let parts: Vec<&str> = trimmed.split_whitespace().collect();
            let parsed = match parts.as_slice() {
                ["p", "cnf", v, c] => v.parse::<u32>().ok().zip(c.parse::<usize>().ok()),
                _ => None,
            };
            let (vars, clauses) =
                parsed.ok_or_else(|| err(line_no, format!("malformed header `{trimmed}`")))?;
            if vars > i32::MAX as u32 {
                return Err(err(
                    line_no,
                    "variable count exceeds the DIMACS range".into(),
                ));
            }
            header = Some((vars, clauses));
            formula = CnfFormula::new(vars);
            continue;
        }
        let Some((vars, _)) = header else {
            return Err(err(line_no, "clause before `p cnf` header".into()));
        };
        for tok in trimmed.split_whitespace() {
            let value: i64 = tok
                .parse()
                .map_err(|_| err(line_no, format!("invalid literal `{tok}`")))?;
            if value == 0 {
                formula.clauses.push(std::mem::take(&mut current));
                continue;
            }
            if value.unsigned_abs() > vars as u64 {
                return Err(err(
                    line_no,
                    format!("literal {value} exceeds declared {vars} variables"),
                ));
            }
            current.push(Lit(value as i32));
        }
    }
    let Some((_, declared)) = header else {
        return Err(err(line_no.max(1), "missing `p cnf` header".into()));
    };
    if !current.is_empty() {
        return Err(err(
            line_no,
            "last clause is missing its terminating 0".into(),
        ));
    }
    if formula.num_clauses() != declared {
        return Err(err(
            line_no,
            format!(
                "header declares {declared} clauses, found {}",
                formula.num_clauses()
            ),
        ));
    }
    Ok(formula)
}

/// Writes the variable-map sidecar: one line per variable.
pub fn write_var_map<W: Write>(vm: &VarMap, comment: &str, mut out: W) -> io::Result<()> {
    let n = vm.n();
    writeln!(out, "c {comment}")?;
    for g in Group::ALL {
        for p in 0..n {
            for q in 0..n {
                for r in q + 1..n {
                    writeln!(
                        out,
                        "x {} {} {} {} {}",
                        vm.x_var(g, p, q, r),
                        g.tag(),
                        p + 1,
                        q + 1,
                        r + 1
                    )?;
                }
            }
        }
    }
    if vm.triples_per_matching() > 0 {
        for (mi, m) in enumerate_matchings(n).enumerate() {
            for (ti, t) in candidate_triples(&m).into_iter().enumerate() {
                writeln!(
                    out,
                    "z {} {} {} {} {}",
                    vm.z(mi, ti),
                    mi + 1,
                    t.a + 1,
                    t.b + 1,
                    t.c + 1
                )?;
            }
        }
    }
    for mi in 0..vm.num_y() as usize {
        writeln!(out, "y {} {}", vm.y(mi), mi + 1)?;
    }
    for i in 0..vm.num_s() as usize {
        writeln!(out, "s {} {}", vm.s(i), i + 1)?;
    }
    out.flush()
}

/// Reads a sidecar back, checking every line against the canonical layout.
pub fn read_var_map<R: BufRead>(input: R) -> Result<(VarMap, EncodeOptions), CnfError> {
    let err = |line: usize, message: String| CnfError::Parse { line, message };
    let mut lines = input.lines();
    let first = lines
        .next()
        .transpose()?
        .ok_or_else(|| err(1, "empty variable map".into()))?;
    let opts = parse_comment(first.trim().trim_start_matches('c').trim()).ok_or_else(|| {
        err(
            1,
            format!("expected `c c3dsm n=.. variant=.. sym=..`, got `{first}`"),
        )
    })?;
    let vm = VarMap::new(opts.n, opts.variant)?;
    let mut expected = Vec::new();
    write_var_map(&vm, &opts.comment(), &mut expected)?;
    let mut expected_lines = expected.split(|&b| b == b'\n').skip(1);
    for (i, line) in lines.enumerate() {
        let line = line?;
        let want = expected_lines.next().unwrap_or(b"");
        if line.as_bytes() != want {
            return Err(err(i + 2, format!("unexpected entry `{line}`")));
        }
    }
    if expected_lines.next().is_some_and(|rest| !rest.is_empty()) {
        return Err(err(0, "variable map is truncated".into()));
    }
    Ok((vm, opts))
}

/// Parses the `c3dsm n=<n> variant=<F|Fprime> sym=<on|off|relabel>` comment.
pub fn parse_comment(text: &str) -> Option<EncodeOptions> {
    let mut parts = text.split_whitespace();
    if parts.next()? != "c3dsm" {
        return None;
    }
    let mut n = None;
    let mut variant = None;
    let mut symmetry = None;
    for part in parts {
        let (key, value) = part.split_once('=')?;
        match key {
            "n" => n = value.parse().ok(),
            "variant" => {
                variant = match value {
                    "F" => Some(Variant::F),
                    "Fprime" | "F'" => Some(Variant::FPrime),
                    _ => None,
                }
            }
            "sym" => symmetry = Symmetry::from_label(value),
            _ => {}
        }
    }
    Some(EncodeOptions::new(n?, variant?, symmetry?))
}

/// Reconstructs the instance encoded by the x-block of `model`.
pub fn decode_model(vm: &VarMap, model: &[bool]) -> Result<Instance, CnfError> {
    if model.len() < vm.num_x() as usize {
        return Err(CnfError::ModelLength {
            expected: vm.num_vars() as usize,
            got: model.len(),
        });
    }
    let n = vm.n();
    let mut tables = Vec::with_capacity(3);
    for g in Group::ALL {
        let mut table = Vec::with_capacity(n);
        for p in 0..n {
            let beats = |q: usize, r: usize| vm.x(g, p, q, r).eval(model);
            if let Some(cycle) = find_cycle(n, &beats) {
                return Err(CnfError::Intransitive {
                    group: g,
                    agent: p + 1,
                    cycle,
                });
            }
            // In a transitive tournament the number of wins fixes the position.
            let mut row: Vec<usize> = (0..n).collect();
            let wins = |q: usize| (0..n).filter(|&r| r != q && beats(q, r)).count();
            row.sort_by_key(|&q| std::cmp::Reverse(wins(q)));
            table.push(row);
        }
        tables.push(table);
    }
    let pref_c = tables.pop().unwrap();
    let pref_b = tables.pop().unwrap();
    let pref_a = tables.pop().unwrap();
    Ok(Instance::new(pref_a, pref_b, pref_c)?)
}

fn find_cycle(n: usize, beats: &dyn Fn(usize, usize) -> bool) -> Option<[usize; 3]> {
    for q in 0..n {
        for r in 0..n {
            if r == q || !beats(q, r) {
                continue;
            }
            for s in 0..n {
                if s != q && s != r && beats(r, s) && !beats(q, s) {
                    return Some([q, r, s]);
                }
            }
        }
    }
    None
}

/// One literal per x variable, signed by the instance's preferences.
pub fn instance_assumptions(vm: &VarMap, inst: &Instance) -> Vec<Lit> {
    assert_eq!(vm.n(), inst.n(), "var map and instance sizes differ");
    let n = vm.n();
    let mut out = Vec::with_capacity(vm.num_x() as usize);
    for g in Group::ALL {
        for p in 0..n {
            for q in 0..n {
                for r in q + 1..n {
                    let lit = vm.x(g, p, q, r);
                    out.push(if inst.prefers_unchecked(g, p, q, r) {
                        lit
                    } else {
                        !lit
                    });
                }
            }
        }
    }
    out
}

/// The x-block fixed to `inst`, each z at the conjunction of the literals
/// its clauses make it imply (the largest value they allow), each `y` only
/// where its matching is otherwise unblocked, and the registers at prefix
/// disjunctions of `y`. The z values are read off the formula's own clauses.
pub fn greedy_completion(formula: &CnfFormula, vm: &VarMap, inst: &Instance) -> Vec<bool> {
    let num_vars = formula.num_vars() as usize;
    let mut model = vec![false; num_vars];
    for lit in instance_assumptions(vm, inst) {
        model[lit.var() as usize - 1] = lit.is_positive();
    }
    let x_end = vm.num_x();
    let z_end = x_end + vm.num_z();
    let y_end = z_end + vm.num_y();
    let is_z = |v: u32| v > x_end && v <= z_end;
    let is_y = |v: u32| v > z_end && v <= y_end;

    for v in x_end + 1..=z_end {
        model[v as usize - 1] = true;
    }
    for clause in formula.clauses() {
        let mut z_lits = clause.iter().filter(|l| is_z(l.var()));
        if let (Some(z), None) = (z_lits.next(), z_lits.next()) {
            if !z.is_positive() && clause.iter().all(|l| l == z || l.var() <= x_end) {
                let rest = clause.iter().any(|l| l != z && l.eval(&model));
                if !rest {
                    model[z.var() as usize - 1] = false;
                }
            }
        }
    }
    for clause in formula.clauses() {
        if clause.iter().any(|l| l.is_positive() && is_z(l.var()))
            && !clause.iter().any(|l| l.eval(&model))
        {
            if let Some(y) = clause.iter().find(|l| l.is_positive() && is_y(l.var())) {
                model[y.var() as usize - 1] = true;
            }
        }
    }
    let mut any = false;
    for i in 0..vm.num_s() as usize {
        any |= vm.y(i).eval(&model);
        model[vm.s(i).var() as usize - 1] = any;
    }
    model
}

/// Solver-free decision of the formula with the x-block fixed to `inst`.
///
/// With x fixed the greedy completion satisfies the formula whenever any
/// assignment does, so the result is `Some(model)` exactly when the formula
/// is satisfiable under `inst`.
pub fn complete_from_instance(
    formula: &CnfFormula,
    vm: &VarMap,
    inst: &Instance,
) -> Option<Vec<bool>> {
    let model = greedy_completion(formula, vm, inst);
    formula
        .clauses()
        .iter()
        .all(|c| c.iter().any(|l| l.eval(&model)))
        .then_some(model)
}

/// Indices (in [`enumerate_matchings`] order) of the matchings none of whose
/// z variables is true in `model`: the matchings the formula treats as
/// stable.
pub fn unblocked_matchings(vm: &VarMap, model: &[bool]) -> Vec<usize> {
    let width = vm.triples_per_matching() as usize;
    (0..vm.num_matchings() as usize)
        .filter(|&mi| (0..width).all(|ti| !vm.z(mi, ti).eval(model)))
        .collect()
}
