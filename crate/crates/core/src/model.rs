//! Instances, matchings and the brute-force stability oracle.
//!
//! Agents are indexed from zero in the Rust API. The text format, the CLI and
//! every `Display` impl use one-based labels (`a1`, `b3`, ...).

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::perm;

/// Largest `n` accepted by [`stable_matchings`] unless a limit is given.
pub const DEFAULT_STABLE_LIMIT: usize = 5;
/// Largest `n` accepted by [`canonical_instances`] unless a limit is given.
pub const DEFAULT_CANONICAL_LIMIT: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("group size must be at least {min}, got {n}")]
    TooSmall { n: usize, min: usize },
    #[error("agent index {index} out of range for n={n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("cannot compare an agent with itself")]
    SameAgent,
    #[error("preference row of {group}{agent} is not a permutation of 1..{n}")]
    NotPermutation {
        group: Group,
        agent: usize,
        n: usize,
    },
    #[error("expected {expected} rows for group {group}, got {got}")]
    RowCount {
        group: Group,
        expected: usize,
        got: usize,
    },
    #[error("sigma and tau must be permutations of equal length")]
    InvalidMatching,
    #[error("{what} is limited to n <= {limit} (got n={n}); raise the limit explicitly")]
    Capacity {
        what: &'static str,
        n: usize,
        limit: usize,
    },
    #[error("{0} is not a mutual top triple")]
    NotMutualTop(Triple),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// One of the three agent groups. `A` ranks `B`, `B` ranks `C`, `C` ranks `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    A,
    B,
    C,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::A, Group::B, Group::C];

    pub fn index(self) -> usize {
        self as usize
    }

    /// The group this group's agents rank.
    pub fn ranked(self) -> Group {
        match self {
            Group::A => Group::B,
            Group::B => Group::C,
            Group::C => Group::A,
        }
    }

    pub fn tag(self) -> char {
        match self {
            Group::A => 'A',
            Group::B => 'B',
            Group::C => 'C',
        }
    }

    pub fn from_tag(tag: &str) -> Option<Group> {
        match tag {
            "A" | "a" => Some(Group::A),
            "B" | "b" => Some(Group::B),
            "C" | "c" => Some(Group::C),
            _ => None,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lower = match self {
            Group::A => "a",
            Group::B => "b",
            Group::C => "c",
        };
        f.write_str(lower)
    }
}

/// A c3DSM instance: one strict total order per agent.
///
/// `rows[g][p]` lists the agents of `g.ranked()` from most to least preferred
/// by agent `p` of group `g`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instance {
    n: usize,
    rows: [Vec<Vec<usize>>; 3],
    ranks: [Vec<Vec<usize>>; 3],
}

impl Instance {
    /// Builds an instance from zero-based preference rows.
    pub fn new(
        pref_a: Vec<Vec<usize>>,
        pref_b: Vec<Vec<usize>>,
        pref_c: Vec<Vec<usize>>,
    ) -> Result<Self, ModelError> {
        let n = pref_a.len();
        if n == 0 {
            return Err(ModelError::TooSmall { n, min: 1 });
        }
        let rows = [pref_a, pref_b, pref_c];
        for g in Group::ALL {
            let table = &rows[g.index()];
            if table.len() != n {
                return Err(ModelError::RowCount {
                    group: g,
                    expected: n,
                    got: table.len(),
                });
            }
            for (p, row) in table.iter().enumerate() {
                if row.len() != n || !perm::is_permutation(row) {
                    return Err(ModelError::NotPermutation {
                        group: g,
                        agent: p + 1,
                        n,
                    });
                }
            }
        }
        let ranks = [
            rows[0].iter().map(|r| perm::inverse(r)).collect(),
            rows[1].iter().map(|r| perm::inverse(r)).collect(),
            rows[2].iter().map(|r| perm::inverse(r)).collect(),
        ];
        Ok(Instance { n, rows, ranks })
    }

    /// Every agent ranks the next group in index order.
    pub fn unanimous(n: usize) -> Self {
        let row: Vec<usize> = (0..n).collect();
        let table = vec![row; n];
        Instance::new(table.clone(), table.clone(), table).expect("identity rows are valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, group: Group, agent: usize) -> &[usize] {
        &self.rows[group.index()][agent]
    }

    pub fn rows(&self, group: Group) -> &[Vec<usize>] {
        &self.rows[group.index()]
    }

    /// Position of `target` in `agent`'s row (0 = most preferred).
    #[inline]
    pub fn rank(&self, group: Group, agent: usize, target: usize) -> usize {
        self.ranks[group.index()][agent][target]
    }

    #[inline]
    pub fn top(&self, group: Group, agent: usize) -> usize {
        self.rows[group.index()][agent][0]
    }

    /// Whether `agent` of `group` strictly prefers `q` to `r`.
    pub fn prefers(
        &self,
        group: Group,
        agent: usize,
        q: usize,
        r: usize,
    ) -> Result<bool, ModelError> {
        for index in [agent, q, r] {
            if index >= self.n {
                return Err(ModelError::IndexOutOfRange { index, n: self.n });
            }
        }
        if q == r {
            return Err(ModelError::SameAgent);
        }
        Ok(self.prefers_unchecked(group, agent, q, r))
    }

    #[inline]
    pub fn prefers_unchecked(&self, group: Group, agent: usize, q: usize, r: usize) -> bool {
        let ranks = &self.ranks[group.index()][agent];
        ranks[q] < ranks[r]
    }

    /// Renames agents: old `a_i` becomes `a_{perm_a[i]}`, and likewise for B and C.
    pub fn relabel(&self, perm_a: &[usize], perm_b: &[usize], perm_c: &[usize]) -> Instance {
        let perms = [perm_a, perm_b, perm_c];
        let mut tables: Vec<Vec<Vec<usize>>> = Vec::with_capacity(3);
        for g in Group::ALL {
            let own = perms[g.index()];
            let target = perms[g.ranked().index()];
            let mut table = vec![Vec::new(); self.n];
            for (old, row) in self.rows[g.index()].iter().enumerate() {
                table[own[old]] = row.iter().map(|&t| target[t]).collect();
            }
            tables.push(table);
        }
        let pref_c = tables.pop().unwrap();
        let pref_b = tables.pop().unwrap();
        let pref_a = tables.pop().unwrap();
        Instance::new(pref_a, pref_b, pref_c).expect("relabeling preserves permutations")
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_instance(self))
    }
}

/// A triple `(a, b, c)` of zero-based agent indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub a: usize,
    pub b: usize,
    pub c: usize,
}

impl Triple {
    pub fn new(a: usize, b: usize, c: usize) -> Self {
        Triple { a, b, c }
    }

    pub fn get(&self, group: Group) -> usize {
        match group {
            Group::A => self.a,
            Group::B => self.b,
            Group::C => self.c,
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(a{}, b{}, c{})", self.a + 1, self.b + 1, self.c + 1)
    }
}

/// A perfect matching given by `sigma` (M(a_i) = b_sigma(i)) and `tau`
/// (M(b_j) = c_tau(j)).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Matching {
    sigma: Vec<usize>,
    tau: Vec<usize>,
    // M(c_k), i.e. sigma^-1(tau^-1(k))
    c_partner: Vec<usize>,
}

impl Matching {
    pub fn new(sigma: Vec<usize>, tau: Vec<usize>) -> Result<Self, ModelError> {
        if sigma.len() != tau.len() || !perm::is_permutation(&sigma) || !perm::is_permutation(&tau)
        {
            return Err(ModelError::InvalidMatching);
        }
        let sigma_inv = perm::inverse(&sigma);
        let tau_inv = perm::inverse(&tau);
        let c_partner = tau_inv.iter().map(|&j| sigma_inv[j]).collect();
        Ok(Matching {
            sigma,
            tau,
            c_partner,
        })
    }

    pub fn identity(n: usize) -> Self {
        Matching::new((0..n).collect(), (0..n).collect()).unwrap()
    }

    /// Builds the matching whose triples are exactly `triples`.
    pub fn from_triples(n: usize, triples: &[Triple]) -> Result<Self, ModelError> {
        if triples.len() != n {
            return Err(ModelError::InvalidMatching);
        }
        let mut sigma = vec![usize::MAX; n];
        let mut tau = vec![usize::MAX; n];
        for t in triples {
            if t.a >= n || t.b >= n || t.c >= n {
                return Err(ModelError::InvalidMatching);
            }
            sigma[t.a] = t.b;
            tau[t.b] = t.c;
        }
        Matching::new(sigma, tau)
    }

    pub fn n(&self) -> usize {
        self.sigma.len()
    }

    pub fn sigma(&self) -> &[usize] {
        &self.sigma
    }

    pub fn tau(&self) -> &[usize] {
        &self.tau
    }

    /// The partner of agent `agent` of `group` in the group it ranks.
    #[inline]
    pub fn partner(&self, group: Group, agent: usize) -> usize {
        match group {
            Group::A => self.sigma[agent],
            Group::B => self.tau[agent],
            Group::C => self.c_partner[agent],
        }
    }

    /// The matched triples ordered by their A agent.
    pub fn triples(&self) -> Vec<Triple> {
        (0..self.n())
            .map(|a| Triple::new(a, self.sigma[a], self.tau[self.sigma[a]]))
            .collect()
    }

    /// Lifts a matching of the instance reduced by `t` back to the full
    /// instance and adds `t` itself.
    pub fn extend_with(&self, t: Triple) -> Matching {
        let n = self.n() + 1;
        let lift = |x: usize, removed: usize| if x < removed { x } else { x + 1 };
        let mut sigma = vec![0; n];
        let mut tau = vec![0; n];
        sigma[t.a] = t.b;
        tau[t.b] = t.c;
        for i in 0..self.n() {
            sigma[lift(i, t.a)] = lift(self.sigma[i], t.b);
            tau[lift(i, t.b)] = lift(self.tau[i], t.c);
        }
        Matching::new(sigma, tau).expect("lifted permutations stay bijective")
    }
}

impl fmt::Display for Matching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.triples().iter().map(|t| t.to_string()).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// The triples that could possibly block `m`: `b != M(a)`, `c != M(b)`,
/// `a != M(c)`, in lexicographic order.
pub fn candidate_triples(m: &Matching) -> Vec<Triple> {
    let n = m.n();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) * n.saturating_sub(2));
    for a in 0..n {
        for b in 0..n {
            if b == m.partner(Group::A, a) {
                continue;
            }
            for c in 0..n {
                if c != m.partner(Group::B, b) && a != m.partner(Group::C, c) {
                    out.push(Triple::new(a, b, c));
                }
            }
        }
    }
    out
}

#[inline]
pub fn is_blocking(inst: &Instance, m: &Matching, t: Triple) -> bool {
    inst.prefers_unchecked(Group::A, t.a, t.b, m.partner(Group::A, t.a))
        && inst.prefers_unchecked(Group::B, t.b, t.c, m.partner(Group::B, t.b))
        && inst.prefers_unchecked(Group::C, t.c, t.a, m.partner(Group::C, t.c))
}

pub fn is_stable(inst: &Instance, m: &Matching) -> bool {
    let n = inst.n();
    for a in 0..n {
        let ma = m.partner(Group::A, a);
        for b in 0..n {
            if !inst.prefers_unchecked(Group::A, a, b, ma) {
                continue;
            }
            let mb = m.partner(Group::B, b);
            for c in 0..n {
                if inst.prefers_unchecked(Group::B, b, c, mb)
                    && inst.prefers_unchecked(Group::C, c, a, m.partner(Group::C, c))
                {
                    return false;
                }
            }
        }
    }
    true
}

/// Lazily enumerates all `(n!)^2` matchings, lexicographic in `(sigma, tau)`.
#[derive(Debug, Clone)]
pub struct Matchings {
    perms: Vec<Vec<usize>>,
    next: usize,
}

impl Iterator for Matchings {
    type Item = Matching;

    fn next(&mut self) -> Option<Matching> {
        let k = self.perms.len();
        if self.next >= k * k {
            return None;
        }
        let (i, j) = (self.next / k, self.next % k);
        self.next += 1;
        Some(Matching::new(self.perms[i].clone(), self.perms[j].clone()).unwrap())
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.perms.len() * self.perms.len() - self.next;
        (left, Some(left))
    }
}

impl ExactSizeIterator for Matchings {}

pub fn enumerate_matchings(n: usize) -> Matchings {
    Matchings {
        perms: perm::permutations(n),
        next: 0,
    }
}

pub fn stable_matchings(inst: &Instance) -> Result<Vec<Matching>, ModelError> {
    stable_matchings_with_limit(inst, DEFAULT_STABLE_LIMIT)
}

pub fn stable_matchings_with_limit(
    inst: &Instance,
    limit: usize,
) -> Result<Vec<Matching>, ModelError> {
    if inst.n() > limit {
        return Err(ModelError::Capacity {
            what: "stable matching enumeration",
            n: inst.n(),
            limit,
        });
    }
    Ok(enumerate_matchings(inst.n())
        .filter(|m| is_stable(inst, m))
        .collect())
}

/// Counts stable matchings among a pre-enumerated list; used by sweeps that
/// check many instances of the same size.
pub fn count_stable(inst: &Instance, matchings: &[Matching]) -> usize {
    matchings.iter().filter(|m| is_stable(inst, m)).count()
}

/// A triple in which every member is the previous member's top choice, with
/// the smallest A agent winning ties.
pub fn mutual_top_triple(inst: &Instance) -> Option<Triple> {
    (0..inst.n()).find_map(|a| {
        let b = inst.top(Group::A, a);
        let c = inst.top(Group::B, b);
        (inst.top(Group::C, c) == a).then_some(Triple::new(a, b, c))
    })
}

fn is_mutual_top(inst: &Instance, t: Triple) -> bool {
    t.a < inst.n()
        && t.b < inst.n()
        && t.c < inst.n()
        && inst.top(Group::A, t.a) == t.b
        && inst.top(Group::B, t.b) == t.c
        && inst.top(Group::C, t.c) == t.a
}

/// Removes the three agents of a mutual top triple, keeping relative orders.
pub fn reduce_by_triple(inst: &Instance, t: Triple) -> Result<Instance, ModelError> {
    if !is_mutual_top(inst, t) {
        return Err(ModelError::NotMutualTop(t));
    }
    if inst.n() < 2 {
        return Err(ModelError::TooSmall {
            n: inst.n(),
            min: 2,
        });
    }
    let shrink = |x: usize, removed: usize| if x < removed { x } else { x - 1 };
    let mut tables: Vec<Vec<Vec<usize>>> = Vec::with_capacity(3);
    for g in Group::ALL {
        let own = t.get(g);
        let target = t.get(g.ranked());
        let table = inst.rows[g.index()]
            .iter()
            .enumerate()
            .filter(|&(p, _)| p != own)
            .map(|(_, row)| {
                row.iter()
                    .filter(|&&x| x != target)
                    .map(|&x| shrink(x, target))
                    .collect()
            })
            .collect();
        tables.push(table);
    }
    let pref_c = tables.pop().unwrap();
    let pref_b = tables.pop().unwrap();
    let pref_a = tables.pop().unwrap();
    Instance::new(pref_a, pref_b, pref_c)
}

/// Uniformly random preference rows from a seeded ChaCha8 stream.
pub fn random_instance(n: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = || -> Vec<Vec<usize>> {
        (0..n)
            .map(|_| {
                let mut row: Vec<usize> = (0..n).collect();
                row.shuffle(&mut rng);
                row
            })
            .collect()
    };
    let pref_a = table();
    let pref_b = table();
    let pref_c = table();
    Instance::new(pref_a, pref_b, pref_c).expect("shuffled rows are permutations")
}

/// Instances in symmetry-normal form: `a1` and `b1` rank by index, and `c1`
/// ranks `a2` first with `a2..an` in index order. `a1` may sit anywhere
/// after `a2` in `c1`'s row; all other rows are free.
#[derive(Debug, Clone)]
pub struct CanonicalInstances {
    n: usize,
    perms: Vec<Vec<usize>>,
    c1_rows: Vec<Vec<usize>>,
    len: u64,
    next: u64,
}

impl CanonicalInstances {
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The instance at position `index` of the enumeration. Rows vary
    /// lexicographically with `a2`'s row most significant and `cn`'s row
    /// least significant; `c1`'s row sits between the B and C rows.
    pub fn instance_at(&self, mut index: u64) -> Instance {
        assert!(index < self.len, "canonical index out of range");
        let n = self.n;
        let k = self.perms.len() as u64;
        // Digits from least significant: c_n..c_2, c1 choice, b_n..b_2, a_n..a_2.
        let mut c_rows = vec![Vec::new(); n];
        for agent in (1..n).rev() {
            c_rows[agent] = self.perms[(index % k) as usize].clone();
            index /= k;
        }
        let choices = self.c1_rows.len() as u64;
        c_rows[0] = self.c1_rows[(index % choices) as usize].clone();
        index /= choices;
        let mut b_rows = vec![Vec::new(); n];
        for agent in (1..n).rev() {
            b_rows[agent] = self.perms[(index % k) as usize].clone();
            index /= k;
        }
        let mut a_rows = vec![Vec::new(); n];
        for agent in (1..n).rev() {
            a_rows[agent] = self.perms[(index % k) as usize].clone();
            index /= k;
        }
        a_rows[0] = (0..n).collect();
        b_rows[0] = (0..n).collect();
        Instance::new(a_rows, b_rows, c_rows).expect("canonical rows are permutations")
    }
}

impl Iterator for CanonicalInstances {
    type Item = Instance;

    fn next(&mut self) -> Option<Instance> {
        if self.next >= self.len {
            return None;
        }
        let inst = self.instance_at(self.next);
        self.next += 1;
        Some(inst)
    }
}

pub fn canonical_instances(n: usize) -> Result<CanonicalInstances, ModelError> {
    canonical_instances_with_limit(n, DEFAULT_CANONICAL_LIMIT)
}

pub fn canonical_instances_with_limit(
    n: usize,
    limit: usize,
) -> Result<CanonicalInstances, ModelError> {
    if n < 2 {
        return Err(ModelError::TooSmall { n, min: 2 });
    }
    if n > limit {
        return Err(ModelError::Capacity {
            what: "canonical instance enumeration",
            n,
            limit,
        });
    }
    let perms = perm::permutations(n);
    // a2 first, then a3..an in order with a1 inserted at any later position.
    let c1_rows: Vec<Vec<usize>> = (1..n)
        .map(|pos| {
            let mut row: Vec<usize> = (1..n).collect();
            row.insert(pos, 0);
            row
        })
        .collect();
    let k = perms.len() as u64;
    let len = k
        .checked_pow(3 * (n as u32 - 1))
        .and_then(|x| x.checked_mul(c1_rows.len() as u64))
        .ok_or(ModelError::Capacity {
            what: "canonical instance enumeration",
            n,
            limit,
        })?;
    Ok(CanonicalInstances {
        n,
        perms,
        c1_rows,
        len,
        next: 0,
    })
}

/// Writes the `c3dsm n=<n>` text format with one-based labels.
pub fn serialize_instance(inst: &Instance) -> String {
    let mut out = format!("c3dsm n={}\n", inst.n());
    for g in Group::ALL {
        for (p, row) in inst.rows(g).iter().enumerate() {
            out.push(g.tag());
            out.push(' ');
            out.push_str(&(p + 1).to_string());
            out.push(':');
            for &x in row {
                out.push(' ');
                out.push_str(&(x + 1).to_string());
            }
            out.push('\n');
        }
    }
    out
}

pub fn parse_instance(text: &str) -> Result<Instance, ModelError> {
    let err = |line: usize, message: String| ModelError::Parse { line, message };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (line_no, header) = lines
        .next()
        .ok_or_else(|| err(1, "missing `c3dsm n=<n>` header".into()))?;
    let n: usize = header
        .strip_prefix("c3dsm n=")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| err(line_no, format!("malformed header `{header}`")))?;
    if n == 0 {
        return Err(err(line_no, "n must be positive".into()));
    }

    let mut tables: Vec<Vec<Vec<usize>>> = Vec::with_capacity(3);
    let mut last_line = line_no;
    for g in Group::ALL {
        let mut table = Vec::with_capacity(n);
        for p in 1..=n {
            let (line_no, line) = lines.next().ok_or_else(|| {
                err(
                    last_line + 1,
                    format!("expected row `{} {p}:`, found end of input", g.tag()),
                )
            })?;
            last_line = line_no;
            let (label, body) = line
                .split_once(':')
                .ok_or_else(|| err(line_no, format!("expected `{} {p}: ...`", g.tag())))?;
            let mut label_parts = label.split_whitespace();
            let tag_ok = label_parts.next().and_then(Group::from_tag) == Some(g);
            let index_ok = label_parts.next().and_then(|s| s.parse::<usize>().ok()) == Some(p);
            if !tag_ok || !index_ok || label_parts.next().is_some() {
                return Err(err(
                    line_no,
                    format!(
                        "expected row label `{} {p}`, got `{}`",
                        g.tag(),
                        label.trim()
                    ),
                ));
            }
            let row: Vec<usize> = body
                .split_whitespace()
                .map(|tok| match tok.parse::<usize>() {
                    Ok(v) if (1..=n).contains(&v) => Ok(v - 1),
                    _ => Err(err(
                        line_no,
                        format!("invalid agent `{tok}` (expected 1..{n})"),
                    )),
                })
                .collect::<Result<_, _>>()?;
            if row.len() != n || !perm::is_permutation(&row) {
                return Err(err(
                    line_no,
                    format!("row of {}{p} is not a permutation of 1..{n}", g),
                ));
            }
            table.push(row);
        }
        tables.push(table);
    }
    if let Some((line_no, extra)) = lines.next() {
        return Err(err(line_no, format!("unexpected trailing line `{extra}`")));
    }
    let pref_c = tables.pop().unwrap();
    let pref_b = tables.pop().unwrap();
    let pref_a = tables.pop().unwrap();
    Instance::new(pref_a, pref_b, pref_c)
}
