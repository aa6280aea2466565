//! One test per acceptance criterion. Each prints a single PASS/FAIL line to
//! stderr (uncaptured) and then asserts.

mod common;

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::time::{Duration, Instant};

use c3dsm_core::cnf::{
    build, build_f, build_f_prime, decode_model, encode_amo_sequential, instance_assumptions,
    predict_sizes, read_dimacs, write_dimacs,
};
use c3dsm_core::model::{candidate_triples, enumerate_matchings, random_instance};
use c3dsm_core::solver::{solve, verify_model};
use c3dsm_core::{
    CnfFormula, EncodeOptions, Group, Lit, SolverConfig, Symmetry, VarMap, Variant, Verdict,
};
use c3dsm_harness::{oracle_equivalence, remark1_check, verify_exhaustive, OracleConfig};
use common::{c3dsm, stdout, value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const N5_F: (u128, u128) = (864_150, 2_607_327);
const N6_F: (u128, u128) = (62_208_270, 187_144_601);
const N5_FPRIME_OURS: (u128, u128) = (892_949, 2_650_523);
const N5_FPRIME_PUBLISHED: (u128, u128) = (892_948, 2_650_522);
const FPRIME_MAX_DELTA: u128 = 1;
const N5_ENCODE_LIMIT: Duration = Duration::from_secs(120);
const N6_STATS_LIMIT: Duration = Duration::from_secs(1);
const N3_SOLVE_LIMIT: Duration = Duration::from_secs(60);
const N4_INTERNAL_LIMIT_S: u64 = 30 * 60;
const N3_CANONICAL: u64 = 93_312;
const N3_SWEEP_LIMIT: Duration = Duration::from_secs(5 * 60);
const ORACLE_TRIALS: u64 = 1000;
const REMARK1_TRIALS: u64 = 10_000;
const TRUTH_TABLE_CASES: usize = 500;
const TRUTH_TABLE_MAX_VARS: u32 = 20;
const GOLDEN_F3_SHA256: &str = "007beda0158fcdab55c7ee1b3ef060acc60506f5de3ee5950621afde28e4a2cd";

struct Checks {
    criterion: &'static str,
    items: Vec<(bool, String)>,
}

impl Checks {
    fn new(criterion: &'static str) -> Self {
        Checks {
            criterion,
            items: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, detail: impl Into<String>) {
        self.items.push((ok, detail.into()));
    }

    fn finish(self) {
        let ok = self.items.iter().all(|(ok, _)| *ok);
        let detail: Vec<String> = self
            .items
            .iter()
            .map(|(ok, d)| {
                if *ok {
                    d.clone()
                } else {
                    format!("[failed] {d}")
                }
            })
            .collect();
        let line = format!(
            "{} criterion {}: {}",
            if ok { "PASS" } else { "FAIL" },
            self.criterion,
            detail.join("; ")
        );
        let _ = writeln!(io::stderr().lock(), "{line}");
        assert!(ok, "{line}");
    }
}

fn header(path: &std::path::Path) -> Option<(u128, u128)> {
    let file = BufReader::new(File::open(path).ok()?);
    let line = file
        .lines()
        .map_while(Result::ok)
        .find(|l| l.starts_with("p cnf"))?;
    let mut parts = line.split_whitespace().skip(2);
    Some((parts.next()?.parse().ok()?, parts.next()?.parse().ok()?))
}

fn count_clauses(path: &std::path::Path) -> u128 {
    let file = BufReader::new(File::open(path).unwrap());
    file.lines()
        .map_while(Result::ok)
        .filter(|l| !l.starts_with(['c', 'p']) && (l.ends_with(" 0") || l == "0"))
        .count() as u128
}

#[test]
fn criterion_1_formula_sizes() {
    let mut c = Checks::new("1 (formula sizes n=5, n=6)");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f5.cnf");
    let start = Instant::now();
    let out = c3dsm([
        "encode",
        "--n",
        "5",
        "--variant",
        "F",
        "--output",
        path.to_str().unwrap(),
    ]);
    let took = start.elapsed();
    c.check(out.status.success(), "encode --n 5 exits 0");
    let h = header(&path);
    c.check(h == Some(N5_F), format!("n=5 header {h:?}, want {N5_F:?}"));
    let clauses = count_clauses(&path);
    c.check(
        clauses == N5_F.1,
        format!("n=5 file holds {clauses} clauses"),
    );
    c.check(
        took < N5_ENCODE_LIMIT,
        format!(
            "n=5 generation {:.2}s < {}s",
            took.as_secs_f64(),
            N5_ENCODE_LIMIT.as_secs()
        ),
    );

    let start = Instant::now();
    let out = c3dsm(["encode", "--n", "6", "--variant", "F", "--stats-only"]);
    let took = start.elapsed();
    let text = stdout(&out);
    let got = (value(&text, "vars_total"), value(&text, "clauses_total"));
    let want = (N6_F.0.to_string(), N6_F.1.to_string());
    c.check(
        out.status.success() && got == (Some(want.0.as_str()), Some(want.1.as_str())),
        format!("n=6 stats-only {got:?}"),
    );
    c.check(
        took < N6_STATS_LIMIT,
        format!("n=6 stats-only {:.3}s < 1s", took.as_secs_f64()),
    );
    c.finish();
}

#[test]
fn criterion_2_prime_sizes() {
    let mut c = Checks::new("2 (F' sizes within variant delta)");
    let f = build_f_prime(5, true).unwrap();
    let ours = (f.num_vars() as u128, f.num_clauses() as u128);
    c.check(
        ours == N5_FPRIME_OURS,
        format!("build_f_prime(5) = {ours:?}"),
    );
    let predicted = predict_sizes(5, Variant::FPrime, Symmetry::Full).unwrap();
    c.check(
        (predicted.num_vars(), predicted.num_clauses()) == N5_FPRIME_OURS,
        "closed form agrees",
    );
    let dv = ours.0.abs_diff(N5_FPRIME_PUBLISHED.0);
    let dc = ours.1.abs_diff(N5_FPRIME_PUBLISHED.1);
    c.check(
        dv <= FPRIME_MAX_DELTA && dc <= FPRIME_MAX_DELTA,
        format!(
            "published {N5_FPRIME_PUBLISHED:?}, delta vars {dv} clauses {dc} (unspecified at-most-one layout)"
        ),
    );
    let text = stdout(&c3dsm([
        "encode",
        "--n",
        "5",
        "--variant",
        "Fprime",
        "--stats-only",
    ]));
    c.check(
        value(&text, "delta_vars") == Some("1") && value(&text, "delta_clauses") == Some("1"),
        "CLI report records the delta",
    );
    c.finish();
}

#[test]
fn criterion_3_n3_unsat() {
    let mut c = Checks::new("3 (embedded solver, n=3 UNSAT)");
    let f = build_f(3, true).unwrap();
    let start = Instant::now();
    let r = solve(&f, &[], &SolverConfig::default()).unwrap();
    let took = start.elapsed();
    c.check(
        r.verdict == Verdict::Unsat,
        format!("verdict {}", r.verdict),
    );
    c.check(
        took < N3_SOLVE_LIMIT,
        format!("{:.4}s < 60s", took.as_secs_f64()),
    );
    c.finish();
}

#[test]
fn criterion_4_n4_unsat() {
    let mut c = Checks::new("4 (n=4 UNSAT, external and embedded)");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f4.cnf");
    let p = path.to_str().unwrap();
    c.check(
        c3dsm(["encode", "--n", "4", "--output", p])
            .status
            .success(),
        "encoded n=4",
    );

    match common::external_solver() {
        Some(template) => {
            let start = Instant::now();
            let out = c3dsm([
                "solve",
                p,
                "--engine",
                "external",
                "--solver-cmd",
                &template,
                "--timeout",
                "600",
            ]);
            let took = start.elapsed();
            c.check(
                out.status.code() == Some(0)
                    && value(&stdout(&out), "verdict") == Some("UNSATISFIABLE"),
                format!("external `{template}` UNSAT in {:.2}s", took.as_secs_f64()),
            );
        }
        None => c.check(false, "no external solver available (set C3DSM_SOLVER_CMD)"),
    }

    let start = Instant::now();
    let limit = N4_INTERNAL_LIMIT_S.to_string();
    let out = c3dsm(["solve", p, "--engine", "internal", "--timeout", &limit]);
    let took = start.elapsed();
    c.check(
        out.status.code() == Some(0),
        format!(
            "embedded UNSAT in {:.2}s (limit {N4_INTERNAL_LIMIT_S}s)",
            took.as_secs_f64()
        ),
    );
    c.finish();
}

#[test]
fn criterion_5_exhaustive_n3() {
    let mut c = Checks::new("5 (exhaustive n=3 sweep)");
    let report = verify_exhaustive(3, 1).unwrap();
    c.check(
        report.instances_checked == N3_CANONICAL,
        format!("{} instances", report.instances_checked),
    );
    c.check(
        report.counterexamples.is_empty(),
        format!("{} counterexamples", report.counterexamples.len()),
    );
    let min = report.min_stable.unwrap_or(0);
    c.check(min >= 2, format!("min stable {min}"));
    c.check(report.passed(), "report passes");
    c.check(
        report.elapsed < N3_SWEEP_LIMIT,
        format!(
            "{:.2}s single-threaded < 300s",
            report.elapsed.as_secs_f64()
        ),
    );
    c.finish();
}

#[test]
fn criterion_6_oracle_equivalence() {
    let mut c = Checks::new("6 (oracle equivalence and mutation sensitivity)");
    for n in [3, 4] {
        let cfg = OracleConfig::new(n, ORACLE_TRIALS, 2024);
        let r = oracle_equivalence(&cfg).unwrap();
        c.check(
            r.passed()
                && r.instances_checked == ORACLE_TRIALS
                && r.get_extra("disagreements") == Some("0"),
            format!(
                "n={n}: {} trials, solver path {}, {} counterexamples, min stable {:?}",
                r.instances_checked,
                cfg.use_solver,
                r.counterexamples.len(),
                r.min_stable
            ),
        );
    }
    for n in [3, 4] {
        let mut cfg = OracleConfig::new(n, ORACLE_TRIALS, 2024);
        cfg.encode = cfg.encode.with_z_typo();
        let r = oracle_equivalence(&cfg).unwrap();
        let disagreements: u64 = r.get_extra("disagreements").unwrap().parse().unwrap();
        c.check(
            disagreements >= 1,
            format!("z-typo mutant n={n}: {disagreements} disagreements"),
        );
    }
    c.finish();
}

fn random_formula(rng: &mut ChaCha8Rng, max_vars: u32) -> CnfFormula {
    let vars = rng.random_range(1..=max_vars);
    let mut f = CnfFormula::new(vars);
    for _ in 0..rng.random_range(1..=(5 * vars as usize).max(2)) {
        let width = rng.random_range(1..=3usize.min(vars as usize));
        f.add_clause(
            (0..width)
                .map(|_| Lit::new(rng.random_range(1..=vars), rng.random_bool(0.5)))
                .collect(),
        );
    }
    f
}

fn truth_table_sat(f: &CnfFormula) -> bool {
    let masks: Vec<(u32, u32)> = f
        .clauses()
        .iter()
        .map(|c| {
            c.iter().fold((0, 0), |(p, q), l| {
                let bit = 1u32 << (l.var() - 1);
                if l.is_positive() {
                    (p | bit, q)
                } else {
                    (p, q | bit)
                }
            })
        })
        .collect();
    (0u32..1 << f.num_vars()).any(|a| masks.iter().all(|&(p, q)| a & p != 0 || !a & q != 0))
}

#[test]
fn criterion_7_property_suites() {
    let mut c = Checks::new("7 (property suites)");

    // decoded instances are total orders and round-trip
    let mut ok = true;
    for n in [3, 4] {
        let vm = VarMap::new(n, Variant::F).unwrap();
        for seed in 0..500 {
            let inst = random_instance(n, seed);
            let mut model = vec![false; vm.num_vars() as usize];
            for l in instance_assumptions(&vm, &inst) {
                model[l.var() as usize - 1] = l.is_positive();
            }
            ok &= decode_model(&vm, &model).is_ok_and(|d| d == inst);
        }
        // a 3-cycle a1: b1 > b2 > b3 > b1 must be rejected
        let mut model = vec![false; vm.num_vars() as usize];
        for (q, r, v) in [(0, 1, true), (1, 2, true), (0, 2, false)] {
            let l = vm.x(Group::A, 0, q, r);
            model[l.var() as usize - 1] = l.is_positive() == v;
        }
        ok &= decode_model(&vm, &model).is_err();
    }
    c.check(ok, "decode round-trip and cycle rejection at n=3,4");

    // candidate set size against a direct scan
    let mut ok = true;
    for n in 2..=4usize {
        for m in enumerate_matchings(n) {
            let scan = (0..n)
                .flat_map(|a| (0..n).flat_map(move |b| (0..n).map(move |c| (a, b, c))))
                .filter(|&(a, b, c)| {
                    b != m.partner(Group::A, a)
                        && c != m.partner(Group::B, b)
                        && a != m.partner(Group::C, c)
                })
                .count();
            let got = candidate_triples(&m).len();
            ok &= got == scan && got == n * (n - 1) * (n - 2);
        }
    }
    c.check(ok, "|B(M)| = n(n-1)(n-2) for all matchings, n<=4");

    // at-most-one semantics
    let mut ok = true;
    for m in 1..=6usize {
        let ys: Vec<Lit> = (1..=m as u32).map(Lit::positive).collect();
        let mut clauses: Vec<Vec<Lit>> = Vec::new();
        let regs = encode_amo_sequential(&ys, m as u32 + 1, &mut clauses).unwrap() as usize;
        for y in 0u32..1 << m {
            let extendable = (0u32..1 << regs).any(|s| {
                let model: Vec<bool> = (0..m)
                    .map(|i| y >> i & 1 == 1)
                    .chain((0..regs).map(|i| s >> i & 1 == 1))
                    .collect();
                clauses.iter().all(|cl| cl.iter().any(|l| l.eval(&model)))
            });
            ok &= extendable == (y.count_ones() <= 1);
        }
    }
    c.check(ok, "AMO truth tables m<=6");

    for n in [3, 4] {
        let r = remark1_check(n, REMARK1_TRIALS, 7, common_jobs()).unwrap();
        c.check(
            r.passed() && r.instances_checked == REMARK1_TRIALS,
            format!(
                "mutual top triple n={n}: {} instances, {} with triple, {} violations",
                r.instances_checked,
                r.get_extra("with_mutual_top_triple").unwrap_or("?"),
                r.counterexamples.len()
            ),
        );
    }

    let f3 = build(&EncodeOptions::new(3, Variant::F, Symmetry::Full))
        .unwrap()
        .0;
    let mut first = Vec::new();
    write_dimacs(&f3, &mut first).unwrap();
    let mut second = Vec::new();
    write_dimacs(&build_f(3, true).unwrap(), &mut second).unwrap();
    let digest: String = Sha256::digest(&first)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    let reread = read_dimacs(&first[..]).unwrap();
    c.check(
        first == second && digest == GOLDEN_F3_SHA256 && reread == f3,
        format!(
            "n=3 DIMACS deterministic, sha256 {}.., round-trips",
            &digest[..12]
        ),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut agree = 0;
    let mut sat = 0;
    for _ in 0..TRUTH_TABLE_CASES {
        let f = random_formula(&mut rng, TRUTH_TABLE_MAX_VARS);
        let expected = truth_table_sat(&f);
        let r = solve(&f, &[], &SolverConfig::default()).unwrap();
        let model_ok = r
            .model
            .as_ref()
            .is_none_or(|m| verify_model(&f, m).unwrap());
        agree += ((r.verdict == Verdict::Sat) == expected
            && r.verdict != Verdict::Unknown
            && model_ok) as usize;
        sat += expected as usize;
    }
    c.check(
        agree == TRUTH_TABLE_CASES,
        format!("solver vs truth table {agree}/{TRUTH_TABLE_CASES} ({sat} SAT)"),
    );
    c.finish();
}

fn common_jobs() -> usize {
    c3dsm_harness::pool::default_jobs()
}
