use std::collections::BTreeMap;
use std::time::Instant;

use anyhow::{bail, ensure, Result};
use c3dsm_core::cnf::{build, greedy_completion, instance_assumptions, unblocked_matchings};
use c3dsm_core::model::{
    canonical_instances, enumerate_matchings, is_stable, mutual_top_triple, random_instance,
    reduce_by_triple, stable_matchings,
};
use c3dsm_core::solver::solve;
use c3dsm_core::{EncodeOptions, SolverConfig, Symmetry, Variant, Verdict};

use crate::pool::{default_jobs, parallel_map};
use crate::report::CampaignReport;

/// Seed of the `i`-th random instance of a campaign.
fn trial_seed(seed: u64, i: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i)
}

/// Brute-force sweep over every canonical instance of size 3, requiring at
/// least two stable matchings per instance.
pub fn verify_exhaustive(n: usize, jobs: usize) -> Result<CampaignReport> {
    ensure!(
        n == 3,
        "exhaustive verification is only available for n = 3 (got {n})"
    );
    let start = Instant::now();
    let space = canonical_instances(n)?;
    let counts = parallel_map(space.len(), jobs, |i| {
        stable_matchings(&space.instance_at(i))
            .expect("n = 3 is within the brute-force limit")
            .len()
    });

    let mut report = CampaignReport::new("verify-exhaustive", n);
    report.config("jobs", jobs);
    report.expected_instances = Some(space.len());
    report.instances_checked = counts.len() as u64;
    let mut histogram = BTreeMap::new();
    let (mut none, mut single) = (0u64, 0u64);
    for (i, &count) in counts.iter().enumerate() {
        *histogram.entry(count).or_insert(0u64) += 1;
        match count {
            0 => none += 1,
            1 => single += 1,
            _ => continue,
        }
        report.counterexamples.push(format!(
            "canonical index {i}: {count} stable matchings\n{}",
            space.instance_at(i as u64)
        ));
    }
    report.set_stable_counts(counts.iter().copied());
    report.extra("without_stable", none);
    report.extra("with_one_stable", single);
    let hist: Vec<String> = histogram.iter().map(|(k, v)| format!("{k}={v}")).collect();
    report.extra("stable_histogram", hist.join(" "));
    report.elapsed = start.elapsed();
    Ok(report)
}

/// Settings of the oracle-equivalence campaign.
#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub trials: u64,
    pub seed: u64,
    pub jobs: usize,
    /// Also solve the formula under the instance's x-assignment.
    pub use_solver: bool,
    pub encode: EncodeOptions,
}

impl OracleConfig {
    /// Formula F without symmetry units; the embedded solver joins at n = 3.
    pub fn new(n: usize, trials: u64, seed: u64) -> Self {
        OracleConfig {
            trials,
            seed,
            jobs: default_jobs(),
            use_solver: n == 3,
            encode: EncodeOptions::new(n, Variant::F, Symmetry::Off),
        }
    }
}

struct OracleTrial {
    stable: usize,
    cnf_says_none: bool,
    /// Matchings whose stability the formula and brute force disagree on.
    mismatched: Vec<usize>,
    solver: Option<Verdict>,
}

/// Cross-checks brute force, the solver-free evaluation of F and (optionally)
/// the embedded solver on seeded random instances.
///
/// Besides the overall verdict, every matching's stability is compared with
/// the formula's view of it (no z variable true under the greedy completion).
pub fn oracle_equivalence(cfg: &OracleConfig) -> Result<CampaignReport> {
    let n = cfg.encode.n;
    ensure!(
        (3..=4).contains(&n),
        "oracle equivalence needs n in 3..=4 (got {n})"
    );
    ensure!(cfg.trials >= 1, "at least one trial is required");
    if cfg.encode.variant != Variant::F || cfg.encode.symmetry != Symmetry::Off {
        bail!("oracle equivalence needs formula F without symmetry units");
    }
    let start = Instant::now();
    let (formula, vm) = build(&cfg.encode)?;
    let results = parallel_map(cfg.trials, cfg.jobs, |i| {
        let inst = random_instance(n, trial_seed(cfg.seed, i));
        let brute: Vec<usize> = enumerate_matchings(n)
            .enumerate()
            .filter(|(_, m)| is_stable(&inst, m))
            .map(|(i, _)| i)
            .collect();
        let model = greedy_completion(&formula, &vm, &inst);
        let cnf_says_none = formula
            .clauses()
            .iter()
            .all(|c| c.iter().any(|l| l.eval(&model)));
        let by_formula = unblocked_matchings(&vm, &model);
        let mismatched = (0..vm.num_matchings() as usize)
            .filter(|i| brute.binary_search(i).is_ok() != by_formula.binary_search(i).is_ok())
            .collect();
        let solver = cfg.use_solver.then(|| {
            solve(
                &formula,
                &instance_assumptions(&vm, &inst),
                &SolverConfig::default(),
            )
            .expect("assumptions cover distinct x variables")
            .verdict
        });
        OracleTrial {
            stable: brute.len(),
            cnf_says_none,
            mismatched,
            solver,
        }
    });

    let mut report = CampaignReport::new("oracle-equivalence", n);
    report.config("trials", cfg.trials);
    report.config("seed", cfg.seed);
    report.config("jobs", cfg.jobs);
    report.config("solver_path", cfg.use_solver);
    report.config("formula", cfg.encode.comment());
    if cfg.encode.is_mutated() {
        report.config("mutation", "z-typo");
    }
    report.instances_checked = results.len() as u64;
    let (mut disagreements, mut none, mut single) = (0u64, 0u64, 0u64);
    let mismatched: usize = results.iter().map(|t| t.mismatched.len()).sum();
    for (i, t) in results.iter().enumerate() {
        let brute_none = t.stable == 0;
        let solver_none = t.solver.map(|v| v == Verdict::Sat);
        let agree = t.cnf_says_none == brute_none
            && solver_none.is_none_or(|s| s == brute_none)
            && t.mismatched.is_empty();
        none += brute_none as u64;
        single += (t.stable == 1) as u64;
        if agree && !brute_none {
            continue;
        }
        disagreements += !agree as u64;
        let solver = t.solver.map_or("skipped".to_string(), |v| v.to_string());
        report.counterexamples.push(format!(
            "trial {i} (seed {}): stable matchings {}, cnf evaluation {}, solver {solver}, \
             matchings classified differently {}\n{}",
            trial_seed(cfg.seed, i as u64),
            t.stable,
            if t.cnf_says_none {
                "SATISFIABLE"
            } else {
                "UNSATISFIABLE"
            },
            t.mismatched.len(),
            random_instance(n, trial_seed(cfg.seed, i as u64)),
        ));
    }
    report.set_stable_counts(results.iter().map(|t| t.stable));
    report.extra("disagreements", disagreements);
    report.extra("matchings_misclassified", mismatched);
    report.extra("without_stable", none);
    // fewer than two stable matchings is observational here, not a failure
    report.extra("with_one_stable", single);
    report.elapsed = start.elapsed();
    Ok(report)
}

enum Remark1Trial {
    NoTriple,
    Checked {
        extensions: usize,
        violations: Vec<String>,
    },
}

/// For random instances with a mutual top triple, checks that every stable
/// matching of the reduced instance extends to a stable matching.
pub fn remark1_check(n: usize, trials: u64, seed: u64, jobs: usize) -> Result<CampaignReport> {
    ensure!(
        (3..=5).contains(&n),
        "remark1 check needs n in 3..=5 (got {n})"
    );
    let start = Instant::now();
    let results = parallel_map(trials, jobs, |i| {
        let inst = random_instance(n, trial_seed(seed, i));
        let Some(t) = mutual_top_triple(&inst) else {
            return Remark1Trial::NoTriple;
        };
        let reduced = reduce_by_triple(&inst, t).expect("mutual top triple");
        let stable =
            stable_matchings(&reduced).expect("reduced size is within the brute-force limit");
        let mut violations = Vec::new();
        if stable.is_empty() {
            violations.push(format!(
                "trial {i}: reduced instance has no stable matching\n{inst}"
            ));
        }
        for m in &stable {
            let ext = m.extend_with(t);
            if !is_stable(&inst, &ext) {
                violations.push(format!(
                    "trial {i}: extension {ext} of {m} by {t} is not stable\n{inst}"
                ));
            }
        }
        Remark1Trial::Checked {
            extensions: stable.len(),
            violations,
        }
    });

    let mut report = CampaignReport::new("remark1-check", n);
    report.config("trials", trials);
    report.config("seed", seed);
    report.config("jobs", jobs);
    report.instances_checked = results.len() as u64;
    let (mut with_triple, mut extensions) = (0u64, 0u64);
    for r in results {
        if let Remark1Trial::Checked {
            extensions: e,
            violations,
        } = r
        {
            with_triple += 1;
            extensions += e as u64;
            report.counterexamples.extend(violations);
        }
    }
    report.extra("with_mutual_top_triple", with_triple);
    report.extra("skipped_without_triple", trials - with_triple);
    report.extra(
        "fraction_with_triple",
        format!("{:.4}", with_triple as f64 / trials.max(1) as f64),
    );
    report.extra("extensions_checked", extensions);
    report.elapsed = start.elapsed();
    Ok(report)
}
