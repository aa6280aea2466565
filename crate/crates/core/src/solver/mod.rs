//! Satisfiability back ends: an embedded CDCL solver and an adapter for
//! external solvers that follow the SAT competition output conventions.

mod cdcl;
mod external;

use std::fmt;
use std::time::Duration;

use thiserror::Error;

use crate::cnf::{CnfError, CnfFormula, Lit};

pub use external::{parse_solver_output, solve_external, SolverOutput};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("assumptions contain both {0} and its negation")]
    InconsistentAssumptions(Lit),
    #[error("assumption {lit} mentions a variable beyond the formula's {num_vars}")]
    AssumptionOutOfRange { lit: Lit, num_vars: u32 },
    #[error("model assigns {got} variables, formula has {expected}")]
    PartialModel { expected: usize, got: usize },
    #[error("solver command template is empty")]
    EmptyCommand,
    #[error("failed to run `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unparseable solver output: {0}")]
    Output(String),
    #[error("solver reported SAT but its model is invalid: {0}")]
    BadModel(String),
    #[error(transparent)]
    Cnf(#[from] CnfError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Sat,
    Unsat,
    Unknown,
}

impl Verdict {
    /// SAT-competition style exit status.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Unsat => 0,
            Verdict::Sat => 10,
            Verdict::Unknown => 20,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Sat => "SATISFIABLE",
            Verdict::Unsat => "UNSATISFIABLE",
            Verdict::Unknown => "UNKNOWN",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub decisions: u64,
    pub conflicts: u64,
    pub propagations: u64,
    pub restarts: u64,
    pub learnt: u64,
    pub elapsed: Duration,
}

impl fmt::Display for SolveStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "decisions: {}\nconflicts: {}\npropagations: {}\nrestarts: {}\nlearnt: {}\nelapsed_s: {:.3}",
            self.decisions,
            self.conflicts,
            self.propagations,
            self.restarts,
            self.learnt,
            self.elapsed.as_secs_f64()
        )
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub verdict: Verdict,
    /// Present iff the verdict is SAT; `model[v - 1]` is the value of `v`.
    pub model: Option<Vec<bool>>,
    pub stats: SolveStats,
    /// Captured process output for external runs.
    pub output: Option<String>,
}

impl SolveResult {
    pub fn is_sat(&self) -> bool {
        self.verdict == Verdict::Sat
    }

    pub fn is_unsat(&self) -> bool {
        self.verdict == Verdict::Unsat
    }
}

/// Limits after which the embedded solver gives up with `Unknown`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Budget {
    pub max_conflicts: Option<u64>,
    pub time_limit: Option<Duration>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Budget::default()
    }

    pub fn conflicts(max: u64) -> Self {
        Budget {
            max_conflicts: Some(max),
            time_limit: None,
        }
    }

    pub fn time(limit: Duration) -> Self {
        Budget {
            max_conflicts: None,
            time_limit: Some(limit),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverConfig {
    pub budget: Budget,
    /// Seeds the initial variable activities; runs are reproducible per seed.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            budget: Budget::unlimited(),
            seed: 0,
        }
    }
}

/// Decides `formula` under `assumptions` with the embedded CDCL solver.
///
/// An empty clause makes the formula UNSAT outright. SAT answers carry a
/// model that has passed [`verify_model`].
pub fn solve(
    formula: &CnfFormula,
    assumptions: &[Lit],
    config: &SolverConfig,
) -> Result<SolveResult, SolverError> {
    for &a in assumptions {
        if a.var() > formula.num_vars() {
            return Err(SolverError::AssumptionOutOfRange {
                lit: a,
                num_vars: formula.num_vars(),
            });
        }
        if assumptions.contains(&!a) {
            return Err(SolverError::InconsistentAssumptions(a));
        }
    }
    let result = cdcl::Cdcl::new(formula, config).solve(assumptions, &config.budget);
    if let Some(model) = &result.model {
        assert!(
            verify_model(formula, model)?,
            "embedded solver produced a model that fails verification"
        );
    }
    Ok(result)
}

/// Whether every clause has a literal true under `model`.
pub fn verify_model(formula: &CnfFormula, model: &[bool]) -> Result<bool, SolverError> {
    if model.len() != formula.num_vars() as usize {
        return Err(SolverError::PartialModel {
            expected: formula.num_vars() as usize,
            got: model.len(),
        });
    }
    Ok(formula.clauses().iter().all(|clause| {
        clause
            .iter()
            .any(|&l| model[l.var() as usize - 1] == l.is_positive())
    }))
}
