//! Verification toolkit for three-dimensional stable matching with cyclic
//! preferences.
//!
//! * [`model`]: instances, matchings, blocking triples and brute-force
//!   stability checks.
//! * [`cnf`]: CNF formulas asserting that some instance has no stable
//!   matching (or at most one), with symmetry breaking, DIMACS I/O and
//!   model decoding.
//! * [`solver`]: an embedded CDCL solver and an external-solver adapter.

pub mod cnf;
pub mod model;
pub mod perm;
pub mod solver;

pub use cnf::{CnfError, CnfFormula, EncodeOptions, FormulaStats, Lit, Symmetry, VarMap, Variant};
pub use model::{Group, Instance, Matching, ModelError, Triple};
pub use solver::{Budget, SolveResult, SolverConfig, SolverError, Verdict};
