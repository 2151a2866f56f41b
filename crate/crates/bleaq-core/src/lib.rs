//! Bilevel evolutionary optimization with quadratic lower-level approximations.
//!
//! A bilevel program nests one optimization problem inside another: an upper
//! (leader) objective `F(x_u, x_l)` is minimized over `x_u` subject to the
//! constraint that `x_l` is itself optimal for a lower (follower) objective
//! `f(x_u, x_l)`. The expensive part of any nested solver is the inner
//! optimization that must run for every upper-level candidate.
//!
//! This crate implements BLEAQ — a bilevel evolutionary algorithm based on
//! quadratic approximations — which learns the mapping `x_u -> x_l*` (the
//! lower-level reaction, ψ) from the lower-level optima it has already paid
//! for, and substitutes model predictions for full inner optimizations once
//! the fit is trustworthy. A plain nested evolutionary baseline with the same
//! upper-level machinery is included so the savings attributable to the
//! approximation can be measured, along with the SMD1–SMD6 and TP1–TP10
//! benchmark problems and an analytically known single-variable example.
//!
//! The crate is `no_std`-compatible (requires `alloc`); disable the default
//! `std` feature for embedded or wasm use. File I/O, the CLI, and report
//! aggregation live in the companion `bleaq-bench` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![warn(missing_docs)]

extern crate alloc;

pub mod bleaq;
pub mod evo;
pub mod linalg;
pub mod lower;
pub mod nested;
pub mod problem;
pub mod psi;
pub mod qp;
pub mod regression;
pub mod testbed;

pub use bleaq::{run_bleaq, BleaqConfig, GenerationTrace, RunReport};
pub use lower::{solve_lower, LowerSolveResult, LowerSolverParams, SolveMethod};
pub use nested::run_nested;
pub use problem::{BilevelProblem, Bounds, EvalCounters, Individual, KnownOptimum, Tag};
pub use psi::PsiModel;
pub use testbed::{
    instantiate, make_ex1, make_smd, make_tp, problem_ids, verify_oracle, CatalogError,
    ExactOracle, Instance, OracleCheck, OracleError, OracleSummary, SmdDims,
};
