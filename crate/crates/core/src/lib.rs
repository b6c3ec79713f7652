//! Pairwise-stable outcomes for two-sided buyer-seller markets with
//! discrete money.
//!
//! Sellers and buyers trade one indivisible good per agent at integer
//! prices bounded per pair. Preferences are strictly increasing valuation
//! functions of the transfer. [`solver::run`] computes a matching, price
//! vector, and payoffs that no individual walks away from and no
//! seller-buyer pair can improve on at any feasible integer price;
//! [`verifier::verify`] proves that claim for any outcome by exhaustive
//! search, and [`verifier::audit_trace`] replays a run against the loop
//! invariants it relies on.

pub mod generator;
pub mod io;
pub mod market;
pub mod matching;
pub mod solver;
pub mod valuation;
pub mod value;
pub mod verifier;

pub use generator::{generate, FamilyWeights, GeneratorConfig, GeneratorError};
pub use market::{
    Decrement, MarketError, MarketInstance, PairData, PriceVector, ValidationReport,
};
pub use matching::{
    enumerate_matchings, solve_constrained_matching, Matching, MatchingError,
    WeightedBipartiteGraph, WeightedEdge,
};
pub use solver::{
    initialize, iteration_bound, payoffs, price_update_step, run, IterationState, IterationTrace,
    MatchedPair, Outcome, SolverError,
};
pub use valuation::Valuation;
pub use value::{Value, DEFAULT_EPS};
pub use verifier::{
    audit_trace, enumerate_stable_outcomes, verify, AuditReport, AuditViolation, StabilityReport,
    VerifierError, Witness,
};
