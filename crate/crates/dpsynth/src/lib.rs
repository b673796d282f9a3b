//! Boolean realizability and synthesis for forall-exists CNF specifications.
//!
//! Given a CNF formula over inputs X and outputs Y, interpreted as
//! `forall X exists Y. F(X, Y)`, this crate decides whether output functions
//! exist for every input (fully realizable), for some inputs (partially
//! realizable), or for none (nullary), and in the realizable cases produces
//! witness functions `W_y : 2^X -> 2` as BDDs.
//!
//! The engine evaluates the clauses bottom-up along a graded project-join
//! tree, quantifying each variable at the tree node labeled with it, then
//! replays the Y-graded part of the tree top-down to extract witnesses.
//! A factored-baseline engine and a brute-force oracle are included for
//! cross-checking.

pub mod bdd;
pub mod cnf;
pub mod gen;
pub mod planner;
pub mod realizability;
pub mod synthesis;
pub mod verify;
