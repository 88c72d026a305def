//! POMDP planning through multiplicity automata.
//!
//! A POMDP is turned into a multiplicity automaton whose Hankel rank `r` can
//! be far below the number of hidden states. The planner finds `r` basis
//! states and `r` core tests, improves the basis to a 2-barycentric spanner,
//! and discretizes beliefs through their bounded coefficient vectors, so grid
//! size depends on `r` instead of the number of states. A belief-simplex grid
//! baseline and an exact finite-horizon oracle are included for comparison.

pub mod automaton;
pub mod baseline;
pub mod cli;
pub mod corpus;
pub mod linalg;
pub mod pomdp;
pub mod decomposition;
pub mod mdp;
pub mod modified_mdp;
pub mod oracle;

/// Version stamped into every JSON artifact.
pub const SCHEMA_VERSION: u32 = 1;
