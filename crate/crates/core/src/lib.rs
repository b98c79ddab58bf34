//! Exact solver for truth-leaning equilibria of verifiable-disclosure games
//! over finite preordered evidence spaces.
//!
//! The core pipeline is `solve_partition` → `value_function` →
//! `construct_strategy` → `verify_equilibrium`, all in exact rational
//! arithmetic. `weak_phi_solve` covers weakly increasing response functions
//! and certifies nonexistence of truth-leaning equilibria. The
//! `leftcensored` module provides the closed forms for signal-sequence
//! evidence with suffix disclosure, and `oracle` supplies brute-force ground
//! truth for cross-validation.

pub mod equilibrium;
pub mod families;
pub mod flow;
pub mod game;
pub mod gamefile;
pub mod leftcensored;
pub mod lowerset;
pub mod oracle;
pub mod poset;
pub mod rat;

pub use equilibrium::{
    construct_strategy, construct_strategy_with, solve_partition, value_function,
    verify_equilibrium, verify_ordered_partition, verify_value_function, weak_phi_solve,
    Equilibrium, OrderedPartition, PivotOrder, SolveError, ValueFunction, WeakOutcome,
};
pub use game::{GameError, GameSpec, ResponseFunction, ResponseKind};
pub use gamefile::{FileError, GameFile, PhiFile};
pub use lowerset::{brute_force_min, closure_min, min_nu_lower_sets, MinimizerResult, OptError};
pub use oracle::{
    enumerate_lower_sets, oracle_partition, random_game, OracleBudget, OracleError,
    RandomGameConfig,
};
pub use poset::{build_space, EvidenceSpace, SpaceError};
pub use rat::{format_rational, parse_rational, rational, Rational};
