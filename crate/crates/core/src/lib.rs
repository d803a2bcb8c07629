//! Equilibria of the linear Fisher market game, where buyers report
//! utilities strategically.
//!
//! * [`market`] and [`equilibrium`]: the market model, prices and tight-edge graphs.
//! * [`allocation`]: the polytope of equilibrium allocations and payoff queries.
//! * [`deviation`]: conflict removal, necessary NE conditions and a best-response search.
//! * [`two_buyer`]: the complete two-buyer theory (polyhedra, payoff curve, price ranges).
//! * [`io`] and [`cli`]: JSON/CSV interfaces and the `fmgame` command line.

pub mod allocation;
pub mod cli;
pub mod deviation;
pub mod equilibrium;
pub mod error;
pub mod graph;
pub mod io;
pub mod lp;
pub mod market;
pub mod parallel;
pub mod reproduce;
pub mod scalar;
pub mod tolerances;
pub mod two_buyer;

pub use allocation::{MoneyFlowAllocation, PayoffReport};
pub use equilibrium::{solve_equilibrium, EquilibriumOutcome};
pub use error::{Error, Result};
pub use market::{Market, StrategyProfile};
pub use tolerances::Tolerances;
