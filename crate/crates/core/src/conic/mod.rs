//! Convex subproblems: a second-order cone solver, the max-min and delay
//! precoder updates built on it, and the log-det upper bounds.

pub mod bounds;
pub mod delay;
pub mod maxmin;
pub mod socp;

pub use bounds::{solve_covariance_bound, solve_fractional_bound, BoundReport, CovarianceBound, FractionalBound};
pub use delay::{solve_delay_socp, DelaySlot, DelaySocp, DelaySolution};
pub use maxmin::{solve_maxmin_socp, MaxMinSocp, MaxMinSolution, UserBlock};
pub use socp::{ConeBlock, Socp, SocpSettings, SocpSolution, SolverReport, SolverStatus};
