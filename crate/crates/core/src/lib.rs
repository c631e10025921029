//! Linear precoder design for physical-layer multicast.
//!
//! Two design criteria are covered, each over two codebooks:
//!
//! * max-min instantaneous rate over the continuous codebook
//!   ([`caa`], cyclic alternating ascent with an SOCP precoder step) and over
//!   the concatenated discrete codebook ([`discrete`], saturation bisection
//!   around a greedy submodular cover);
//! * weighted sum delay over the continuous codebook ([`delay_cont`]) and the
//!   discrete codebook ([`delay_disc`], a multiplicative-weights knapsack
//!   greedy inside an interval-by-interval cover loop).
//!
//! [`conic`] holds the convex solvers these rely on and the upper bounds used
//! to benchmark them; [`bench`] reproduces the reference experiments.

pub mod error;
pub mod bench;
pub mod caa;
pub mod cli;
pub mod conic;
pub mod delay_cont;
pub mod delay_disc;
pub mod discrete;
pub mod linalg;
pub mod model;

pub use error::{Error, Result};
