//! Risk-aware distributional value iteration.
//!
//! This crate implements the full stack for learning return *distributions*
//! (rather than expected returns) over a cost signal, constraining a tail-risk
//! statistic of that distribution while doing so:
//!
//! * [`risk`] — quantile grids, the asymmetric Huber quantile loss, kernel
//!   density estimation over cost samples, and the expectation / value-at-risk /
//!   conditional-value-at-risk statistics read off the density, plus the hinge
//!   penalty that turns a CVaR budget into a loss term.
//! * [`net`] — a small fully connected quantile network (two ReLU hidden
//!   layers, one output row of quantiles per action) with hand-derived
//!   backpropagation, SGD/Adam optimizers, Polyak target updates, and a
//!   self-describing binary checkpoint format.
//! * [`env`] — a differential-drive reach-avoid arena: goal seeking with
//!   stochastic hazard and collision costs, a 48-beam coarse lidar, and
//!   deterministic per-seed episode generation.
//! * [`replay`] — a fixed-capacity ring buffer of transitions with uniform
//!   with-replacement sampling.
//! * [`agent`] — the training loop tying the above together: epsilon-greedy
//!   exploration, distributional Bellman targets from a target network, the
//!   composite (quantile + risk-penalty) loss in four variants, and greedy
//!   policy evaluation across seeds.
//! * [`tabular`] — finite-support distributions over enumerable state spaces,
//!   exact 1-Wasserstein distances, exact CVaR, and the risk-sensitive
//!   distributional Bellman operator, with Monte Carlo contraction and
//!   nonexpansiveness campaigns used to sanity-check the theory numerically.
//! * [`demo`] — a truncated heavy-tailed distribution with closed-form CVaR,
//!   used to measure how the density-based CVaR estimator converges with
//!   sample count.
//!
//! Campaign-style entry points (many independent trials, seeds, or sweep
//! cells) run data-parallel under the `parallel` feature (on by default) and
//! fall back to sequential loops without it; `*_seq` variants of the parallel
//! entry points are always exported so the two schedules can be compared
//! directly. Results are collected in index order, so output does not depend
//! on the schedule.
//!
//! All stochastic components draw from counter-seeded ChaCha streams; every
//! public entry point is deterministic given its seed arguments.

pub mod agent;
pub mod demo;
pub mod env;
mod error;
pub mod exec;
pub mod net;
pub mod replay;
pub mod risk;
pub mod seeds;
pub mod tabular;

pub use error::{Error, Result};
