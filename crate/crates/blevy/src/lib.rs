//! Simulation and verification toolkit for supercritical branching Lévy
//! processes.
//!
//! A single particle starts at the origin, moves according to a Lévy motion
//! (drift, Brownian component, compound Poisson jumps), lives an
//! `Exponential(lambda)` lifetime, and at death is replaced in place by a
//! random number of offspring, each displaced from the death position by a
//! random jump. Every descendant behaves the same way, independently.
//!
//! The crate has two halves that deliberately never share formulas:
//!
//! * an event-driven Monte Carlo simulator ([`sim`]) driven by a per-replicate
//!   deterministic random stream, and
//! * exact moment oracles ([`oracle`]) for the population size, the centered
//!   position sum `sum_v (X_v(t) - r t)`, and the associated martingale,
//!   cross-checked by an independent numerical ODE integration.
//!
//! [`stats`] compares the two halves replicate-by-replicate and renders
//! z-scored verdict tables. [`cli`] exposes the same workflows as the `blevy`
//! binary.
//!
//! # Runnable examples
//!
//! Each major capability has a standalone example under `examples/`:
//!
//! ```text
//! cargo run --release --example derived_constants
//! cargo run --release --example population_growth
//! cargo run --release --example centered_sum_moments
//! cargo run --release --example martingale_orthogonality
//! cargo run --release --example second_moment_adjudication
//! cargo run --release --example survival_conditioning
//! cargo run --release --example mean_position_convergence
//! ```
//!
//! The thin `blevy` binary wraps the same library calls behind subcommands
//! (`constants`, `verify`, `converge`, `presets`, `simulate`).

pub mod cli;
pub mod config;
pub mod kahan;
pub mod levy;
pub mod model;
pub mod oracle;
pub mod presets;
pub mod sim;
pub mod stats;
pub mod tolerances;
