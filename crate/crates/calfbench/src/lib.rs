//! Safe reinforcement learning benchmark on a simulated differential-drive
//! robot.
//!
//! The robot must reach a goal disk around the origin while a Gaussian
//! high-cost spot (with a speed-limit zone) sits in the way. The crate
//! provides:
//!
//! - [`scenario`]: the optimal-control problem (cost field, goal set,
//!   actuator bounds, episode protocol) with two named presets;
//! - [`env`]: the discrete-time simulation (Euler/RK4 kinematics,
//!   saturation, zone speed cap, episode logs);
//! - [`nominal`]: the polar-coordinate exponential stabilizer baseline;
//! - [`critic`]: affine critics, sandwich bounds, the TD(1) loss and the
//!   constrained update solver;
//! - [`agents`]: the CALF agent (constrained critic updates with baseline
//!   recovery) and its SARSA-m ablation;
//! - [`mpc`]: receding-horizon baselines over the discretized model;
//! - [`harness`]: multi-seed experiment runs, statistics and CSV exports.
//!
//! Each major capability has a runnable example; start with
//! `cargo run --example calf_learning`. The `calfbench` binary wraps the
//! harness with `run`, `summarize`, `compare` and `trajectory` subcommands.

pub mod agents;
pub mod cli;
pub mod critic;
pub mod env;
pub mod error;
pub mod harness;
pub mod mpc;
pub mod nominal;
pub mod scenario;
pub mod seeds;

pub use error::{Error, Result};
pub use scenario::{Action, Scenario, State};
