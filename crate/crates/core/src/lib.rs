//! Online learning in adversarial stochastic shortest path (SSP) problems
//! with known transitions.
//!
//! The crate is organised bottom-up:
//!
//! * [`mdp`] — the SSP model, exact evaluation, planning and simulation;
//! * [`occupancy`] — occupancy measures, the bounded polytope `Δ(T)`, the
//!   loop-free layered reduction and its execution rule;
//! * [`omd`] — Bregman-projection solvers behind every mirror-descent step;
//! * [`learners`] — the five online learners;
//! * [`adversaries`] — cost generators and feedback filtering;
//! * [`harness`] — experiments, regret accounting, Monte-Carlo property
//!   checks and output files;
//! * [`cli`] — the command-line front end used by the `ssp-lab` binary.

pub mod adversaries;
pub mod cli;
pub mod harness;
pub mod learners;
pub mod mdp;
pub mod occupancy;
pub mod omd;
pub mod toy;

mod linalg;
