//! Asynchronous proximal stochastic gradient descent.
//!
//! The crate implements a parameter-server execution core for composite
//! objectives `f(x) + h(x)` where `f` is a smooth (possibly nonconvex)
//! finite-sum loss and `h` is a convex, possibly nonsmooth regularizer.
//! Workers pull model snapshots and push summed mini-batch gradients; the
//! server folds every `m` pushes into one proximal update.
//!
//! Three execution modes share the same numeric kernels and produce the same
//! metric rows:
//!
//! - [`engine::run_async`] - real threads, message-passing parameter server;
//! - [`sim::run_sim`] - single-threaded executor with explicit, bounded,
//!   replayable gradient delays;
//! - [`harness::run_seq_proxsgd`] - plain sequential mini-batch ProxSGD.
//!
//! With zero delay and one worker all three walk the same iterate sequence,
//! which the simulator exploits as the reproducibility oracle for the
//! concurrent engine. The [`harness`] module adds the deterministic ProxGD
//! baseline, reference solutions, suboptimality series and speedup tables.

pub mod core;
pub mod data;
pub mod engine;
pub mod harness;
pub mod objectives;
pub mod prox;
pub mod rng;
pub mod schedule;
pub mod selftest;
pub mod sim;

pub use crate::core::{DenseVec, Error, Mode, Result, RunConfig, RunRecord, SparseVec};
