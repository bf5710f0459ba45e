//! Exact and anytime Lipschitz constants of piecewise-linear feedforward networks.
//!
//! The network is split into regions of its input domain on which it is affine.
//! A best-first branch-and-bound search over activation pieces keeps a global
//! lower bound (norms of solved regions, optionally seeded by sampled Jacobians)
//! and a global upper bound (interval Jacobians of open regions), and stops once
//! they meet or are within a user-chosen factor.
//!
//! Activations are any continuous piecewise-linear layer that can describe, for
//! each output neuron, a cover of its input space by polyhedra on which the
//! neuron is affine: componentwise splines (ReLU, LeakyReLU, PReLU), the
//! GroupSort family and MaxPool are provided.

pub mod activation;
pub mod baselines;
pub mod bnb;
pub mod error;
pub mod interval;
mod lp;
pub mod network;
pub mod norms;
pub mod oracle;
pub mod polyhedron;
pub mod report;
pub mod symprop;

pub use activation::{Activation, AffinePiece, NeuronPiece};
pub use bnb::{Progress, SolveResult, SolveStatus, Solver, SolverConfig, Subproblem};
pub use error::{Error, Result};
pub use interval::IntervalMatrix;
pub use network::{LinearPrefix, Network};
pub use norms::{NormOrder, NormPair};
pub use polyhedron::Polyhedron;
