//! Tabular constrained Markov games solved by Lagrangian game dynamics.
//!
//! A constrained Markov game is relaxed into a sequence of unconstrained
//! Lagrangian games `G(λ_k)`. Each one is handed to a Nash oracle, the
//! returned stationary policy is played for one epoch, and the multipliers
//! are moved by a projected dual-descent step computed from the epoch's
//! realized constraint costs.
//!
//! The crate is `no_std` with `alloc`; file formats, configuration and the
//! command line live in the `cmg` companion crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod diagnostics;
pub mod dynamics;
pub mod envs;
pub mod error;
pub mod game;
pub mod lagrangian;
pub(crate) mod linalg;
pub(crate) mod mdp;
pub mod oracle;

pub use error::{Error, Result};
pub use game::{
    ConstrainedMarkovGame, ControlCost, ControlSign, EpochPolicySequence, GameParts, GridLayout,
    JointActionSpace, OthersPolicy, ProductPolicy, StationaryEvaluation, TransitionMatrix,
};
pub use lagrangian::{LagrangianGame, Multipliers};
