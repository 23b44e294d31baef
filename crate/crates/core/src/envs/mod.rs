//! Game constructors: the Stag-Hare-Rest grid world and random chain games
//! used as verification fixtures.

mod chain;
mod shr;

pub use crate::game::kl_divergence as kl_control_cost;
pub use chain::{build_chain_game, ChainGame, ChainGameParams, SLATER_MARGIN};
pub use shr::{build_shr, Move, ShrConfig};
