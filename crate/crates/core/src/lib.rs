//! An engine for compositional game theory: finite open games closed under
//! sequential and parallel composition and index-set conditioning, morphisms
//! between coutility-free games with a mechanical two-condition checker, and
//! infinite iteration of stage games with equilibrium membership decided
//! exactly (one-shot deviation over discounted utilities) or semi-decided by
//! depth-bounded unrolling of the greatest-fixpoint operator.
//!
//! The numeric layer is generic over the floating-point scalar via
//! [`Scalar`]; concrete `f64` aliases for the main types sit at the crate
//! root.

pub mod compare;
pub mod conditioning;
pub mod error;
pub mod finset;
pub mod game;
pub mod gen;
pub mod iteration;
pub mod json;
pub mod library;
pub mod scalar;
pub mod stream;
pub mod two_cells;
pub mod utility;
pub mod value;

pub use error::{Error, Result};
pub use finset::{Carrier, FinSet};
pub use game::{compose, identity_game, tensor, unit_game, Continuation, OpenGame};
pub use iteration::{iterate_game, IteratedGame};
pub use scalar::Scalar;
pub use stream::StreamPrefix;
pub use two_cells::{check_morphism, step_game, step_morphism, CoutilityFreeGame, GameMorphism};
pub use utility::UtilityFunctional;
pub use value::Value;

/// `f64` aliases for the main types.
pub type Value64 = value::Value<f64>;
pub type FinSet64 = finset::FinSet<f64>;
pub type Carrier64 = finset::Carrier<f64>;
pub type Continuation64 = game::Continuation<f64>;
pub type OpenGame64 = game::OpenGame<f64>;
pub type CoutilityFreeGame64 = two_cells::CoutilityFreeGame<f64>;
pub type GameMorphism64 = two_cells::GameMorphism<f64>;
pub type UtilityFunctional64 = utility::UtilityFunctional<f64>;
pub type StreamPrefix64 = stream::StreamPrefix<f64>;
pub type StrategyTransducer64 = iteration::StrategyTransducer<f64>;
pub type DepthTable64 = iteration::DepthTable<f64>;
pub type IterStrategy64 = iteration::IterStrategy<f64>;
pub type IteratedGame64 = iteration::IteratedGame<f64>;
pub type FiniteCoalgebra64 = iteration::FiniteCoalgebra<f64>;
pub type Verdict64 = iteration::Verdict<f64>;
pub type Bimatrix64 = library::Bimatrix<f64>;
