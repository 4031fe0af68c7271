//! Operator-space norms and inequality checks on finite-dimensional
//! noncommutative L_p spaces (matrix algebras with the usual trace).

pub mod error;
pub mod json;
pub mod linalg;
pub mod optim;
pub mod rng;
pub mod schatten;
pub mod vv;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, C64};
pub use rng::Budget;
pub use schatten::{schatten_norm, state_apply, trace_pair, weighted_embed, LpParams, StateDensity};
pub mod states;
pub mod hp;
pub mod fock;
pub mod verify;
pub mod schur;
