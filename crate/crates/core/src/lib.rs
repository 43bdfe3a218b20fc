//! Reference-frame-independent distributed quantum metrology with twirled two-copy states.
//!
//! Dense simulation is capped at `4096` amplitudes by default; set `FF_DIM_CAP` to change it.

pub mod cli;
pub mod error;
pub mod fisher;
pub mod measure;
pub mod states;
pub mod tensor;
pub mod twirl;
pub mod verify;

pub use error::{Error, Result};
pub use states::{EncodedPair, EncodingMode, HamiltonianSpec};
pub use tensor::{BitMask, CMatrix, CVector, DensityOperator, QuditLayout, StateVector, UnitaryMatrix, C64};
pub use twirl::{GuiState, Jet, LuiState};
