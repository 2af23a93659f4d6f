//! Energy-efficient power allocation and power splitting for SWIPT over
//! OFDM with interference harvesting.

pub mod cli;
pub mod dinkelbach;
pub mod error;
pub mod harness;
pub mod innersolver;
pub mod objective;
pub mod sysmodel;

pub use error::{ObjectiveError, ParamError, SolveError};
