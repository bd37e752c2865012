//! Multipartite quantum-correlation measures and numerical checks of
//! recoverability inequalities.
//!
//! Everything is dense and double precision. Entropies are in nats.

pub mod channels;
pub mod error;
pub mod hilbert;
pub mod linalg;
pub mod measures;
pub mod optimize;
pub mod states;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
