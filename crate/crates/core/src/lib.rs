//! Fréchet-mean prediction for diffusions on SO(3).
//!
//! The crate has two independent routes to the mean and error covariance of
//! `∘dX = X (b(X) dt + ∘dW)`:
//!
//! * [`predictor`] integrates deterministic ODEs for the mean `E_t` and the
//!   second moment `Σ_t = E[ν ⊗ ν]` of the error `ν = log(E_t, X_t)`;
//! * [`sde`] + [`frechet`] simulate an ensemble and compute its empirical
//!   Fréchet mean by Gauss-Newton (Karcher) iteration.
//!
//! [`harness`] wires both together for the command-line tool.

pub mod drift;
pub mod error;
pub mod frechet;
pub mod harness;
pub mod lie;
pub mod predictor;
pub mod sde;

pub use error::{Error, Result};
