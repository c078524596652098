//! Samples of two- and four-point correlators under pseudorandom unitary
//! ensembles, rendered as HSV images and classified by a small CNN.
//!
//! The crate is organised bottom-up:
//!
//! - [`quantum`]: state vectors, Pauli strings, dense unitaries.
//! - [`ensembles`]: Pauli 1-design, brickwork approximate 2-design and Haar
//!   samplers, plus moment and frame-potential diagnostics.
//! - [`correlators`]: single correlator terms, batched sample matrices and
//!   the `QCSM` sample file format.
//! - [`imaging`]: complex-to-HSV pixel encoding, labelled datasets and the
//!   `QCIM` image file format.
//! - [`cnn`]: a two-convolution classifier with hand-written backprop.
//! - [`experiment`]: the file-driven pipeline behind the `scramblenet` binary.
//!
//! Qubit sites are numbered so that site 0 is the most significant bit of
//! a computational basis index.

pub mod cnn;
pub mod correlators;
pub mod ensembles;
pub mod error;
pub mod experiment;
pub mod imaging;
mod binio;
pub mod quantum;
pub mod seed;

pub use error::{Error, Result};
