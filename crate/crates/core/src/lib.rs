//! Quantum precision limits for estimating the separation of two
//! point-like sources imaged through a diffraction-limited linear system.
//!
//! The crate is organized around the beam-splitter equivalence of the
//! imaging channel: the symmetric and antisymmetric source modes are
//! independently attenuated with transmissivities `(1 +- delta) eta`,
//! where `delta` is the overlap of the two shifted point-spread
//! functions. On top of that sit
//!
//! - [`psf`]: the PSF model and the overlap functionals
//!   `delta, gamma, beta, dk^2, eps_pm^2`;
//! - [`beamsplitter`]: rotation angles, effective frequencies, the
//!   `f_pm` functions, and the quantum Fisher information upper bound;
//! - [`sources`]: source-state families and their image-plane photon
//!   statistics;
//! - [`qfi`]: exact quantum Fisher information per family and the
//!   Cramer-Rao bound;
//! - [`oracle`]: an independent brute-force QFI computation in a
//!   truncated multimode Fock space via the symmetric logarithmic
//!   derivative;
//! - [`measurement`]: classical Fisher information of parity photon
//!   counting and a Monte Carlo maximum-likelihood benchmark.

pub mod beamsplitter;
pub mod error;
pub mod measurement;
pub mod oracle;
pub mod psf;
pub mod qfi;
pub mod quadrature;
pub mod sources;

pub use beamsplitter::{BsParameters, ImagingSystem};
pub use error::{Error, Result};
pub use psf::{normalize_psf, OverlapFunctionals, PsfModel, QuadratureSpec};
pub use qfi::{QfiReport, TmsvVariant};
pub use sources::SourceSpec;
