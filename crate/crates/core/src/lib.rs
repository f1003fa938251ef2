//! Numerical laboratory for Schrödinger scattering through sparse
//! concentric spherical barriers: far-field amplitudes, multiplicative
//! WKB factors, the sphere operators `O_t`, a radial outgoing-wave oracle,
//! entropy certificates for a.c. spectrum and a gap-growth engine for
//! the absence of positive eigenvalues.

pub mod config;
pub mod error;
pub mod greens;
pub mod io;
pub mod ode;
pub mod potential;
pub mod propagate;
pub mod quad;
pub mod radial;
pub mod run;
pub mod seqbounds;
pub mod special;
pub mod spectral;
pub mod sphere;
pub mod tower;
pub mod wkb;

mod shell;

pub use error::{LabError, Result};
