//! Discrete solitary traveling waves of the cubic lattice NLS near the continuous limit.
//!
//! Fields live on a periodic lattice of step `h` ([`lattice`]), with a band-limited
//! spectral representation ([`spectral`]). Waves are built by Newton iteration on
//! the dealiased Lagrangian ([`solver`]), evolved under several flows ([`dynamics`])
//! and tracked modulo gauge and translation ([`modulation`]).
//!
//! Dispersion operators, flows and integrators are pluggable: each family has a
//! [`registry::Registry`] of named factories, so callers can pick `"dst:2"` or
//! `"strang"` from a config string.

pub mod dispersion;
pub mod dynamics;
pub mod error;
pub mod fft;
pub mod functionals;
pub mod io;
pub mod lattice;
pub mod modulation;
pub mod oracles;
pub mod perturb;
pub mod registry;
pub mod solver;
pub mod spectral;
pub mod waves;

pub use error::{Error, Result};
pub use lattice::{GridField, GridSpec, NormKind, StencilSpec};
pub use spectral::SpectralField;
pub use waves::WaveParams;
