//! Sum-of-exponentials (SOE) representations of bath correlation functions
//! and classical memory kernels.
//!
//! A Gaussian environment is described by a spectral density J(ω). After
//! weighting by quantum statistics the bath correlation function is the
//! Fourier transform of the effective density,
//!
//! ```text
//!     Δ(t) = ∫ J_eff(ω) e^{-iωt} dω ,
//! ```
//!
//! and the goal is a compact approximation Δ(t) ≈ Σ_j c_j e^{-i z_j t} with
//! decaying modes (Im z_j < 0), valid on a time window [0, T]. This crate
//! provides
//!
//! - [`spectral`]: model spectral densities, statistics weighting, analytic
//!   segmentation and frequency truncation;
//! - [`contour`]: SOE construction by trapezoidal quadrature of the
//!   contour-deformed Fourier integral under the tanh map, with parameter
//!   selection per endpoint singularity order;
//! - [`soe`]: the SOE value type with evaluation, rescaling, merging and
//!   error metrics;
//! - [`oracle`]: an independent real-axis adaptive reference integrator
//!   (never uses the deformed contour, so SOE-vs-oracle comparisons are not
//!   circular);
//! - [`prony`]: ESPRIT harmonic retrieval from uniform samples, minimal-mode
//!   search and SOE compression;
//! - [`gle`]: Markovian embedding of generalized Langevin equations with SOE
//!   memory kernels;
//! - [`cli`]: sweep experiments and CSV/JSON emission backing the `soekit`
//!   binary.
//!
//! Runnable walk-throughs for each capability live under `examples/`.

pub mod cli;
pub mod contour;
pub mod error;
pub mod gle;
pub mod numeric;
pub mod oracle;
pub mod prony;
pub mod soe;
pub mod spectral;


pub use error::{Error, Result};
pub use oracle::BcfOracle;

pub use soe::{Norm, Provenance, SoeRepresentation};
pub use spectral::{effective_segments, make_preset, AnalyticSegment, BaseDensity, SpectralModel};
