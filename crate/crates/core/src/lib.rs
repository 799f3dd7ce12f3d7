//! Spectral analysis of Schrödinger operators on armchair
//! carbon-nanotube quantum graphs with a 1-periodic potential.
//!
//! The operator decomposes over the quasi-momentum k ∈ Z_N into fiber
//! operators H_k; the spectrum of each fiber is the Dirichlet spectrum
//! (flat bands of infinite multiplicity) plus an absolutely continuous
//! part described by two Lyapunov branches F_{k,1/2} = ξ_k ± √ρ_k built
//! from the scalar Hill discriminant F and anti-discriminant F₋.  This
//! crate computes the bands, their edge attribution (periodic,
//! antiperiodic, or resonance), the spectral multiplicity (2 or 4), the
//! classified gaps per fiber, their intersection over k for the full
//! operator, and the high-energy gap asymptotics.
//!
//! Modules:
//! - [`potential`]: exact piecewise-constant + delta potentials.
//! - [`hill`]: monodromy, F, F₋, Dirichlet spectrum, Hill band edges.
//! - [`lyapunov`]: the k-resolved functions ξ, ρ, g, h, u, v, f and the
//!   branch-free membership predicates.
//! - [`rootfind`]: bracketed root isolation, localization disks, and
//!   argument-principle zero counting.
//! - [`spectrum`]: band/gap/multiplicity assembly per fiber and for the
//!   full operator.

pub mod error;
pub mod hill;
pub mod lyapunov;
pub mod potential;
pub mod rootfind;
pub mod spectrum;

pub use error::{Result, SpectralError};
pub use potential::PeriodicPotential;

/// Default refinement tolerance in z = √λ units.
pub const TOL_ROOT_Z: f64 = 1e-12;
/// Default tolerance for boundary membership comparisons.
pub const TOL_EDGE: f64 = 1e-9;
/// Default tangency threshold for double-root detection.
pub const TOL_TANG: f64 = 1e-9;

/// Tolerance bundle threaded through the spectral pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// root refinement, in z units
    pub root_z: f64,
    /// boundary membership / edge comparisons
    pub edge: f64,
    /// tangency (double root) detection
    pub tang: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { root_z: TOL_ROOT_Z, edge: TOL_EDGE, tang: TOL_TANG }
    }
}
