//! Energy-shell statistics of eigenstates across four quantum model systems.
//!
//! The crate classifies eigenstates of a model system by a physical feature
//! (a thresholded functional) and tracks the fraction of each class inside
//! an energy shell `[E_c - ΔE/2, E_c + ΔE/2]` as the shell width or the
//! effective Planck constant changes. The saturation value of that fraction
//! is compared against classical phase-space measures computed from the
//! corresponding classical dynamics.
//!
//! Modules:
//! - [`spectral`]: model-agnostic machinery — eigendecompositions, energy
//!   shells, classifiers, ratio curves.
//! - [`billiard`]: circular-billiard modes from Bessel zeros, the
//!   blank-region classifier, and the analytic classical fraction.
//! - [`coupled_top`]: two coupled angular momenta — Hamiltonian,
//!   Planck-cell basis, phase-space sections of eigenstates, and the
//!   variance classifier.
//! - [`phase_space`]: the classical coupled top — canonical integration,
//!   Poincaré sections, Lyapunov labelling, hypersurface volumes.
//! - [`kicked_rotor`]: the Chirikov map and its torus-quantized Floquet
//!   operator, width classifier, and shell entropy.
//! - [`xxz`]: open-boundary XXZ chain with five eigenstate features.
//! - [`io`]: CSV emission and the binary spectrum cache format.

pub mod billiard;
pub mod coupled_top;
pub mod error;
pub mod io;
pub mod kicked_rotor;
mod lapack;
pub mod phase_space;
pub mod spectral;
pub mod xxz;

pub use error::{Error, Result};

/// Limit the linear-algebra thread pool; forwarded to the BLAS runtime.
pub fn set_blas_threads(n: usize) {
    lapack::set_blas_threads(n);
}

#[doc(hidden)]
pub fn bench_sym_eig_window(a: Vec<f64>, n: usize, lo: f64, hi: f64) -> usize {
    lapack::sym_eig_window(a, n, lo, hi).unwrap().window_values.len()
}
#[doc(hidden)]
pub fn bench_sym_eig_values(a: Vec<f64>, n: usize) -> Vec<f64> {
    lapack::sym_eig_values(a, n).unwrap()
}
