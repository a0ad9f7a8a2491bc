//! Numerical laboratory for outliers of inhomogeneous non-Hermitian random matrices.
//!
//! The crate builds random matrices supported on regular graphs (band, block,
//! complete, cyclic-shift unions) with independent or elliptically correlated
//! entries, solves the 2×2 matrix Dyson equation of the Hermitized free model,
//! and checks two predictions at desk scale:
//!
//! * no eigenvalues of `X` outside the fattened elliptic region `E(ρ, ε)`;
//! * a low-rank perturbation `C` with an eigenvalue `λ`, `|λ| ≥ 1`, produces an
//!   outlier of `X + C` near `λ + ρ/λ`.
//!
//! Modules:
//!
//! | module | contents |
//! |---|---|
//! | [`ensemble`] | graphs, entry laws, seeded sampling, truncation, diagnostics |
//! | [`geometry`] | membership and distance for `E(ρ, ε)` |
//! | [`dyson`] | Dyson equation solver, closed-form exterior limit, support test |
//! | [`spectral`] | Hermitization, eigenvalues, σ_min, resolvent bilinear forms |
//! | [`outliers`] | factored perturbations, determinant criterion, roots, matching |
//! | [`products`] | block-cyclic linearization and product experiments |
//! | [`harness`] | config-driven Monte Carlo runner and exporters |

pub mod dyson;
pub mod ensemble;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod outliers;
pub mod products;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};

/// Complex double, shared with the linear algebra backend.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix.
pub type CMat = faer::Mat<C64>;
