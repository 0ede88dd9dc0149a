//! Finite-temperature inverse correlation lengths and space-like asymptotics of
//! transverse two-point functions of the XXZ spin-1/2 chain.
//!
//! The crate solves the linear integral equations for the dressed energy,
//! charge and momentum on the Fermi interval, the non-linear integral
//! equations for the dominant and first excited eigenvalues of the quantum
//! transfer matrix on closed complex contours, and assembles the effective
//! momentum/energy that drive the exponential decay of
//! `<sigma^- sigma^+(t)>` in the space-like cone.  The free-fermion point
//! (`delta = 0`) is implemented in closed form as an independent oracle.

pub mod contour;
pub mod dressed;
pub mod error;
pub mod freefermion;
pub mod linalg;
pub mod lowt;
pub mod model;
pub mod nlie;
pub mod quad;
pub mod spectral;

pub use error::Error;
pub use model::ModelParams;

/// Complex double used throughout.
pub type C64 = num_complex::Complex<f64>;

/// Shorthand for `Result` with the crate error type.
pub type Result<T> = std::result::Result<T, Error>;
