//! Coorbit spaces for two concrete groups.
//!
//! The affine group `G = {(a, b) : a > 0}` acting on weighted Bergman spaces of
//! the unit disc through the discrete series, and the group `R₊AN ⋉ Rⁿ` acting on
//! functions whose Fourier transform lives on the forward light cone.
//!
//! Modules follow the layering of the computations: group geometry and
//! quadrature at the bottom, voice transforms and norms in the middle, axiom
//! checks, atomic reconstruction and the cone norm equivalence on top.

pub mod affine;
pub mod atomic;
pub mod axioms;
pub mod besov;
pub mod cone;
pub mod disc;
pub mod error;
pub mod experiments;
pub mod io;
pub mod quad;

pub use error::{Error, Result};
pub use num_complex::Complex64;
