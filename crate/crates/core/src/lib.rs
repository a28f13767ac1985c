//! Maxwell–Bloch mixed problem through a matrix Riemann–Hilbert problem,
//! with a direct characteristic integrator as an independent check.
//!
//! The low-level kernels ([`mat2`], [`quadrature`], [`linalg`], [`magnus`])
//! are generic over the real scalar type; the physics pipeline runs in `f64`
//! through the aliases below.

pub mod broadening;
pub mod direct;
pub mod error;
pub mod jump;
pub mod lax;
pub mod linalg;
pub mod magnus;
pub mod mat2;
pub mod quadrature;
pub mod rhsolver;
pub mod scalar;
pub mod scenario;
pub mod spectral;

pub use error::{MbError, Result};
pub use scalar::Real;

/// Complex scalar used throughout the pipeline.
pub type C64 = num_complex::Complex64;
/// 2×2 complex matrix in double precision.
pub type Mat2 = mat2::Complex2x2<f64>;
/// Single-precision 2×2 matrix, for callers that want the kernels in `f32`.
pub type Mat2f32 = mat2::Complex2x2<f32>;
