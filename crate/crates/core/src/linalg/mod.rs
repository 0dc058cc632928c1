//! Self-contained dense real linear algebra.
//!
//! Everything here is a pure function of its inputs. The routines are sized
//! for the small and medium problems of this crate (n up to a few hundred).

mod charpoly;
mod cholesky;
mod expm;
mod matrix;
mod power;
mod svd;
pub mod vector;

pub use charpoly::{char_poly, PolyCoeffs, CHAR_POLY_MAX_DIM};
pub use cholesky::{solve_shifted_spd, Cholesky};
pub use expm::mat_exp;
pub use matrix::Matrix;
pub use power::{dominant_eigenvalue_psd, smallest_eigenvalue_estimate, spectral_norm};
pub use svd::{
    default_rank_tol, min_norm_least_squares, numerical_rank, pseudo_inverse, singular_values, Svd,
};
