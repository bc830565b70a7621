//! Special functions: Bessel `K_ν`, `K_{iξ}`, `I_ν`, the Gamma function and
//! the Hartman–Watson density, plus residual checks of the integral
//! identities relating them.

mod bessel;
pub mod checks;
mod elementary;
mod gamma;
mod theta;

use thiserror::Error;

use crate::quad::QuadError;

pub use bessel::{
    bessel_i, bessel_k, bessel_k1_over_k0, ln_bessel_k, bessel_k_imag, bessel_k_scaled_cf, I_MAX_ARG, K_MAX_ARG,
    K_MAX_ORDER, K_MIN_ARG, K_SERIES_LIMIT,
};
pub use elementary::{argch, argsh, normal_cdf, normal_pdf, normal_sf, KahanSum};
pub use gamma::{gamma, ln_gamma};
pub use theta::{theta_hw, ThetaPoint, THETA_LOW_PRECISION_T};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecfunError {
    #[error("{what} = {value} is outside the mathematical domain")]
    Domain { what: &'static str, value: f64 },
    #[error("{what} = {value} is outside the supported range")]
    Unsupported { what: &'static str, value: f64 },
    #[error(transparent)]
    Quad(#[from] QuadError),
}
