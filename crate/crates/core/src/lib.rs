//! Brownian motion on [0, b] with instantaneous reflection at both endpoints,
//! driven by the regulator pair (L, U): L grows only when X sits at 0, U only
//! at b, and X_t = x + W_t + L_t - U_t stays in the strip.
//!
//! The crate has three layers:
//!
//! * [`rate`]: the limiting cumulant `alpha_star` of the lower local time, its
//!   inverse `big_v`, and the Legendre transform `v_star` governing the decay
//!   of P(L_t/t near a).
//! * [`mgf`]: the resolvent-scale moment generating function `f_hat` of
//!   `exp(alpha * L)` at an independent exponential time, plus finite
//!   difference checks that it solves the defining ODE.
//! * [`sim`] and [`experiments`]: an Euler/Skorokhod path sampler with
//!   per-path deterministic RNG streams, and the estimator suites that compare
//!   simulation output against the closed forms.

pub mod error;
pub mod experiments;
pub mod mgf;
pub mod params;
pub mod rate;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use mgf::{FhatDecomposition, MgfQuery, MgfValue, OdeResiduals};
pub use params::{RateEval, ReflectionParams};
pub use sim::{Functional, McEstimate, PathSample, SimConfig};

/// Canonical float formatting for CSV output: 17 significant digits,
/// scientific, locale-free. Round-trips every finite f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        return "nan".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    format!("{v:.16e}")
}
