use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Strip width and starting point of the reflected process.
///
/// Everything downstream assumes `0 < b` finite and `x` inside `[0, b]`;
/// construction is the only place that is checked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectionParams {
    b: f64,
    x: f64,
}

impl ReflectionParams {
    pub fn new(b: f64, x: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::Domain {
                target: "ReflectionParams::b",
                value: b,
                detail: "strip width must be finite and positive".into(),
            });
        }
        if !(x.is_finite() && (0.0..=b).contains(&x)) {
            return Err(Error::Domain {
                target: "ReflectionParams::x",
                value: x,
                detail: format!("start point must lie in [0, {b}]"),
            });
        }
        Ok(Self { b, x })
    }

    #[inline]
    pub fn b(&self) -> f64 {
        self.b
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.x
    }

    /// Same strip, different start point.
    pub fn with_x(&self, x: f64) -> Result<Self> {
        Self::new(self.b, x)
    }

    /// Left edge of the spectral domain: `-pi^2 / (8 b^2)`.
    ///
    /// `alpha_star` and everything built on it blows down to -infinity here
    /// (the cos in the denominator hits its first zero).
    #[inline]
    pub fn lambda_floor(&self) -> f64 {
        -PI * PI / (8.0 * self.b * self.b)
    }

    /// Absolute guard width used to keep iterates strictly inside the domain.
    #[inline]
    pub(crate) fn floor_guard(&self) -> f64 {
        1e-9 * PI * PI / (8.0 * self.b * self.b)
    }
}

/// A rate function evaluated at one point.
///
/// For `big_v` queries `point` is alpha and `lambda_star` is `None`; for
/// `v_star` queries `point` is the slope x and `lambda_star` carries the inner
/// maximizer. `derivative` is `None` exactly where the function has none
/// (v_star at x = 0, where the left end of the domain is a kink at +infinity
/// slope side).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateEval {
    pub point: f64,
    pub value: f64,
    pub derivative: Option<f64>,
    pub lambda_star: Option<f64>,
}
