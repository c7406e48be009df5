//! Closed form for the resolvent-scale MGF of the tilted lower local time,
//!
//! `f_hat(x; lambda, alpha) = E_x integral_0^inf exp(-lambda t + alpha L_t) dt`,
//!
//! finite for `lambda > big_v(alpha)`. The working expression is
//!
//! `f_hat = 1/lambda + [cosh((b-x) s) / cosh(b s)] * alpha / (lambda (alpha_star - alpha))`
//!
//! with `s = sqrt(2 lambda)`, evaluated through an overflow-free cosh ratio.
//! For negative lambda the cosh turns into cos (same continuation as
//! `alpha_star`), and in a window around lambda = 0 the two blowing-up pieces
//! cancel, so the whole thing is reassembled as a series with the 1/lambda
//! poles removed. The raw two-exponential decomposition is kept only as a
//! cross-check (`f_hat_decomposition`); it cancels catastrophically and
//! overflows once `b sqrt(2 lambda)` passes a few hundred.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ReflectionParams;
use crate::rate::{alpha_star, big_v};

/// `cosh(a) / cosh(c)` for `0 <= a <= c` without overflow.
#[inline]
pub(crate) fn cosh_ratio(a: f64, c: f64) -> f64 {
    debug_assert!(0.0 <= a && a <= c);
    (a - c).exp() * (1.0 + (-2.0 * a).exp()) / (1.0 + (-2.0 * c).exp())
}

/// A validated (lambda, alpha) pair for one strip geometry.
///
/// Construction enforces `lambda > big_v(alpha)` with a small relative guard;
/// everything else in this module can then assume the denominator
/// `alpha_star(lambda) - alpha` is strictly positive.
#[derive(Debug, Clone, Copy)]
pub struct MgfQuery {
    params: ReflectionParams,
    lambda: f64,
    alpha: f64,
    v_alpha: f64,
}

impl MgfQuery {
    pub fn new(params: ReflectionParams, lambda: f64, alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::Domain {
                target: "MgfQuery::alpha",
                value: alpha,
                detail: "alpha must be finite".into(),
            });
        }
        if !lambda.is_finite() {
            return Err(Error::Domain {
                target: "MgfQuery::lambda",
                value: lambda,
                detail: "lambda must be finite".into(),
            });
        }
        let v_alpha = big_v(alpha, &params)?.value;
        let guard = 1e-9 * v_alpha.abs().max(1.0);
        if lambda - v_alpha <= guard {
            return Err(Error::Domain {
                target: "MgfQuery::lambda",
                value: lambda,
                detail: format!(
                    "transform diverges unless lambda > big_v(alpha) = {v_alpha:.6e} (guard {guard:.1e})"
                ),
            });
        }
        Ok(Self {
            params,
            lambda,
            alpha,
            v_alpha,
        })
    }

    #[inline]
    pub fn params(&self) -> &ReflectionParams {
        &self.params
    }

    #[inline]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `big_v(alpha)`, cached at construction.
    #[inline]
    pub fn v_alpha(&self) -> f64 {
        self.v_alpha
    }

    /// Distance to the divergence boundary, `lambda - big_v(alpha)`.
    #[inline]
    pub fn domain_margin(&self) -> f64 {
        self.lambda - self.v_alpha
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MgfValue {
    pub value: f64,
    /// True when the cosh/cos ratio form was used; false in the lambda ~ 0
    /// window where the pole-free series takes over.
    pub stable_form_used: bool,
    /// `lambda - big_v(alpha)` of the underlying query.
    pub domain_margin: f64,
}

fn check_x(x: f64, b: f64, target: &'static str) -> Result<()> {
    if !(x.is_finite() && (0.0..=b).contains(&x)) {
        return Err(Error::Domain {
            target,
            value: x,
            detail: format!("evaluation point must lie in [0, {b}]"),
        });
    }
    Ok(())
}

/// Series form for |lambda| near 0, where `1/lambda` and the correction term
/// individually blow up but their sum stays finite. Combines the tanh series
/// of `alpha_star/lambda` with `(cosh ratio - 1)/lambda` expanded through
/// lambda^3; truncation error is far below f64 resolution inside the window.
fn f_hat_near_zero(b: f64, lambda: f64, alpha: f64, x: f64) -> f64 {
    let zeta = b - x;
    let (z2, b2) = (zeta * zeta, b * b);
    let (z4, b4) = (z2 * z2, b2 * b2);
    let (z6, b6) = (z4 * z2, b4 * b2);
    let (z8, b8) = (z4 * z4, b4 * b4);
    let eps = 2.0 * b2 * lambda;
    let t = 1.0
        + eps * (-1.0 / 3.0 + eps * (2.0 / 15.0 + eps * (-17.0 / 315.0 + eps * (62.0 / 2835.0))));
    let astar_over_lambda = 2.0 * b * t;
    let astar = astar_over_lambda * lambda;
    let num = (z2 - b2)
        + lambda * ((z4 - b4) / 6.0 + lambda * ((z6 - b6) / 90.0 + lambda * (z8 - b8) / 2520.0));
    let den = 1.0 + lambda * (b2 + lambda * (b4 / 6.0 + lambda * (b6 / 90.0 + lambda * b8 / 2520.0)));
    (astar_over_lambda + alpha * (num / den)) / (astar - alpha)
}

/// The resolvent MGF itself. Positive and finite on the whole validated
/// domain; increasing in alpha, decreasing in lambda and in x.
pub fn f_hat(q: &MgfQuery, x: f64) -> Result<MgfValue> {
    let b = q.params.b();
    check_x(x, b, "f_hat")?;
    let lambda = q.lambda;
    let alpha = q.alpha;
    let window = 1e-6 * (1.0_f64).max(1.0 / (b * b));
    let (value, stable_form_used) = if lambda.abs() < window {
        (f_hat_near_zero(b, lambda, alpha, x), false)
    } else {
        let astar = alpha_star(lambda, &q.params)?;
        let ratio = if lambda > 0.0 {
            let s = (2.0 * lambda).sqrt();
            cosh_ratio((b - x) * s, b * s)
        } else {
            let s = (-2.0 * lambda).sqrt();
            ((b - x) * s).cos() / (b * s).cos()
        };
        (
            1.0 / lambda + ratio * alpha / (lambda * (astar - alpha)),
            true,
        )
    };
    debug_assert!(value.is_finite() && value > 0.0);
    Ok(MgfValue {
        value,
        stable_form_used,
        domain_margin: q.domain_margin(),
    })
}

/// Laplace transform `E_x exp(-lambda H_0)` of the first time the process
/// (reflected at b only) hits 0: `cosh((b-x) s) / cosh(b s)`, `s = sqrt(2 lambda)`.
///
/// Equals 1 at x = 0 and decreases in both x and lambda. Only defined for
/// lambda > 0.
pub fn hitting_laplace(params: &ReflectionParams, lambda: f64, x: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain {
            target: "hitting_laplace",
            value: lambda,
            detail: "requires lambda > 0".into(),
        });
    }
    let b = params.b();
    check_x(x, b, "hitting_laplace")?;
    let s = (2.0 * lambda).sqrt();
    Ok(cosh_ratio((b - x) * s, b * s))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OdeResiduals {
    pub grid_n: usize,
    /// max over interior nodes of |(1/2) f'' - lambda f + 1|
    pub max_interior: f64,
    /// |f'(0) + alpha f(0)|, one-sided second-order difference
    pub lower_boundary: f64,
    /// |f'(b)|, one-sided second-order difference
    pub upper_boundary: f64,
}

/// Finite difference residuals of f_hat against its defining resolvent
/// problem: `(1/2) f'' = lambda f - 1` on (0, b) with the tilted Robin
/// condition `f'(0) + alpha f(0) = 0` and reflection `f'(b) = 0`.
/// All three residuals shrink like h^2 on grid refinement.
pub fn ode_residual(q: &MgfQuery, grid_n: usize) -> Result<OdeResiduals> {
    if grid_n < 16 {
        return Err(Error::Config(format!(
            "ode_residual needs at least 16 grid cells, got {grid_n}"
        )));
    }
    let b = q.params.b();
    let h = b / grid_n as f64;
    let f: Vec<f64> = (0..=grid_n)
        .map(|k| {
            let x = if k == grid_n { b } else { k as f64 * h };
            f_hat(q, x).map(|v| v.value)
        })
        .collect::<Result<_>>()?;
    let mut max_interior: f64 = 0.0;
    for k in 1..grid_n {
        let d2 = (f[k + 1] - 2.0 * f[k] + f[k - 1]) / (h * h);
        max_interior = max_interior.max((0.5 * d2 - q.lambda * f[k] + 1.0).abs());
    }
    let n = grid_n;
    let fp0 = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    let fpb = (3.0 * f[n] - 4.0 * f[n - 1] + f[n - 2]) / (2.0 * h);
    Ok(OdeResiduals {
        grid_n,
        max_interior,
        lower_boundary: (fp0 + q.alpha * f[0]).abs(),
        upper_boundary: fpb.abs(),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FhatDecomposition {
    /// coefficient of exp(+x sqrt(2 lambda))
    pub coeff_a: f64,
    /// coefficient of exp(-x sqrt(2 lambda))
    pub coeff_b: f64,
    /// `1/lambda + coeff_a e^{x s} + coeff_b e^{-x s}`
    pub value: f64,
}

/// The raw two-exponential solution of the resolvent ODE, evaluated literally:
///
/// `A = alpha e^{-b s} / (cosh(b s) 2 lambda (alpha_star - alpha))`,
/// `B = e^{2 b s} A`, `value = 1/lambda + A e^{x s} + B e^{-x s}`.
///
/// Only sensible for lambda > 0, and rejected outright once `b s > 300` where
/// `e^{2 b s}` leaves f64 range. Exists to cross-check `f_hat`, which computes
/// the same number without the cancellation.
pub fn f_hat_decomposition(q: &MgfQuery, x: f64) -> Result<FhatDecomposition> {
    let b = q.params.b();
    check_x(x, b, "f_hat_decomposition")?;
    if q.lambda <= 0.0 {
        return Err(Error::Domain {
            target: "f_hat_decomposition",
            value: q.lambda,
            detail: "literal form requires lambda > 0".into(),
        });
    }
    let s = (2.0 * q.lambda).sqrt();
    let c = b * s;
    const EXP_LIMIT: f64 = 300.0;
    if c > EXP_LIMIT {
        return Err(Error::Overflow {
            exponent: c,
            limit: EXP_LIMIT,
        });
    }
    let astar = alpha_star(q.lambda, &q.params)?;
    let coeff_a = q.alpha * (-c).exp() / c.cosh() / (2.0 * q.lambda * (astar - q.alpha));
    let coeff_b = (2.0 * c).exp() * coeff_a;
    let value = 1.0 / q.lambda + (x * s).exp() * coeff_a + (-x * s).exp() * coeff_b;
    Ok(FhatDecomposition {
        coeff_a,
        coeff_b,
        value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn q(b: f64, lambda: f64, alpha: f64) -> MgfQuery {
        MgfQuery::new(ReflectionParams::new(b, 0.0).unwrap(), lambda, alpha).unwrap()
    }

    // Reference values from 50-digit arithmetic, truncated to f64.

    #[test]
    fn known_values() {
        // alpha = 0 collapses to the plain resolvent of the exponential clock
        let v = f_hat(&q(1.0, 2.0, 0.0), 0.3).unwrap();
        assert_eq!(v.value, 0.5);
        assert!(v.stable_form_used);

        // 2 (1 - 1/e)
        assert_relative_eq!(
            f_hat(&q(1.0, 0.5, -1.0), 1.0).unwrap().value,
            1.264_241_117_657_115_4,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            f_hat(&q(1.0, 0.5, -1.0), 0.0).unwrap().value,
            0.864_664_716_763_387_3,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            f_hat(&q(1.0, 1.0, -2.0), 1.0).unwrap().value,
            0.718_030_465_361_725_1,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            f_hat(&q(1.0, 2.0, -1.0), 0.0).unwrap().value,
            0.329_238_189_633_658_8,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            f_hat(&q(1.0, 0.5, -1.0), 0.5).unwrap().value,
            1.170_339_180_138_936_7,
            max_relative = 1e-13
        );
    }

    #[test]
    fn negative_lambda_branch() {
        // lambda between big_v(alpha) and 0 is legal for negative alpha
        let query = q(1.0, -0.2, -1.0);
        let v = f_hat(&query, 0.0).unwrap();
        assert!(v.value.is_finite() && v.value > 0.0);
        assert!(v.stable_form_used);
        // against the direct expression; the cos ratio is 1 at x = 0
        let s = (0.4_f64).sqrt();
        let astar = -s * s.tan();
        let direct = 1.0 / -0.2 + (-1.0) / (-0.2 * (astar + 1.0));
        assert_relative_eq!(v.value, direct, max_relative = 1e-12);
    }

    #[test]
    fn near_zero_window_matches_ratio_form() {
        // just outside the window the ratio form is still accurate enough to
        // pin the series down to ~1e-9
        for alpha in [-0.5, -2.0] {
            for x in [0.0, 0.4, 1.0] {
                for sign in [1.0, -1.0] {
                    let lambda = sign * 2e-6;
                    let public = f_hat(&q(1.0, lambda, alpha), x).unwrap();
                    assert!(public.stable_form_used);
                    let series = f_hat_near_zero(1.0, lambda, alpha, x);
                    assert_relative_eq!(public.value, series, max_relative = 1e-9);
                }
            }
        }
    }

    #[test]
    fn lambda_zero_limit() {
        // exact limit -2b/alpha + x(2b - x)
        let v = f_hat(&q(1.0, 0.0, -2.5), 0.7).unwrap();
        assert!(!v.stable_form_used);
        assert_relative_eq!(v.value, 0.8 + 0.7 * 1.3, max_relative = 1e-13);
    }

    #[test]
    fn hitting_laplace_values() {
        let pr = ReflectionParams::new(1.0, 0.0).unwrap();
        assert_eq!(hitting_laplace(&pr, 0.7, 0.0).unwrap(), 1.0);
        // 1/cosh(1)
        assert_relative_eq!(
            hitting_laplace(&pr, 0.5, 1.0).unwrap(),
            0.648_054_273_663_885_4,
            max_relative = 1e-14
        );
        assert!(hitting_laplace(&pr, 0.0, 0.5).is_err());
        assert!(hitting_laplace(&pr, -1.0, 0.5).is_err());
    }

    #[test]
    fn boundary_identity_links_f_hat_to_hitting_time() {
        // f_hat(x) - 1/lambda = hitting_laplace(x) (f_hat(0) - 1/lambda)
        let pr = ReflectionParams::new(1.7, 0.0).unwrap();
        let query = MgfQuery::new(pr, 0.9, -1.3).unwrap();
        let at_zero = f_hat(&query, 0.0).unwrap().value - 1.0 / 0.9;
        for x in [0.0, 0.3, 1.0, 1.7] {
            let lhs = f_hat(&query, x).unwrap().value - 1.0 / 0.9;
            let rhs = hitting_laplace(&pr, 0.9, x).unwrap() * at_zero;
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn decomposition_example_and_cross_check() {
        let query = q(1.0, 0.5, -1.0);
        let d0 = f_hat_decomposition(&query, 0.0).unwrap();
        assert_relative_eq!(d0.coeff_a, -0.135_335_283_236_612_7, max_relative = 1e-12);
        assert_relative_eq!(d0.value, 0.864_664_716_763_387_3, max_relative = 1e-11);
        let d1 = f_hat_decomposition(&query, 1.0).unwrap();
        assert_relative_eq!(d1.value, 1.264_241_117_657_115_4, max_relative = 1e-11);

        for x in [0.0, 0.25, 0.8, 1.0] {
            let lit = f_hat_decomposition(&query, x).unwrap().value;
            let stable = f_hat(&query, x).unwrap().value;
            assert_relative_eq!(lit, stable, max_relative = 1e-9);
        }
    }

    #[test]
    fn decomposition_overflow_guard() {
        let query = q(1.0, 5e4, -1.0);
        assert!(matches!(
            f_hat_decomposition(&query, 0.5),
            Err(Error::Overflow { .. })
        ));
        // negative lambda has no literal exponential form
        let neg = q(1.0, -0.1, -1.0);
        assert!(matches!(
            f_hat_decomposition(&neg, 0.5),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn ode_residual_alpha_zero_is_exact() {
        let r = ode_residual(&q(1.0, 2.0, 0.0), 64).unwrap();
        assert!(r.max_interior < 1e-12);
        assert!(r.lower_boundary < 1e-12);
        assert!(r.upper_boundary < 1e-12);
    }

    #[test]
    fn ode_residual_shrinks_second_order() {
        let query = q(1.0, 0.5, -1.0);
        let r64 = ode_residual(&query, 64).unwrap();
        let r128 = ode_residual(&query, 128).unwrap();
        assert!(r64.max_interior < 1e-3);
        let ratio = r64.max_interior / r128.max_interior;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");

        let steep = q(1.0, 2.0, 1.0);
        let r = ode_residual(&steep, 128).unwrap();
        assert!(r.lower_boundary < 1e-3);
        assert!(r.upper_boundary < 1e-3);
    }

    #[test]
    fn query_rejects_divergent_lambda() {
        let pr = ReflectionParams::new(1.0, 0.0).unwrap();
        // big_v(-1) ~ -0.3700869; anything below diverges
        assert!(MgfQuery::new(pr, -0.5, -1.0).is_err());
        let v = crate::rate::big_v(-1.0, &pr).unwrap().value;
        assert!(MgfQuery::new(pr, v + 1e-12, -1.0).is_err());
        assert!(MgfQuery::new(pr, v + 1e-3, -1.0).is_ok());
        // positive alpha needs lambda above a positive threshold
        assert!(MgfQuery::new(pr, 0.5, 1.0).is_err());
        assert!(MgfQuery::new(pr, 0.8, 1.0).is_ok());
    }

    #[test]
    fn pole_residue_is_bounded() {
        // (lambda - V) f_hat stays bounded and nonzero as lambda drops to V
        let pr = ReflectionParams::new(1.0, 0.0).unwrap();
        let v = crate::rate::big_v(-1.0, &pr).unwrap().value;
        let mut products = Vec::new();
        for margin in [1e-3, 1e-4, 1e-5] {
            let query = MgfQuery::new(pr, v + margin, -1.0).unwrap();
            let f = f_hat(&query, 0.0).unwrap().value;
            products.push(margin * f);
        }
        // successive products converge to the residue
        assert_relative_eq!(products[0], products[1], max_relative = 2e-2);
        assert_relative_eq!(products[1], products[2], max_relative = 2e-3);
        assert!(products[2].abs() > 1e-3);
    }
}
