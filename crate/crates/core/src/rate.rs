//! The limiting cumulant of the lower boundary local time and its transforms.
//!
//! `alpha_star(lambda) = sqrt(2 lambda) tanh(b sqrt(2 lambda))` for positive
//! lambda, continued through 0 to `-sqrt(-2 lambda) tan(b sqrt(-2 lambda))`
//! on `(-pi^2/(8 b^2), 0)` via `tanh(i y) = i tan(y)`. It is strictly
//! increasing and strictly concave, climbs from -infinity at the domain floor
//! through 0 at 0, and grows like `sqrt(2 lambda)`.
//!
//! `big_v` is its inverse (the long-run growth rate of
//! `(1/t) log E exp(alpha L_t)`), and `v_star` is the Legendre transform of
//! `big_v`, the decay rate of `P(L_t approx x t)`. Both reduce to root finding
//! against `alpha_star` and its first two derivatives; near lambda = 0 all
//! three switch to Taylor forms in `eps = 2 b^2 lambda` to dodge the 0/0 in
//! the direct expressions.

use crate::error::{Error, Result};
use crate::params::{RateEval, ReflectionParams};

/// |2 b^2 lambda| below this switches the direct forms to their Taylor series.
const SERIES_EPS: f64 = 1e-8;

const MAX_ITER: usize = 200;
/// Step-size stopping scale for the bracketed Newton solves (relative).
const TOL_STEP: f64 = 1e-15;

fn check_lambda(lambda: f64, params: &ReflectionParams, target: &'static str) -> Result<()> {
    let floor = params.lambda_floor();
    if !lambda.is_finite() || lambda <= floor + params.floor_guard() {
        return Err(Error::Domain {
            target,
            value: lambda,
            detail: format!("lambda must lie in ({floor:e}, inf), clear of the pole"),
        });
    }
    Ok(())
}

/// Limiting cumulant `lim (1/t) log E exp(alpha_star(lambda) L_t) = lambda`,
/// i.e. the value whose exponential tilt of L grows at rate lambda.
pub fn alpha_star(lambda: f64, params: &ReflectionParams) -> Result<f64> {
    check_lambda(lambda, params, "alpha_star")?;
    let b = params.b();
    let eps = 2.0 * b * b * lambda;
    if eps.abs() < SERIES_EPS {
        // u tanh u = e (1 - e/3 + 2e^2/15 - 17e^3/315 + 62e^4/2835), e = u^2
        let t = 1.0
            + eps * (-1.0 / 3.0 + eps * (2.0 / 15.0 + eps * (-17.0 / 315.0 + eps * (62.0 / 2835.0))));
        return Ok(2.0 * b * lambda * t);
    }
    if lambda > 0.0 {
        let s = (2.0 * lambda).sqrt();
        Ok(s * (b * s).tanh())
    } else {
        let s = (-2.0 * lambda).sqrt();
        Ok(-s * (b * s).tan())
    }
}

/// d alpha_star / d lambda. Strictly decreasing from +infinity at the floor
/// to 0 at +infinity; equals 2b at lambda = 0.
pub fn alpha_star_prime(lambda: f64, params: &ReflectionParams) -> Result<f64> {
    check_lambda(lambda, params, "alpha_star_prime")?;
    let b = params.b();
    let eps = 2.0 * b * b * lambda;
    if eps.abs() < SERIES_EPS {
        let t = 1.0
            + eps * (-2.0 / 3.0 + eps * (2.0 / 5.0 + eps * (-68.0 / 315.0 + eps * (62.0 / 567.0))));
        return Ok(2.0 * b * t);
    }
    if lambda > 0.0 {
        let u = b * (2.0 * lambda).sqrt();
        let sech = 1.0 / u.cosh();
        Ok((b / u) * (u.tanh() + u * sech * sech))
    } else {
        let u = b * (-2.0 * lambda).sqrt();
        let sec = 1.0 / u.cos();
        Ok((b / u) * (u.tan() + u * sec * sec))
    }
}

/// Second derivative, negative on the whole domain (-8 b^3 / 3 at 0).
/// Only used internally as the Newton slope for `lambda_star`.
pub(crate) fn alpha_star_second(lambda: f64, params: &ReflectionParams) -> Result<f64> {
    check_lambda(lambda, params, "alpha_star_second")?;
    let b = params.b();
    let b3 = b * b * b;
    let eps = 2.0 * b * b * lambda;
    if eps.abs() < SERIES_EPS {
        return Ok(-b3 * (8.0 / 3.0 - eps * (16.0 / 5.0)));
    }
    if lambda > 0.0 {
        let u = b * (2.0 * lambda).sqrt();
        let c = u.cosh();
        let sech2 = 1.0 / (c * c);
        let th = u.tanh();
        Ok(b3 * ((u * sech2 - th) / (u * u * u) - 2.0 * sech2 * th / u))
    } else {
        let u = b * (-2.0 * lambda).sqrt();
        let c = u.cos();
        let sec2 = 1.0 / (c * c);
        let tn = u.tan();
        Ok(-b3 * ((u * sec2 - tn) / (u * u * u) + 2.0 * sec2 * tn / u))
    }
}

/// Newton iteration with a maintained sign-change bracket; falls back to
/// bisection whenever the Newton step leaves the bracket. `f` must be strictly
/// monotone on [lo, hi].
fn bracketed_newton<F, G>(
    mut lo: f64,
    mut hi: f64,
    f: F,
    fprime: G,
    target: &'static str,
) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
    G: Fn(f64) -> Result<f64>,
{
    debug_assert!(lo < hi);
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Convergence {
            target,
            iters: 0,
            last: f64::NAN,
        });
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        // shrink the bracket around the sign change
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
        }
        let slope = fprime(x)?;
        let newton = x - fx / slope;
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - x).abs();
        x = next;
        if step <= TOL_STEP * x.abs().max(1.0) {
            return Ok(x);
        }
        if (hi - lo) <= TOL_STEP * lo.abs().max(1.0) {
            return Ok(x);
        }
    }
    Err(Error::Convergence {
        target,
        iters: MAX_ITER,
        last: x,
    })
}

/// Inverse of `alpha_star`: the exponential growth rate
/// `V(alpha) = lim (1/t) log E exp(alpha L_t)`.
///
/// Defined for every finite alpha; negative alpha maps into
/// `(-pi^2/(8 b^2), 0)`. `derivative` is `1 / alpha_star_prime(V(alpha))`.
pub fn big_v(alpha: f64, params: &ReflectionParams) -> Result<RateEval> {
    if !alpha.is_finite() {
        return Err(Error::Domain {
            target: "big_v",
            value: alpha,
            detail: "alpha must be finite".into(),
        });
    }
    let b = params.b();
    if alpha == 0.0 {
        return Ok(RateEval {
            point: 0.0,
            value: 0.0,
            derivative: Some(1.0 / (2.0 * b)),
            lambda_star: None,
        });
    }
    let (lo, hi);
    if alpha > 0.0 {
        lo = 0.0;
        let mut h = 1.0 / (b * b);
        while alpha_star(h, params)? < alpha {
            h *= 4.0;
            if !h.is_finite() {
                return Err(Error::Convergence {
                    target: "big_v bracket",
                    iters: 0,
                    last: h,
                });
            }
        }
        hi = h;
    } else {
        lo = params.lambda_floor() + 2.0 * params.floor_guard();
        hi = 0.0;
        if alpha_star(lo, params)? > alpha {
            // would need a root within the guard strip next to the pole;
            // |alpha| ~ 1e9/b before this trips
            return Err(Error::Domain {
                target: "big_v",
                value: alpha,
                detail: "alpha below the resolvable range near the domain floor".into(),
            });
        }
    }
    let root = bracketed_newton(
        lo,
        hi,
        |l| alpha_star(l, params).map(|v| v - alpha),
        |l| alpha_star_prime(l, params),
        "big_v",
    )?;
    let deriv = 1.0 / alpha_star_prime(root, params)?;
    Ok(RateEval {
        point: alpha,
        value: root,
        derivative: Some(deriv),
        lambda_star: None,
    })
}

/// Inner maximizer of the Legendre transform: the unique root of
/// `alpha_star_prime(lambda) = 1/x`. Strictly increasing in x, crossing 0
/// exactly at the ergodic mean x = 1/(2b).
pub fn lambda_star(x: f64, params: &ReflectionParams) -> Result<f64> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::Domain {
            target: "lambda_star",
            value: x,
            detail: "defined for x > 0".into(),
        });
    }
    let b = params.b();
    let target = 1.0 / x;
    let lo = params.lambda_floor() + 2.0 * params.floor_guard();
    if alpha_star_prime(lo, params)? < target {
        return Err(Error::Domain {
            target: "lambda_star",
            value: x,
            detail: "slope 1/x exceeds the resolvable range near the domain floor".into(),
        });
    }
    let mut hi = 1.0 / (b * b);
    while alpha_star_prime(hi, params)? > target {
        hi *= 4.0;
        if !hi.is_finite() {
            return Err(Error::Convergence {
                target: "lambda_star bracket",
                iters: 0,
                last: hi,
            });
        }
    }
    bracketed_newton(
        lo,
        hi,
        |l| alpha_star_prime(l, params).map(|v| v - target),
        |l| alpha_star_second(l, params),
        "lambda_star",
    )
}

/// Legendre transform `V*(x) = sup_alpha (alpha x - V(alpha))
///                           = x alpha_star(lambda_star(x)) - lambda_star(x)`.
///
/// Decay rate of `P(L_t/t near x)`. Nonnegative, zero only at the ergodic
/// mean x = 1/(2b); at x = 0 it equals `pi^2/(8 b^2)` with no finite
/// one-sided derivative, so `derivative` is `None` there.
pub fn v_star(x: f64, params: &ReflectionParams) -> Result<RateEval> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::Domain {
            target: "v_star",
            value: x,
            detail: "defined for x >= 0".into(),
        });
    }
    if x == 0.0 {
        return Ok(RateEval {
            point: 0.0,
            value: -params.lambda_floor(),
            derivative: None,
            lambda_star: None,
        });
    }
    let ls = lambda_star(x, params)?;
    let tilt = alpha_star(ls, params)?;
    let mut value = x * tilt - ls;
    // can round to a tiny negative exactly at the minimum
    debug_assert!(value > -1e-10);
    if value < 0.0 {
        value = 0.0;
    }
    Ok(RateEval {
        point: x,
        value,
        derivative: Some(tilt),
        lambda_star: Some(ls),
    })
}

/// Both sides of the Brownian scaling identity
/// `alpha_star_{c b}(lambda) = (1/c) alpha_star_b(c^2 lambda)`,
/// returned as (left, right) for the caller to compare.
pub fn scaling_check(c: f64, lambda: f64, params: &ReflectionParams) -> Result<(f64, f64)> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Domain {
            target: "scaling_check",
            value: c,
            detail: "scale factor must be finite and positive".into(),
        });
    }
    let wide = ReflectionParams::new(c * params.b(), 0.0)?;
    let lhs = alpha_star(lambda, &wide)?;
    let rhs = alpha_star(c * c * lambda, params)? / c;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn p(b: f64) -> ReflectionParams {
        ReflectionParams::new(b, 0.0).unwrap()
    }

    // Reference values below were produced with 50-digit arbitrary precision
    // arithmetic and truncated to f64 resolution.

    #[test]
    fn alpha_star_known_values() {
        let b1 = p(1.0);
        // sqrt(2*0.5) tanh(1) = tanh(1)
        assert_relative_eq!(
            alpha_star(0.5, &b1).unwrap(),
            0.761_594_155_955_764_9,
            max_relative = 1e-15
        );
        // 2 tanh(2)
        assert_relative_eq!(
            alpha_star(2.0, &b1).unwrap(),
            1.928_055_160_151_633_8,
            max_relative = 1e-15
        );
        // 5 tanh(5)
        assert_relative_eq!(
            alpha_star(12.5, &b1).unwrap(),
            4.999_546_021_312_975_7,
            max_relative = 1e-15
        );
        // -sqrt(1) tan(1)
        assert_relative_eq!(
            alpha_star(-0.5, &b1).unwrap(),
            -1.557_407_724_654_902_3,
            max_relative = 1e-15
        );
        assert_eq!(alpha_star(0.0, &b1).unwrap(), 0.0);
    }

    #[test]
    fn alpha_star_prime_known_values() {
        let b1 = p(1.0);
        assert_eq!(alpha_star_prime(0.0, &b1).unwrap(), 2.0);
        // tanh(1) + sech(1)^2
        assert_relative_eq!(
            alpha_star_prime(0.5, &b1).unwrap(),
            1.181_568_497_569_791,
            max_relative = 1e-15
        );
    }

    #[test]
    fn series_window_joins_direct_branch() {
        // straddle the eps = 1e-8 switch on both signs of lambda
        for b in [0.3, 1.0, 4.0] {
            let pr = p(b);
            let edge = SERIES_EPS / (2.0 * b * b);
            for frac in [0.99, 1.01, -0.99, -1.01] {
                let l = frac * edge;
                let direct = if l > 0.0 {
                    let s = (2.0 * l).sqrt();
                    s * (b * s).tanh()
                } else {
                    let s = (-2.0 * l).sqrt();
                    -s * (b * s).tan()
                };
                assert_relative_eq!(alpha_star(l, &pr).unwrap(), direct, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for b in [0.5, 1.0, 2.0] {
            let pr = p(b);
            let floor = pr.lambda_floor();
            for frac in [-0.9, -0.5, -0.1, 0.02, 0.4, 3.0, 20.0] {
                // negative fracs probe the trig branch as a fraction of floor
                let l = if frac < 0.0 { -frac * floor } else { frac / (b * b) };
                let h = 1e-6 * l.abs().max(0.1).min(0.01 * (l - floor));
                let fd = (alpha_star(l + h, &pr).unwrap() - alpha_star(l - h, &pr).unwrap())
                    / (2.0 * h);
                assert_relative_eq!(
                    alpha_star_prime(l, &pr).unwrap(),
                    fd,
                    max_relative = 1e-6
                );
                let fd2 = (alpha_star_prime(l + h, &pr).unwrap()
                    - alpha_star_prime(l - h, &pr).unwrap())
                    / (2.0 * h);
                assert_relative_eq!(
                    alpha_star_second(l, &pr).unwrap(),
                    fd2,
                    max_relative = 1e-5
                );
            }
        }
    }

    #[test]
    fn big_v_known_values() {
        let b1 = p(1.0);
        let cases = [
            (0.761_594_155_955_764_9, 0.5), // tanh(1) -> 0.5
            (0.5, 0.297_762_234_736_355_1),
            (1.0, 0.719_614_419_945_322_6),
            (-1.0, -0.370_086_942_197_483_5),
            (-2.0, -0.579_828_791_197_537_3),
            (-5.0, -0.863_084_772_639_636_7),
        ];
        for (alpha, want) in cases {
            let got = big_v(alpha, &b1).unwrap();
            assert_relative_eq!(got.value, want, max_relative = 1e-12);
            // derivative is the reciprocal slope at the root
            let slope = alpha_star_prime(got.value, &b1).unwrap();
            assert_relative_eq!(got.derivative.unwrap(), 1.0 / slope, max_relative = 1e-14);
            assert!(got.lambda_star.is_none());
        }
        let zero = big_v(0.0, &b1).unwrap();
        assert_eq!(zero.value, 0.0);
        assert_eq!(zero.derivative.unwrap(), 0.5);
    }

    #[test]
    fn big_v_roundtrips_through_alpha_star() {
        for b in [0.5, 1.0, 2.0] {
            let pr = p(b);
            let floor = pr.lambda_floor();
            let n = 60;
            for i in 0..n {
                let l = floor + 0.01 + (50.0 - floor - 0.01) * (i as f64) / (n - 1) as f64;
                let a = alpha_star(l, &pr).unwrap();
                let back = big_v(a, &pr).unwrap().value;
                assert_relative_eq!(back, l, max_relative = 1e-10, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn lambda_star_known_values() {
        let b1 = p(1.0);
        // x at the ergodic mean: maximizer exactly 0
        assert!(lambda_star(0.5, &b1).unwrap().abs() <= 1e-10);
        // x = 1 / alpha_star_prime(0.5): maximizer 0.5
        let x0 = 1.0 / 1.181_568_497_569_791;
        assert_relative_eq!(lambda_star(x0, &b1).unwrap(), 0.5, max_relative = 1e-12);
        assert_relative_eq!(
            lambda_star(0.2, &b1).unwrap(),
            -0.501_357_972_836_216_9,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            lambda_star(0.8, &b1).unwrap(),
            0.434_101_912_591_832,
            max_relative = 1e-12
        );
        // as x drops toward 0 the maximizer slides to the domain floor
        let near = lambda_star(1e-4, &b1).unwrap();
        let floor = b1.lambda_floor();
        assert!(near > floor && near < floor + 0.05);
        // and it still satisfies its defining equation there
        assert_relative_eq!(alpha_star_prime(near, &b1).unwrap(), 1e4, max_relative = 1e-6);
    }

    #[test]
    fn v_star_known_values() {
        let b1 = p(1.0);
        let at_mean = v_star(0.5, &b1).unwrap();
        assert!(at_mean.value >= 0.0 && at_mean.value <= 1e-12);
        assert!(at_mean.derivative.unwrap().abs() <= 1e-10);

        let at_zero = v_star(0.0, &b1).unwrap();
        assert_relative_eq!(at_zero.value, PI * PI / 8.0, max_relative = 1e-15);
        assert!(at_zero.derivative.is_none());
        assert!(at_zero.lambda_star.is_none());

        let cases = [
            (0.1, 0.411_420_196_184_106_74),
            (0.2, 0.188_520_775_738_390_67),
            (0.8, 0.111_113_058_986_906_3),
            (1.0, 0.280_385_580_054_677_4),
            (2.0, 1.873_849_493_311_090_7),
        ];
        for (x, want) in cases {
            let got = v_star(x, &b1).unwrap();
            assert_relative_eq!(got.value, want, max_relative = 1e-12);
            let ls = got.lambda_star.unwrap();
            assert_relative_eq!(
                got.derivative.unwrap(),
                alpha_star(ls, &b1).unwrap(),
                max_relative = 1e-14
            );
        }
        // at x = 1 the optimal tilt is exactly 1 (u tanh u = 1 fixed point)
        assert_relative_eq!(
            v_star(1.0, &b1).unwrap().derivative.unwrap(),
            1.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn v_star_scales_like_one_over_b_squared_at_zero() {
        for b in [0.5, 2.0, 7.0] {
            let got = v_star(0.0, &p(b)).unwrap().value;
            assert_relative_eq!(got, PI * PI / (8.0 * b * b), max_relative = 1e-15);
        }
    }

    #[test]
    fn scaling_identity_example() {
        let b1 = p(1.0);
        let (lhs, rhs) = scaling_check(2.0, 0.1, &b1).unwrap();
        // (1/2) sqrt(0.8) tanh(sqrt(0.8))
        assert_relative_eq!(lhs, 0.319_119_782_187_219_7, max_relative = 1e-14);
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
    }

    #[test]
    fn domain_errors_are_reported() {
        let b1 = p(1.0);
        let floor = b1.lambda_floor();
        assert!(matches!(
            alpha_star(floor, &b1),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            alpha_star(floor - 1.0, &b1),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(alpha_star(f64::NAN, &b1), Err(Error::Domain { .. })));
        assert!(matches!(lambda_star(0.0, &b1), Err(Error::Domain { .. })));
        assert!(matches!(lambda_star(-1.0, &b1), Err(Error::Domain { .. })));
        assert!(matches!(v_star(-0.5, &b1), Err(Error::Domain { .. })));
        assert!(matches!(big_v(f64::INFINITY, &b1), Err(Error::Domain { .. })));
    }
}
