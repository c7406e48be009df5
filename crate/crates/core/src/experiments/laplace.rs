use crate::error::{Error, Result};
use crate::mgf::{f_hat, MgfQuery};
use crate::sim::{par_map_paths, plan_steps, SimConfig, Walker};
use crate::stats::{mean_se, simpson_weights};

use super::report::{ExperimentReport, ReportRow};

/// Target spacing of quadrature nodes on the time axis.
const NODE_SPACING: f64 = 0.05;

/// Checks `f_hat` against its definition: Simpson quadrature of
/// `e^{-lambda t} exp(alpha L_t)` along each path over [0, horizon], averaged
/// across paths, must match the closed form within MC noise.
///
/// The pass tolerance is `3 SE + tail + simpson`, where `tail` brackets the
/// discarded integral beyond the horizon by `e^{-lambda T} m(T) / lambda`
/// (monotonicity of the integrand for alpha <= 0) and `simpson` is a
/// deterministic h^4 truncation allowance. Requires `lambda * horizon >= 20`
/// so the bracket is genuinely negligible, and alpha <= 0 so `exp(alpha L)`
/// stays bounded.
pub fn laplace_consistency(cfg: &SimConfig, alpha: f64, lambda: f64) -> Result<ExperimentReport> {
    cfg.validate()?;
    if !(alpha.is_finite() && alpha <= 0.0) {
        return Err(Error::Config(format!(
            "laplace_consistency needs alpha <= 0 to keep the integrand bounded, got {alpha}"
        )));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Config(format!(
            "laplace_consistency needs lambda > 0, got {lambda}"
        )));
    }
    if lambda * cfg.horizon < 20.0 {
        return Err(Error::Config(format!(
            "lambda * horizon = {} < 20: truncated tail would not be negligible",
            lambda * cfg.horizon
        )));
    }
    let plan = plan_steps(cfg.horizon, cfg.dt)?;
    if plan.last.is_some() {
        return Err(Error::Config(
            "horizon must be a whole number of dt steps for the quadrature grid".into(),
        ));
    }
    let stride = ((NODE_SPACING / cfg.dt).round() as u64).max(1);
    let mut intervals = plan.full / stride;
    if intervals % 2 == 1 {
        intervals -= 1;
    }
    if intervals < 2 {
        return Err(Error::Config(
            "horizon too short for the quadrature node spacing".into(),
        ));
    }
    let h = stride as f64 * cfg.dt;
    let t_end = intervals as f64 * h;
    let weights = simpson_weights(intervals as usize, h);

    let per_path: Vec<(f64, f64)> = par_map_paths(cfg.n_paths, |i| {
        let mut w = Walker::new(cfg, i);
        let sqrt_dt = cfg.dt.sqrt();
        // node 0 contributes weight * e^0 * e^0
        let mut integral = weights[0];
        let mut node = 1;
        let mut m_end = 1.0;
        for k in 1..=(intervals * stride) {
            w.step(sqrt_dt);
            if k % stride == 0 {
                let t = k as f64 * cfg.dt;
                m_end = (alpha * w.l).exp();
                integral += weights[node] * (-lambda * t).exp() * m_end;
                node += 1;
            }
        }
        (integral, m_end)
    });
    let integrals: Vec<f64> = per_path.iter().map(|p| p.0).collect();
    let (quad, se) = mean_se(&integrals);
    let m_end_mean = per_path.iter().map(|p| p.1).sum::<f64>() / per_path.len() as f64;

    let x = cfg.params.x();
    let closed = f_hat(&MgfQuery::new(cfg.params, lambda, alpha)?, x)?.value;
    let tail = (-lambda * t_end).exp() * m_end_mean / lambda;
    // |d^4/dt^4 e^{-lambda t} m(t)| is lambda^4-scale for bounded m; factor 4
    // of headroom for the local time contributions
    let simpson_allowance = 4.0 * t_end * h.powi(4) * lambda.powi(4) / 180.0;
    let diff = (quad - closed).abs();
    let tol = 3.0 * se + tail + simpson_allowance;

    let mut rep = ExperimentReport::new(
        "laplace",
        cfg.seed,
        "|quadrature - f_hat| <= 3 SE + tail bracket + Simpson allowance",
    );
    rep.echo("b", cfg.params.b());
    rep.echo("x", x);
    rep.echo("dt", cfg.dt);
    rep.echo("horizon", cfg.horizon);
    rep.echo("n_paths", cfg.n_paths);
    rep.echo("node_spacing", h);
    rep.push(
        ReportRow::new(format!("alpha={alpha} lambda={lambda} x={x}"))
            .input("alpha", alpha)
            .input("lambda", lambda)
            .input("x", x)
            .input("t_end", t_end)
            .closed_form(closed)
            .estimate(quad, se)
            .pass(diff <= tol)
            .note(format!(
                "|diff|={diff:.3e} tol={tol:.3e} (tail {tail:.3e}, simpson {simpson_allowance:.3e})"
            )),
    );
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ReflectionParams;

    fn cfg(horizon: f64, dt: f64, n_paths: u64) -> SimConfig {
        SimConfig {
            params: ReflectionParams::new(1.0, 0.0).unwrap(),
            horizon,
            dt,
            n_paths,
            seed: 42,
            store_full_paths: false,
        }
    }

    #[test]
    fn degenerate_alpha_zero_matches_exactly() {
        // integrand is deterministic e^{-lambda t}: SE = 0, and the tail
        // bracket plus Simpson allowance must absorb the entire difference
        let rep = laplace_consistency(&cfg(20.0, 1e-2, 8), 0.0, 1.0).unwrap();
        assert!(rep.overall_pass, "{}", rep.to_json());
        let row = &rep.rows[0];
        assert_eq!(row.std_error.unwrap(), 0.0);
        assert_eq!(row.closed_form.unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(laplace_consistency(&cfg(20.0, 1e-2, 8), 0.5, 1.0).is_err());
        assert!(laplace_consistency(&cfg(20.0, 1e-2, 8), -1.0, -1.0).is_err());
        // lambda * horizon < 20
        assert!(laplace_consistency(&cfg(20.0, 1e-2, 8), -1.0, 0.5).is_err());
    }

    #[test]
    fn small_mc_run_is_consistent() {
        // dt must be small here: the clamping bias inflates the quadrature by
        // roughly |alpha|*0.58*sqrt(dt)*f_hat, so at dt=1e-3 and above it
        // dwarfs the 3 SE band. Few paths keep the band wide and the run fast.
        let rep = laplace_consistency(&cfg(10.0, 1e-4, 1500), -1.0, 2.0).unwrap();
        assert!(rep.overall_pass, "{}", rep.to_json());
    }
}
