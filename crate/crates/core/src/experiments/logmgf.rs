use crate::error::{Error, Result};
use crate::rate::{alpha_star, big_v};
use crate::sim::{par_map_paths, plan_steps, SimConfig, Walker};
use crate::stats::mean_se;

use super::report::{ExperimentReport, ReportRow};

/// Relative-SE ceiling beyond which the estimator is declared useless.
const REL_SE_LIMIT: f64 = 0.30;

/// Estimates `(1/t) log E exp(alpha L_t)` along a ladder of horizons and
/// checks convergence to `big_v(alpha)`.
///
/// All horizons are marks of one simulation run (common paths), so the ladder
/// is cheap and strongly positively correlated, which stabilizes the trend
/// check. Pass: the final estimate lands within
/// `max(5% |V|, 3 SE/t, 0.02/b^2)` of `big_v(alpha)` and `|estimate - V|` is
/// nonincreasing over the last three rungs.
///
/// Errors with `Variance` as soon as any rung's relative standard error
/// exceeds 30%: for strongly negative alpha the mean is carried by an
/// exponentially rare event and no seed or tolerance can rescue the run.
/// Positive alpha is capped so `exp(V t)` stays far from f64 overflow.
pub fn log_mgf_limit(cfg: &SimConfig, alpha: f64, t_list: &[f64]) -> Result<ExperimentReport> {
    cfg.validate()?;
    if t_list.is_empty() {
        return Err(Error::Config("log_mgf_limit needs at least one horizon".into()));
    }
    if t_list.windows(2).any(|w| w[0] >= w[1]) || t_list[0] <= 0.0 {
        return Err(Error::Config("horizons must be positive and strictly increasing".into()));
    }
    let t_max = *t_list.last().unwrap();
    if t_max > cfg.horizon * (1.0 + 1e-9) {
        return Err(Error::Config(format!(
            "largest horizon {t_max} exceeds cfg.horizon = {}",
            cfg.horizon
        )));
    }
    if !alpha.is_finite() {
        return Err(Error::Config(format!("alpha must be finite, got {alpha}")));
    }
    if alpha > 0.0 {
        // keep exp(V(alpha) t_max) below ~1e15 so the estimator has headroom
        let lambda_cap = (1e15_f64).ln() / t_max;
        let cap = 0.9 * alpha_star(lambda_cap, &cfg.params)?;
        if alpha > cap {
            return Err(Error::Config(format!(
                "alpha = {alpha} too large for horizon {t_max}: tilted moments would overflow \
                 (cap at {cap:.4})"
            )));
        }
    }

    let target = big_v(alpha, &cfg.params)?.value;
    let b = cfg.params.b();

    // mark step indices; reject horizons that fall off the grid entirely
    let mut mark_steps = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let plan = plan_steps(t, cfg.dt)?;
        if plan.last.is_some() {
            return Err(Error::Config(format!(
                "horizon {t} is not a whole number of dt = {} steps",
                cfg.dt
            )));
        }
        mark_steps.push(plan.full);
    }
    if mark_steps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("horizons collide on the step grid".into()));
    }

    let marks = mark_steps.clone();
    let per_path: Vec<Vec<f64>> = par_map_paths(cfg.n_paths, |i| {
        let mut w = Walker::new(cfg, i);
        let sqrt_dt = cfg.dt.sqrt();
        let mut out = Vec::with_capacity(marks.len());
        let mut next = 0;
        for k in 1..=*marks.last().unwrap() {
            w.step(sqrt_dt);
            if next < marks.len() && marks[next] == k {
                out.push((alpha * w.l).exp());
                next += 1;
            }
        }
        out
    });

    let mut rep = ExperimentReport::new(
        "logmgf",
        cfg.seed,
        "final |(1/t) log mean - V| <= max(5% |V|, 3 SE/t, 0.02/b^2), |error| nonincreasing over last 3 horizons",
    );
    rep.echo("b", b);
    rep.echo("x", cfg.params.x());
    rep.echo("alpha", alpha);
    rep.echo("dt", cfg.dt);
    rep.echo("n_paths", cfg.n_paths);
    rep.echo("t_list", format!("{t_list:?}"));

    let mut diffs = Vec::with_capacity(t_list.len());
    let mut rows = Vec::with_capacity(t_list.len());
    let mut scratch = vec![0.0; per_path.len()];
    for (j, &t) in t_list.iter().enumerate() {
        for (slot, path) in scratch.iter_mut().zip(&per_path) {
            *slot = path[j];
        }
        let (mean, se) = mean_se(&scratch);
        let rel = se / mean;
        if rel > REL_SE_LIMIT {
            return Err(Error::Variance {
                rel_se: 100.0 * rel,
                limit: 100.0 * REL_SE_LIMIT,
                t,
            });
        }
        let est = mean.ln() / t;
        let se_log = rel / t;
        diffs.push((est - target).abs());
        rows.push((t, est, se_log, rel));
    }

    let n = rows.len();
    let final_tol = {
        let (_, _, se_log, _) = rows[n - 1];
        (0.05 * target.abs()).max(3.0 * se_log).max(0.02 / (b * b))
    };
    let trend_ok = diffs
        .iter()
        .rev()
        .take(3)
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| w[1] >= w[0]); // reversed order: later diffs first
    for (j, (t, est, se_log, rel)) in rows.into_iter().enumerate() {
        let last = j == n - 1;
        let pass = if last {
            diffs[j] <= final_tol && trend_ok
        } else {
            true
        };
        let mut row = ReportRow::new(format!("t={t}"))
            .input("t", t)
            .input("alpha", alpha)
            .closed_form(target)
            .estimate(est, se_log)
            .pass(pass)
            .note(format!("|err|={:.4e} rel_se={:.2}%", diffs[j], 100.0 * rel));
        if last {
            row = row.note(format!(
                "|err|={:.4e} tol={:.4e} trend_ok={trend_ok}",
                diffs[j], final_tol
            ));
        }
        rep.push(row);
    }
    Ok(rep)
}
