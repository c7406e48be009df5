use crate::error::{Error, Result};
use crate::rate::v_star;
use crate::sim::{par_map_paths, plan_steps, SimConfig, Walker};

use super::report::{ExperimentReport, ReportRow};

/// Tail rows need at least this many hits before the estimate means anything.
const MIN_HITS: u64 = 50;

/// Measures the exponential decay of `P(L_t/t beyond threshold)` and compares
/// `-(1/t) log p_hat` against the rate `v_star(threshold)`.
///
/// Thresholds above the ergodic mean `1/(2b)` probe the upper tail, below it
/// the lower tail. All horizons are marks of one run. Rows with fewer than 50
/// tail hits are reported as insufficient-sample and do not fail; the verdict
/// comes from the last sufficient row (within 20% relative of `v_star`) plus
/// a nonincreasing `|estimate - v_star|` across sufficient rows. With no
/// sufficient row at all there is no verdict and the report fails.
pub fn ldp_tail_decay(cfg: &SimConfig, threshold: f64, t_list: &[f64]) -> Result<ExperimentReport> {
    cfg.validate()?;
    let b = cfg.params.b();
    let mean = 1.0 / (2.0 * b);
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::Config(format!(
            "threshold must be positive and finite, got {threshold}"
        )));
    }
    if threshold == mean {
        return Err(Error::Config(format!(
            "threshold {threshold} equals the ergodic mean 1/(2b); no large deviation to measure"
        )));
    }
    if t_list.is_empty() || t_list.windows(2).any(|w| w[0] >= w[1]) || t_list[0] <= 0.0 {
        return Err(Error::Config(
            "horizons must be nonempty, positive, strictly increasing".into(),
        ));
    }
    let t_max = *t_list.last().unwrap();
    if t_max > cfg.horizon * (1.0 + 1e-9) {
        return Err(Error::Config(format!(
            "largest horizon {t_max} exceeds cfg.horizon = {}",
            cfg.horizon
        )));
    }
    let upper_tail = threshold > mean;
    let target = v_star(threshold, &cfg.params)?.value;

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

    let marks = mark_steps.clone();
    let hits_per_path: Vec<Vec<bool>> = par_map_paths(cfg.n_paths, |i| {
        let mut w = Walker::new(cfg, i);
        let sqrt_dt = cfg.dt.sqrt();
        let mut out = Vec::with_capacity(marks.len());
        let mut next = 0;
        for k in 1..=*marks.last().unwrap() {
            w.step(sqrt_dt);
            if next < marks.len() && marks[next] == k {
                let rate = w.l / (k as f64 * cfg.dt);
                out.push(if upper_tail { rate >= threshold } else { rate <= threshold });
                next += 1;
            }
        }
        out
    });

    let mut rep = ExperimentReport::new(
        "ldp",
        cfg.seed,
        "last row with >= 50 hits within 20% of v_star, |error| nonincreasing across sufficient rows",
    );
    rep.echo("b", b);
    rep.echo("x", cfg.params.x());
    rep.echo("threshold", threshold);
    rep.echo("tail", if upper_tail { "upper" } else { "lower" });
    rep.echo("dt", cfg.dt);
    rep.echo("n_paths", cfg.n_paths);
    rep.echo("t_list", format!("{t_list:?}"));

    let n = cfg.n_paths as f64;
    let mut prev_diff: Option<f64> = None;
    let mut sufficient_rows = 0u64;
    let mut last_sufficient: Option<(f64, f64)> = None; // (diff, tol at 20%)
    for (j, &t) in t_list.iter().enumerate() {
        let hits = hits_per_path.iter().filter(|h| h[j]).count() as u64;
        let mut row = ReportRow::new(format!("t={t}"))
            .input("t", t)
            .input("threshold", threshold)
            .input("hits", hits)
            .closed_form(target);
        if hits < MIN_HITS {
            row = row
                .pass(true)
                .note(format!("insufficient tail samples ({hits} < {MIN_HITS}), no verdict"));
            rep.push(row);
            continue;
        }
        sufficient_rows += 1;
        let p_hat = hits as f64 / n;
        let est = -p_hat.ln() / t;
        // delta method on log p
        let se = ((1.0 - p_hat) / (n * p_hat)).sqrt() / t;
        let diff = (est - target).abs();
        let trend_ok = prev_diff.is_none_or(|d| diff <= d);
        prev_diff = Some(diff);
        last_sufficient = Some((diff, 0.2 * target));
        row = row
            .estimate(est, se)
            .pass(trend_ok)
            .note(format!("p_hat={p_hat:.3e} |err|={diff:.4e}"));
        if !trend_ok {
            row = row.note(format!("p_hat={p_hat:.3e} |err|={diff:.4e} grew vs previous rung"));
        }
        rep.push(row);
    }

    match last_sufficient {
        None => {
            rep.push(
                ReportRow::new("verdict")
                    .pass(false)
                    .note("no horizon reached 50 tail hits; cannot judge the decay rate"),
            );
        }
        Some((diff, tol)) => {
            rep.push(
                ReportRow::new("verdict")
                    .input("sufficient_rows", sufficient_rows)
                    .closed_form(target)
                    .pass(diff <= tol)
                    .note(format!("final sufficient |err|={diff:.4e}, 20% tol={tol:.4e}")),
            );
        }
    }
    Ok(rep)
}
