//! Euler/Skorokhod discretization of the doubly reflected process.
//!
//! One step of the recursion, from `X_k` with Gaussian increment `dW`:
//!
//! ```text
//! Y  = X_k + dW
//! dL = max(0, -Y),      Y' = Y + dL      (lower clamp)
//! dU = max(0, Y' - b),  X_{k+1} = Y' - dU (upper clamp)
//! ```
//!
//! The clamps write the boundary value directly, so `dL > 0` implies the
//! post-clamp position is exactly 0.0 and `dU > 0` implies `X_{k+1}` is
//! exactly `b`. Clamped local time is the grid maximum of the free walk, which
//! undershoots the continuous supremum; L and U estimates carry an O(sqrt(dt))
//! downward bias that the experiment tolerances account for.
//!
//! RNG layout: every path owns two ChaCha8 streams keyed by the run seed,
//! `seed_from_u64(cfg.seed)` with the 64-bit stream counter set to
//! `2 * path_index` for the Gaussian increments and `2 * path_index + 1` for
//! that path's exponential horizon draw. Paths are therefore independent of
//! thread scheduling, and all reductions happen in fixed index order, so every
//! estimate is bit-reproducible for a given config across thread counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::params::ReflectionParams;
use crate::stats::mean_se;

/// Hard cap on steps per path; configs beyond this are rejected up front.
const MAX_STEPS: f64 = 1e9;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SimConfig {
    pub params: ReflectionParams,
    /// Physical time horizon of one path.
    pub horizon: f64,
    /// Grid step. Estimator bias scales like sqrt(dt).
    pub dt: f64,
    pub n_paths: u64,
    pub seed: u64,
    /// Hint for callers that dump trajectories; the estimators never store
    /// full paths regardless.
    pub store_full_paths: bool,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::Config(format!(
                "horizon must be positive and finite, got {}",
                self.horizon
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!(
                "dt must be positive and finite, got {}",
                self.dt
            )));
        }
        if self.dt > self.horizon {
            return Err(Error::Config(format!(
                "dt = {} exceeds horizon = {}",
                self.dt, self.horizon
            )));
        }
        if self.horizon / self.dt > MAX_STEPS {
            return Err(Error::Config(format!(
                "horizon/dt = {:.3e} exceeds the {MAX_STEPS:.0e} step budget",
                self.horizon / self.dt
            )));
        }
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be at least 1".into()));
        }
        Ok(())
    }

    /// Non-fatal configuration smells.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        let b = self.params.b();
        if self.dt > b * b / 4.0 {
            w.push(format!(
                "dt = {} is coarse for strip width b = {b}: single steps can cross \
                 the strip and the sqrt(dt) local time bias will dominate (want dt <= b^2/4)",
                self.dt
            ));
        }
        w
    }
}

pub(crate) fn increments_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * path_index);
    rng
}

pub(crate) fn horizon_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * path_index + 1);
    rng
}

/// One path's evolving state: position plus both accumulated regulators.
pub(crate) struct Walker {
    rng: ChaCha8Rng,
    pub(crate) x: f64,
    pub(crate) l: f64,
    pub(crate) u: f64,
    b: f64,
}

impl Walker {
    pub(crate) fn new(cfg: &SimConfig, path_index: u64) -> Self {
        Walker {
            rng: increments_rng(cfg.seed, path_index),
            x: cfg.params.x(),
            l: 0.0,
            u: 0.0,
            b: cfg.params.b(),
        }
    }

    /// Applies one increment; returns (dL, dU) of the step.
    #[inline]
    pub(crate) fn step_with(&mut self, dw: f64) -> (f64, f64) {
        let y = self.x + dw;
        let (yp, dl) = if y < 0.0 { (0.0, -y) } else { (y, 0.0) };
        let (xn, du) = if yp > self.b {
            (self.b, yp - self.b)
        } else {
            (yp, 0.0)
        };
        self.x = xn;
        self.l += dl;
        self.u += du;
        debug_assert!(self.x >= 0.0 && self.x <= self.b);
        (dl, du)
    }

    /// One Gaussian step of standard deviation `sqrt_dt`.
    #[inline]
    pub(crate) fn step(&mut self, sqrt_dt: f64) {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        self.step_with(sqrt_dt * z);
    }
}

/// Step schedule for walking to an arbitrary time on the dt grid: `full`
/// whole steps plus an optional shorter final step that lands exactly on the
/// target time.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepPlan {
    pub(crate) full: u64,
    pub(crate) last: Option<f64>,
}

pub(crate) fn plan_steps(t: f64, dt: f64) -> Result<StepPlan> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Config(format!("target time must be positive, got {t}")));
    }
    let ratio = t / dt;
    if ratio > MAX_STEPS + 0.5 {
        return Err(Error::Config(format!(
            "t/dt = {ratio:.3e} exceeds the {MAX_STEPS:.0e} step budget"
        )));
    }
    let rounded = ratio.round();
    if rounded >= 1.0 && (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
        return Ok(StepPlan {
            full: rounded as u64,
            last: None,
        });
    }
    let full = ratio.floor() as u64;
    let rem = t - full as f64 * dt;
    Ok(StepPlan {
        full,
        last: (rem > 0.0).then_some(rem),
    })
}

pub(crate) fn walk_to(w: &mut Walker, plan: &StepPlan, dt: f64) {
    let sqrt_dt = dt.sqrt();
    for _ in 0..plan.full {
        w.step(sqrt_dt);
    }
    if let Some(rem) = plan.last {
        w.step(rem.sqrt());
    }
}

/// Runs one closure per path index over the rayon pool and collects results
/// in index order. The per-path work depends only on (seed, index), so the
/// output is identical whatever the thread count; callers must reduce the
/// returned vector sequentially to keep full bit-reproducibility.
pub(crate) fn par_map_paths<T, F>(n_paths: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..n_paths).into_par_iter().map(f).collect()
}

/// One recorded trajectory on the step grid, including t = 0.
#[derive(Debug, Clone, Serialize)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
}

impl PathSample {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Plain CSV dump, `t,X,L,U`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "t,X,L,U")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_f64(self.times[i]),
                fmt_f64(self.x[i]),
                fmt_f64(self.l[i]),
                fmt_f64(self.u[i])
            )?;
        }
        Ok(())
    }
}

/// Simulates path `path_index` of the run described by `cfg`, recording every
/// grid point up to the horizon.
pub fn simulate_path(cfg: &SimConfig, path_index: u64) -> Result<PathSample> {
    cfg.validate()?;
    let plan = plan_steps(cfg.horizon, cfg.dt)?;
    let mut walker = Walker::new(cfg, path_index);
    let n = plan.full as usize + plan.last.map_or(0, |_| 1);
    let mut out = PathSample {
        times: Vec::with_capacity(n + 1),
        x: Vec::with_capacity(n + 1),
        l: Vec::with_capacity(n + 1),
        u: Vec::with_capacity(n + 1),
    };
    let mut push = |t: f64, w: &Walker| {
        out.times.push(t);
        out.x.push(w.x);
        out.l.push(w.l);
        out.u.push(w.u);
    };
    push(0.0, &walker);
    let sqrt_dt = cfg.dt.sqrt();
    for k in 1..=plan.full {
        walker.step(sqrt_dt);
        push(k as f64 * cfg.dt, &walker);
    }
    if let Some(rem) = plan.last {
        walker.step(rem.sqrt());
        push(cfg.horizon, &walker);
    }
    Ok(out)
}

/// Simulates one path up to an independent Exp(rate) horizon drawn from the
/// path's dedicated horizon stream, landing exactly on the drawn time with a
/// final fractional step.
pub fn sample_exp_horizon(cfg: &SimConfig, rate: f64, path_index: u64) -> Result<PathSample> {
    cfg.validate()?;
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::Domain {
            target: "sample_exp_horizon",
            value: rate,
            detail: "exponential rate must be positive".into(),
        });
    }
    let tau: f64 = Exp::new(rate)
        .expect("rate checked above")
        .sample(&mut horizon_rng(cfg.seed, path_index));
    let plan = plan_steps(tau, cfg.dt)?;
    let mut walker = Walker::new(cfg, path_index);
    let mut out = PathSample {
        times: vec![0.0],
        x: vec![walker.x],
        l: vec![0.0],
        u: vec![0.0],
    };
    let sqrt_dt = cfg.dt.sqrt();
    for k in 1..=plan.full {
        walker.step(sqrt_dt);
        out.times.push(k as f64 * cfg.dt);
        out.x.push(walker.x);
        out.l.push(walker.l);
        out.u.push(walker.u);
    }
    if let Some(rem) = plan.last {
        walker.step(rem.sqrt());
        out.times.push(tau);
        out.x.push(walker.x);
        out.l.push(walker.l);
        out.u.push(walker.u);
    }
    Ok(out)
}

/// Path functionals the Monte Carlo driver can estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Functional {
    /// `E exp(alpha L_t)`
    ExpTiltL { alpha: f64, t: f64 },
    /// `E L_t / t`
    LOverT { t: f64 },
    /// `E U_t / t`
    UOverT { t: f64 },
    /// time average of X over [0, t] (trapezoid on the grid)
    OccupationMean { t: f64 },
}

impl Functional {
    pub fn t(&self) -> f64 {
        match *self {
            Functional::ExpTiltL { t, .. }
            | Functional::LOverT { t }
            | Functional::UOverT { t }
            | Functional::OccupationMean { t } => t,
        }
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Functional::ExpTiltL { alpha, t } => write!(f, "exp_tilt_l(alpha={alpha}, t={t})"),
            Functional::LOverT { t } => write!(f, "l_over_t(t={t})"),
            Functional::UOverT { t } => write!(f, "u_over_t(t={t})"),
            Functional::OccupationMean { t } => write!(f, "occupation_mean(t={t})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: u64,
    pub seed: u64,
}

/// Monte Carlo estimate of a path functional over `cfg.n_paths` independent
/// paths. Deterministic for a fixed config (see module docs).
pub fn mc_functional(cfg: &SimConfig, functional: Functional) -> Result<McEstimate> {
    cfg.validate()?;
    let t = functional.t();
    if !(t > 0.0 && t <= cfg.horizon * (1.0 + 1e-9)) {
        return Err(Error::Config(format!(
            "functional time {t} outside (0, horizon = {}]",
            cfg.horizon
        )));
    }
    if let Functional::ExpTiltL { alpha, .. } = functional {
        if !alpha.is_finite() {
            return Err(Error::Config(format!("tilt alpha must be finite, got {alpha}")));
        }
    }
    let plan = plan_steps(t, cfg.dt)?;
    let vals: Vec<f64> = match functional {
        Functional::ExpTiltL { alpha, .. } => par_map_paths(cfg.n_paths, |i| {
            let mut w = Walker::new(cfg, i);
            walk_to(&mut w, &plan, cfg.dt);
            (alpha * w.l).exp()
        }),
        Functional::LOverT { .. } => par_map_paths(cfg.n_paths, |i| {
            let mut w = Walker::new(cfg, i);
            walk_to(&mut w, &plan, cfg.dt);
            w.l / t
        }),
        Functional::UOverT { .. } => par_map_paths(cfg.n_paths, |i| {
            let mut w = Walker::new(cfg, i);
            walk_to(&mut w, &plan, cfg.dt);
            w.u / t
        }),
        Functional::OccupationMean { .. } => par_map_paths(cfg.n_paths, |i| {
            let mut w = Walker::new(cfg, i);
            let sqrt_dt = cfg.dt.sqrt();
            let mut acc = 0.0;
            let mut prev = w.x;
            for _ in 0..plan.full {
                w.step(sqrt_dt);
                acc += 0.5 * (prev + w.x) * cfg.dt;
                prev = w.x;
            }
            if let Some(rem) = plan.last {
                w.step(rem.sqrt());
                acc += 0.5 * (prev + w.x) * rem;
            }
            acc / t
        }),
    };
    let (mean, std_error) = mean_se(&vals);
    Ok(McEstimate {
        mean,
        std_error,
        n_paths: cfg.n_paths,
        seed: cfg.seed,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub estimate: f64,
    pub std_error: f64,
}

/// Reruns `mc_functional` over a ladder of step sizes with everything else
/// fixed. Exp-tilt functionals with alpha < 0 approach their limit from above
/// as dt shrinks (the grid clamp underestimates local time, and a smaller L
/// inflates exp(alpha L) for negative alpha).
pub fn convergence_study(
    cfg: &SimConfig,
    functional: Functional,
    dts: &[f64],
) -> Result<Vec<ConvergenceRow>> {
    if dts.is_empty() {
        return Err(Error::Config("convergence_study needs at least one dt".into()));
    }
    let mut rows = Vec::with_capacity(dts.len());
    for &dt in dts {
        let run = SimConfig { dt, ..*cfg };
        let est = mc_functional(&run, functional)?;
        rows.push(ConvergenceRow {
            dt,
            estimate: est.mean,
            std_error: est.std_error,
        });
    }
    Ok(rows)
}
