//! Command implementations. Everything here is deterministic given the
//! resolved flag set: stdout bytes, file bytes, and report contents depend
//! only on (command, flags, seed), never on thread count or wall clock.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rbm_core::experiments::{
    ergodic_limits, laplace_consistency, ldp_tail_decay, log_mgf_limit, rate_curve_export,
    ExperimentReport,
};
use rbm_core::mgf::{f_hat, ode_residual, MgfQuery};
use rbm_core::rate::big_v;
use rbm_core::{fmt_f64, Error, Functional, ReflectionParams, Result, SimConfig};
use serde::Serialize;

use crate::args::{comment_header, Command, Grid, MgfArgs, RateArgs, Resolver, SimulateArgs, VerifyArgs};

/// What a successfully-parsed run produced; main() maps this to the exit code.
pub enum Outcome {
    Clean,
    /// At least one verification suite reported overall_pass = false.
    SuiteFailed,
}

pub fn dispatch(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Rate(a) => rate(a),
        Command::Mgf(a) => mgf(a),
        Command::Simulate(a) => simulate(a),
        Command::Verify(a) => verify(a),
        Command::Export(a) => export(a),
    }
}

fn print_stdout(text: &str) -> Result<()> {
    std::io::stdout()
        .write_all(text.as_bytes())
        .map_err(Error::from)
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, text)?;
    Ok(path)
}

fn rate(a: RateArgs) -> Result<Outcome> {
    let mut r = Resolver::load(a.config.as_ref())?;
    let b = r.f64("b", a.b, 1.0)?;
    let alpha_grid = r.opt_grid("alpha-grid", a.alpha_grid)?;
    let x_grid = r.opt_grid("x-grid", a.x_grid)?;
    let echo = r.finish()?;

    let params = ReflectionParams::new(b, 0.0)?;
    let body = match (alpha_grid, x_grid) {
        (Some(g), None) => rate_curve_export(&params, &g.points(), &[])?.alpha_csv(),
        (None, Some(g)) => rate_curve_export(&params, &[], &g.points())?.x_csv(),
        _ => {
            return Err(Error::Config(
                "rate needs exactly one of --alpha-grid or --x-grid".into(),
            ))
        }
    };
    print_stdout(&format!("{}{body}", comment_header("rate", &echo)))?;
    Ok(Outcome::Clean)
}

fn mgf(a: MgfArgs) -> Result<Outcome> {
    let mut r = Resolver::load(a.config.as_ref())?;
    let b = r.f64("b", a.b, 1.0)?;
    let lambda = r
        .opt_f64("lambda", a.lambda)?
        .ok_or_else(|| Error::Config("mgf needs --lambda".into()))?;
    let alpha = r
        .opt_f64("alpha", a.alpha)?
        .ok_or_else(|| Error::Config("mgf needs --alpha".into()))?;
    let x_grid = r.grid(
        "x-grid",
        a.x_grid,
        Grid {
            lo: 0.0,
            hi: b,
            count: 11,
        },
    )?;
    let residuals = r.opt_string("residuals", a.residuals)?;
    let echo = r.finish()?;

    let q = MgfQuery::new(ReflectionParams::new(b, 0.0)?, lambda, alpha)?;
    let mut body = String::new();
    match residuals {
        Some(list) => {
            body.push_str("grid_n,max_interior,lower_boundary,upper_boundary\n");
            for tok in list.split(',') {
                let n: usize = tok.trim().parse().map_err(|_| {
                    Error::Config(format!("bad residual grid size `{tok}`"))
                })?;
                let res = ode_residual(&q, n)?;
                body.push_str(&format!(
                    "{},{},{},{}\n",
                    res.grid_n,
                    fmt_f64(res.max_interior),
                    fmt_f64(res.lower_boundary),
                    fmt_f64(res.upper_boundary)
                ));
            }
        }
        None => {
            body.push_str("x,f_hat\n");
            for x in x_grid.points() {
                let v = f_hat(&q, x)?;
                body.push_str(&format!("{},{}\n", fmt_f64(x), fmt_f64(v.value)));
            }
        }
    }
    print_stdout(&format!("{}{body}", comment_header("mgf", &echo)))?;
    Ok(Outcome::Clean)
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    version: &'a str,
    command: &'a str,
    config: &'a BTreeMap<String, String>,
    functional: String,
    mean: f64,
    std_error: f64,
    n_paths: u64,
    seed: u64,
}

fn simulate(a: SimulateArgs) -> Result<Outcome> {
    let mut r = Resolver::load(a.config.as_ref())?;
    let b = r.f64("b", a.b, 1.0)?;
    let x = r.f64("x", a.x, 0.0)?;
    let t = r.f64("t", a.t, 1.0)?;
    let dt = r.f64("dt", a.dt, 1e-3)?;
    let paths = r.u64("paths", a.paths, 1000)?;
    let seed = r.u64("seed", a.seed, 42)?;
    let dump = r.u64("dump-paths", a.dump_paths, 0)?;
    let functional = r.string("functional", a.functional, "L_over_t")?;
    let alpha = r.opt_f64("alpha", a.alpha)?;
    let out = r.path("out", a.out, ".")?;
    let echo = r.finish()?;

    let cfg = SimConfig {
        params: ReflectionParams::new(b, x)?,
        horizon: t,
        dt,
        n_paths: paths,
        seed,
        store_full_paths: dump > 0,
    };
    cfg.validate()?;
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }

    if dump > 0 {
        let header = comment_header("simulate", &echo);
        for i in 0..dump {
            let sample = rbm_core::sim::simulate_path(&cfg, i)?;
            let mut text = Vec::with_capacity(64 * sample.len());
            text.extend_from_slice(header.as_bytes());
            sample.write_csv(&mut text)?;
            let name = format!("path_{seed}_{i}.csv");
            write_file(&out, &name, std::str::from_utf8(&text).expect("csv is utf8"))?;
        }
        eprintln!("wrote {dump} path file(s) under {}", out.display());
        return Ok(Outcome::Clean);
    }

    let f = match functional.as_str() {
        "L_over_t" => Functional::LOverT { t },
        "U_over_t" => Functional::UOverT { t },
        "occupation_mean" => Functional::OccupationMean { t },
        "exp_tilt_L" => Functional::ExpTiltL {
            alpha: alpha.ok_or_else(|| Error::Config("exp_tilt_L needs --alpha".into()))?,
            t,
        },
        other => {
            return Err(Error::Config(format!(
                "unknown functional `{other}` (expected L_over_t, U_over_t, exp_tilt_L, occupation_mean)"
            )))
        }
    };
    let est = rbm_core::sim::mc_functional(&cfg, f)?;
    let summary = SimulateSummary {
        version: rbm_core::experiments::VERSION,
        command: "simulate",
        config: &echo,
        functional,
        mean: est.mean,
        std_error: est.std_error,
        n_paths: est.n_paths,
        seed: est.seed,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    print_stdout(&format!("{json}\n"))?;
    Ok(Outcome::Clean)
}

fn export(a: crate::args::ExportArgs) -> Result<Outcome> {
    let mut r = Resolver::load(a.config.as_ref())?;
    let b = r.f64("b", a.b, 1.0)?;
    let alpha_grid = r.grid(
        "alpha-grid",
        a.alpha_grid,
        Grid {
            lo: -5.0,
            hi: 5.0,
            count: 201,
        },
    )?;
    let x_grid = r.grid(
        "x-grid",
        a.x_grid,
        Grid {
            lo: 0.0,
            hi: 1.0 / b,
            count: 101,
        },
    )?;
    let out = r.path("out", a.out, ".")?;
    let echo = r.finish()?;

    let params = ReflectionParams::new(b, 0.0)?;
    let curves = rate_curve_export(&params, &alpha_grid.points(), &x_grid.points())?;
    let header = comment_header("export", &echo);
    let pa = write_file(&out, "rate_alpha.csv", &format!("{header}{}", curves.alpha_csv()))?;
    let px = write_file(&out, "rate_x.csv", &format!("{header}{}", curves.x_csv()))?;
    eprintln!("wrote {} and {}", pa.display(), px.display());
    Ok(Outcome::Clean)
}

/// Snaps a probe time onto the step grid (whole positive multiple of dt).
fn snap(t: f64, dt: f64) -> f64 {
    ((t / dt).round().max(1.0)) * dt
}

/// Quarter-spaced ladder up to t_hi, deduplicated on the step grid.
fn ladder(t_hi: f64, dt: f64) -> Vec<f64> {
    let mut out: Vec<f64> = [0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|f| snap(f * t_hi, dt))
        .collect();
    out.dedup();
    out
}

struct SuiteInputs {
    b: f64,
    x: Option<f64>,
    t: Option<f64>,
    dt: Option<f64>,
    paths: Option<u64>,
    seed: u64,
    alpha: Option<f64>,
    lambda: Option<f64>,
    threshold: Option<f64>,
}

fn laplace_suite(inp: &SuiteInputs) -> Result<ExperimentReport> {
    let dt = inp.dt.unwrap_or(1e-4);
    let paths = inp.paths.unwrap_or(2000);
    let single = inp.alpha.is_some() || inp.lambda.is_some();
    let cells: Vec<(f64, f64, f64)> = if single {
        let alpha = inp.alpha.unwrap_or(-1.0);
        let lambda = inp.lambda.unwrap_or(2.0);
        vec![(alpha, lambda, inp.x.unwrap_or(0.0))]
    } else {
        let mut v = Vec::new();
        for &alpha in &[-0.5, -1.0, -2.0] {
            for &lambda in &[0.5, 2.0] {
                for &x in &[0.0, 0.5] {
                    v.push((alpha, lambda, x));
                }
            }
        }
        v
    };

    let mut parts = Vec::with_capacity(cells.len());
    for (alpha, lambda, x) in cells {
        let horizon = snap(inp.t.unwrap_or(40.0 / lambda), dt);
        let cfg = SimConfig {
            params: ReflectionParams::new(inp.b, x)?,
            horizon,
            dt,
            n_paths: paths,
            seed: inp.seed,
            store_full_paths: false,
        };
        let mut part = laplace_consistency(&cfg, alpha, lambda)?;
        part.name = format!("a{alpha}_l{lambda}_x{x}");
        parts.push(part);
    }
    if parts.len() == 1 {
        let mut only = parts.pop().expect("one part");
        only.name = "laplace".into();
        return Ok(only);
    }
    let spec = parts[0].tolerance_spec.clone();
    let mut merged = ExperimentReport::merge("laplace", inp.seed, parts);
    merged.tolerance_spec = spec;
    Ok(merged)
}

fn logmgf_suite(inp: &SuiteInputs) -> Result<ExperimentReport> {
    let dt = inp.dt.unwrap_or(2.5e-4);
    let paths = inp.paths.unwrap_or(20_000);
    let t_cap = inp.t.unwrap_or(20.0);
    let x = inp.x.unwrap_or(0.0);
    let alphas: Vec<f64> = match inp.alpha {
        Some(a) => vec![a],
        None => vec![-1.0, 0.5],
    };
    let params = ReflectionParams::new(inp.b, x)?;

    let mut parts = Vec::with_capacity(alphas.len());
    for &alpha in &alphas {
        // The relative variance of exp(alpha L_t) grows like
        // exp((V(2a) - 2 V(a)) t); cap the ladder where the forecast relative
        // SE reaches 15% so the 30% variance gate is never tripped by design.
        let growth = big_v(2.0 * alpha, &params)?.value - 2.0 * big_v(alpha, &params)?.value;
        let t_hi = if growth > 1e-12 {
            t_cap.min((0.15 * 0.15 * paths as f64).ln() / growth)
        } else {
            t_cap
        };
        let t_list = ladder(t_hi, dt);
        let cfg = SimConfig {
            params,
            horizon: *t_list.last().expect("ladder nonempty"),
            dt,
            n_paths: paths,
            seed: inp.seed,
            store_full_paths: false,
        };
        let mut part = log_mgf_limit(&cfg, alpha, &t_list)?;
        part.name = format!("a{alpha}");
        parts.push(part);
    }
    if parts.len() == 1 {
        let mut only = parts.pop().expect("one part");
        only.name = "logmgf".into();
        return Ok(only);
    }
    let spec = parts[0].tolerance_spec.clone();
    let mut merged = ExperimentReport::merge("logmgf", inp.seed, parts);
    merged.tolerance_spec = spec;
    Ok(merged)
}

fn ldp_suite(inp: &SuiteInputs) -> Result<ExperimentReport> {
    let dt = inp.dt.unwrap_or(1e-3);
    let paths = inp.paths.unwrap_or(100_000);
    let t_max = inp.t.unwrap_or(40.0);
    let x = inp.x.unwrap_or(0.0);
    let thresholds: Vec<f64> = match inp.threshold {
        Some(v) => vec![v],
        None => vec![0.8, 0.2],
    };
    let t_list = ladder(t_max, dt);
    let cfg = SimConfig {
        params: ReflectionParams::new(inp.b, x)?,
        horizon: *t_list.last().expect("ladder nonempty"),
        dt,
        n_paths: paths,
        seed: inp.seed,
        store_full_paths: false,
    };

    let mut parts = Vec::with_capacity(thresholds.len());
    for &thr in &thresholds {
        let mut part = ldp_tail_decay(&cfg, thr, &t_list)?;
        part.name = format!("thr{thr}");
        parts.push(part);
    }
    if parts.len() == 1 {
        let mut only = parts.pop().expect("one part");
        only.name = "ldp".into();
        return Ok(only);
    }
    let spec = parts[0].tolerance_spec.clone();
    let mut merged = ExperimentReport::merge("ldp", inp.seed, parts);
    merged.tolerance_spec = spec;
    Ok(merged)
}

fn ergodic_suite(inp: &SuiteInputs) -> Result<ExperimentReport> {
    let cfg = SimConfig {
        params: ReflectionParams::new(inp.b, inp.x.unwrap_or(inp.b / 2.0))?,
        horizon: inp.t.unwrap_or(500.0),
        dt: inp.dt.unwrap_or(2.5e-5),
        n_paths: inp.paths.unwrap_or(200),
        seed: inp.seed,
        store_full_paths: false,
    };
    ergodic_limits(&cfg)
}

fn verify(a: VerifyArgs) -> Result<Outcome> {
    let mut r = Resolver::load(a.config.as_ref())?;
    let suite = r.string("suite", Some(a.suite), "")?;
    let inp = SuiteInputs {
        b: r.f64("b", a.b, 1.0)?,
        x: r.opt_f64("x", a.x)?,
        t: r.opt_f64("t", a.t)?,
        dt: r.opt_f64("dt", a.dt)?,
        paths: r.opt_u64("paths", a.paths)?,
        seed: r.u64("seed", a.seed, 42)?,
        alpha: r.opt_f64("alpha", a.alpha)?,
        lambda: r.opt_f64("lambda", a.lambda)?,
        threshold: r.opt_f64("threshold", a.threshold)?,
    };
    let out = r.path("out", a.out, ".")?;
    let echo = r.finish()?;

    let runners: Vec<&str> = match suite.as_str() {
        "laplace" | "logmgf" | "ldp" | "ergodic" => vec![suite.as_str()],
        "all" => vec!["laplace", "logmgf", "ldp", "ergodic"],
        other => {
            return Err(Error::Config(format!(
                "unknown suite `{other}` (expected laplace, logmgf, ldp, ergodic, all)"
            )))
        }
    };

    let mut all_pass = true;
    let mut lines = String::new();
    for name in runners {
        let mut report = match name {
            "laplace" => laplace_suite(&inp)?,
            "logmgf" => logmgf_suite(&inp)?,
            "ldp" => ldp_suite(&inp)?,
            _ => ergodic_suite(&inp)?,
        };
        for (k, v) in &echo {
            report.echo(&format!("cli.{k}"), v);
        }
        let (json_path, _) = report.write_files(&out)?;
        all_pass &= report.overall_pass;
        lines.push_str(&format!(
            "{name}: {} ({})\n",
            if report.overall_pass { "PASS" } else { "FAIL" },
            json_path.display()
        ));
    }
    print_stdout(&lines)?;
    Ok(if all_pass {
        Outcome::Clean
    } else {
        Outcome::SuiteFailed
    })
}
