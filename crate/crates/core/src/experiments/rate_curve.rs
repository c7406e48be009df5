use serde::Serialize;

use crate::error::Result;
use crate::fmt_f64;
use crate::params::ReflectionParams;
use crate::rate::{big_v, v_star};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AlphaRow {
    pub alpha: f64,
    pub v: f64,
    pub v_prime: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct XRow {
    pub x: f64,
    pub v_star: f64,
    /// absent at x = 0 (no one-sided derivative there)
    pub v_star_prime: Option<f64>,
    /// absent at x = 0 (maximizer escapes to the domain floor)
    pub lambda_star: Option<f64>,
}

/// Tabulated rate functions ready for CSV export.
#[derive(Debug, Clone, Serialize)]
pub struct RateCurves {
    pub b: f64,
    pub alpha_rows: Vec<AlphaRow>,
    pub x_rows: Vec<XRow>,
}

/// Evaluates `big_v` over `alpha_grid` and `v_star` over `x_grid`.
/// Either grid may be empty.
pub fn rate_curve_export(
    params: &ReflectionParams,
    alpha_grid: &[f64],
    x_grid: &[f64],
) -> Result<RateCurves> {
    let mut alpha_rows = Vec::with_capacity(alpha_grid.len());
    for &alpha in alpha_grid {
        let e = big_v(alpha, params)?;
        alpha_rows.push(AlphaRow {
            alpha,
            v: e.value,
            v_prime: e.derivative.expect("big_v always differentiable"),
        });
    }
    let mut x_rows = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        let e = v_star(x, params)?;
        x_rows.push(XRow {
            x,
            v_star: e.value,
            v_star_prime: e.derivative,
            lambda_star: e.lambda_star,
        });
    }
    Ok(RateCurves {
        b: params.b(),
        alpha_rows,
        x_rows,
    })
}

impl RateCurves {
    /// `alpha,V,V_prime` data rows (no comment header; callers prepend one).
    pub fn alpha_csv(&self) -> String {
        let mut out = String::from("alpha,V,V_prime\n");
        for r in &self.alpha_rows {
            out.push_str(&format!(
                "{},{},{}\n",
                fmt_f64(r.alpha),
                fmt_f64(r.v),
                fmt_f64(r.v_prime)
            ));
        }
        out
    }

    /// `x,V_star,V_star_prime,lambda_star` data rows; optional fields render
    /// empty where the quantity does not exist.
    pub fn x_csv(&self) -> String {
        let mut out = String::from("x,V_star,V_star_prime,lambda_star\n");
        for r in &self.x_rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(r.x),
                fmt_f64(r.v_star),
                r.v_star_prime.map(fmt_f64).unwrap_or_default(),
                r.lambda_star.map(fmt_f64).unwrap_or_default()
            ));
        }
        out
    }
}
