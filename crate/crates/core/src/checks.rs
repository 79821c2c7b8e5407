//! Stabilization protocol for the Tauberian diagnostics on the derivative
//! measure: values are computed over a log-spaced grid of scales, and a
//! check passes when the error against the analytic limit is within
//! tolerance at the largest scale and the last two values agree with each
//! other to the same tolerance.

use serde::Serialize;

use crate::error::Result;
use crate::params::{DerivedConstants, ModelParams};
use crate::quadrature::QuadratureSpec;
use crate::tauberian::{self, build_derivative_measure, Axis, DerivativeMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleRow {
    pub t: f64,
    pub value: f64,
    pub limit: f64,
    pub rel_error: f64,
}

/// One curve of values over the scale grid at a fixed argument.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub argument: (f64, f64),
    pub rows: Vec<ScaleRow>,
    /// `|error|` strictly decreasing along the grid.
    pub monotone: bool,
    /// Last two values within tolerance of each other.
    pub stabilized: bool,
    pub final_rel_error: f64,
    pub pass: bool,
}

impl Curve {
    fn new(argument: (f64, f64), rows: Vec<ScaleRow>, tolerance: f64) -> Self {
        let monotone = rows
            .windows(2)
            .all(|w| w[1].rel_error.abs() < w[0].rel_error.abs());
        let stabilized = match rows.as_slice() {
            [.., a, b] => ((b.value - a.value) / b.limit).abs() <= tolerance,
            _ => true,
        };
        let final_rel_error = rows.last().map_or(f64::NAN, |r| r.rel_error);
        let pass = final_rel_error.abs() < tolerance && stabilized;
        Curve {
            argument,
            rows,
            monotone,
            stabilized,
            final_rel_error,
            pass,
        }
    }
}

fn rel_error(value: f64, limit: f64) -> f64 {
    (value - limit) / limit
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UhatReport {
    pub params: ModelParams,
    pub derived: DerivedConstants,
    pub k: u32,
    pub h_grid: Vec<f64>,
    pub tolerance: f64,
    pub curves: Vec<Curve>,
    pub pass: bool,
}

/// Scaled transform of `m^{(k)}` against its analytic limit; a curve
/// passes when it also decreases monotonically in error.
pub fn uhat_check(
    params: &ModelParams,
    k: u32,
    lambdas: &[(f64, f64)],
    h_grid: &[f64],
    tolerance: f64,
    quad: &QuadratureSpec,
) -> Result<UhatReport> {
    let m = build_derivative_measure(params, k, *quad)?;
    let b = m.scaling();
    let mut curves = Vec::new();
    for &(l1, l2) in lambdas {
        let limit = tauberian::uhat_limit_rhs(params, k, l1, l2, quad)?;
        let rows = h_grid
            .iter()
            .map(|&h| {
                let value = tauberian::transform_scaling(&m, &b, h, l1, l2)?;
                Ok(ScaleRow {
                    t: h,
                    value,
                    limit,
                    rel_error: rel_error(value, limit),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut c = Curve::new((l1, l2), rows, tolerance);
        c.pass = c.pass && c.monotone;
        curves.push(c);
    }
    Ok(UhatReport {
        params: *m.params(),
        derived: *m.derived(),
        k,
        h_grid: h_grid.to_vec(),
        tolerance,
        pass: curves.iter().all(|c| c.pass),
        curves,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureReport {
    pub params: ModelParams,
    pub derived: DerivedConstants,
    pub k: u32,
    pub t_grid: Vec<f64>,
    pub tolerance: f64,
    pub curves: Vec<Curve>,
    /// Scaled transforms at the same scales, for the Abelian direction.
    pub transform_curve: Curve,
    pub pass: bool,
}

/// `U_t(x, y)` against the rectangle mass of the limit measure. The scaled
/// transform at `λ = (1, 1)` is tracked alongside: once the measure has
/// stabilized the transform should have too.
pub fn measure_check(
    params: &ModelParams,
    k: u32,
    points: &[(f64, f64)],
    t_grid: &[f64],
    tolerance: f64,
    quad: &QuadratureSpec,
) -> Result<MeasureReport> {
    let m = build_derivative_measure(params, k, *quad)?;
    let b = m.scaling();
    let mut curves = Vec::new();
    for &(x, y) in points {
        let limit = tauberian::measure_limit(params, k, x, y, quad)?;
        let rows = t_grid
            .iter()
            .map(|&t| {
                let value = tauberian::measure_scaling(&m, &b, t, x, y)?;
                Ok(ScaleRow {
                    t,
                    value,
                    limit,
                    rel_error: rel_error(value, limit),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut c = Curve::new((x, y), rows, tolerance);
        c.pass = c.pass && c.monotone;
        curves.push(c);
    }
    let limit = tauberian::uhat_limit_rhs(params, k, 1.0, 1.0, quad)?;
    let rows = t_grid
        .iter()
        .map(|&t| {
            let value = tauberian::transform_scaling(&m, &b, t, 1.0, 1.0)?;
            Ok(ScaleRow {
                t,
                value,
                limit,
                rel_error: rel_error(value, limit),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let transform_curve = Curve::new((1.0, 1.0), rows, tolerance);
    Ok(MeasureReport {
        params: *m.params(),
        derived: *m.derived(),
        k,
        t_grid: t_grid.to_vec(),
        tolerance,
        pass: curves.iter().all(|c| c.pass),
        curves,
        transform_curve,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationReport {
    pub params: ModelParams,
    pub derived: DerivedConstants,
    pub k: u32,
    pub x: (f64, f64),
    pub y_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub rows: Vec<tauberian::TruncationRow>,
    /// Largest ratio to the whole-domain value at the largest `y`, over `t`.
    pub worst_ratio_at_max_y: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn truncation_check(
    params: &ModelParams,
    k: u32,
    x: (f64, f64),
    y_grid: &[f64],
    t_grid: &[f64],
    tolerance: f64,
    quad: &QuadratureSpec,
) -> Result<TruncationReport> {
    let m = build_derivative_measure(params, k, *quad)?;
    let rows = tauberian::truncation_condition(&m, &m.scaling(), x, y_grid, t_grid)?;
    let y_max = y_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let worst = rows
        .iter()
        .filter(|r| r.y == y_max)
        .map(|r| r.ratio)
        .fold(0.0, f64::max);
    Ok(TruncationReport {
        params: *m.params(),
        derived: *m.derived(),
        k,
        x,
        y_grid: y_grid.to_vec(),
        t_grid: t_grid.to_vec(),
        rows,
        worst_ratio_at_max_y: worst,
        tolerance,
        pass: worst < tolerance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalReport {
    pub params: ModelParams,
    pub derived: DerivedConstants,
    pub k: u32,
    pub axis: Axis,
    pub index: f64,
    /// `C` in `U₁(b₁(t) x)/t → C x^{γ₁}`.
    pub constant: f64,
    pub t_grid: Vec<f64>,
    pub rows: Vec<tauberian::MarginalRow>,
    /// Raw values against `C x^{γ₁}`.
    pub curves: Vec<Curve>,
    /// `U₁(b₁ x)/U₁(b₁)` against `x^{γ₁}` at the largest `t`.
    pub normalized_rel_errors: Vec<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Marginal regular variation of `m^{(k)}` along `axis`. Only the first
/// axis has a finite marginal when `k` exceeds `1/c1 + a δ_out`; the second
/// then fails with `DivergentSum`.
pub fn marginal_check(
    params: &ModelParams,
    k: u32,
    axis: Axis,
    x_grid: &[f64],
    t_grid: &[f64],
    tolerance: f64,
    quad: &QuadratureSpec,
) -> Result<MarginalReport> {
    let m: DerivativeMeasure = build_derivative_measure(params, k, *quad)?;
    let b = m.scaling();
    let rows = tauberian::marginal_condition(&m, axis, &b, x_grid, t_grid)?;
    let constant = match axis {
        Axis::One => tauberian::marginal_limit_constant(params, k)?,
        Axis::Two => f64::NAN,
    };
    let curves: Vec<Curve> = x_grid
        .iter()
        .map(|&x| {
            let limit = constant * x.powf(b.index(axis));
            let rs = rows
                .iter()
                .filter(|r| r.x == x)
                .map(|r| ScaleRow {
                    t: r.t,
                    value: r.value,
                    limit,
                    rel_error: rel_error(r.value, limit),
                })
                .collect();
            Curve::new((x, 0.0), rs, tolerance)
        })
        .collect();
    let t_last = t_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let normalized_rel_errors: Vec<f64> = rows
        .iter()
        .filter(|r| r.t == t_last)
        .map(|r| rel_error(r.normalized, r.target))
        .collect();
    let pass = curves.iter().all(|c| c.pass)
        && normalized_rel_errors.iter().all(|e| e.abs() < tolerance);
    Ok(MarginalReport {
        params: *m.params(),
        derived: *m.derived(),
        k,
        axis,
        index: b.index(axis),
        constant,
        t_grid: t_grid.to_vec(),
        rows,
        curves,
        normalized_rel_errors,
        tolerance,
        pass,
    })
}
