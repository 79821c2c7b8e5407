//! One-dimensional quadrature: globally adaptive 21-point Gauss–Kronrod on
//! finite intervals, plus maps for half-lines and for `(0, ∞)` through a
//! logarithmic change of variable.
//!
//! Error estimates follow the QUADPACK heuristics for the Kronrod rule.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variable transform applied before adaptive refinement on `(0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transform {
    /// Integrate in `t = ln z` over the real line.
    Log,
    /// Integrate in `z` directly: `[0, p0] ∪ ... ∪ [p_n, ∞)`.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    pub transform: Transform,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_subdivisions: 10_000,
            transform: Transform::Log,
        }
    }
}

impl QuadratureSpec {
    pub fn with_tolerance(abs_tol: f64, rel_tol: f64) -> Self {
        QuadratureSpec {
            abs_tol,
            rel_tol,
            ..Default::default()
        }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

/// Result of a quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

// Kronrod abscissae on [-1, 1]; odd indices are the embedded Gauss points.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077958109831074,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// Applies the 21-point Kronrod rule on `[a, b]`, returning (value, error).
fn gk21<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[10];
    let mut resg = 0.0;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = resk * 0.5;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    if !result.is_finite() {
        err = f64::INFINITY;
    }
    (result, err)
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    piece: usize,
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// An integrand on a finite interval `[lo, hi]`.
type Piece<'a> = (&'a dyn Fn(f64) -> f64, f64, f64);

/// Globally adaptive bisection over several pieces, each with its own
/// integrand (already mapped to a finite interval).
fn adapt(pieces: &[Piece<'_>], spec: &QuadratureSpec) -> Result<Estimate> {
    let mut heap = BinaryHeap::new();
    let mut value = 0.0;
    let mut error = 0.0;
    for (k, (f, lo, hi)) in pieces.iter().enumerate() {
        if hi <= lo {
            continue;
        }
        let (v, e) = gk21(*f, *lo, *hi);
        value += v;
        error += e;
        heap.push(Segment {
            piece: k,
            lo: *lo,
            hi: *hi,
            value: v,
            error: e,
        });
    }
    let mut subdivisions = heap.len();
    // segments too narrow to split further; their error is final
    let mut frozen_value = 0.0;
    let mut frozen_error = 0.0;
    loop {
        if !value.is_finite() || !error.is_finite() {
            if heap.is_empty() {
                break;
            }
        } else if error <= spec.target(value) {
            return Ok(Estimate {
                value,
                error,
                subdivisions,
            });
        }
        if subdivisions >= spec.max_subdivisions {
            break;
        }
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.lo + seg.hi);
        if !(mid > seg.lo && mid < seg.hi) {
            frozen_value += seg.value;
            frozen_error += seg.error;
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let f = pieces[seg.piece].0;
        let (v1, e1) = gk21(f, seg.lo, mid);
        let (v2, e2) = gk21(f, mid, seg.hi);
        subdivisions += 1;
        heap.push(Segment {
            piece: seg.piece,
            lo: seg.lo,
            hi: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            piece: seg.piece,
            lo: mid,
            hi: seg.hi,
            value: v2,
            error: e2,
        });
        // recompute the totals from scratch now and then to avoid drift
        if subdivisions % 64 == 0 {
            value = heap.iter().map(|s| s.value).sum::<f64>() + frozen_value;
            error = heap.iter().map(|s| s.error).sum::<f64>() + frozen_error;
        } else {
            value += v1 + v2 - seg.value;
            error += e1 + e2 - seg.error;
        }
    }
    value = heap.iter().map(|s| s.value).sum::<f64>() + frozen_value;
    error = heap.iter().map(|s| s.error).sum::<f64>() + frozen_error;
    if value.is_finite() && error <= spec.target(value) {
        return Ok(Estimate {
            value,
            error,
            subdivisions,
        });
    }
    Err(Error::QuadratureFailure {
        error,
        tolerance: spec.target(value),
        subdivisions,
    })
}

/// `∫_a^b f`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Estimate> {
    integrate_with_breaks(f, &[a, b], spec)
}

/// `∫ f` over `[breaks[0], breaks[last]]`, starting from the given subdivision.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    let g: &dyn Fn(f64) -> f64 = &f;
    let pieces: Vec<_> = breaks.windows(2).map(|w| (g, w[0], w[1])).collect();
    adapt(&pieces, spec)
}

/// `∫_lo^∞ f` via `x = lo + (1 - s)/s`.
pub fn integrate_upper<F: Fn(f64) -> f64>(f: F, lo: f64, spec: &QuadratureSpec) -> Result<Estimate> {
    let g = |s: f64| {
        let x = lo + (1.0 - s) / s;
        let v = f(x);
        if v == 0.0 {
            0.0
        } else {
            v / (s * s)
        }
    };
    integrate(g, 0.0, 1.0, spec)
}

/// `∫_{breaks[0]}^∞ f`, split at the remaining breaks; the last piece is
/// mapped onto `(0, 1]`.
pub fn integrate_from<F: Fn(f64) -> f64>(f: F, breaks: &[f64], spec: &QuadratureSpec) -> Result<Estimate> {
    assert!(!breaks.is_empty());
    let last = *breaks.last().unwrap();
    let upper = |s: f64| {
        let v = f(last + (1.0 - s) / s);
        if v == 0.0 {
            0.0
        } else {
            v / (s * s)
        }
    };
    let g: &dyn Fn(f64) -> f64 = &f;
    let mut pieces: Vec<Piece<'_>> =
        breaks.windows(2).map(|w| (g, w[0], w[1])).collect();
    pieces.push((&upper, 0.0, 1.0));
    adapt(&pieces, spec)
}

/// `∫_0^∞ f(z) dz`, with `pivots` marking where the integrand's mass sits.
///
/// With [`Transform::Log`] the integral is taken over `t = ln z` on the real
/// line, split at the logarithms of the pivots; the two infinite ends are
/// mapped onto `(0, 1]`.
pub fn integrate_positive<F: Fn(f64) -> f64>(
    f: F,
    pivots: &[f64],
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    let mut ps: Vec<f64> = pivots
        .iter()
        .copied()
        .filter(|p| p.is_finite() && *p > 0.0)
        .collect();
    if ps.is_empty() {
        ps.push(1.0);
    }
    ps.sort_by(f64::total_cmp);
    ps.dedup_by(|a, b| (*a / *b - 1.0).abs() < 1e-9);

    match spec.transform {
        Transform::Log => {
            let ts: Vec<f64> = ps.iter().map(|p| p.ln()).collect();
            let in_t = |t: f64| {
                let z = t.exp();
                if z == 0.0 || !z.is_finite() {
                    return 0.0;
                }
                let v = f(z);
                if v == 0.0 {
                    0.0
                } else {
                    v * z
                }
            };
            let t_lo = ts[0];
            let t_hi = *ts.last().unwrap();
            let lower = |s: f64| {
                let v = in_t(t_lo - (1.0 - s) / s);
                if v == 0.0 {
                    0.0
                } else {
                    v / (s * s)
                }
            };
            let upper = |s: f64| {
                let v = in_t(t_hi + (1.0 - s) / s);
                if v == 0.0 {
                    0.0
                } else {
                    v / (s * s)
                }
            };
            let mut pieces: Vec<Piece<'_>> = vec![(&lower, 0.0, 1.0)];
            for w in ts.windows(2) {
                pieces.push((&in_t, w[0], w[1]));
            }
            pieces.push((&upper, 0.0, 1.0));
            adapt(&pieces, spec)
        }
        Transform::Identity => {
            let hi = *ps.last().unwrap();
            let upper = |s: f64| {
                let v = f(hi + (1.0 - s) / s);
                if v == 0.0 {
                    0.0
                } else {
                    v / (s * s)
                }
            };
            let g: &dyn Fn(f64) -> f64 = &f;
            let mut pieces: Vec<Piece<'_>> = Vec::new();
            let mut prev = 0.0;
            for p in &ps {
                pieces.push((g, prev, *p));
                prev = *p;
            }
            pieces.push((&upper, 0.0, 1.0));
            adapt(&pieces, spec)
        }
    }
}

/// A fixed composite Gauss–Legendre rule (10 points per panel).
#[derive(Debug, Clone)]
pub struct FixedRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl FixedRule {
    /// `panels` equal panels on `[lo, hi]`.
    pub fn composite(lo: f64, hi: f64, panels: usize) -> Self {
        let panels = panels.max(1);
        let width = (hi - lo) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * 10);
        let mut weights = Vec::with_capacity(panels * 10);
        for p in 0..panels {
            let a = lo + width * p as f64;
            let center = a + 0.5 * width;
            for j in 0..5 {
                let x = XGK[2 * j + 1] * 0.5 * width;
                let w = WG[j] * 0.5 * width;
                nodes.push(center - x);
                weights.push(w);
                nodes.push(center + x);
                weights.push(w);
            }
        }
        FixedRule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn apply<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let spec = QuadratureSpec::default();
        let r = integrate(|x| 3.0 * x * x, 0.0, 2.0, &spec).unwrap();
        assert!((r.value - 8.0).abs() < 1e-13);
    }

    #[test]
    fn endpoint_power_singularity() {
        // ∫_0^1 x^{-1/2} = 2
        let spec = QuadratureSpec::with_tolerance(1e-10, 1e-10);
        let r = integrate(|x| x.powf(-0.5), 0.0, 1.0, &spec).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn half_line_exponential() {
        let spec = QuadratureSpec::default();
        let r = integrate_upper(|x| (-x).exp(), 1.0, &spec).unwrap();
        assert!((r.value - (-1.0f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn positive_half_line_both_transforms() {
        // ∫_0^∞ z^{s-1} e^{-z} dz = Γ(s)
        for transform in [Transform::Log, Transform::Identity] {
            let spec = QuadratureSpec {
                transform,
                ..QuadratureSpec::default()
            };
            let r = integrate_positive(|z| z.powf(1.5) * (-z).exp(), &[1.5], &spec).unwrap();
            let expected = 0.75 * std::f64::consts::PI.sqrt();
            assert!((r.value - expected).abs() < 1e-11, "{transform:?}: {}", r.value);
        }
    }

    #[test]
    fn failure_is_reported() {
        let spec = QuadratureSpec {
            max_subdivisions: 3,
            ..QuadratureSpec::default()
        };
        let err = integrate(|x| (50.0 * x).sin().abs(), 0.0, 10.0, &spec).unwrap_err();
        assert!(matches!(err, Error::QuadratureFailure { .. }));
    }

    #[test]
    fn fixed_rule_is_exact_for_degree_19() {
        let rule = FixedRule::composite(-1.0, 3.0, 2);
        let v = rule.apply(|x| x.powi(19));
        let expected = (3f64.powi(20) - 1.0) / 20.0;
        assert!((v / expected - 1.0).abs() < 1e-13);
    }
}
