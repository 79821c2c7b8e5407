//! Numerical checks of the Abel–Tauberian chain on the `k`-th derivative
//! measure of the first mixture component,
//! `m_ij = Π_{d=1}^{k} (i+d) · P[X₁ = i+k, Y₁ = j]`.
//!
//! The measure has infinite total mass and its scaled versions live on
//! supports of order `b₁(t) = t^{1/γ₁}`, far beyond what a dense atom table
//! can hold at the scales of interest. [`DerivativeMeasure`] therefore
//! evaluates weighted lattice sums through the mixture representation:
//! `m_ij = R_k ∫ π(z) (z-1)^k nb(i; δ_in+k+1, 1/z) nb(j; δ_out, z^{-a}) dz`
//! with `R_k = Π_{d=1}^{k} (δ_in + d)`, summing the `i` and `j` series term
//! by term at each node of one shared quadrature rule in `t = ln z`.
//! [`AtomTable`] holds explicit atoms and is used to cross-check it.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::limit::{Component, LimitDistribution};
use crate::params::{DerivedConstants, ModelParams};
use crate::quadrature::{self, FixedRule, QuadratureSpec};
use crate::special::{gamma_p, ln_gamma, rising_product};

/// `Σ e^{-μ₁ i - μ₂ j} w_ij` together with a bound on what was left out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxSum {
    pub value: f64,
    pub truncation: f64,
}

/// A nonnegative measure on the lattice `ℕ²`.
pub trait LatticeMeasure: Sync {
    /// `Σ_{i ≤ i_max, j ≤ j_max} e^{-μ₁ i - μ₂ j} w_ij`; `None` leaves an axis unbounded.
    fn box_sum(&self, mu: (f64, f64), i_max: Option<u64>, j_max: Option<u64>) -> Result<BoxSum>;

    fn atom(&self, i: u64, j: u64) -> Result<f64>;
}

/// Explicit atoms on `[0, i_max] × [0, j_max]`. A `complete` table claims
/// the measure has no mass outside; otherwise sums reaching past the
/// support fail with `SupportExceeded`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomTable {
    atoms: BTreeMap<(u64, u64), f64>,
    support: (u64, u64),
    complete: bool,
}

impl AtomTable {
    pub fn new<I: IntoIterator<Item = ((u64, u64), f64)>>(
        atoms: I,
        support: (u64, u64),
        complete: bool,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for ((i, j), w) in atoms {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidParams(format!("atom ({i},{j}) has weight {w}")));
            }
            if i > support.0 || j > support.1 {
                return Err(Error::InvalidParams(format!(
                    "atom ({i},{j}) lies outside the support {support:?}"
                )));
            }
            if w > 0.0 {
                *map.entry((i, j)).or_insert(0.0) += w;
            }
        }
        Ok(AtomTable {
            atoms: map,
            support,
            complete,
        })
    }

    pub fn support(&self) -> (u64, u64) {
        self.support
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    fn check_reach(&self, bound: Option<u64>, edge: u64, axis: &str) -> Result<()> {
        if self.complete {
            return Ok(());
        }
        match bound {
            Some(b) if b <= edge => Ok(()),
            _ => Err(Error::SupportExceeded(format!(
                "{axis} range {} exceeds the stored support {edge}",
                bound.map_or("unbounded".to_string(), |b| b.to_string())
            ))),
        }
    }
}

impl LatticeMeasure for AtomTable {
    fn box_sum(&self, mu: (f64, f64), i_max: Option<u64>, j_max: Option<u64>) -> Result<BoxSum> {
        self.check_reach(i_max, self.support.0, "i")?;
        self.check_reach(j_max, self.support.1, "j")?;
        let (ib, jb) = (i_max.unwrap_or(u64::MAX), j_max.unwrap_or(u64::MAX));
        let value = self
            .atoms
            .iter()
            .filter(|((i, j), _)| *i <= ib && *j <= jb)
            .map(|(&(i, j), &w)| w * (-mu.0 * i as f64 - mu.1 * j as f64).exp())
            .sum();
        Ok(BoxSum {
            value,
            truncation: 0.0,
        })
    }

    fn atom(&self, i: u64, j: u64) -> Result<f64> {
        if !self.complete && (i > self.support.0 || j > self.support.1) {
            return Err(Error::SupportExceeded(format!("atom ({i},{j}) is outside the table")));
        }
        Ok(self.atoms.get(&(i, j)).copied().unwrap_or(0.0))
    }
}

/// `Σ_{m ≤ bound} e^{-μ m} nb(m; r, p)` summed term by term, with a bound on
/// the neglected remainder. `ln_p`, `ln_q` are `ln p`, `ln(1-p)`.
fn nb_weighted_sum(r: f64, ln_p: f64, ln_q: f64, mu: f64, bound: Option<u64>) -> (f64, f64) {
    const RESCALE: f64 = 1e250;
    const REL_TOL: f64 = 1e-15;
    const MAX_TERMS: u64 = 2_000_000_000;
    if r == 0.0 || ln_q == f64::NEG_INFINITY {
        return (1.0, 0.0);
    }
    if bound.is_none() && mu == 0.0 {
        // the full negative-binomial law has unit mass
        return (1.0, 0.0);
    }
    let c = (ln_q - mu).exp();
    let mut scale_ln = r * ln_p;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut remainder = 0.0;
    let mut m: u64 = 0;
    loop {
        if bound == Some(m) {
            break;
        }
        if m == MAX_TERMS {
            // too slow to converge: report the geometric bound, possibly infinite
            remainder = term * c / (1.0 - c).max(0.0);
            break;
        }
        let mf = m as f64;
        let ratio = c * (r + mf) / (mf + 1.0);
        term *= ratio;
        sum += term;
        m += 1;
        if sum > RESCALE {
            term /= RESCALE;
            sum /= RESCALE;
            scale_ln += RESCALE.ln();
        }
        if ratio < 1.0 {
            // later ratios approach c monotonically
            let rho = (c * (r + mf + 1.0) / (mf + 2.0)).max(c);
            if rho < 1.0 {
                let tail = term * rho / (1.0 - rho);
                if tail <= REL_TOL * sum {
                    remainder = tail;
                    break;
                }
            }
        }
    }
    let scale = |v: f64| if v > 0.0 { (v.ln() + scale_ln).exp() } else { 0.0 };
    (scale(sum), scale(remainder))
}

/// The derivative measure `m^{(k)}` of the first mixture component.
#[derive(Debug, Clone)]
pub struct DerivativeMeasure {
    params: ModelParams,
    derived: DerivedConstants,
    k: u32,
    /// `δ_in + k + 1`
    shape_in: f64,
    /// `δ_out`
    shape_out: f64,
    ln_rk: f64,
    quad: QuadratureSpec,
}

/// Builds `m^{(k)}`; requires `k > α_in - 1`.
pub fn build_derivative_measure(params: &ModelParams, k: u32, quad: QuadratureSpec) -> Result<DerivativeMeasure> {
    let params = params.validate()?;
    let derived = params.derive()?;
    let bound = derived.alpha_in - 1.0;
    if !(k as f64 > bound) {
        return Err(Error::InvalidK { k, bound });
    }
    Ok(DerivativeMeasure {
        params,
        derived,
        k,
        shape_in: params.delta_in + k as f64 + 1.0,
        shape_out: params.delta_out,
        ln_rk: rising_product(params.delta_in, k).ln(),
        quad,
    })
}

/// Exponent of `z` at infinity in the mixed sum, after the `i` and `j`
/// series have been taken; the sum is finite iff it is below `-1`.
fn large_z_exponent(m: &DerivativeMeasure, mu: (f64, f64), i_bounded: bool, j_bounded: bool) -> f64 {
    let mut e = m.k as f64 - 1.0 - 1.0 / m.derived.c1;
    if i_bounded || mu.0 > 0.0 {
        e -= m.shape_in;
    }
    if j_bounded || mu.1 > 0.0 {
        e -= m.derived.a * m.shape_out;
    }
    e
}

impl DerivativeMeasure {
    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn derived(&self) -> &DerivedConstants {
        &self.derived
    }

    /// Natural scaling `b₁(t) = t^{1/γ₁}`, `b₂(t) = t^{1/γ₂}` with
    /// `γ₁ = k - α_in + 1` and `γ₂ = γ₁ (α_out - 1)/(α_in - 1)`.
    pub fn scaling(&self) -> ScalingFunctions {
        let g1 = self.k as f64 - self.derived.alpha_in + 1.0;
        ScalingFunctions::new(g1, g1 * self.derived.gamma_out / self.derived.gamma_in)
    }

    /// Dense atoms on `[0, i_max] × [0, j_max]` from the shared-rule pmf table.
    pub fn atom_table(&self, i_max: u64, j_max: u64) -> Result<AtomTable> {
        let limit = LimitDistribution::new(&self.params, self.quad)?;
        let k = self.k as u64;
        let table = limit.pmf_component_table(Component::One, i_max + k, j_max);
        let mut atoms = Vec::with_capacity(((i_max + 1) * (j_max + 1)) as usize);
        for i in 0..=i_max {
            let w = rising_product(i as f64, self.k);
            for j in 0..=j_max {
                atoms.push(((i, j), w * table[(i + k) as usize][j as usize]));
            }
        }
        AtomTable::new(atoms, (i_max, j_max), false)
    }

    /// Partial sums over the squares `[0, n]²`.
    pub fn captured_mass(&self, sizes: &[u64]) -> Result<Vec<(u64, f64)>> {
        sizes
            .iter()
            .map(|&n| Ok((n, self.box_sum((0.0, 0.0), Some(n), Some(n))?.value)))
            .collect()
    }

    fn rule(&self, mu: (f64, f64), i_max: Option<u64>, j_max: Option<u64>, rate: f64) -> FixedRule {
        let a = self.derived.a;
        // beyond these points the i and j series start to cut the mixture off
        let knee_i = match (i_max, mu.0 > 0.0) {
            (None, false) => 0.0,
            (Some(n), false) => ((n + 1) as f64).ln(),
            (None, true) => (1.0 / mu.0).ln(),
            (Some(n), true) => ((n + 1) as f64).min(1.0 / mu.0).ln(),
        };
        let knee_j = match (j_max, mu.1 > 0.0) {
            (None, false) => 0.0,
            (Some(n), false) => ((n + 1) as f64).ln() / a,
            (None, true) => (1.0 / mu.1).ln() / a,
            (Some(n), true) => ((n + 1) as f64).min(1.0 / mu.1).ln() / a,
        };
        let knee = knee_i.max(knee_j).max(0.0) + 3.0;
        let t_max = knee + 40.0 / rate + 2.0;
        // conditional laws have relative width about 1/√shape in t
        let shape = self.shape_in.max(a * a * self.shape_out).max(1.0);
        let fine_width = (0.5f64).min(1.1 / shape.sqrt());
        let fine = FixedRule::composite(0.0, knee, (knee / fine_width).ceil() as usize);
        let coarse = FixedRule::composite(knee, t_max, ((t_max - knee) / 2.0).ceil() as usize);
        FixedRule {
            nodes: fine.nodes.into_iter().chain(coarse.nodes).collect(),
            weights: fine.weights.into_iter().chain(coarse.weights).collect(),
        }
    }
}

impl LatticeMeasure for DerivativeMeasure {
    fn box_sum(&self, mu: (f64, f64), i_max: Option<u64>, j_max: Option<u64>) -> Result<BoxSum> {
        if !(mu.0 >= 0.0 && mu.1 >= 0.0) {
            return Err(Error::DomainError(format!("weights need μ ≥ 0, got {mu:?}")));
        }
        let exponent = large_z_exponent(self, mu, i_max.is_some(), j_max.is_some());
        if exponent >= -1.0 {
            return Err(Error::DivergentSum(format!(
                "lattice sum of the k = {} derivative measure diverges (mixture exponent {exponent:.4} >= -1)",
                self.k
            )));
        }
        let rate = -1.0 - exponent;
        let rule = self.rule(mu, i_max, j_max, rate);
        let c1 = self.derived.c1;
        let a = self.derived.a;
        let k = self.k as f64;
        let ln_pref = self.ln_rk - c1.ln();
        let terms: Vec<(f64, f64)> = rule
            .nodes
            .par_iter()
            .zip(rule.weights.par_iter())
            .map(|(&t, &w)| {
                let ln_q_in = (-(-t).exp_m1()).ln();
                let ln_q_out = (-(-a * t).exp_m1()).ln();
                // c1⁻¹ z^{-1-1/c1} (z-1)^k dz in t = ln z
                let kernel = w * (ln_pref - t / c1 + k * (t + ln_q_in)).exp();
                if kernel == 0.0 {
                    return (0.0, 0.0);
                }
                let (sa, ra) = nb_weighted_sum(self.shape_in, -t, ln_q_in, mu.0, i_max);
                let (sb, rb) = nb_weighted_sum(self.shape_out, -a * t, ln_q_out, mu.1, j_max);
                (kernel * sa * sb, kernel * (ra * (sb + rb) + rb * sa))
            })
            .collect();
        let value: f64 = terms.iter().map(|v| v.0).sum();
        let mut truncation: f64 = terms.iter().map(|v| v.1).sum();
        // the mixture beyond the last node decays at least like e^{-rate t}
        if let (Some(&w_last), Some(last)) = (rule.weights.last(), terms.last()) {
            truncation += last.0 / w_last / rate;
        }
        Ok(BoxSum { value, truncation })
    }

    /// `Π (i+d) P[X₁ = i+k, Y₁ = j]` by adaptive quadrature.
    fn atom(&self, i: u64, j: u64) -> Result<f64> {
        let limit = LimitDistribution::new(&self.params, self.quad)?;
        Ok(rising_product(i as f64, self.k) * limit.pmf_component(Component::One, i + self.k as u64, j)?)
    }
}

/// `b₁(t) = t^{1/γ₁}`, `b₂(t) = t^{1/γ₂}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFunctions {
    pub gamma1: f64,
    pub gamma2: f64,
}

impl ScalingFunctions {
    pub fn new(gamma1: f64, gamma2: f64) -> Self {
        assert!(gamma1 > 0.0 && gamma2 > 0.0, "scaling indices must be positive");
        ScalingFunctions { gamma1, gamma2 }
    }

    pub fn identity() -> Self {
        ScalingFunctions::new(1.0, 1.0)
    }

    pub fn b1(&self, t: f64) -> f64 {
        t.powf(1.0 / self.gamma1)
    }

    pub fn b2(&self, t: f64) -> f64 {
        t.powf(1.0 / self.gamma2)
    }

    pub fn index(&self, axis: Axis) -> f64 {
        match axis {
            Axis::One => self.gamma1,
            Axis::Two => self.gamma2,
        }
    }

    fn b(&self, axis: Axis, t: f64) -> f64 {
        match axis {
            Axis::One => self.b1(t),
            Axis::Two => self.b2(t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Axis {
    One,
    Two,
}

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::DomainError(format!("scale t must be positive, got {t}")))
    }
}

fn lattice_bound(v: f64) -> u64 {
    if v >= u64::MAX as f64 {
        u64::MAX - 1
    } else {
        v.floor() as u64
    }
}

/// `U_t(x, y) = U([0, b₁(t) x] × [0, b₂(t) y]) / t`.
pub fn measure_scaling<M: LatticeMeasure + ?Sized>(
    u: &M,
    b: &ScalingFunctions,
    t: f64,
    x: f64,
    y: f64,
) -> Result<f64> {
    check_t(t)?;
    if !(x >= 0.0 && y >= 0.0) {
        return Err(Error::DomainError(format!("rectangle corner ({x}, {y}) must be nonnegative")));
    }
    let s = u.box_sum(
        (0.0, 0.0),
        Some(lattice_bound(b.b1(t) * x)),
        Some(lattice_bound(b.b2(t) * y)),
    )?;
    Ok(s.value / t)
}

/// Relative truncation above which transform values are rejected.
pub const TRANSFORM_TRUNCATION_TOL: f64 = 1e-8;

fn checked(s: BoxSum) -> Result<BoxSum> {
    if s.truncation > TRANSFORM_TRUNCATION_TOL * s.value.abs() {
        return Err(Error::SupportExceeded(format!(
            "truncation estimate {:.3e} exceeds {TRANSFORM_TRUNCATION_TOL:e} of the value {:.6e}",
            s.truncation, s.value
        )));
    }
    Ok(s)
}

/// `Û_t(λ) = t⁻¹ Σ w_ij exp(-λ₁ i/b₁(t) - λ₂ j/b₂(t))`.
pub fn transform_scaling<M: LatticeMeasure + ?Sized>(
    u: &M,
    b: &ScalingFunctions,
    t: f64,
    lambda1: f64,
    lambda2: f64,
) -> Result<f64> {
    check_t(t)?;
    if !(lambda1 > 0.0 && lambda2 > 0.0) {
        return Err(Error::DomainError(format!(
            "transform needs λ > 0, got ({lambda1}, {lambda2})"
        )));
    }
    let s = checked(u.box_sum((lambda1 / b.b1(t), lambda2 / b.b2(t)), None, None)?)?;
    Ok(s.value / t)
}

fn check_k(derived: &DerivedConstants, k: u32) -> Result<()> {
    let bound = derived.alpha_in - 1.0;
    if k as f64 > bound {
        Ok(())
    } else {
        Err(Error::InvalidK { k, bound })
    }
}

/// Limit of the scaled transform:
/// `c1⁻¹ R_k ∫₀^∞ z^{k-1-1/c1} (1+zλ₁)^{-(δ_in+k+1)} (1+z^a λ₂)^{-δ_out} dz`.
pub fn uhat_limit_rhs(params: &ModelParams, k: u32, lambda1: f64, lambda2: f64, quad: &QuadratureSpec) -> Result<f64> {
    let params = params.validate()?;
    let d = params.derive()?;
    check_k(&d, k)?;
    if !(lambda1 > 0.0 && lambda2 > 0.0) {
        return Err(Error::DomainError(format!(
            "transform needs λ > 0, got ({lambda1}, {lambda2})"
        )));
    }
    let kf = k as f64;
    let e = kf - 1.0 - 1.0 / d.c1;
    let shape = params.delta_in + kf + 1.0;
    let integrand = |z: f64| {
        (e * z.ln() - shape * (z * lambda1).ln_1p() - params.delta_out * (z.powf(d.a) * lambda2).ln_1p()).exp()
    };
    let pivots = [1.0 / lambda1, lambda2.powf(-1.0 / d.a)];
    let v = quadrature::integrate_positive(integrand, &pivots, quad)?.value;
    Ok(rising_product(params.delta_in, k) / d.c1 * v)
}

/// Limit of `U_t(x, y)` for the derivative measure:
/// `c1⁻¹ R_k ∫₀^∞ z^{k-1-1/c1} P(δ_in+k+1, x/z) P(δ_out, y/z^a) dz`.
pub fn measure_limit(params: &ModelParams, k: u32, x: f64, y: f64, quad: &QuadratureSpec) -> Result<f64> {
    let params = params.validate()?;
    let d = params.derive()?;
    check_k(&d, k)?;
    if !(x > 0.0 && y >= 0.0) {
        return Err(Error::DomainError(format!("rectangle corner ({x}, {y}) must have x > 0, y ≥ 0")));
    }
    let e = k as f64 - 1.0 - 1.0 / d.c1;
    let shape = params.delta_in + k as f64 + 1.0;
    let y_open = y > 0.0 || params.delta_out == 0.0;
    if !y_open {
        return Ok(0.0);
    }
    let integrand = |z: f64| {
        let px = gamma_p(shape, x / z);
        if px == 0.0 {
            return 0.0;
        }
        z.powf(e) * px * gamma_p(params.delta_out, y / z.powf(d.a))
    };
    let mut pivots = vec![x];
    if y > 0.0 {
        pivots.push(y.powf(1.0 / d.a));
    }
    let v = quadrature::integrate_positive(integrand, &pivots, quad)?.value;
    Ok(rising_product(params.delta_in, k) / d.c1 * v)
}

/// Constant `C` in `U₁(b₁(t) x)/t → C x^{γ₁}` for the derivative measure:
/// `C = Γ(δ_in + 1 + 1/c1) / (c1 γ₁ Γ(δ_in + 1))`.
pub fn marginal_limit_constant(params: &ModelParams, k: u32) -> Result<f64> {
    let params = params.validate()?;
    let d = params.derive()?;
    check_k(&d, k)?;
    let g1 = k as f64 - d.alpha_in + 1.0;
    let r = params.delta_in + 1.0;
    Ok((ln_gamma(r + 1.0 / d.c1) - ln_gamma(r)).exp() / (d.c1 * g1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationRow {
    pub y: f64,
    pub t: f64,
    pub value: f64,
    /// `value` relative to the whole-domain transform at the same `t`.
    pub ratio: f64,
}

/// `∫_{v₁ > y or v₂ > y} e^{-v₁/x₁ - v₂/x₂} U_t(dv)` over the grids; `y = 0`
/// is the whole domain.
pub fn truncation_condition<M: LatticeMeasure + ?Sized>(
    u: &M,
    b: &ScalingFunctions,
    x: (f64, f64),
    y_grid: &[f64],
    t_grid: &[f64],
) -> Result<Vec<TruncationRow>> {
    if !(x.0 > 0.0 && x.1 > 0.0) {
        return Err(Error::DomainError(format!("x must be positive, got {x:?}")));
    }
    let mut rows = Vec::with_capacity(y_grid.len() * t_grid.len());
    for &t in t_grid {
        check_t(t)?;
        let (b1, b2) = (b.b1(t), b.b2(t));
        let mu = (1.0 / (x.0 * b1), 1.0 / (x.1 * b2));
        let whole = u.box_sum(mu, None, None)?;
        for &y in y_grid {
            if !(y >= 0.0) {
                return Err(Error::DomainError(format!("y must be nonnegative, got {y}")));
            }
            let value = if y == 0.0 {
                whole.value
            } else {
                let inner = u.box_sum(mu, Some(lattice_bound(b1 * y)), Some(lattice_bound(b2 * y)))?;
                (whole.value - inner.value).max(0.0)
            };
            rows.push(TruncationRow {
                y,
                t,
                value: value / t,
                ratio: if whole.value > 0.0 { value / whole.value } else { 0.0 },
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginalRow {
    pub x: f64,
    pub t: f64,
    /// `U_i(b_i(t) x) / t`
    pub value: f64,
    /// `U_i(b_i(t) x) / U_i(b_i(t))`
    pub normalized: f64,
    /// `x^{γ_i}`
    pub target: f64,
}

/// Marginal regular-variation table for axis `axis`.
pub fn marginal_condition<M: LatticeMeasure + ?Sized>(
    u: &M,
    axis: Axis,
    b: &ScalingFunctions,
    x_grid: &[f64],
    t_grid: &[f64],
) -> Result<Vec<MarginalRow>> {
    let marginal = |s: f64| -> Result<f64> {
        let n = Some(lattice_bound(s));
        let r = match axis {
            Axis::One => u.box_sum((0.0, 0.0), n, None)?,
            Axis::Two => u.box_sum((0.0, 0.0), None, n)?,
        };
        Ok(r.value)
    };
    let gamma = b.index(axis);
    let mut rows = Vec::new();
    for &t in t_grid {
        check_t(t)?;
        let scale = b.b(axis, t);
        let at_one = marginal(scale)?;
        for &x in x_grid {
            if !(x > 0.0) {
                return Err(Error::DomainError(format!("x must be positive, got {x}")));
            }
            let v = marginal(scale * x)?;
            rows.push(MarginalRow {
                x,
                t,
                value: v / t,
                normalized: if at_one > 0.0 { v / at_one } else { f64::NAN },
                target: x.powf(gamma),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::nb_pmf;

    fn reference(k: u32) -> DerivativeMeasure {
        build_derivative_measure(&ModelParams::reference(), k, QuadratureSpec::default()).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn nb_weighted_sum_matches_closed_forms() {
        for &(r, p, mu) in &[(5.0, 0.3, 0.01), (1.0, 1e-3, 1e-3), (0.5, 0.9, 0.0), (2.0, 1e-6, 1e-5)] {
            let (ln_p, ln_q) = (f64::ln(p), f64::ln_1p(-p));
            if mu > 0.0 {
                let (s, rem) = nb_weighted_sum(r, ln_p, ln_q, mu, None);
                let closed = (p / (1.0 - (1.0 - p) * (-mu).exp())).powf(r);
                // recurrence rounding grows with the number of terms
                assert!(rel(s, closed) < 1e-10, "r={r} p={p}: {s} vs {closed}");
                assert!(rem <= 1e-14 * s);
            }
            let n = 40;
            let (s, _) = nb_weighted_sum(r, ln_p, ln_q, mu, Some(n));
            let direct: f64 = (0..=n).map(|m| (-mu * m as f64).exp() * nb_pmf(m, r, p)).sum();
            assert!(rel(s, direct) < 1e-12, "{s} vs {direct}");
        }
        // starting term p^r far below the float range
        let (r, ln_p, mu) = (6.0, -125.0f64, 1e-4);
        let ln_q = (-ln_p.exp()).ln_1p();
        let (s, _) = nb_weighted_sum(r, ln_p, ln_q, mu, None);
        let closed = (r * (ln_p - (-(ln_q - mu).exp()).ln_1p())).exp();
        assert!(closed > 1e-305 && rel(s, closed) < 1e-9, "{s} vs {closed}");
    }

    #[test]
    fn k_must_exceed_tail_index() {
        let p = ModelParams::reference();
        assert!(build_derivative_measure(&p, 3, QuadratureSpec::default()).is_ok());
        assert!(matches!(
            build_derivative_measure(&p, 1, QuadratureSpec::default()),
            Err(Error::InvalidK { k: 1, .. })
        ));
    }

    #[test]
    fn origin_atom() {
        let m = reference(3);
        let l = LimitDistribution::new(&ModelParams::reference(), QuadratureSpec::default()).unwrap();
        let direct = 6.0 * l.pmf_component(Component::One, 3, 0).unwrap();
        assert!(rel(m.atom(0, 0).unwrap(), direct) < 1e-14);
    }

    #[test]
    fn structured_sums_match_atom_table() {
        let m = reference(3);
        let table = m.atom_table(120, 120).unwrap();
        for &(mu, ib, jb) in &[
            ((0.0, 0.0), 120, 120),
            ((0.05, 0.1), 120, 120),
            ((0.0, 0.0), 30, 7),
            ((1.0, 0.02), 0, 90),
        ] {
            let s = m.box_sum(mu, Some(ib), Some(jb)).unwrap();
            let t = table.box_sum(mu, Some(ib), Some(jb)).unwrap();
            assert!(rel(s.value, t.value) < 1e-9, "{mu:?} {ib} {jb}: {} vs {}", s.value, t.value);
            assert!(s.truncation <= 1e-10 * s.value);
        }
        for &(i, j) in &[(0, 0), (5, 3), (100, 40)] {
            let a = m.atom(i, j).unwrap();
            let b = table.atom(i, j).unwrap();
            assert!(rel(a, b) < 1e-8, "({i},{j}) {a} vs {b}");
        }
        assert!(matches!(table.box_sum((0.1, 0.1), None, None), Err(Error::SupportExceeded(_))));
        assert!(matches!(table.atom(121, 0), Err(Error::SupportExceeded(_))));
    }

    #[test]
    fn partial_sums_grow_without_plateau() {
        let m = reference(3);
        let sums = m.captured_mass(&[100, 200, 400, 800, 1000]).unwrap();
        for w in sums.windows(2) {
            assert!(w[1].1 > w[0].1);
        }
        for w in sums[..4].windows(2) {
            // doubling the square roughly multiplies the mass by 2^{γ₁}
            assert!(w[1].1 / w[0].1 > 1.5, "{sums:?}");
        }
    }

    #[test]
    fn out_marginal_diverges_at_reference() {
        let m = reference(3);
        assert!(matches!(
            m.box_sum((0.0, 0.0), None, Some(10)),
            Err(Error::DivergentSum(_))
        ));
        assert!(m.box_sum((0.0, 0.0), Some(10), None).is_ok());
    }

    #[test]
    fn atom_table_examples() {
        let b = ScalingFunctions::identity();
        let single = AtomTable::new([((0, 0), 2.5)], (0, 0), true).unwrap();
        for &t in &[1.0, 7.0, 1e3] {
            assert!((measure_scaling(&single, &b, t, 0.3, 2.0).unwrap() - 2.5 / t).abs() < 1e-15);
        }
        let at_one = AtomTable::new([((1, 1), 3.0)], (1, 1), true).unwrap();
        let t = 4.0;
        let v = transform_scaling(&at_one, &b, t, 0.7, 1.1).unwrap();
        assert!((v - 3.0 / t * (-(0.7 + 1.1) / t).exp()).abs() < 1e-15);
        // large λ leaves only the origin
        let two = AtomTable::new([((0, 0), 1.0), ((3, 2), 5.0)], (3, 2), true).unwrap();
        let v = transform_scaling(&two, &b, 2.0, 1e4, 1e4).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        let plain = AtomTable::new([((0, 0), 1.0), ((1, 0), 2.0), ((1, 1), 4.0)], (1, 1), true).unwrap();
        assert_eq!(measure_scaling(&plain, &b, 1.0, 1.0, 0.0).unwrap(), 3.0);
    }

    #[test]
    fn counting_measure_marginal() {
        let n = 200_000u64;
        let counting = AtomTable::new((0..=n).map(|i| ((i, 0), 1.0)), (n, 0), true).unwrap();
        let b = ScalingFunctions::identity();
        let rows = marginal_condition(&counting, Axis::One, &b, &[0.5, 1.0, 2.0], &[1e4]).unwrap();
        for r in rows {
            assert!((r.value - r.x).abs() < 2e-4, "{r:?}");
            assert!((r.normalized - r.x).abs() < 2e-4);
            assert_eq!(r.target, r.x);
        }
    }

    #[test]
    fn truncation_on_finite_support() {
        let table = AtomTable::new([((0, 0), 1.0), ((2, 1), 1.0)], (2, 1), true).unwrap();
        let b = ScalingFunctions::identity();
        let rows = truncation_condition(&table, &b, (1.0, 1.0), &[0.0, 0.5, 3.0], &[1.0]).unwrap();
        let whole = transform_scaling(&table, &b, 1.0, 1.0, 1.0).unwrap();
        assert!((rows[0].value - whole).abs() < 1e-15 && rows[0].ratio == 1.0);
        assert!(rows[1].value > 0.0);
        assert_eq!(rows[2].value, 0.0);
    }

    #[test]
    fn uhat_rhs_properties() {
        let p = ModelParams::reference();
        let q = QuadratureSpec::default();
        let v = uhat_limit_rhs(&p, 3, 1.0, 1.0, &q).unwrap();
        assert!(v > 0.0);
        // λ₂ → 0 approaches the λ₂-free integral
        let d = p.derive().unwrap();
        let free = quadrature::integrate_positive(
            |z: f64| z.powf(2.0 - 1.0 / d.c1) * (1.0 + z).powf(-5.0),
            &[1.0],
            &q,
        )
        .unwrap()
        .value
            * 24.0
            / d.c1;
        let tiny = uhat_limit_rhs(&p, 3, 1.0, 1e-12, &q).unwrap();
        assert!(rel(tiny, free) < 1e-6, "{tiny} vs {free}");
        assert!(matches!(uhat_limit_rhs(&p, 1, 1.0, 1.0, &q), Err(Error::InvalidK { .. })));
    }

    #[test]
    fn uhat_rhs_is_monotone_in_lambda2() {
        let p = ModelParams::reference();
        let q = QuadratureSpec::default();
        let vals: Vec<f64> = [4.0, 1.0, 0.1, 1e-3]
            .iter()
            .map(|&l2| uhat_limit_rhs(&p, 3, 1.0, l2, &q).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]), "{vals:?}");
    }

    #[test]
    fn measure_limit_matches_density_double_integral() {
        use crate::tail::{TailComponent, TailMeasure};
        let p = ModelParams::reference();
        let tail = TailMeasure::new(&p, QuadratureSpec::with_tolerance(1e-14, 1e-11)).unwrap();
        let outer = QuadratureSpec::with_tolerance(1e-11, 1e-8);
        let col = |x: f64| {
            quadrature::integrate(
                |y| if y > 0.0 { x.powi(3) * tail.density(TailComponent::One, x, y).unwrap() } else { 0.0 },
                0.0,
                1.0,
                &outer,
            )
            .unwrap()
            .value
        };
        let direct = quadrature::integrate(|x| if x > 0.0 { col(x) } else { 0.0 }, 0.0, 1.0, &outer)
            .unwrap()
            .value;
        let reduced = measure_limit(&p, 3, 1.0, 1.0, &QuadratureSpec::default()).unwrap();
        assert!(rel(direct, reduced) < 1e-6, "{direct} vs {reduced}");
    }

    #[test]
    fn marginal_constant_matches_measure_limit() {
        let p = ModelParams::reference();
        let c = marginal_limit_constant(&p, 3).unwrap();
        let v = measure_limit(&p, 3, 2.0, 1e12, &QuadratureSpec::default()).unwrap();
        assert!(rel(v, c * 2f64.powf(1.125)) < 1e-8, "{v} vs {c}");
    }
}
