//! Limit tail measures of the scaled degree pair.
//!
//! Under `(X/b₁(h), Y/b₂(h))` with `b₁(h) = h^{c1}`, `b₂(h) = h^{c2}`, the
//! component `j` of the limit law has the tail measure `V_j` with density
//! `f_j`; the combined measure is `p_B V₁ + (1 - p_B) V₂`. Both are
//! homogeneous: `V(c^{c1} x, c^{c2} y) = c⁻¹ V(x, y)` on upper rectangles.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::limit::{Component, LimitMixture};
use crate::params::{DerivedConstants, ModelParams};
use crate::quadrature::{self, QuadratureSpec};
use crate::special::{gamma_q, ln_gamma};

/// Which tail measure to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TailComponent {
    One,
    Two,
    Combined,
}

impl std::str::FromStr for TailComponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(TailComponent::One),
            "2" => Ok(TailComponent::Two),
            "combined" => Ok(TailComponent::Combined),
            _ => Err(Error::InvalidParams(format!(
                "component must be 1, 2 or combined, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TailMeasure {
    params: ModelParams,
    derived: DerivedConstants,
    branch_prob: f64,
    quad: QuadratureSpec,
}

impl TailMeasure {
    pub fn new(params: &ModelParams, quad: QuadratureSpec) -> Result<Self> {
        let params = params.validate()?;
        params.require_positive_deltas()?;
        let derived = params.derive()?;
        let branch_prob = params.branch_probability()?;
        Ok(TailMeasure {
            params,
            derived,
            branch_prob,
            quad,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn derived(&self) -> &DerivedConstants {
        &self.derived
    }

    pub fn branch_probability(&self) -> f64 {
        self.branch_prob
    }

    fn mixture(&self, component: Component) -> LimitMixture {
        LimitMixture::new(&self.params, component)
    }

    /// `ln ∫₀^∞ z^{-p} exp(-(x/z + y/z^a)) dz` for `x, y > 0`, `p > 1`.
    fn ln_kernel_integral(&self, p: f64, x: f64, y: f64) -> Result<f64> {
        let a = self.derived.a;
        // exponent in t = ln z, including the Jacobian
        let g = |t: f64| -(p - 1.0) * t - x * (-t).exp() - y * (-a * t).exp();
        // g' = -(p-1) + x e^{-t} + a y e^{-at} is decreasing; bracket its root
        let slope = |t: f64| -(p - 1.0) + x * (-t).exp() + a * y * (-a * t).exp();
        let (mut lo, mut hi) = (-1.0, 1.0);
        while slope(lo) < 0.0 {
            lo *= 2.0;
        }
        while slope(hi) > 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-12 {
                break;
            }
        }
        let t_star = 0.5 * (lo + hi);
        let shift = g(t_star);
        let integrand = |z: f64| (g(z.ln()) - shift).exp() / z;
        let pivots = [x, y.powf(1.0 / a), t_star.exp()];
        let est = quadrature::integrate_positive(integrand, &pivots, &self.quad)?;
        Ok(shift + est.value.ln())
    }

    fn density_component(&self, component: Component, x: f64, y: f64) -> Result<f64> {
        let d = &self.derived;
        let m = self.mixture(component);
        // the Gamma(r) densities of X/z and Y/z^a against the Pareto mixing law
        let p = 1.0 + 1.0 / d.c1 + m.r_in + d.a * m.r_out;
        let ln_pref = -d.c1.ln() - ln_gamma(m.r_in) - ln_gamma(m.r_out)
            + (m.r_in - 1.0) * x.ln()
            + (m.r_out - 1.0) * y.ln();
        Ok((ln_pref + self.ln_kernel_integral(p, x, y)?).exp())
    }

    /// Lebesgue density of the chosen tail measure at `(x, y) ∈ (0, ∞)²`.
    pub fn density(&self, which: TailComponent, x: f64, y: f64) -> Result<f64> {
        if !(x > 0.0 && y > 0.0) || !x.is_finite() || !y.is_finite() {
            return Err(Error::DomainError(format!(
                "density needs x, y > 0, got ({x}, {y})"
            )));
        }
        match which {
            TailComponent::One => self.density_component(Component::One, x, y),
            TailComponent::Two => self.density_component(Component::Two, x, y),
            TailComponent::Combined => self.combine(|c| self.density_component(c, x, y)),
        }
    }

    fn combine<F: Fn(Component) -> Result<f64>>(&self, f: F) -> Result<f64> {
        let p = self.branch_prob;
        let mut v = 0.0;
        if p > 0.0 {
            v += p * f(Component::One)?;
        }
        if p < 1.0 {
            v += (1.0 - p) * f(Component::Two)?;
        }
        Ok(v)
    }

    fn rect_mass_component(&self, component: Component, x_lo: f64, y_lo: f64) -> Result<f64> {
        let d = &self.derived;
        let m = self.mixture(component);
        let c1 = d.c1;
        let a = d.a;
        let integrand = |z: f64| {
            let qx = gamma_q(m.r_in, x_lo / z);
            if qx == 0.0 {
                return 0.0;
            }
            let qy = gamma_q(m.r_out, y_lo / z.powf(a));
            z.powf(-1.0 - 1.0 / c1) * qx * qy / c1
        };
        let mut pivots = Vec::new();
        if x_lo > 0.0 {
            pivots.push(x_lo);
        }
        if y_lo > 0.0 {
            pivots.push(y_lo.powf(1.0 / a));
        }
        Ok(quadrature::integrate_positive(integrand, &pivots, &self.quad)?.value)
    }

    /// `V([x_lo, ∞) × [y_lo, ∞))`.
    pub fn rect_mass(&self, which: TailComponent, x_lo: f64, y_lo: f64) -> Result<f64> {
        if !(x_lo >= 0.0 && y_lo >= 0.0) || (x_lo == 0.0 && y_lo == 0.0) {
            return Err(Error::DomainError(format!(
                "rectangle corner must be in [0,∞)² \\ {{0}}, got ({x_lo}, {y_lo})"
            )));
        }
        match which {
            TailComponent::One => self.rect_mass_component(Component::One, x_lo, y_lo),
            TailComponent::Two => self.rect_mass_component(Component::Two, x_lo, y_lo),
            TailComponent::Combined => self.combine(|c| self.rect_mass_component(c, x_lo, y_lo)),
        }
    }

    /// Closed form of `V₁([x, ∞) × [0, ∞)) = x^{-1/c1} Γ(δ_in+1+1/c1)/Γ(δ_in+1)`.
    pub fn marginal_mass_closed_form(&self, x: f64) -> f64 {
        let c1 = self.derived.c1;
        let r = self.params.delta_in + 1.0;
        x.powf(-1.0 / c1) * (ln_gamma(r + 1.0 / c1) - ln_gamma(r)).exp()
    }
}

/// Norm used to select extremes for the angular histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum Norm {
    #[default]
    L1,
    L2,
    Max,
}

impl Norm {
    pub fn eval(self, u: f64, v: f64) -> f64 {
        match self {
            Norm::L1 => u.abs() + v.abs(),
            Norm::L2 => u.hypot(v),
            Norm::Max => u.abs().max(v.abs()),
        }
    }
}

impl std::str::FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Norm::L1),
            "l2" => Ok(Norm::L2),
            "max" | "linf" => Ok(Norm::Max),
            _ => Err(Error::InvalidParams(format!("unknown norm {s:?}"))),
        }
    }
}

/// Pairs `(X^c, Y)` on a common scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StandardizedSample {
    pub exponent: f64,
    pub points: Vec<(f64, f64)>,
}

impl StandardizedSample {
    /// Radius at empirical quantile `q` under `norm`.
    pub fn radius_quantile(&self, q: f64, norm: Norm) -> Result<f64> {
        if self.points.is_empty() {
            return Err(Error::EmptyInput);
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidParams(format!("quantile {q} is outside [0,1]")));
        }
        let mut r: Vec<f64> = self.points.iter().map(|&(u, v)| norm.eval(u, v)).collect();
        let idx = ((q * r.len() as f64).ceil() as usize).clamp(1, r.len()) - 1;
        let (_, x, _) = r.select_nth_unstable_by(idx, f64::total_cmp);
        Ok(*x)
    }
}

/// `(x, y) ↦ (x^c, y)` with `c = (α_in - 1)/(α_out - 1)`.
pub fn standardize(pairs: &[(f64, f64)], derived: &DerivedConstants) -> StandardizedSample {
    standardize_with(pairs, derived.gamma_in / derived.gamma_out)
}

pub fn standardize_with(pairs: &[(f64, f64)], exponent: f64) -> StandardizedSample {
    let points = pairs
        .iter()
        .map(|&(x, y)| (if exponent == 1.0 { x } else { x.powf(exponent) }, y))
        .collect();
    StandardizedSample { exponent, points }
}

/// Normalized histogram of the angle `v/(u+v)` over equal-width bins of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngularHistogram {
    pub threshold: f64,
    pub exceedances: usize,
    /// Bin edges, `bins + 1` of them.
    pub edges: Vec<f64>,
    pub mass: Vec<f64>,
}

pub const MIN_EXCEEDANCES: usize = 50;

pub fn angular_histogram(
    sample: &StandardizedSample,
    threshold: f64,
    bins: usize,
    norm: Norm,
) -> Result<AngularHistogram> {
    if bins < 2 {
        return Err(Error::InvalidParams(format!("need at least 2 bins, got {bins}")));
    }
    if !(threshold > 0.0) {
        return Err(Error::InvalidParams(format!("threshold must be > 0, got {threshold}")));
    }
    let mut counts = vec![0usize; bins];
    let mut found = 0;
    for &(u, v) in &sample.points {
        if norm.eval(u, v) > threshold {
            let w = v / (u + v);
            let b = ((w * bins as f64) as usize).min(bins - 1);
            counts[b] += 1;
            found += 1;
        }
    }
    if found < MIN_EXCEEDANCES {
        return Err(Error::InsufficientExceedances {
            found,
            needed: MIN_EXCEEDANCES,
        });
    }
    Ok(AngularHistogram {
        threshold,
        exceedances: found,
        edges: (0..=bins).map(|b| b as f64 / bins as f64).collect(),
        mass: counts.iter().map(|&c| c as f64 / found as f64).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> TailMeasure {
        TailMeasure::new(&ModelParams::reference(), QuadratureSpec::default()).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn densities_homogeneous() {
        let t = reference();
        let d = *t.derived();
        for which in [TailComponent::One, TailComponent::Two, TailComponent::Combined] {
            for &x in &[0.3, 1.0, 4.0] {
                for &y in &[0.5, 2.0] {
                    for &c in &[0.1f64, 2.0, 10.0] {
                        let lhs = t.density(which, c.powf(d.c1) * x, c.powf(d.c2) * y).unwrap()
                            * c.powf(1.0 + d.c1 + d.c2);
                        let rhs = t.density(which, x, y).unwrap();
                        assert!(rel(lhs, rhs) < 1e-8, "{which:?} ({x},{y},{c}): {lhs} vs {rhs}");
                    }
                }
            }
        }
    }

    #[test]
    fn components_swap_under_symmetric_parameters() {
        let t = TailMeasure::new(&ModelParams::new(0.35, 0.3, 0.35, 0.7, 0.7), QuadratureSpec::default())
            .unwrap();
        assert!((t.derived().a - 1.0).abs() < 1e-15);
        for &(x, y) in &[(0.5, 1.5), (1.0, 1.0), (3.0, 0.2)] {
            let f1 = t.density(TailComponent::One, x, y).unwrap();
            let f2 = t.density(TailComponent::Two, y, x).unwrap();
            assert!(rel(f1, f2) < 1e-10, "{f1} vs {f2}");
        }
    }

    #[test]
    fn density_rejects_axes() {
        assert!(matches!(
            reference().density(TailComponent::One, 0.0, 1.0),
            Err(Error::DomainError(_))
        ));
        assert!(matches!(
            reference().rect_mass(TailComponent::One, 0.0, 0.0),
            Err(Error::DomainError(_))
        ));
    }

    #[test]
    fn incomplete_gamma_mellin_identity() {
        // ∫₀^∞ t^{s-1} Q(r, t) dt = Γ(r+s)/(s Γ(r))
        for &(r, s) in &[(2.0, 1.875), (1.0, 0.5), (3.5, 2.2)] {
            let v = quadrature::integrate_positive(
                |t: f64| t.powf(s - 1.0) * gamma_q(r, t),
                &[r],
                &QuadratureSpec::default(),
            )
            .unwrap()
            .value;
            let closed = (ln_gamma(r + s) - ln_gamma(r)).exp() / s;
            assert!(rel(v, closed) < 1e-10, "r={r} s={s}: {v} vs {closed}");
        }
    }

    #[test]
    fn marginal_mass_matches_closed_form() {
        let t = reference();
        for &x in &[0.5, 1.0, 2.0, 5.0] {
            let v = t.rect_mass(TailComponent::One, x, 0.0).unwrap();
            let c = t.marginal_mass_closed_form(x);
            assert!(rel(v, c) < 1e-8, "{x}: {v} vs {c}");
        }
    }

    #[test]
    fn rect_mass_homogeneous_and_linear() {
        let t = reference();
        let d = *t.derived();
        for &c in &[0.1f64, 0.3, 1.0, 3.0, 10.0] {
            for which in [TailComponent::One, TailComponent::Two] {
                let lhs = t.rect_mass(which, c.powf(d.c1) * 0.7, c.powf(d.c2) * 1.3).unwrap();
                let rhs = t.rect_mass(which, 0.7, 1.3).unwrap() / c;
                assert!(rel(lhs, rhs) < 1e-8);
            }
        }
        let p = t.branch_probability();
        let v1 = t.rect_mass(TailComponent::One, 1.0, 2.0).unwrap();
        let v2 = t.rect_mass(TailComponent::Two, 1.0, 2.0).unwrap();
        let vc = t.rect_mass(TailComponent::Combined, 1.0, 2.0).unwrap();
        assert_eq!(vc, p * v1 + (1.0 - p) * v2);
    }

    #[test]
    fn rect_mass_matches_direct_double_integral() {
        let t = reference();
        let inner = QuadratureSpec::with_tolerance(1e-13, 1e-10);
        let outer = QuadratureSpec::with_tolerance(1e-11, 1e-8);
        for which in [TailComponent::One, TailComponent::Two] {
            let col = |x: f64| {
                quadrature::integrate_upper(|y| t.density(which, x, y).unwrap(), 1.0, &inner)
                    .unwrap()
                    .value
            };
            let direct = quadrature::integrate_upper(col, 1.0, &outer).unwrap().value;
            let reduced = t.rect_mass(which, 1.0, 1.0).unwrap();
            assert!((direct - reduced).abs() < 1e-6, "{which:?}: {direct} vs {reduced}");
        }
    }

    #[test]
    fn mixed_partial_recovers_density() {
        let t = reference();
        for which in [TailComponent::One, TailComponent::Two] {
            for &(x, y) in &[(1.0, 1.0), (0.6, 2.0)] {
                let (hx, hy) = (1e-3 * x, 1e-3 * y);
                let v = |u, w| t.rect_mass(which, u, w).unwrap();
                let d2 = (v(x + hx, y + hy) - v(x + hx, y - hy) - v(x - hx, y + hy) + v(x - hx, y - hy))
                    / (4.0 * hx * hy);
                let f = t.density(which, x, y).unwrap();
                assert!(rel(d2, f) < 1e-4, "{which:?} ({x},{y}): {d2} vs {f}");
            }
        }
    }

    #[test]
    fn standardization() {
        let s = standardize_with(&[(4.0, 3.0), (9.0, 0.0)], 0.5);
        assert_eq!(s.points, vec![(2.0, 3.0), (3.0, 0.0)]);
        let id = standardize_with(&[(4.0, 3.0)], 1.0);
        assert_eq!(id.points, vec![(4.0, 3.0)]);
        let d = ModelParams::reference().derive().unwrap();
        assert!((standardize(&[], &d).exponent - 1.875 / (15.0 / 7.0)).abs() < 1e-14);
    }

    #[test]
    fn angular_histogram_extremes() {
        let diag = standardize_with(&(1..=100).map(|i| (i as f64, i as f64)).collect::<Vec<_>>(), 1.0);
        let h = angular_histogram(&diag, 1.0, 4, Norm::L1).unwrap();
        assert_eq!(h.mass, vec![0.0, 0.0, 1.0, 0.0]);

        let axes: Vec<(f64, f64)> = (1..=100)
            .map(|i| if i % 2 == 0 { (i as f64, 0.0) } else { (0.0, i as f64) })
            .collect();
        let h = angular_histogram(&standardize_with(&axes, 1.0), 0.5, 5, Norm::Max).unwrap();
        assert_eq!(h.mass[1..4], [0.0, 0.0, 0.0]);
        assert!((h.mass[0] - 0.5).abs() < 1e-15 && (h.mass[4] - 0.5).abs() < 1e-15);

        assert!(matches!(
            angular_histogram(&diag, 1e6, 4, Norm::L1),
            Err(Error::InsufficientExceedances { found: 0, needed: 50 })
        ));
    }
}
