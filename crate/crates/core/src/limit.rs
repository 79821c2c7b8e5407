//! The limiting joint law of (in-degree, out-degree).
//!
//! Its generating function splits as
//! `φ(x, y) = p_B x φ₁(x, y) + (1 - p_B) y φ₂(x, y)` with `p_B = γ/(α+γ)`, and
//! each `φ_j` is a Pareto mixture of independent negative binomials: given a
//! latent `Z` with density `c1⁻¹ z^{-1-1/c1}` on `(1, ∞)`,
//! `X_j ~ NB(r_in, 1/Z)` and `Y_j ~ NB(r_out, Z^{-a})`. This follows from
//! `Σ_m nb(m; r, 1/z) x^m = (x + (1 - x) z)^{-r}`.
//!
//! Three numerical routes are kept apart:
//! * `phi_component` integrates the generating function in `w` with
//!   `z = w^{-2 c1}`, which turns the Pareto density into `2w dw` and makes the
//!   integrand C¹ at `w = 0`;
//! * `pmf_component` integrates the mixed negative-binomial mass in `t = ln z`
//!   adaptively, split at the two conditional modes;
//! * `pmf_table` applies one shared composite Gauss–Legendre rule in `t` to a
//!   whole table at once.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Open01, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::census::JointPmf;
use crate::error::{Error, Result};
use crate::params::{DerivedConstants, ModelParams};
use crate::quadrature::{self, FixedRule, QuadratureSpec};
use crate::special::ln_nb_coefficient;

/// Mixture component `j ∈ {1, 2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Component {
    One,
    Two,
}

impl Component {
    pub fn from_index(j: u8) -> Result<Self> {
        match j {
            1 => Ok(Component::One),
            2 => Ok(Component::Two),
            _ => Err(Error::InvalidParams(format!("component must be 1 or 2, got {j}"))),
        }
    }
}

/// Negative-binomial shapes `(r_in, r_out)` of one mixture component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitMixture {
    pub component: Component,
    pub r_in: f64,
    pub r_out: f64,
}

impl LimitMixture {
    pub fn new(params: &ModelParams, component: Component) -> Self {
        let (r_in, r_out) = match component {
            Component::One => (params.delta_in + 1.0, params.delta_out),
            Component::Two => (params.delta_in, params.delta_out + 1.0),
        };
        LimitMixture {
            component,
            r_in,
            r_out,
        }
    }
}

/// One draw of `(I, O)` with the branch that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LimitDraw {
    /// `B = 1`: `(I, O) = (1 + X₁, Y₁)`.
    pub first_branch: bool,
    pub in_degree: u64,
    pub out_degree: u64,
}

#[derive(Debug, Clone)]
pub struct LimitDistribution {
    params: ModelParams,
    derived: DerivedConstants,
    branch_prob: f64,
    quad: QuadratureSpec,
}

/// `ln(x + (1 - x) z)` for `x ∈ [0, 1]`, given `ln z` with `z ≥ 1`.
#[inline]
fn ln_pgf_base(x: f64, ln_z: f64) -> f64 {
    if x >= 1.0 {
        0.0
    } else {
        ln_z + ((1.0 - x) + x * (-ln_z).exp()).ln()
    }
}

/// `ln nb(m; r, e^{-s})` for `s ≥ 0`, with a point mass at zero when `r = 0`.
#[inline]
fn ln_nb_at(m: u64, r: f64, coeff: f64, s: f64) -> f64 {
    if r == 0.0 {
        return if m == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if m == 0 {
        return -r * s;
    }
    if s <= 0.0 {
        return f64::NEG_INFINITY;
    }
    coeff - r * s + m as f64 * (-(-s).exp_m1()).ln()
}

impl LimitDistribution {
    pub fn new(params: &ModelParams, quad: QuadratureSpec) -> Result<Self> {
        let params = params.validate()?;
        let derived = params.derive()?;
        let branch_prob = params.branch_probability()?;
        Ok(LimitDistribution {
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

    /// `P[B = 1] = γ/(α+γ)`.
    pub fn branch_probability(&self) -> f64 {
        self.branch_prob
    }

    pub fn mixture(&self, component: Component) -> LimitMixture {
        LimitMixture::new(&self.params, component)
    }

    fn check_unit_square(x: f64, y: f64) -> Result<()> {
        if (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y) {
            Ok(())
        } else {
            Err(Error::DomainError(format!("({x}, {y}) is outside [0,1]²")))
        }
    }

    /// `φ_j(x, y)` by quadrature.
    pub fn phi_component(&self, component: Component, x: f64, y: f64) -> Result<f64> {
        Self::check_unit_square(x, y)?;
        let m = self.mixture(component);
        let c1 = self.derived.c1;
        let a = self.derived.a;
        // z = w^{-2 c1}: c1⁻¹ z^{-1-1/c1} dz = 2w dw on w ∈ (0, 1)
        let integrand = |w: f64| {
            if w <= 0.0 {
                return 0.0;
            }
            let ln_z = -2.0 * c1 * w.ln();
            let ln_g = -m.r_in * ln_pgf_base(x, ln_z) - m.r_out * ln_pgf_base(y, a * ln_z);
            2.0 * w * ln_g.exp()
        };
        Ok(quadrature::integrate_with_breaks(integrand, &[0.0, 0.5, 1.0], &self.quad)?.value)
    }

    /// `φ(x, y) = p_B x φ₁ + (1 - p_B) y φ₂`.
    pub fn phi(&self, x: f64, y: f64) -> Result<f64> {
        let p = self.branch_prob;
        let mut v = 0.0;
        if p > 0.0 {
            v += p * x * self.phi_component(Component::One, x, y)?;
        }
        if p < 1.0 {
            v += (1.0 - p) * y * self.phi_component(Component::Two, x, y)?;
        }
        Ok(v)
    }

    /// `P[X_j = i, Y_j = k]`.
    pub fn pmf_component(&self, component: Component, i: u64, k: u64) -> Result<f64> {
        let m = self.mixture(component);
        if (m.r_in == 0.0 && i > 0) || (m.r_out == 0.0 && k > 0) {
            return Ok(0.0);
        }
        let c1 = self.derived.c1;
        let a = self.derived.a;
        let ci = if m.r_in > 0.0 { ln_nb_coefficient(i, m.r_in) } else { 0.0 };
        let ck = if m.r_out > 0.0 { ln_nb_coefficient(k, m.r_out) } else { 0.0 };
        let ln_c1 = c1.ln();
        let integrand = |t: f64| {
            let v = -t / c1 - ln_c1 + ln_nb_at(i, m.r_in, ci, t) + ln_nb_at(k, m.r_out, ck, a * t);
            v.exp()
        };
        let mode_in = if m.r_in > 0.0 { (i as f64 / m.r_in).ln_1p() } else { 0.0 };
        let mode_out = if m.r_out > 0.0 { (k as f64 / m.r_out).ln_1p() / a } else { 0.0 };
        let mut breaks = vec![0.0];
        for b in [mode_in.min(mode_out), mode_in.max(mode_out)] {
            if b > *breaks.last().unwrap() + 1e-3 {
                breaks.push(b);
            }
        }
        Ok(quadrature::integrate_from(integrand, &breaks, &self.quad)?.value)
    }

    /// `p_ij = p_B P[X₁ = i-1, Y₁ = j] + (1 - p_B) P[X₂ = i, Y₂ = j-1]`.
    pub fn pmf(&self, i: u64, j: u64) -> Result<f64> {
        let p = self.branch_prob;
        let mut v = 0.0;
        if i >= 1 && p > 0.0 {
            v += p * self.pmf_component(Component::One, i - 1, j)?;
        }
        if j >= 1 && p < 1.0 {
            v += (1.0 - p) * self.pmf_component(Component::Two, i, j - 1)?;
        }
        Ok(v)
    }

    /// Dense table `T[i][k] = P[X_j = i, Y_j = k]`, `i ≤ i_max`, `k ≤ k_max`,
    /// from one shared quadrature rule.
    pub fn pmf_component_table(&self, component: Component, i_max: u64, k_max: u64) -> Vec<Vec<f64>> {
        let m = self.mixture(component);
        let c1 = self.derived.c1;
        let a = self.derived.a;
        let rule = self.table_rule(&m, i_max, k_max);
        let ln_c1 = c1.ln();
        let coeff_in: Vec<f64> = (0..=i_max)
            .map(|i| if m.r_in > 0.0 { ln_nb_coefficient(i, m.r_in) } else { 0.0 })
            .collect();
        let coeff_out: Vec<f64> = (0..=k_max)
            .map(|k| if m.r_out > 0.0 { ln_nb_coefficient(k, m.r_out) } else { 0.0 })
            .collect();
        let rows = (i_max + 1) as usize;
        let cols = (k_max + 1) as usize;
        // per node: weighted column of X masses and row of Y masses
        let node_terms: Vec<(Vec<f64>, Vec<f64>)> = rule
            .nodes
            .par_iter()
            .zip(rule.weights.par_iter())
            .map(|(&t, &w)| {
                let base = w * (-t / c1 - ln_c1).exp();
                let xs: Vec<f64> = (0..rows)
                    .map(|i| base * ln_nb_at(i as u64, m.r_in, coeff_in[i], t).exp())
                    .collect();
                let ys: Vec<f64> = (0..cols)
                    .map(|k| ln_nb_at(k as u64, m.r_out, coeff_out[k], a * t).exp())
                    .collect();
                (xs, ys)
            })
            .collect();
        (0..rows)
            .into_par_iter()
            .map(|i| {
                let mut row = vec![0.0; cols];
                for (xs, ys) in &node_terms {
                    let xi = xs[i];
                    if xi == 0.0 {
                        continue;
                    }
                    for (r, &y) in row.iter_mut().zip(ys) {
                        *r += xi * y;
                    }
                }
                row
            })
            .collect()
    }

    fn table_rule(&self, m: &LimitMixture, i_max: u64, k_max: u64) -> FixedRule {
        let c1 = self.derived.c1;
        let a = self.derived.a;
        let peak_in = if m.r_in > 0.0 { (i_max as f64 / m.r_in).ln_1p() } else { 0.0 };
        let peak_out = if m.r_out > 0.0 { (k_max as f64 / m.r_out).ln_1p() / a } else { 0.0 };
        // past the last mode the integrand falls at least like e^{-t/c1}
        let t_max = peak_in.max(peak_out) + 40.0 * c1 + 2.0;
        let r_max = m.r_in.max(m.r_out * a * a).max(1.0);
        let width = (0.25f64).min(0.5 / r_max.sqrt());
        FixedRule::composite(0.0, t_max, (t_max / width).ceil() as usize)
    }

    /// The joint pmf on `[0, i_max] × [0, j_max]`.
    pub fn pmf_table(&self, i_max: u64, j_max: u64) -> Result<JointPmf> {
        let p = self.branch_prob;
        let t1 = (p > 0.0 && i_max >= 1).then(|| self.pmf_component_table(Component::One, i_max - 1, j_max));
        let t2 = (p < 1.0 && j_max >= 1).then(|| self.pmf_component_table(Component::Two, i_max, j_max - 1));
        let mut cells = Vec::with_capacity(((i_max + 1) * (j_max + 1)) as usize);
        for i in 0..=i_max {
            for j in 0..=j_max {
                let mut v = 0.0;
                if let (Some(t), true) = (&t1, i >= 1) {
                    v += p * t[(i - 1) as usize][j as usize];
                }
                if let (Some(t), true) = (&t2, j >= 1) {
                    v += (1.0 - p) * t[i as usize][(j - 1) as usize];
                }
                cells.push((i, j, v));
            }
        }
        JointPmf::from_masses(cells)
    }

    fn require_sampling(&self) -> Result<()> {
        self.params.require_positive_deltas()
    }

    /// One draw of `(X_j, Y_j)`: `Z = U^{-c1}`, then Gamma–Poisson negative
    /// binomials with success probabilities `1/Z` and `Z^{-a}`.
    pub fn sample_component<R: Rng + ?Sized>(&self, component: Component, rng: &mut R) -> (u64, u64) {
        let m = self.mixture(component);
        let u: f64 = Open01.sample(rng);
        let ln_z = -self.derived.c1 * u.ln();
        let x = sample_nb(m.r_in, ln_z.exp_m1(), rng);
        let y = sample_nb(m.r_out, (self.derived.a * ln_z).exp_m1(), rng);
        (x, y)
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> LimitDraw {
        let first = rng.random::<f64>() < self.branch_prob;
        if first {
            let (x, y) = self.sample_component(Component::One, rng);
            LimitDraw {
                first_branch: true,
                in_degree: 1 + x,
                out_degree: y,
            }
        } else {
            let (x, y) = self.sample_component(Component::Two, rng);
            LimitDraw {
                first_branch: false,
                in_degree: x,
                out_degree: 1 + y,
            }
        }
    }

    /// `n` i.i.d. draws of `(I, O)`.
    pub fn sample_limit<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<(u64, u64)>> {
        self.require_sampling()?;
        Ok((0..n)
            .map(|_| {
                let d = self.draw(rng);
                (d.in_degree, d.out_degree)
            })
            .collect())
    }
}

/// `NB(r, p)` with odds `(1 - p)/p = scale`, drawn as Poisson(Gamma(r, scale)).
fn sample_nb<R: Rng + ?Sized>(r: f64, scale: f64, rng: &mut R) -> u64 {
    if r <= 0.0 || scale <= 0.0 {
        return 0;
    }
    let lambda = Gamma::new(r, scale).expect("positive shape and scale").sample(rng);
    if lambda <= 0.0 {
        return 0;
    }
    match Poisson::new(lambda) {
        Ok(p) => p.sample(rng) as u64,
        // beyond the sampler's range the Poisson is indistinguishable from its mean
        Err(_) => lambda.round() as u64,
    }
}
