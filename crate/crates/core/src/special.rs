//! Gamma-function helpers and the negative-binomial mass function.

use statrs::function::gamma as sg;

pub fn ln_gamma(x: f64) -> f64 {
    sg::ln_gamma(x)
}

pub fn gamma(x: f64) -> f64 {
    sg::gamma(x)
}

/// Regularized upper incomplete gamma `Q(a, x)`, extended by `Q(a, 0) = 1`
/// and `Q(a, ∞) = 0`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if a == 0.0 {
        // the shape-zero gamma law is a point mass at zero
        0.0
    } else if x.is_infinite() {
        0.0
    } else {
        sg::gamma_ur(a, x)
    }
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if a == 0.0 || x.is_infinite() {
        1.0
    } else {
        sg::gamma_lr(a, x)
    }
}

/// `ln Γ(r + m) - ln Γ(r) - ln m!`, the log of the negative-binomial
/// combinatorial factor.
pub fn ln_nb_coefficient(m: u64, r: f64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let m = m as f64;
    ln_gamma(r + m) - ln_gamma(r) - ln_gamma(m + 1.0)
}

/// `nb(m; r, p) = Γ(r+m)/(Γ(r) m!) p^r (1-p)^m` given `ln p` and `ln(1-p)`.
pub fn nb_pmf_ln(m: u64, r: f64, ln_p: f64, ln_q: f64) -> f64 {
    let tail = if m == 0 { 0.0 } else { m as f64 * ln_q };
    (ln_nb_coefficient(m, r) + r * ln_p + tail).exp()
}

/// Negative-binomial pmf with success probability `p` in `(0, 1]`.
pub fn nb_pmf(m: u64, r: f64, p: f64) -> f64 {
    if p >= 1.0 {
        return if m == 0 { 1.0 } else { 0.0 };
    }
    nb_pmf_ln(m, r, p.ln(), (-p).ln_1p())
}

/// `Π_{d=1}^{k} (x + d)`.
pub fn rising_product(x: f64, k: u32) -> f64 {
    (1..=k).map(|d| x + d as f64).product()
}
