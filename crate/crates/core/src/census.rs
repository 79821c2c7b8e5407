//! Empirical joint degree distributions and tail-index estimates.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Sparse table of counts `N_ij` keyed by (in-degree, out-degree).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JointCountTable {
    counts: BTreeMap<(u64, u64), u64>,
}

impl JointCountTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, i: u64, j: u64, count: u64) {
        if count > 0 {
            *self.counts.entry((i, j)).or_insert(0) += count;
        }
    }

    pub fn get(&self, i: u64, j: u64) -> u64 {
        self.counts.get(&(i, j)).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64, u64)> + '_ {
        self.counts.iter().map(|(&(i, j), &c)| (i, j, c))
    }

    /// `Σ N_ij`, the number of nodes.
    pub fn node_total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// `(Σ i N_ij, Σ j N_ij)`; both equal the edge count for a graph census.
    pub fn degree_sums(&self) -> (u64, u64) {
        self.iter()
            .fold((0, 0), |(a, b), (i, j, c)| (a + i * c, b + j * c))
    }

    /// One entry per node: its in-degree (`Margin::In`) or out-degree.
    pub fn degree_samples(&self, margin: Margin) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.node_total() as usize);
        for (i, j, c) in self.iter() {
            let d = match margin {
                Margin::In => i,
                Margin::Out => j,
            };
            out.extend(std::iter::repeat_n(d as f64, c as usize));
        }
        out
    }
}

impl FromIterator<(u64, u64, u64)> for JointCountTable {
    fn from_iter<T: IntoIterator<Item = (u64, u64, u64)>>(iter: T) -> Self {
        let mut t = JointCountTable::new();
        for (i, j, c) in iter {
            t.add(i, j, c);
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Margin {
    In,
    Out,
}

/// Sparse joint probability masses; may be truncated (total below one).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JointPmf {
    masses: BTreeMap<(u64, u64), f64>,
    i_max: u64,
    j_max: u64,
    total: f64,
}

impl JointPmf {
    pub fn from_masses<I: IntoIterator<Item = (u64, u64, f64)>>(cells: I) -> Result<Self> {
        let mut pmf = JointPmf::default();
        for (i, j, p) in cells {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::DomainError(format!("mass {p} at ({i},{j})")));
            }
            if p > 0.0 {
                *pmf.masses.entry((i, j)).or_insert(0.0) += p;
                pmf.i_max = pmf.i_max.max(i);
                pmf.j_max = pmf.j_max.max(j);
            }
        }
        pmf.total = pmf.masses.values().sum();
        if pmf.total > 1.0 + 1e-9 {
            return Err(Error::DomainError(format!("total mass {} exceeds 1", pmf.total)));
        }
        Ok(pmf)
    }

    pub fn get(&self, i: u64, j: u64) -> f64 {
        self.masses.get(&(i, j)).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn support_bound(&self) -> (u64, u64) {
        (self.i_max, self.j_max)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64, f64)> + '_ {
        self.masses.iter().map(|(&(i, j), &p)| (i, j, p))
    }

    pub fn marginal(&self, margin: Margin) -> BTreeMap<u64, f64> {
        let mut m = BTreeMap::new();
        for (i, j, p) in self.iter() {
            let key = match margin {
                Margin::In => i,
                Margin::Out => j,
            };
            *m.entry(key).or_insert(0.0) += p;
        }
        m
    }

    pub fn mean(&self, margin: Margin) -> f64 {
        self.marginal(margin).iter().map(|(&d, &p)| d as f64 * p).sum()
    }
}

/// Tail-index estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailFit {
    pub index_estimate: f64,
    pub k_used: usize,
    pub stderr: f64,
}

/// Axis-aligned region `[0, i_max] × [0, j_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Region {
    pub i_max: u64,
    pub j_max: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmfComparison {
    pub total_variation: f64,
    pub max_abs_diff: f64,
    /// `(i, j, p_ij - q_ij)` for every cell of the region.
    pub cells: Vec<(u64, u64, f64)>,
}

pub fn empirical_pmf(counts: &JointCountTable) -> Result<JointPmf> {
    let n = counts.node_total();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let n = n as f64;
    JointPmf::from_masses(counts.iter().map(|(i, j, c)| (i, j, c as f64 / n)))
}

/// Hill estimator from the `k` largest of `samples`:
/// `[ (1/k) Σ_{m≤k} ln(X_(m) / X_(k+1)) ]^{-1}` with descending order statistics.
pub fn hill_estimate(samples: &[f64], k: usize) -> Result<TailFit> {
    if k < 2 || k + 1 > samples.len() {
        return Err(Error::InsufficientData(format!(
            "hill needs 2 <= k < n, got k = {k}, n = {}",
            samples.len()
        )));
    }
    if let Some(&bad) = samples.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::NonPositiveSample(bad));
    }
    let mut sorted = samples.to_vec();
    // only the top k+1 matter
    sorted.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
    let threshold = sorted[k];
    let top = &sorted[..k];
    let mean_log: f64 = top.iter().map(|&x| (x / threshold).ln()).sum::<f64>() / k as f64;
    if mean_log <= 0.0 {
        return Err(Error::DegenerateTailSample);
    }
    let index_estimate = 1.0 / mean_log;
    Ok(TailFit {
        index_estimate,
        k_used: k,
        stderr: index_estimate / (k as f64).sqrt(),
    })
}

/// Least-squares slope of `ln p_i` against `ln i` over `i >= i_min`;
/// the estimate is minus the slope.
pub fn loglog_slope(marginal: &BTreeMap<u64, f64>, i_min: u64) -> Result<TailFit> {
    let pts: Vec<(f64, f64)> = marginal
        .range(i_min.max(1)..)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&i, &p)| ((i as f64).ln(), p.ln()))
        .collect();
    let n = pts.len();
    if n < 5 {
        return Err(Error::InsufficientData(format!(
            "log-log fit needs at least 5 positive points with i >= {i_min}, found {n}"
        )));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData("log-degrees have no spread".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let stderr = (rss / (nf - 2.0) / sxx).sqrt();
    Ok(TailFit {
        index_estimate: -slope,
        k_used: n,
        stderr,
    })
}

/// Total variation and cellwise differences on `region`; absent cells are zero.
pub fn compare_pmf(p: &JointPmf, q: &JointPmf, region: Region) -> PmfComparison {
    let mut cells = Vec::with_capacity(((region.i_max + 1) * (region.j_max + 1)) as usize);
    let mut l1 = 0.0;
    let mut max_abs = 0.0f64;
    for i in 0..=region.i_max {
        for j in 0..=region.j_max {
            let d = p.get(i, j) - q.get(i, j);
            l1 += d.abs();
            max_abs = max_abs.max(d.abs());
            cells.push((i, j, d));
        }
    }
    PmfComparison {
        total_variation: 0.5 * l1,
        max_abs_diff: max_abs,
        cells,
    }
}
