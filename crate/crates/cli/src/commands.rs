use std::path::{Path, PathBuf};

use heavytail_pa::census::{self, Region};
use heavytail_pa::checks;
use heavytail_pa::quadrature::QuadratureSpec;
use heavytail_pa::rng;
use heavytail_pa::sim::{self, GrowthLimits, SeedSpec};
use heavytail_pa::tail::{self, Norm};
use heavytail_pa::tauberian::Axis;
use heavytail_pa::{Error, LimitDistribution, Margin, ModelParams, Result, TailComponent, TailMeasure};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::*;
use crate::output::{self, Metadata};

/// Draws per sample-limit chunk; chunk `c` uses stream `c` of the seed, so
/// output does not depend on the thread count.
const SAMPLE_CHUNK: usize = 65_536;

/// Adaptive pmf bounds double from here until the added mass drops below
/// `PMF_MASS_INCREMENT`.
const PMF_START_BOUND: u64 = 64;
const PMF_MASS_INCREMENT: f64 = 1e-6;

impl ParamArgs {
    /// File (if any), then flag overrides, then validation.
    pub fn resolve(&self) -> Result<ModelParams> {
        let mut p = match &self.params {
            Some(path) => std::fs::read_to_string(path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?
                .parse()?,
            None => ModelParams::reference(),
        };
        let overrides = [
            (&mut p.alpha, self.alpha),
            (&mut p.beta, self.beta),
            (&mut p.gamma, self.gamma),
            (&mut p.delta_in, self.delta_in),
            (&mut p.delta_out, self.delta_out),
        ];
        for (slot, value) in overrides {
            if let Some(v) = value {
                *slot = v;
            }
        }
        p.validate()
    }
}

impl QuadArgs {
    pub fn spec(&self) -> Result<QuadratureSpec> {
        if !(self.tol > 0.0) || self.max_subdivisions == 0 {
            return Err(Error::InvalidParams(format!(
                "quadrature tolerance must be > 0 and subdivisions >= 1, got {} and {}",
                self.tol, self.max_subdivisions
            )));
        }
        Ok(QuadratureSpec {
            max_subdivisions: self.max_subdivisions,
            ..QuadratureSpec::with_tolerance(self.tol, self.tol)
        })
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidParams(msg.into())
}

/// `dir/name.ext` becomes `dir/name.r<r>.ext`.
fn replica_path(path: &Path, r: u64) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.r{r}.{}", ext.to_string_lossy()),
        None => format!("{stem}.r{r}"),
    };
    path.with_file_name(name)
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let params = a.params.resolve()?;
    if a.replicas == 0 {
        return Err(usage("--replicas must be at least 1"));
    }
    let limits = GrowthLimits {
        memory_budget_bytes: a.memory_budget,
    };
    let run = |r: u64| -> Result<()> {
        let mut g = sim::seed_graph(&SeedSpec::SelfLoop, &params)?;
        let mut rng = rng::replica(a.seed, r);
        sim::grow(&mut g, a.edges, &params, &mut rng, &limits)?;
        let (counts_path, graph_path) = if a.replicas == 1 {
            (a.counts.clone(), a.out.clone())
        } else {
            (replica_path(&a.counts, r), a.out.as_deref().map(|p| replica_path(p, r)))
        };
        if let Some(path) = graph_path {
            let file = std::fs::File::create(&path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            sim::write_binary(&g, std::io::BufWriter::new(file))?;
        }
        let meta = Metadata::new("simulate")
            .params(&params)
            .seed(a.seed)
            .option("edges", a.edges)
            .option("replica", r)
            .option("nodes", g.node_count());
        output::write_counts(&counts_path, &meta, &sim::degree_counts(&g))
    };
    (0..a.replicas).into_par_iter().try_for_each(run)
}

pub fn analytic_pmf(a: &AnalyticPmfArgs) -> Result<()> {
    let params = a.params.resolve()?;
    let dist = LimitDistribution::new(&params, a.quad.spec()?)?;
    let (pmf, adaptive) = match (a.imax, a.jmax) {
        (Some(i), Some(j)) => (dist.pmf_table(i, j)?, false),
        (Some(n), None) | (None, Some(n)) => (dist.pmf_table(n, n)?, false),
        (None, None) => {
            let cap = a.max_bound.max(1);
            let mut n = PMF_START_BOUND.min(cap);
            let mut pmf = dist.pmf_table(n, n)?;
            while n < cap {
                let next_n = (2 * n).min(cap);
                let next = dist.pmf_table(next_n, next_n)?;
                let gain = next.total() - pmf.total();
                n = next_n;
                pmf = next;
                if gain < PMF_MASS_INCREMENT {
                    break;
                }
            }
            (pmf, true)
        }
    };
    let (i_max, j_max) = match (a.imax, a.jmax, adaptive) {
        (Some(i), Some(j), _) => (i, j),
        (Some(n), None, _) | (None, Some(n), _) => (n, n),
        _ => pmf.support_bound(),
    };
    let meta = Metadata::new("analytic-pmf")
        .params(&params)
        .option("imax", i_max)
        .option("jmax", j_max)
        .option("adaptive", adaptive)
        .option("tol", a.quad.tol)
        .option("captured_mass", pmf.total());
    output::write_csv(
        &a.out,
        &meta,
        "i,j,p",
        pmf.iter().map(|(i, j, p)| format!("{i},{j},{p:e}")),
    )?;
    eprintln!("captured mass {:.9} on [0,{i_max}]x[0,{j_max}]", pmf.total());
    Ok(())
}

pub fn sample_limit(a: &SampleLimitArgs) -> Result<()> {
    let params = a.params.resolve()?;
    let dist = LimitDistribution::new(&params, QuadratureSpec::default())?;
    let chunks = a.n.div_ceil(SAMPLE_CHUNK);
    let draws: Vec<Vec<(u64, u64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = SAMPLE_CHUNK.min(a.n - c * SAMPLE_CHUNK);
            dist.sample_limit(len, &mut rng::replica(a.seed, c as u64))
        })
        .collect::<Result<_>>()?;
    let meta = Metadata::new("sample-limit")
        .params(&params)
        .seed(a.seed)
        .option("n", a.n)
        .option("chunk", SAMPLE_CHUNK);
    output::write_csv(
        &a.out,
        &meta,
        "I,O",
        draws.iter().flatten().map(|(i, o)| format!("{i},{o}")),
    )
}

/// `lo:hi:n` (linear) or `lo:hi:n:log`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || usage(format!("grid spec '{spec}' is not lo:hi:n[:log]"));
    if !(3..=4).contains(&parts.len()) {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    let log = match parts.get(3) {
        None => false,
        Some(&"log") => true,
        Some(_) => return Err(bad()),
    };
    if n == 0 || !(lo.is_finite() && hi.is_finite()) || hi < lo || (log && !(lo > 0.0)) {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let step = |k: usize| k as f64 / (n - 1) as f64;
    Ok((0..n)
        .map(|k| {
            if log {
                (lo.ln() + step(k) * (hi / lo).ln()).exp()
            } else {
                lo + step(k) * (hi - lo)
            }
        })
        .collect())
}

fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let bad = || usage(format!("expected a:b, got '{s}'"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn parse_pairs(list: &Option<Vec<String>>, default: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    match list {
        Some(v) => v.iter().map(|s| parse_pair(s)).collect(),
        None => Ok(default.to_vec()),
    }
}

pub fn density(a: &DensityArgs) -> Result<()> {
    let params = a.params.resolve()?;
    let measure = TailMeasure::new(&params, a.quad.spec()?)?;
    let xs = parse_grid(&a.grid[0])?;
    let ys = parse_grid(&a.grid[1])?;
    let which = match a.component {
        ComponentArg::One => TailComponent::One,
        ComponentArg::Two => TailComponent::Two,
        ComponentArg::Combined => TailComponent::Combined,
    };
    let cells: Vec<(f64, f64)> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).collect();
    let values = cells
        .par_iter()
        .map(|&(x, y)| measure.density(which, x, y))
        .collect::<Result<Vec<f64>>>()?;
    let meta = Metadata::new("density")
        .params(&params)
        .option("component", format!("{which:?}").to_lowercase())
        .option("x", &a.grid[0])
        .option("y", &a.grid[1])
        .option("tol", a.quad.tol);
    output::write_csv(
        &a.out,
        &meta,
        "x,y,f",
        cells.iter().zip(values).map(|(&(x, y), f)| format!("{x},{y},{f:e}")),
    )
}

pub fn angular(a: &AngularArgs) -> Result<()> {
    let params = a.params.resolve()?;
    let derived = params.derive()?;
    let pairs = output::read_samples(&a.samples)?;
    let norm = match a.norm {
        NormArg::L1 => Norm::L1,
        NormArg::L2 => Norm::L2,
        NormArg::Max => Norm::Max,
    };
    let sample = tail::standardize(&pairs, &derived);
    let threshold = sample.radius_quantile(a.threshold_quantile, norm)?;
    let hist = tail::angular_histogram(&sample, threshold, a.bins, norm)?;
    let meta = Metadata::new("angular")
        .params(&params)
        .option("samples", a.samples.display())
        .option("threshold_quantile", a.threshold_quantile)
        .option("threshold", threshold)
        .option("exceedances", hist.exceedances)
        .option("norm", format!("{norm:?}").to_lowercase())
        .option("exponent", sample.exponent);
    output::write_csv(
        &a.out,
        &meta,
        "bin_lo,bin_hi,mass",
        hist.edges
            .windows(2)
            .zip(&hist.mass)
            .map(|(e, m)| format!("{},{},{m}", e[0], e[1])),
    )
}

#[derive(Serialize)]
struct EstimateReport {
    method: &'static str,
    margin: &'static str,
    counts: String,
    index_estimate: f64,
    k_used: usize,
    stderr: f64,
}

pub fn estimate(a: &EstimateArgs) -> Result<()> {
    let counts = output::read_counts(&a.counts)?;
    let margin = match a.margin {
        MarginArg::In => Margin::In,
        MarginArg::Out => Margin::Out,
    };
    let (method, fit) = match a.method {
        MethodArg::Hill => {
            let samples: Vec<f64> = counts
                .degree_samples(margin)
                .into_iter()
                .filter(|&d| d > 0.0)
                .collect();
            let k = a.k.unwrap_or_else(|| (samples.len() as f64).sqrt() as usize);
            ("hill", census::hill_estimate(&samples, k)?)
        }
        MethodArg::Loglog => {
            let pmf = census::empirical_pmf(&counts)?;
            ("loglog", census::loglog_slope(&pmf.marginal(margin), a.i_min)?)
        }
    };
    output::write_json(
        a.out.as_deref(),
        &EstimateReport {
            method,
            margin: match a.margin {
                MarginArg::In => "in",
                MarginArg::Out => "out",
            },
            counts: a.counts.display().to_string(),
            index_estimate: fit.index_estimate,
            k_used: fit.k_used,
            stderr: fit.stderr,
        },
    )
}

#[derive(Serialize)]
struct CompareReport {
    params: ModelParams,
    counts: String,
    pmf: Option<String>,
    region: Region,
    nodes: u64,
    total_variation: f64,
    max_abs_diff: f64,
    /// `(i, j, empirical - analytic)`.
    cells: Vec<(u64, u64, f64)>,
}

pub fn compare(a: &CompareArgs) -> Result<()> {
    let params = a.params.resolve()?;
    let counts = output::read_counts(&a.counts)?;
    let empirical = census::empirical_pmf(&counts)?;
    let analytic = match &a.pmf {
        Some(path) => output::read_pmf(path)?,
        None => LimitDistribution::new(&params, a.quad.spec()?)?.pmf_table(a.imax, a.jmax)?,
    };
    let region = Region {
        i_max: a.imax,
        j_max: a.jmax,
    };
    let cmp = census::compare_pmf(&empirical, &analytic, region);
    output::write_json(
        a.out.as_deref(),
        &CompareReport {
            params,
            counts: a.counts.display().to_string(),
            pmf: a.pmf.as_ref().map(|p| p.display().to_string()),
            region,
            nodes: counts.node_total(),
            total_variation: cmp.total_variation,
            max_abs_diff: cmp.max_abs_diff,
            cells: cmp.cells,
        },
    )
}

#[derive(Serialize)]
struct VerifyEnvelope<T: Serialize> {
    check: &'static str,
    quadrature: QuadratureSpec,
    #[serde(flatten)]
    report: T,
}

/// Runs one diagnostic and writes its report. Returns whether it passed;
/// a failed check is a result, not an error.
pub fn verify(a: &VerifyArgs) -> Result<bool> {
    let params = a.params.resolve()?;
    let quad = a.quad.spec()?;
    let grid = |default: &[f64]| a.grid.clone().unwrap_or_else(|| default.to_vec());
    let tol = |default: f64| a.tolerance.unwrap_or(default);
    let path = Some(a.out.as_path());
    let pass = match a.check {
        CheckArg::Uhat => {
            let lambdas = parse_pairs(&a.lambdas, &[(1.0, 1.0), (0.5, 2.0), (2.0, 0.5)])?;
            let r = checks::uhat_check(&params, a.k, &lambdas, &grid(&[1e2, 1e4, 1e6]), tol(0.05), &quad)?;
            let pass = r.pass;
            output::write_json(path, &VerifyEnvelope { check: "uhat", quadrature: quad, report: r })?;
            pass
        }
        CheckArg::Measure => {
            let points = parse_pairs(&a.points, &[(1.0, 1.0)])?;
            let r = checks::measure_check(&params, a.k, &points, &grid(&[1e2, 1e3, 1e4]), tol(0.1), &quad)?;
            let pass = r.pass;
            output::write_json(path, &VerifyEnvelope { check: "measure", quadrature: quad, report: r })?;
            pass
        }
        CheckArg::Truncation => {
            let x = match &a.x {
                Some(s) => parse_pair(s)?,
                None => (1.0, 1.0),
            };
            let y_grid = a.y_grid.clone().unwrap_or_else(|| vec![0.0, 1.0, 2.0, 4.0, 8.0]);
            let r = checks::truncation_check(&params, a.k, x, &y_grid, &grid(&[1e3, 1e4, 1e5]), tol(0.01), &quad)?;
            let pass = r.pass;
            output::write_json(path, &VerifyEnvelope { check: "truncation", quadrature: quad, report: r })?;
            pass
        }
        CheckArg::Marginal => {
            let axis = match a.axis {
                1 => Axis::One,
                2 => Axis::Two,
                n => return Err(usage(format!("--axis must be 1 or 2, got {n}"))),
            };
            let x_grid = a.x_grid.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0]);
            let r = checks::marginal_check(&params, a.k, axis, &x_grid, &grid(&[1e3, 1e4, 1e5]), tol(0.1), &quad)?;
            let pass = r.pass;
            output::write_json(path, &VerifyEnvelope { check: "marginal", quadrature: quad, report: r })?;
            pass
        }
    };
    Ok(pass)
}
