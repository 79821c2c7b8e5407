//! Acceptance suite at the reference parameters (0.3, 0.5, 0.2, 1, 1).
//! Prints one PASS/FAIL line per criterion and exits non-zero if any fails.

use std::time::{Duration, Instant};

use heavytail_pa::census::{self, Region};
use heavytail_pa::checks;
use heavytail_pa::limit::Component;
use heavytail_pa::rng;
use heavytail_pa::sim::{self, GrowthLimits, SeedSpec};
use heavytail_pa::special::{ln_gamma, nb_pmf};
use heavytail_pa::{
    DirectedMultigraph, LimitDistribution, Margin, ModelParams, QuadratureSpec, TailComponent, TailMeasure,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn reference() -> ModelParams {
    ModelParams::reference().validate().unwrap()
}

fn quad() -> QuadratureSpec {
    QuadratureSpec::default()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn c1_normalization() -> Outcome {
    let d = LimitDistribution::new(&reference(), quad()).unwrap();
    let vals = [
        d.phi_component(Component::One, 1.0, 1.0).unwrap(),
        d.phi_component(Component::Two, 1.0, 1.0).unwrap(),
        d.phi(1.0, 1.0).unwrap(),
    ];
    let worst = vals.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    Outcome {
        pass: worst < 1e-10,
        detail: format!("max |phi(1,1) - 1| = {worst:.2e} (phi1, phi2, phi)"),
    }
}

fn c2_mixture_oracle() -> Outcome {
    let params = reference();
    let d = LimitDistribution::new(&params, quad()).unwrap();
    const N: usize = 10_000_000;
    let grid = [0.3, 0.6, 0.9];
    let points: Vec<(f64, f64)> = grid.iter().flat_map(|&x| grid.iter().map(move |&y| (x, y))).collect();
    let mut sum = vec![0.0f64; points.len()];
    let mut sum_sq = vec![0.0f64; points.len()];
    let mut rng = rng::seeded(rng::DEFAULT_SEED);
    for _ in 0..N {
        let (i, j) = d.sample_component(Component::One, &mut rng);
        for (k, &(x, y)) in points.iter().enumerate() {
            let v = x.powf(i as f64) * y.powf(j as f64);
            sum[k] += v;
            sum_sq[k] += v * v;
        }
    }
    let n = N as f64;
    let mut worst_z = 0.0f64;
    for (k, &(x, y)) in points.iter().enumerate() {
        let mean = sum[k] / n;
        let se = ((sum_sq[k] / n - mean * mean) / (n - 1.0)).sqrt();
        let exact = d.phi_component(Component::One, x, y).unwrap();
        worst_z = worst_z.max((mean - exact).abs() / se);
    }

    // Σ_m nb(m; r, 1/z) x^m = (x + (1 - x) z)^{-r}
    let mut worst_id = 0.0f64;
    for &z in &[1.0f64, 1.5, 3.0, 10.0] {
        for &x in &[0.0, 0.3, 0.7, 0.95] {
            for &r in &[0.5, 2.0, 5.5] {
                let closed = (x + (1.0 - x) * z).powf(-r);
                let mut series = 0.0;
                let mut xm = 1.0;
                for m in 0..20_000u64 {
                    let term = nb_pmf(m, r, 1.0 / z) * xm;
                    series += term;
                    xm *= x;
                    if m > 10 && term < 1e-20 * series {
                        break;
                    }
                }
                worst_id = worst_id.max(rel(series, closed));
            }
        }
    }
    Outcome {
        pass: worst_z < 4.0 && worst_id < 1e-12,
        detail: format!("max |MC - phi1| = {worst_z:.2} SE over 9 points; NB pgf identity rel err {worst_id:.1e}"),
    }
}

fn grow_reference(seed: u64, edges: u64) -> DirectedMultigraph {
    let params = reference();
    let mut g = sim::seed_graph(&SeedSpec::SelfLoop, &params).unwrap();
    sim::grow(&mut g, edges, &params, &mut rng::seeded(seed), &GrowthLimits::default()).unwrap();
    g
}

const SIM_SEEDS: [u64; 3] = [rng::DEFAULT_SEED, 1, 2];
const SIM_EDGES: u64 = 1_000_000;

fn c3_simulation_vs_limit(graphs: &[DirectedMultigraph]) -> Outcome {
    let analytic = LimitDistribution::new(&reference(), quad())
        .unwrap()
        .pmf_table(10, 10)
        .unwrap();
    let region = Region { i_max: 10, j_max: 10 };
    let tvs: Vec<f64> = graphs
        .iter()
        .map(|g| {
            let emp = census::empirical_pmf(&sim::degree_counts(g)).unwrap();
            census::compare_pmf(&emp, &analytic, region).total_variation
        })
        .collect();
    Outcome {
        pass: tvs.iter().all(|&tv| tv < 0.02),
        detail: format!("TV on i,j <= 10 per seed: {}", fmt_list(&tvs, 4)),
    }
}

fn c4_node_count(graphs: &[DirectedMultigraph]) -> Outcome {
    let ratios: Vec<f64> = graphs
        .iter()
        .map(|g| g.node_count() as f64 / g.edge_count() as f64)
        .collect();
    Outcome {
        pass: ratios.iter().all(|&r| rel(r, 0.5) < 0.01),
        detail: format!("N(n)/n per seed: {}", fmt_list(&ratios, 5)),
    }
}

fn hill_positive(samples: impl IntoIterator<Item = f64>) -> f64 {
    let pos: Vec<f64> = samples.into_iter().filter(|&d| d > 0.0).collect();
    let k = (pos.len() as f64).sqrt() as usize;
    census::hill_estimate(&pos, k).unwrap().index_estimate
}

fn c5_marginal_exponents(graph: &DirectedMultigraph) -> Outcome {
    let d = reference().derive().unwrap();
    let (target_in, target_out) = (d.alpha_in - 1.0, d.alpha_out - 1.0);
    let counts = sim::degree_counts(graph);
    let sim_in = hill_positive(counts.degree_samples(Margin::In));
    let sim_out = hill_positive(counts.degree_samples(Margin::Out));
    let draws = LimitDistribution::new(&reference(), quad())
        .unwrap()
        .sample_limit(1_000_000, &mut rng::seeded(rng::DEFAULT_SEED))
        .unwrap();
    let lim_in = hill_positive(draws.iter().map(|&(i, _)| i as f64));
    let lim_out = hill_positive(draws.iter().map(|&(_, o)| o as f64));
    let errs = [
        rel(sim_in, target_in),
        rel(sim_out, target_out),
        rel(lim_in, target_in),
        rel(lim_out, target_out),
    ];
    Outcome {
        pass: errs.iter().all(|&e| e < 0.15),
        detail: format!(
            "Hill in/out: simulated {sim_in:.3}/{sim_out:.3}, limit sampler {lim_in:.3}/{lim_out:.3}; \
             targets {target_in:.3}/{target_out:.3}; max rel err {:.3}",
            errs.iter().copied().fold(0.0, f64::max)
        ),
    }
}

fn c6_homogeneity() -> Outcome {
    let t = TailMeasure::new(&reference(), quad()).unwrap();
    let d = *t.derived();
    let xs = [0.2, 0.5, 1.0, 2.0, 5.0];
    let ys = [0.3, 0.7, 1.0, 3.0, 6.0];
    let cs = [0.1f64, 0.5, 2.0, 10.0, 100.0];
    let mut worst = [0.0f64; 3];
    for (w, which) in [TailComponent::One, TailComponent::Two, TailComponent::Combined].into_iter().enumerate() {
        for &x in &xs {
            for &y in &ys {
                let base = t.density(which, x, y).unwrap();
                for &c in &cs {
                    let scaled = t.density(which, c.powf(d.c1) * x, c.powf(d.c2) * y).unwrap()
                        * c.powf(1.0 + d.c1 + d.c2);
                    worst[w] = worst[w].max(rel(scaled, base));
                }
            }
        }
    }
    let max = worst.iter().copied().fold(0.0, f64::max);
    Outcome {
        pass: max < 1e-8,
        detail: format!("max rel err f1/f2/combined: {}", fmt_sci(&worst)),
    }
}

fn c7_closed_form_marginal() -> Outcome {
    let p = reference();
    let t = TailMeasure::new(&p, quad()).unwrap();
    let c1 = t.derived().c1;
    let errs: Vec<f64> = [0.5, 1.0, 2.0, 5.0]
        .iter()
        .map(|&x: &f64| {
            let closed =
                x.powf(-1.0 / c1) * (ln_gamma(p.delta_in + 1.0 + 1.0 / c1) - ln_gamma(p.delta_in + 1.0)).exp();
            rel(t.rect_mass(TailComponent::One, x, 0.0).unwrap(), closed)
        })
        .collect();
    Outcome {
        pass: errs.iter().all(|&e| e < 1e-8),
        detail: format!("rel err at x = 0.5, 1, 2, 5: {}", fmt_sci(&errs)),
    }
}

fn c8_uhat() -> Outcome {
    let r = checks::uhat_check(
        &reference(),
        3,
        &[(1.0, 1.0), (0.5, 2.0), (2.0, 0.5)],
        &[1e2, 1e4, 1e6],
        0.05,
        &quad(),
    )
    .unwrap();
    let finals: Vec<f64> = r.curves.iter().map(|c| c.final_rel_error).collect();
    Outcome {
        pass: r.pass && r.curves.iter().all(|c| c.monotone),
        detail: format!(
            "rel err at h = 1e6: {}; monotone: {}",
            fmt_sci(&finals),
            r.curves.iter().all(|c| c.monotone)
        ),
    }
}

fn c9_truncation() -> Outcome {
    let r = checks::truncation_check(&reference(), 3, (1.0, 1.0), &[0.0, 8.0], &[1e3, 1e4, 1e5], 0.01, &quad())
        .unwrap();
    Outcome {
        pass: r.pass,
        detail: format!("worst ratio at y = 8 over t = 1e3, 1e4, 1e5: {:.2e}", r.worst_ratio_at_max_y),
    }
}

fn c10_sampler_vs_measure() -> Outcome {
    let p = reference();
    let d = p.derive().unwrap();
    let h: f64 = 1e4;
    let (a, b) = (1.0, 1.0);
    const N: usize = 10_000_000;
    let draws = LimitDistribution::new(&p, quad())
        .unwrap()
        .sample_limit(N, &mut rng::replica(rng::DEFAULT_SEED, 10))
        .unwrap();
    let (ti, to) = (h.powf(d.c1) * a, h.powf(d.c2) * b);
    let hits = draws.iter().filter(|&&(i, o)| i as f64 > ti && o as f64 > to).count();
    let empirical = h * hits as f64 / N as f64;
    let exact = TailMeasure::new(&p, quad()).unwrap().rect_mass(TailComponent::Combined, a, b).unwrap();
    let err = rel(empirical, exact);
    Outcome {
        pass: err < 0.10,
        detail: format!("h * fraction = {empirical:.6} ({hits} exceedances), rect mass = {exact:.6}, rel err {err:.2e}"),
    }
}

fn fmt_list(v: &[f64], digits: usize) -> String {
    v.iter().map(|x| format!("{x:.digits$}")).collect::<Vec<_>>().join(", ")
}

fn fmt_sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(", ")
}

fn timed(f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let start = Instant::now();
    let o = f();
    (o, start.elapsed())
}

fn main() {
    let mut failures = 0;
    let mut report = |id: u32, name: &str, budget: Option<Duration>, (o, elapsed): (Outcome, Duration)| {
        let in_budget = budget.is_none_or(|b| elapsed <= b);
        let pass = o.pass && in_budget;
        if !pass {
            failures += 1;
        }
        let budget_note = match budget {
            Some(b) if !in_budget => format!(", over budget {:.0?}", b),
            _ => String::new(),
        };
        println!(
            "criterion {id:>2} {:<4} {name}: {} [{:.1?}{budget_note}]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed
        );
    };
    let secs = |s: u64| Some(Duration::from_secs(s));

    report(1, "generating-function normalization", secs(1), timed(c1_normalization));
    report(2, "mixture representation oracle", secs(60), timed(c2_mixture_oracle));

    let start = Instant::now();
    let graphs: Vec<DirectedMultigraph> = SIM_SEEDS.iter().map(|&s| grow_reference(s, SIM_EDGES)).collect();
    let sim_time = start.elapsed();
    let (o3, t3) = timed(|| c3_simulation_vs_limit(&graphs));
    report(3, "simulation vs limit law", secs(120), (o3, t3 + sim_time));
    report(4, "node-count limit", None, timed(|| c4_node_count(&graphs)));
    report(5, "marginal exponents", secs(120), timed(|| c5_marginal_exponents(&graphs[0])));
    drop(graphs);

    report(6, "tail-density homogeneity", secs(10), timed(c6_homogeneity));
    report(7, "closed-form marginal mass", None, timed(c7_closed_form_marginal));
    report(8, "transform Tauberian check", secs(300), timed(c8_uhat));
    report(9, "truncation regularity condition", None, timed(c9_truncation));
    report(10, "tail measure vs exact sampler", secs(180), timed(c10_sampler_vs_measure));

    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
