//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs without the libtest harness so the report is always shown.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ustat_core::bounds::{dominance_check_vs_arcones, variance_complete, BoundGrid};
use ustat_core::design::{complete_design, design_stats, partition_design, random_design};
use ustat_core::distribution::{builtin_distributions, distribution_by_name, DEFAULT_PRODUCT_CAP};
use ustat_core::estimator::{
    estimate_complete, estimate_incomplete, exact_distribution_of_uw, exact_theta, incomplete_value_seq,
    pmf_moments,
};
use ustat_core::experiments::{run_with_threads, Budget, ExperimentConfig, ExperimentKind, ExperimentOutput};
use ustat_core::kernel::{builtin_registry, kernel_by_name, Kernel};
use ustat_core::sensitivity::{profile, sigma_k_sq_exact, Method};

type Outcome = Result<String, String>;

struct Criterion {
    id: usize,
    title: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn c1_closed_form_design_stats() -> Outcome {
    let mut cases = 0;
    for n in 2..=12usize {
        for m in 1..n {
            let s = design_stats(&complete_design(n, m).map_err(|e| e.to_string())?);
            let (nf, mf) = (n as f64, m as f64);
            let a = mf * mf / nf;
            let b = mf * mf * (mf - 1.0) * (mf - 1.0) / (nf * (nf - 1.0));
            let c = mf / nf;
            ensure(close(s.a, a, 1e-12) && close(s.b, b, 1e-12) && close(s.c, c, 1e-12), || {
                format!("n={n} m={m}: got ({}, {}, {}), want ({a}, {b}, {c})", s.a, s.b, s.c)
            })?;
            cases += 1;
        }
    }
    Ok(format!("{cases} (n, m) pairs"))
}

fn c2_estimator_identity() -> Outcome {
    let kernels: Vec<Kernel> = builtin_registry();
    let dists = builtin_distributions();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..50 {
        let kernel = &kernels[case % kernels.len()];
        let compatible: Vec<_> = dists.iter().filter(|d| d.dim() == kernel.dim()).collect();
        let dist = compatible[rng.random_range(0..compatible.len())];
        let n = rng.random_range(kernel.degree() + 1..=14);
        let data = dist.sample_dataset(&mut rng, n);
        let design = complete_design(n, kernel.degree()).map_err(|e| e.to_string())?;
        let inc = estimate_incomplete(kernel, &data, &design).map_err(|e| e.to_string())?;
        let full = estimate_complete(kernel, &data).map_err(|e| e.to_string())?;
        let seq = incomplete_value_seq(kernel, &data, &design).map_err(|e| e.to_string())?;
        ensure(inc.value.to_bits() == full.value.to_bits() && seq.to_bits() == full.value.to_bits(), || {
            format!("case {case} ({}, n={n}): {} vs {} vs {seq}", kernel.name(), inc.value, full.value)
        })?;
    }
    Ok("50 datasets, bit-identical".into())
}

fn c3_unbiasedness() -> Outcome {
    let rad = distribution_by_name("rademacher").unwrap();
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    let setups = [("product", 10), ("product3", 9), ("variance", 8), ("gini3", 6), ("mean", 10)];
    for (i, (name, n)) in setups.iter().enumerate() {
        let kernel = kernel_by_name(name).unwrap();
        let m = kernel.degree();
        let theta = exact_theta(&kernel, &rad).map_err(|e| e.to_string())?;
        let mut designs = vec![complete_design(*n, m).unwrap()];
        if n % m == 0 {
            designs.push(partition_design(*n, m).unwrap());
        }
        for j in 0..4 {
            let big_m = 1 + (j * 7 + i * 3) % 17;
            designs.push(random_design(*n, m, big_m, (100 * i + j) as u64).unwrap());
        }
        for d in &designs {
            let pmf = exact_distribution_of_uw(&kernel, &rad, d).map_err(|e| e.to_string())?;
            let (mean, _) = pmf_moments(&pmf);
            worst = worst.max((mean - theta).abs());
            ensure(close(mean, theta, 1e-12), || {
                format!("{name} n={n} {}: E[U_W]={mean} θ={theta}", d.origin())
            })?;
            checked += 1;
        }
    }
    Ok(format!("{checked} designs (20 random), max |E U_W - θ| = {worst:.1e}"))
}

fn c4_variance_formula() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for dist_name in ["rademacher", "skewed3"] {
        let dist = distribution_by_name(dist_name).unwrap();
        for name in ["product", "product3"] {
            let kernel = kernel_by_name(name).unwrap();
            let m = kernel.degree();
            let sig: Vec<f64> = (1..=m)
                .map(|k| sigma_k_sq_exact(&kernel, &dist, k, DEFAULT_PRODUCT_CAP))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            for n in 4..=8 {
                if n <= m {
                    continue;
                }
                let pmf = exact_distribution_of_uw(&kernel, &dist, &complete_design(n, m).unwrap())
                    .map_err(|e| e.to_string())?;
                let (_, exact) = pmf_moments(&pmf);
                let formula = variance_complete(n, m, &sig).map_err(|e| e.to_string())?;
                worst = worst.max((exact - formula).abs());
                ensure(close(exact, formula, 1e-10), || {
                    format!("{name}/{dist_name} n={n}: enumeration {exact} vs formula {formula}")
                })?;
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} cases, max error {worst:.1e}"))
}

fn c5_sensitivity_values() -> Outcome {
    let exact = Method::Exact { cap: DEFAULT_PRODUCT_CAP };
    let rad = distribution_by_name("rademacher").unwrap();
    let p = profile(&kernel_by_name("product").unwrap(), &rad, &exact).map_err(|e| e.to_string())?;
    ensure(
        close(p.beta.value, 4.0, 1e-12) && close(p.gamma.value, 8.0, 1e-12) && close(p.sigma1_sq.value, 0.0, 1e-12),
        || format!("product/rademacher: β={} γ={} σ₁²={}", p.beta.value, p.gamma.value, p.sigma1_sq.value),
    )?;
    let mut pairs = 0;
    for kernel in builtin_registry() {
        for dist in builtin_distributions().iter().filter(|d| d.is_finite() && d.dim() == kernel.dim()) {
            let p = profile(&kernel, dist, &exact).map_err(|e| format!("{} / {}: {e}", kernel.name(), dist.name()))?;
            let (b, g, a) = (p.beta.value, p.gamma.value, p.alpha.value);
            ensure(b <= g + 1e-12 && g <= 8.0 + 1e-12 && a <= 2.0 + 8f64.sqrt() + 1e-12, || {
                format!("{} / {}: β={b} γ={g} α={a}", kernel.name(), dist.name())
            })?;
            pairs += 1;
        }
    }
    Ok(format!("(β, γ, σ₁²) = (4, 8, 0); β ≤ γ ≤ 8 on {pairs} kernel/distribution pairs"))
}

fn c6_dominance() -> Outcome {
    let report = dominance_check_vs_arcones(&BoundGrid::default()).map_err(|e| e.to_string())?;
    ensure(report.violations.is_empty(), || {
        format!("{} violations, first {:?}", report.violations.len(), report.violations[0])
    })?;
    Ok(format!(
        "{} grid points, 0 violations ({} strictly smaller)",
        report.points, report.strictly_smaller
    ))
}

fn base(kind: ExperimentKind, seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(kind);
    c.seed = seed;
    c
}

fn tail_configs() -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    for (kernel, dist, profile) in [
        ("product", "rademacher", "exact"),
        ("product3", "rademacher", "exact"),
        ("gini", "uniform", "auto"),
        ("gini3", "uniform", "auto"),
    ] {
        for n in [20, 50] {
            let mut c = base(ExperimentKind::TailValidity, 7);
            c.kernel = kernel.into();
            c.distribution = dist.into();
            c.profile = profile.parse().unwrap();
            c.n = n;
            c.budget = Some(Budget::Power(2.0));
            c.replicates = 5000;
            c.t_grid = ustat_core::bounds::log_space(0.02, 0.6, 10);
            out.push(c);
        }
    }
    out
}

fn coverage_configs() -> Vec<ExperimentConfig> {
    let mut thm5 = base(ExperimentKind::Coverage, 8);
    thm5.n = 50;
    thm5.budget = Some(Budget::Power(2.0));
    thm5.replicates = 5000;
    thm5.profile = "exact".parse().unwrap();
    thm5.delta_grid = vec![0.05, 0.1, (-1.0f64).exp()];

    let mut gini = thm5.clone();
    gini.kernel = "gini".into();
    gini.distribution = "uniform".into();
    gini.profile = "auto".parse().unwrap();

    let mut thm7 = base(ExperimentKind::Coverage, 8);
    thm7.kernel = "product3".into();
    thm7.n = 100;
    thm7.budget = Some(Budget::Power(2.0));
    thm7.replicates = 5000;
    thm7.profile = "exact".parse().unwrap();
    thm7.bound = "random-design".into();
    thm7.delta_grid = vec![0.05];
    thm7.delta2 = Some(0.05);
    vec![thm5, gini, thm7]
}

fn concentration_configs() -> Vec<ExperimentConfig> {
    [2, 3]
        .into_iter()
        .map(|m| {
            let mut c = base(ExperimentKind::DesignConcentration, 9);
            c.n = 100;
            c.m = Some(m);
            c.kernel = if m == 2 { "product" } else { "product3" }.into();
            c.budget = Some(Budget::Power(2.0));
            c.replicates = 10_000;
            c.delta_grid = vec![0.2];
            c
        })
        .collect()
}

/// CSVs of criteria 7-9 produced with 8 worker threads, reused by 12.
static EIGHT_THREAD_CSVS: OnceLock<std::sync::Mutex<Vec<(String, String)>>> = OnceLock::new();

fn run_all(configs: &[ExperimentConfig], label: &str) -> Result<Vec<ExperimentOutput>, String> {
    let mut outs = Vec::new();
    for (i, c) in configs.iter().enumerate() {
        let out = run_with_threads(c, 8).map_err(|e| format!("{} {}: {e}", c.kind, c.kernel))?;
        let csv = out.csv_string().map_err(|e| e.to_string())?;
        EIGHT_THREAD_CSVS
            .get_or_init(Default::default)
            .lock()
            .unwrap()
            .push((format!("{label}#{i}"), csv));
        outs.push(out);
    }
    Ok(outs)
}

fn all_rows_pass(outs: &[ExperimentOutput]) -> Result<usize, String> {
    let mut rows = 0;
    for out in outs {
        if let Some(r) = out.failures().next() {
            return Err(format!(
                "{} {} n={} m={} {}={}: empirical {} vs bound {} (tolerance {})",
                r.check, r.kernel, r.n, r.m, r.parameter, r.value, r.empirical, r.bound, r.tolerance
            ));
        }
        rows += out.rows.len();
    }
    Ok(rows)
}

fn c7_tail_validity() -> Outcome {
    let outs = run_all(&tail_configs(), "c7")?;
    let rows = all_rows_pass(&outs)?;
    let max_freq = outs
        .iter()
        .flat_map(|o| &o.rows)
        .map(|r| r.empirical - r.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(format!("{rows} (config, t) points, max(empirical - bound) = {max_freq:.4}"))
}

fn c8_coverage() -> Outcome {
    let outs = run_all(&coverage_configs(), "c8")?;
    let rows = all_rows_pass(&outs)?;
    let thm7 = &outs[2].rows[0];
    Ok(format!(
        "{rows} δ points; random-design coverage {:.4} vs target {:.2}",
        thm7.empirical, thm7.bound
    ))
}

fn c9_design_concentration() -> Outcome {
    let outs = run_all(&concentration_configs(), "c9")?;
    let rows = all_rows_pass(&outs)?;
    let rates: Vec<String> = outs
        .iter()
        .flat_map(|o| o.rows.iter().filter(|r| r.check.ends_with("deviation")))
        .map(|r| format!("{}", r.empirical))
        .collect();
    Ok(format!("{rows} checks; violation rates [{}]", rates.join(", ")))
}

fn c10_efron_stein() -> Outcome {
    let mut designs = 0;
    for (kernel, n, big_m) in [("product", 10, 15), ("product3", 9, 12), ("gini", 8, 10), ("variance", 7, 6)] {
        let mut c = base(ExperimentKind::EfronStein, 10);
        c.kernel = kernel.into();
        c.n = n;
        c.budget = Some(Budget::Fixed(big_m));
        c.designs = 5;
        let out = run_with_threads(&c, 0).map_err(|e| e.to_string())?;
        all_rows_pass(std::slice::from_ref(&out))?;
        designs += out.rows.len() / 3;
    }
    let mut c = base(ExperimentKind::EfronStein, 10);
    c.kernel = "mean".into();
    c.n = 10;
    c.design = "complete".parse().unwrap();
    let out = run_with_threads(&c, 0).map_err(|e| e.to_string())?;
    for r in &out.rows {
        ensure(close(r.empirical, r.bound, 1e-12), || {
            format!("m=1 complete design: {} {} vs {} not an equality", r.check, r.empirical, r.bound)
        })?;
    }
    Ok(format!("{designs} random designs hold; m=1 complete design gives equalities"))
}

fn c11_subgauss() -> Outcome {
    let mut rows = 0;
    for (kernel, dist) in [("product@unit", "rademacher"), ("difference@unit", "rademacher"), ("gini@unit", "uniform")] {
        let mut c = base(ExperimentKind::Subgauss, 11);
        c.kernel = kernel.into();
        c.distribution = dist.into();
        c.n = 30;
        c.budget = Some(Budget::Power(2.0));
        c.replicates = 5000;
        c.delta_grid = vec![0.05, 0.1, 0.2, 0.5];
        c.t_grid = ustat_core::bounds::log_space(0.01, 0.3, 6);
        let out = run_with_threads(&c, 0).map_err(|e| e.to_string())?;
        rows += all_rows_pass(std::slice::from_ref(&out))?;
    }
    Ok(format!("{rows} checks, including the asymmetric difference kernel"))
}

fn c12_determinism() -> Outcome {
    let saved = EIGHT_THREAD_CSVS
        .get()
        .map(|m| m.lock().unwrap().clone())
        .unwrap_or_default();
    let configs: Vec<(String, ExperimentConfig)> = [("c7", tail_configs()), ("c8", coverage_configs()), ("c9", concentration_configs())]
        .into_iter()
        .flat_map(|(label, cs)| cs.into_iter().enumerate().map(move |(i, c)| (format!("{label}#{i}"), c)))
        .collect();
    let mut compared = 0;
    for (label, cfg) in configs {
        let eight = match saved.iter().find(|(l, _)| *l == label) {
            Some((_, csv)) => csv.clone(),
            None => run_with_threads(&cfg, 8)
                .and_then(|o| o.csv_string())
                .map_err(|e| e.to_string())?,
        };
        let one = run_with_threads(&cfg, 1)
            .and_then(|o| o.csv_string())
            .map_err(|e| e.to_string())?;
        ensure(one == eight, || format!("{label}: CSV differs between 1 and 8 threads"))?;
        compared += 1;
    }
    Ok(format!("{compared} CSVs bit-identical at 1 and 8 threads"))
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion { id: 1, title: "closed-form complete design statistics", limit: secs(5), run: c1_closed_form_design_stats },
        Criterion { id: 2, title: "incomplete over complete design equals complete", limit: secs(10), run: c2_estimator_identity },
        Criterion { id: 3, title: "unbiasedness by exact enumeration", limit: secs(60), run: c3_unbiasedness },
        Criterion { id: 4, title: "variance formula vs enumeration", limit: secs(60), run: c4_variance_formula },
        Criterion { id: 5, title: "sensitivity values and β ≤ γ ≤ 8", limit: None, run: c5_sensitivity_values },
        Criterion { id: 6, title: "worst-case complete bound dominates Arcones", limit: secs(5), run: c6_dominance },
        Criterion { id: 7, title: "tail validity of the incomplete bound", limit: secs(300), run: c7_tail_validity },
        Criterion { id: 8, title: "δ-form and random-design coverage", limit: secs(600), run: c8_coverage },
        Criterion { id: 9, title: "design statistic concentration", limit: secs(300), run: c9_design_concentration },
        Criterion { id: 10, title: "Efron-Stein sandwich", limit: secs(120), run: c10_efron_stein },
        Criterion { id: 11, title: "sub-Gaussian lower tail, √ form", limit: secs(120), run: c11_subgauss },
        Criterion { id: 12, title: "determinism across thread counts", limit: None, run: c12_determinism },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.limit) {
            (Ok(msg), Some(limit)) if elapsed > limit => {
                Err(format!("{msg}; took {:.1}s, limit {}s", elapsed.as_secs_f64(), limit.as_secs()))
            }
            (o, _) => o,
        };
        let (status, detail) = match &outcome {
            Ok(msg) => ("PASS", msg.clone()),
            Err(msg) => {
                failed += 1;
                ("FAIL", msg.clone())
            }
        };
        println!(
            "criterion {:>2} {status}  {} [{:.2}s] {detail}",
            c.id,
            c.title,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

