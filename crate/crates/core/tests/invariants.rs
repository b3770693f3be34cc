//! Cross-module invariants, checked on random inputs.

use proptest::prelude::*;

use ustat_core::bounds::{
    complete_tail, incomplete_delta, incomplete_tail, random_design_delta, CompleteB,
};
use ustat_core::design::{
    complete_design, design_scalars, design_stats, load_design, random_design, save_design, Design,
    StatsWorkspace,
};
use ustat_core::distribution::{distribution_by_name, Dataset};
use ustat_core::estimator::{estimate_incomplete, exact_distribution_of_uw, exact_theta, pmf_moments};
use ustat_core::experiments::{run_with_threads, Budget, ExperimentConfig, ExperimentKind};
use ustat_core::kernel::kernel_by_name;
use ustat_core::rng::seeded;
use ustat_core::sensitivity::{profile, Method};

fn design_strategy() -> impl Strategy<Value = Design> {
    (3usize..40, 1usize..6, 1usize..200, any::<u64>())
        .prop_filter("m < n", |(n, m, _, _)| m < n)
        .prop_map(|(n, m, big_m, seed)| random_design(n, m, big_m, seed).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn incidence_identities(design in design_strategy()) {
        let s = design_stats(&design);
        let (n, m, big_m) = (design.n() as f64, design.m() as u64, design.len() as u64);
        prop_assert_eq!(s.sum_r(), m * big_m);
        prop_assert_eq!(s.sum_r_pair_ordered(), m * (m - 1) * big_m);
        let mf = m as f64;
        prop_assert!(s.a >= mf * mf / n - 1e-12);
        prop_assert!(s.c >= mf / n - 1e-12);
        prop_assert!(s.b >= 0.0);
        prop_assert_eq!(s.scalars(), StatsWorkspace::new(design.n()).scalars(&design));
    }

    #[test]
    fn stats_are_invariant_under_relabeling(design in design_strategy(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut perm: Vec<usize> = (0..design.n()).collect();
        perm.shuffle(&mut seeded(seed));
        prop_assert_eq!(design_scalars(&design), design_scalars(&design.relabeled(&perm)));
    }

    #[test]
    fn design_file_round_trip(design in design_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.txt");
        save_design(&design, &path).unwrap();
        let back = load_design(&path).unwrap();
        prop_assert_eq!(back.subsets(), design.subsets());
        prop_assert_eq!((back.n(), back.m()), (design.n(), design.m()));
    }

    #[test]
    fn estimate_lies_in_kernel_range(seed in any::<u64>(), n in 4usize..30, big_m in 1usize..100) {
        for name in ["product", "gini", "variance", "product3"] {
            let k = kernel_by_name(name).unwrap();
            let d = random_design(n, k.degree(), big_m, seed).unwrap();
            let data = distribution_by_name("uniform").unwrap().sample_dataset(&mut seeded(seed), n);
            let v = estimate_incomplete(&k, &data, &d).unwrap().value;
            prop_assert!(k.range().lo - 1e-12 <= v && v <= k.range().hi + 1e-12);
        }
    }

    #[test]
    fn relabeling_data_and_design_together_preserves_estimate(seed in any::<u64>(), n in 4usize..20) {
        use rand::seq::SliceRandom;
        let k = kernel_by_name("gini").unwrap();
        let d = random_design(n, 2, 3 * n, seed).unwrap();
        let data = distribution_by_name("uniform").unwrap().sample_dataset(&mut seeded(seed ^ 1), n);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut seeded(seed ^ 2));
        // point i of `moved` is point perm[i] of `data`, so index perm[i] -> i
        let moved = data.permuted(&perm);
        let mut inverse = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p] = i;
        }
        let a = estimate_incomplete(&k, &data, &d).unwrap().value;
        let b = estimate_incomplete(&k, &moved, &d.relabeled(&inverse)).unwrap().value;
        prop_assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn complete_bound_uses_complete_design_stats(n in 3usize..12, m in 1usize..4, t in 0.01f64..1.0) {
        prop_assume!(m < n);
        let k = kernel_by_name(match m { 1 => "mean", 2 => "product", _ => "product3" }).unwrap();
        let p = profile(&k, &distribution_by_name("skewed3").unwrap(), &Method::Exact { cap: 1 << 20 }).unwrap();
        let stats = design_scalars(&complete_design(n, m).unwrap());
        prop_assert_eq!(
            complete_tail(n, m, &p, t, CompleteB::Exact).unwrap().probability(),
            incomplete_tail(&stats, &p, t).unwrap().probability()
        );
    }

    #[test]
    fn random_design_deviation_shrinks_with_budget(n in 10usize..500, m in 2usize..5, k in 1usize..10) {
        let a = random_design_delta(n, m, k * n, 0.1, 3.0, 0.05, 0.05).unwrap().deviation();
        let b = random_design_delta(n, m, 4 * k * n, 0.1, 3.0, 0.05, 0.05).unwrap().deviation();
        prop_assert!(b < a);
    }
}

#[test]
fn delta_form_is_tight_for_the_tail() {
    let p = profile(
        &kernel_by_name("product").unwrap(),
        &distribution_by_name("skewed3").unwrap(),
        &Method::Exact { cap: 1 << 20 },
    )
    .unwrap();
    let stats = design_scalars(&random_design(40, 2, 300, 5).unwrap());
    for delta in [1e-6, 1e-3, 0.05, (-1.0f64).exp()] {
        let dev = incomplete_delta(&stats, &p, delta).unwrap().deviation();
        let tail = incomplete_tail(&stats, &p, dev).unwrap().probability();
        assert!(tail <= delta * (1.0 + 1e-12), "δ={delta}: tail {tail}");
    }
}

#[test]
fn csv_dataset_feeds_estimator() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    std::fs::write(&path, "x,y\n1,2\n2,1\n3,4\n").unwrap();
    let data = Dataset::from_csv_path(&path, true).unwrap();
    let kendall = kernel_by_name("kendall").unwrap();
    let est = estimate_incomplete(&kendall, &data, &complete_design(3, 2).unwrap()).unwrap();
    // pairs (1,2): discordant, (1,3): concordant, (2,3): concordant
    assert!((est.value - 1.0 / 3.0).abs() < 1e-15);

    std::fs::write(&path, "1,2\n3\n").unwrap();
    let err = Dataset::from_csv_path(&path, false).unwrap_err().to_string();
    assert!(err.contains(":2:"), "{err}");
}

#[test]
fn exact_mean_of_uw_is_theta_on_skewed_support() {
    let dist = distribution_by_name("skewed3").unwrap();
    for name in ["product", "gini", "variance", "difference"] {
        let k = kernel_by_name(name).unwrap();
        let d = random_design(7, 2, 9, 4).unwrap();
        let (mean, _) = pmf_moments(&exact_distribution_of_uw(&k, &dist, &d).unwrap());
        assert!((mean - exact_theta(&k, &dist).unwrap()).abs() < 1e-12, "{name}");
    }
}

#[test]
fn experiment_outputs_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(ExperimentKind::TailValidity);
    cfg.replicates = 200;
    cfg.budget = Some(Budget::Fixed(50));
    cfg.seed = 42;
    let out = run_with_threads(&cfg, 2).unwrap();
    let csv = dir.path().join("tail.csv");
    let sidecar = out.save(&csv).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("experiment,check,kernel,distribution,n,m,M,design,replicates,seed"));
    assert_eq!(text.lines().count(), out.rows.len() + 1);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(sidecar).unwrap()).unwrap();
    assert_eq!(json["seed"], 42);
    assert_eq!(json["config"]["replicates"], "200");

    // the design column re-creates the exact design used
    let spec: ustat_core::design::DesignSpec = out.rows[0].design.parse().unwrap();
    let mut again = cfg.clone();
    again.design = spec;
    assert_eq!(run_with_threads(&again, 1).unwrap().csv_string().unwrap(), out.csv_string().unwrap());
}
