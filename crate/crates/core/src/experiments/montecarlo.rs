//! Tail validity, coverage, budget sweep and sub-Gaussian lower-tail studies.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde_json::json;

use super::{
    frequency_at_least, frequency_at_most, Budget, Check, ExperimentConfig, ExperimentRow, Relation, Setup,
    SLACK_SE,
};
use crate::bounds::{
    arcones_tail, complete_tail, hoeffding_tail, incomplete_delta, incomplete_tail, maurer_tail,
    random_design_delta, require_unit_range, subgauss_lower_tail, subgauss_sqrt, variance_complete,
    worst_case_complete_tail, BoundReport, CompleteB,
};
use crate::design::{complete_design, design_scalars, Design, DesignOrigin, SubsetSampler};
use crate::error::{Error, Result};
use crate::estimator::incomplete_value_fast;
use crate::numeric::DoubleDouble;
use crate::rng::{derive_seed, replicate_rng};

type Notes = BTreeMap<String, serde_json::Value>;

/// The experiment's single design, sampled once when random. Returns the
/// design and its re-runnable spec.
fn fixed_design(cfg: &ExperimentConfig, setup: &Setup) -> Result<(Design, String)> {
    let big_m = cfg.budget.map(|b| b.resolve(cfg.n, setup.m)).transpose()?;
    let spec = cfg.design.resolved(big_m, derive_seed(cfg.seed, "design", 0))?;
    let design = spec.build(cfg.n, setup.m, None, 0)?;
    Ok((design, spec.to_string()))
}

/// `U_W` on fresh data for every replicate, in replicate order.
fn fixed_design_values(cfg: &ExperimentConfig, setup: &Setup, design: &Design, label: &str) -> Result<Vec<f64>> {
    (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(cfg.seed, label, r as u64);
            let data = setup.dist.sample_dataset(&mut rng, cfg.n);
            incomplete_value_fast(&setup.kernel, &data, design)
        })
        .collect()
}

/// `U_W` with a fresh random design and fresh data for every replicate.
fn random_design_values(cfg: &ExperimentConfig, setup: &Setup, big_m: usize, label: &str) -> Result<Vec<f64>> {
    (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(cfg.seed, label, r as u64);
            let design = SubsetSampler::new(cfg.n, setup.m)?.design(&mut rng, big_m, DesignOrigin::Custom);
            let data = setup.dist.sample_dataset(&mut rng, cfg.n);
            incomplete_value_fast(&setup.kernel, &data, &design)
        })
        .collect()
}

fn require_complete(design: &Design, bound: &str) -> Result<()> {
    if *design.origin() == DesignOrigin::Complete {
        Ok(())
    } else {
        Err(Error::param(format!("bound `{bound}` applies to the complete design only")))
    }
}

fn check_flags(report: &BoundReport, force: bool) -> Result<()> {
    match report.flags.iter().find(|f| !f.ok) {
        Some(f) if !force => Err(Error::ValidityFlag(format!("{} ({})", f.name, f.detail))),
        _ => Ok(()),
    }
}

/// Tail-form bound named by `cfg.bound` at `t`.
fn tail_bound(cfg: &ExperimentConfig, setup: &Setup, design: &Design, t: f64) -> Result<f64> {
    let p = setup.profile();
    p.require_certified()?;
    let (n, m) = (cfg.n, setup.m);
    let report = match cfg.bound.as_str() {
        "incomplete" => incomplete_tail(&design_scalars(design), p, t)?,
        "complete" => {
            require_complete(design, "complete")?;
            complete_tail(n, m, p, t, CompleteB::Exact)?
        }
        "complete-worst-case" => {
            require_complete(design, "complete-worst-case")?;
            worst_case_complete_tail(n, m, p.sigma1_sq.value, t)?
        }
        "hoeffding" => {
            require_complete(design, "hoeffding")?;
            hoeffding_tail(n, m, p.sigma_m_sq.value, t)?
        }
        "arcones" => {
            require_complete(design, "arcones")?;
            arcones_tail(n, m, p.sigma1_sq.value, t)?
        }
        "maurer" => {
            require_complete(design, "maurer")?;
            let sig: Vec<f64> = p
                .sigma_k_sq
                .as_ref()
                .ok_or_else(|| Error::param("maurer needs all conditional variances σ_k²"))?
                .iter()
                .map(|c| c.value)
                .collect();
            maurer_tail(n, m, variance_complete(n, m, &sig)?, t)?
        }
        other => return Err(Error::param(format!("bound `{other}` has no tail form for this experiment"))),
    };
    check_flags(&report, cfg.force)?;
    Ok(report.probability())
}

pub(super) fn tail_validity(cfg: &ExperimentConfig) -> Result<(Vec<ExperimentRow>, Notes)> {
    let setup = Setup::new(cfg, true)?;
    setup.kernel.require_symmetric()?;
    let (design, spec) = fixed_design(cfg, &setup)?;
    let ctx = setup.context(cfg, design.len(), spec);
    let values = fixed_design_values(cfg, &setup, &design, "tail-validity")?;
    let mut rows = Vec::with_capacity(cfg.t_grid.len());
    for &t in &cfg.t_grid {
        let bound = tail_bound(cfg, &setup, &design, t)?.min(1.0);
        let hits = values.iter().filter(|&&u| u - setup.theta > t).count();
        let mut check = frequency_at_most("upper-tail", "t", t, hits, cfg.replicates, bound);
        check.check = match cfg.bound.as_str() {
            "incomplete" => "upper-tail",
            _ => "upper-tail-baseline",
        };
        rows.push(ctx.row(check));
    }
    let mut notes = setup.notes();
    notes.insert("bound".into(), json!(cfg.bound));
    notes.insert("design_stats".into(), json!(design_scalars(&design)));
    Ok((rows, notes))
}

pub(super) fn coverage(cfg: &ExperimentConfig) -> Result<(Vec<ExperimentRow>, Notes)> {
    let setup = Setup::new(cfg, true)?;
    setup.kernel.require_symmetric()?;
    let p = setup.profile();
    p.require_certified()?;
    let mut notes = setup.notes();
    let mut rows = Vec::new();
    match cfg.bound.as_str() {
        "incomplete" | "complete" => {
            let (design, spec) = fixed_design(cfg, &setup)?;
            let stats = design_scalars(&design);
            let ctx = setup.context(cfg, design.len(), spec);
            let values = fixed_design_values(cfg, &setup, &design, "coverage")?;
            for &delta in &cfg.delta_grid {
                let dev = incomplete_delta(&stats, p, delta)?.deviation();
                let hits = values.iter().filter(|&&u| u - setup.theta <= dev).count();
                rows.push(ctx.row(frequency_at_least("coverage", "delta", delta, hits, cfg.replicates, 1.0 - delta)));
            }
            notes.insert("design_stats".into(), json!(stats));
        }
        "random-design" => {
            let big_m = cfg
                .budget
                .ok_or_else(|| Error::param("the random-design bound needs M"))?
                .resolve(cfg.n, setup.m)?;
            let mut reports = Vec::new();
            for &d1 in &cfg.delta_grid {
                let d2 = cfg.delta2.unwrap_or(d1);
                let r = random_design_delta(cfg.n, setup.m, big_m, p.sigma1_sq.value, p.alpha.value, d1, d2)?;
                check_flags(&r, cfg.force)?;
                reports.push((d1, d2, r));
            }
            let ctx = setup.context(cfg, big_m, format!("random:{big_m}"));
            let values = random_design_values(cfg, &setup, big_m, "coverage-random-design")?;
            for (d1, d2, r) in &reports {
                let dev = r.deviation();
                let hits = values.iter().filter(|&&u| u - setup.theta <= dev).count();
                rows.push(ctx.row(frequency_at_least(
                    "coverage-random-design",
                    "delta1",
                    *d1,
                    hits,
                    cfg.replicates,
                    1.0 - (d1 + d2),
                )));
            }
            notes.insert("delta2".into(), json!(cfg.delta2));
        }
        other => return Err(Error::param(format!("coverage supports incomplete or random-design, not `{other}`"))),
    }
    notes.insert("bound".into(), json!(cfg.bound));
    Ok((rows, notes))
}

/// Root mean squared error of `values` around `theta` and its delta-method SE.
fn rmse(values: &[f64], theta: f64) -> (f64, f64) {
    let r = values.len() as f64;
    let sq: Vec<f64> = values.iter().map(|u| (u - theta) * (u - theta)).collect();
    let mse = sq.iter().copied().collect::<DoubleDouble>().value() / r;
    let var = sq.iter().map(|s| (s - mse) * (s - mse)).collect::<DoubleDouble>().value() / (r - 1.0);
    let root = mse.sqrt();
    let se = if root > 0.0 { (var / r).sqrt() / (2.0 * root) } else { 0.0 };
    (root, se)
}

pub(super) fn budget_sweep(cfg: &ExperimentConfig) -> Result<(Vec<ExperimentRow>, Notes)> {
    let setup = Setup::new(cfg, true)?;
    setup.kernel.require_symmetric()?;
    let p = setup.profile();
    p.require_certified()?;
    let d1 = cfg.delta_grid[0];
    let d2 = cfg.delta2.unwrap_or(d1);
    let mut rows = Vec::new();
    let mut flags = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    let mut first_term: Option<(usize, f64)> = None;
    for budget in &cfg.budgets {
        let big_m = budget.resolve(cfg.n, setup.m)?;
        let (values, ctx) = if *budget == Budget::Complete {
            let design = complete_design(cfg.n, setup.m)?;
            let values = fixed_design_values(cfg, &setup, &design, "budget-sweep/complete")?;
            (values, setup.context(cfg, big_m, "complete".into()))
        } else {
            let values = random_design_values(cfg, &setup, big_m, &format!("budget-sweep/{big_m}"))?;
            (values, setup.context(cfg, big_m, format!("random:{big_m}")))
        };
        let (err, se) = rmse(&values, setup.theta);
        let (bound, tolerance) = match best {
            Some((b, bse)) => (b, SLACK_SE * (se * se + bse * bse).sqrt()),
            None => (f64::INFINITY, 0.0),
        };
        rows.push(ctx.row(Check {
            check: "rmse-nonincreasing",
            parameter: "M",
            value: big_m as f64,
            empirical: err,
            std_err: se,
            bound,
            relation: Relation::AtMost,
            tolerance,
        }));
        if best.is_none_or(|(b, _)| err < b) {
            best = Some((err, se));
        }
        if *budget == Budget::Complete {
            continue;
        }
        let report = random_design_delta(cfg.n, setup.m, big_m, p.sigma1_sq.value, p.alpha.value, d1, d2)?;
        flags.push(json!({"M": big_m, "valid": report.is_valid()}));
        let dev = report.deviation();
        let hits = values.iter().filter(|&&u| u - setup.theta <= dev).count();
        rows.push(ctx.row(frequency_at_least(
            "coverage-random-design",
            "M",
            big_m as f64,
            hits,
            cfg.replicates,
            1.0 - (d1 + d2),
        )));
        let term = report.inputs["incompleteness_term"];
        let (m0, t0) = *first_term.get_or_insert((big_m, term));
        let expected = t0 * (m0 as f64 / big_m as f64).sqrt();
        rows.push(ctx.row(Check {
            check: "incompleteness-term-scaling",
            parameter: "M",
            value: big_m as f64,
            empirical: term,
            std_err: 0.0,
            bound: expected,
            relation: Relation::Equal,
            tolerance: 1e-12 * expected.abs(),
        }));
    }
    let mut notes = setup.notes();
    notes.insert("delta1".into(), json!(d1));
    notes.insert("delta2".into(), json!(d2));
    notes.insert("budget_validity".into(), json!(flags));
    Ok((rows, notes))
}

pub(super) fn subgauss(cfg: &ExperimentConfig) -> Result<(Vec<ExperimentRow>, Notes)> {
    let setup = Setup::new(cfg, false)?;
    require_unit_range(&setup.kernel)?;
    let (design, spec) = fixed_design(cfg, &setup)?;
    let c = design_scalars(&design).c;
    let ctx = setup.context(cfg, design.len(), spec);
    let values = fixed_design_values(cfg, &setup, &design, "subgauss")?;
    let mean = setup.theta;
    let mut rows = Vec::new();
    for &t in &cfg.t_grid {
        let level = subgauss_lower_tail(setup.m, c, mean, t)?.probability();
        let hits = values.iter().filter(|&&u| mean - u > t).count();
        rows.push(ctx.row(frequency_at_most("lower-tail", "t", t, hits, cfg.replicates, level)));
    }
    for &delta in &cfg.delta_grid {
        let mut hits = 0;
        for &u in &values {
            if mean.sqrt() <= subgauss_sqrt(setup.m, c, u.clamp(0.0, 1.0), delta)?.deviation() {
                hits += 1;
            }
        }
        rows.push(ctx.row(frequency_at_least("sqrt-coverage", "delta", delta, hits, cfg.replicates, 1.0 - delta)));
    }
    let mut notes = setup.notes();
    notes.insert("C".into(), json!(c));
    notes.insert("symmetric".into(), json!(setup.kernel.is_symmetric()));
    Ok((rows, notes))
}
