//! Concentration of `A`, `B`, `C` over uniformly sampled random designs.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde_json::json;

use super::{frequency_at_most, Check, ExperimentConfig, ExperimentRow, Relation, RowContext, MEAN_SLACK_SE};
use crate::design::{
    c_deviation_bound, expected_stats, random_design_with, sqrt_a_deviation_bound, sqrt_b_deviation_bound,
    DesignScalars, StatsWorkspace,
};
use crate::error::{Error, Result};
use crate::kernel::kernel_by_name;
use crate::numeric::DoubleDouble;
use crate::rng::replicate_rng;

/// Sample mean and its standard error.
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let r = xs.len() as f64;
    let mean = xs.iter().copied().collect::<DoubleDouble>().value() / r;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).collect::<DoubleDouble>().value() / (r - 1.0).max(1.0);
    (mean, (var / r).sqrt())
}

pub(super) fn design_concentration(cfg: &ExperimentConfig) -> Result<(Vec<ExperimentRow>, BTreeMap<String, serde_json::Value>)> {
    let m = match cfg.m {
        Some(m) => m,
        None => kernel_by_name(&cfg.kernel)?.degree(),
    };
    let n = cfg.n;
    let big_m = cfg
        .budget
        .ok_or_else(|| Error::param("design concentration needs M"))?
        .resolve(n, m)?;
    let expected = expected_stats(n, m, big_m)?;
    for &d in &cfg.delta_grid {
        if !(d > 0.0 && d < 1.0) {
            return Err(Error::param(format!("δ must lie in (0, 1), got {d}")));
        }
    }

    let stats: Vec<DesignScalars> = (0..cfg.replicates)
        .into_par_iter()
        .map_init(
            || StatsWorkspace::new(n),
            |ws, r| {
                let mut rng = replicate_rng(cfg.seed, "design-concentration", r as u64);
                let design = random_design_with(&mut rng, n, m, big_m)?;
                Ok(ws.scalars(&design))
            },
        )
        .collect::<Result<_>>()?;

    let ctx = RowContext {
        experiment: cfg.kind.to_string(),
        kernel: "none".into(),
        distribution: "none".into(),
        n,
        m,
        big_m,
        design: format!("random:{big_m}"),
        replicates: cfg.replicates,
        seed: cfg.seed,
    };
    let r = cfg.replicates;
    let mut rows = Vec::new();
    for &delta in &cfg.delta_grid {
        let c_bound = c_deviation_bound(n, m, big_m, delta);
        let a_bound = sqrt_a_deviation_bound(n, m, big_m, delta);
        let b_bound = sqrt_b_deviation_bound(n, m, big_m, delta);
        let c_hits = stats.iter().filter(|s| s.c > c_bound).count();
        let a_hits = stats.iter().filter(|s| s.a.sqrt() > a_bound).count();
        let b_hits = stats.iter().filter(|s| s.b.sqrt() > b_bound).count();
        rows.push(ctx.row(frequency_at_most("C-deviation", "delta", delta, c_hits, r, delta / 4.0)));
        rows.push(ctx.row(frequency_at_most("sqrtA-deviation", "delta", delta, a_hits, r, delta)));
        rows.push(ctx.row(frequency_at_most("sqrtB-deviation", "delta", delta, b_hits, r, delta)));
    }
    for (name, values, exact) in [
        ("mean-A", stats.iter().map(|s| s.a).collect::<Vec<_>>(), expected.a_exact),
        ("mean-B", stats.iter().map(|s| s.b).collect::<Vec<_>>(), expected.b_exact),
    ] {
        let (mean, se) = mean_se(&values);
        rows.push(ctx.row(Check {
            check: name,
            parameter: "M",
            value: big_m as f64,
            empirical: mean,
            std_err: se,
            bound: exact,
            relation: Relation::Equal,
            tolerance: (MEAN_SLACK_SE * se).max(1e-12 * exact.abs()),
        }));
    }

    let mut notes = BTreeMap::new();
    notes.insert("expected".into(), json!(expected));
    notes.insert(
        "sqrt_M_at_least_ln_n".into(),
        json!((big_m as f64).sqrt() >= (n as f64).ln()),
    );
    Ok((rows, notes))
}
