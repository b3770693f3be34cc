//! Exact Efron-Stein sandwich for `f = U_W` over a finite sample space:
//! `Σ_k Var E[f|X_k] ≤ Var f ≤ ES(f) ≤ Σ_k Var E[f|X_k] + H(f)/4`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Check, ExperimentConfig, ExperimentRow, Relation, Setup, EXACT_TOL};
use crate::design::{Design, DesignSpec};
use crate::distribution::{Distribution, DEFAULT_PRODUCT_CAP};
use crate::error::{Error, Result};
use crate::estimator::uw_value_table;
use crate::kernel::Kernel;
use crate::numeric::{deterministic_sum, DoubleDouble};
use crate::rng::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfronSteinTerms {
    /// `Σ_k Var E[f | X_k]`
    pub sum_var_cond: f64,
    pub variance: f64,
    /// `½ Σ_k E[(D^k f)²]`
    pub efron_stein: f64,
    /// `Σ_{k≠l} E[(D^l D^k f)²]`
    pub interaction: f64,
}

impl EfronSteinTerms {
    pub fn upper(&self) -> f64 {
        self.sum_var_cond + self.interaction / 4.0
    }
}

/// All four terms by enumeration of `support^n`.
pub fn efron_stein_terms(kernel: &Kernel, dist: &Distribution, design: &Design, cap: u64) -> Result<EfronSteinTerms> {
    let table = uw_value_table(kernel, dist, design, cap)?;
    let (n, s) = (table.n, table.atoms);
    let (v, p, pa) = (&table.values, &table.probs, &table.atom_probs);
    let size = v.len();
    // weight of observation k's digit in the mixed-radix code
    let weight: Vec<usize> = (0..n).map(|k| s.pow((n - 1 - k) as u32)).collect();
    let digit = |code: usize, k: usize| (code / weight[k]) % s;
    let set = |code: usize, k: usize, a: usize| code - digit(code, k) * weight[k] + a * weight[k];

    let mean = deterministic_sum(size, |c| Ok::<_, Error>(p[c] * v[c]))?.value();
    let variance = deterministic_sum(size, |c| Ok::<_, Error>(p[c] * (v[c] - mean) * (v[c] - mean)))?.value();

    let mut sum_var_cond = DoubleDouble::ZERO;
    for k in 0..n {
        let mut cond = vec![DoubleDouble::ZERO; s];
        for c in 0..size {
            cond[digit(c, k)].add(p[c] * v[c]);
        }
        for (a, acc) in cond.iter().enumerate() {
            if pa[a] > 0.0 {
                let e = acc.value() / pa[a] - mean;
                sum_var_cond.add(pa[a] * e * e);
            }
        }
    }

    let es = deterministic_sum(size, |c| {
        let mut acc = 0.0;
        for k in 0..n {
            for a in 0..s {
                let d = v[c] - v[set(c, k, a)];
                acc += pa[a] * d * d;
            }
        }
        Ok::<_, Error>(p[c] * acc)
    })?
    .value()
        / 2.0;

    let interaction = deterministic_sum(size, |c| {
        let mut acc = 0.0;
        for k in 0..n {
            for l in k + 1..n {
                for a in 0..s {
                    let ck = set(c, k, a);
                    for b in 0..s {
                        let d = v[c] - v[ck] - v[set(c, l, b)] + v[set(ck, l, b)];
                        acc += pa[a] * pa[b] * d * d;
                    }
                }
            }
        }
        Ok::<_, Error>(p[c] * acc)
    })?
    .value()
        * 2.0;

    Ok(EfronSteinTerms {
        sum_var_cond: sum_var_cond.value(),
        variance,
        efron_stein: es,
        interaction,
    })
}

pub(super) fn efron_stein(cfg: &ExperimentConfig) -> Result<(Vec<ExperimentRow>, BTreeMap<String, serde_json::Value>)> {
    let setup = Setup::new(cfg, false)?;
    let big_m = cfg.budget.map(|b| b.resolve(cfg.n, setup.m)).transpose()?;
    let specs: Vec<DesignSpec> = match &cfg.design {
        DesignSpec::Random { .. } => (0..cfg.designs)
            .map(|i| cfg.design.resolved(big_m, derive_seed(cfg.seed, "efron-stein/design", i as u64)))
            .collect::<Result<_>>()?,
        other => vec![other.clone()],
    };
    let mut rows = Vec::new();
    let mut terms_out = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        let design = spec.build(cfg.n, setup.m, None, 0)?;
        let terms = efron_stein_terms(&setup.kernel, &setup.dist, &design, DEFAULT_PRODUCT_CAP)?;
        let mut ctx = setup.context(cfg, design.len(), spec.to_string());
        ctx.replicates = 0;
        for (check, lhs, rhs) in [
            ("conditional-variance-lower", terms.sum_var_cond, terms.variance),
            ("efron-stein-upper", terms.variance, terms.efron_stein),
            ("efron-stein-bias", terms.efron_stein, terms.upper()),
        ] {
            rows.push(ctx.row(Check {
                check,
                parameter: "design",
                value: i as f64,
                empirical: lhs,
                std_err: 0.0,
                bound: rhs,
                relation: Relation::AtMost,
                tolerance: EXACT_TOL,
            }));
        }
        terms_out.push(json!({"design": spec.to_string(), "terms": terms}));
    }
    let mut notes = BTreeMap::new();
    notes.insert("terms".into(), json!(terms_out));
    Ok((rows, notes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{complete_design, partition_design, random_design};
    use crate::distribution::distribution_by_name;
    use crate::estimator::{exact_distribution_of_uw, pmf_moments};
    use crate::experiments::{run, Budget, ExperimentKind};
    use crate::kernel::{kernel_by_name, Kernel};

    fn rad() -> Distribution {
        distribution_by_name("rademacher").unwrap()
    }

    #[test]
    fn sum_has_equalities() {
        let k = Kernel::coordinate_mean(1).unwrap();
        for n in [3, 6, 9] {
            let t = efron_stein_terms(&k, &rad(), &complete_design(n, 1).unwrap(), 1 << 20).unwrap();
            assert!(t.interaction.abs() < 1e-14);
            assert!((t.variance - 1.0 / n as f64).abs() < 1e-14);
            assert!((t.sum_var_cond - t.variance).abs() < 1e-14);
            assert!((t.efron_stein - t.variance).abs() < 1e-14);
        }
    }

    #[test]
    fn chain_for_product_random_design() {
        let k = kernel_by_name("product").unwrap();
        let d = random_design(6, 2, 5, 11).unwrap();
        let t = efron_stein_terms(&k, &rad(), &d, 1 << 20).unwrap();
        assert!(t.sum_var_cond <= t.variance + 1e-12);
        assert!(t.variance <= t.efron_stein + 1e-12);
        assert!(t.efron_stein <= t.upper() + 1e-12);
        let (_, var) = pmf_moments(&exact_distribution_of_uw(&k, &rad(), &d).unwrap());
        assert!((var - t.variance).abs() < 1e-12);
    }

    #[test]
    fn constant_kernel_is_all_zero() {
        let k = kernel_by_name("constant").unwrap();
        let t = efron_stein_terms(&k, &rad(), &partition_design(6, 2).unwrap(), 1 << 20).unwrap();
        assert_eq!((t.sum_var_cond, t.variance, t.efron_stein, t.interaction), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn skewed_support_chain() {
        let k = kernel_by_name("gini").unwrap();
        let d = random_design(7, 2, 6, 2).unwrap();
        let t = efron_stein_terms(&k, &distribution_by_name("skewed3").unwrap(), &d, 1 << 20).unwrap();
        assert!(t.sum_var_cond <= t.variance + 1e-12 && t.variance <= t.efron_stein + 1e-12);
        assert!(t.efron_stein <= t.upper() + 1e-12);
    }

    #[test]
    fn experiment_rows() {
        let mut c = ExperimentConfig::new(ExperimentKind::EfronStein);
        c.n = 6;
        c.budget = Some(Budget::Fixed(5));
        c.designs = 4;
        let out = run(&c).unwrap();
        assert_eq!(out.rows.len(), 12);
        assert!(out.all_pass());
        c.n = 30;
        assert!(matches!(run(&c), Err(Error::CapExceeded { .. })));
    }
}
