//! Complete and incomplete U-statistics, and exact oracles over finite
//! sample spaces.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{complete_design_capped, Design, DesignOrigin, DEFAULT_COMPLETE_CAP};
use crate::distribution::{decode_index, for_each_product, Dataset, Distribution, DEFAULT_PRODUCT_CAP};
use crate::error::{Error, Result};
use crate::kernel::{Args, Kernel};
use crate::numeric::{deterministic_sum, DoubleDouble};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSummary {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "M")]
    pub big_m: usize,
    pub origin: DesignOrigin,
}

impl DesignSummary {
    pub fn of(design: &Design) -> Self {
        Self {
            n: design.n(),
            m: design.m(),
            big_m: design.len(),
            origin: design.origin().clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub kernel: String,
    pub design: DesignSummary,
    /// Kernel evaluations performed, always `M`.
    pub eval_count: usize,
}

fn check_compatible(kernel: &Kernel, dataset: &Dataset, design: &Design) -> Result<()> {
    if design.m() != kernel.degree() {
        return Err(Error::param(format!(
            "design subsets have size {} but kernel `{}` has degree {}",
            design.m(),
            kernel.name(),
            kernel.degree()
        )));
    }
    if design.n() > dataset.len() {
        return Err(Error::param(format!(
            "design indexes {} observations but the dataset has {}",
            design.n(),
            dataset.len()
        )));
    }
    if dataset.dim() != kernel.dim() {
        return Err(Error::Dimension {
            kernel: kernel.name().to_string(),
            expected: kernel.dim(),
            got: dataset.dim(),
        });
    }
    Ok(())
}

/// `K` applied to the observations indexed by one subset.
#[inline]
pub fn evaluate_subset(kernel: &Kernel, dataset: &Dataset, subset: &[u32]) -> Result<f64> {
    let args: Args<'_> = subset.iter().map(|&k| dataset.point(k as usize)).collect();
    kernel.evaluate(&args)
}

/// `U_W = (1/M) Σ_i K(X^{W_i})`, evaluated on the current rayon pool.
///
/// The reduction is chunked in a fixed order, so the value is bit-identical
/// for any number of worker threads. Asymmetric kernels are evaluated with
/// the subset's stored argument order.
pub fn estimate_incomplete(kernel: &Kernel, dataset: &Dataset, design: &Design) -> Result<Estimate> {
    check_compatible(kernel, dataset, design)?;
    let big_m = design.len();
    let total = deterministic_sum(big_m, |i| evaluate_subset(kernel, dataset, design.subset0(i)))?;
    Ok(Estimate {
        value: total.mean(big_m),
        kernel: kernel.name().to_string(),
        design: DesignSummary::of(design),
        eval_count: big_m,
    })
}

/// Single-threaded `U_W`, bit-identical to [`estimate_incomplete`].
pub fn incomplete_value_seq(kernel: &Kernel, dataset: &Dataset, design: &Design) -> Result<f64> {
    let mut total = DoubleDouble::ZERO;
    for chunk in design
        .subsets0()
        .collect::<Vec<_>>()
        .chunks(crate::numeric::REDUCTION_CHUNK)
    {
        let mut acc = DoubleDouble::ZERO;
        for s in chunk {
            acc.add(evaluate_subset(kernel, dataset, s)?);
        }
        total.merge(acc);
    }
    Ok(total.mean(design.len()))
}

/// Same as [`incomplete_value_seq`] without the intermediate allocation; used
/// in Monte Carlo inner loops where `check_compatible` has already run.
pub(crate) fn incomplete_value_fast(kernel: &Kernel, dataset: &Dataset, design: &Design) -> Result<f64> {
    let big_m = design.len();
    let mut total = DoubleDouble::ZERO;
    let mut start = 0;
    while start < big_m {
        let end = (start + crate::numeric::REDUCTION_CHUNK).min(big_m);
        let mut acc = DoubleDouble::ZERO;
        for i in start..end {
            acc.add(evaluate_subset(kernel, dataset, design.subset0(i))?);
        }
        total.merge(acc);
        start = end;
    }
    Ok(total.mean(big_m))
}

/// The complete U-statistic: mean over all `C(n, m)` subsets.
pub fn estimate_complete(kernel: &Kernel, dataset: &Dataset) -> Result<Estimate> {
    estimate_complete_capped(kernel, dataset, DEFAULT_COMPLETE_CAP)
}

pub fn estimate_complete_capped(kernel: &Kernel, dataset: &Dataset, cap: u128) -> Result<Estimate> {
    let design = complete_design_capped(dataset.len(), kernel.degree(), cap)?;
    estimate_incomplete(kernel, dataset, &design)
}

/// `θ = E[K(X_1..X_m)]` by weighted enumeration of `support^m`.
pub fn exact_theta(kernel: &Kernel, dist: &Distribution) -> Result<f64> {
    exact_theta_capped(kernel, dist, DEFAULT_PRODUCT_CAP)
}

pub fn exact_theta_capped(kernel: &Kernel, dist: &Distribution, cap: u64) -> Result<f64> {
    check_dist(kernel, dist)?;
    dist.product_size(kernel.degree(), cap)?;
    let (atoms, probs) = dist.atoms().expect("checked finite");
    let mut acc = DoubleDouble::ZERO;
    let mut err = None;
    for_each_product(probs, kernel.degree(), |idx, p| {
        if err.is_some() {
            return;
        }
        let args: Args<'_> = idx.iter().map(|&i| atoms[i].as_slice()).collect();
        match kernel.evaluate(&args) {
            Ok(v) => acc.add(p * v),
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(acc.value()),
    }
}

/// `θ` from enumeration when the support is finite, otherwise from the
/// kernel's analytic facts for this distribution.
pub fn reference_theta(kernel: &Kernel, dist: &Distribution) -> Result<f64> {
    if dist.is_finite() {
        return exact_theta(kernel, dist);
    }
    kernel
        .analytic(dist.name())
        .map(|f| f.theta)
        .ok_or_else(|| {
            Error::Unavailable(format!(
                "no closed-form θ for kernel `{}` under `{}`",
                kernel.name(),
                dist.name()
            ))
        })
}

pub(crate) fn check_dist(kernel: &Kernel, dist: &Distribution) -> Result<()> {
    if kernel.dim() != dist.dim() {
        return Err(Error::Dimension {
            kernel: kernel.name().to_string(),
            expected: kernel.dim(),
            got: dist.dim(),
        });
    }
    Ok(())
}

/// `U_W(x)` for every data vector `x ∈ support^n`, indexed in mixed radix
/// (last observation least significant), with its probability.
#[derive(Clone, Debug)]
pub struct ValueTable {
    pub n: usize,
    pub atoms: usize,
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
    /// per-atom probabilities
    pub atom_probs: Vec<f64>,
}

pub fn uw_value_table(kernel: &Kernel, dist: &Distribution, design: &Design, cap: u64) -> Result<ValueTable> {
    check_dist(kernel, dist)?;
    let n = design.n();
    let size = dist.product_size(n, cap)? as usize;
    if design.m() != kernel.degree() {
        return Err(Error::param("design subset size differs from kernel degree"));
    }
    let (atoms, probs) = dist.atoms().expect("checked finite");
    let s = atoms.len();
    let rows: Vec<(f64, f64)> = (0..size)
        .into_par_iter()
        .map(|code| {
            let mut idx = vec![0usize; n];
            decode_index(code, s, &mut idx);
            let mut values = Vec::with_capacity(n * dist.dim());
            for &i in &idx {
                values.extend_from_slice(&atoms[i]);
            }
            let data = Dataset::new(dist.dim(), values)?;
            let u = incomplete_value_fast(kernel, &data, design)?;
            let p: f64 = idx.iter().map(|&i| probs[i]).product();
            Ok((u, p))
        })
        .collect::<Result<_>>()?;
    let (values, probs_out) = rows.into_iter().unzip();
    Ok(ValueTable {
        n,
        atoms: s,
        values,
        probs: probs_out,
        atom_probs: probs.to_vec(),
    })
}

/// Exact probability mass function of `U_W(X)` over `support^n`.
///
/// Values closer than `1e-12` are merged into one atom.
pub fn exact_distribution_of_uw(kernel: &Kernel, dist: &Distribution, design: &Design) -> Result<Vec<(f64, f64)>> {
    exact_distribution_of_uw_capped(kernel, dist, design, DEFAULT_PRODUCT_CAP)
}

pub fn exact_distribution_of_uw_capped(
    kernel: &Kernel,
    dist: &Distribution,
    design: &Design,
    cap: u64,
) -> Result<Vec<(f64, f64)>> {
    let table = uw_value_table(kernel, dist, design, cap)?;
    let mut pairs: Vec<(f64, f64)> = table.values.into_iter().zip(table.probs).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut pmf: Vec<(f64, DoubleDouble)> = Vec::new();
    for (v, p) in pairs {
        match pmf.last_mut() {
            Some((last, acc)) if (v - *last).abs() <= 1e-12 => acc.add(p),
            _ => {
                let mut acc = DoubleDouble::ZERO;
                acc.add(p);
                pmf.push((v, acc));
            }
        }
    }
    Ok(pmf.into_iter().map(|(v, p)| (v, p.value())).collect())
}

/// Mean and variance of a probability mass function.
pub fn pmf_moments(pmf: &[(f64, f64)]) -> (f64, f64) {
    let mean: DoubleDouble = pmf.iter().map(|&(v, p)| v * p).collect();
    let mean = mean.value();
    let var: DoubleDouble = pmf.iter().map(|&(v, p)| (v - mean) * (v - mean) * p).collect();
    (mean, var.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{complete_design, partition_design, random_design};
    use crate::distribution::distribution_by_name;
    use crate::kernel::kernel_by_name;
    use crate::rng::seeded;

    fn scalars(xs: &[f64]) -> Dataset {
        Dataset::from_scalars(xs).unwrap()
    }

    #[test]
    fn incomplete_examples() {
        let product = kernel_by_name("product").unwrap();
        let d = Design::from_subsets(3, 2, &[vec![1, 2], vec![2, 3]]).unwrap();
        let e = estimate_incomplete(&product, &scalars(&[1.0, -1.0, 1.0]), &d).unwrap();
        assert_eq!(e.value, -1.0);
        assert_eq!(e.eval_count, 2);

        let mean = kernel_by_name("mean").unwrap();
        let xs = [0.1, 0.7, -0.3, 0.25];
        let e = estimate_incomplete(&mean, &scalars(&xs), &complete_design(4, 1).unwrap()).unwrap();
        assert!((e.value - xs.iter().sum::<f64>() / 4.0).abs() < 1e-16);
    }

    #[test]
    fn complete_examples() {
        let constant = kernel_by_name("constant").unwrap();
        assert_eq!(estimate_complete(&constant, &scalars(&[0.3, -0.2, 0.9])).unwrap().value, 0.5);
        let product = kernel_by_name("product").unwrap();
        let e = estimate_complete(&product, &scalars(&[1.0, 1.0, -1.0])).unwrap();
        assert!((e.value + 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn variance_kernel_matches_sample_variance() {
        // (x-y)²/2 averaged over pairs is the unbiased sample variance s²;
        // the registered kernel is that minus one.
        let var = kernel_by_name("variance").unwrap();
        let mut rng = seeded(3);
        let data = distribution_by_name("uniform").unwrap().sample_dataset(&mut rng, 5);
        let xs = data.values();
        let mean = xs.iter().sum::<f64>() / 5.0;
        let s2 = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0;
        let e = estimate_complete(&var, &data).unwrap();
        assert!((e.value - (s2 - 1.0)).abs() < 1e-12);
        assert!((var.to_natural(e.value) - s2).abs() < 1e-12);
    }

    #[test]
    fn mismatches_are_errors() {
        let product = kernel_by_name("product").unwrap();
        let d = partition_design(6, 3).unwrap();
        assert!(estimate_incomplete(&product, &scalars(&[0.0; 6]), &d).is_err());
        let d = partition_design(6, 2).unwrap();
        assert!(estimate_incomplete(&product, &scalars(&[0.0; 4]), &d).is_err());
        let kendall = kernel_by_name("kendall").unwrap();
        assert!(matches!(
            estimate_incomplete(&kendall, &scalars(&[0.0; 6]), &d),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn exact_theta_examples() {
        let rad = distribution_by_name("rademacher").unwrap();
        assert_eq!(exact_theta(&kernel_by_name("product").unwrap(), &rad).unwrap(), 0.0);
        assert_eq!(exact_theta(&kernel_by_name("constant").unwrap(), &rad).unwrap(), 0.5);
        assert_eq!(exact_theta(&kernel_by_name("product3").unwrap(), &rad).unwrap(), 0.0);
        let skew = distribution_by_name("skewed3").unwrap();
        // E[X] = 0.3, so E[XY] = 0.09
        let t = exact_theta(&kernel_by_name("product").unwrap(), &skew).unwrap();
        assert!((t - 0.09).abs() < 1e-15);
        let uni = distribution_by_name("uniform").unwrap();
        assert!(exact_theta(&kernel_by_name("product").unwrap(), &uni).is_err());
        assert_eq!(reference_theta(&kernel_by_name("gini").unwrap(), &uni).unwrap(), -1.0 / 3.0);
    }

    #[test]
    fn uw_pmf_examples() {
        let rad = distribution_by_name("rademacher").unwrap();
        let constant = kernel_by_name("constant").unwrap();
        let d = complete_design(4, 2).unwrap();
        assert_eq!(exact_distribution_of_uw(&constant, &rad, &d).unwrap(), vec![(0.5, 1.0)]);

        let product = kernel_by_name("product").unwrap();
        let d = Design::from_subsets(3, 2, &[vec![1, 2]]).unwrap();
        assert_eq!(
            exact_distribution_of_uw(&product, &rad, &d).unwrap(),
            vec![(-1.0, 0.5), (1.0, 0.5)]
        );
        let d = random_design(8, 3, 6, 1).unwrap();
        let pmf = exact_distribution_of_uw(&kernel_by_name("product3").unwrap(), &rad, &d).unwrap();
        assert!((pmf.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn permutation_invariance() {
        let mut rng = seeded(8);
        let gini = kernel_by_name("gini").unwrap();
        let data = distribution_by_name("uniform").unwrap().sample_dataset(&mut rng, 12);
        let design = random_design(12, 2, 40, 3).unwrap();
        let perm: Vec<usize> = (0..12).map(|i| (i * 5 + 3) % 12).collect();
        // row perm[i] of the new data is row i of the old data
        let mut inverse = vec![0; 12];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p] = i;
        }
        let moved = data.permuted(&inverse);
        let relabeled = design.relabeled(&perm);
        let a = estimate_incomplete(&gini, &data, &design).unwrap().value;
        let b = estimate_incomplete(&gini, &moved, &relabeled).unwrap().value;
        assert_eq!(a, b);
    }

    #[test]
    fn seq_and_parallel_agree() {
        let mut rng = seeded(9);
        let data = distribution_by_name("uniform").unwrap().sample_dataset(&mut rng, 40);
        let design = random_design(40, 3, 10_000, 4).unwrap();
        let k = kernel_by_name("gini3").unwrap();
        let par = estimate_incomplete(&k, &data, &design).unwrap().value;
        assert_eq!(par, incomplete_value_seq(&k, &data, &design).unwrap());
        assert_eq!(par, incomplete_value_fast(&k, &data, &design).unwrap());
    }
}
