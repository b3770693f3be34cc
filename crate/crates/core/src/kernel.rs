//! Bounded kernels and the built-in kernel registry.
//!
//! Every kernel stored here maps `m` sample points of dimension `d` into a
//! closed interval inside `[-1, 1]`. Kernels whose natural range is wider are
//! rescaled affinely when constructed; the map back to natural units is kept
//! in [`Affine`] so estimates can be reported in either scale.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Values within this distance of a range endpoint are snapped onto it.
const RANGE_SLACK: f64 = 1e-12;

pub type KernelFn = Arc<dyn Fn(&[&[f64]]) -> f64 + Send + Sync>;

/// Argument list for one kernel call, on the stack for small degrees.
pub type Args<'a> = SmallVec<[&'a [f64]; 8]>;

/// One observation: a fixed-width vector of finite reals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint(Vec<f64>);

impl SamplePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::param("sample point needs at least one coordinate"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("sample point".into()));
        }
        Ok(Self(coords))
    }

    pub fn scalar(x: f64) -> Result<Self> {
        Self::new(vec![x])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Closed value interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const SYMMETRIC_UNIT: Range = Range { lo: -1.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::param(format!("invalid range [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn within(&self, outer: &Range) -> bool {
        self.lo >= outer.lo && self.hi <= outer.hi
    }
}

/// `stored = scale * natural + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub scale: f64,
    pub offset: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine {
        scale: 1.0,
        offset: 0.0,
    };

    /// Map sending `from` onto `to`.
    pub fn between(from: Range, to: Range) -> Self {
        let scale = to.width() / from.width();
        Affine {
            scale,
            offset: to.lo - scale * from.lo,
        }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        self.scale * x + self.offset
    }

    pub fn invert(&self, y: f64) -> f64 {
        (y - self.offset) / self.scale
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &Affine) -> Affine {
        Affine {
            scale: other.scale * self.scale,
            offset: other.scale * self.offset + other.offset,
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }
}

/// Closed-form facts about a kernel under a named distribution, expressed in
/// the kernel's stored scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticFacts {
    pub distribution: String,
    pub theta: f64,
    pub sigma1_sq: Option<f64>,
    pub sigma_m_sq: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
}

impl AnalyticFacts {
    fn rescaled(&self, map: &Affine) -> Self {
        let var = map.scale * map.scale;
        AnalyticFacts {
            distribution: self.distribution.clone(),
            theta: map.apply(self.theta),
            sigma1_sq: self.sigma1_sq.map(|v| v * var),
            sigma_m_sq: self.sigma_m_sq.map(|v| v * var),
            beta: self.beta.map(|v| v * var),
            gamma: self.gamma.map(|v| v * var),
        }
    }
}

/// A bounded kernel of degree `m` over `d`-dimensional points.
#[derive(Clone)]
pub struct Kernel {
    name: String,
    degree: usize,
    dim: usize,
    range: Range,
    symmetric: bool,
    func: KernelFn,
    /// natural value -> stored value
    map: Affine,
    analytic: Vec<AnalyticFacts>,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.name)
            .field("degree", &self.degree)
            .field("dim", &self.dim)
            .field("range", &self.range)
            .field("symmetric", &self.symmetric)
            .field("map", &self.map)
            .finish_non_exhaustive()
    }
}

impl Kernel {
    /// Registers `func`, whose values lie in `natural_range`. If that range is
    /// not inside `[-1, 1]` the kernel is rescaled onto `[-1, 1]`.
    pub fn new<F>(
        name: impl Into<String>,
        degree: usize,
        dim: usize,
        natural_range: Range,
        symmetric: bool,
        func: F,
    ) -> Result<Self>
    where
        F: Fn(&[&[f64]]) -> f64 + Send + Sync + 'static,
    {
        if degree == 0 || dim == 0 {
            return Err(Error::param("kernel degree and dimension must be >= 1"));
        }
        let (map, range) = if natural_range.within(&Range::SYMMETRIC_UNIT) {
            (Affine::IDENTITY, natural_range)
        } else {
            (
                Affine::between(natural_range, Range::SYMMETRIC_UNIT),
                Range::SYMMETRIC_UNIT,
            )
        };
        Ok(Self {
            name: name.into(),
            degree,
            dim,
            range,
            symmetric,
            func: Arc::new(func),
            map,
            analytic: Vec::new(),
        })
    }

    /// Attaches closed-form facts, given in the stored (rescaled) units.
    pub fn with_analytic(mut self, facts: AnalyticFacts) -> Self {
        self.analytic.push(facts);
        self
    }

    pub fn constant(c: f64, degree: usize) -> Result<Self> {
        if !(-1.0..=1.0).contains(&c) {
            return Err(Error::param(format!("constant {c} outside [-1, 1]")));
        }
        let lo = if c > -1.0 { -1.0 } else { c };
        let hi = if c < 1.0 { 1.0 } else { c };
        let mut k = Kernel::new("constant", degree, 1, Range::new(lo, hi)?, true, move |_| c)?;
        for dist in ["rademacher", "uniform", "skewed3"] {
            k = k.with_analytic(AnalyticFacts {
                distribution: dist.into(),
                theta: c,
                sigma1_sq: Some(0.0),
                sigma_m_sq: Some(0.0),
                beta: Some(0.0),
                gamma: Some(0.0),
            });
        }
        Ok(k)
    }

    /// `K(x_1..x_m) = (x_1 + … + x_m) / m` on scalar data in `[-1, 1]`.
    pub fn coordinate_mean(degree: usize) -> Result<Self> {
        let m = degree as f64;
        Kernel::new(
            format!("average{degree}"),
            degree,
            1,
            Range::SYMMETRIC_UNIT,
            true,
            move |a| a.iter().map(|p| p[0]).sum::<f64>() / m,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn range(&self) -> Range {
        self.range
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Natural-to-stored value map.
    pub fn scaling(&self) -> Affine {
        self.map
    }

    /// Maps a stored-scale value (an estimate, say) back to natural units.
    pub fn to_natural(&self, value: f64) -> f64 {
        self.map.invert(value)
    }

    pub fn analytic(&self, distribution: &str) -> Option<&AnalyticFacts> {
        self.analytic.iter().find(|f| f.distribution == distribution)
    }

    pub fn require_symmetric(&self) -> Result<()> {
        if self.symmetric {
            Ok(())
        } else {
            Err(Error::NotSymmetric(self.name.clone()))
        }
    }

    /// Copy of this kernel affinely mapped onto `[0, 1]`.
    pub fn to_unit_interval(&self) -> Kernel {
        let unit = Range { lo: 0.0, hi: 1.0 };
        let step = Affine::between(self.range, unit);
        Kernel {
            name: format!("{}@unit", self.name),
            degree: self.degree,
            dim: self.dim,
            range: unit,
            symmetric: self.symmetric,
            func: self.func.clone(),
            map: self.map.then(&step),
            analytic: self.analytic.iter().map(|f| f.rescaled(&step)).collect(),
        }
    }

    /// Evaluates the kernel on `m` points given as coordinate slices.
    #[inline]
    pub fn evaluate(&self, args: &[&[f64]]) -> Result<f64> {
        if args.len() != self.degree {
            return Err(Error::Arity {
                kernel: self.name.clone(),
                expected: self.degree,
                got: args.len(),
            });
        }
        if let Some(bad) = args.iter().find(|a| a.len() != self.dim) {
            return Err(Error::Dimension {
                kernel: self.name.clone(),
                expected: self.dim,
                got: bad.len(),
            });
        }
        let natural = (self.func)(args);
        let v = self.map.apply(natural);
        if v.is_finite() && self.range.contains(v) {
            return Ok(v);
        }
        if v >= self.range.lo - RANGE_SLACK && v <= self.range.hi + RANGE_SLACK {
            return Ok(v.clamp(self.range.lo, self.range.hi));
        }
        Err(Error::RangeViolation {
            kernel: self.name.clone(),
            value: v,
            lo: self.range.lo,
            hi: self.range.hi,
        })
    }

    pub fn evaluate_points(&self, args: &[SamplePoint]) -> Result<f64> {
        let slices: Args<'_> = args.iter().map(|p| p.coords()).collect();
        self.evaluate(&slices)
    }
}

/// Returns `args` with position `k` (1-based) replaced by `y`.
pub fn substitute(args: &[SamplePoint], k: usize, y: &SamplePoint) -> Result<Vec<SamplePoint>> {
    if k == 0 || k > args.len() {
        return Err(Error::IndexOutOfRange {
            index: k,
            len: args.len(),
        });
    }
    let mut out = args.to_vec();
    out[k - 1] = y.clone();
    Ok(out)
}

/// `K(S_y^k args) - K(S_{y2}^k args)` with `k` 1-based.
pub fn partial_difference(
    kernel: &Kernel,
    args: &[SamplePoint],
    k: usize,
    y: &SamplePoint,
    y2: &SamplePoint,
) -> Result<f64> {
    let with_y = substitute(args, k, y)?;
    let with_y2 = substitute(args, k, y2)?;
    Ok(kernel.evaluate_points(&with_y)? - kernel.evaluate_points(&with_y2)?)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn facts(dist: &str, theta: f64, sigma1_sq: f64, sigma_m_sq: f64) -> AnalyticFacts {
    AnalyticFacts {
        distribution: dist.into(),
        theta,
        sigma1_sq: Some(sigma1_sq),
        sigma_m_sq: Some(sigma_m_sq),
        beta: None,
        gamma: None,
    }
}

fn with_beta_gamma(mut f: AnalyticFacts, beta: f64, gamma: f64) -> AnalyticFacts {
    f.beta = Some(beta);
    f.gamma = Some(gamma);
    f
}

/// All built-in kernels, in registration order.
pub fn builtin_registry() -> Vec<Kernel> {
    let unit = Range::SYMMETRIC_UNIT;
    let zero_two = Range { lo: 0.0, hi: 2.0 };
    let build = || -> Result<Vec<Kernel>> {
        Ok(vec![
            Kernel::new("product", 2, 1, unit, true, |a| a[0][0] * a[1][0])?
                .with_analytic(with_beta_gamma(facts("rademacher", 0.0, 0.0, 1.0), 4.0, 8.0))
                .with_analytic(with_beta_gamma(
                    facts("uniform", 0.0, 0.0, 1.0 / 9.0),
                    4.0 / 9.0,
                    8.0 / 3.0,
                )),
            Kernel::new("mean", 1, 1, unit, true, |a| a[0][0])?
                .with_analytic(with_beta_gamma(facts("rademacher", 0.0, 1.0, 1.0), 0.0, 0.0))
                .with_analytic(with_beta_gamma(
                    facts("uniform", 0.0, 1.0 / 3.0, 1.0 / 3.0),
                    0.0,
                    0.0,
                )),
            Kernel::new("variance", 2, 1, zero_two, true, |a| {
                let d = a[0][0] - a[1][0];
                d * d / 2.0
            })?
            .with_analytic(facts("uniform", -2.0 / 3.0, 1.0 / 45.0, 7.0 / 45.0)),
            Kernel::new("kendall", 2, 2, unit, true, |a| {
                sign((a[0][0] - a[1][0]) * (a[0][1] - a[1][1]))
            })?,
            Kernel::new("gini", 2, 1, zero_two, true, |a| (a[0][0] - a[1][0]).abs())?
                .with_analytic(facts("uniform", -1.0 / 3.0, 1.0 / 45.0, 2.0 / 9.0)),
            Kernel::new("gini3", 3, 1, zero_two, true, |a| {
                let (x, y, z) = (a[0][0], a[1][0], a[2][0]);
                ((x - y).abs() + (y - z).abs() + (x - z).abs()) / 3.0
            })?
            .with_analytic(AnalyticFacts {
                distribution: "uniform".into(),
                theta: -1.0 / 3.0,
                sigma1_sq: Some(4.0 / 405.0),
                sigma_m_sq: None,
                beta: None,
                gamma: None,
            }),
            Kernel::constant(0.5, 2)?,
            Kernel::new("product3", 3, 1, unit, true, |a| a[0][0] * a[1][0] * a[2][0])?
                .with_analytic(with_beta_gamma(facts("rademacher", 0.0, 0.0, 1.0), 4.0, 8.0))
                .with_analytic(with_beta_gamma(
                    facts("uniform", 0.0, 0.0, 1.0 / 27.0),
                    4.0 / 27.0,
                    8.0 / 3.0,
                )),
            Kernel::new("difference", 2, 1, unit, false, |a| (a[0][0] - a[1][0]) / 2.0)?,
        ])
    };
    build().expect("built-in kernels are well formed")
}

/// Looks up a built-in kernel; a `@unit` suffix selects its `[0, 1]` rescaling.
pub fn kernel_by_name(name: &str) -> Result<Kernel> {
    if let Some(base) = name.strip_suffix("@unit") {
        return kernel_by_name(base).map(|k| k.to_unit_interval());
    }
    builtin_registry()
        .into_iter()
        .find(|k| k.name() == name)
        .ok_or_else(|| Error::UnknownKernel(name.to_string()))
}

pub fn kernel_names() -> Vec<String> {
    builtin_registry().iter().map(|k| k.name().to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pts(xs: &[f64]) -> Vec<SamplePoint> {
        xs.iter().map(|&x| SamplePoint::scalar(x).unwrap()).collect()
    }

    #[test]
    fn evaluate_examples() {
        let product = kernel_by_name("product").unwrap();
        assert_eq!(product.evaluate(&[&[1.0], &[-1.0]]).unwrap(), -1.0);

        let constant = kernel_by_name("constant").unwrap();
        assert_eq!(constant.evaluate(&[&[0.3], &[-0.9]]).unwrap(), 0.5);

        let kendall = kernel_by_name("kendall").unwrap();
        assert_eq!(kendall.evaluate(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap(), -1.0);
        assert_eq!(kendall.evaluate(&[&[1.0, 1.0], &[2.0, 2.0]]).unwrap(), 1.0);
    }

    #[test]
    fn arity_and_dimension_errors() {
        let product = kernel_by_name("product").unwrap();
        assert!(matches!(product.evaluate(&[&[1.0]]), Err(Error::Arity { .. })));
        assert!(matches!(
            product.evaluate(&[&[1.0, 0.0], &[1.0, 0.0]]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn range_violation_is_an_error() {
        let bad = Kernel::new("bad", 1, 1, Range::SYMMETRIC_UNIT, true, |a| 3.0 * a[0][0]).unwrap();
        assert!(matches!(bad.evaluate(&[&[0.9]]), Err(Error::RangeViolation { .. })));
        assert!(matches!(
            Kernel::new("nan", 1, 1, Range::SYMMETRIC_UNIT, true, |_| f64::NAN)
                .unwrap()
                .evaluate(&[&[0.0]]),
            Err(Error::RangeViolation { .. })
        ));
    }

    #[test]
    fn registry_lookup() {
        let product = kernel_by_name("product").unwrap();
        assert_eq!(product.degree(), 2);
        assert_eq!(product.range(), Range::SYMMETRIC_UNIT);
        assert_eq!(kernel_by_name("mean").unwrap().degree(), 1);
        assert!(matches!(kernel_by_name("nope"), Err(Error::UnknownKernel(_))));
        for name in ["variance", "kendall", "gini", "constant", "product3"] {
            assert!(kernel_by_name(name).is_ok(), "{name}");
        }
    }

    #[test]
    fn wide_kernels_are_rescaled() {
        let gini = kernel_by_name("gini").unwrap();
        assert_eq!(gini.range(), Range::SYMMETRIC_UNIT);
        assert_eq!(gini.evaluate(&[&[0.5], &[-0.25]]).unwrap(), 0.75 - 1.0);
        assert_eq!(gini.to_natural(-0.25), 0.75);
        let var = kernel_by_name("variance").unwrap();
        assert_eq!(var.evaluate(&[&[1.0], &[-1.0]]).unwrap(), 1.0);
        assert_eq!(var.evaluate(&[&[0.5], &[0.5]]).unwrap(), -1.0);
    }

    #[test]
    fn unit_interval_map() {
        let product = kernel_by_name("product").unwrap().to_unit_interval();
        assert_eq!(product.range(), Range { lo: 0.0, hi: 1.0 });
        assert_eq!(product.evaluate(&[&[1.0], &[-1.0]]).unwrap(), 0.0);
        assert_eq!(product.evaluate(&[&[1.0], &[1.0]]).unwrap(), 1.0);
        let facts = product.analytic("rademacher").unwrap();
        assert_eq!(facts.theta, 0.5);
        assert_eq!(facts.sigma_m_sq, Some(0.25));
        let gini = kernel_by_name("gini").unwrap().to_unit_interval();
        assert_eq!(gini.evaluate(&[&[1.0], &[-1.0]]).unwrap(), 1.0);
        assert!((gini.to_natural(0.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn substitution() {
        let args = pts(&[1.0, 2.0, 3.0]);
        let y = SamplePoint::scalar(9.0).unwrap();
        assert_eq!(substitute(&args, 2, &y).unwrap(), pts(&[1.0, 9.0, 3.0]));
        assert_eq!(substitute(&pts(&[1.0]), 1, &y).unwrap(), pts(&[9.0]));
        let back = substitute(&substitute(&args, 3, &y).unwrap(), 3, &args[2]).unwrap();
        assert_eq!(back, args);
        assert!(matches!(substitute(&args, 0, &y), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(substitute(&args, 4, &y), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn partial_differences() {
        let product = kernel_by_name("product").unwrap();
        let one = SamplePoint::scalar(1.0).unwrap();
        let minus = SamplePoint::scalar(-1.0).unwrap();
        let args = pts(&[0.2, 0.35]);
        assert_eq!(partial_difference(&product, &args, 1, &one, &one).unwrap(), 0.0);
        assert_eq!(partial_difference(&product, &args, 1, &one, &minus).unwrap(), 2.0 * 0.35);
        let constant = kernel_by_name("constant").unwrap();
        assert_eq!(partial_difference(&constant, &args, 2, &one, &minus).unwrap(), 0.0);
    }

    #[test]
    fn sample_points_reject_non_finite() {
        assert!(SamplePoint::new(vec![f64::NAN]).is_err());
        assert!(SamplePoint::new(vec![]).is_err());
    }

    fn random_args(rng: &mut ChaCha8Rng, k: &Kernel) -> Vec<Vec<f64>> {
        (0..k.degree())
            .map(|_| (0..k.dim()).map(|_| rng.random_range(-1.0..=1.0)).collect())
            .collect()
    }

    #[test]
    fn builtins_are_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in builtin_registry().into_iter().filter(|k| k.is_symmetric()) {
            for _ in 0..100 {
                let args = random_args(&mut rng, &k);
                let fwd: Vec<&[f64]> = args.iter().map(|v| v.as_slice()).collect();
                let rev: Vec<&[f64]> = args.iter().rev().map(|v| v.as_slice()).collect();
                let mut rot = fwd.clone();
                rot.rotate_left(1);
                let base = k.evaluate(&fwd).unwrap();
                assert!((base - k.evaluate(&rev).unwrap()).abs() <= 1e-12, "{}", k.name());
                assert!((base - k.evaluate(&rot).unwrap()).abs() <= 1e-12, "{}", k.name());
            }
        }
    }

    #[test]
    fn builtins_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for k in builtin_registry() {
            for _ in 0..10_000 {
                let args = random_args(&mut rng, &k);
                let slices: Vec<&[f64]> = args.iter().map(|v| v.as_slice()).collect();
                let v = k.evaluate(&slices).unwrap();
                assert!(k.range().contains(v), "{} gave {v}", k.name());
            }
        }
    }

    #[test]
    fn swapped_partial_difference_negates() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for k in builtin_registry().into_iter().filter(|k| k.dim() == 1) {
            for _ in 0..50 {
                let args = pts(&(0..k.degree()).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
                let y = SamplePoint::scalar(rng.random_range(-1.0..1.0)).unwrap();
                let y2 = SamplePoint::scalar(rng.random_range(-1.0..1.0)).unwrap();
                let kk = 1 + rng.random_range(0..k.degree());
                let a = partial_difference(&k, &args, kk, &y, &y2).unwrap();
                let b = partial_difference(&k, &args, kk, &y2, &y).unwrap();
                assert_eq!(a, -b);
            }
        }
    }
}
