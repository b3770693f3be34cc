//! Kernel/distribution coefficients: conditional variances `σ_k²` and the
//! mixed-difference coefficients `β`, `γ`, `α`.
//!
//! Every value carries a [`Provenance`]. Bounds only accept certified values
//! (analytic, enumerated, worst case, or fixed by convention); Monte Carlo
//! values are reported for information and replaced by their worst-case
//! counterparts by [`SensitivityProfile::certified`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::{for_each_product, Distribution, Support, DEFAULT_PRODUCT_CAP};
use crate::error::{Error, Result};
use crate::estimator::check_dist;
use crate::kernel::{Args, Kernel};
use crate::numeric::DoubleDouble;
use crate::rng::replicate_rng;

pub const WORST_CASE_BETA: f64 = 8.0;
pub const WORST_CASE_GAMMA: f64 = 8.0;
pub const WORST_CASE_SIGMA_SQ: f64 = 1.0;

/// Tolerance for the `β ≤ γ ≤ 8` and variance-ordering invariants.
const INVARIANT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Enumerated,
    MonteCarlo { std_err: f64 },
    WorstCase,
    /// Defined rather than computed (e.g. `β = γ = 0` for `m = 1`).
    Convention,
    /// Given by the caller, who vouches for it.
    Supplied,
}

impl Provenance {
    pub fn is_certified(&self) -> bool {
        !matches!(self, Provenance::MonteCarlo { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub value: f64,
    pub provenance: Provenance,
}

impl Coefficient {
    pub fn new(value: f64, provenance: Provenance) -> Self {
        Self { value, provenance }
    }

    fn worst_case(value: f64) -> Self {
        Self::new(value, Provenance::WorstCase)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityProfile {
    pub sigma1_sq: Coefficient,
    pub sigma_m_sq: Coefficient,
    /// `σ_k²` for `k = 1..m`, when all were computed
    pub sigma_k_sq: Option<Vec<Coefficient>>,
    pub beta: Coefficient,
    pub gamma: Coefficient,
    pub alpha: Coefficient,
    /// Candidate-search estimate of `γ`'s supremum (a lower estimate), reported
    /// when the supremum could not be computed exactly.
    #[serde(default)]
    pub gamma_search: Option<f64>,
}

/// `α = √(β/2) + √γ`.
pub fn alpha(beta: f64, gamma: f64) -> f64 {
    (beta / 2.0).sqrt() + gamma.sqrt()
}

fn weaker(a: Provenance, b: Provenance) -> Provenance {
    match (a, b) {
        (Provenance::MonteCarlo { std_err: x }, Provenance::MonteCarlo { std_err: y }) => {
            Provenance::MonteCarlo { std_err: x.max(y) }
        }
        (p @ Provenance::MonteCarlo { .. }, _) | (_, p @ Provenance::MonteCarlo { .. }) => p,
        (Provenance::WorstCase, _) | (_, Provenance::WorstCase) => Provenance::WorstCase,
        (Provenance::Analytic, _) | (_, Provenance::Analytic) => Provenance::Analytic,
        (Provenance::Enumerated, _) | (_, Provenance::Enumerated) => Provenance::Enumerated,
        (Provenance::Supplied, _) | (_, Provenance::Supplied) => Provenance::Supplied,
        _ => Provenance::Convention,
    }
}

fn alpha_coefficient(beta: &Coefficient, gamma: &Coefficient) -> Coefficient {
    Coefficient::new(alpha(beta.value, gamma.value), weaker(beta.provenance, gamma.provenance))
}

/// Worst-case profile valid for every kernel with values in `[-1, 1]`.
pub fn worst_case_profile(kernel: &Kernel) -> SensitivityProfile {
    let (beta, gamma) = if kernel.degree() == 1 {
        (
            Coefficient::new(0.0, Provenance::Convention),
            Coefficient::new(0.0, Provenance::Convention),
        )
    } else {
        (
            Coefficient::worst_case(WORST_CASE_BETA),
            Coefficient::worst_case(WORST_CASE_GAMMA),
        )
    };
    SensitivityProfile {
        sigma1_sq: Coefficient::worst_case(WORST_CASE_SIGMA_SQ),
        sigma_m_sq: Coefficient::worst_case(WORST_CASE_SIGMA_SQ),
        sigma_k_sq: None,
        alpha: alpha_coefficient(&beta, &gamma),
        beta,
        gamma,
        gamma_search: None,
    }
}

/// Worst-case constants independent of any kernel: `σ₁² = 1`, `β = γ = 8`.
pub fn generic_worst_case() -> SensitivityProfile {
    let beta = Coefficient::worst_case(WORST_CASE_BETA);
    let gamma = Coefficient::worst_case(WORST_CASE_GAMMA);
    SensitivityProfile {
        sigma1_sq: Coefficient::worst_case(WORST_CASE_SIGMA_SQ),
        sigma_m_sq: Coefficient::worst_case(WORST_CASE_SIGMA_SQ),
        sigma_k_sq: None,
        alpha: alpha_coefficient(&beta, &gamma),
        beta,
        gamma,
        gamma_search: None,
    }
}

impl SensitivityProfile {
    /// Profile from raw values, all tagged with the same provenance.
    pub fn from_values(sigma1_sq: f64, sigma_m_sq: f64, beta: f64, gamma: f64, provenance: Provenance) -> Self {
        let beta = Coefficient::new(beta, provenance);
        let gamma = Coefficient::new(gamma, provenance);
        Self {
            sigma1_sq: Coefficient::new(sigma1_sq, provenance),
            sigma_m_sq: Coefficient::new(sigma_m_sq, provenance),
            sigma_k_sq: None,
            alpha: alpha_coefficient(&beta, &gamma),
            beta,
            gamma,
            gamma_search: None,
        }
    }

    /// True when every value a bound consumes is certified.
    pub fn is_certified(&self) -> bool {
        self.sigma1_sq.provenance.is_certified()
            && self.beta.provenance.is_certified()
            && self.gamma.provenance.is_certified()
    }

    /// Replaces Monte Carlo values by certified upper bounds: `σ² ≤ 1`,
    /// `γ ≤ 8`, and `β ≤ γ`.
    pub fn certified(&self) -> SensitivityProfile {
        let mut out = self.clone();
        if !out.sigma1_sq.provenance.is_certified() {
            out.sigma1_sq = Coefficient::worst_case(WORST_CASE_SIGMA_SQ);
        }
        if !out.sigma_m_sq.provenance.is_certified() {
            out.sigma_m_sq = Coefficient::worst_case(WORST_CASE_SIGMA_SQ);
        }
        if let Some(ks) = out.sigma_k_sq.as_mut() {
            for c in ks.iter_mut().filter(|c| !c.provenance.is_certified()) {
                *c = Coefficient::worst_case(WORST_CASE_SIGMA_SQ);
            }
        }
        if !out.gamma.provenance.is_certified() {
            out.gamma = Coefficient::worst_case(WORST_CASE_GAMMA);
        }
        if !out.beta.provenance.is_certified() {
            out.beta = Coefficient::new(out.gamma.value, weaker(out.gamma.provenance, Provenance::WorstCase));
        }
        out.alpha = alpha_coefficient(&out.beta, &out.gamma);
        out
    }

    /// Errors unless `σ₁²`, `β` and `γ` are certified.
    pub fn require_certified(&self) -> Result<()> {
        for (name, c) in [("σ₁²", &self.sigma1_sq), ("β", &self.beta), ("γ", &self.gamma)] {
            if !c.provenance.is_certified() {
                return Err(Error::NotCertified(format!("{name} (Monte Carlo estimate)")));
            }
        }
        Ok(())
    }

    /// Checks `0 ≤ σ₁² ≤ … ≤ σ_m² ≤ 1`, `β ≤ γ ≤ 8` and the `α` identity.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::param(format!("profile invariant violated: {msg}")));
        for (name, c) in [("σ₁²", &self.sigma1_sq), ("σ_m²", &self.sigma_m_sq)] {
            if !(c.value >= -INVARIANT_TOL && c.value <= 1.0 + INVARIANT_TOL) {
                return fail(format!("{name} = {} outside [0, 1]", c.value));
            }
        }
        if let Some(ks) = &self.sigma_k_sq {
            for w in ks.windows(2) {
                if w[0].value > w[1].value + INVARIANT_TOL && w[0].provenance.is_certified() && w[1].provenance.is_certified() {
                    return fail(format!("σ_k² not monotone: {} > {}", w[0].value, w[1].value));
                }
            }
        }
        if self.sigma1_sq.value > self.sigma_m_sq.value + INVARIANT_TOL
            && self.sigma1_sq.provenance.is_certified()
            && self.sigma_m_sq.provenance.is_certified()
            && self.sigma1_sq.provenance != Provenance::WorstCase
        {
            return fail(format!("σ₁² = {} > σ_m² = {}", self.sigma1_sq.value, self.sigma_m_sq.value));
        }
        let both_exact = self.beta.provenance.is_certified() && self.gamma.provenance.is_certified();
        if both_exact && self.beta.value > self.gamma.value + INVARIANT_TOL {
            return fail(format!("β = {} > γ = {}", self.beta.value, self.gamma.value));
        }
        if self.gamma.provenance.is_certified() && self.gamma.value > WORST_CASE_GAMMA + INVARIANT_TOL {
            return fail(format!("γ = {} > 8", self.gamma.value));
        }
        let a = alpha(self.beta.value, self.gamma.value);
        if (a - self.alpha.value).abs() > 1e-12 {
            return fail(format!("α = {} but √(β/2)+√γ = {a}", self.alpha.value));
        }
        Ok(())
    }
}

/// How to compute a profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    /// Enumerate a finite support; error if it is not finite or exceeds `cap`.
    Exact { cap: u64 },
    /// Monte Carlo throughout, even for finite supports.
    MonteCarlo(McConfig),
    /// Enumeration when possible, otherwise closed forms, otherwise Monte
    /// Carlo with worst-case certification of `γ`.
    Auto(McConfig),
}

impl Default for Method {
    fn default() -> Self {
        Method::Auto(McConfig::default())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McConfig {
    pub outer: usize,
    pub inner: usize,
    pub seed: u64,
    /// random candidates tried when searching for `γ`'s supremum
    pub gamma_candidates: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            outer: 2000,
            inner: 2000,
            seed: 0,
            gamma_candidates: 64,
        }
    }
}

fn enumerable(kernel: &Kernel, dist: &Distribution, extra: usize, cap: u64) -> Result<()> {
    dist.product_size(kernel.degree() + extra, cap).map(|_| ())
}

fn atom_args<'a>(atoms: &'a [Vec<f64>], idx: &[usize]) -> Args<'a> {
    idx.iter().map(|&i| atoms[i].as_slice()).collect()
}

/// Exact `σ_k²` over a finite support.
pub fn sigma_k_sq_exact(kernel: &Kernel, dist: &Distribution, k: usize, cap: u64) -> Result<f64> {
    check_dist(kernel, dist)?;
    let m = kernel.degree();
    if k == 0 || k > m {
        return Err(Error::IndexOutOfRange { index: k, len: m });
    }
    enumerable(kernel, dist, 0, cap)?;
    let (atoms, probs) = dist.atoms().expect("finite");
    let theta = crate::estimator::exact_theta_capped(kernel, dist, cap)?;
    let mut full = vec![0usize; m];
    let mut acc = DoubleDouble::ZERO;
    let mut err = None;
    for_each_product(probs, k, |prefix, p_prefix| {
        full[..k].copy_from_slice(prefix);
        let mut h = DoubleDouble::ZERO;
        for_each_product(probs, m - k, |rest, p_rest| {
            full[k..].copy_from_slice(rest);
            match kernel.evaluate(&atom_args(atoms, &full)) {
                Ok(v) => h.add(p_rest * v),
                Err(e) => err = Some(e),
            }
        });
        let d = h.value() - theta;
        acc.add(p_prefix * d * d);
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(acc.value().max(0.0))
}

/// Nested Monte Carlo `σ_k²` with bias correction; returns `(estimate, std_err)`.
pub fn sigma_k_sq_mc(kernel: &Kernel, dist: &Distribution, k: usize, cfg: &McConfig) -> Result<(f64, f64)> {
    check_dist(kernel, dist)?;
    let m = kernel.degree();
    if k == 0 || k > m {
        return Err(Error::IndexOutOfRange { index: k, len: m });
    }
    if cfg.outer < 2 || cfg.inner < 2 {
        return Err(Error::param("Monte Carlo needs at least 2 outer and 2 inner draws"));
    }
    let d = dist.dim();
    let label = format!("sigma_k_sq/{}/{k}", kernel.name());
    // per outer draw: (inner mean, inner sample variance)
    let rows: Vec<(f64, f64)> = (0..cfg.outer)
        .into_par_iter()
        .map(|j| {
            let mut rng = replicate_rng(cfg.seed, &label, j as u64);
            let mut buf = vec![0.0; m * d];
            for slot in buf[..k * d].chunks_mut(d) {
                dist.sample_into(&mut rng, slot);
            }
            let inner = if k == m { 1 } else { cfg.inner };
            let mut sum = DoubleDouble::ZERO;
            let mut sum_sq = DoubleDouble::ZERO;
            for _ in 0..inner {
                for slot in buf[k * d..].chunks_mut(d) {
                    dist.sample_into(&mut rng, slot);
                }
                let args: Args<'_> = buf.chunks(d).collect();
                let v = kernel.evaluate(&args)?;
                sum.add(v);
                sum_sq.add(v * v);
            }
            let n = inner as f64;
            let mean = sum.value() / n;
            let var = if inner > 1 {
                ((sum_sq.value() - n * mean * mean) / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            Ok((mean, var))
        })
        .collect::<Result<_>>()?;
    let n1 = rows.len() as f64;
    let grand: f64 = rows.iter().map(|r| r.0).sum::<f64>() / n1;
    let between: f64 = rows.iter().map(|r| (r.0 - grand).powi(2)).sum::<f64>() / (n1 - 1.0);
    let within: f64 = rows.iter().map(|r| r.1).sum::<f64>() / n1;
    let inner = if k == m { 1.0 } else { cfg.inner as f64 };
    let estimate = if k == m { between } else { between - within / inner };
    // normal-theory standard error of a sample variance
    let std_err = between * (2.0 / (n1 - 1.0)).sqrt();
    Ok((estimate.max(0.0), std_err))
}

/// `σ_k²` by enumeration when feasible, otherwise by Monte Carlo.
pub fn sigma_k_sq(kernel: &Kernel, dist: &Distribution, k: usize, method: &Method) -> Result<Coefficient> {
    match method {
        Method::Exact { cap } => Ok(Coefficient::new(
            sigma_k_sq_exact(kernel, dist, k, *cap)?,
            Provenance::Enumerated,
        )),
        Method::MonteCarlo(cfg) => {
            let (v, se) = sigma_k_sq_mc(kernel, dist, k, cfg)?;
            Ok(Coefficient::new(v, Provenance::MonteCarlo { std_err: se }))
        }
        Method::Auto(cfg) => {
            if dist.is_finite() && enumerable(kernel, dist, 0, DEFAULT_PRODUCT_CAP).is_ok() {
                return sigma_k_sq(kernel, dist, k, &Method::Exact { cap: DEFAULT_PRODUCT_CAP });
            }
            if let Some(f) = kernel.analytic(dist.name()) {
                let known = if k == 1 {
                    f.sigma1_sq
                } else if k == kernel.degree() {
                    f.sigma_m_sq
                } else {
                    None
                };
                if let Some(v) = known {
                    return Ok(Coefficient::new(v, Provenance::Analytic));
                }
            }
            sigma_k_sq(kernel, dist, k, &Method::MonteCarlo(*cfg))
        }
    }
}

#[inline]
fn mixed_difference<'a>(kernel: &Kernel, args: &mut [&'a [f64]], y1: (&'a [f64], &'a [f64]), y2: (&'a [f64], &'a [f64])) -> Result<f64> {
    args[0] = y1.0;
    args[1] = y2.0;
    let a = kernel.evaluate(args)?;
    args[0] = y1.1;
    let b = kernel.evaluate(args)?;
    args[1] = y2.1;
    let d = kernel.evaluate(args)?;
    args[0] = y1.0;
    let c = kernel.evaluate(args)?;
    // D¹_{y1,y1'} D²_{y2,y2'} K
    Ok(a - b - c + d)
}

/// Exact `(β, γ)` over a finite support; `γ`'s supremum ranges over support atoms.
pub fn beta_gamma_exact(kernel: &Kernel, dist: &Distribution, cap: u64) -> Result<(f64, f64)> {
    check_dist(kernel, dist)?;
    let m = kernel.degree();
    if m < 2 {
        return Ok((0.0, 0.0));
    }
    enumerable(kernel, dist, 2, cap)?;
    let (atoms, probs) = dist.atoms().expect("finite");
    let rest = m - 2;
    let mut err = None;

    // β = E[(D¹_{X1,X1'} D²_{X2,X2'} K(X1, X2, X3..Xm))²]
    let mut beta = DoubleDouble::ZERO;
    for_each_product(probs, m + 2, |idx, p| {
        if err.is_some() {
            return;
        }
        let mut args = atom_args(atoms, &idx[2..]);
        let y1 = (atoms[idx[0]].as_slice(), atoms[idx[1]].as_slice());
        let y2 = (atoms[idx[2]].as_slice(), atoms[idx[3]].as_slice());
        match mixed_difference(kernel, &mut args, y1, y2) {
            Ok(v) => beta.add(p * v * v),
            Err(e) => err = Some(e),
        }
    });

    // γ = sup_{y,y',x3..xm} E[(D¹_{y,y'} D²_{X2,X2'} K)²]
    let mut gamma = 0.0f64;
    let s = atoms.len();
    let uniform = vec![1.0; s];
    for_each_product(&uniform, 2 + rest, |outer, _| {
        if err.is_some() {
            return;
        }
        let y1 = (atoms[outer[0]].as_slice(), atoms[outer[1]].as_slice());
        let mut e = DoubleDouble::ZERO;
        for_each_product(probs, 2, |inner, p| {
            let mut args: Args<'_> = std::iter::repeat_n(atoms[0].as_slice(), 2)
                .chain(outer[2..].iter().map(|&i| atoms[i].as_slice()))
                .collect();
            let y2 = (atoms[inner[0]].as_slice(), atoms[inner[1]].as_slice());
            match mixed_difference(kernel, &mut args, y1, y2) {
                Ok(v) => e.add(p * v * v),
                Err(x) => err = Some(x),
            }
        });
        gamma = gamma.max(e.value());
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok((beta.value(), gamma))
}

/// Monte Carlo `β` with its standard error, and a candidate-search estimate of
/// `γ`'s supremum.
pub fn beta_gamma_mc(kernel: &Kernel, dist: &Distribution, cfg: &McConfig) -> Result<((f64, f64), f64)> {
    check_dist(kernel, dist)?;
    let m = kernel.degree();
    if m < 2 {
        return Ok(((0.0, 0.0), 0.0));
    }
    let d = dist.dim();
    let draws = cfg.outer * cfg.inner.max(1);
    let label = format!("beta/{}", kernel.name());
    const BLOCK: usize = 1024;
    let blocks = draws.div_ceil(BLOCK);
    let sums: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = replicate_rng(cfg.seed, &label, b as u64);
            let count = BLOCK.min(draws - b * BLOCK);
            let mut buf = vec![0.0; (m + 2) * d];
            let mut s1 = DoubleDouble::ZERO;
            let mut s2 = DoubleDouble::ZERO;
            for _ in 0..count {
                for slot in buf.chunks_mut(d) {
                    dist.sample_into(&mut rng, slot);
                }
                let pts: Vec<&[f64]> = buf.chunks(d).collect();
                let mut args: Args<'_> = pts[2..].iter().copied().collect();
                let v = mixed_difference(kernel, &mut args, (pts[0], pts[1]), (pts[2], pts[3]))?;
                s1.add(v * v);
                s2.add(v * v * v * v);
            }
            Ok((s1.value(), s2.value()))
        })
        .collect::<Result<_>>()?;
    let n = draws as f64;
    let mean = sums.iter().map(|s| s.0).sum::<f64>() / n;
    let second = sums.iter().map(|s| s.1).sum::<f64>() / n;
    let se = ((second - mean * mean).max(0.0) / (n - 1.0)).sqrt();
    let gamma = gamma_search(kernel, dist, cfg)?;
    Ok(((mean, se), gamma))
}

/// Largest `E[(D¹_{y,y'} D²_{X2,X2'} K)²]` over random and boundary candidates.
fn gamma_search(kernel: &Kernel, dist: &Distribution, cfg: &McConfig) -> Result<f64> {
    let m = kernel.degree();
    let d = dist.dim();
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    // boundary candidates: y, y' at opposite corners, remaining slots at corners
    if let Support::UniformBox { lo, hi } = dist.support() {
        for rest_val in [*lo, *hi, (lo + hi) / 2.0] {
            let mut c = vec![*hi; d];
            c.extend(vec![*lo; d]);
            c.extend(vec![rest_val; d * (m - 2)]);
            candidates.push(c);
        }
    }
    let mut rng = replicate_rng(cfg.seed, &format!("gamma/{}", kernel.name()), u64::MAX);
    for _ in 0..cfg.gamma_candidates {
        let mut c = vec![0.0; m * d];
        for slot in c.chunks_mut(d) {
            dist.sample_into(&mut rng, slot);
        }
        candidates.push(c);
    }
    let label = format!("gamma-inner/{}", kernel.name());
    let inner = cfg.inner.max(2);
    let values: Vec<f64> = candidates
        .par_iter()
        .enumerate()
        .map(|(ci, c)| {
            let mut rng = replicate_rng(cfg.seed, &label, ci as u64);
            let pts: Vec<&[f64]> = c.chunks(d).collect();
            let mut x2 = vec![0.0; d];
            let mut x2p = vec![0.0; d];
            let mut acc = DoubleDouble::ZERO;
            for _ in 0..inner {
                dist.sample_into(&mut rng, &mut x2);
                dist.sample_into(&mut rng, &mut x2p);
                let mut args: Args<'_> = [pts[0], pts[0]].into_iter().chain(pts[2..].iter().copied()).collect();
                let v = mixed_difference(kernel, &mut args, (pts[0], pts[1]), (&x2, &x2p))?;
                acc.add(v * v);
            }
            Ok(acc.value() / inner as f64)
        })
        .collect::<Result<_>>()?;
    Ok(values.into_iter().fold(0.0, f64::max))
}

/// `(β, γ)` with provenance, plus the `γ` search estimate when `γ` falls back
/// to the worst case.
pub fn beta_gamma(kernel: &Kernel, dist: &Distribution, method: &Method) -> Result<(Coefficient, Coefficient, Option<f64>)> {
    if kernel.degree() < 2 {
        let zero = Coefficient::new(0.0, Provenance::Convention);
        return Ok((zero, zero, None));
    }
    match method {
        Method::Exact { cap } => {
            let (b, g) = beta_gamma_exact(kernel, dist, *cap)?;
            Ok((
                Coefficient::new(b, Provenance::Enumerated),
                Coefficient::new(g, Provenance::Enumerated),
                None,
            ))
        }
        Method::MonteCarlo(cfg) => {
            let ((b, se), g) = beta_gamma_mc(kernel, dist, cfg)?;
            Ok((
                Coefficient::new(b, Provenance::MonteCarlo { std_err: se }),
                Coefficient::worst_case(WORST_CASE_GAMMA),
                Some(g),
            ))
        }
        Method::Auto(cfg) => {
            if dist.is_finite() && enumerable(kernel, dist, 2, DEFAULT_PRODUCT_CAP).is_ok() {
                return beta_gamma(kernel, dist, &Method::Exact { cap: DEFAULT_PRODUCT_CAP });
            }
            let facts = kernel.analytic(dist.name());
            if let Some((b, g)) = facts.and_then(|f| f.beta.zip(f.gamma)) {
                return Ok((
                    Coefficient::new(b, Provenance::Analytic),
                    Coefficient::new(g, Provenance::Analytic),
                    None,
                ));
            }
            beta_gamma(kernel, dist, &Method::MonteCarlo(*cfg))
        }
    }
}

/// Full profile of `kernel` under `dist`.
pub fn profile(kernel: &Kernel, dist: &Distribution, method: &Method) -> Result<SensitivityProfile> {
    check_dist(kernel, dist)?;
    let m = kernel.degree();
    let ks = (1..=m)
        .map(|k| sigma_k_sq(kernel, dist, k, method))
        .collect::<Result<Vec<_>>>()?;
    let (beta, gamma, gamma_search) = beta_gamma(kernel, dist, method)?;
    Ok(SensitivityProfile {
        sigma1_sq: ks[0],
        sigma_m_sq: ks[m - 1],
        sigma_k_sq: Some(ks),
        alpha: alpha_coefficient(&beta, &gamma),
        beta,
        gamma,
        gamma_search,
    })
}
