//! Confidence bounds for U-statistics.
//!
//! Tail forms return an upper bound on `P(U - θ > t)`; δ forms return a
//! deviation that holds with probability at least `1 - δ`. Exponents are
//! computed in log space and probabilities are clamped to `[0, 1]`; a zero
//! denominator is read as `exp(-∞) = 0`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::design::{complete_scalars, DesignScalars};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::numeric::{binomial, exact_ratio, ln_binomial};
use crate::sensitivity::{generic_worst_case, SensitivityProfile};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum BoundValue {
    Tail {
        t: f64,
        probability: f64,
        /// natural log of the unclamped bound
        log_probability: f64,
    },
    Delta {
        delta: f64,
        deviation: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityFlag {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound: String,
    #[serde(flatten)]
    pub value: BoundValue,
    pub inputs: BTreeMap<String, f64>,
    pub flags: Vec<ValidityFlag>,
}

impl BoundReport {
    fn new(bound: &str, value: BoundValue, inputs: &[(&str, f64)]) -> Self {
        Self {
            bound: bound.to_string(),
            value,
            inputs: inputs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            flags: Vec::new(),
        }
    }

    fn flag(mut self, name: &str, ok: bool, detail: String) -> Self {
        self.flags.push(ValidityFlag {
            name: name.to_string(),
            ok,
            detail,
        });
        self
    }

    /// True when every validity flag holds.
    pub fn is_valid(&self) -> bool {
        self.flags.iter().all(|f| f.ok)
    }

    /// Tail probability; `NaN` for a δ-form report.
    pub fn probability(&self) -> f64 {
        match self.value {
            BoundValue::Tail { probability, .. } => probability,
            BoundValue::Delta { .. } => f64::NAN,
        }
    }

    pub fn log_probability(&self) -> f64 {
        match self.value {
            BoundValue::Tail { log_probability, .. } => log_probability,
            BoundValue::Delta { .. } => f64::NAN,
        }
    }

    /// Deviation; `NaN` for a tail-form report.
    pub fn deviation(&self) -> f64 {
        match self.value {
            BoundValue::Delta { deviation, .. } => deviation,
            BoundValue::Tail { .. } => f64::NAN,
        }
    }
}

/// `lead * exp(-numer / denom)` clamped to `[0, 1]`.
fn tail_value(t: f64, lead: f64, numer: f64, denom: f64) -> BoundValue {
    let log_probability = if denom > 0.0 {
        lead.ln() - numer / denom
    } else {
        f64::NEG_INFINITY
    };
    BoundValue::Tail {
        t,
        probability: log_probability.exp().clamp(0.0, 1.0),
        log_probability,
    }
}

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("t must be a positive finite number, got {t}")))
    }
}

fn check_nm(n: usize, m: usize) -> Result<()> {
    if m == 0 || m >= n {
        return Err(Error::param(format!("need 1 <= m < n, got n={n}, m={m}")));
    }
    Ok(())
}

fn check_nonneg(name: &str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must be a finite nonnegative number, got {x}")))
    }
}

fn check_delta(delta: f64, upper: f64) -> Result<f64> {
    if delta > 0.0 && delta <= upper {
        Ok((1.0 / delta).ln())
    } else {
        Err(Error::param(format!("δ must lie in (0, {upper}], got {delta}")))
    }
}

/// Exact variance of the complete U-statistic from `σ_1², …, σ_m²`:
/// `C(n,m)⁻¹ Σ_k C(m,k) C(n-m, m-k) σ_k²`.
pub fn variance_complete(n: usize, m: usize, sigma_k_sq: &[f64]) -> Result<f64> {
    check_nm(n, m)?;
    if sigma_k_sq.len() != m {
        return Err(Error::param(format!("expected {m} conditional variances, got {}", sigma_k_sq.len())));
    }
    for &s in sigma_k_sq {
        check_nonneg("σ_k²", s)?;
    }
    let (n, m) = (n as u64, m as u64);
    let total = binomial(n, m);
    let mut var = 0.0;
    for k in 1..=m {
        let s = sigma_k_sq[(k - 1) as usize];
        if s == 0.0 || m - k > n - m {
            continue;
        }
        let weight = match (total, binomial(m, k), binomial(n - m, m - k)) {
            (Some(t), Some(a), Some(b)) if a.checked_mul(b).is_some() => exact_ratio(a * b, t),
            _ => (ln_binomial(m, k) + ln_binomial(n - m, m - k) - ln_binomial(n, m)).exp(),
        };
        var += weight * s;
    }
    Ok(var)
}

/// Hoeffding's partition-based bound `exp(-n t² / (2 m σ_m² + 4 m t / 3))`.
pub fn hoeffding_tail(n: usize, m: usize, sigma_m_sq: f64, t: f64) -> Result<BoundReport> {
    check_nm(n, m)?;
    check_nonneg("σ_m²", sigma_m_sq)?;
    check_t(t)?;
    let (nf, mf) = (n as f64, m as f64);
    let value = tail_value(t, 1.0, nf * t * t, 2.0 * mf * sigma_m_sq + 4.0 * mf * t / 3.0);
    Ok(BoundReport::new("hoeffding", value, &[("n", nf), ("m", mf), ("sigma_m_sq", sigma_m_sq), ("t", t)])
        .flag("n_divisible_by_m", n.is_multiple_of(m), format!("n mod m = {}", n % m)))
}

/// Arcones' bound `2 exp(-n t² / (2 m² σ₁² + (2^{m+2} m^m + 2/(3m)) t))`.
pub fn arcones_tail(n: usize, m: usize, sigma1_sq: f64, t: f64) -> Result<BoundReport> {
    check_nm(n, m)?;
    check_nonneg("σ₁²", sigma1_sq)?;
    check_t(t)?;
    let (nf, mf) = (n as f64, m as f64);
    let scale = 2f64.powi(m as i32 + 2) * mf.powi(m as i32) + 2.0 / (3.0 * mf);
    let value = tail_value(t, 2.0, nf * t * t, 2.0 * mf * mf * sigma1_sq + scale * t);
    Ok(BoundReport::new("arcones", value, &[("n", nf), ("m", mf), ("sigma1_sq", sigma1_sq), ("t", t)]))
}

/// `exp(-t² / (2 Var(U) + 8 m²/n² + 4 (m² + m/3) t / n))`.
pub fn maurer_tail(n: usize, m: usize, var_u: f64, t: f64) -> Result<BoundReport> {
    check_nm(n, m)?;
    check_nonneg("Var(U)", var_u)?;
    check_t(t)?;
    let (nf, mf) = (n as f64, m as f64);
    let denom = 2.0 * var_u + 8.0 * mf * mf / (nf * nf) + 4.0 * (mf * mf + mf / 3.0) * t / nf;
    let value = tail_value(t, 1.0, t * t, denom);
    Ok(BoundReport::new("maurer", value, &[("n", nf), ("m", mf), ("var_u", var_u), ("t", t)]))
}

fn stats_inputs(stats: &DesignScalars, profile: &SensitivityProfile) -> Vec<(&'static str, f64)> {
    vec![
        ("A", stats.a),
        ("B", stats.b),
        ("C", stats.c),
        ("sigma1_sq", profile.sigma1_sq.value),
        ("beta", profile.beta.value),
        ("gamma", profile.gamma.value),
        ("alpha", profile.alpha.value),
    ]
}

/// Bound for an incomplete U-statistic with a fixed design:
/// `exp(-t² / (2 A σ₁² + B β / 2 + (√(B γ) + 4 C / 3) t))`.
pub fn incomplete_tail(stats: &DesignScalars, profile: &SensitivityProfile, t: f64) -> Result<BoundReport> {
    check_t(t)?;
    profile.require_certified()?;
    let DesignScalars { a, b, c } = *stats;
    let (s1, beta, gamma) = (profile.sigma1_sq.value, profile.beta.value, profile.gamma.value);
    let denom = 2.0 * a * s1 + b * beta / 2.0 + ((b * gamma).sqrt() + 4.0 * c / 3.0) * t;
    let mut inputs = stats_inputs(stats, profile);
    inputs.push(("t", t));
    Ok(BoundReport::new("incomplete", tail_value(t, 1.0, t * t, denom), &inputs))
}

/// δ form: `√(2 A σ₁² ln(1/δ)) + (α √B + 4 C / 3) ln(1/δ)` for `0 < δ ≤ 1/e`.
pub fn incomplete_delta(stats: &DesignScalars, profile: &SensitivityProfile, delta: f64) -> Result<BoundReport> {
    let l = check_delta(delta, (-1.0f64).exp()).map_err(|_| {
        Error::param(format!(
            "δ = {delta} is outside (0, 1/e]; the δ form relaxes ln(1/δ) ≤ ln²(1/δ), which needs ln(1/δ) ≥ 1"
        ))
    })?;
    profile.require_certified()?;
    let DesignScalars { a, b, c } = *stats;
    let deviation =
        (2.0 * a * profile.sigma1_sq.value * l).sqrt() + (profile.alpha.value * b.sqrt() + 4.0 * c / 3.0) * l;
    let mut inputs = stats_inputs(stats, profile);
    inputs.push(("delta", delta));
    Ok(BoundReport::new("incomplete", BoundValue::Delta { delta, deviation }, &inputs))
}

/// Which `B` the complete-statistic bound uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompleteB {
    /// `m²(m-1)²/(n(n-1))`
    #[default]
    Exact,
    /// `m⁴/n²`, the displayed relaxation
    Relaxed,
}

fn complete_stats(n: usize, m: usize, b: CompleteB) -> Result<DesignScalars> {
    check_nm(n, m)?;
    Ok(complete_scalars(n, m, b == CompleteB::Relaxed))
}

/// The incomplete bound specialized to the complete design.
pub fn complete_tail(n: usize, m: usize, profile: &SensitivityProfile, t: f64, b: CompleteB) -> Result<BoundReport> {
    let stats = complete_stats(n, m, b)?;
    let mut r = incomplete_tail(&stats, profile, t)?;
    r.bound = "complete".into();
    r.inputs.insert("n".into(), n as f64);
    r.inputs.insert("m".into(), m as f64);
    Ok(r)
}

pub fn complete_delta(n: usize, m: usize, profile: &SensitivityProfile, delta: f64, b: CompleteB) -> Result<BoundReport> {
    let stats = complete_stats(n, m, b)?;
    let mut r = incomplete_delta(&stats, profile, delta)?;
    r.bound = "complete".into();
    r.inputs.insert("n".into(), n as f64);
    r.inputs.insert("m".into(), m as f64);
    Ok(r)
}

/// Complete-statistic bound with `β = γ = 8` and `B = m⁴/n²`, written out:
/// `exp(-n t² / (2 m² σ₁² + 4 m⁴ / n + (√8 m² + 4 m / 3) t))`.
pub fn worst_case_complete_tail(n: usize, m: usize, sigma1_sq: f64, t: f64) -> Result<BoundReport> {
    check_nm(n, m)?;
    check_nonneg("σ₁²", sigma1_sq)?;
    check_t(t)?;
    let (nf, mf) = (n as f64, m as f64);
    let m2 = mf * mf;
    let denom = 2.0 * m2 * sigma1_sq + 4.0 * m2 * m2 / nf + (8f64.sqrt() * m2 + 4.0 * mf / 3.0) * t;
    let value = tail_value(t, 1.0, nf * t * t, denom);
    Ok(BoundReport::new(
        "complete-worst-case",
        value,
        &[("n", nf), ("m", mf), ("sigma1_sq", sigma1_sq), ("t", t)],
    ))
}

/// Deviation bound under uniform random sampling of the design, holding with
/// probability `1 - (δ₁ + δ₂)` jointly over data and design.
pub fn random_design_delta(
    n: usize,
    m: usize,
    big_m: usize,
    sigma1_sq: f64,
    alpha: f64,
    delta1: f64,
    delta2: f64,
) -> Result<BoundReport> {
    check_nm(n, m)?;
    check_nonneg("σ₁²", sigma1_sq)?;
    check_nonneg("α", alpha)?;
    if big_m == 0 {
        return Err(Error::param("M must be >= 1"));
    }
    if !(delta1 > 0.0 && delta2 > 0.0 && delta1 + delta2 < 1.0) {
        return Err(Error::param(format!(
            "need δ₁, δ₂ > 0 with δ₁ + δ₂ < 1, got {delta1}, {delta2}"
        )));
    }
    let (nf, mf, bm) = (n as f64, m as f64, big_m as f64);
    let l1 = (1.0 / delta1).ln();
    let l2 = (3.0 / delta2).ln();
    let gaussian = (2.0 * mf * mf * sigma1_sq * l1 / nf).sqrt();
    let scale = (alpha * mf * mf + 4.0 * mf / 3.0) * l1 / nf;
    let incompleteness = (5.0 * alpha * mf + 9.0 * mf.sqrt() + 4.0) * l2 * l2 / bm.sqrt();
    let deviation = gaussian + scale + incompleteness;
    let ln2n = nf.ln().powi(2);
    Ok(BoundReport::new(
        "random-design",
        BoundValue::Delta {
            delta: delta1 + delta2,
            deviation,
        },
        &[
            ("n", nf),
            ("m", mf),
            ("M", bm),
            ("sigma1_sq", sigma1_sq),
            ("alpha", alpha),
            ("delta1", delta1),
            ("delta2", delta2),
            ("gaussian_term", gaussian),
            ("scale_term", scale),
            ("incompleteness_term", incompleteness),
        ],
    )
    .flag("M_at_least_ln2_n", bm >= ln2n, format!("M = {big_m}, ln²n = {ln2n:.3}")))
}

/// Errors unless the kernel takes values in `[0, 1]`.
pub fn require_unit_range(kernel: &Kernel) -> Result<()> {
    let r = kernel.range();
    if r.lo >= 0.0 && r.hi <= 1.0 {
        Ok(())
    } else {
        Err(Error::NotUnitRange {
            kernel: kernel.name().to_string(),
            lo: r.lo,
            hi: r.hi,
        })
    }
}

/// Lower-tail bound `P(E[U_W] - U_W > t) ≤ exp(-t² / (8 m C E[U_W]))` for
/// kernels with values in `[0, 1]`. No symmetry is required.
pub fn subgauss_lower_tail(m: usize, c: f64, mean_u: f64, t: f64) -> Result<BoundReport> {
    check_t(t)?;
    if m == 0 {
        return Err(Error::param("m must be >= 1"));
    }
    if !(0.0..=1.0).contains(&mean_u) {
        return Err(Error::param(format!("E[U_W] must lie in [0, 1], got {mean_u}")));
    }
    check_nonneg("C", c)?;
    let denom = 8.0 * m as f64 * c * mean_u;
    Ok(BoundReport::new(
        "subgauss-lower",
        tail_value(t, 1.0, t * t, denom),
        &[("m", m as f64), ("C", c), ("mean_u", mean_u), ("t", t)],
    ))
}

/// Observable upper bound on `√E[U_W]`: `√U_W + √(8 m C ln(1/δ))`, valid with
/// probability at least `1 - δ`. The report's deviation field holds the bound.
pub fn subgauss_sqrt(m: usize, c: f64, u_observed: f64, delta: f64) -> Result<BoundReport> {
    let l = check_delta(delta, 1.0)?;
    if m == 0 {
        return Err(Error::param("m must be >= 1"));
    }
    if !(0.0..=1.0).contains(&u_observed) {
        return Err(Error::param(format!("U_W must lie in [0, 1], got {u_observed}")));
    }
    check_nonneg("C", c)?;
    let bound = u_observed.sqrt() + (8.0 * m as f64 * c * l).sqrt();
    Ok(BoundReport::new(
        "subgauss-sqrt",
        BoundValue::Delta {
            delta,
            deviation: bound,
        },
        &[("m", m as f64), ("C", c), ("u_observed", u_observed), ("delta", delta)],
    ))
}

/// `n`, `m`, `t`, `σ₁²` points swept by the dominance check and `compare`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundGrid {
    pub ms: Vec<usize>,
    pub ns: Vec<usize>,
    pub ts: Vec<f64>,
    pub sigma1_sq: Vec<f64>,
}

impl Default for BoundGrid {
    fn default() -> Self {
        Self {
            ms: (2..=8).collect(),
            ns: (1..=6).map(|e| 10usize.pow(e)).collect(),
            ts: log_space(1e-3, 1.0, 13),
            sigma1_sq: vec![0.0, 0.25, 1.0],
        }
    }
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| {
            if i + 1 == count {
                hi
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

impl FromStr for BoundGrid {
    type Err = Error;

    /// `default`, or `;`-separated `key=values` overriding the default grid.
    /// Values are a comma list, an integer range `a..b`, or `lo:hi:count`
    /// for log spacing. Keys: `m`, `n`, `t`, `sigma1`.
    fn from_str(s: &str) -> Result<Self> {
        let mut grid = BoundGrid::default();
        let s = s.trim();
        if s.is_empty() || s == "default" {
            return Ok(grid);
        }
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::param(format!("grid entry `{part}` is not key=value")))?;
            let values = parse_grid_values(value.trim())?;
            match key.trim() {
                "m" => grid.ms = as_counts(&values)?,
                "n" => grid.ns = as_counts(&values)?,
                "t" => grid.ts = values,
                "sigma1" | "sigma1_sq" => grid.sigma1_sq = values,
                other => return Err(Error::param(format!("unknown grid key `{other}`"))),
            }
        }
        if grid.ms.is_empty() || grid.ns.is_empty() || grid.ts.is_empty() || grid.sigma1_sq.is_empty() {
            return Err(Error::param("grid axes must be nonempty"));
        }
        Ok(grid)
    }
}

/// Parses a grid axis: a comma list (the token `1/e` is accepted), an
/// integer range `a..b`, or `lo:hi:count` for log spacing.
pub fn parse_grid_values(v: &str) -> Result<Vec<f64>> {
    let num = |x: &str| match x.trim() {
        "1/e" => Ok((-1.0f64).exp()),
        x => x
            .parse::<f64>()
            .map_err(|_| Error::param(format!("`{x}` is not a number"))),
    };
    if let Some((a, b)) = v.split_once("..") {
        let (a, b) = (num(a)? as i64, num(b)? as i64);
        return Ok((a..=b).map(|x| x as f64).collect());
    }
    let parts: Vec<&str> = v.split(':').collect();
    if parts.len() == 3 {
        let count = num(parts[2])? as usize;
        return Ok(log_space(num(parts[0])?, num(parts[1])?, count.max(1)));
    }
    v.split(',').map(num).collect()
}

fn as_counts(values: &[f64]) -> Result<Vec<usize>> {
    values
        .iter()
        .map(|&x| {
            if x >= 1.0 && x.fract() == 0.0 {
                Ok(x as usize)
            } else {
                Err(Error::param(format!("`{x}` is not a positive integer")))
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominanceViolation {
    pub n: usize,
    pub m: usize,
    pub t: f64,
    pub sigma1_sq: f64,
    pub worst_case_complete: f64,
    pub arcones: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub points: usize,
    /// points where the new bound is strictly below Arcones' (both < 1 or
    /// Arcones clamped)
    pub strictly_smaller: usize,
    pub violations: Vec<DominanceViolation>,
}

/// Compares the worst-case complete-statistic bound (`β = γ = 8`, `B = m⁴/n²`)
/// with Arcones' bound at every grid point with `m < n`.
pub fn dominance_check_vs_arcones(grid: &BoundGrid) -> Result<DominanceReport> {
    let worst = generic_worst_case();
    let mut report = DominanceReport {
        points: 0,
        strictly_smaller: 0,
        violations: Vec::new(),
    };
    for &m in &grid.ms {
        for &n in grid.ns.iter().filter(|&&n| n > m) {
            for &t in &grid.ts {
                for &s1 in &grid.sigma1_sq {
                    let mut profile = worst.clone();
                    profile.sigma1_sq.value = s1;
                    let new = complete_tail(n, m, &profile, t, CompleteB::Relaxed)?.probability();
                    let old = arcones_tail(n, m, s1, t)?.probability();
                    report.points += 1;
                    if new < old {
                        report.strictly_smaller += 1;
                    }
                    if new > old {
                        report.violations.push(DominanceViolation {
                            n,
                            m,
                            t,
                            sigma1_sq: s1,
                            worst_case_complete: new,
                            arcones: old,
                        });
                    }
                }
            }
        }
    }
    Ok(report)
}

/// One row of the bound comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub n: usize,
    pub m: usize,
    pub t: f64,
    pub sigma1_sq: f64,
    /// `σ_m² = 1`; flagged rows have `n mod m ≠ 0`
    pub hoeffding: f64,
    pub hoeffding_n_divisible: bool,
    pub arcones: f64,
    /// evaluated at `Var(U)` from `σ₁²` and `σ_k² = 1` for `k ≥ 2`, an upper
    /// bound on the variance
    pub maurer: f64,
    /// worst-case `β`, `γ` with exact complete-design `B`
    pub complete_exact_b: f64,
    /// worst-case `β`, `γ` with `B = m⁴/n²`
    pub complete_worst_case: f64,
}

/// Evaluates every baseline and the complete-statistic bound on a grid.
pub fn compare_grid(grid: &BoundGrid) -> Result<Vec<ComparisonRow>> {
    let worst = generic_worst_case();
    let mut rows = Vec::new();
    for &m in &grid.ms {
        for &n in grid.ns.iter().filter(|&&n| n > m) {
            for &s1 in &grid.sigma1_sq {
                let mut sig = vec![1.0; m];
                sig[0] = s1;
                let var_u = variance_complete(n, m, &sig)?;
                let mut profile = worst.clone();
                profile.sigma1_sq.value = s1;
                for &t in &grid.ts {
                    let h = hoeffding_tail(n, m, 1.0, t)?;
                    rows.push(ComparisonRow {
                        n,
                        m,
                        t,
                        sigma1_sq: s1,
                        hoeffding: h.probability(),
                        hoeffding_n_divisible: h.is_valid(),
                        arcones: arcones_tail(n, m, s1, t)?.probability(),
                        maurer: maurer_tail(n, m, var_u, t)?.probability(),
                        complete_exact_b: complete_tail(n, m, &profile, t, CompleteB::Exact)?.probability(),
                        complete_worst_case: complete_tail(n, m, &profile, t, CompleteB::Relaxed)?.probability(),
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Named bound selector used by the command line and bindings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    Hoeffding,
    Arcones,
    Maurer,
    Incomplete,
    Complete,
    CompleteWorstCase,
    RandomDesign,
    SubgaussLower,
    SubgaussSqrt,
}

impl BoundKind {
    pub const ALL: [BoundKind; 9] = [
        BoundKind::Hoeffding,
        BoundKind::Arcones,
        BoundKind::Maurer,
        BoundKind::Incomplete,
        BoundKind::Complete,
        BoundKind::CompleteWorstCase,
        BoundKind::RandomDesign,
        BoundKind::SubgaussLower,
        BoundKind::SubgaussSqrt,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BoundKind::Hoeffding => "hoeffding",
            BoundKind::Arcones => "arcones",
            BoundKind::Maurer => "maurer",
            BoundKind::Incomplete => "incomplete",
            BoundKind::Complete => "complete",
            BoundKind::CompleteWorstCase => "complete-worst-case",
            BoundKind::RandomDesign => "random-design",
            BoundKind::SubgaussLower => "subgauss-lower",
            BoundKind::SubgaussSqrt => "subgauss-sqrt",
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = BoundKind::ALL.iter().map(|k| k.name()).collect();
                Error::param(format!("unknown bound `{s}`; expected one of {}", names.join(", ")))
            })
    }
}

/// Everything any bound might need; each bound reads its own fields.
#[derive(Clone, Debug, Default)]
pub struct BoundInput {
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub big_m: Option<usize>,
    pub t: Option<f64>,
    pub delta: Option<f64>,
    pub delta2: Option<f64>,
    pub stats: Option<DesignScalars>,
    pub profile: Option<SensitivityProfile>,
    pub var_u: Option<f64>,
    /// `E[U_W]` for the lower tail, or observed `U_W` for the √ form
    pub u: Option<f64>,
    pub complete_b: CompleteB,
}

fn need<T: Copy>(v: Option<T>, name: &str, bound: BoundKind) -> Result<T> {
    v.ok_or_else(|| Error::param(format!("bound `{bound}` needs --{name}")))
}

/// Evaluates `kind` on `input`, enforcing that exactly one of `t` / `delta`
/// is given where a bound has both forms.
pub fn evaluate(kind: BoundKind, input: &BoundInput) -> Result<BoundReport> {
    let profile = || {
        input
            .profile
            .clone()
            .ok_or_else(|| Error::param(format!("bound `{kind}` needs a sensitivity profile")))
    };
    if input.t.is_some() && input.delta.is_some() {
        return Err(Error::param("give exactly one of t and delta"));
    }
    let stats_for = |n: usize, m: usize| -> Result<DesignScalars> {
        match input.stats {
            Some(s) => Ok(s),
            None => complete_stats(n, m, input.complete_b),
        }
    };
    match kind {
        BoundKind::Hoeffding => {
            let p = profile()?;
            hoeffding_tail(need(input.n, "n", kind)?, need(input.m, "m", kind)?, p.sigma_m_sq.value, need(input.t, "t", kind)?)
        }
        BoundKind::Arcones => {
            let p = profile()?;
            arcones_tail(need(input.n, "n", kind)?, need(input.m, "m", kind)?, p.sigma1_sq.value, need(input.t, "t", kind)?)
        }
        BoundKind::Maurer => maurer_tail(
            need(input.n, "n", kind)?,
            need(input.m, "m", kind)?,
            need(input.var_u, "var-u", kind)?,
            need(input.t, "t", kind)?,
        ),
        BoundKind::Incomplete | BoundKind::Complete => {
            let p = profile()?;
            let stats = if kind == BoundKind::Complete {
                complete_stats(need(input.n, "n", kind)?, need(input.m, "m", kind)?, input.complete_b)?
            } else {
                match input.stats {
                    Some(s) => s,
                    None => stats_for(need(input.n, "n", kind)?, need(input.m, "m", kind)?)?,
                }
            };
            let mut r = match (input.t, input.delta) {
                (Some(t), None) => incomplete_tail(&stats, &p, t)?,
                (None, Some(d)) => incomplete_delta(&stats, &p, d)?,
                _ => return Err(Error::param("give exactly one of t and delta")),
            };
            r.bound = kind.name().to_string();
            Ok(r)
        }
        BoundKind::CompleteWorstCase => {
            let s1 = input.profile.as_ref().map(|p| p.sigma1_sq.value).unwrap_or(1.0);
            worst_case_complete_tail(need(input.n, "n", kind)?, need(input.m, "m", kind)?, s1, need(input.t, "t", kind)?)
        }
        BoundKind::RandomDesign => {
            let p = profile()?;
            p.require_certified()?;
            let d1 = need(input.delta, "delta", kind)?;
            random_design_delta(
                need(input.n, "n", kind)?,
                need(input.m, "m", kind)?,
                need(input.big_m, "M", kind)?,
                p.sigma1_sq.value,
                p.alpha.value,
                d1,
                input.delta2.unwrap_or(d1),
            )
        }
        BoundKind::SubgaussLower | BoundKind::SubgaussSqrt => {
            let m = need(input.m, "m", kind)?;
            let c = match input.stats {
                Some(s) => s.c,
                None => complete_stats(need(input.n, "n", kind)?, m, CompleteB::Exact)?.c,
            };
            let u = need(input.u, "u", kind)?;
            if kind == BoundKind::SubgaussLower {
                subgauss_lower_tail(m, c, u, need(input.t, "t", kind)?)
            } else {
                subgauss_sqrt(m, c, u, need(input.delta, "delta", kind)?)
            }
        }
    }
}
