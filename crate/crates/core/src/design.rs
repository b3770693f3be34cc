//! Designs: ordered sequences of `M` index subsets of size `m` drawn from `[n]`.
//!
//! Indices are 1-based in files and in every public accessor that returns
//! indices as the user sees them; internally subsets are stored 0-based in
//! one flat buffer.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{binomial, exact_ratio};
use crate::rng;

/// Default cap on `C(n, m)` for complete enumeration.
pub const DEFAULT_COMPLETE_CAP: u128 = 10_000_000;

/// How a design was produced.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignOrigin {
    Complete,
    Partition,
    Random { seed: u64 },
    File { path: String },
    Custom,
}

impl fmt::Display for DesignOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DesignOrigin::Complete => write!(f, "complete"),
            DesignOrigin::Partition => write!(f, "partition"),
            DesignOrigin::Random { seed } => write!(f, "random(seed={seed})"),
            DesignOrigin::File { path } => write!(f, "file({path})"),
            DesignOrigin::Custom => write!(f, "custom"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Design {
    n: usize,
    m: usize,
    /// `M * m` zero-based indices, subset `i` at `[i*m, (i+1)*m)`
    flat: Vec<u32>,
    origin: DesignOrigin,
}

impl Design {
    /// Builds a design from 1-based subsets, validating every invariant.
    pub fn from_subsets(n: usize, m: usize, subsets: &[Vec<usize>]) -> Result<Self> {
        check_nm(n, m, true)?;
        if subsets.is_empty() {
            return Err(Error::param("a design needs at least one subset"));
        }
        let mut flat = Vec::with_capacity(subsets.len() * m);
        for (i, s) in subsets.iter().enumerate() {
            validate_subset(s, n, m).map_err(|msg| Error::param(format!("subset {}: {msg}", i + 1)))?;
            flat.extend(s.iter().map(|&k| (k - 1) as u32));
        }
        Ok(Self {
            n,
            m,
            flat,
            origin: DesignOrigin::Custom,
        })
    }

    fn from_flat(n: usize, m: usize, flat: Vec<u32>, origin: DesignOrigin) -> Self {
        debug_assert_eq!(flat.len() % m, 0);
        Self { n, m, flat, origin }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of subsets `M`.
    pub fn len(&self) -> usize {
        self.flat.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn origin(&self) -> &DesignOrigin {
        &self.origin
    }

    /// Subset `i` (0-based position) as 0-based indices.
    #[inline]
    pub fn subset0(&self, i: usize) -> &[u32] {
        &self.flat[i * self.m..(i + 1) * self.m]
    }

    pub fn subsets0(&self) -> impl Iterator<Item = &[u32]> {
        self.flat.chunks(self.m)
    }

    /// All subsets with 1-based indices.
    pub fn subsets(&self) -> Vec<Vec<usize>> {
        self.subsets0()
            .map(|s| s.iter().map(|&k| k as usize + 1).collect())
            .collect()
    }

    /// The same design with every index `k` replaced by `perm[k]` (0-based).
    pub fn relabeled(&self, perm: &[usize]) -> Design {
        let flat = self.flat.iter().map(|&k| perm[k as usize] as u32).collect();
        Design::from_flat(self.n, self.m, flat, self.origin.clone())
    }
}

fn check_nm(n: usize, m: usize, allow_m_eq_n: bool) -> Result<()> {
    if m == 0 || n == 0 || m > n || (m == n && !allow_m_eq_n) {
        return Err(Error::param(format!("need 1 <= m < n, got n={n}, m={m}")));
    }
    if n > u32::MAX as usize {
        return Err(Error::param("n exceeds 2^32"));
    }
    Ok(())
}

fn validate_subset(s: &[usize], n: usize, m: usize) -> std::result::Result<(), String> {
    if s.len() != m {
        return Err(format!("has {} elements, expected {m}", s.len()));
    }
    for (j, &k) in s.iter().enumerate() {
        if k == 0 || k > n {
            return Err(format!("index {k} outside 1..={n}"));
        }
        if s[..j].contains(&k) {
            return Err(format!("duplicate element {k}"));
        }
    }
    Ok(())
}

/// All `C(n, m)` subsets in lexicographic order.
pub fn complete_design(n: usize, m: usize) -> Result<Design> {
    complete_design_capped(n, m, DEFAULT_COMPLETE_CAP)
}

pub fn complete_design_capped(n: usize, m: usize, cap: u128) -> Result<Design> {
    check_nm(n, m, false)?;
    let count = binomial(n as u64, m as u64).unwrap_or(u128::MAX);
    if count > cap {
        return Err(Error::CapExceeded {
            what: format!("complete design C({n},{m})"),
            size: count as f64,
            cap: cap as f64,
        });
    }
    let mut flat = Vec::with_capacity(count as usize * m);
    let mut cur: Vec<u32> = (0..m as u32).collect();
    loop {
        flat.extend_from_slice(&cur);
        // advance to the next combination in lexicographic order
        let mut i = m;
        loop {
            if i == 0 {
                return Ok(Design::from_flat(n, m, flat, DesignOrigin::Complete));
            }
            i -= 1;
            if (cur[i] as usize) < n - m + i {
                break;
            }
        }
        cur[i] += 1;
        for j in i + 1..m {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// `n / m` disjoint consecutive blocks.
pub fn partition_design(n: usize, m: usize) -> Result<Design> {
    check_nm(n, m, true)?;
    if !n.is_multiple_of(m) {
        return Err(Error::param(format!("partition design needs m | n, got n={n}, m={m}")));
    }
    let flat = (0..n as u32).collect();
    Ok(Design::from_flat(n, m, flat, DesignOrigin::Partition))
}

/// Draws uniform `m`-subsets of `[n]` by a partial Fisher-Yates shuffle.
///
/// The working permutation is not reset between draws: a partial shuffle of
/// any permutation yields a uniform subset, so each draw costs `O(m)`.
#[derive(Clone, Debug)]
pub struct SubsetSampler {
    perm: Vec<u32>,
    m: usize,
}

impl SubsetSampler {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        check_nm(n, m, false)?;
        Ok(Self {
            perm: (0..n as u32).collect(),
            m,
        })
    }

    /// Writes one uniform subset (0-based, unordered) into `out`.
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [u32]) {
        let n = self.perm.len();
        for i in 0..self.m {
            let j = rng.random_range(i..n);
            self.perm.swap(i, j);
            out[i] = self.perm[i];
        }
    }

    pub fn design<R: Rng + ?Sized>(&mut self, rng: &mut R, big_m: usize, origin: DesignOrigin) -> Design {
        let m = self.m;
        let mut flat = vec![0u32; big_m * m];
        for chunk in flat.chunks_mut(m) {
            self.draw(rng, chunk);
        }
        Design::from_flat(self.perm.len(), m, flat, origin)
    }
}

/// `M` subsets drawn i.i.d. uniformly, with replacement, reproducible from `seed`.
pub fn random_design(n: usize, m: usize, big_m: usize, seed: u64) -> Result<Design> {
    if big_m == 0 {
        return Err(Error::param("M must be >= 1"));
    }
    let mut rng = rng::seeded(seed);
    Ok(random_design_with(&mut rng, n, m, big_m)?.with_origin(DesignOrigin::Random { seed }))
}

/// Like [`random_design`] but drawing from a caller-supplied generator.
pub fn random_design_with<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize, big_m: usize) -> Result<Design> {
    if big_m == 0 {
        return Err(Error::param("M must be >= 1"));
    }
    Ok(SubsetSampler::new(n, m)?.design(rng, big_m, DesignOrigin::Custom))
}

impl Design {
    pub fn with_origin(mut self, origin: DesignOrigin) -> Self {
        self.origin = origin;
        self
    }
}

/// `A`, `B`, `C` of a design.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignScalars {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Incidence counts of a design together with its sensitivity scalars.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DesignStats {
    pub n: usize,
    pub m: usize,
    /// `R_k` for `k = 1..n` (stored at position `k - 1`)
    pub r: Vec<u64>,
    /// `R_kl` over unordered pairs `k < l`, 1-based; zero counts omitted
    pub r_pair: BTreeMap<(usize, usize), u64>,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub m_total: usize,
}

impl DesignStats {
    pub fn scalars(&self) -> DesignScalars {
        DesignScalars {
            a: self.a,
            b: self.b,
            c: self.c,
        }
    }

    /// `Σ_k R_k`, always `m M`.
    pub fn sum_r(&self) -> u64 {
        self.r.iter().sum()
    }

    /// `Σ_{k≠l} R_kl` over ordered pairs, always `m (m-1) M`.
    pub fn sum_r_pair_ordered(&self) -> u64 {
        2 * self.r_pair.values().sum::<u64>()
    }
}

/// Reusable buffers for computing [`DesignScalars`] of many designs over the
/// same `n`.
pub struct StatsWorkspace {
    n: usize,
    r: Vec<u64>,
    /// dense upper triangle when `n` is small enough
    pairs: Option<Vec<u64>>,
    touched: Vec<usize>,
}

/// Dense pair counting is used up to this `n` (an `n^2` table of `u64`).
const DENSE_PAIR_LIMIT: usize = 2048;

impl StatsWorkspace {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            r: vec![0; n],
            pairs: (n <= DENSE_PAIR_LIMIT).then(|| vec![0; n * n]),
            touched: Vec::new(),
        }
    }

    /// Computes `A`, `B`, `C` exactly from integer counts.
    pub fn scalars(&mut self, design: &Design) -> DesignScalars {
        assert_eq!(design.n(), self.n, "workspace built for a different n");
        let big_m = design.len() as u128;
        self.r.iter_mut().for_each(|x| *x = 0);
        for s in design.subsets0() {
            for &k in s {
                self.r[k as usize] += 1;
            }
        }
        let sum_sq_r: u128 = self.r.iter().map(|&x| (x as u128) * (x as u128)).sum();
        let max_r = self.r.iter().copied().max().unwrap_or(0) as u128;

        let sum_sq_pairs: u128 = match self.pairs.as_mut() {
            Some(table) => {
                let n = self.n;
                for s in design.subsets0() {
                    for (j, &k) in s.iter().enumerate() {
                        for &l in &s[j + 1..] {
                            let (lo, hi) = if k < l { (k, l) } else { (l, k) };
                            let cell = lo as usize * n + hi as usize;
                            if table[cell] == 0 {
                                self.touched.push(cell);
                            }
                            table[cell] += 1;
                        }
                    }
                }
                let mut sum = 0u128;
                for &cell in &self.touched {
                    let x = table[cell] as u128;
                    sum += x * x;
                    table[cell] = 0;
                }
                self.touched.clear();
                sum
            }
            None => pair_counts(design)
                .values()
                .map(|&x| (x as u128) * (x as u128))
                .sum(),
        };
        let m2 = big_m * big_m;
        DesignScalars {
            a: exact_ratio(sum_sq_r, m2),
            // ordered pairs: each unordered pair counted twice
            b: exact_ratio(2 * sum_sq_pairs, m2),
            c: exact_ratio(max_r, big_m),
        }
    }
}

fn pair_counts(design: &Design) -> BTreeMap<(usize, usize), u64> {
    let mut map = BTreeMap::new();
    for s in design.subsets0() {
        for (j, &k) in s.iter().enumerate() {
            for &l in &s[j + 1..] {
                let (lo, hi) = if k < l { (k, l) } else { (l, k) };
                *map.entry((lo as usize + 1, hi as usize + 1)).or_insert(0) += 1;
            }
        }
    }
    map
}

/// Full incidence statistics of a design.
pub fn design_stats(design: &Design) -> DesignStats {
    let scalars = design_scalars(design);
    let mut r = vec![0u64; design.n()];
    for s in design.subsets0() {
        for &k in s {
            r[k as usize] += 1;
        }
    }
    DesignStats {
        n: design.n(),
        m: design.m(),
        r,
        r_pair: pair_counts(design),
        a: scalars.a,
        b: scalars.b,
        c: scalars.c,
        m_total: design.len(),
    }
}

/// `A`, `B`, `C` without materializing the pair map.
pub fn design_scalars(design: &Design) -> DesignScalars {
    StatsWorkspace::new(design.n()).scalars(design)
}

/// Closed-form `A`, `B`, `C` of the complete design.
///
/// `relaxed_b` replaces `m²(m-1)²/(n(n-1))` by its upper bound `m⁴/n²`.
pub fn complete_scalars(n: usize, m: usize, relaxed_b: bool) -> DesignScalars {
    let (n128, m128) = (n as u128, m as u128);
    let b = if relaxed_b {
        exact_ratio(m128.pow(4), n128 * n128)
    } else if m == 1 {
        0.0
    } else {
        exact_ratio(m128 * m128 * (m128 - 1) * (m128 - 1), n128 * (n128 - 1))
    };
    DesignScalars {
        a: exact_ratio(m128 * m128, n128),
        b,
        c: exact_ratio(m128, n128),
    }
}

/// Moments of `A` and `B` under uniform random sampling of `M` subsets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedStats {
    /// `E[A] = m/M + (M-1) m² / (M n)`
    pub a_exact: f64,
    /// `E[B] = n(n-1) p (1 + (M-1) p) / M` with `p = m(m-1)/(n(n-1))`
    pub b_exact: f64,
    /// `m²/n + m/M`
    pub a_bound: f64,
    /// `m⁴/n² + m²/M`
    pub b_bound: f64,
}

pub fn expected_stats(n: usize, m: usize, big_m: usize) -> Result<ExpectedStats> {
    check_nm(n, m, false)?;
    if big_m == 0 {
        return Err(Error::param("M must be >= 1"));
    }
    let (n, m, bm) = (n as f64, m as f64, big_m as f64);
    let p = m * (m - 1.0) / (n * (n - 1.0));
    Ok(ExpectedStats {
        a_exact: m / bm + (bm - 1.0) * m * m / (bm * n),
        b_exact: n * (n - 1.0) * p * (1.0 + (bm - 1.0) * p) / bm,
        a_bound: m * m / n + m / bm,
        b_bound: m.powi(4) / (n * n) + m * m / bm,
    })
}

/// `m/n + (√(2m) + 3) ln(4/δ) / √M`: the random design's `C` exceeds this
/// with probability at most `δ/4` (requires `√M ≥ ln n`).
pub fn c_deviation_bound(n: usize, m: usize, big_m: usize, delta: f64) -> f64 {
    let (n, m, bm) = (n as f64, m as f64, big_m as f64);
    m / n + ((2.0 * m).sqrt() + 3.0) / bm.sqrt() * (4.0 / delta).ln()
}

/// `√(m²/n) + (1 + 4√ln(1/δ)) √(m/M)`: `√A` of a random design exceeds this
/// with probability at most `δ`.
pub fn sqrt_a_deviation_bound(n: usize, m: usize, big_m: usize, delta: f64) -> f64 {
    let (n, m, bm) = (n as f64, m as f64, big_m as f64);
    (m * m / n).sqrt() + (1.0 + 4.0 * (1.0 / delta).ln().sqrt()) * (m / bm).sqrt()
}

/// `m²/n + (1 + 4√ln(1/δ)) m/√M`: `√B` of a random design exceeds this with
/// probability at most `δ`.
pub fn sqrt_b_deviation_bound(n: usize, m: usize, big_m: usize, delta: f64) -> f64 {
    let (n, m, bm) = (n as f64, m as f64, big_m as f64);
    m * m / n + (1.0 + 4.0 * (1.0 / delta).ln().sqrt()) * m / bm.sqrt()
}

/// How to obtain a design: `complete`, `partition`, `random[:M[:seed]]` or
/// `file:<path>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DesignSpec {
    Complete,
    Partition,
    Random { big_m: Option<usize>, seed: Option<u64> },
    File(PathBuf),
}

impl FromStr for DesignSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::param(format!("bad design `{s}`; expected complete, partition, random:M:seed or file:path"));
        match s {
            "complete" => return Ok(DesignSpec::Complete),
            "partition" => return Ok(DesignSpec::Partition),
            "random" => return Ok(DesignSpec::Random { big_m: None, seed: None }),
            _ => {}
        }
        if let Some(path) = s.strip_prefix("file:") {
            if path.is_empty() {
                return Err(bad());
            }
            return Ok(DesignSpec::File(PathBuf::from(path)));
        }
        let rest = s.strip_prefix("random:").ok_or_else(bad)?;
        let mut parts = rest.split(':');
        let big_m = parts.next().map(|p| p.parse::<usize>().map_err(|_| bad())).transpose()?;
        let seed = parts.next().map(|p| p.parse::<u64>().map_err(|_| bad())).transpose()?;
        if parts.next().is_some() || big_m == Some(0) {
            return Err(bad());
        }
        Ok(DesignSpec::Random { big_m, seed })
    }
}

impl fmt::Display for DesignSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DesignSpec::Complete => write!(f, "complete"),
            DesignSpec::Partition => write!(f, "partition"),
            DesignSpec::Random { big_m, seed } => {
                write!(f, "random")?;
                if let Some(bm) = big_m {
                    write!(f, ":{bm}")?;
                    if let Some(seed) = seed {
                        write!(f, ":{seed}")?;
                    }
                }
                Ok(())
            }
            DesignSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl DesignSpec {
    /// Fills in a missing `M` and seed.
    pub fn resolved(&self, big_m: Option<usize>, seed: u64) -> Result<DesignSpec> {
        Ok(match self {
            DesignSpec::Random { big_m: own, seed: own_seed } => DesignSpec::Random {
                big_m: Some(own.or(big_m).ok_or_else(|| Error::param("random design needs M"))?),
                seed: Some(own_seed.unwrap_or(seed)),
            },
            other => other.clone(),
        })
    }

    /// Builds the design for sample size `n` and subset size `m`; `big_m` and
    /// `seed` fill in a random spec that omits them.
    pub fn build(&self, n: usize, m: usize, big_m: Option<usize>, seed: u64) -> Result<Design> {
        match self.resolved(big_m, seed)? {
            DesignSpec::Complete => complete_design(n, m),
            DesignSpec::Partition => partition_design(n, m),
            DesignSpec::Random { big_m, seed } => random_design(n, m, big_m.unwrap_or(1), seed.unwrap_or(0)),
            DesignSpec::File(path) => {
                let d = load_design(&path)?;
                if d.n() != n || d.m() != m {
                    return Err(Error::param(format!(
                        "design file has n={}, m={} but n={n}, m={m} were requested",
                        d.n(),
                        d.m()
                    )));
                }
                Ok(d)
            }
        }
    }
}

/// Writes the plain-text design format: a header `n=<n> m=<m> M=<M>` followed
/// by one comma-separated, 1-based subset per line.
pub fn write_design<W: Write>(design: &Design, mut w: W) -> Result<()> {
    writeln!(w, "n={} m={} M={}", design.n(), design.m(), design.len())?;
    let mut line = String::new();
    for s in design.subsets0() {
        line.clear();
        for (j, &k) in s.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&(k + 1).to_string());
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn save_design(design: &Design, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_design(design, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_design<R: BufRead>(reader: R, origin: &Path) -> Result<Design> {
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    let mut lines = reader.lines().enumerate();
    let (n, m, big_m) = loop {
        let Some((i, line)) = lines.next() else {
            return Err(err(1, "missing header `n=<n> m=<m> M=<M>`".into()));
        };
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        break parse_header(trimmed).map_err(|msg| err(i + 1, msg))?;
    };
    check_nm(n, m, true).map_err(|e| err(1, e.to_string()))?;
    let mut flat = Vec::with_capacity(big_m * m);
    let mut seen = 0usize;
    let mut subset = Vec::with_capacity(m);
    for (i, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        subset.clear();
        for field in trimmed.split(',') {
            let k: usize = field
                .trim()
                .parse()
                .map_err(|_| err(i + 1, format!("`{}` is not an index", field.trim())))?;
            subset.push(k);
        }
        validate_subset(&subset, n, m).map_err(|msg| err(i + 1, msg))?;
        flat.extend(subset.iter().map(|&k| (k - 1) as u32));
        seen += 1;
    }
    if seen != big_m {
        return Err(err(1, format!("header declares M={big_m} but {seen} subsets follow")));
    }
    if seen == 0 {
        return Err(err(1, "a design needs at least one subset".into()));
    }
    Ok(Design::from_flat(
        n,
        m,
        flat,
        DesignOrigin::File {
            path: origin.display().to_string(),
        },
    ))
}

fn parse_header(line: &str) -> std::result::Result<(usize, usize, usize), String> {
    let (mut n, mut m, mut big_m) = (None, None, None);
    for tok in line.split_whitespace() {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| format!("malformed header token `{tok}`"))?;
        let value: usize = value
            .parse()
            .map_err(|_| format!("`{value}` is not a nonnegative integer"))?;
        match key {
            "n" => n = Some(value),
            "m" => m = Some(value),
            "M" => big_m = Some(value),
            other => return Err(format!("unknown header key `{other}`")),
        }
    }
    match (n, m, big_m) {
        (Some(n), Some(m), Some(bm)) => Ok((n, m, bm)),
        _ => Err("header must define n, m and M".into()),
    }
}

pub fn load_design(path: &Path) -> Result<Design> {
    let file = std::fs::File::open(path)?;
    read_design(BufReader::new(file), path)
}
