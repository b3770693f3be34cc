//! Sampling distributions and datasets.

use std::io::Read;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on `|support|^n` for exhaustive enumeration.
pub const DEFAULT_PRODUCT_CAP: u64 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Support {
    /// Explicit atoms with probabilities.
    Finite { atoms: Vec<Vec<f64>>, probs: Vec<f64> },
    /// Independent uniform coordinates on `[lo, hi]`.
    UniformBox { lo: f64, hi: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    name: String,
    dim: usize,
    support: Support,
}

impl Distribution {
    pub fn finite(name: impl Into<String>, atoms: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != probs.len() {
            return Err(Error::param("finite distribution needs one probability per atom"));
        }
        let dim = atoms[0].len();
        if dim == 0 || atoms.iter().any(|a| a.len() != dim) {
            return Err(Error::param("atoms must share a nonzero dimension"));
        }
        if atoms.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("distribution atom".into()));
        }
        if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::param("probabilities must lie in [0, 1]"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::param(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self {
            name: name.into(),
            dim,
            support: Support::Finite { atoms, probs },
        })
    }

    pub fn uniform_box(name: impl Into<String>, dim: usize, lo: f64, hi: f64) -> Result<Self> {
        if dim == 0 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::param("uniform box needs dim >= 1 and lo < hi"));
        }
        Ok(Self {
            name: name.into(),
            dim,
            support: Support::UniformBox { lo, hi },
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.support, Support::Finite { .. })
    }

    /// Atoms and probabilities, for finite supports.
    pub fn atoms(&self) -> Option<(&[Vec<f64>], &[f64])> {
        match &self.support {
            Support::Finite { atoms, probs } => Some((atoms, probs)),
            Support::UniformBox { .. } => None,
        }
    }

    /// Writes one draw into `out` (length `dim`).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match &self.support {
            Support::Finite { atoms, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = atoms.len() - 1;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                out.copy_from_slice(&atoms[pick]);
            }
            Support::UniformBox { lo, hi } => {
                for x in out.iter_mut() {
                    *x = rng.random_range(*lo..=*hi);
                }
            }
        }
    }

    pub fn sample_dataset<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Dataset {
        let mut values = vec![0.0; n * self.dim];
        for chunk in values.chunks_mut(self.dim) {
            self.sample_into(rng, chunk);
        }
        Dataset {
            dim: self.dim,
            values,
        }
    }

    /// Number of atoms raised to `n`, checked against `cap`.
    pub fn product_size(&self, n: usize, cap: u64) -> Result<u64> {
        let (atoms, _) = self.atoms().ok_or_else(|| {
            Error::Unavailable(format!("`{}` has no finite support to enumerate", self.name))
        })?;
        let s = atoms.len() as f64;
        let size = s.powi(n as i32);
        if size > cap as f64 {
            return Err(Error::CapExceeded {
                what: format!("enumerating {}^{n}", self.name),
                size,
                cap: cap as f64,
            });
        }
        Ok(size as u64)
    }
}

/// Visits every point of `support^n` as atom indices (last position varies
/// fastest) with its product probability.
pub fn for_each_product<F>(probs: &[f64], n: usize, mut f: F)
where
    F: FnMut(&[usize], f64),
{
    let s = probs.len();
    let mut idx = vec![0usize; n];
    loop {
        let p: f64 = idx.iter().map(|&i| probs[i]).product();
        f(&idx, p);
        let mut pos = n;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < s {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Decodes `code` (mixed radix, last position least significant) into atom indices.
pub fn decode_index(mut code: usize, s: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = code % s;
        code /= s;
    }
}

pub fn builtin_distributions() -> Vec<Distribution> {
    let build = || -> Result<Vec<Distribution>> {
        Ok(vec![
            Distribution::finite("rademacher", vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5])?,
            Distribution::finite(
                "skewed3",
                vec![vec![-1.0], vec![0.0], vec![1.0]],
                vec![0.2, 0.3, 0.5],
            )?,
            Distribution::uniform_box("uniform", 1, -1.0, 1.0)?,
            Distribution::finite(
                "rademacher2",
                vec![vec![-1.0, -1.0], vec![-1.0, 1.0], vec![1.0, -1.0], vec![1.0, 1.0]],
                vec![0.25; 4],
            )?,
            Distribution::uniform_box("uniform2", 2, -1.0, 1.0)?,
        ])
    };
    build().expect("built-in distributions are well formed")
}

pub fn distribution_by_name(name: &str) -> Result<Distribution> {
    builtin_distributions()
        .into_iter()
        .find(|d| d.name() == name)
        .ok_or_else(|| Error::UnknownDistribution(name.to_string()))
}

/// `n` observations of dimension `dim`, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    dim: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(Error::param("dataset length is not a multiple of the dimension"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset".into()));
        }
        Ok(Self { dim, values })
    }

    pub fn from_scalars(xs: &[f64]) -> Result<Self> {
        Self::new(1, xs.to_vec())
    }

    pub fn from_points(points: &[crate::kernel::SamplePoint]) -> Result<Self> {
        let dim = points.first().map(|p| p.dim()).unwrap_or(1);
        if points.iter().any(|p| p.dim() != dim) {
            return Err(Error::param("points have mixed dimensions"));
        }
        Self::new(dim, points.iter().flat_map(|p| p.coords().iter().copied()).collect())
    }

    /// Parses CSV with one observation per row and one column per coordinate.
    pub fn from_csv_reader<R: Read>(reader: R, has_header: bool, origin: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(has_header)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut dim = None;
        let mut values = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 1 + usize::from(has_header);
            let rec = rec?;
            let width = rec.len();
            match dim {
                None => dim = Some(width),
                Some(d) if d != width => {
                    return Err(Error::Parse {
                        path: origin.to_path_buf(),
                        line,
                        msg: format!("expected {d} columns, found {width}"),
                    })
                }
                _ => {}
            }
            for field in rec.iter() {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    path: origin.to_path_buf(),
                    line,
                    msg: format!("`{field}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        path: origin.to_path_buf(),
                        line,
                        msg: "non-finite value".into(),
                    });
                }
                values.push(v);
            }
        }
        let dim = dim.ok_or_else(|| Error::param(format!("{}: no data rows", origin.display())))?;
        Self::new(dim, values)
    }

    pub fn from_csv_path(path: &Path, has_header: bool) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file, has_header, path)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Observation `i`, 0-based.
    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Dataset whose row `i` is row `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(self.values.len());
        for &p in perm {
            values.extend_from_slice(self.point(p));
        }
        Dataset {
            dim: self.dim,
            values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn finite_probabilities_must_sum_to_one() {
        assert!(Distribution::finite("x", vec![vec![0.0], vec![1.0]], vec![0.5, 0.6]).is_err());
        for d in builtin_distributions() {
            if let Some((_, p)) = d.atoms() {
                assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn product_enumeration_visits_everything() {
        let probs = [0.2, 0.3, 0.5];
        let mut count = 0;
        let mut total = 0.0;
        let mut seen = Vec::new();
        for_each_product(&probs, 3, |idx, p| {
            count += 1;
            total += p;
            seen.push(idx.to_vec());
        });
        assert_eq!(count, 27);
        assert!((total - 1.0).abs() < 1e-12);
        let mut decoded = vec![0; 3];
        for (code, idx) in seen.iter().enumerate() {
            decode_index(code, 3, &mut decoded);
            assert_eq!(&decoded, idx);
        }
    }

    #[test]
    fn product_cap() {
        let r = distribution_by_name("rademacher").unwrap();
        assert_eq!(r.product_size(10, DEFAULT_PRODUCT_CAP).unwrap(), 1024);
        assert!(matches!(r.product_size(21, DEFAULT_PRODUCT_CAP), Err(Error::CapExceeded { .. })));
        let u = distribution_by_name("uniform").unwrap();
        assert!(u.product_size(2, DEFAULT_PRODUCT_CAP).is_err());
    }

    #[test]
    fn sampling_matches_atom_frequencies() {
        let d = distribution_by_name("skewed3").unwrap();
        let mut rng = seeded(5);
        let data = d.sample_dataset(&mut rng, 100_000);
        let ones = data.values().iter().filter(|&&v| v == 1.0).count() as f64 / 1e5;
        // SE = sqrt(.25/1e5) ≈ 0.0016
        assert!((ones - 0.5).abs() < 0.008, "{ones}");
        let u = distribution_by_name("uniform").unwrap().sample_dataset(&mut rng, 1000);
        assert!(u.values().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn csv_parsing() {
        let text = "x,y\n1,2\n3, 4\n";
        let d = Dataset::from_csv_reader(text.as_bytes(), true, Path::new("t.csv")).unwrap();
        assert_eq!(d.dim(), 2);
        assert_eq!(d.point(1), &[3.0, 4.0]);
        let err = Dataset::from_csv_reader("1,2\n3\n".as_bytes(), false, Path::new("t.csv"));
        assert!(err.is_err());
        let err = Dataset::from_csv_reader("1\nabc\n".as_bytes(), false, Path::new("t.csv"))
            .unwrap_err()
            .to_string();
        assert!(err.contains(":2:"), "{err}");
    }
}
