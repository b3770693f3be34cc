//! Seeded Monte Carlo and exact-enumeration studies that check every bound.
//!
//! Each replicate draws from its own generator stream keyed by the master
//! seed, the experiment label and the replicate index, and every reduction
//! runs over index-ordered results, so output is bit-identical for any number
//! of worker threads.

mod concentration;
mod efron_stein;
mod montecarlo;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::{log_space, parse_grid_values};
use crate::design::DesignSpec;
use crate::distribution::{distribution_by_name, Distribution, DEFAULT_PRODUCT_CAP};
use crate::error::{Error, Result};
use crate::estimator::reference_theta;
use crate::kernel::{kernel_by_name, Kernel};
use crate::numeric::binomial;
use crate::sensitivity::{profile, worst_case_profile, McConfig, Method, SensitivityProfile};

pub use efron_stein::{efron_stein_terms, EfronSteinTerms};

/// Allowed Monte Carlo noise on frequency checks, in binomial standard errors.
pub const SLACK_SE: f64 = 3.0;
/// Allowed noise on sample-mean checks, in standard errors.
pub const MEAN_SLACK_SE: f64 = 4.0;
/// Absolute tolerance for exact-enumeration inequalities.
pub const EXACT_TOL: f64 = 1e-10;
pub const MIN_REPLICATES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    TailValidity,
    Coverage,
    DesignConcentration,
    EfronStein,
    BudgetSweep,
    Subgauss,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::TailValidity,
        ExperimentKind::Coverage,
        ExperimentKind::DesignConcentration,
        ExperimentKind::EfronStein,
        ExperimentKind::BudgetSweep,
        ExperimentKind::Subgauss,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::TailValidity => "tail-validity",
            ExperimentKind::Coverage => "coverage",
            ExperimentKind::DesignConcentration => "design-concentration",
            ExperimentKind::EfronStein => "efron-stein",
            ExperimentKind::BudgetSweep => "budget-sweep",
            ExperimentKind::Subgauss => "subgauss",
        }
    }

    fn is_monte_carlo(&self) -> bool {
        !matches!(self, ExperimentKind::EfronStein)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
            Error::param(format!("unknown experiment `{s}`; expected one of {}", names.join(", ")))
        })
    }
}

/// Source of the sensitivity profile fed to the bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProfileChoice {
    /// enumeration over a finite support; fails otherwise
    Exact,
    /// enumeration, analytic facts or Monte Carlo, with Monte Carlo values
    /// replaced by certified worst-case values
    Auto,
    /// raw Monte Carlo; bounds reject it as uncertified
    MonteCarlo,
    WorstCase,
}

impl FromStr for ProfileChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(ProfileChoice::Exact),
            "auto" => Ok(ProfileChoice::Auto),
            "mc" | "monte-carlo" => Ok(ProfileChoice::MonteCarlo),
            "worst-case" | "worst" => Ok(ProfileChoice::WorstCase),
            _ => Err(Error::param(format!(
                "unknown profile `{s}`; expected exact, auto, mc or worst-case"
            ))),
        }
    }
}

impl fmt::Display for ProfileChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileChoice::Exact => "exact",
            ProfileChoice::Auto => "auto",
            ProfileChoice::MonteCarlo => "mc",
            ProfileChoice::WorstCase => "worst-case",
        })
    }
}

/// A budget `M`, absolute or as a function of `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Budget {
    Fixed(usize),
    /// `round(n^p)`
    Power(f64),
    /// `round(n ln n)`
    NLogN,
    /// `C(n, m)`
    Complete,
}

impl FromStr for Budget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "n" => return Ok(Budget::Power(1.0)),
            "nlogn" => return Ok(Budget::NLogN),
            "complete" => return Ok(Budget::Complete),
            _ => {}
        }
        if let Some(p) = s.strip_prefix("n^") {
            return p
                .parse::<f64>()
                .ok()
                .filter(|p| *p > 0.0)
                .map(Budget::Power)
                .ok_or_else(|| Error::param(format!("bad budget exponent in `{s}`")));
        }
        match s.parse::<usize>() {
            Ok(v) if v > 0 => Ok(Budget::Fixed(v)),
            _ => Err(Error::param(format!(
                "bad budget `{s}`; expected a positive integer, n, nlogn, n^p or complete"
            ))),
        }
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Budget::Fixed(v) => write!(f, "{v}"),
            Budget::Power(p) if *p == 1.0 => write!(f, "n"),
            Budget::Power(p) => write!(f, "n^{p}"),
            Budget::NLogN => write!(f, "nlogn"),
            Budget::Complete => write!(f, "complete"),
        }
    }
}

impl Budget {
    pub fn resolve(&self, n: usize, m: usize) -> Result<usize> {
        let nf = n as f64;
        let v = match self {
            Budget::Fixed(v) => *v,
            Budget::Power(p) => nf.powf(*p).round() as usize,
            Budget::NLogN => (nf * nf.ln()).round() as usize,
            Budget::Complete => binomial(n as u64, m as u64)
                .and_then(|c| usize::try_from(c).ok())
                .ok_or_else(|| Error::param("C(n, m) does not fit in memory"))?,
        };
        Ok(v.max(1))
    }
}

/// Parameters of one experiment, read from flat `key = value` text.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub kernel: String,
    pub distribution: String,
    pub n: usize,
    /// defaults to the kernel's degree
    pub m: Option<usize>,
    /// `M` for random designs
    pub budget: Option<Budget>,
    pub design: DesignSpec,
    pub replicates: usize,
    /// number of designs for exact Efron-Stein checks with random designs
    pub designs: usize,
    pub t_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    /// second confidence parameter of the random-design bound; defaults to δ
    pub delta2: Option<f64>,
    /// bound under test: `incomplete`, `complete`, `random-design`, or a
    /// baseline (`hoeffding`, `arcones`, `maurer`, `complete-worst-case`)
    pub bound: String,
    pub profile: ProfileChoice,
    pub budgets: Vec<Budget>,
    pub seed: u64,
    /// evaluate bounds whose validity flags fail
    pub force: bool,
    pub out: Option<PathBuf>,
}

pub const CONFIG_KEYS: [&str; 18] = [
    "kind",
    "kernel",
    "distribution",
    "n",
    "m",
    "M",
    "design",
    "replicates",
    "designs",
    "t",
    "delta",
    "delta2",
    "bound",
    "profile",
    "budgets",
    "seed",
    "force",
    "out",
];

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            kernel: "product".into(),
            distribution: "rademacher".into(),
            n: 20,
            m: None,
            budget: None,
            design: DesignSpec::Random { big_m: None, seed: None },
            replicates: 1000,
            designs: 1,
            t_grid: log_space(0.02, 1.0, 10),
            delta_grid: vec![0.05, 0.1, (-1.0f64).exp()],
            delta2: None,
            bound: match kind {
                ExperimentKind::Coverage => "incomplete",
                ExperimentKind::BudgetSweep => "random-design",
                ExperimentKind::Subgauss => "subgauss",
                _ => "incomplete",
            }
            .into(),
            profile: ProfileChoice::Auto,
            budgets: vec![Budget::Power(1.0), Budget::NLogN, Budget::Power(1.5), Budget::Power(2.0)],
            seed: 0,
            force: false,
            out: None,
        }
    }

    /// Parses config text. Blank lines and `#` comments are ignored; unknown
    /// keys are errors. `kind` may come from the text or from `kind`.
    pub fn parse(text: &str, kind: Option<ExperimentKind>, origin: &Path) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut file_kind = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                msg,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected key = value, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if key == "kind" {
                file_kind = Some(value.parse::<ExperimentKind>().map_err(|e| parse_err(e.to_string()))?);
            } else {
                pairs.push((i + 1, key.to_string(), value.to_string()));
            }
        }
        let kind = match (kind, file_kind) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::param(format!(
                    "config says kind = {b} but experiment `{a}` was requested"
                )))
            }
            (Some(k), _) | (None, Some(k)) => k,
            (None, None) => return Err(Error::param("no experiment kind given")),
        };
        let mut cfg = ExperimentConfig::new(kind);
        for (line, key, value) in pairs {
            cfg.set(&key, &value).map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                line,
                msg: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    pub fn from_path(path: &Path, kind: Option<ExperimentKind>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, kind, path)
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let int = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::param(format!("`{key}` needs a nonnegative integer, got `{v}`")))
        };
        let real = |v: &str| -> Result<f64> {
            parse_grid_values(v)?
                .first()
                .copied()
                .ok_or_else(|| Error::param(format!("`{key}` needs a number")))
        };
        match key {
            "kind" => self.kind = value.parse()?,
            "kernel" => self.kernel = value.to_string(),
            "distribution" => self.distribution = value.to_string(),
            "n" => self.n = int(value)?,
            "m" => self.m = Some(int(value)?),
            "M" => self.budget = Some(value.parse()?),
            "design" => self.design = value.parse()?,
            "replicates" => self.replicates = int(value)?,
            "designs" => self.designs = int(value)?,
            "t" => self.t_grid = parse_grid_values(value)?,
            "delta" => self.delta_grid = parse_grid_values(value)?,
            "delta2" => self.delta2 = Some(real(value)?),
            "bound" => self.bound = value.to_string(),
            "profile" => self.profile = value.parse()?,
            "budgets" => {
                self.budgets = value
                    .split(',')
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::param(format!("seed must be a u64, got `{value}`")))?
            }
            "force" => {
                self.force = match value {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(Error::param(format!("force must be true or false, got `{value}`"))),
                }
            }
            "out" => self.out = Some(PathBuf::from(value)),
            _ => {
                return Err(Error::param(format!(
                    "unknown config key `{key}`; known keys: {}",
                    CONFIG_KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Every setting in text form, re-parseable by [`ExperimentConfig::set`].
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let join = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        put("kind", self.kind.to_string());
        put("kernel", self.kernel.clone());
        put("distribution", self.distribution.clone());
        put("n", self.n.to_string());
        if let Some(m) = self.m {
            put("m", m.to_string());
        }
        if let Some(b) = self.budget {
            put("M", b.to_string());
        }
        put("design", self.design.to_string());
        put("replicates", self.replicates.to_string());
        put("designs", self.designs.to_string());
        put("t", join(&self.t_grid));
        put("delta", join(&self.delta_grid));
        if let Some(d) = self.delta2 {
            put("delta2", d.to_string());
        }
        put("bound", self.bound.clone());
        put("profile", self.profile.to_string());
        put(
            "budgets",
            self.budgets.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(","),
        );
        put("seed", self.seed.to_string());
        put("force", self.force.to_string());
        if let Some(out) = &self.out {
            put("out", out.display().to_string());
        }
        map
    }

    fn validate(&self) -> Result<()> {
        if self.kind.is_monte_carlo() && self.replicates < MIN_REPLICATES {
            return Err(Error::param(format!(
                "replicates must be at least {MIN_REPLICATES}, got {}",
                self.replicates
            )));
        }
        if self.t_grid.is_empty() || self.delta_grid.is_empty() || self.budgets.is_empty() {
            return Err(Error::param("grids must be nonempty"));
        }
        if self.designs == 0 {
            return Err(Error::param("designs must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "=")]
    Equal,
}

impl Relation {
    /// `empirical (relation) bound` up to `tolerance`.
    pub fn holds(&self, empirical: f64, bound: f64, tolerance: f64) -> bool {
        match self {
            Relation::AtMost => empirical <= bound + tolerance,
            Relation::AtLeast => empirical >= bound - tolerance,
            Relation::Equal => (empirical - bound).abs() <= tolerance,
        }
    }
}

/// One checked quantity. `pass` is `empirical (relation) bound` within
/// `tolerance`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub experiment: String,
    pub check: String,
    pub kernel: String,
    pub distribution: String,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "M")]
    pub big_m: usize,
    pub design: String,
    pub replicates: usize,
    pub seed: u64,
    pub parameter: String,
    pub value: f64,
    pub empirical: f64,
    pub std_err: f64,
    pub bound: f64,
    pub relation: Relation,
    pub tolerance: f64,
    pub pass: bool,
}

/// Row fields shared by all rows of one (sub)experiment.
#[derive(Clone, Debug)]
pub(crate) struct RowContext {
    pub experiment: String,
    pub kernel: String,
    pub distribution: String,
    pub n: usize,
    pub m: usize,
    pub big_m: usize,
    pub design: String,
    pub replicates: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Check<'a> {
    pub check: &'a str,
    pub parameter: &'a str,
    pub value: f64,
    pub empirical: f64,
    pub std_err: f64,
    pub bound: f64,
    pub relation: Relation,
    pub tolerance: f64,
}

impl RowContext {
    pub fn row(&self, c: Check<'_>) -> ExperimentRow {
        ExperimentRow {
            experiment: self.experiment.clone(),
            check: c.check.to_string(),
            kernel: self.kernel.clone(),
            distribution: self.distribution.clone(),
            n: self.n,
            m: self.m,
            big_m: self.big_m,
            design: self.design.clone(),
            replicates: self.replicates,
            seed: self.seed,
            parameter: c.parameter.to_string(),
            value: c.value,
            empirical: c.empirical,
            std_err: c.std_err,
            bound: c.bound,
            relation: c.relation,
            tolerance: c.tolerance,
            pass: c.relation.holds(c.empirical, c.bound, c.tolerance),
        }
    }
}

/// Binomial standard error of a frequency over `r` trials, evaluated at the
/// hypothesized boundary probability `q`.
pub fn binomial_se(q: f64, r: usize) -> f64 {
    let q = q.clamp(0.0, 1.0);
    (q * (1.0 - q) / r as f64).sqrt()
}

/// Frequency check `P(event) ≤ level` with `SLACK_SE` binomial SE slack.
pub(crate) fn frequency_at_most<'a>(check: &'a str, parameter: &'a str, value: f64, hits: usize, r: usize, level: f64) -> Check<'a> {
    let se = binomial_se(level, r);
    Check {
        check,
        parameter,
        value,
        empirical: hits as f64 / r as f64,
        std_err: se,
        bound: level,
        relation: Relation::AtMost,
        tolerance: SLACK_SE * se,
    }
}

/// Coverage check `P(covered) ≥ level` with `SLACK_SE` binomial SE slack.
pub(crate) fn frequency_at_least<'a>(check: &'a str, parameter: &'a str, value: f64, hits: usize, r: usize, level: f64) -> Check<'a> {
    let se = binomial_se(level, r);
    Check {
        check,
        parameter,
        value,
        empirical: hits as f64 / r as f64,
        std_err: se,
        bound: level,
        relation: Relation::AtLeast,
        tolerance: SLACK_SE * se,
    }
}

/// Result of one experiment run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub rows: Vec<ExperimentRow>,
    /// θ, profile, design statistics and validity flags
    pub notes: BTreeMap<String, serde_json::Value>,
}

impl ExperimentOutput {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ExperimentRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_csv_rows(&self.rows, w)
    }

    pub fn csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }

    /// Sidecar path for a CSV path: the same stem with a `.json` extension.
    pub fn sidecar_path(csv_path: &Path) -> PathBuf {
        csv_path.with_extension("json")
    }

    /// Writes the CSV to `csv_path` and the JSON sidecar next to it.
    pub fn save(&self, csv_path: &Path) -> Result<PathBuf> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(csv_path)?))?;
        let sidecar = Self::sidecar_path(csv_path);
        let json = serde_json::json!({
            "kind": self.kind,
            "seed": self.seed,
            "config": self.config,
            "rows": self.rows.len(),
            "all_pass": self.all_pass(),
            "csv": csv_path.display().to_string(),
            "notes": self.notes,
        });
        std::fs::write(&sidecar, serde_json::to_string_pretty(&json)? + "\n")?;
        Ok(sidecar)
    }
}

/// Kernel, distribution, θ and profile shared by the Monte Carlo studies.
pub(crate) struct Setup {
    pub kernel: Kernel,
    pub dist: Distribution,
    pub m: usize,
    pub theta: f64,
    pub profile: Option<SensitivityProfile>,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig, with_profile: bool) -> Result<Self> {
        let kernel = kernel_by_name(&cfg.kernel)?;
        let dist = distribution_by_name(&cfg.distribution)?;
        let m = kernel.degree();
        if let Some(cm) = cfg.m {
            if cm != m {
                return Err(Error::param(format!(
                    "m = {cm} but kernel `{}` has degree {m}",
                    kernel.name()
                )));
            }
        }
        if cfg.n <= m {
            return Err(Error::param(format!("need n > m, got n={}, m={m}", cfg.n)));
        }
        let theta = reference_theta(&kernel, &dist)?;
        let profile = if with_profile {
            Some(resolve_profile(&kernel, &dist, cfg.profile, cfg.seed)?)
        } else {
            None
        };
        Ok(Self {
            kernel,
            dist,
            m,
            theta,
            profile,
        })
    }

    pub fn profile(&self) -> &SensitivityProfile {
        self.profile.as_ref().expect("setup built with a profile")
    }

    pub fn context(&self, cfg: &ExperimentConfig, big_m: usize, design: String) -> RowContext {
        RowContext {
            experiment: cfg.kind.to_string(),
            kernel: self.kernel.name().to_string(),
            distribution: self.dist.name().to_string(),
            n: cfg.n,
            m: self.m,
            big_m,
            design,
            replicates: cfg.replicates,
            seed: cfg.seed,
        }
    }

    pub fn notes(&self) -> BTreeMap<String, serde_json::Value> {
        let mut notes = BTreeMap::new();
        notes.insert("theta".into(), serde_json::json!(self.theta));
        if let Some(p) = &self.profile {
            notes.insert("profile".into(), serde_json::to_value(p).unwrap_or_default());
        }
        notes
    }
}

/// Writes serializable rows as CSV with a header line.
pub fn write_csv_rows<T: Serialize, W: Write>(rows: &[T], w: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn resolve_profile(kernel: &Kernel, dist: &Distribution, choice: ProfileChoice, seed: u64) -> Result<SensitivityProfile> {
    let mc = McConfig {
        seed,
        ..McConfig::default()
    };
    Ok(match choice {
        ProfileChoice::Exact => profile(kernel, dist, &Method::Exact { cap: DEFAULT_PRODUCT_CAP })?,
        ProfileChoice::Auto => profile(kernel, dist, &Method::Auto(mc))?.certified(),
        ProfileChoice::MonteCarlo => profile(kernel, dist, &Method::MonteCarlo(mc))?,
        ProfileChoice::WorstCase => worst_case_profile(kernel),
    })
}

/// Runs the experiment on the current rayon pool.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let (rows, notes) = match cfg.kind {
        ExperimentKind::TailValidity => montecarlo::tail_validity(cfg)?,
        ExperimentKind::Coverage => montecarlo::coverage(cfg)?,
        ExperimentKind::BudgetSweep => montecarlo::budget_sweep(cfg)?,
        ExperimentKind::Subgauss => montecarlo::subgauss(cfg)?,
        ExperimentKind::DesignConcentration => concentration::design_concentration(cfg)?,
        ExperimentKind::EfronStein => efron_stein::efron_stein(cfg)?,
    };
    Ok(ExperimentOutput {
        kind: cfg.kind,
        seed: cfg.seed,
        config: cfg.to_pairs(),
        rows,
        notes,
    })
}

/// Runs the experiment on a dedicated pool of `threads` workers (0 = one per
/// core). Output does not depend on `threads`.
pub fn run_with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::param(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(|| run(cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let text = "# tail check\nkind = tail-validity\nkernel = product\nn = 20\nM = n^2\n\nreplicates = 200 # few\nt = 0.1,0.2\nseed = 9\n";
        let cfg = ExperimentConfig::parse(text, None, Path::new("c.txt")).unwrap();
        assert_eq!(cfg.kind, ExperimentKind::TailValidity);
        assert_eq!(cfg.budget.unwrap().resolve(20, 2).unwrap(), 400);
        assert_eq!(cfg.t_grid, vec![0.1, 0.2]);
        assert_eq!(cfg.seed, 9);

        let again = {
            let mut c = ExperimentConfig::new(cfg.kind);
            for (k, v) in cfg.to_pairs() {
                c.set(&k, &v).unwrap();
            }
            c
        };
        assert_eq!(again, cfg);

        let err = ExperimentConfig::parse("kind = coverage\nbogus = 1\n", None, Path::new("c.txt")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(ExperimentConfig::parse("n = 5\n", None, Path::new("c.txt")).is_err());
        assert!(ExperimentConfig::parse("kind = coverage\n", Some(ExperimentKind::Subgauss), Path::new("c")).is_err());
    }

    #[test]
    fn budgets() {
        assert_eq!("n".parse::<Budget>().unwrap().resolve(100, 2).unwrap(), 100);
        assert_eq!("n^1.5".parse::<Budget>().unwrap().resolve(100, 2).unwrap(), 1000);
        assert_eq!("nlogn".parse::<Budget>().unwrap().resolve(100, 2).unwrap(), 461);
        assert_eq!("complete".parse::<Budget>().unwrap().resolve(10, 3).unwrap(), 120);
        assert_eq!("77".parse::<Budget>().unwrap(), Budget::Fixed(77));
        assert!("0".parse::<Budget>().is_err());
        assert!("n^x".parse::<Budget>().is_err());
    }

    #[test]
    fn too_few_replicates_rejected() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::TailValidity);
        cfg.replicates = 50;
        assert!(run(&cfg).is_err());
    }
}
