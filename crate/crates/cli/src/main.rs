use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use ustat_core::bounds::{self, BoundInput, BoundKind, BoundReport, CompleteB};
use ustat_core::design::{design_stats, expected_stats, save_design, DesignScalars, DesignSpec};
use ustat_core::distribution::{distribution_by_name, Dataset, DEFAULT_PRODUCT_CAP};
use ustat_core::estimator::estimate_incomplete;
use ustat_core::experiments::{self, resolve_profile, ExperimentConfig, ExperimentKind, ProfileChoice};
use ustat_core::kernel::kernel_by_name;
use ustat_core::rng::{derive_seed, replicate_rng};
use ustat_core::sensitivity::{
    alpha, generic_worst_case, profile, worst_case_profile, Coefficient, McConfig, Method, Provenance,
    SensitivityProfile,
};
use ustat_core::Error;

#[derive(Parser)]
#[command(name = "ustat", version, about = "Incomplete U-statistics: estimates, designs, sensitivity constants and bounds")]
struct Cli {
    /// Master seed; drawn from the clock when omitted and always echoed on stderr
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core); results do not depend on it
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (JSON for single results, CSV for tables)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate an incomplete U-statistic on a dataset
    Estimate(EstimateArgs),
    /// Incidence statistics A, B, C of a design
    DesignStats(DesignArgs),
    /// Sensitivity constants of a kernel under a distribution
    Sensitivity(SensitivityArgs),
    /// Evaluate one concentration bound
    Bound(BoundArgs),
    /// Tabulate the bounds over a grid and check dominance over Arcones
    Compare(CompareArgs),
    /// Run a Monte Carlo or exact verification experiment
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    kernel: String,
    /// CSV file, one point per row
    #[arg(long, conflicts_with = "distribution")]
    data: Option<PathBuf>,
    /// First CSV line is a header
    #[arg(long)]
    header: bool,
    /// Sample the data from a built-in distribution instead
    #[arg(long, requires = "n")]
    distribution: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// complete, partition, random[:M[:seed]] or file:<path>
    #[arg(long, default_value = "complete")]
    design: DesignSpec,
    #[arg(long = "M")]
    big_m: Option<usize>,
}

#[derive(Args)]
struct DesignArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value = "random")]
    design: DesignSpec,
    #[arg(long = "M")]
    big_m: Option<usize>,
    /// Include every R_k and nonzero R_kl
    #[arg(long)]
    full: bool,
    /// Also write the design file here
    #[arg(long)]
    write: Option<PathBuf>,
}

#[derive(Args)]
struct SensitivityArgs {
    #[arg(long)]
    kernel: String,
    #[arg(long, visible_alias = "dist")]
    distribution: String,
    /// exact, auto, mc or worst-case
    #[arg(long, default_value = "auto", conflicts_with_all = ["exact", "mc"])]
    method: ProfileChoice,
    /// Shorthand for --method exact
    #[arg(long, conflicts_with = "mc")]
    exact: bool,
    /// Shorthand for --method mc --outer N
    #[arg(long, value_name = "N")]
    mc: Option<usize>,
    #[arg(long)]
    outer: Option<usize>,
    #[arg(long)]
    inner: Option<usize>,
    #[arg(long)]
    gamma_candidates: Option<usize>,
    /// Largest product space enumerated exactly
    #[arg(long, default_value_t = DEFAULT_PRODUCT_CAP)]
    cap: u64,
}

#[derive(Args)]
struct BoundArgs {
    /// hoeffding, arcones, maurer, incomplete, complete, complete-worst-case,
    /// random-design, subgauss-lower or subgauss-sqrt
    #[arg(long)]
    which: BoundKind,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long = "M")]
    big_m: Option<usize>,
    #[arg(long, conflicts_with = "delta")]
    t: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Design-side failure probability of the random-design bound (default: delta)
    #[arg(long)]
    delta2: Option<f64>,
    /// Design whose A, B, C enter the bound (needs --n and --m)
    #[arg(long, conflicts_with = "a")]
    design: Option<DesignSpec>,
    #[arg(long, requires_all = ["b", "c"])]
    a: Option<f64>,
    #[arg(long, requires_all = ["a", "c"])]
    b: Option<f64>,
    #[arg(long, requires_all = ["a", "b"])]
    c: Option<f64>,
    /// Kernel whose sensitivity constants are used
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long, visible_alias = "dist", requires = "kernel")]
    distribution: Option<String>,
    /// Source of the constants: exact, auto, mc, worst-case (or worst), or
    /// file:<json> holding a profile as printed by `sensitivity`
    #[arg(long, default_value = "auto")]
    profile: ProfileArg,
    #[arg(long, conflicts_with = "kernel")]
    sigma1: Option<f64>,
    #[arg(long, conflicts_with = "kernel")]
    sigma_m: Option<f64>,
    #[arg(long, conflicts_with = "kernel")]
    beta: Option<f64>,
    #[arg(long, conflicts_with = "kernel")]
    gamma: Option<f64>,
    /// Var(U) for the Maurer bound
    #[arg(long)]
    var_u: Option<f64>,
    /// E[U_W] for subgauss-lower, observed U_W for subgauss-sqrt
    #[arg(long)]
    u: Option<f64>,
    /// Use the relaxed B = m²(m-1)²/n² of the complete design
    #[arg(long)]
    relaxed_b: bool,
    /// Evaluate even when a validity check fails
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// `default` or e.g. "m=2..4; n=10,100; t=0.01:1:3; sigma1=0,1"
    #[arg(long, default_value = "default")]
    grid: bounds::BoundGrid,
}

#[derive(Args)]
struct ExperimentArgs {
    /// tail-validity, coverage, design-concentration, efron-stein, budget-sweep or subgauss
    kind: ExperimentKind,
    /// key = value file; keys absent from it keep their defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override single keys, e.g. --set n=30
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Run even when a bound's validity check fails
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Debug)]
enum ProfileArg {
    Choice(ProfileChoice),
    File(PathBuf),
}

impl std::str::FromStr for ProfileArg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.strip_prefix("file:") {
            Some(path) => Ok(ProfileArg::File(PathBuf::from(path))),
            None => s.parse().map(ProfileArg::Choice),
        }
    }
}

/// A profile JSON file: either a bare profile or the output of `sensitivity`.
fn load_profile(path: &Path) -> CliResult<SensitivityProfile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read profile {}: {e}", path.display())))?;
    let mut value: Value =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    if let Some(inner) = value.get_mut("profile") {
        value = inner.take();
    }
    let profile: SensitivityProfile =
        serde_json::from_value(value).map_err(|e| Failure::Usage(format!("{}: not a profile: {e}", path.display())))?;
    profile.validate()?;
    Ok(profile)
}

/// Failure classes, each with its own exit status.
enum Failure {
    Usage(String),
    Validity(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Validity(_) => 2,
            Failure::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Validity(m) | Failure::Internal(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ValidityFlag(_) => Failure::Validity(e.to_string()),
            Error::RangeViolation { .. } | Error::NonFinite(_) => Failure::Internal(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Internal(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ustat: error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn clock_seed() -> u64 {
    let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_nanos()).unwrap_or(0);
    derive_seed(nanos as u64, "cli/clock", u64::from(std::process::id()))
}

fn run(cli: Cli) -> CliResult<()> {
    let seed = cli.seed.unwrap_or_else(clock_seed);
    // an experiment reports its own seed, which may come from its config
    if !matches!(cli.command, Command::Experiment(_)) {
        eprintln!("ustat: seed = {seed}");
    }
    let threads = cli.threads.unwrap_or(0);
    if !matches!(cli.command, Command::Experiment(_)) {
        // a second global pool cannot be installed; ignore that case
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let out = cli.out.as_deref();
    match cli.command {
        Command::Estimate(a) => emit(out, &estimate(a, seed)?),
        Command::DesignStats(a) => emit(out, &design(a, seed)?),
        Command::Sensitivity(a) => emit(out, &sensitivity(a, seed)?),
        Command::Bound(a) => emit(out, &bound(a, seed)?),
        Command::Compare(a) => compare(a, out),
        Command::Experiment(a) => experiment(a, seed, cli.seed.is_some(), threads, out),
    }
}

/// Pretty JSON to `out`, or to stdout.
fn emit(out: Option<&Path>, value: &Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            eprintln!("ustat: wrote {}", path.display());
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn estimate(a: EstimateArgs, seed: u64) -> CliResult<Value> {
    let kernel = kernel_by_name(&a.kernel)?;
    let (data, source) = match (&a.data, &a.distribution) {
        (Some(path), _) => (Dataset::from_csv_path(path, a.header)?, json!(path.display().to_string())),
        (None, Some(name)) => {
            let n = a.n.ok_or_else(|| Failure::Usage("--distribution needs --n".into()))?;
            let dist = distribution_by_name(name)?;
            let data = dist.sample_dataset(&mut replicate_rng(seed, "cli/estimate/data", 0), n);
            (data, json!({"distribution": name, "n": n}))
        }
        (None, None) => return Err(Failure::Usage("give --data <csv> or --distribution <name> --n <n>".into())),
    };
    let spec = a.design.resolved(a.big_m, derive_seed(seed, "cli/estimate/design", 0))?;
    let design = spec.build(data.len(), kernel.degree(), None, 0)?;
    let est = estimate_incomplete(&kernel, &data, &design)?;
    Ok(json!({
        "seed": seed,
        "kernel": est.kernel,
        "data": source,
        "design": spec.to_string(),
        "n": design.n(),
        "m": design.m(),
        "M": design.len(),
        "value": est.value,
        "natural_value": kernel.to_natural(est.value),
        "eval_count": est.eval_count,
    }))
}

fn design(a: DesignArgs, seed: u64) -> CliResult<Value> {
    let spec = a.design.resolved(a.big_m, derive_seed(seed, "cli/design", 0))?;
    let d = spec.build(a.n, a.m, None, 0)?;
    if let Some(path) = &a.write {
        save_design(&d, path)?;
        eprintln!("ustat: wrote {}", path.display());
    }
    let s = design_stats(&d);
    let mut v = json!({
        "seed": seed,
        "design": spec.to_string(),
        "n": s.n,
        "m": s.m,
        "M": s.m_total,
        "A": s.a,
        "B": s.b,
        "C": s.c,
        "sum_R": s.sum_r(),
        "sum_R_pairs_ordered": s.sum_r_pair_ordered(),
    });
    if matches!(spec, DesignSpec::Random { .. }) {
        v["expected"] = json!(expected_stats(a.n, a.m, d.len())?);
    }
    if a.full {
        v["R"] = json!(s.r);
        v["R_pairs"] = s.r_pair.iter().map(|(&(k, l), &c)| json!([k, l, c])).collect();
    }
    Ok(v)
}

fn mc_config(seed: u64, a: &SensitivityArgs) -> McConfig {
    let base = McConfig::default();
    McConfig {
        seed,
        outer: a.outer.unwrap_or(base.outer),
        inner: a.inner.unwrap_or(base.inner),
        gamma_candidates: a.gamma_candidates.unwrap_or(base.gamma_candidates),
    }
}

fn sensitivity(a: SensitivityArgs, seed: u64) -> CliResult<Value> {
    let kernel = kernel_by_name(&a.kernel)?;
    let dist = distribution_by_name(&a.distribution)?;
    let mut mc = mc_config(seed, &a);
    let method = match (a.exact, a.mc) {
        (true, _) => ProfileChoice::Exact,
        (false, Some(n)) => {
            mc.outer = n;
            ProfileChoice::MonteCarlo
        }
        (false, None) => a.method,
    };
    let p = match method {
        ProfileChoice::Exact => profile(&kernel, &dist, &Method::Exact { cap: a.cap })?,
        ProfileChoice::Auto => profile(&kernel, &dist, &Method::Auto(mc))?,
        ProfileChoice::MonteCarlo => profile(&kernel, &dist, &Method::MonteCarlo(mc))?,
        ProfileChoice::WorstCase => worst_case_profile(&kernel),
    };
    let mut v = json!({
        "seed": seed,
        "kernel": a.kernel,
        "distribution": a.distribution,
        "method": method.to_string(),
        "certified": p.is_certified(),
        "profile": p,
    });
    if !p.is_certified() {
        v["certified_profile"] = json!(p.certified());
    }
    Ok(v)
}

/// Caller-supplied constants; missing ones fall back to the worst case.
fn supplied_profile(a: &BoundArgs) -> Option<SensitivityProfile> {
    if a.sigma1.is_none() && a.sigma_m.is_none() && a.beta.is_none() && a.gamma.is_none() {
        return None;
    }
    let worst = generic_worst_case();
    let pick = |v: Option<f64>, fallback: Coefficient| match v {
        Some(x) => Coefficient::new(x, Provenance::Supplied),
        None => fallback,
    };
    let beta = pick(a.beta, worst.beta);
    let gamma = pick(a.gamma, worst.gamma);
    let provenance = if beta.provenance == gamma.provenance {
        beta.provenance
    } else {
        Provenance::WorstCase
    };
    Some(SensitivityProfile {
        sigma1_sq: pick(a.sigma1, worst.sigma1_sq),
        sigma_m_sq: pick(a.sigma_m, worst.sigma_m_sq),
        sigma_k_sq: None,
        alpha: Coefficient::new(alpha(beta.value, gamma.value), provenance),
        beta,
        gamma,
        gamma_search: None,
    })
}

fn bound(a: BoundArgs, seed: u64) -> CliResult<Value> {
    // the random-design bound's precondition is checked before anything else
    if let (BoundKind::RandomDesign, Some(n), Some(big_m), false) = (a.which, a.n, a.big_m, a.force) {
        let ln2n = (n as f64).ln().powi(2);
        if (big_m as f64) < ln2n {
            return Err(Failure::Validity(format!(
                "random-design bound needs M >= ln²n = {ln2n:.3}, got M = {big_m}; pass --force to evaluate anyway"
            )));
        }
    }
    let kernel = a.kernel.as_deref().map(kernel_by_name).transpose()?;
    let m = a.m.or(kernel.as_ref().map(|k| k.degree()));
    let supplied = supplied_profile(&a);
    let prof = match (&a.profile, &kernel, &a.distribution) {
        (ProfileArg::File(path), _, _) => {
            if supplied.is_some() {
                return Err(Failure::Usage("give either --profile file:<json> or explicit constants, not both".into()));
            }
            Some(load_profile(path)?)
        }
        (ProfileArg::Choice(c), Some(k), Some(d)) => Some(resolve_profile(k, &distribution_by_name(d)?, *c, seed)?),
        (ProfileArg::Choice(ProfileChoice::WorstCase), Some(k), None) => Some(worst_case_profile(k)),
        (ProfileArg::Choice(_), Some(_), None) => {
            return Err(Failure::Usage("--kernel needs --distribution unless --profile worst-case".into()))
        }
        (ProfileArg::Choice(ProfileChoice::WorstCase), None, _) if supplied.is_none() => Some(generic_worst_case()),
        (ProfileArg::Choice(_), None, _) => supplied,
    };
    let prof = prof.or_else(|| {
        let needs_profile = !matches!(
            a.which,
            BoundKind::Maurer | BoundKind::SubgaussLower | BoundKind::SubgaussSqrt
        );
        if needs_profile {
            eprintln!("ustat: no constants given; using the worst case σ² = 1, β = γ = 8");
        }
        Some(generic_worst_case())
    });
    let stats = match (&a.design, a.a) {
        (Some(spec), _) => {
            let n = a.n.ok_or_else(|| Failure::Usage("--design needs --n".into()))?;
            let m = m.ok_or_else(|| Failure::Usage("--design needs --m or --kernel".into()))?;
            let d = spec.resolved(a.big_m, derive_seed(seed, "cli/bound/design", 0))?.build(n, m, None, 0)?;
            Some(design_stats(&d).scalars())
        }
        (None, Some(av)) => Some(DesignScalars {
            a: av,
            b: a.b.unwrap_or_default(),
            c: a.c.unwrap_or_default(),
        }),
        (None, None) => None,
    };
    let input = BoundInput {
        n: a.n,
        m,
        big_m: a.big_m,
        t: a.t,
        delta: a.delta,
        delta2: a.delta2,
        stats,
        profile: prof.clone(),
        var_u: a.var_u,
        u: a.u,
        complete_b: if a.relaxed_b { CompleteB::Relaxed } else { CompleteB::Exact },
    };
    let report: BoundReport = bounds::evaluate(a.which, &input)?;
    if !report.is_valid() {
        let failed: Vec<String> = report
            .flags
            .iter()
            .filter(|f| !f.ok)
            .map(|f| format!("{} ({})", f.name, f.detail))
            .collect();
        if !a.force {
            return Err(Failure::Validity(format!(
                "{}; pass --force to report the bound anyway",
                failed.join(", ")
            )));
        }
        eprintln!("ustat: warning: validity check failed: {}", failed.join(", "));
    }
    let mut v = json!({"seed": seed, "report": report});
    if let Some(p) = prof {
        v["profile"] = json!(p);
    }
    if let Some(s) = stats {
        v["design_scalars"] = json!(s);
    }
    Ok(v)
}

fn compare(a: CompareArgs, out: Option<&Path>) -> CliResult<()> {
    let rows = bounds::compare_grid(&a.grid)?;
    let dominance = bounds::dominance_check_vs_arcones(&a.grid)?;
    let summary = json!({
        "rows": rows.len(),
        "dominance_points": dominance.points,
        "strictly_smaller": dominance.strictly_smaller,
        "violations": dominance.violations.len(),
    });
    match out {
        Some(path) => {
            experiments::write_csv_rows(&rows, std::io::BufWriter::new(std::fs::File::create(path)?))?;
            eprintln!("ustat: wrote {}", path.display());
            emit(None, &summary)?;
        }
        None => {
            experiments::write_csv_rows(&rows, std::io::stdout().lock())?;
            eprintln!("ustat: {summary}");
        }
    }
    if dominance.violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Internal(format!(
            "{} grid points where the complete bound exceeds Arcones'",
            dominance.violations.len()
        )))
    }
}

fn experiment(a: ExperimentArgs, seed: u64, seed_given: bool, threads: usize, out: Option<&Path>) -> CliResult<()> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::from_path(path, Some(a.kind))?,
        None => ExperimentConfig::new(a.kind),
    };
    for pair in &a.set {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got `{pair}`")))?;
        cfg.set(key.trim(), value.trim())?;
    }
    // an explicit --seed wins over the config file
    if seed_given || a.config.is_none() {
        cfg.seed = seed;
    }
    eprintln!("ustat: seed = {}", cfg.seed);
    cfg.force |= a.force;
    if let Some(path) = out {
        cfg.out = Some(path.to_path_buf());
    }
    let output = experiments::run_with_threads(&cfg, threads)?;
    let failures: Vec<Value> = output
        .failures()
        .map(|r| json!({"check": r.check, "parameter": r.parameter, "value": r.value, "empirical": r.empirical, "bound": r.bound}))
        .collect();
    let mut summary = json!({
        "kind": output.kind,
        "seed": output.seed,
        "rows": output.rows.len(),
        "passed": output.rows.len() - failures.len(),
        "failed": failures,
    });
    match &cfg.out {
        Some(path) => {
            let sidecar = output.save(path)?;
            eprintln!("ustat: wrote {} and {}", path.display(), sidecar.display());
            summary["csv"] = json!(path.display().to_string());
            summary["sidecar"] = json!(sidecar.display().to_string());
            emit(None, &summary)?;
        }
        None => {
            output.write_csv(std::io::stdout().lock())?;
            eprintln!("ustat: {summary}");
        }
    }
    if output.all_pass() {
        Ok(())
    } else {
        Err(Failure::Internal(format!(
            "{} of {} checks failed",
            output.rows.len() - output.rows.iter().filter(|r| r.pass).count(),
            output.rows.len()
        )))
    }
}
