//! Subcommands. Tables go to `--out` (or stdout); summaries go to stderr,
//! except for `classify` and `audit`, whose summary is their output.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use isoprofile::criteria::prop_lip_verdict;
use isoprofile::phiexp::classify;
use isoprofile::poincare::{convergence_diagnostic, ks_critical_1pct, ks_statistic, orthant_chi2, sample_pushforward};
use isoprofile::profile::{bound_audit, bound_curve, half_line_slack, AUDIT_TOLERANCE};
use isoprofile::radial::RadialMeasure;
use isoprofile::transport::{TransportMap, TransportOptions};

use crate::config::Config;
use crate::spec::{parse_phi, DensitySpec};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "isoprofile", version, about = "Radial transports from the Gaussian, Poincare limits and isoperimetric bounds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// gaussian | scaled-gaussian:c=<v> | exp-power:p=<v> | q-exp:q=<v>,p=<v> | phi:<file>,p=<v> | table:<file>
    #[arg(long)]
    pub density: Option<String>,
    /// Dimension n.
    #[arg(long)]
    pub n: Option<usize>,
    /// Output CSV path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Tolerance of the command's check (see each subcommand).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Grid size (transport nodes, profile points, or verify radii).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Smallest CDF and tail value on the transport grid.
    #[arg(long = "cdf-floor")]
    pub cdf_floor: Option<f64>,
    /// File of key=value lines supplying any of the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the transport; CSV r,sigma,sigma_prime,rho. --tol sets the tail-growth threshold.
    Transport(Common),
    /// Lower bound I[gamma_1](a)/L; CSV a,bound,certified.
    Profile(Common),
    /// Poincare-limit convergence and sampling checks; CSV N,sup_error,l1_error.
    /// --tol is the allowed relative increase between consecutive N (default 0.1).
    Verify {
        #[command(flatten)]
        common: Common,
        /// Sphere dimensions N, comma separated.
        #[arg(long = "sphere-dims", value_delimiter = ',')]
        sphere_dims: Vec<usize>,
        /// Monte-Carlo sample count at the largest N (0 skips sampling).
        #[arg(long)]
        count: Option<usize>,
        /// Write the samples as CSV x1,...,xn.
        #[arg(long)]
        points: Option<PathBuf>,
    },
    /// Classify the family exp_phi(-r^p/p).
    Classify {
        /// identity | power:q=<v> | poly:<c0>,<c1>,... | table:<file> | <file>
        #[arg(long)]
        phi: Option<String>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Randomized 1-D audit of mu+ >= I[gamma_1](a)/L. --tol is the violation slack (default 1e-9).
    Audit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
    },
}

const DEFAULT_PROFILE_GRID: usize = 101;
const DEFAULT_VERIFY_GRID: usize = 201;
const DEFAULT_COUNT: usize = 10_000;
const DEFAULT_TRIALS: usize = 10_000;
const DEFAULT_SLACK: f64 = 0.1;

fn load_config(path: &Option<PathBuf>) -> Result<Config, CliError> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

/// Flags merged with the config file.
struct Resolved {
    cfg: Config,
    density: DensitySpec,
    n: usize,
    out: Option<PathBuf>,
    seed: u64,
    tol: Option<f64>,
    grid: Option<usize>,
    cdf_floor: Option<f64>,
}

fn resolve(c: &Common) -> Result<Resolved, CliError> {
    let cfg = load_config(&c.config)?;
    let density: String = cfg.pick(c.density.clone(), "density")?.ok_or_else(|| CliError::spec("--density is required"))?;
    let n = cfg.pick(c.n, "n")?.unwrap_or(1);
    if n == 0 {
        return Err(CliError::spec("--n must be at least 1"));
    }
    Ok(Resolved {
        density: density.parse()?,
        n,
        out: cfg.pick(c.out.clone(), "out")?,
        seed: cfg.pick(c.seed, "seed")?.unwrap_or(0),
        tol: cfg.pick(c.tol, "tol")?,
        grid: cfg.pick(c.grid, "grid")?,
        cdf_floor: cfg.pick(c.cdf_floor, "cdf-floor")?,
        cfg,
    })
}

impl Resolved {
    fn measure(&self) -> Result<RadialMeasure, CliError> {
        Ok(RadialMeasure::new(self.density.build()?, self.n)?)
    }

    fn transport(&self, grid_is_nodes: bool) -> Result<TransportMap, CliError> {
        let mut options = TransportOptions::default();
        if let Some(f) = self.cdf_floor {
            options.cdf_floor = f;
        }
        if grid_is_nodes {
            if let Some(g) = self.grid {
                options.nodes = g;
            }
            if let Some(t) = self.tol {
                options.growth_threshold = t;
            }
        }
        Ok(TransportMap::build(Arc::new(self.measure()?), options)?)
    }

    fn sink(&self) -> Result<Box<dyn Write>, CliError> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?)),
            None => Box::new(BufWriter::new(io::stdout())),
        })
    }
}

fn fmt_l(l: f64) -> String {
    if l.is_finite() {
        format!("{l}")
    } else {
        "+inf".into()
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Transport(c) => cmd_transport(&c),
        Command::Profile(c) => cmd_profile(&c),
        Command::Verify { common, sphere_dims, count, points } => cmd_verify(&common, sphere_dims, count, points),
        Command::Classify { phi, p, n, config } => cmd_classify(phi, p, n, &config),
        Command::Audit { common, trials } => cmd_audit(&common, trials),
    }
}

pub fn cmd_transport(c: &Common) -> Result<(), CliError> {
    let r = resolve(c)?;
    let map = r.transport(true)?;
    let mut out = r.sink()?;
    map.write_csv(&mut out)?;
    out.flush()?;
    let lip = map.lipschitz();
    let mut err = io::stderr().lock();
    write!(err, "L = {}", fmt_l(lip.value))?;
    if let Some(u) = lip.unbounded {
        write!(err, " ({u})")?;
    }
    writeln!(err)?;
    match prop_lip_verdict(map.measure().density(), r.n, None) {
        Ok(mut report) => {
            report.cross_validate(&map);
            writeln!(err, "verdict = {}", report.verdict)?;
        }
        Err(e) => writeln!(err, "verdict unavailable: {e}")?,
    }
    Ok(())
}

pub fn cmd_profile(c: &Common) -> Result<(), CliError> {
    let r = resolve(c)?;
    let map = r.transport(false)?;
    let curve = bound_curve(&map, r.grid.unwrap_or(DEFAULT_PROFILE_GRID));
    let mut out = r.sink()?;
    curve.write_csv(&mut out)?;
    out.flush()?;
    let mut err = io::stderr().lock();
    writeln!(err, "L = {}", fmt_l(curve.lipschitz))?;
    writeln!(err, "a=1/2 certified = {}", curve.edge_case_half)?;
    Ok(())
}

pub fn cmd_verify(c: &Common, dims: Vec<usize>, count: Option<usize>, points: Option<PathBuf>) -> Result<(), CliError> {
    let r = resolve(c)?;
    let dims = if dims.is_empty() {
        match r.cfg.get("sphere-dims") {
            Some(raw) => raw
                .split(',')
                .map(|v| v.trim().parse::<usize>().map_err(|_| CliError::spec(format!("sphere-dims entry \"{v}\""))))
                .collect::<Result<Vec<_>, _>>()?,
            None => vec![100, 10_000],
        }
    } else {
        dims
    };
    let count = r.cfg.pick(count, "count")?.unwrap_or(DEFAULT_COUNT);
    let points = r.cfg.pick(points, "points")?;
    let map = r.transport(false)?;

    // grid of radii |x| spanning the bulk of μ_n^f
    let m = r.grid.unwrap_or(DEFAULT_VERIFY_GRID).max(2);
    let grid: Vec<f64> = (0..m).map(|k| map.measure().radius_at_cdf((k as f64 + 0.5) / m as f64)).collect();
    let table = convergence_diagnostic(&map, &dims, &grid)?;
    let mut out = r.sink()?;
    table.write_csv(&mut out)?;
    out.flush()?;

    let mut err = io::stderr().lock();
    let slack = r.tol.unwrap_or(DEFAULT_SLACK);
    let mut failures = Vec::new();
    if !table.is_monotone(slack) {
        failures.push("errors do not decrease with N".to_string());
    }
    if count > 0 {
        let big_n = *dims.iter().max().ok_or_else(|| CliError::spec("no sphere dimensions"))?;
        let batch = sample_pushforward(&map, big_n, count, r.seed)?;
        if let Some(p) = &points {
            let mut w = BufWriter::new(File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?);
            batch.write_csv(&mut w)?;
            w.flush()?;
        }
        let ks = ks_statistic(&batch, map.measure())?;
        let crit = ks_critical_1pct(count);
        writeln!(err, "ks = {ks:e} (critical {crit:e}) at N = {big_n}, count = {count}")?;
        if ks > crit {
            failures.push(format!("KS statistic {ks:e} above {crit:e}"));
        }
        if r.n <= 3 {
            let chi = orthant_chi2(&batch)?;
            writeln!(err, "orthant chi2 = {:.4} (df {}, critical {})", chi.statistic, chi.df, chi.critical)?;
            if !chi.passed {
                failures.push("orthant counts not uniform".into());
            }
        }
    }
    if failures.is_empty() {
        writeln!(err, "verification passed")?;
        Ok(())
    } else {
        Err(CliError::Verification(failures.join("; ")))
    }
}

pub fn cmd_classify(phi: Option<String>, p: Option<f64>, n: Option<usize>, config: &Option<PathBuf>) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let phi_raw: String = cfg.pick(phi, "phi")?.ok_or_else(|| CliError::spec("--phi is required"))?;
    let p: f64 = cfg.pick(p, "p")?.ok_or_else(|| CliError::spec("--p is required"))?;
    let n: usize = cfg.pick(n, "n")?.unwrap_or(1);
    if !(p > 0.0 && p.is_finite()) || n == 0 {
        return Err(CliError::spec("p must be positive and n at least 1"));
    }
    let phi = parse_phi(&phi_raw)?;
    let c = classify(&phi, p, n);
    let yes_no = if c.integrable { "yes" } else { "no" };
    println!("integrable={yes_no} lipschitz={} clause={} R_phi={}", c.lipschitz, c.clause, fmt_l(c.r_phi));
    Ok(())
}

pub fn cmd_audit(c: &Common, trials: Option<usize>) -> Result<(), CliError> {
    let r = resolve(c)?;
    if r.n != 1 {
        return Err(CliError::Precondition(format!("the audit runs in dimension 1, got n = {}", r.n)));
    }
    let trials = r.cfg.pick(trials, "trials")?.unwrap_or(DEFAULT_TRIALS);
    let map = r.transport(false)?;
    let measure = map.measure();
    let report = bound_audit(measure, &map, trials, r.seed)?;
    let tol = r.tol.unwrap_or(AUDIT_TOLERANCE);
    let tight = half_line_slack(measure, &map, 99)?;
    println!(
        "violations={} trials={} L={} min_slack={:e} half_line_slack={:e}",
        report.violations,
        report.trials,
        fmt_l(report.lipschitz),
        report.min_slack,
        tight
    );
    if let Some(w) = &report.witness {
        println!("witness={} a={} mu_plus={} bound={}", w.set, w.a, w.mu_plus, w.bound);
    }
    if report.min_slack < -tol {
        return Err(CliError::BoundViolation(format!("minimal slack {:e} below -{tol:e}", report.min_slack)));
    }
    Ok(())
}
