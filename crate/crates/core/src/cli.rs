//! Command-line front end. Every run writes its outputs plus a
//! `manifest.json` listing them into one output directory.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure (solver
//! non-convergence, spectral guard), 64 usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::confined::{
    build_confined, conditioning_limit_check, occupation, reversibility_defect, sample_path, survival_identity_check,
    total_variation, DENSE_LIMIT,
};
use crate::error::{Error, Result};
use crate::geometry::{discretize, DomainConfig, LatticeDomain};
use crate::spectral::{assemble, principal_eigenpair_with, EigenOptions, EigenPair, Normalization, SolverKind};
use crate::verify::{convergence_study, ReferenceEigenfunction, StudyOptions};
use crate::walkstats::{
    annulus_ruin, annulus_survival, continuum_inner_hit, default_tilt, exact_annulus_ruin, exact_annulus_survival,
    exact_hyperplane_avoidance, reflection_coupling, tilted_exit_point, AnnulusSetup, McEstimate, WalkConfig,
};

/// Overrides the default output directory when `--out` is absent.
pub const OUT_DIR_ENV: &str = "DIRICHLET_LATTICE_OUT";
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "dirichlet-lattice", version, about = "Principal Dirichlet eigenpairs of lattice domains")]
struct Cli {
    /// Output directory or primary output file (default: $DIRICHLET_LATTICE_OUT or ./out)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for replica and scale fan-out
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Discretize a domain: sites, boundary and distance field
    Discretize(ConfigArg),
    /// Principal eigenpair of the killed walk
    Eigen(EigenArgs),
    /// The confined (Doob-transformed) walk
    #[command(subcommand)]
    Confined(ConfinedCmd),
    /// Monte Carlo estimates for the free walk
    #[command(subcommand)]
    Mc(McCmd),
    /// Exact linear-solve oracles
    #[command(subcommand)]
    Oracle(OracleCmd),
    /// Bound constants and reference comparisons
    #[command(subcommand)]
    Verify(VerifyCmd),
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// JSON domain config: {"kind": ..., "dim": ..., "N": ...}
    #[arg(long)]
    config: PathBuf,
}

#[derive(Debug, Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// l2, l1, sup or point
    #[arg(long, default_value = "l2")]
    normalization: Normalization,
}

#[derive(Debug, Args)]
struct EigenArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    solver: SolverArgs,
}

/// Either a domain config to solve, or a pair written by `eigen`.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct PairSource {
    /// JSON domain config, solved with the default tolerance
    #[arg(long)]
    config: Option<PathBuf>,
    /// pair.csv from `eigen`; its JSON sidecar must sit next to it
    #[arg(long)]
    pair: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Which {
    Kernel,
    Survival,
    Conditioning,
    Occupation,
    All,
}

#[derive(Debug, Subcommand)]
enum ConfinedCmd {
    /// Sample one confined path
    Sample {
        #[command(flatten)]
        source: PairSource,
        /// Comma-separated start site (default: site nearest the origin)
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        start: Vec<i32>,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Kernel checks, survival and conditioning identities, occupation
    Check {
        #[command(flatten)]
        source: PairSource,
        #[arg(long, value_enum, default_value = "all")]
        which: Which,
        /// Time horizon (default: 2000 for survival, 50 for conditioning)
        #[arg(long)]
        t: Option<usize>,
        /// Steps of the occupation run
        #[arg(long, default_value_t = 1_000_000)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct WalkArgs {
    #[arg(long = "d", alias = "dim", default_value_t = 3)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100_000)]
    replicas: usize,
    #[arg(long, default_value_t = 10_000_000)]
    step_cap: u64,
}

impl WalkArgs {
    fn config(&self) -> WalkConfig {
        WalkConfig {
            dim: self.dim,
            seed: self.seed,
            replicas: self.replicas,
            step_cap: self.step_cap,
        }
    }
}

#[derive(Debug, Subcommand)]
enum McCmd {
    /// Leave B_{alpha R} before entering B_R, from --x
    Ruin {
        #[command(flatten)]
        walk: WalkArgs,
        #[arg(long = "R", alias = "radius")]
        radius: u32,
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        /// Comma-separated start site
        #[arg(long = "x", alias = "start", value_delimiter = ',', allow_hyphen_values = true)]
        start: Vec<i32>,
        /// Estimate survival of the annulus up to this time instead
        #[arg(long)]
        horizon: Option<u64>,
    },
    /// Mirror coupling across {z_1 = -1} inside B(0, R)
    Coupling {
        #[command(flatten)]
        walk: WalkArgs,
        #[arg(long = "R", alias = "radius")]
        radius: u32,
        /// Tilt c, or `auto` for ln(1/gamma)/4 with gamma estimated at R = 64
        #[arg(long, default_value = "auto")]
        tilt: String,
    },
}

#[derive(Debug, Subcommand)]
enum OracleCmd {
    /// Exact tilted exit profile of B(0, R)
    Exit {
        /// Dimension, when --u is absent
        #[arg(long = "d", alias = "dim", default_value_t = 2)]
        dim: usize,
        #[arg(long = "R", alias = "radius")]
        radius: u32,
        #[arg(long, default_value_t = 0.0)]
        tilt: f64,
        /// Comma-separated start site (default: origin)
        #[arg(long = "u", alias = "start", value_delimiter = ',', allow_hyphen_values = true)]
        start: Vec<i32>,
    },
}

#[derive(Debug, Subcommand)]
enum VerifyCmd {
    /// Convergence study across scales
    Bounds {
        #[command(flatten)]
        config: ConfigArg,
        /// Comma-separated scales
        #[arg(long, value_delimiter = ',', default_value = "32,64,128,256")]
        scales: Vec<u32>,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// Bulk depth for the ratio bounds
        #[arg(long, default_value_t = 0.25)]
        eta: f64,
        /// Also write |phi_N - reference| per scale as CSV
        #[arg(long)]
        dump_errors: bool,
    },
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config: Option<PathBuf>,
    pub subcommand: String,
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    pub tool_version: String,
    pub wall_clock_seconds: f64,
    pub diagnostics: Value,
    /// Every file in the output directory written by this run, including
    /// the manifest.
    pub files: Vec<String>,
}

/// Serialized writer for one run's output directory.
///
/// `--out` names a directory, or a file (anything with an extension) that
/// receives the run's primary output; other files then go next to it.
struct Output {
    dir: PathBuf,
    primary: Option<String>,
    files: Vec<String>,
}

impl Output {
    fn new(target: PathBuf) -> Result<Self> {
        let (dir, primary) = if target.extension().is_some() {
            let dir = target.parent().map(Path::to_path_buf).unwrap_or_default();
            let name = target.file_name().map(|n| n.to_string_lossy().into_owned());
            (if dir.as_os_str().is_empty() { PathBuf::from(".") } else { dir }, name)
        } else {
            (target, None)
        };
        fs::create_dir_all(&dir)?;
        Ok(Output { dir, primary, files: Vec::new() })
    }

    /// Name for the primary output, honoring a file-valued `--out`.
    fn primary_name(&self, default: &str) -> String {
        self.primary.clone().unwrap_or_else(|| default.to_string())
    }

    /// `<primary stem>.json`, for sidecars of a CSV primary output.
    fn sidecar_name(&self, default: &str) -> String {
        match &self.primary {
            Some(p) => Path::new(p).with_extension("json").to_string_lossy().into_owned(),
            None => default.to_string(),
        }
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn load_config(path: &Path) -> Result<DomainConfig> {
    DomainConfig::from_json(&fs::read_to_string(path)?)
}

fn solve(domain: &LatticeDomain, tol: f64, normalization: Normalization) -> Result<EigenPair> {
    let opts = EigenOptions {
        tol,
        normalization,
        solver: SolverKind::Auto,
        max_matvecs: None,
    };
    principal_eigenpair_with(&assemble(domain), domain, &opts)
}

fn pair_csv(domain: &LatticeDomain, pair: &EigenPair) -> String {
    let mut s = String::new();
    for k in 1..=domain.dim() {
        let _ = write!(s, "x{k},");
    }
    s.push_str("phi\n");
    for (i, x) in domain.sites().enumerate() {
        for v in x {
            let _ = write!(s, "{v},");
        }
        let _ = writeln!(s, "{}", fmt_f64(pair.phi[i]));
    }
    s
}

fn pair_sidecar(domain: &LatticeDomain, pair: &EigenPair) -> Value {
    json!({
        "lambda": pair.lambda,
        "scaled_gap": (pair.scale as f64).powi(2) * (1.0 - pair.lambda),
        "residual": pair.residual,
        "iterations": pair.iterations,
        "normalization": pair.normalization,
        "N": pair.scale,
        "dim": pair.dim,
        "sites": domain.len(),
    })
}

#[derive(Deserialize)]
struct Sidecar {
    lambda: f64,
    normalization: Normalization,
    #[serde(rename = "N")]
    scale: u32,
    dim: usize,
}

/// Reads a pair written by `eigen` back into a domain and eigenpair. The
/// domain is the set of listed sites.
fn load_pair(path: &Path) -> Result<(LatticeDomain, EigenPair)> {
    let side: Sidecar = serde_json::from_str(&fs::read_to_string(path.with_extension("json"))?)?;
    let text = fs::read_to_string(path)?;
    let bad = |line: usize| Error::InvalidArgument(format!("{}: malformed row {line}", path.display()));
    let mut rows: Vec<(Vec<i32>, f64)> = Vec::new();
    for (k, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != side.dim + 1 {
            return Err(bad(k + 1));
        }
        let x = cols[..side.dim]
            .iter()
            .map(|c| c.trim().parse::<i32>().map_err(|_| bad(k + 1)))
            .collect::<Result<Vec<_>>>()?;
        let v = cols[side.dim].trim().parse::<f64>().map_err(|_| bad(k + 1))?;
        rows.push((x, v));
    }
    if rows.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let mut lo = rows[0].0.clone();
    let mut hi = rows[0].0.clone();
    for (x, _) in &rows {
        for k in 0..side.dim {
            lo[k] = lo[k].min(x[k]);
            hi[k] = hi[k].max(x[k]);
        }
    }
    let set: std::collections::HashSet<&[i32]> = rows.iter().map(|(x, _)| x.as_slice()).collect();
    let domain = LatticeDomain::from_predicate(side.dim, side.scale, &lo, &hi, None, |x| set.contains(x))?;
    let mut phi = vec![0.0; domain.len()];
    for (x, v) in &rows {
        phi[domain.index_of(x).expect("listed site")] = *v;
    }
    let kernel = assemble(&domain);
    let pair = EigenPair {
        lambda: side.lambda,
        residual: crate::spectral::residual(&kernel, side.lambda, &phi),
        phi: phi.into(),
        normalization: side.normalization,
        iterations: 0,
        scale: side.scale,
        dim: side.dim,
        origin_index: domain.origin_index(),
    };
    Ok((domain, pair))
}

fn pair_source(src: &PairSource) -> Result<(LatticeDomain, EigenPair, Option<PathBuf>)> {
    match (&src.config, &src.pair) {
        (Some(c), _) => {
            let cfg = load_config(c)?;
            let domain = discretize(&cfg.spec, cfg.scale)?;
            let pair = solve(&domain, 1e-12, Normalization::L2)?;
            Ok((domain, pair, Some(c.clone())))
        }
        (None, Some(p)) => {
            let (d, pair) = load_pair(p)?;
            Ok((d, pair, Some(p.clone())))
        }
        (None, None) => Err(Error::InvalidArgument("one of --config or --pair is required".into())),
    }
}

fn start_index(domain: &LatticeDomain, start: &[i32]) -> Result<usize> {
    if start.is_empty() {
        return Ok(domain.origin_index());
    }
    if start.len() != domain.dim() {
        return Err(Error::InvalidArgument(format!("start must have {} coordinates", domain.dim())));
    }
    domain
        .index_of(start)
        .ok_or_else(|| Error::InvalidArgument(format!("start {start:?} is not a site of the domain")))
}

fn check_walk_dim(dim: usize, start: &[i32]) -> Result<()> {
    if start.len() != dim {
        return Err(Error::InvalidArgument(format!(
            "start has {} coordinates, expected {dim}",
            start.len()
        )));
    }
    Ok(())
}

fn estimate_json(mc: &McEstimate) -> Value {
    json!({
        "estimate": mc.estimate,
        "ci_low": mc.ci_low,
        "ci_high": mc.ci_high,
        "std_err": mc.std_err,
        "replicas": mc.replicas,
        "resampled": mc.resampled,
    })
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
        b.extend(e);
    }
    base
}

struct Outcome {
    subcommand: &'static str,
    config: Option<PathBuf>,
    seed: Option<u64>,
    diagnostics: Value,
}

fn execute(command: Command, out: &mut Output) -> Result<Outcome> {
    match command {
        Command::Discretize(c) => {
            let cfg = load_config(&c.config)?;
            let domain = discretize(&cfg.spec, cfg.scale)?;
            out.write(&out.primary_name("domain.csv"), &domain.to_csv())?;
            Ok(Outcome {
                subcommand: "discretize",
                config: Some(c.config),
                seed: None,
                diagnostics: json!({
                    "sites": domain.len(),
                    "boundary_points": domain.boundary_len(),
                    "max_dist": domain.max_dist(),
                }),
            })
        }
        Command::Eigen(a) => {
            let cfg = load_config(&a.config.config)?;
            let domain = discretize(&cfg.spec, cfg.scale)?;
            let pair = solve(&domain, a.solver.tol, a.solver.normalization)?;
            out.write(&out.primary_name("pair.csv"), &pair_csv(&domain, &pair))?;
            let side = pair_sidecar(&domain, &pair);
            out.json(&out.sidecar_name("pair.json"), &side)?;
            Ok(Outcome {
                subcommand: "eigen",
                config: Some(a.config.config),
                seed: None,
                diagnostics: side,
            })
        }
        Command::Confined(ConfinedCmd::Sample {
            source,
            start,
            steps,
            seed,
        }) => {
            let (domain, pair, config) = pair_source(&source)?;
            let kernel = build_confined(&pair, &domain)?;
            let path = sample_path(&kernel, start_index(&domain, &start)?, steps, seed)?;
            let mut s = String::from("step");
            for k in 1..=domain.dim() {
                let _ = write!(s, ",x{k}");
            }
            s.push('\n');
            for (t, &i) in path.iter().enumerate() {
                let _ = write!(s, "{t}");
                for v in domain.site(i) {
                    let _ = write!(s, ",{v}");
                }
                s.push('\n');
            }
            out.write(&out.primary_name("path.csv"), &s)?;
            Ok(Outcome {
                subcommand: "confined sample",
                config,
                seed: Some(seed),
                diagnostics: json!({ "steps": steps, "lambda": pair.lambda }),
            })
        }
        Command::Confined(ConfinedCmd::Check {
            source,
            which,
            t,
            steps,
            seed,
        }) => {
            let (domain, pair, config) = pair_source(&source)?;
            let kernel = build_confined(&pair, &domain)?;
            let wants = |w: Which| which == w || which == Which::All;
            let mut report = json!({ "lambda": pair.lambda, "sites": domain.len() });
            if wants(Which::Kernel) {
                report["kernel"] = json!({
                    "max_row_defect": kernel.max_row_defect,
                    "max_reversibility_defect": reversibility_defect(&kernel, &pair.phi),
                });
            }
            if wants(Which::Survival) {
                report["survival"] = serde_json::to_value(survival_identity_check(&pair, &domain, t.unwrap_or(2000))?)?;
            }
            if wants(Which::Conditioning) {
                if domain.len() <= DENSE_LIMIT {
                    report["conditioning"] =
                        serde_json::to_value(conditioning_limit_check(&pair, &domain, t.unwrap_or(50))?)?;
                } else if which == Which::Conditioning {
                    return Err(Error::NotApplicable(format!(
                        "conditioning check needs at most {DENSE_LIMIT} sites, domain has {}",
                        domain.len()
                    )));
                }
            }
            if wants(Which::Occupation) {
                let counts = occupation(&kernel, domain.origin_index(), steps, seed)?;
                report["occupation"] = json!({
                    "steps": steps,
                    "seed": seed,
                    "total_variation": total_variation(&counts, &kernel.stationary),
                });
            }
            out.json(&out.primary_name("check.json"), &report)?;
            Ok(Outcome {
                subcommand: "confined check",
                config,
                seed: Some(seed),
                diagnostics: json!({ "sites": domain.len() }),
            })
        }
        Command::Mc(McCmd::Ruin {
            walk,
            radius,
            alpha,
            start,
            horizon,
        }) => {
            check_walk_dim(walk.dim, &start)?;
            let setup = AnnulusSetup { radius, alpha, start };
            let cfg = walk.config();
            let report = match horizon {
                None => {
                    let rep = annulus_ruin(&setup, &cfg)?;
                    let norm = setup.start.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
                    let continuum = (walk.dim >= 3).then(|| 1.0 - continuum_inner_hit(norm, radius as f64, alpha, walk.dim));
                    merge(
                        estimate_json(&rep.mc),
                        json!({
                            "oracle": exact_annulus_ruin(&setup)?,
                            "bound_ratio": rep.bound_ratio,
                            "dist_to_inner": rep.dist_to_inner,
                            "continuum": continuum,
                            "seed": cfg.seed,
                            "setup": setup,
                        }),
                    )
                }
                Some(h) => {
                    let rep = annulus_survival(&setup, &cfg, h)?;
                    merge(
                        estimate_json(&rep.mc),
                        json!({
                            "oracle": exact_annulus_survival(&setup, h)?,
                            "bound_ratio": rep.bound_ratio,
                            "dist_to_inner": rep.dist_to_inner,
                            "horizon": h,
                            "seed": cfg.seed,
                            "setup": setup,
                        }),
                    )
                }
            };
            out.json(&out.primary_name("ruin.json"), &report)?;
            Ok(Outcome {
                subcommand: "mc ruin",
                config: None,
                seed: Some(cfg.seed),
                diagnostics: json!({ "resampled": report["resampled"] }),
            })
        }
        Command::Mc(McCmd::Coupling { walk, radius, tilt }) => {
            let cfg = walk.config();
            let tilt = if tilt.eq_ignore_ascii_case("auto") {
                default_tilt(&cfg)?
            } else {
                tilt.parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("tilt must be a number or `auto`, got {tilt}")))?
            };
            let rep = reflection_coupling(radius, &cfg, tilt)?;
            let report = merge(
                estimate_json(&rep.tilted),
                json!({
                    "oracle": exact_hyperplane_avoidance(radius, walk.dim, tilt)?,
                    "bound_ratio": rep.scaled_tilted,
                    "tilt": tilt,
                    "untilted": merge(
                        estimate_json(&rep.avoid),
                        json!({ "oracle": exact_hyperplane_avoidance(radius, walk.dim, 0.0)? }),
                    ),
                    "successes": rep.successes,
                    "coincidence_violations": rep.coincidence_violations,
                    "ordering_violations": rep.ordering_violations,
                    "seed": cfg.seed,
                    "R": radius,
                }),
            );
            out.json(&out.primary_name("coupling.json"), &report)?;
            Ok(Outcome {
                subcommand: "mc coupling",
                config: None,
                seed: Some(cfg.seed),
                diagnostics: json!({
                    "ordering_violations": rep.ordering_violations,
                    "coincidence_violations": rep.coincidence_violations,
                }),
            })
        }
        Command::Oracle(OracleCmd::Exit {
            dim,
            radius,
            tilt,
            start,
        }) => {
            let start = if start.is_empty() { vec![0; dim] } else { start };
            let dim = start.len();
            let prof = tilted_exit_point(&start, radius, tilt)?;
            let mut s = String::new();
            for k in 1..=dim {
                let _ = write!(s, "z{k},");
            }
            s.push_str("value\n");
            for (z, v) in prof.points.iter().zip(&prof.values) {
                for c in z {
                    let _ = write!(s, "{c},");
                }
                let _ = writeln!(s, "{}", fmt_f64(*v));
            }
            out.write(&out.primary_name("exit.csv"), &s)?;
            let summary = json!({
                "R": radius,
                "tilt": tilt,
                "u": prof.start,
                "sum": prof.sum(),
                "sup": prof.sup(),
                "sup_scaled": prof.sup() * (radius as f64).powi(dim as i32 - 1),
                "max_min_ratio": prof.max_min_ratio(),
            });
            out.json(&out.sidecar_name("exit.json"), &summary)?;
            Ok(Outcome {
                subcommand: "oracle exit",
                config: None,
                seed: None,
                diagnostics: summary,
            })
        }
        Command::Verify(VerifyCmd::Bounds {
            config,
            scales,
            tol,
            eta,
            dump_errors,
        }) => {
            let cfg = load_config(&config.config)?;
            let opts = StudyOptions { tol, eta: Some(eta) };
            let study = convergence_study(&cfg.spec, &scales, &opts)?;
            out.json(&out.primary_name("report.json"), &study)?;
            if dump_errors {
                let reference = ReferenceEigenfunction::new(&cfg.spec)?;
                for &n in &scales {
                    let domain = discretize(&cfg.spec, n)?;
                    let pair = solve(&domain, tol, Normalization::L2)?;
                    let r = reference.sample(&domain);
                    let mut s = String::new();
                    for k in 1..=domain.dim() {
                        let _ = write!(s, "x{k},");
                    }
                    s.push_str("abs_error\n");
                    for (i, x) in domain.sites().enumerate() {
                        for v in x {
                            let _ = write!(s, "{v},");
                        }
                        let _ = writeln!(s, "{}", fmt_f64((pair.phi[i] - r[i]).abs()));
                    }
                    out.write(&format!("error_N{n}.csv"), &s)?;
                }
            }
            Ok(Outcome {
                subcommand: "verify bounds",
                config: Some(config.config),
                seed: None,
                diagnostics: json!({
                    "scales": scales,
                    "supnorm_rate": study.supnorm_rate,
                    "eigenvalue_rate": study.eigenvalue_rate,
                }),
            })
        }
    }
}

/// Runs the tool on `args` (including the program name) and returns the
/// process exit code: 0 success, 1 invalid input, 2 numerical failure,
/// 64 usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    if let Some(k) = cli.threads {
        // a pool may already exist when called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global();
    }
    match run_parsed(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_VALIDATION
            }
        }
    }
}

fn run_parsed(cli: Cli) -> Result<()> {
    let target = cli
        .out
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let started = Instant::now();
    let mut out = Output::new(target)?;
    let outcome = execute(cli.command, &mut out)?;
    let mut files = out.files.clone();
    files.push("manifest.json".into());
    let manifest = RunManifest {
        config: outcome.config,
        subcommand: outcome.subcommand.into(),
        seed: outcome.seed,
        output_dir: out.dir.clone(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        diagnostics: outcome.diagnostics,
        files,
    };
    out.json("manifest.json", &manifest)
}
