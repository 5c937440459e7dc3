//! Command-line front end.
//!
//! Every parameter is a flat key. Keys can come from a `key = value` file
//! given with `--config` or from `--key value` flags (underscores become
//! dashes on the command line); flags win over the file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, Write};
use std::str::FromStr;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Arg, ArgAction};

use crate::error::{Error, Result};
use crate::experiments::{
    branch_slopes, embedding_dataset, embedding_experiment, epsilon_sweep, lin_grid, log_grid, prepare_replica,
    evaluate_replica, EmbeddingConfig, PointwiseConfig,
};
use crate::io::{
    fmt_f64, read_matrix_csv, write_dataset_csv, write_eigenpairs_csv, write_embedding_csv, write_matrix_csv,
    write_residuals_csv, write_slopes_json, write_sweep_csv, SlopeReport,
};
use crate::kernel::{build_affinity, kernel_moments, Affinity, KernelConvention};
use crate::laplacian::{build_laplacian, smallest_eigenpairs, LaplacianKind};
use crate::manifold::{sample_dataset, DensitySpec};
use crate::noise::{add_noise, HetPhase, NoiseKind, NoiseModel};
use crate::sinkhorn::{approx_sym_sk, SkConfig, SkInit};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Generate,
    Sweep,
    Pointwise,
    Embed,
    Skdiag,
    Moments,
}

impl CommandKind {
    pub const ALL: [CommandKind; 6] = [
        CommandKind::Generate,
        CommandKind::Sweep,
        CommandKind::Pointwise,
        CommandKind::Embed,
        CommandKind::Skdiag,
        CommandKind::Moments,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Generate => "generate",
            CommandKind::Sweep => "sweep",
            CommandKind::Pointwise => "pointwise",
            CommandKind::Embed => "embed",
            CommandKind::Skdiag => "skdiag",
            CommandKind::Moments => "moments",
        }
    }
}

impl FromStr for CommandKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown command `{s}`")))
    }
}

/// `(key, help)`. Keys use underscores; flags use dashes.
const KEYS: &[(&str, &str)] = &[
    ("n", "number of samples [3000 for sweep/pointwise/skdiag, 1000 for generate/embed]"),
    ("m", "ambient dimension [2000]"),
    ("d", "intrinsic dimension [1]"),
    ("density", "sinusoidal | circle [sinusoidal; circle for embed]"),
    ("noise", "none | simple | heteroskedastic | iid [none; heteroskedastic for embed]"),
    ("sigma_out", "outlier noise level [0.1]"),
    ("p_out", "outlier probability for simple noise [0.1]"),
    ("het_phase", "per-sample | shared: phase draw of the heteroskedastic outlier probability [per-sample]"),
    ("epsilon", "kernel bandwidth [5e-4]"),
    ("eps_grid", "bandwidth grid start:stop:Klog or start:stop:Klin [1e-4:1e-2:10log]"),
    ("kind", "bistoch-un | bistoch-rw | dm-un | dm-rw [bistoch-rw]"),
    ("convention", "unscaled | normalized [unscaled]"),
    ("c_sk", "lower bound on scaling factors, normalized convention [0.01; 0 for embed]"),
    ("eps_sk", "Sinkhorn-Knopp residual tolerance [1e-3]"),
    ("max_iter", "Sinkhorn-Knopp iteration cap [50]"),
    ("sk_init", "rowsum | ones [rowsum]"),
    ("replicas", "number of replicas [20]"),
    ("seed", "base seed [0]"),
    ("slope_points", "points per branch in the slope fit [3]"),
    ("modes", "eigenpairs exported by embed [5]"),
    ("input", "matrix CSV for skdiag (skips data generation)"),
    ("output", "main output path [stdout]"),
    ("slopes_output", "slope JSON path for sweep"),
    ("eigen_output", "eigenpair CSV path for embed (first replica)"),
    ("matrix_output", "affinity matrix CSV path for skdiag"),
];

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

fn canonical_key(raw: &str) -> Option<&'static str> {
    let k = raw.trim().replace('-', "_");
    KEYS.iter().map(|(name, _)| *name).find(|name| *name == k)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub values: BTreeMap<&'static str, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Invocation {
    Run(RunConfig),
    /// Help text requested explicitly.
    Help(String),
}

fn clap_command() -> clap::Command {
    let mut cmd = clap::Command::new("bistoch")
        .about("Bi-stochastic graph Laplacian experiments")
        .arg(
            Arg::new("command")
                .required(true)
                .value_parser(CommandKind::ALL.map(|c| c.name()))
                .help("generate | sweep | pointwise | embed | skdiag | moments"),
        )
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("key = value file; flags override it"),
        );
    for (key, help) in KEYS {
        cmd = cmd.arg(
            Arg::new(*key)
                .long(flag_name(key))
                .value_name("VALUE")
                .action(ArgAction::Set)
                .allow_hyphen_values(true)
                .help(*help),
        );
    }
    cmd
}

pub fn usage() -> String {
    clap_command().render_help().to_string()
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<&'static str, String>> {
    let mut out = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("config line {}: expected `key = value`", no + 1)))?;
        let key = canonical_key(k).ok_or_else(|| Error::Usage(format!("unknown key `{}`", k.trim())))?;
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

/// Builds and validates a [`RunConfig`]. `args` excludes the program name.
pub fn parse_config<S: AsRef<str>>(args: &[S]) -> Result<Invocation> {
    let argv = std::iter::once("bistoch").chain(args.iter().map(|a| a.as_ref()));
    let matches = match clap_command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            return Ok(Invocation::Help(e.render().to_string()));
        }
        Err(e) => return Err(Error::Usage(e.render().to_string())),
    };
    let command: CommandKind = matches.get_one::<String>("command").expect("required").parse()?;
    let mut values = match matches.get_one::<String>("config") {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Usage(format!("cannot read config `{path}`: {e}")))?;
            parse_config_text(&text)?
        }
        None => BTreeMap::new(),
    };
    for (key, _) in KEYS {
        if let Some(v) = matches.get_one::<String>(key) {
            values.insert(*key, v.clone());
        }
    }
    let cfg = RunConfig { command, values };
    cfg.plan()?;
    Ok(Invocation::Run(cfg))
}

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> Error {
    Error::Usage(format!("invalid value `{value}` for key `{key}`: {why}"))
}

/// Parses a grid spec `start:stop:Klog` or `start:stop:Klin`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let err = |why: &str| bad("eps_grid", spec, why);
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, stop, count] = parts[..] else {
        return Err(err("expected start:stop:Klog or start:stop:Klin"));
    };
    let start: f64 = start.trim().parse().map_err(|_| err("bad start"))?;
    let stop: f64 = stop.trim().parse().map_err(|_| err("bad stop"))?;
    let count = count.trim();
    let (k, log) = if let Some(k) = count.strip_suffix("log") {
        (k, true)
    } else if let Some(k) = count.strip_suffix("lin") {
        (k, false)
    } else {
        return Err(err("count must end in `log` or `lin`"));
    };
    let k: usize = k.parse().map_err(|_| err("bad point count"))?;
    if k == 0 {
        return Err(err("need at least one point"));
    }
    if !(start > 0.0 && stop >= start && stop.is_finite()) {
        return Err(err("need 0 < start <= stop"));
    }
    Ok(if log { log_grid(start, stop, k) } else { lin_grid(start, stop, k) })
}

fn parse_density(s: &str) -> std::result::Result<DensitySpec, String> {
    match s {
        "sinusoidal" => Ok(DensitySpec::Sinusoidal1D),
        "circle" => Ok(DensitySpec::UniformCircle),
        other => other.parse().map_err(|_| "expected sinusoidal or circle".to_string()),
    }
}

fn parse_noise(s: &str) -> std::result::Result<Option<NoiseKind>, String> {
    match s {
        "none" => Ok(None),
        "het" => Ok(Some(NoiseKind::Heteroskedastic)),
        other => other
            .parse()
            .map(Some)
            .map_err(|_| "expected none, simple, heteroskedastic or iid".to_string()),
    }
}

/// Fully typed, validated work for one command.
#[derive(Clone, Debug)]
pub enum Plan {
    Generate {
        n: usize,
        spec: DensitySpec,
        m: Option<usize>,
        noise: Option<NoiseModel>,
        seed: u64,
    },
    Sweep {
        cfg: PointwiseConfig,
        grid: Vec<f64>,
        replicas: usize,
        seed: u64,
        slope_points: usize,
    },
    Pointwise {
        cfg: PointwiseConfig,
        epsilon: f64,
        seed: u64,
    },
    Embed {
        cfg: EmbeddingConfig,
        kind: LaplacianKind,
        modes: usize,
    },
    Skdiag {
        source: SkSource,
        sk: SkConfig,
    },
    Moments {
        d: usize,
    },
}

#[derive(Clone, Debug)]
pub enum SkSource {
    File(String),
    Generated {
        cfg: PointwiseConfig,
        epsilon: f64,
        seed: u64,
    },
}

struct Lookup<'a> {
    values: &'a BTreeMap<&'static str, String>,
}

impl Lookup<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T, F>(&self, key: &str, default: T, f: F) -> Result<T>
    where
        F: Fn(&str) -> std::result::Result<T, String>,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => f(v.trim()).map_err(|why| bad(key, v, why)),
        }
    }

    fn float(&self, key: &str, default: f64, check: fn(f64) -> bool, what: &str) -> Result<f64> {
        self.parsed(key, default, |s| match s.parse::<f64>() {
            Ok(v) if check(v) => Ok(v),
            Ok(_) => Err(format!("must be {what}")),
            Err(_) => Err("not a number".into()),
        })
    }

    fn count(&self, key: &str, default: usize, min: usize) -> Result<usize> {
        self.parsed(key, default, |s| match s.parse::<usize>() {
            Ok(v) if v >= min => Ok(v),
            Ok(_) => Err(format!("must be at least {min}")),
            Err(_) => Err("not a non-negative integer".into()),
        })
    }

    fn path(&self, key: &str) -> Option<String> {
        self.raw(key).map(str::to_string)
    }

    fn sk(&self, default_c: f64) -> Result<SkConfig> {
        Ok(SkConfig {
            c_sk: self.float("c_sk", default_c, |v| v >= 0.0 && v.is_finite(), "finite and non-negative")?,
            eps_sk: self.float("eps_sk", 1e-3, |v| v > 0.0 && v.is_finite(), "positive")?,
            max_iter: self.count("max_iter", 50, 1)?,
            init: self.parsed("sk_init", SkInit::RowSum, |s| {
                s.parse().map_err(|_| "expected rowsum or ones".to_string())
            })?,
        })
    }

    fn noise_model(&self, default: Option<NoiseKind>) -> Result<Option<NoiseModel>> {
        let kind = self.parsed("noise", default, parse_noise)?;
        let m = self.count("m", 2000, 1)?;
        let sigma_out = self.float("sigma_out", 0.1, |v| v > 0.0 && v.is_finite(), "positive")?;
        let p_out = self.float("p_out", 0.1, |v| (0.0..1.0).contains(&v), "in [0, 1)")?;
        let Some(kind) = kind else {
            return Ok(None);
        };
        let phase = self.het_phase()?;
        let model = NoiseModel { kind, m, sigma_out, p_out, phase };
        model.validate().map_err(|e| bad("m", &m.to_string(), e))?;
        Ok(Some(model))
    }

    fn pointwise(&self, n_default: usize) -> Result<PointwiseConfig> {
        let cfg = PointwiseConfig {
            n: self.count("n", n_default, 2)?,
            spec: self.parsed("density", DensitySpec::Sinusoidal1D, parse_density)?,
            intrinsic_dim: self.count("d", 1, 1)?,
            kind: self.parsed("kind", LaplacianKind::BistochRw, |s| {
                s.parse().map_err(|_| "expected bistoch-un, bistoch-rw, dm-un or dm-rw".to_string())
            })?,
            sk: self.sk(0.01)?,
            convention: self.parsed("convention", KernelConvention::Unscaled, |s| {
                s.parse().map_err(|_| "expected unscaled or normalized".to_string())
            })?,
            noise: self.noise_model(None)?,
        };
        cfg.validate().map_err(|e| Error::Usage(e.to_string()))?;
        Ok(cfg)
    }

    /// Type-checks every key that is present, used by the command or not.
    fn check_all(&self) -> Result<()> {
        self.count("n", 0, 2)?;
        self.count("m", 0, 1)?;
        self.count("replicas", 0, 1)?;
        self.count("slope_points", 0, 2)?;
        self.count("modes", 0, 1)?;
        self.count("d", 0, 1)?;
        self.seed()?;
        self.epsilon()?;
        self.sk(0.0)?;
        self.noise_model(None)?;
        self.parsed("density", DensitySpec::Sinusoidal1D, parse_density)?;
        if let Some(g) = self.raw("eps_grid") {
            parse_grid(g)?;
        }
        Ok(())
    }

    fn het_phase(&self) -> Result<HetPhase> {
        self.parsed("het_phase", HetPhase::PerSample, |s| {
            s.parse().map_err(|_| "expected per-sample or shared".to_string())
        })
    }

    fn epsilon(&self) -> Result<f64> {
        self.float("epsilon", 5e-4, |v| v > 0.0 && v.is_finite(), "positive")
    }

    fn seed(&self) -> Result<u64> {
        self.parsed("seed", 0, |s| s.parse().map_err(|_| "not a non-negative integer".to_string()))
    }
}

impl RunConfig {
    pub fn plan(&self) -> Result<Plan> {
        let l = Lookup { values: &self.values };
        l.check_all()?;
        Ok(match self.command {
            CommandKind::Generate => {
                let noise = l.noise_model(None)?;
                let m = match (&noise, l.raw("m")) {
                    (Some(model), _) => Some(model.m),
                    (None, Some(_)) => Some(l.count("m", 2000, 1)?),
                    (None, None) => None,
                };
                let spec = l.parsed("density", DensitySpec::Sinusoidal1D, parse_density)?;
                if let Some(m) = m {
                    if m < spec.clean_dim() {
                        return Err(bad("m", &m.to_string(), format!("must be at least {}", spec.clean_dim())));
                    }
                }
                Plan::Generate {
                    n: l.count("n", 1000, 2)?,
                    spec,
                    m,
                    noise,
                    seed: l.seed()?,
                }
            }
            CommandKind::Sweep => {
                let grid = match l.raw("eps_grid") {
                    Some(g) => parse_grid(g)?,
                    None => log_grid(1e-4, 1e-2, 10),
                };
                let slope_points = l.count("slope_points", 3, 2)?;
                if slope_points > grid.len() {
                    return Err(bad("slope_points", &slope_points.to_string(), "exceeds grid size"));
                }
                Plan::Sweep {
                    cfg: l.pointwise(3000)?,
                    grid,
                    replicas: l.count("replicas", 20, 1)?,
                    seed: l.seed()?,
                    slope_points,
                }
            }
            CommandKind::Pointwise => Plan::Pointwise {
                cfg: l.pointwise(3000)?,
                epsilon: l.epsilon()?,
                seed: l.seed()?,
            },
            CommandKind::Embed => {
                let noise = l.parsed("noise", Some(NoiseKind::Heteroskedastic), parse_noise)?;
                let cfg = EmbeddingConfig {
                    n: l.count("n", 1000, 6)?,
                    m: l.count("m", 2000, 4)?,
                    noise,
                    sigma_out: l.float("sigma_out", 0.1, |v| v > 0.0 && v.is_finite(), "positive")?,
                    p_out: l.float("p_out", 0.1, |v| (0.0..1.0).contains(&v), "in [0, 1)")?,
                    het_phase: l.het_phase()?,
                    epsilon: l.epsilon()?,
                    sk: l.sk(0.0)?,
                    replicas: l.count("replicas", 20, 1)?,
                    base_seed: l.seed()?,
                };
                let kind = l.parsed("kind", LaplacianKind::BistochRw, |s| match s.parse::<LaplacianKind>() {
                    Ok(k @ (LaplacianKind::BistochRw | LaplacianKind::DmRw)) => Ok(k),
                    _ => Err("expected bistoch-rw or dm-rw".to_string()),
                })?;
                let modes = l.count("modes", 5, 1)?;
                if modes > cfg.n {
                    return Err(bad("modes", &modes.to_string(), "exceeds n"));
                }
                Plan::Embed { cfg, kind, modes }
            }
            CommandKind::Skdiag => {
                let source = match l.path("input") {
                    Some(path) => SkSource::File(path),
                    None => SkSource::Generated {
                        cfg: l.pointwise(3000)?,
                        epsilon: l.epsilon()?,
                        seed: l.seed()?,
                    },
                };
                Plan::Skdiag { source, sk: l.sk(0.01)? }
            }
            CommandKind::Moments => Plan::Moments {
                d: l.parsed("d", 1, |s| match s.parse::<usize>() {
                    Ok(d @ 1..=3) => Ok(d),
                    _ => Err("must be 1, 2 or 3".to_string()),
                })?,
            },
        })
    }
}

/// Files produced by one run, written by the caller in order.
#[derive(Debug, Default)]
pub struct Outputs {
    /// Main output; goes to `output` or standard output.
    pub main: Vec<u8>,
    /// `(key, bytes)` for auxiliary outputs.
    pub extra: Vec<(&'static str, Vec<u8>)>,
    pub summary_n: Option<usize>,
    pub summary_eps: Option<String>,
}

/// Executes a plan without touching the file system (except `input`).
pub fn execute(plan: &Plan, values: &BTreeMap<&'static str, String>) -> Result<Outputs> {
    let mut out = Outputs::default();
    let wants = |key: &str| values.contains_key(key);
    match plan {
        Plan::Generate { n, spec, m, noise, seed } => {
            let mut ds = sample_dataset(*n, *spec, *seed)?;
            if let Some(m) = m {
                ds = ds.embedded(*m)?;
            }
            if let Some(model) = noise {
                ds = add_noise(&ds, model, crate::experiments::noise_seed(*seed))?;
            }
            write_dataset_csv(&ds, &mut out.main)?;
            out.summary_n = Some(*n);
        }
        Plan::Sweep { cfg, grid, replicas, seed, slope_points } => {
            let records = epsilon_sweep(cfg, grid, *replicas, *seed)?;
            write_sweep_csv(&records, &mut out.main)?;
            if wants("slopes_output") {
                let (small, large) = branch_slopes(&records, *slope_points)?;
                let report = [
                    SlopeReport { branch: "small_eps".into(), slope: small },
                    SlopeReport { branch: "large_eps".into(), slope: large },
                ];
                let mut buf = Vec::new();
                write_slopes_json(&report, &mut buf)?;
                out.extra.push(("slopes_output", buf));
            }
            out.summary_n = Some(cfg.n);
            out.summary_eps = Some(format!("{}..{}", grid[0], grid[grid.len() - 1]));
        }
        Plan::Pointwise { cfg, epsilon, seed } => {
            let data = prepare_replica(cfg, *seed)?;
            let o = evaluate_replica(&data, cfg, *epsilon)?;
            writeln!(out.main, "t,estimate,reference,eta,outlier")?;
            let flags = data.dataset.outlier_flags.as_ref();
            for i in 0..cfg.n {
                let eta = o.eta.get(i).copied().unwrap_or(f64::NAN);
                writeln!(
                    out.main,
                    "{},{},{},{},{}",
                    fmt_f64(data.dataset.t[i]),
                    fmt_f64(o.estimate[i]),
                    fmt_f64(o.reference[i]),
                    fmt_f64(eta),
                    u8::from(flags.is_some_and(|f| f[i]))
                )?;
            }
            eprintln!(
                "relerr2={} relerrinf={} sk_iters={} projection_hits={}",
                fmt_f64(o.relerr2),
                fmt_f64(o.relerrinf),
                o.sk_iters,
                o.projection_hits
            );
            out.summary_n = Some(cfg.n);
            out.summary_eps = Some(epsilon.to_string());
        }
        Plan::Embed { cfg, kind, modes } => {
            let report = embedding_experiment(cfg)?;
            write_embedding_csv(&report, &mut out.main)?;
            if wants("eigen_output") {
                let ds = embedding_dataset(cfg, cfg.base_seed)?;
                let w0 = build_affinity(ds.observed(), cfg.epsilon, 1, true, KernelConvention::Unscaled)?;
                let (l, _) = build_laplacian(&w0, *kind, &cfg.sk.in_convention_of(&w0))?;
                let eig = smallest_eigenpairs(&l, *modes)?;
                let mut buf = Vec::new();
                write_eigenpairs_csv(&eig, &mut buf)?;
                out.extra.push(("eigen_output", buf));
            }
            out.summary_n = Some(cfg.n);
            out.summary_eps = Some(cfg.epsilon.to_string());
        }
        Plan::Skdiag { source, sk } => {
            let (affinity, cfg_sk) = match source {
                SkSource::File(path) => {
                    let file = fs::File::open(path).map_err(|e| Error::Usage(format!("cannot open `{path}`: {e}")))?;
                    let mut a = Affinity::from_matrix(read_matrix_csv(BufReader::new(file))?)?;
                    // taken literally: c_sk applies to the matrix as given
                    a.convention = KernelConvention::Normalized;
                    (a, *sk)
                }
                SkSource::Generated { cfg, epsilon, seed } => {
                    let data = prepare_replica(cfg, *seed)?;
                    let a = crate::kernel::affinity_from_sq_dists(
                        &data.sq_dists,
                        *epsilon,
                        cfg.intrinsic_dim,
                        true,
                        cfg.convention,
                    )?;
                    let s = sk.in_convention_of(&a);
                    out.summary_eps = Some(epsilon.to_string());
                    (a, s)
                }
            };
            let result = approx_sym_sk(&affinity, &cfg_sk)?;
            write_residuals_csv(&result.residual_history, &mut out.main)?;
            eprintln!(
                "iterations={} converged={} projection_hits={}",
                result.iterations, result.converged, result.projection_hits
            );
            if wants("matrix_output") {
                let mut buf = Vec::new();
                write_matrix_csv(&affinity.matrix, &mut buf)?;
                out.extra.push(("matrix_output", buf));
            }
            out.summary_n = Some(affinity.n());
        }
        Plan::Moments { d } => {
            let (m0, m2) = kernel_moments(*d)?;
            writeln!(out.main, "d,m0,m2")?;
            writeln!(out.main, "{d},{},{}", fmt_f64(m0), fmt_f64(m2))?;
        }
    }
    Ok(out)
}

/// 1 for usage and parse errors, 2 for everything that fails at run time.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Usage(_) | Error::Parse(_) => 1,
        _ => 2,
    }
}

fn emit(path: Option<&String>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) if p != "-" => fs::write(p, bytes)?,
        _ => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

/// Runs a parsed configuration and returns the process exit code.
pub fn run(cfg: &RunConfig) -> i32 {
    let start = Instant::now();
    let result = cfg.plan().and_then(|plan| {
        let out = execute(&plan, &cfg.values)?;
        emit(cfg.values.get("output"), &out.main)?;
        for (key, bytes) in &out.extra {
            fs::write(&cfg.values[key], bytes)?;
        }
        Ok(out)
    });
    match result {
        Ok(out) => {
            let mut line = format!("{}", cfg.command.name());
            let _ = write!(line, " n={}", out.summary_n.map_or("-".into(), |n| n.to_string()));
            let _ = write!(line, " eps={}", out.summary_eps.as_deref().unwrap_or("-"));
            let _ = write!(line, " wall={:.3}s", start.elapsed().as_secs_f64());
            eprintln!("{line}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Caps the worker pool from `BISTOCH_THREADS`.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("BISTOCH_THREADS") else {
        return Ok(());
    };
    let k: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&k| k > 0)
        .ok_or_else(|| Error::Usage(format!("BISTOCH_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(k)
        .build_global()
        .map_err(|e| Error::Usage(format!("cannot configure threads: {e}")))
}

/// Entry point used by the binary.
pub fn main_with_args<S: AsRef<str>>(args: &[S]) -> i32 {
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return 1;
    }
    match parse_config(args) {
        Ok(Invocation::Help(text)) => {
            print!("{text}");
            0
        }
        Ok(Invocation::Run(cfg)) => run(&cfg),
        Err(e) => {
            eprintln!("error: {e}");
            if !matches!(&e, Error::Usage(msg) if msg.contains("Usage:")) {
                eprintln!("{}", usage());
            }
            exit_code(&e)
        }
    }
}
