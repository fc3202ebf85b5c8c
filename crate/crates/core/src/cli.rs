//! Command-line front end.
//!
//! Exit codes: 0 when everything passes, 1 when a check fails, 2 for usage or
//! configuration errors.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dyadic::DEFAULT_RESOLUTION;
use crate::error::Error;
use crate::selftest;
use crate::stopping::decompose;
use crate::verify::constants::{run_pilot, PilotConfig, ReferenceConstants};
use crate::verify::eval::Objective;
use crate::verify::experiment::{ratio_row, run_experiment, ExperimentConfig, Report};
use crate::verify::params::{FunctionSpec, InstanceParams};
use crate::verify::report::{fmt_f64, to_csv, to_json};
use crate::verify::search::{search, SearchConfig};
use crate::weights::{a_infty, a_p_constant, a_vec_p, dual_weights, Characteristic, ExponentTuple};

pub const DEFAULT_SUITE: &str = include_str!("../configs/default_suite.json");

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "sparse-weights",
    version,
    about = "Weighted bounds for dyadic sparse operators"
)]
pub struct Cli {
    /// Dyadic resolution L (cells have length 2^-L).
    #[arg(long, global = true)]
    pub resolution: Option<u32>,
    /// Master seed, overriding the config's.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (a directory for `decompose`); stdout when absent.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Characteristic constants of a weight and, optionally, a weight vector.
    Constants,
    /// Theorem and maximal ratios of one instance.
    Eval,
    /// Run an experiment suite (the built-in one without --config).
    CheckTheorem,
    /// Level sets and principal cubes of one instance, written to --output.
    Decompose,
    /// Extremizer search, or a full pilot run with --pilot.
    Search {
        /// Treat the config as a pilot definition and emit regression constants.
        #[arg(long)]
        pilot: bool,
    },
    /// Built-in smoke tests.
    Selftest,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Check,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn io_err(e: std::io::Error) -> Failure {
    Failure::Config(e.to_string())
}

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|m| Failure::Config(format!("{}: {m}", path.display())))
}

/// Deserializes JSON, reporting schema errors with the path of the offending field.
pub fn parse_config<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            e.inner().to_string()
        } else {
            format!("at {path}: {}", e.inner())
        }
    })
}

fn require_config<T: DeserializeOwned>(cli: &Cli) -> Result<T, Failure> {
    match &cli.config {
        Some(p) => read_config(p),
        None => Err(Failure::Config("this command needs --config PATH".into())),
    }
}

/// Runs the CLI on `args`, writing results to `--output` or `out` and
/// diagnostics to `err`. Returns the exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_PASS
            };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => EXIT_PASS,
        Err(Failure::Check) => EXIT_FAIL,
        Err(Failure::Config(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_CONFIG
        }
    }
}

fn emit(cli: &Cli, out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    match &cli.output {
        Some(path) if !matches!(cli.command, Command::Decompose) => std::fs::write(path, text)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display()))),
        _ => out.write_all(text.as_bytes()).map_err(io_err),
    }
}

fn emit_report(cli: &Cli, out: &mut dyn Write, report: &Report) -> Result<(), Failure> {
    let text = match cli.format {
        Format::Csv => to_csv(report)?,
        Format::Json => to_json(report)? + "\n",
    };
    emit(cli, out, &text)?;
    if report.all_pass() {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn json<T: Serialize>(v: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| Failure::Config(e.to_string()))
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<(), Failure> {
    match &cli.command {
        Command::Constants => cmd_constants(cli, out),
        Command::Eval => cmd_eval(cli, out),
        Command::CheckTheorem => cmd_check_theorem(cli, out),
        Command::Decompose => cmd_decompose(cli),
        Command::Search { pilot } => cmd_search(cli, out, *pilot),
        Command::Selftest => cmd_selftest(cli, out),
    }
}

/// Config of `constants`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    #[serde(default)]
    pub resolution: Option<u32>,
    /// `w`; the dual product of `sigmas` when absent.
    #[serde(default)]
    pub weight: Option<FunctionSpec>,
    /// Exponent of the one-weight `A_p` constant of `w`.
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default)]
    pub sigmas: Vec<FunctionSpec>,
    #[serde(default)]
    pub exponents: Option<ExponentTuple>,
}

fn two() -> f64 {
    2.0
}

fn natural_resolution<'a>(specs: impl IntoIterator<Item = &'a FunctionSpec>) -> Option<u32> {
    specs.into_iter().find_map(|s| match s {
        FunctionSpec::Cells { values } if values.len().is_power_of_two() => {
            Some(values.len().trailing_zeros())
        }
        _ => None,
    })
}

#[derive(Debug, Serialize)]
struct ConstantRow {
    constant: String,
    value: f64,
    level: Option<u32>,
    index: Option<u64>,
}

fn constant_row(name: &str, c: &Characteristic<f64>) -> ConstantRow {
    ConstantRow {
        constant: name.to_string(),
        value: c.value,
        level: c.cube.map(|q| q.level()),
        index: c.cube.map(|q| q.index()),
    }
}

fn cmd_constants(cli: &Cli, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg: ConstantsConfig = require_config(cli)?;
    let l = cli
        .resolution
        .or(cfg.resolution)
        .or_else(|| natural_resolution(cfg.weight.iter().chain(&cfg.sigmas)))
        .unwrap_or(DEFAULT_RESOLUTION);
    let sigmas = cfg
        .sigmas
        .iter()
        .map(|s| s.build(l))
        .collect::<crate::Result<Vec<_>>>()?;
    let w = match (&cfg.weight, &cfg.exponents) {
        (Some(FunctionSpec::Dual) | None, Some(e)) if !sigmas.is_empty() => {
            dual_weights(&sigmas, e)?.1
        }
        (Some(spec), _) => spec.build(l)?,
        (None, _) => {
            return Err(Failure::Config(
                "constants needs a weight, or sigmas with exponents".into(),
            ))
        }
    };
    let mut rows = vec![
        constant_row(&format!("A_{}(w)", cfg.p), &a_p_constant(&w, cfg.p)?),
        constant_row("A_inf(w)", &a_infty(&w)?),
    ];
    for (i, s) in sigmas.iter().enumerate() {
        rows.push(constant_row(
            &format!("A_inf(sigma_{})", i + 1),
            &a_infty(s)?,
        ));
    }
    if let Some(e) = &cfg.exponents {
        if !sigmas.is_empty() {
            rows.push(constant_row(
                "A_vecP/p0(w,sigma)",
                &a_vec_p(&w, &sigmas, e)?,
            ));
        }
    }
    let text = match cli.format {
        Format::Json => json(&rows)?,
        Format::Csv => {
            let mut s = String::from("constant,value,level,index\n");
            for r in &rows {
                s.push_str(&format!(
                    "{},{},{},{}\n",
                    r.constant,
                    fmt_f64(r.value),
                    r.level.map(|v| v.to_string()).unwrap_or_default(),
                    r.index.map(|v| v.to_string()).unwrap_or_default()
                ));
            }
            s
        }
    };
    emit(cli, out, &text)
}

/// Config of `eval` and `decompose`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    #[serde(default)]
    pub resolution: Option<u32>,
    pub instance: InstanceParams,
}

fn instance_resolution(cli: &Cli, cfg: &InstanceConfig) -> u32 {
    let i = &cfg.instance;
    cli.resolution
        .or(cfg.resolution)
        .or_else(|| {
            natural_resolution(
                i.functions
                    .iter()
                    .chain(&i.sigmas)
                    .chain(std::iter::once(&i.w)),
            )
        })
        .unwrap_or(DEFAULT_RESOLUTION)
}

fn cmd_eval(cli: &Cli, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg: InstanceConfig = require_config(cli)?;
    let l = instance_resolution(cli, &cfg);
    let constants = ReferenceConstants::embedded()?;
    let seed = cli.seed.unwrap_or(0);
    let mut rows = vec![
        ratio_row(
            "theorem_ratio",
            &cfg.instance,
            l,
            Objective::Theorem,
            &constants,
            seed,
        ),
        ratio_row(
            "maximal_ratio",
            &cfg.instance,
            l,
            Objective::Maximal,
            &constants,
            seed,
        ),
    ];
    for (i, r) in rows.iter_mut().enumerate() {
        r.trial = i;
    }
    emit_report(cli, out, &Report { rows })
}

fn cmd_check_theorem(cli: &Cli, out: &mut dyn Write) -> Result<(), Failure> {
    let mut cfg: ExperimentConfig = match &cli.config {
        Some(p) => read_config(p)?,
        None => parse_config(DEFAULT_SUITE)
            .map_err(|m| Failure::Config(format!("built-in suite: {m}")))?,
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let report = run_experiment(&cfg)?;
    emit_report(cli, out, &report)
}

#[derive(Debug, Serialize)]
struct ForestSummary {
    function: usize,
    cubes: usize,
    depth: usize,
    carleson_ratio: Option<f64>,
    carleson_bound: f64,
}

#[derive(Debug, Serialize)]
struct BucketSummary {
    a: i32,
    cubes: usize,
    forests: Vec<ForestSummary>,
    ls_max_ratio: f64,
    ls_fibers: usize,
}

#[derive(Debug, Serialize)]
struct DecompositionSummary {
    resolution: u32,
    family_size: usize,
    null_bucket: usize,
    window: Option<(i32, i32)>,
    buckets: Vec<BucketSummary>,
}

fn cmd_decompose(cli: &Cli) -> Result<(), Failure> {
    let cfg: InstanceConfig = require_config(cli)?;
    let l = instance_resolution(cli, &cfg);
    let dir = cli
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from("decomposition"));
    let i = &cfg.instance;
    let family = i.family.build(l)?;
    let phis = i
        .functions
        .iter()
        .map(|f| f.build(l))
        .collect::<crate::Result<Vec<_>>>()?;
    let sigmas = i
        .sigmas
        .iter()
        .map(|f| f.build(l))
        .collect::<crate::Result<Vec<_>>>()?;
    let w = match &i.w {
        FunctionSpec::Dual => dual_weights(&sigmas, &i.exponents)?.1,
        spec => spec.build(l)?,
    };
    let d = decompose(&family, &phis, &w, &sigmas, &i.exponents)?;
    std::fs::create_dir_all(&dir)
        .map_err(|e| Failure::Config(format!("{}: {e}", dir.display())))?;
    let write = |name: String, text: String| {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
    };
    let reduced = i.exponents.reduced();
    let mut buckets = Vec::new();
    for (&a, b) in &d.buckets {
        let cubes = &d.level_sets.buckets[&a];
        write(format!("bucket_{a}.txt"), cubes.to_text())?;
        let mut forests = Vec::new();
        for (k, (forest, ratio)) in b.forests.iter().zip(&b.carleson_ratios).enumerate() {
            write(
                format!("forest_{a}_{}.txt", k + 1),
                crate::sparse::cubes_to_text(forest.cubes()),
            )?;
            forests.push(ForestSummary {
                function: k + 1,
                cubes: forest.len(),
                depth: forest.depth(),
                carleson_ratio: *ratio,
                carleson_bound: crate::stopping::carleson_embedding_bound(reduced.p_i()[k]),
            });
        }
        buckets.push(BucketSummary {
            a,
            cubes: cubes.len(),
            forests,
            ls_max_ratio: b.ls.max_ratio,
            ls_fibers: b.ls.fibers,
        });
    }
    write("null_bucket.txt".into(), d.level_sets.null.to_text())?;
    let summary = DecompositionSummary {
        resolution: l,
        family_size: family.len(),
        null_bucket: d.level_sets.null.len(),
        window: d.level_sets.window(),
        buckets,
    };
    write("summary.json".into(), json(&summary)?)
}

fn cmd_search(cli: &Cli, out: &mut dyn Write, pilot: bool) -> Result<(), Failure> {
    if pilot {
        let mut cfg: PilotConfig = require_config(cli)?;
        for s in cfg.theorem.iter_mut().chain(cfg.maximal.iter_mut()) {
            override_search(cli, s);
        }
        return emit(cli, out, &json(&run_pilot(&cfg)?)?);
    }
    let mut cfg: SearchConfig = require_config(cli)?;
    override_search(cli, &mut cfg);
    emit(cli, out, &json(&search(&cfg)?)?)
}

fn override_search(cli: &Cli, s: &mut SearchConfig) {
    if let Some(l) = cli.resolution {
        s.space.resolution = l;
    }
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
}

fn cmd_selftest(cli: &Cli, out: &mut dyn Write) -> Result<(), Failure> {
    let results = selftest::run_all();
    let text = match cli.format {
        Format::Json => {
            let rows: Vec<BTreeMap<&str, String>> = results
                .iter()
                .map(|r| {
                    BTreeMap::from([
                        ("name", r.name.to_string()),
                        ("pass", r.pass.to_string()),
                        ("detail", r.detail.clone()),
                    ])
                })
                .collect();
            json(&rows)?
        }
        Format::Csv => selftest::table(&results),
    };
    emit(cli, out, &text)?;
    if results.iter().all(|r| r.pass) {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}
