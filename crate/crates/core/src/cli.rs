//! The `bfly` command driver.
//!
//! Every subcommand resolves a [`RunConfig`] (defaults, then an optional
//! `--config` file, then flags), writes it as `<out>/<command>.config.json`
//! and runs from that value alone, so re-running with the emitted config
//! reproduces every numeric output.
//!
//! Exit codes: 0 ok, 1 failed check, 2 usage or configuration error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::baselines::{baseline_table, table_csv};
use crate::bench::{run_bench, BenchConfig, BenchOp, BenchReport};
use crate::exact::{verify_exact_suite, ExactOp, Fault, VerifyOptions};
use crate::report::{load_input, render_markdown, render_svg, RECOVERED_RMSE};
use crate::train::{
    default_max_steps, gradcheck_suite, resolve_threads, search, ModelShape, SearchConfig, TrainConfig, TrainTask,
};
use crate::zoo::{TransformKind, TransformSpec};
use crate::{Error, Field, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Gradient-check pass threshold on the scale-relative error.
pub const GRADCHECK_TOL: f64 = 1e-6;

/// Transforms with a known fast algorithm, held to [`RECOVERED_RMSE`].
pub fn is_structured(kind: TransformKind) -> bool {
    !matches!(kind, TransformKind::Legendre | TransformKind::Randn)
}

/// `8..64` (powers of two, inclusive) or a comma list `8,16,32`.
pub fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidArgument(format!("bad size list '{s}'"));
    let sizes: Vec<usize> = if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        if !lo.is_power_of_two() || lo > hi {
            return Err(bad());
        }
        std::iter::successors(Some(lo), |&n| Some(n * 2)).take_while(|&n| n <= hi).collect()
    } else {
        s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if sizes.is_empty() || sizes.iter().any(|n| !n.is_power_of_two() || *n < 2) {
        return Err(Error::NotPowerOfTwo(sizes.into_iter().find(|n| !n.is_power_of_two() || *n < 2).unwrap_or(0)));
    }
    Ok(sizes)
}

fn parse_transforms(s: &str) -> Result<Vec<TransformKind>> {
    s.split(',').map(|t| t.trim().parse()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FactorizeConfig {
    pub transforms: Vec<TransformKind>,
    #[serde(rename = "N")]
    pub sizes: Vec<usize>,
    /// `None`: BPBP for convolution, BP otherwise.
    pub arch: Option<String>,
    pub field: Field,
    pub trials: usize,
    pub seed: u64,
    pub threads: usize,
    /// `None`: [`default_max_steps`] of each size.
    pub max_steps: Option<usize>,
    pub lr_min: f64,
    pub lr_max: f64,
    pub entropy_weight: f64,
    pub logit_init_std: f64,
    pub logit_lr_scale: f64,
    pub early_stop_rmse: f64,
    pub strict: bool,
    pub out: PathBuf,
}

impl Default for FactorizeConfig {
    fn default() -> Self {
        let s = SearchConfig::default();
        Self {
            transforms: vec![TransformKind::Dft],
            sizes: vec![8, 16, 32, 64],
            arch: None,
            field: Field::Complex,
            trials: s.budget,
            seed: 0,
            threads: 1,
            max_steps: None,
            lr_min: s.lr_min,
            lr_max: s.lr_max,
            entropy_weight: s.base.entropy_weight,
            logit_init_std: s.base.logit_init_std,
            logit_lr_scale: s.base.logit_lr_scale,
            early_stop_rmse: s.base.early_stop_rmse,
            strict: false,
            out: PathBuf::from("bfly-out"),
        }
    }
}

impl FactorizeConfig {
    /// Search settings of one `(transform, N)` cell.
    pub fn search_config(&self, n: usize) -> SearchConfig {
        SearchConfig {
            budget: self.trials,
            master_seed: self.seed,
            lr_min: self.lr_min,
            lr_max: self.lr_max,
            base: TrainConfig {
                max_steps: self.max_steps.unwrap_or_else(|| default_max_steps(n)),
                field: self.field,
                early_stop_rmse: self.early_stop_rmse,
                entropy_weight: self.entropy_weight,
                logit_init_std: self.logit_init_std,
                logit_lr_scale: self.logit_lr_scale,
                ..TrainConfig::default()
            },
            threads: self.threads,
            ..SearchConfig::default()
        }
    }

    pub fn task(&self, kind: TransformKind, n: usize) -> Result<TrainTask> {
        let task = TrainTask::for_spec(&TransformSpec::new(kind, n).with_seed(self.seed), self.field)?;
        Ok(match &self.arch {
            Some(a) => task.with_shape(ModelShape::parse(a)?),
            None => task,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    #[serde(rename = "N")]
    pub sizes: Vec<usize>,
    pub toeplitz_max: usize,
    pub seed: u64,
    /// Test hook: corrupt one construction.
    pub fault: Option<Fault>,
    pub out: PathBuf,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        let v = VerifyOptions::default();
        Self { sizes: v.sizes, toeplitz_max: v.toeplitz_max, seed: v.seed, fault: None, out: PathBuf::from("bfly-out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckConfig {
    pub instances: usize,
    pub max_n: usize,
    pub step: f64,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self { instances: 20, max_n: 16, step: 1e-5, seed: 0, out: PathBuf::from("bfly-out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselinesConfig {
    pub transforms: Vec<TransformKind>,
    #[serde(rename = "N")]
    pub sizes: Vec<usize>,
    pub seed: u64,
    pub threads: usize,
    pub out: PathBuf,
}

impl Default for BaselinesConfig {
    fn default() -> Self {
        Self {
            transforms: TransformKind::ALL.to_vec(),
            sizes: vec![8, 16, 32, 64],
            seed: 0,
            threads: 1,
            out: PathBuf::from("bfly-out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchRunConfig {
    pub bench: BenchConfig,
    pub strict: bool,
    pub out: PathBuf,
}

impl Default for BenchRunConfig {
    fn default() -> Self {
        Self { bench: BenchConfig::default(), strict: false, out: PathBuf::from("bfly-out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    pub inputs: Vec<PathBuf>,
    pub out: PathBuf,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { inputs: Vec::new(), out: PathBuf::from("bfly-out") }
    }
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    Factorize(FactorizeConfig),
    VerifyExact(VerifyConfig),
    Gradcheck(GradcheckConfig),
    Baselines(BaselinesConfig),
    Bench(BenchRunConfig),
    Report(ReportConfig),
}

impl RunConfig {
    pub fn command(&self) -> &'static str {
        match self {
            Self::Factorize(_) => "factorize",
            Self::VerifyExact(_) => "verify-exact",
            Self::Gradcheck(_) => "gradcheck",
            Self::Baselines(_) => "baselines",
            Self::Bench(_) => "bench",
            Self::Report(_) => "report",
        }
    }

    pub fn out(&self) -> &Path {
        match self {
            Self::Factorize(c) => &c.out,
            Self::VerifyExact(c) => &c.out,
            Self::Gradcheck(c) => &c.out,
            Self::Baselines(c) => &c.out,
            Self::Bench(c) => &c.out,
            Self::Report(c) => &c.out,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Result of a run: files written and whether its checks passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

fn write(out: &Path, name: &str, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = out.join(name);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(&path, contents)?;
    files.push(path);
    Ok(())
}

/// One row of `factorize.csv`. No timing columns, so the file is a pure
/// function of the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizeRow {
    pub transform: TransformKind,
    #[serde(rename = "N")]
    pub n: usize,
    pub arch: String,
    pub trials: usize,
    pub best_rmse: f64,
    pub best_trial: usize,
    pub learning_rate: f64,
    pub tie_logits: bool,
    pub steps: usize,
    pub rounding_distance: f64,
}

pub fn factorize_csv(rows: &[FactorizeRow]) -> String {
    let mut s =
        String::from("transform,N,arch,trials,best_rmse,best_trial,learning_rate,tie_logits,steps,rounding_distance\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{:e},{},{:e},{},{},{:e}\n",
            r.transform,
            r.n,
            r.arch,
            r.trials,
            r.best_rmse,
            r.best_trial,
            r.learning_rate,
            r.tie_logits,
            r.steps,
            r.rounding_distance
        ));
    }
    s
}

pub fn cmd_factorize(cfg: &FactorizeConfig) -> Result<Outcome> {
    let mut files = Vec::new();
    let mut rows = Vec::new();
    let mut passed = true;
    for &kind in &cfg.transforms {
        for &n in &cfg.sizes {
            let task = cfg.task(kind, n)?;
            let result = search(&task, &cfg.search_config(n))?;
            let stem = format!("{kind}_N{n}");
            write(&cfg.out, &format!("models/{stem}.json"), &result.best.to_json()?, &mut files)?;
            write(&cfg.out, &format!("trials/{stem}.csv"), &result.log_csv(), &mut files)?;
            if is_structured(kind) && !(result.best.final_rmse < RECOVERED_RMSE) {
                passed = false;
            }
            rows.push(FactorizeRow {
                transform: kind,
                n,
                arch: task.shape.name(),
                trials: cfg.trials,
                best_rmse: result.best.final_rmse,
                best_trial: result.best_index,
                learning_rate: result.best.config.learning_rate,
                tie_logits: result.best.config.tie_logits,
                steps: result.best.steps_used,
                rounding_distance: result.best.rounding_distance,
            });
        }
    }
    let csv = factorize_csv(&rows);
    write(&cfg.out, "factorize.csv", &csv, &mut files)?;
    Ok(Outcome { passed: passed || !cfg.strict, files, summary: csv })
}

pub fn cmd_verify_exact(cfg: &VerifyConfig) -> Result<Outcome> {
    let opts =
        VerifyOptions { sizes: cfg.sizes.clone(), toeplitz_max: cfg.toeplitz_max, seed: cfg.seed, fault: cfg.fault };
    let report = verify_exact_suite(&opts)?;
    let mut files = Vec::new();
    write(&cfg.out, "verify-exact.csv", &report.to_csv(), &mut files)?;
    let mut summary = String::from("op,worst_N,max_abs_error,threshold,pass\n");
    for op in ExactOp::ALL {
        if let Some(w) = report.worst(op) {
            summary.push_str(&format!("{},{},{:e},{:e},{}\n", op, w.n, w.max_abs_error, w.threshold, w.pass));
        }
    }
    Ok(Outcome { passed: report.passed(), files, summary })
}

pub fn cmd_gradcheck(cfg: &GradcheckConfig) -> Result<Outcome> {
    let rows = gradcheck_suite(cfg.instances, cfg.max_n, cfg.step, cfg.seed)?;
    let worst = rows.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    let mut csv = String::from("instance,N,arch,field,tied,entropy_weight,params,max_abs_error,max_rel_error\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{:e},{:e}\n",
            r.instance,
            r.n,
            r.shape.name(),
            r.field,
            r.tied,
            r.entropy_weight,
            r.params,
            r.max_abs_error,
            r.max_rel_error
        ));
    }
    let mut files = Vec::new();
    write(&cfg.out, "gradcheck.csv", &csv, &mut files)?;
    Ok(Outcome { passed: worst < GRADCHECK_TOL, files, summary: format!("worst relative error {worst:e}\n") })
}

pub fn cmd_baselines(cfg: &BaselinesConfig) -> Result<Outcome> {
    let specs: Vec<TransformSpec> = cfg
        .transforms
        .iter()
        .flat_map(|&k| cfg.sizes.iter().map(move |&n| TransformSpec::new(k, n).with_seed(cfg.seed)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let rows = pool.install(|| baseline_table(&specs))?;
    let csv = table_csv(&rows);
    let mut files = Vec::new();
    write(&cfg.out, "baselines.csv", &csv, &mut files)?;
    Ok(Outcome { passed: true, files, summary: csv })
}

/// Slope and crossover checks on a bench report.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingCheck {
    pub dense_slope: f64,
    pub butterfly_slope: f64,
    pub largest_n: usize,
    pub butterfly_faster_at_largest: bool,
}

impl ScalingCheck {
    pub const DENSE_RANGE: (f64, f64) = (1.7, 2.3);
    pub const BUTTERFLY_RANGE: (f64, f64) = (0.9, 1.4);

    pub fn from_report(report: &BenchReport) -> Option<Self> {
        let largest_n = report.records.iter().map(|r| r.n).max()?;
        Some(Self {
            dense_slope: report.slope(BenchOp::DenseMatvec)?,
            butterfly_slope: report.slope(BenchOp::ButterflyMatvec)?,
            largest_n,
            butterfly_faster_at_largest: report.median(BenchOp::ButterflyMatvec, largest_n)?
                < report.median(BenchOp::DenseMatvec, largest_n)?,
        })
    }

    pub fn passed(&self) -> bool {
        let within = |v: f64, (lo, hi): (f64, f64)| (lo..=hi).contains(&v);
        within(self.dense_slope, Self::DENSE_RANGE)
            && within(self.butterfly_slope, Self::BUTTERFLY_RANGE)
            && self.butterfly_faster_at_largest
    }
}

pub fn cmd_bench(cfg: &BenchRunConfig) -> Result<Outcome> {
    let report = run_bench(&cfg.bench)?;
    let mut files = Vec::new();
    write(&cfg.out, "bench.csv", &report.records_csv(), &mut files)?;
    write(&cfg.out, "bench_slopes.csv", &report.slopes_csv(), &mut files)?;
    let check = ScalingCheck::from_report(&report);
    let passed = !cfg.strict || check.as_ref().is_some_and(ScalingCheck::passed);
    let summary = match &check {
        Some(c) => format!(
            "dense slope {:.3}, butterfly slope {:.3}, butterfly faster at N={}: {}\n",
            c.dense_slope, c.butterfly_slope, c.largest_n, c.butterfly_faster_at_largest
        ),
        None => report.slopes_csv(),
    };
    Ok(Outcome { passed, files, summary })
}

pub fn cmd_report(cfg: &ReportConfig) -> Result<Outcome> {
    if cfg.inputs.is_empty() {
        return Err(Error::Config("report needs at least one --input".into()));
    }
    let inputs = cfg.inputs.iter().map(|p| load_input(p)).collect::<Result<Vec<_>>>()?;
    let cells: Vec<_> = inputs.iter().flat_map(|i| i.cells.iter().cloned()).collect();
    let mut files = Vec::new();
    let md = render_markdown(&inputs);
    write(&cfg.out, "report.md", &md, &mut files)?;
    write(&cfg.out, "heatmap.svg", &render_svg(&cells), &mut files)?;
    Ok(Outcome { passed: true, files, summary: md })
}

/// Writes the resolved config, then runs it.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    let mut files = Vec::new();
    write(cfg.out(), &format!("{}.config.json", cfg.command()), &cfg.to_json()?, &mut files)?;
    let mut outcome = match cfg {
        RunConfig::Factorize(c) => cmd_factorize(c),
        RunConfig::VerifyExact(c) => cmd_verify_exact(c),
        RunConfig::Gradcheck(c) => cmd_gradcheck(c),
        RunConfig::Baselines(c) => cmd_baselines(c),
        RunConfig::Bench(c) => cmd_bench(c),
        RunConfig::Report(c) => cmd_report(c),
    }?;
    files.append(&mut outcome.files);
    outcome.files = files;
    Ok(outcome)
}

#[derive(Debug, Parser)]
#[command(name = "bfly", version, about = "Learn and verify butterfly factorizations of linear transforms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Start from this resolved-config JSON; other flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (BF_THREADS takes precedence).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Exit 1 when a threshold check fails.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search for BP / BPBP factorizations of dense transforms.
    Factorize {
        #[command(flatten)]
        common: Common,
        /// Comma list: dft,dct,dst,conv,hadamard,hartley,legendre,randn.
        #[arg(long)]
        transform: Option<String>,
        /// `8..64` or `8,16,32`.
        #[arg(long = "N")]
        sizes: Option<String>,
        /// bp, bpbp or bp^k_r.
        #[arg(long)]
        arch: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        max_steps: Option<usize>,
        /// real or complex.
        #[arg(long)]
        field: Option<String>,
    },
    /// Check every exact construction against its dense formula.
    VerifyExact {
        #[command(flatten)]
        common: Common,
        #[arg(long = "N")]
        sizes: Option<String>,
        #[arg(long)]
        toeplitz_max: Option<usize>,
    },
    /// Compare analytic gradients with central differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long)]
        max_n: Option<usize>,
        #[arg(long)]
        step: Option<f64>,
    },
    /// Sparse, low-rank and sparse+low-rank approximations at matched budgets.
    Baselines {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        transform: Option<String>,
        #[arg(long = "N")]
        sizes: Option<String>,
    },
    /// Time butterfly, exact-FFT and dense matvecs and fit scaling slopes.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long = "N")]
        sizes: Option<String>,
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// Merge result CSVs into a markdown table and an SVG heatmap.
    Report {
        #[command(flatten)]
        common: Common,
        /// Result CSV; repeat for several.
        #[arg(long = "input")]
        inputs: Vec<PathBuf>,
    },
}

fn base_config<T: for<'de> Deserialize<'de>>(common: &Common, wrap: fn(T) -> RunConfig, default: T) -> Result<T> {
    let Some(path) = &common.config else { return Ok(default) };
    let text = fs::read_to_string(path)?;
    let cfg = RunConfig::from_json(&text)?;
    let name = cfg.command();
    let expected = wrap(default).command();
    if name != expected {
        return Err(Error::Config(format!("config is for '{name}', not '{expected}'")));
    }
    // Round-trip through the tagged form to extract the variant.
    let value = serde_json::to_value(&cfg)?;
    let mut obj = value.as_object().cloned().unwrap_or_default();
    obj.remove("command");
    Ok(serde_json::from_value(serde_json::Value::Object(obj))?)
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn parse_field(s: &str) -> Result<Field> {
    match s.to_ascii_lowercase().as_str() {
        "real" => Ok(Field::Real),
        "complex" => Ok(Field::Complex),
        _ => Err(Error::InvalidArgument(format!("unknown field '{s}' (real|complex)"))),
    }
}

/// Applies flags over defaults (or `--config`), producing the run's config.
pub fn resolve(command: Command) -> Result<RunConfig> {
    Ok(match command {
        Command::Factorize { common, transform, sizes, arch, trials, max_steps, field } => {
            let mut c = base_config(&common, RunConfig::Factorize, FactorizeConfig::default())?;
            set(&mut c.transforms, transform.as_deref().map(parse_transforms).transpose()?);
            set(&mut c.sizes, sizes.as_deref().map(parse_sizes).transpose()?);
            if let Some(a) = arch {
                ModelShape::parse(&a)?;
                c.arch = Some(a);
            }
            set(&mut c.trials, trials);
            if max_steps.is_some() {
                c.max_steps = max_steps;
            }
            set(&mut c.field, field.as_deref().map(parse_field).transpose()?);
            set(&mut c.seed, common.seed);
            set(&mut c.out, common.out);
            c.strict |= common.strict;
            c.threads = resolve_threads(common.threads.or(Some(c.threads)));
            RunConfig::Factorize(c)
        }
        Command::VerifyExact { common, sizes, toeplitz_max } => {
            let mut c = base_config(&common, RunConfig::VerifyExact, VerifyConfig::default())?;
            set(&mut c.sizes, sizes.as_deref().map(parse_sizes).transpose()?);
            set(&mut c.toeplitz_max, toeplitz_max);
            set(&mut c.seed, common.seed);
            set(&mut c.out, common.out);
            RunConfig::VerifyExact(c)
        }
        Command::Gradcheck { common, instances, max_n, step } => {
            let mut c = base_config(&common, RunConfig::Gradcheck, GradcheckConfig::default())?;
            set(&mut c.instances, instances);
            set(&mut c.max_n, max_n);
            set(&mut c.step, step);
            set(&mut c.seed, common.seed);
            set(&mut c.out, common.out);
            RunConfig::Gradcheck(c)
        }
        Command::Baselines { common, transform, sizes } => {
            let mut c = base_config(&common, RunConfig::Baselines, BaselinesConfig::default())?;
            set(&mut c.transforms, transform.as_deref().map(parse_transforms).transpose()?);
            set(&mut c.sizes, sizes.as_deref().map(parse_sizes).transpose()?);
            set(&mut c.seed, common.seed);
            set(&mut c.out, common.out);
            c.threads = resolve_threads(common.threads.or(Some(c.threads)));
            RunConfig::Baselines(c)
        }
        Command::Bench { common, sizes, repetitions } => {
            let mut c = base_config(&common, RunConfig::Bench, BenchRunConfig::default())?;
            set(&mut c.bench.sizes, sizes.as_deref().map(parse_sizes).transpose()?);
            set(&mut c.bench.repetitions, repetitions);
            set(&mut c.bench.seed, common.seed);
            set(&mut c.out, common.out);
            c.strict |= common.strict;
            RunConfig::Bench(c)
        }
        Command::Report { common, inputs } => {
            let mut c = base_config(&common, RunConfig::Report, ReportConfig::default())?;
            if !inputs.is_empty() {
                c.inputs = inputs;
            }
            set(&mut c.out, common.out);
            RunConfig::Report(c)
        }
    })
}

fn usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_)
            | Error::InvalidArgument(_)
            | Error::NotPowerOfTwo(_)
            | Error::Json(_)
            | Error::Io(_)
            | Error::Csv(_)
    )
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match resolve(cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match execute(&cfg) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            if outcome.passed {
                EXIT_OK
            } else {
                eprintln!("{}: check failed", cfg.command());
                EXIT_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if usage_error(&e) {
                EXIT_USAGE
            } else {
                EXIT_FAILED
            }
        }
    }
}
