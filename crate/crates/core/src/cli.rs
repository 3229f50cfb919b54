//! The `relu-phase` command line.
//!
//! Commands that produce results take one JSON config file plus flags that
//! override its fields, print the resolved configuration, and write
//! `manifest.json` into the output directory before any training starts.
//!
//! Config file fields (all optional, unknown fields rejected):
//!
//! ```text
//! preset                  "NTK" | "LeCun" | "He" | "Xavier"
//! gamma2, gamma3          phase coordinates (number or "p/q")
//! alpha_exp, B            alpha = m^alpha_exp (default 0), beta2 = B * beta3 (default 1)
//! laws                    {"alpha", "beta1", "beta2", "beta3"}: explicit width laws
//! m, seed                 width and seed for `train` (defaults 100 and 0)
//! widths                  list of widths or a named list ("desk", "wide", "wide-grid")
//! seeds                   seed list for `sweep` and `phase` (default 0..8)
//! data                    {"kind": "synthetic", "points": [[x, y], ...]}
//!                         {"kind": "mnist", "limit": n}   (bundled 1000-sample subset)
//!                         {"kind": "idx", "images": path, "labels": path, "limit": n}
//! schedule                {"step": {"curvature": {"fraction": f}} | {"constant": {"lr": r}},
//!                          "max_steps", "rel_loss_target", "divergence_cap"}
//! grid                    {"gamma2": [...], "gamma3": [...]} for `phase`
//! ```
//!
//! `train` and `sweep` need exactly one of `preset`, `gamma2`+`gamma3` or
//! `laws`. `phase` takes its coordinates from `grid` and only `alpha_exp`
//! from the initialization fields. A constant `lr` is read in normalized time.
//!
//! The cosine-matrix files (`*.cosine`) are `RELU3COS`, a little-endian `u64`
//! row count `k`, then `k * k` little-endian `f64` in row-major order.
//!
//! Exit codes: 0 success (divergences are flagged in the outputs), 1 usage or
//! configuration error, 2 I/O error, 3 every run failed.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::data::{bundled_mnist, load_idx, synthetic_1d, SyntheticSpec};
use crate::error::Error;
use crate::experiment::{
    cells_from_runs, default_workers, fmt_f64, named_widths, phase_scan, read_runs, run_config, schedule_for,
    sweep_config, write_atomic, write_cells_csv, write_runs_csv, write_stars_csv, PhaseCell, PhaseScanSpec,
    RunRow, ScanOptions, Star, RUNS_FILE,
};
use crate::linalg::Matrix;
use crate::metrics::{condensation_index, cosine_matrix, direction_spread, relative_change, zeta_of};
use crate::model::{load_checkpoint, save_checkpoint, Dataset, Schedule, StepSize, StopReason, TrainRecord};
use crate::plot::{matrix_heatmap, phase_heatmap, scatter, ColorScale, Grid, Series};
use crate::scaling::{
    config_from_gammas, kappas, parse_rational, preset, rational_from_f64, HyperConfig, PhasePoint, PowerLaw,
    Preset, Rational,
};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "RELU_PHASE_WORKERS";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const COSINE_MAGIC: &[u8; 8] = b"RELU3COS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_ALL_FAILED: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } | Error::Format { .. } => EXIT_IO,
            Error::SweepFailed { .. } => EXIT_ALL_FAILED,
            _ => EXIT_USAGE,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "relu-phase", version, about = "Phase diagrams of three-layer ReLU networks under width-scaled initializations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the width laws, kappa ratios and phase coordinates of a standard initialization
    Preset {
        name: String,
        #[arg(long, default_value_t = 100)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        d_out: usize,
        /// print JSON instead of a table
        #[arg(long)]
        json: bool,
    },
    /// Train one network and write its loss curve, weights and diagnostics
    Train(RunArgs),
    /// Train across widths and seeds at one configuration and fit the log-log slopes
    Sweep(RunArgs),
    /// Scan a (gamma2, gamma3) grid; reruns resume from runs.csv in the output directory
    Phase(RunArgs),
    /// Recompute the cosine matrix and condensation index of a saved network
    Condense {
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// share of largest-norm rows of the second layer kept
        #[arg(long, default_value_t = 0.5)]
        fraction: f64,
    },
    /// Summarize an output directory and redraw its tables and plots
    Report { dir: PathBuf },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// comma-separated seeds
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// comma-separated widths or a named list
    #[arg(long)]
    pub widths: Option<String>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// constant learning rate in normalized time (replaces the curvature rule)
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, env = WORKERS_ENV)]
    pub workers: Option<usize>,
}

/// A number or an exact `"p/q"` string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exact {
    Number(f64),
    Text(String),
}

impl Exact {
    fn rational(&self) -> crate::Result<Rational> {
        match self {
            Exact::Number(x) => rational_from_f64(*x),
            Exact::Text(s) => parse_rational(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSet {
    pub alpha: PowerLaw,
    pub beta1: PowerLaw,
    pub beta2: PowerLaw,
    pub beta3: PowerLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WidthList {
    Named(String),
    List(Vec<usize>),
}

impl WidthList {
    fn resolve(&self) -> CliResult<Vec<usize>> {
        match self {
            WidthList::List(v) => Ok(v.clone()),
            WidthList::Named(name) => named_widths(name).ok_or_else(|| CliError::usage(format!("unknown width list `{name}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    Synthetic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        points: Option<Vec<(f64, f64)>>,
    },
    Mnist {
        limit: usize,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        limit: usize,
    },
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec::Synthetic { points: None }
    }
}

impl DataSpec {
    /// Fills defaults and makes paths absolute (relative to `base`).
    fn resolved(&self, base: &Path) -> DataSpec {
        match self {
            DataSpec::Synthetic { points } => DataSpec::Synthetic {
                points: Some(points.clone().unwrap_or_else(|| SyntheticSpec::default().points)),
            },
            DataSpec::Idx { images, labels, limit } => DataSpec::Idx {
                images: base.join(images),
                labels: base.join(labels),
                limit: *limit,
            },
            other => other.clone(),
        }
    }

    pub fn load(&self) -> crate::Result<Dataset> {
        match self {
            DataSpec::Synthetic { points } => synthetic_1d(&SyntheticSpec {
                points: points.clone().unwrap_or_else(|| SyntheticSpec::default().points),
            }),
            DataSpec::Mnist { limit } => {
                let (img, lab) = bundled_mnist();
                load_idx(img, lab, *limit)
            }
            DataSpec::Idx { images, labels, limit } => load_idx(images, labels, *limit),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxes {
    pub gamma2: Vec<f64>,
    pub gamma3: Vec<f64>,
}

/// The config file as written.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma2: Option<Exact>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma3: Option<Exact>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_exp: Option<Exact>,
    #[serde(default, rename = "B", skip_serializing_if = "Option::is_none")]
    pub b: Option<Exact>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laws: Option<LawSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub widths: Option<WidthList>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Schedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridAxes>,
}

impl ConfigFile {
    pub fn read(path: &Path) -> CliResult<ConfigFile> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
    }

    /// Applies command-line overrides.
    fn apply(&mut self, args: &RunArgs) -> CliResult<()> {
        if let Some(m) = args.m {
            self.m = Some(m);
        }
        if let Some(seed) = args.seed {
            self.seed = Some(seed);
        }
        if let Some(seeds) = &args.seeds {
            self.seeds = Some(seeds.clone());
        }
        if let Some(w) = &args.widths {
            let list = if w.contains(',') || w.parse::<usize>().is_ok() {
                let parsed: Result<Vec<usize>, _> = w.split(',').map(|s| s.trim().parse()).collect();
                WidthList::List(parsed.map_err(|_| CliError::usage(format!("bad width list `{w}`")))?)
            } else {
                WidthList::Named(w.clone())
            };
            self.widths = Some(list);
        }
        let mut schedule = self.schedule.unwrap_or_default();
        if let Some(n) = args.max_steps {
            schedule.max_steps = n;
        }
        if let Some(lr) = args.lr {
            schedule.step = StepSize::Constant { lr };
        }
        self.schedule = Some(schedule);
        Ok(())
    }

    /// The initialization laws, at width `m` on data of the given dimensions.
    fn hyper_config(&self, m: usize, d: usize, d_out: usize) -> CliResult<(HyperConfig, String)> {
        let b_sq = match &self.b {
            Some(b) => {
                let b = b.rational()?;
                Some(b * b)
            }
            None => None,
        };
        let alpha_exp = self.alpha_exp.as_ref().map(Exact::rational).transpose()?;
        let chosen = [self.preset.is_some(), self.gamma2.is_some() || self.gamma3.is_some(), self.laws.is_some()];
        if chosen.iter().filter(|c| **c).count() != 1 {
            return Err(CliError::usage(
                "config must give exactly one of `preset`, `gamma2`+`gamma3` or `laws`",
            ));
        }
        if let Some(name) = &self.preset {
            if b_sq.is_some() || alpha_exp.is_some() {
                return Err(CliError::usage("`B` and `alpha_exp` do not apply to a preset"));
            }
            let p: Preset = name.parse()?;
            return Ok((preset(p, m, d, d_out)?, format!("preset {p}")));
        }
        if let Some(l) = &self.laws {
            if alpha_exp.is_some() {
                return Err(CliError::usage("`alpha_exp` does not apply to explicit laws"));
            }
            let cfg = HyperConfig {
                alpha: l.alpha.clone(),
                beta1: l.beta1.clone(),
                beta2: l.beta2.clone(),
                beta3: l.beta3.clone(),
                m,
                d,
                d_out,
                b_sq,
            };
            cfg.validate()?;
            return Ok((cfg, "laws".into()));
        }
        let (Some(g2), Some(g3)) = (&self.gamma2, &self.gamma3) else {
            return Err(CliError::usage("give both `gamma2` and `gamma3`"));
        };
        let mut point = PhasePoint::exact(g2.rational()?, g3.rational()?);
        if let Some(a) = alpha_exp {
            point = point.with_alpha_exponent(a);
        }
        if let Some(b) = b_sq {
            point = point.with_b_sq(b);
        }
        Ok((config_from_gammas(point, m, d, d_out)?, "gammas".into()))
    }
}

/// Inputs that fully determine a command's results, echoed and hashed.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub software: String,
    pub version: String,
    pub command: String,
    pub config: Value,
    pub seeds: Vec<u64>,
    pub widths: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Schedule>,
    pub output_dir: PathBuf,
    /// sha256 over everything above except `output_dir`
    pub content_hash: String,
}

impl RunManifest {
    pub fn new(
        command: &str,
        config: Value,
        seeds: Vec<u64>,
        widths: Vec<usize>,
        schedule: Option<Schedule>,
        output_dir: &Path,
    ) -> Self {
        let hashed = json!({
            "software": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config": config,
            "seeds": seeds,
            "widths": widths,
            "schedule": schedule,
        });
        let digest = Sha256::digest(serde_json::to_vec(&hashed).expect("manifest serializes"));
        RunManifest {
            software: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            seeds,
            widths,
            schedule,
            output_dir: output_dir.to_path_buf(),
            content_hash: hex::encode(digest),
        }
    }

    fn write(&self) -> CliResult<()> {
        fs::create_dir_all(&self.output_dir).map_err(|e| Error::io(&self.output_dir, e))?;
        write_json(&self.output_dir.join(MANIFEST_FILE), self)
    }
}

/// sha256 of the dataset's shape and values.
pub fn data_fingerprint(data: &Dataset) -> String {
    let mut h = Sha256::new();
    for n in [data.len(), data.input_dim(), data.output_dim()] {
        h.update((n as u64).to_le_bytes());
    }
    for v in data.x().as_slice().iter().chain(data.y().as_slice()) {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(Error::from)?;
    s.push('\n');
    Ok(write_atomic(path, &s)?)
}

fn write_text(path: &Path, s: &str) -> CliResult<()> {
    Ok(write_atomic(path, s)?)
}

pub fn write_cosine(path: &Path, c: &Matrix) -> CliResult<()> {
    let mut buf = Vec::with_capacity(16 + 8 * c.as_slice().len());
    buf.extend_from_slice(COSINE_MAGIC);
    buf.extend_from_slice(&(c.rows() as u64).to_le_bytes());
    for v in c.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_cosine(path: &Path) -> crate::Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: &str| Error::Format {
        kind: "cosine",
        path: path.to_path_buf(),
        reason: reason.into(),
    };
    if bytes.len() < 16 || &bytes[..8] != COSINE_MAGIC {
        return Err(bad("missing RELU3COS magic"));
    }
    let k = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    if k.checked_mul(k).and_then(|n| n.checked_mul(8)) != Some(bytes.len() - 16) {
        return Err(bad("size does not match the row count"));
    }
    let values = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Matrix::from_vec(k, k, values))
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).unwrap_or_default()
}

fn law_echo(cfg: &HyperConfig, source: &str) -> Value {
    let s = kappas(cfg);
    json!({
        "source": source,
        "laws": cfg,
        "display": {
            "alpha": cfg.alpha.to_string(),
            "beta1": cfg.beta1.to_string(),
            "beta2": cfg.beta2.to_string(),
            "beta3": cfg.beta3.to_string(),
        },
        "gamma2": s.gamma2.to_string(),
        "gamma3": s.gamma3.to_string(),
    })
}

fn nullable(r: crate::Result<f64>) -> Option<f64> {
    r.ok().filter(|v| v.is_finite())
}

/// Parses `args` (program name first) and runs the command. Returns the exit code.
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
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn execute(command: Command) -> CliResult<i32> {
    match command {
        Command::Preset { name, m, d, d_out, json } => cmd_preset(&name, m, d, d_out, json),
        Command::Train(args) => cmd_train(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Phase(args) => cmd_phase(&args),
        Command::Condense { checkpoint, out, fraction } => cmd_condense(&checkpoint, &out, fraction),
        Command::Report { dir } => cmd_report(&dir),
    }
}

fn cmd_preset(name: &str, m: usize, d: usize, d_out: usize, as_json: bool) -> CliResult<i32> {
    let p: Preset = name.parse()?;
    let cfg = preset(p, m, d, d_out)?;
    let s = kappas(&cfg);
    if as_json {
        println!("{}", pretty(&json!({ "preset": p.name(), "config": cfg, "summary": s })));
        return Ok(EXIT_OK);
    }
    println!("preset\tm\td\talpha\tbeta1\tbeta2\tbeta3\tkappa1\tkappa2\tkappa3\tgamma2\tgamma3");
    println!(
        "{p}\t{m}\t{d}\t{}\t{}\t{}\t{}\t{} = {:.6e}\t{} = {:.6e}\t{} = {:.6e}\t{}\t{}",
        cfg.alpha, cfg.beta1, cfg.beta2, cfg.beta3, s.kappa1_law, s.kappa1, s.kappa2_law, s.kappa2, s.kappa3_law,
        s.kappa3, s.gamma2, s.gamma3
    );
    Ok(EXIT_OK)
}

/// Config, data and manifest shared by the training commands.
struct Prepared {
    file: ConfigFile,
    data: Dataset,
    data_spec: DataSpec,
    schedule: Schedule,
    workers: usize,
}

fn prepare(args: &RunArgs) -> CliResult<Prepared> {
    let mut file = ConfigFile::read(&args.config)?;
    file.apply(args)?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let data_spec = file.data.clone().unwrap_or_default().resolved(base);
    let schedule = file.schedule.unwrap_or_default();
    schedule.validate()?;
    let data = data_spec.load()?;
    let workers = args.workers.filter(|w| *w > 0).unwrap_or_else(|| default_workers(WORKERS_ENV));
    Ok(Prepared {
        file,
        data,
        data_spec,
        schedule,
        workers,
    })
}

fn data_echo(p: &Prepared) -> Value {
    json!({
        "spec": p.data_spec,
        "samples": p.data.len(),
        "input_dim": p.data.input_dim(),
        "output_dim": p.data.output_dim(),
        "fingerprint": data_fingerprint(&p.data),
    })
}

fn announce(manifest: &RunManifest) -> CliResult<()> {
    println!("resolved configuration:");
    println!("{}", pretty(&serde_json::to_value(manifest).map_err(Error::from)?));
    manifest.write()
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    status: StopReason,
    diverged: bool,
    steps_taken: usize,
    initial_loss: f64,
    final_loss: Option<f64>,
    /// schedule after converting a normalized learning rate
    schedule: Schedule,
    m: usize,
    seed: u64,
    gamma2: String,
    gamma3: String,
    time_factor: f64,
    wall_clock_secs: f64,
}

#[derive(Debug, Serialize)]
struct TrainMetrics {
    rd_w1: Option<f64>,
    rd_w2: Option<f64>,
    zeta: Option<f64>,
    zeta_init: Option<f64>,
    /// circular variance of the largest first-layer rows (1-d inputs only)
    w1_spread_init: Option<f64>,
    w1_spread_final: Option<f64>,
}

fn cmd_train(args: &RunArgs) -> CliResult<i32> {
    let p = prepare(args)?;
    let m = p.file.m.unwrap_or(100);
    let seed = p.file.seed.unwrap_or(0);
    let (cfg, source) = p.file.hyper_config(m, p.data.input_dim(), p.data.output_dim())?;
    let config = json!({ "init": law_echo(&cfg, &source), "m": m, "data": data_echo(&p) });
    let manifest = RunManifest::new("train", config, vec![seed], vec![m], Some(p.schedule), &args.out);
    announce(&manifest)?;

    let (row, record) = run_config(&cfg, seed, &p.data, &p.schedule)?;
    write_train_outputs(&args.out, &cfg, seed, &row, &record, &manifest.content_hash)?;
    println!(
        "status: {}  steps: {}  loss: {} -> {}  rd_w1: {}  rd_w2: {}  zeta: {}",
        row.stop_reason,
        row.steps,
        fmt_f64(row.initial_loss),
        fmt_f64(row.final_loss),
        fmt_f64(row.rd_w1),
        fmt_f64(row.rd_w2),
        fmt_f64(row.zeta)
    );
    Ok(EXIT_OK)
}

fn write_train_outputs(
    out: &Path,
    cfg: &HyperConfig,
    seed: u64,
    row: &RunRow,
    record: &TrainRecord,
    hash: &str,
) -> CliResult<()> {
    let s = kappas(cfg);
    let summary = TrainSummary {
        status: record.stop_reason,
        diverged: record.stop_reason == StopReason::Diverged,
        steps_taken: record.steps_taken,
        initial_loss: record.initial_loss(),
        final_loss: Some(record.final_loss()).filter(|v| v.is_finite()),
        schedule: schedule_for(cfg, &record.schedule).unwrap_or(record.schedule),
        m: cfg.m,
        seed,
        gamma2: s.gamma2.to_string(),
        gamma3: s.gamma3.to_string(),
        time_factor: s.time_factor,
        wall_clock_secs: record.wall_clock_secs,
    };
    write_json(&out.join("summary.json"), &summary)?;

    let mut loss = String::from("step,loss,step_size\n");
    for (i, &(step, l)) in record.loss_curve.iter().enumerate() {
        let lr = record.step_sizes.get(i).copied().unwrap_or(f64::NAN);
        loss.push_str(&format!("{step},{},{}\n", fmt_f64(l), fmt_f64(lr)));
    }
    write_text(&out.join("loss.csv"), &loss)?;

    let (init, fin) = (&record.initial_snapshot, &record.final_snapshot);
    let d = init.input_dim();
    let mut sc = String::from("snapshot,neuron,");
    let cols: Vec<String> = (1..=d).map(|j| format!("w{j}")).chain(["bias".to_string()]).collect();
    sc.push_str(&cols.join(","));
    sc.push('\n');
    for (name, net) in [("init", init), ("final", fin)] {
        for (k, r) in net.w1.row_iter().enumerate() {
            let vals: Vec<String> = r.iter().map(|v| fmt_f64(*v)).collect();
            sc.push_str(&format!("{name},{k},{}\n", vals.join(",")));
        }
    }
    write_text(&out.join("scatter_w1.csv"), &sc)?;

    let one_d = d == 1;
    if one_d {
        let pts = |net: &crate::Network| -> Vec<(f64, f64)> { net.w1.row_iter().map(|r| (r[0], r[1])).collect() };
        let (pi, pf) = (pts(init), pts(fin));
        let svg = scatter(
            &[
                Series {
                    label: "init",
                    color: "#a0a0a0",
                    points: &pi,
                },
                Series {
                    label: "final",
                    color: "#1f5fbf",
                    points: &pf,
                },
            ],
            &format!("first layer, m={}, gamma2={}, gamma3={}", cfg.m, s.gamma2, s.gamma3),
            "weight",
            "bias",
        );
        write_text(&out.join("scatter_w1.svg"), &svg)?;
    }

    match cosine_matrix(&fin.w2, 0.5) {
        Ok(c) if fin.is_finite() => {
            write_cosine(&out.join("final_w2.cosine"), &c)?;
            write_text(
                &out.join("final_w2_cosine.svg"),
                &matrix_heatmap(&c, &format!("cosine of second-layer rows, zeta={:.4}", zeta_of(&c))),
            )?;
        }
        _ => log::warn!("final second layer has no defined cosine matrix"),
    }

    let metrics = TrainMetrics {
        rd_w1: nullable(relative_change(init.w1.as_slice(), fin.w1.as_slice())),
        rd_w2: nullable(relative_change(init.w2.as_slice(), fin.w2.as_slice())),
        zeta: Some(row.zeta).filter(|v| v.is_finite()),
        zeta_init: Some(row.zeta_init).filter(|v| v.is_finite()),
        w1_spread_init: one_d.then(|| nullable(direction_spread(&init.w1))).flatten(),
        w1_spread_final: one_d.then(|| nullable(direction_spread(&fin.w1))).flatten(),
    };
    write_json(&out.join("metrics.json"), &metrics)?;

    save_checkpoint(out.join("init.ckpt"), init, Some(seed), Some(hash))?;
    save_checkpoint(out.join("final.ckpt"), fin, Some(seed), Some(hash))?;
    Ok(())
}

fn seeds_or_default(file: &ConfigFile) -> Vec<u64> {
    file.seeds.clone().unwrap_or_else(|| (0..8).collect())
}

fn widths_or_default(file: &ConfigFile) -> CliResult<Vec<usize>> {
    match &file.widths {
        Some(w) => w.resolve(),
        None => Ok(named_widths("desk").expect("desk widths exist")),
    }
}

fn cmd_sweep(args: &RunArgs) -> CliResult<i32> {
    let p = prepare(args)?;
    let widths = widths_or_default(&p.file)?;
    let seeds = seeds_or_default(&p.file);
    let first = *widths.first().ok_or_else(|| CliError::usage("width list is empty"))?;
    let (cfg, source) = p.file.hyper_config(first, p.data.input_dim(), p.data.output_dim())?;
    let config = json!({ "init": law_echo(&cfg, &source), "data": data_echo(&p) });
    let manifest = RunManifest::new("sweep", config, seeds.clone(), widths.clone(), Some(p.schedule), &args.out);
    announce(&manifest)?;

    let sweep = sweep_config(&cfg, &widths, &seeds, &p.data, &p.schedule, p.workers)?;
    write_runs_csv(&args.out.join(RUNS_FILE), &sweep.rows)?;
    let (_, _, cells, _) = cells_from_runs(&sweep.rows);
    let cell = &cells[0];
    write_cells_csv(&args.out.join("cells.csv"), &cells)?;
    write_text(&args.out.join("rd.svg"), &rd_plot(&sweep.rows, cell))?;
    print_cells(&cells);
    Ok(EXIT_OK)
}

/// log10 RD against log10 m, seed means per width.
fn rd_plot(rows: &[RunRow], cell: &PhaseCell) -> String {
    let means = |rd: fn(&RunRow) -> f64| -> Vec<(f64, f64)> {
        let mut ms: Vec<usize> = rows.iter().map(|r| r.m).collect();
        ms.sort_unstable();
        ms.dedup();
        ms.into_iter()
            .filter_map(|m| {
                let v: Vec<f64> = rows.iter().filter(|r| r.m == m && r.usable()).map(rd).filter(|v| *v > 0.0).collect();
                (!v.is_empty()).then(|| ((m as f64).log10(), (v.iter().sum::<f64>() / v.len() as f64).log10()))
            })
            .collect()
    };
    let (p1, p2) = (means(|r| r.rd_w1), means(|r| r.rd_w2));
    let slope = |f: Option<crate::experiment::SlopeFit>| f.map_or("n/a".to_string(), |f| format!("{:.3}", f.slope));
    scatter(
        &[
            Series {
                label: "W1",
                color: "#b2182b",
                points: &p1,
            },
            Series {
                label: "W2",
                color: "#2166ac",
                points: &p2,
            },
        ],
        &format!(
            "gamma2={}, gamma3={}: S_W1={}, S_W2={}",
            cell.gamma2,
            cell.gamma3,
            slope(cell.s_w1),
            slope(cell.s_w2)
        ),
        "log10 m",
        "log10 RD",
    )
}

fn cmd_phase(args: &RunArgs) -> CliResult<i32> {
    let p = prepare(args)?;
    let f = &p.file;
    if f.preset.is_some() || f.laws.is_some() || f.gamma2.is_some() || f.gamma3.is_some() || f.b.is_some() {
        return Err(CliError::usage(
            "phase takes its coordinates from `grid`; only `alpha_exp` applies",
        ));
    }
    let mut spec = PhaseScanSpec::default();
    if let Some(g) = &f.grid {
        spec.gamma2 = g.gamma2.clone();
        spec.gamma3 = g.gamma3.clone();
    }
    spec.widths = widths_or_default(f)?;
    spec.seeds = seeds_or_default(f);
    if let Some(a) = &f.alpha_exp {
        spec.alpha_exponent = match a {
            Exact::Number(x) => *x,
            Exact::Text(_) => {
                let r = a.rational()?;
                *r.numer() as f64 / *r.denom() as f64
            }
        };
    }
    let config = json!({
        "grid": { "gamma2": spec.gamma2, "gamma3": spec.gamma3 },
        "alpha_exp": spec.alpha_exponent,
        "data": data_echo(&p),
    });
    let manifest = RunManifest::new(
        "phase",
        config,
        spec.seeds.clone(),
        spec.widths.clone(),
        Some(p.schedule),
        &args.out,
    );
    announce(&manifest)?;

    let scan = phase_scan(
        &spec,
        &p.data,
        &p.schedule,
        &ScanOptions {
            workers: p.workers,
            state_dir: Some(args.out.clone()),
        },
    )?;
    write_phase_outputs(&args.out, &spec.gamma2, &spec.gamma3, &scan.cells, &scan.stars)?;
    print_cells(&scan.cells);
    if scan.runs.iter().all(|r| !r.usable()) {
        eprintln!("error: every run diverged or failed");
        return Ok(EXIT_ALL_FAILED);
    }
    Ok(EXIT_OK)
}

fn write_phase_outputs(out: &Path, g2: &[f64], g3: &[f64], cells: &[PhaseCell], stars: &[Star]) -> CliResult<()> {
    write_cells_csv(&out.join("cells.csv"), cells)?;
    write_stars_csv(&out.join("stars.csv"), stars)?;
    let star_pts = |layer: &str| -> Vec<(f64, f64)> {
        stars
            .iter()
            .filter(|s| s.layer == layer)
            .map(|s| if s.axis == "gamma3" { (s.fixed, s.at) } else { (s.at, s.fixed) })
            .collect()
    };
    let s1: Vec<Option<f64>> = cells.iter().map(|c| c.s_w1.map(|f| f.slope)).collect();
    let s2: Vec<Option<f64>> = cells.iter().map(|c| c.s_w2.map(|f| f.slope)).collect();
    let z: Vec<Option<f64>> = cells.iter().map(|c| c.zeta_mean).collect();
    for (name, values, title, layer) in [
        ("s_w1.svg", &s1, "S_W1: log-log slope of RD(W1) in m", "w1"),
        ("s_w2.svg", &s2, "S_W2: log-log slope of RD(W2) in m", "w2"),
    ] {
        let scale = ColorScale::diverging_for(values.iter().flatten().copied());
        let grid = Grid {
            xs: g2,
            ys: g3,
            values,
        };
        write_text(&out.join(name), &phase_heatmap(&grid, scale, title, &star_pts(layer)))?;
    }
    let grid = Grid { xs: g2, ys: g3, values: &z };
    let zeta_scale = ColorScale::Sequential { lo: 0.0, hi: 1.0 };
    write_text(&out.join("zeta.svg"), &phase_heatmap(&grid, zeta_scale, "zeta at the largest width", &[]))?;
    Ok(())
}

fn print_cells(cells: &[PhaseCell]) {
    let f = |v: Option<f64>| v.map_or("missing".to_string(), |v| format!("{v:+.4}"));
    println!("gamma2\tgamma3\tS_W1\tS_W2\tzeta\truns\tdiverged\tfailed");
    for c in cells {
        println!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            c.gamma2,
            c.gamma3,
            f(c.s_w1.map(|s| s.slope)),
            f(c.s_w2.map(|s| s.slope)),
            c.zeta_mean.map_or("missing".to_string(), |z| format!("{z:.4}")),
            c.n_runs,
            c.n_diverged,
            c.n_failed
        );
    }
}

fn cmd_condense(checkpoint: &Path, out: &Path, fraction: f64) -> CliResult<i32> {
    let bytes = fs::read(checkpoint).map_err(|e| Error::io(checkpoint, e))?;
    let (net, header) = load_checkpoint(checkpoint)?;
    let config = json!({
        "checkpoint": checkpoint,
        "checkpoint_sha256": hex::encode(Sha256::digest(&bytes)),
        "fraction": fraction,
        "header": header,
    });
    let manifest = RunManifest::new("condense", config, header.seed.into_iter().collect(), vec![net.width()], None, out);
    announce(&manifest)?;
    let c = cosine_matrix(&net.w2, fraction)?;
    let zeta = zeta_of(&c);
    write_cosine(&out.join("w2.cosine"), &c)?;
    write_text(
        &out.join("w2_cosine.svg"),
        &matrix_heatmap(&c, &format!("cosine of second-layer rows, zeta={zeta:.4}")),
    )?;
    let half = (fraction == 0.5).then(|| condensation_index(&net.w2).ok()).flatten();
    write_json(
        &out.join("zeta.json"),
        &json!({ "zeta": zeta, "m": net.width(), "m_selected": c.rows(), "fraction": fraction, "zeta_top_half": half }),
    )?;
    println!("zeta = {}", fmt_f64(zeta));
    Ok(EXIT_OK)
}

fn cmd_report(dir: &Path) -> CliResult<i32> {
    let runs_path = dir.join(RUNS_FILE);
    if runs_path.exists() {
        let runs = read_runs(&runs_path)?;
        if runs.is_empty() {
            return Err(CliError {
                code: EXIT_ALL_FAILED,
                message: format!("{} holds no runs", runs_path.display()),
            });
        }
        let (g2, g3, cells, stars) = cells_from_runs(&runs);
        write_phase_outputs(dir, &g2, &g3, &cells, &stars)?;
        print_cells(&cells);
        for s in &stars {
            println!("star: {} slope crosses 0 along {} at {} = {:.4}, {} fixed at {}", s.layer, s.axis, s.axis, s.at, if s.axis == "gamma3" { "gamma2" } else { "gamma3" }, s.fixed);
        }
        let diverged = runs.iter().filter(|r| !r.usable()).count();
        println!("{} runs, {} diverged", runs.len(), diverged);
        return Ok(if diverged == runs.len() { EXIT_ALL_FAILED } else { EXIT_OK });
    }
    let summary = dir.join("summary.json");
    let metrics = dir.join("metrics.json");
    if summary.exists() && metrics.exists() {
        for path in [summary, metrics] {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            println!("{}:\n{}", path.display(), text.trim_end());
        }
        return Ok(EXIT_OK);
    }
    let zeta = dir.join("zeta.json");
    if zeta.exists() {
        let text = fs::read_to_string(&zeta).map_err(|e| Error::io(&zeta, e))?;
        println!("{}", text.trim_end());
        return Ok(EXIT_OK);
    }
    Err(Error::io(
        dir,
        std::io::Error::new(std::io::ErrorKind::NotFound, "no runs.csv, summary.json or zeta.json"),
    )
    .into())
}
