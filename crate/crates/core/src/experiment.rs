//! Width sweeps, log-log slope fits, zero crossings and phase-grid scans.
//!
//! Every run is keyed by `(gamma2, gamma3, m, seed)` and fully determined by
//! that key, the dataset and the schedule, so results never depend on worker
//! count or completion order.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{condensation_index, relative_change};
use crate::model::{init_network_seeded, train, Dataset, Schedule, StepSize, StopReason, TrainRecord};
use crate::scaling::{config_from_gammas, effective_lr, kappas, rational_from_f64, HyperConfig, PhasePoint, Rational};

/// Float formatting used in every CSV: 17 significant digits, which round-trips.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// The default width list and two wider ones.
pub const WIDTH_PRESETS: [(&str, &[usize]); 3] = [
    ("desk", &[100, 500, 1000, 2000, 5000]),
    ("wide", &[100, 1000, 2000, 5000, 10000]),
    ("wide-grid", &[100, 1000, 2500, 5000, 10000]),
];

pub fn named_widths(name: &str) -> Option<Vec<usize>> {
    WIDTH_PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, w)| w.to_vec())
}

/// Schedule actually used for `config`: a constant learning rate is read as a
/// normalized-time rate and converted with [`effective_lr`].
pub fn schedule_for(config: &HyperConfig, schedule: &Schedule) -> Result<Schedule> {
    let mut s = *schedule;
    if let StepSize::Constant { lr } = schedule.step {
        s.step = StepSize::Constant {
            lr: effective_lr(config, lr)?,
        };
    }
    Ok(s)
}

/// One training run summarized. Metrics that are undefined (zero final
/// weights) are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub gamma2: f64,
    pub gamma3: f64,
    pub m: usize,
    pub seed: u64,
    pub rd_w1: f64,
    pub rd_w2: f64,
    pub zeta: f64,
    pub final_loss: f64,
    pub steps: usize,
    pub stop_reason: StopReason,
    pub zeta_init: f64,
    pub initial_loss: f64,
}

impl RunRow {
    pub fn usable(&self) -> bool {
        self.stop_reason != StopReason::Diverged
    }

    fn key(&self) -> RunKey {
        RunKey::new(self.gamma2, self.gamma3, self.m, self.seed)
    }
}

pub const RUNS_HEADER: &str =
    "gamma2,gamma3,m,seed,rd_w1,rd_w2,zeta,final_loss,steps,stop_reason,zeta_init,initial_loss";

impl RunRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(self.gamma2),
            fmt_f64(self.gamma3),
            self.m,
            self.seed,
            fmt_f64(self.rd_w1),
            fmt_f64(self.rd_w2),
            fmt_f64(self.zeta),
            fmt_f64(self.final_loss),
            self.steps,
            self.stop_reason,
            fmt_f64(self.zeta_init),
            fmt_f64(self.initial_loss),
        )
    }

    pub fn from_csv(line: &str) -> Option<RunRow> {
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 12 {
            return None;
        }
        let stop_reason = match f[9] {
            "converged" => StopReason::Converged,
            "max_steps" => StopReason::MaxSteps,
            "diverged" => StopReason::Diverged,
            _ => return None,
        };
        Some(RunRow {
            gamma2: f[0].parse().ok()?,
            gamma3: f[1].parse().ok()?,
            m: f[2].parse().ok()?,
            seed: f[3].parse().ok()?,
            rd_w1: f[4].parse().ok()?,
            rd_w2: f[5].parse().ok()?,
            zeta: f[6].parse().ok()?,
            final_loss: f[7].parse().ok()?,
            steps: f[8].parse().ok()?,
            stop_reason,
            zeta_init: f[10].parse().ok()?,
            initial_loss: f[11].parse().ok()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct RunKey {
    gamma2: String,
    gamma3: String,
    m: usize,
    seed: u64,
}

impl RunKey {
    fn new(gamma2: f64, gamma3: f64, m: usize, seed: u64) -> Self {
        RunKey {
            gamma2: fmt_f64(gamma2),
            gamma3: fmt_f64(gamma3),
            m,
            seed,
        }
    }
}

/// Initializes `config` with `seed`, trains and summarizes. The full record is
/// returned too for callers that want snapshots.
pub fn run_config(
    config: &HyperConfig,
    seed: u64,
    data: &Dataset,
    schedule: &Schedule,
) -> Result<(RunRow, TrainRecord)> {
    let config = config.clone().with_dims(data.input_dim(), data.output_dim());
    let summary = kappas(&config);
    let net = init_network_seeded(&config, seed)?;
    let record = train(net, data, &schedule_for(&config, schedule)?)?;
    let (init, fin) = (&record.initial_snapshot, &record.final_snapshot);
    let nan_if_undefined = |r: Result<f64>| r.unwrap_or(f64::NAN);
    let row = RunRow {
        gamma2: summary.gamma2_f64(),
        gamma3: summary.gamma3_f64(),
        m: config.m,
        seed,
        rd_w1: nan_if_undefined(relative_change(init.w1.as_slice(), fin.w1.as_slice())),
        rd_w2: nan_if_undefined(relative_change(init.w2.as_slice(), fin.w2.as_slice())),
        zeta: nan_if_undefined(condensation_index(&fin.w2)),
        final_loss: record.final_loss(),
        steps: record.steps_taken,
        stop_reason: record.stop_reason,
        zeta_init: nan_if_undefined(condensation_index(&init.w2)),
        initial_loss: record.initial_loss(),
    };
    Ok((row, record))
}

pub fn run_point(point: PhasePoint, m: usize, seed: u64, data: &Dataset, schedule: &Schedule) -> Result<RunRow> {
    let config = config_from_gammas(point, m, data.input_dim(), data.output_dim())?;
    Ok(run_config(&config, seed, data, schedule)?.0)
}

/// Worker count from the environment variable `var`, else the number of CPUs.
pub fn default_workers(var: &str) -> usize {
    std::env::var(var)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|w: &usize| *w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `work` over `jobs` on `workers` threads. Results reach `sink` on the
/// calling thread, one at a time, in completion order.
pub fn run_queue<J, R, W, S>(jobs: &[J], workers: usize, work: W, mut sink: S)
where
    J: Sync,
    R: Send,
    W: Fn(&J) -> R + Sync,
    S: FnMut(usize, R),
{
    let workers = workers.clamp(1, jobs.len().max(1));
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, work) = (&next, &work);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                if tx.send((i, work(&jobs[i]))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, r) in rx {
            sink(i, r);
        }
    });
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub gamma2: f64,
    pub gamma3: f64,
    pub rows: Vec<RunRow>,
}

impl SweepResult {
    pub fn fit_w1(&self) -> Result<SlopeFit> {
        fit_slope(&usable_points(&self.rows, |r| r.rd_w1))
    }

    pub fn fit_w2(&self) -> Result<SlopeFit> {
        fit_slope(&usable_points(&self.rows, |r| r.rd_w2))
    }

    /// Mean final zeta over seeds at the largest width.
    pub fn zeta_mean(&self) -> Option<f64> {
        zeta_at_largest(&self.rows)
    }
}

fn usable_points(rows: &[RunRow], rd: impl Fn(&RunRow) -> f64) -> Vec<(f64, f64)> {
    rows.iter().filter(|r| r.usable()).map(|r| (r.m as f64, rd(r))).collect()
}

fn zeta_at_largest(rows: &[RunRow]) -> Option<f64> {
    let m = rows.iter().filter(|r| r.usable()).map(|r| r.m).max()?;
    let z: Vec<f64> = rows
        .iter()
        .filter(|r| r.usable() && r.m == m && r.zeta.is_finite())
        .map(|r| r.zeta)
        .collect();
    (!z.is_empty()).then(|| z.iter().sum::<f64>() / z.len() as f64)
}

fn check_widths(widths: &[usize], seeds: &[u64]) -> Result<()> {
    if widths.len() < 2 || widths.windows(2).any(|w| w[0] >= w[1]) || widths[0] == 0 {
        return Err(Error::InvalidConfig(format!(
            "widths must be positive, strictly increasing and at least two: {widths:?}"
        )));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("seed list is empty".into()));
    }
    Ok(())
}

/// Jobs ordered widest first so the longest runs start early.
fn width_seed_jobs(widths: &[usize], seeds: &[u64]) -> Vec<(usize, u64)> {
    let mut jobs: Vec<(usize, u64)> = widths
        .iter()
        .flat_map(|&m| seeds.iter().map(move |&s| (m, s)))
        .collect();
    jobs.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    jobs
}

/// Trains every `(width, seed)` pair at one phase point. Diverged runs stay in
/// the rows but are left out of fits; if all diverge the sweep fails.
pub fn width_sweep(
    point: PhasePoint,
    widths: &[usize],
    seeds: &[u64],
    data: &Dataset,
    schedule: &Schedule,
    workers: usize,
) -> Result<SweepResult> {
    check_widths(widths, seeds)?;
    let (d, o) = (data.input_dim(), data.output_dim());
    let config = config_from_gammas(point, widths[0], d, o)?;
    sweep_config(&config, widths, seeds, data, schedule, workers)
}

/// [`width_sweep`] for arbitrary laws, evaluated at each width.
pub fn sweep_config(
    config: &HyperConfig,
    widths: &[usize],
    seeds: &[u64],
    data: &Dataset,
    schedule: &Schedule,
    workers: usize,
) -> Result<SweepResult> {
    check_widths(widths, seeds)?;
    let jobs = width_seed_jobs(widths, seeds);
    let mut rows = Vec::with_capacity(jobs.len());
    let mut first_err = None;
    run_queue(
        &jobs,
        workers,
        |&(m, seed)| run_config(&config.at_width(m), seed, data, schedule).map(|r| r.0),
        |_, r| match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        },
    );
    if let Some(e) = first_err {
        return Err(e);
    }
    rows.sort_by(|a, b| a.m.cmp(&b.m).then(a.seed.cmp(&b.seed)));
    let s = kappas(config);
    if rows.iter().all(|r| !r.usable()) {
        return Err(Error::SweepFailed {
            gamma2: s.gamma2_f64(),
            gamma3: s.gamma3_f64(),
        });
    }
    Ok(SweepResult {
        gamma2: s.gamma2_f64(),
        gamma3: s.gamma3_f64(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Least-squares line through `(log m, log rd)`.
///
/// Values sharing a width are averaged first (seed averaging happens before
/// the log). Points with `rd <= 0`, a non-finite `rd` or `m <= 0` are dropped
/// with a warning.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let mut by_width: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
    for &(m, rd) in points {
        if !(m > 0.0 && m.is_finite() && rd > 0.0 && rd.is_finite()) {
            log::warn!("dropping point (m={m}, rd={rd}) from slope fit");
            continue;
        }
        let e = by_width.entry(m.to_bits()).or_insert((m, 0.0, 0));
        e.1 += rd;
        e.2 += 1;
    }
    let xy: Vec<(f64, f64)> = by_width
        .values()
        .map(|&(m, sum, k)| (m.ln(), (sum / k as f64).ln()))
        .collect();
    let n = xy.len();
    if n < 2 {
        return Err(Error::TooFewPoints(n));
    }
    let nf = n as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = xy.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = xy
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
        n_points: n,
    })
}

/// Linear-interpolation roots of a `(coordinate, slope)` series sorted by
/// coordinate: one per adjacent pair of opposite sign, plus samples that are
/// exactly zero.
pub fn zero_crossing(series: &[(f64, f64)]) -> Vec<f64> {
    let mut roots = Vec::new();
    for (i, &(g, s)) in series.iter().enumerate() {
        if s == 0.0 {
            roots.push(g);
        }
        if let Some(&(gb, sb)) = series.get(i + 1) {
            if s * sb < 0.0 {
                roots.push(g - s * (gb - g) / (sb - s));
            }
        }
    }
    roots
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub gamma2: f64,
    pub gamma3: f64,
    pub s_w1: Option<SlopeFit>,
    pub s_w2: Option<SlopeFit>,
    /// mean final zeta over seeds at the largest width
    pub zeta_mean: Option<f64>,
    pub n_seeds: usize,
    pub n_runs: usize,
    pub n_diverged: usize,
    /// runs that raised an error instead of finishing
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseScanSpec {
    pub gamma2: Vec<f64>,
    pub gamma3: Vec<f64>,
    pub widths: Vec<usize>,
    pub seeds: Vec<u64>,
    /// `alpha = m^alpha_exponent`
    #[serde(default)]
    pub alpha_exponent: f64,
}

impl Default for PhaseScanSpec {
    fn default() -> Self {
        PhaseScanSpec {
            gamma2: (0..=6).map(|i| f64::from(i) * 0.25).collect(),
            gamma3: (0..=10).map(|i| f64::from(i) * 0.3).map(|g| (g * 10.0).round() / 10.0).collect(),
            widths: WIDTH_PRESETS[0].1.to_vec(),
            seeds: (0..8).collect(),
            alpha_exponent: 0.0,
        }
    }
}

impl PhaseScanSpec {
    fn point(&self, gamma2: f64, gamma3: f64) -> Result<PhasePoint> {
        Ok(PhasePoint::new(gamma2, gamma3)?.with_alpha_exponent(rational_from_f64(self.alpha_exponent)?))
    }
}

/// Interpolated sign change of a fitted slope along one grid line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Star {
    /// "w1" or "w2"
    pub layer: String,
    /// coordinate varied along the line: "gamma3" (fixed gamma2) or "gamma2" (fixed gamma3)
    pub axis: String,
    pub fixed: f64,
    pub at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseScan {
    pub spec: PhaseScanSpec,
    /// gamma2-major, in grid order
    pub cells: Vec<PhaseCell>,
    pub runs: Vec<RunRow>,
    pub stars: Vec<Star>,
}

impl PhaseScan {
    pub fn cell(&self, gamma2: f64, gamma3: f64) -> Option<&PhaseCell> {
        self.cells.iter().find(|c| c.gamma2 == gamma2 && c.gamma3 == gamma3)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScanOptions {
    pub workers: usize,
    /// directory holding `runs.csv`; completed runs found there are reused
    pub state_dir: Option<PathBuf>,
}

pub const RUNS_FILE: &str = "runs.csv";

/// Full Cartesian scan. With a state directory each finished run is appended
/// to `runs.csv` as it completes, rerunning skips rows already there, and the
/// file is rewritten in sorted order at the end.
pub fn phase_scan(spec: &PhaseScanSpec, data: &Dataset, schedule: &Schedule, opts: &ScanOptions) -> Result<PhaseScan> {
    if spec.gamma2.is_empty() || spec.gamma3.is_empty() {
        return Err(Error::InvalidConfig("phase grid is empty".into()));
    }
    check_widths(&spec.widths, &spec.seeds)?;
    for &g2 in &spec.gamma2 {
        for &g3 in &spec.gamma3 {
            spec.point(g2, g3)?;
        }
    }

    let mut done: HashMap<RunKey, RunRow> = HashMap::new();
    let mut log = None;
    if let Some(dir) = &opts.state_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(RUNS_FILE);
        done = read_runs(&path)?
            .into_iter()
            .map(|r| (r.key(), r))
            .collect();
        let fresh = !path.exists();
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        if fresh {
            writeln!(f, "{RUNS_HEADER}").map_err(|e| Error::io(&path, e))?;
        }
        log = Some((f, path));
    }

    let mut jobs = Vec::new();
    for &m in spec.widths.iter().rev() {
        for &g2 in &spec.gamma2 {
            for &g3 in &spec.gamma3 {
                for &seed in &spec.seeds {
                    if !done.contains_key(&RunKey::new(g2, g3, m, seed)) {
                        jobs.push((g2, g3, m, seed));
                    }
                }
            }
        }
    }
    if !done.is_empty() {
        log::info!("resuming: {} runs on file, {} to go", done.len(), jobs.len());
    }

    let mut failed: HashMap<(String, String), usize> = HashMap::new();
    let mut io_err = None;
    run_queue(
        &jobs,
        opts.workers.max(1),
        |&(g2, g3, m, seed)| spec.point(g2, g3).and_then(|p| run_point(p, m, seed, data, schedule)),
        |i, r| {
            let (g2, g3, m, seed) = jobs[i];
            match r {
                Ok(mut row) => {
                    // keep the grid's own spelling of the coordinates
                    row.gamma2 = g2;
                    row.gamma3 = g3;
                    if let Some((f, path)) = log.as_mut() {
                        if let Err(e) = writeln!(f, "{}", row.to_csv()).and_then(|_| f.flush()) {
                            io_err.get_or_insert(Error::io(path.as_path(), e));
                        }
                    }
                    done.insert(row.key(), row);
                }
                Err(e) => {
                    log::warn!("run gamma2={g2} gamma3={g3} m={m} seed={seed} failed: {e}");
                    *failed.entry((fmt_f64(g2), fmt_f64(g3))).or_default() += 1;
                }
            }
        },
    );
    if let Some(e) = io_err {
        return Err(e);
    }

    let mut runs = Vec::new();
    let mut cells = Vec::new();
    for &g2 in &spec.gamma2 {
        for &g3 in &spec.gamma3 {
            let rows: Vec<RunRow> = spec
                .widths
                .iter()
                .flat_map(|&m| spec.seeds.iter().map(move |&s| (m, s)))
                .filter_map(|(m, s)| done.get(&RunKey::new(g2, g3, m, s)).cloned())
                .collect();
            let n_failed = failed.get(&(fmt_f64(g2), fmt_f64(g3))).copied().unwrap_or(0);
            cells.push(summarize_cell(g2, g3, &rows, spec.seeds.len(), n_failed));
            runs.extend(rows);
        }
    }
    if let Some((_, path)) = &log {
        write_runs_csv(path, &runs)?;
    }
    let stars = find_stars(&spec.gamma2, &spec.gamma3, &cells);
    Ok(PhaseScan {
        spec: spec.clone(),
        cells,
        runs,
        stars,
    })
}

fn summarize_cell(gamma2: f64, gamma3: f64, rows: &[RunRow], n_seeds: usize, n_failed: usize) -> PhaseCell {
    let fit = |rd: fn(&RunRow) -> f64| fit_slope(&usable_points(rows, rd)).ok();
    PhaseCell {
        gamma2,
        gamma3,
        s_w1: fit(|r| r.rd_w1),
        s_w2: fit(|r| r.rd_w2),
        zeta_mean: zeta_at_largest(rows),
        n_seeds,
        n_runs: rows.len(),
        n_diverged: rows.iter().filter(|r| !r.usable()).count(),
        n_failed,
    }
}

/// Zero crossings of the fitted slopes along every grid line, for cells laid
/// out gamma2-major over the two axes.
pub fn find_stars(gamma2: &[f64], gamma3: &[f64], cells: &[PhaseCell]) -> Vec<Star> {
    let n3 = gamma3.len();
    let mut stars = Vec::new();
    for (layer, pick) in [
        ("w1", (|c: &PhaseCell| c.s_w1) as fn(&PhaseCell) -> Option<SlopeFit>),
        ("w2", |c: &PhaseCell| c.s_w2),
    ] {
        // skip missing cells rather than interpolating across them
        let line = |it: &mut dyn Iterator<Item = (f64, &PhaseCell)>| -> Vec<(f64, f64)> {
            it.filter_map(|(g, c)| pick(c).map(|f| (g, f.slope))).collect()
        };
        for (i, &g2) in gamma2.iter().enumerate() {
            let mut it = (0..n3).map(|j| (gamma3[j], &cells[i * n3 + j]));
            let mut series = line(&mut it);
            series.sort_by(|a, b| a.0.total_cmp(&b.0));
            for at in zero_crossing(&series) {
                stars.push(Star {
                    layer: layer.into(),
                    axis: "gamma3".into(),
                    fixed: g2,
                    at,
                });
            }
        }
        for (j, &g3) in gamma3.iter().enumerate() {
            let mut it = gamma2.iter().enumerate().map(|(i, &g2)| (g2, &cells[i * n3 + j]));
            let mut series = line(&mut it);
            series.sort_by(|a, b| a.0.total_cmp(&b.0));
            for at in zero_crossing(&series) {
                stars.push(Star {
                    layer: layer.into(),
                    axis: "gamma2".into(),
                    fixed: g3,
                    at,
                });
            }
        }
    }
    stars
}

/// Rebuilds the grid, cells and stars from a list of runs (for example a
/// partially finished `runs.csv`). Axes are the sorted distinct coordinates.
pub fn cells_from_runs(runs: &[RunRow]) -> (Vec<f64>, Vec<f64>, Vec<PhaseCell>, Vec<Star>) {
    let axis = |f: fn(&RunRow) -> f64| {
        let mut v: Vec<f64> = runs.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let (g2s, g3s) = (axis(|r| r.gamma2), axis(|r| r.gamma3));
    let mut cells = Vec::new();
    for &g2 in &g2s {
        for &g3 in &g3s {
            let rows: Vec<RunRow> = runs
                .iter()
                .filter(|r| r.gamma2 == g2 && r.gamma3 == g3)
                .cloned()
                .collect();
            let mut seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
            seeds.sort_unstable();
            seeds.dedup();
            cells.push(summarize_cell(g2, g3, &rows, seeds.len(), 0));
        }
    }
    let stars = find_stars(&g2s, &g3s, &cells);
    (g2s, g3s, cells, stars)
}

/// Reads a runs file; a missing file is an empty list. Unparseable lines
/// (such as a partial last line after a crash) are skipped.
pub fn read_runs(path: &Path) -> Result<Vec<RunRow>> {
    let f = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut rows = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.starts_with("gamma2,") || line.trim().is_empty() {
            continue;
        }
        match RunRow::from_csv(&line) {
            Some(r) => rows.push(r),
            None => log::warn!("skipping malformed line in {}: {line}", path.display()),
        }
    }
    Ok(rows)
}

/// Writes the whole file next to `path` first, then renames it into place.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_runs_csv(path: &Path, rows: &[RunRow]) -> Result<()> {
    let mut s = String::from(RUNS_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    write_atomic(path, &s)
}

fn opt(v: Option<f64>) -> String {
    fmt_f64(v.unwrap_or(f64::NAN))
}

pub fn write_cells_csv(path: &Path, cells: &[PhaseCell]) -> Result<()> {
    let mut s = String::from("gamma2,gamma3,s_w1,r2_w1,s_w2,r2_w2,zeta_mean,n_seeds,n_runs,n_diverged,n_failed\n");
    for c in cells {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt_f64(c.gamma2),
            fmt_f64(c.gamma3),
            opt(c.s_w1.map(|f| f.slope)),
            opt(c.s_w1.map(|f| f.r_squared)),
            opt(c.s_w2.map(|f| f.slope)),
            opt(c.s_w2.map(|f| f.r_squared)),
            opt(c.zeta_mean),
            c.n_seeds,
            c.n_runs,
            c.n_diverged,
            c.n_failed,
        ));
    }
    write_atomic(path, &s)
}

pub fn write_stars_csv(path: &Path, stars: &[Star]) -> Result<()> {
    let mut s = String::from("layer,axis,fixed,at\n");
    for st in stars {
        s.push_str(&format!("{},{},{},{}\n", st.layer, st.axis, fmt_f64(st.fixed), fmt_f64(st.at)));
    }
    write_atomic(path, &s)
}

/// Configurations meant to share phase coordinates, compared by their fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMember {
    pub label: String,
    pub config: HyperConfig,
}

/// Members at one phase point that differ only in the output scale law `alpha = m^a`.
pub fn alpha_law_group(point: PhasePoint, alpha_exponents: &[Rational], d: usize, d_out: usize) -> Result<Vec<GroupMember>> {
    alpha_exponents
        .iter()
        .map(|&a| {
            Ok(GroupMember {
                label: format!("alpha=m^{a}"),
                config: config_from_gammas(point.with_alpha_exponent(a), 1, d, d_out)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberResult {
    pub label: String,
    pub s_w1: SlopeFit,
    pub s_w2: SlopeFit,
    pub zeta_mean: Option<f64>,
    pub rows: Vec<RunRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub gamma2: f64,
    pub gamma3: f64,
    pub members: Vec<MemberResult>,
    /// largest pairwise difference of the fitted slopes
    pub spread_w1: f64,
    pub spread_w2: f64,
}

fn spread(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = v.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = v.fold(f64::INFINITY, f64::min);
    max - min
}

/// Sweeps every member over the same widths and seeds and compares the slopes.
pub fn group_consistency(
    members: &[GroupMember],
    widths: &[usize],
    seeds: &[u64],
    data: &Dataset,
    schedule: &Schedule,
    workers: usize,
) -> Result<GroupReport> {
    let first = members
        .first()
        .ok_or_else(|| Error::InvalidConfig("group has no members".into()))?;
    let s0 = kappas(&first.config);
    for m in &members[1..] {
        let s = kappas(&m.config);
        if (s.gamma2, s.gamma3) != (s0.gamma2, s0.gamma3) {
            return Err(Error::GammaMismatch(format!(
                "{} has ({}, {}), {} has ({}, {})",
                first.label, s0.gamma2, s0.gamma3, m.label, s.gamma2, s.gamma3
            )));
        }
    }
    let mut results = Vec::new();
    for m in members {
        let sweep = sweep_config(&m.config, widths, seeds, data, schedule, workers)?;
        results.push(MemberResult {
            label: m.label.clone(),
            s_w1: sweep.fit_w1()?,
            s_w2: sweep.fit_w2()?,
            zeta_mean: sweep.zeta_mean(),
            rows: sweep.rows,
        });
    }
    Ok(GroupReport {
        gamma2: s0.gamma2_f64(),
        gamma3: s0.gamma3_f64(),
        spread_w1: spread(results.iter().map(|r| r.s_w1.slope)),
        spread_w2: spread(results.iter().map(|r| r.s_w2.slope)),
        members: results,
    })
}
