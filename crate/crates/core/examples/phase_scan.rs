//! A coarse phase scan with resumable state, then heatmaps of the fitted slopes.
//!
//! Usage: cargo run --release --example phase_scan [out_dir]

use std::path::PathBuf;

use relu_phase::data::{synthetic_1d, SyntheticSpec};
use relu_phase::experiment::{phase_scan, PhaseScanSpec, ScanOptions};
use relu_phase::plot::{phase_heatmap, ColorScale, Grid};
use relu_phase::Schedule;

fn main() -> relu_phase::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/example-out/phase_scan".into()));
    let data = synthetic_1d(&SyntheticSpec::default())?;
    let spec = PhaseScanSpec {
        gamma2: vec![0.0, 0.5, 1.0],
        gamma3: vec![0.5, 1.5, 2.5],
        widths: vec![100, 200, 400],
        seeds: vec![0, 1],
        alpha_exponent: 0.0,
    };
    let opts = ScanOptions {
        workers: relu_phase::experiment::default_workers("RELU_PHASE_WORKERS"),
        state_dir: Some(out.clone()),
    };
    let scan = phase_scan(&spec, &data, &Schedule::default(), &opts)?;
    for c in &scan.cells {
        println!(
            "({}, {}): S_W1={:+.3} S_W2={:+.3}",
            c.gamma2,
            c.gamma3,
            c.s_w1.map_or(f64::NAN, |f| f.slope),
            c.s_w2.map_or(f64::NAN, |f| f.slope)
        );
    }
    for s in &scan.stars {
        println!("{} slope changes sign at {}={:.3} ({} fixed at {})", s.layer, s.axis, s.at, if s.axis == "gamma3" { "gamma2" } else { "gamma3" }, s.fixed);
    }
    let values: Vec<Option<f64>> = scan.cells.iter().map(|c| c.s_w1.map(|f| f.slope)).collect();
    let grid = Grid { xs: &spec.gamma2, ys: &spec.gamma3, values: &values };
    let scale = ColorScale::diverging_for(values.iter().flatten().copied());
    let path = out.join("s_w1.svg");
    std::fs::write(&path, phase_heatmap(&grid, scale, "S_W1", &[])).expect("write svg");
    println!("wrote {} (rerunning reuses {})", path.display(), out.join("runs.csv").display());
    Ok(())
}
