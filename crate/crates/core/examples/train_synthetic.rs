//! Trains on the 1-d toy task in a linear-like and a condensed setting and
//! writes first-layer scatter plots (weight against bias, before and after).
//!
//! Usage: cargo run --release --example train_synthetic [out_dir]

use std::path::PathBuf;

use relu_phase::data::{synthetic_1d, SyntheticSpec};
use relu_phase::metrics::{direction_spread, RegimeMetrics};
use relu_phase::model::train;
use relu_phase::plot::{scatter, Series};
use relu_phase::{config_from_gammas, init_network_seeded, PhasePoint, Schedule};

fn main() -> relu_phase::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/example-out/train_synthetic".into()));
    std::fs::create_dir_all(&out).expect("create output directory");
    let data = synthetic_1d(&SyntheticSpec::default())?;
    for (g2, g3) in [(0.0, 0.5), (0.0, 2.5)] {
        let cfg = config_from_gammas(PhasePoint::new(g2, g3)?, 1000, 1, 1)?;
        let rec = train(init_network_seeded(&cfg, 0)?, &data, &Schedule::default().with_max_steps(20_000))?;
        let m = RegimeMetrics::from_record(&rec)?;
        println!(
            "gamma3={g3}: {} after {} steps, RD(W1)={:.3}, RD(W2)={:.3}, zeta={:.3}, spread {:.3} -> {:.3}",
            rec.stop_reason,
            rec.steps_taken,
            m.rd_w1,
            m.rd_w2,
            m.zeta,
            direction_spread(&rec.initial_snapshot.w1)?,
            direction_spread(&rec.final_snapshot.w1)?
        );
        let pts = |rows: &[Vec<f64>]| -> Vec<(f64, f64)> { rows.iter().map(|r| (r[0], r[1])).collect() };
        let (init, fin) = (pts(&m.w1_scatter_init), pts(&m.w1_scatter_final));
        let svg = scatter(
            &[
                Series { label: "init", color: "#a0a0a0", points: &init },
                Series { label: "final", color: "#1f5fbf", points: &fin },
            ],
            &format!("gamma2={g2}, gamma3={g3}"),
            "weight",
            "bias",
        );
        let path = out.join(format!("scatter_g3_{g3}.svg"));
        std::fs::write(&path, svg).expect("write svg");
        println!("  wrote {}", path.display());
    }
    Ok(())
}
