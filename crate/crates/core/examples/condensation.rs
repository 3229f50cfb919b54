//! Condensation index of the second layer at initialization and after
//! training deep in the condensed region, with cosine-matrix heatmaps.
//!
//! Usage: cargo run --release --example condensation [out_dir]

use std::path::PathBuf;

use relu_phase::data::{synthetic_1d, SyntheticSpec};
use relu_phase::metrics::{cosine_matrix, zeta_of};
use relu_phase::model::train;
use relu_phase::plot::matrix_heatmap;
use relu_phase::{config_from_gammas, init_network_seeded, PhasePoint, Schedule};

fn main() -> relu_phase::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/example-out/condensation".into()));
    std::fs::create_dir_all(&out).expect("create output directory");
    let data = synthetic_1d(&SyntheticSpec::default())?;
    let cfg = config_from_gammas(PhasePoint::new(0.5, 2.8)?, 1000, 1, 1)?;
    let rec = train(init_network_seeded(&cfg, 0)?, &data, &Schedule::default())?;
    println!("{} after {} steps", rec.stop_reason, rec.steps_taken);
    for (name, net) in [("init", &rec.initial_snapshot), ("final", &rec.final_snapshot)] {
        let c = cosine_matrix(&net.w2, 0.5)?;
        let zeta = zeta_of(&c);
        println!("{name}: zeta = {zeta:.4} over {} rows", c.rows());
        let path = out.join(format!("cosine_{name}.svg"));
        std::fs::write(&path, matrix_heatmap(&c, &format!("{name}, zeta={zeta:.4}"))).expect("write svg");
    }
    Ok(())
}
