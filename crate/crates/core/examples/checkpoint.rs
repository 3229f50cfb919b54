//! Saves a trained network, loads it back and checks it is bit-identical.

use relu_phase::data::{synthetic_1d, SyntheticSpec};
use relu_phase::metrics::condensation_index;
use relu_phase::model::{load_checkpoint, save_checkpoint, train};
use relu_phase::{config_from_gammas, init_network_seeded, PhasePoint, Schedule};

fn main() -> relu_phase::Result<()> {
    let data = synthetic_1d(&SyntheticSpec::default())?;
    let cfg = config_from_gammas(PhasePoint::new(0.0, 2.0)?, 300, 1, 1)?;
    let rec = train(init_network_seeded(&cfg, 5)?, &data, &Schedule::default())?;
    let path = std::env::temp_dir().join("relu-phase-example.ckpt");
    save_checkpoint(&path, &rec.final_snapshot, Some(5), None)?;
    let (net, header) = load_checkpoint(&path)?;
    println!("{} ({} bytes): m={} d={} seed={:?}", path.display(), std::fs::metadata(&path).map_or(0, |m| m.len()), header.m, header.d, header.seed);
    println!("identical after reload: {}", net == rec.final_snapshot);
    println!("zeta of the saved second layer: {:.4}", condensation_index(&net.w2)?);
    Ok(())
}
