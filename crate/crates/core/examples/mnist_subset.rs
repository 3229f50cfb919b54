//! Trains on the bundled MNIST subset (784 inputs, 10 one-hot outputs) with
//! two initializations and compares how far each layer moves.

use relu_phase::data::{bundled_mnist, load_idx};
use relu_phase::experiment::run_config;
use relu_phase::{config_from_gammas, preset, PhasePoint, Preset, Schedule};

fn main() -> relu_phase::Result<()> {
    let (images, labels) = bundled_mnist();
    let data = load_idx(images, labels, 200)?;
    println!("{} samples, {} inputs, {} outputs", data.len(), data.input_dim(), data.output_dim());
    let schedule = Schedule::default().with_max_steps(300);
    let configs = [
        ("He", preset(Preset::He, 200, 784, 10)?),
        ("gamma=(0.5, 2.5)", config_from_gammas(PhasePoint::new(0.5, 2.5)?, 200, 784, 10)?),
    ];
    for (name, cfg) in configs {
        let (row, _) = run_config(&cfg, 0, &data, &schedule)?;
        println!(
            "{name:>18}: {} after {} steps, loss {:.4} -> {:.4}, RD(W1)={:.3}, RD(W2)={:.3}, zeta={:.3}",
            row.stop_reason, row.steps, row.initial_loss, row.final_loss, row.rd_w1, row.rd_w2, row.zeta
        );
    }
    Ok(())
}
