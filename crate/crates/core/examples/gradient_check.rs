//! Compares the analytic gradient with central differences on a small network.

use relu_phase::data::{synthetic_1d, SyntheticSpec};
use relu_phase::model::{backward, loss};
use relu_phase::{config_from_gammas, init_network_seeded, PhasePoint};

fn main() -> relu_phase::Result<()> {
    let data = synthetic_1d(&SyntheticSpec::default())?;
    let cfg = config_from_gammas(PhasePoint::new(0.0, 0.5)?, 12, 1, 1)?;
    let net = init_network_seeded(&cfg, 3)?;
    let grads = backward(&net, &data)?;
    let h = 1e-6;
    for (layer, name) in ["W1", "W2", "A"].iter().enumerate() {
        let exact = [&grads.w1, &grads.w2, &grads.a][layer].as_slice();
        let mut worst: f64 = 0.0;
        for k in 0..exact.len() {
            let shifted = |delta: f64| {
                let mut n = net.clone();
                [&mut n.w1, &mut n.w2, &mut n.a][layer].as_mut_slice()[k] += delta;
                loss(&n, &data)
            };
            let numeric = (shifted(h)? - shifted(-h)?) / (2.0 * h);
            worst = worst.max((numeric - exact[k]).abs());
        }
        let largest = exact.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        println!("{name:>2}: {} entries, largest |grad| {largest:.3e}, largest difference {worst:.3e}", exact.len());
    }
    Ok(())
}
