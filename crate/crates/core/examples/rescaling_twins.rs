//! Two initializations with the same kappa ratios (here: different output
//! scales alpha at one phase point) trace the same function when each step
//! size comes from the same normalized learning rate.

use relu_phase::data::{synthetic_1d, SyntheticSpec};
use relu_phase::model::{forward, train};
use relu_phase::scaling::{effective_lr, Rational};
use relu_phase::{config_from_gammas, init_network_seeded, kappas, PhasePoint, Schedule};

fn main() -> relu_phase::Result<()> {
    let data = synthetic_1d(&SyntheticSpec::default())?;
    let point = PhasePoint::new(0.25, 1.8)?;
    let normalized_lr = 0.5;
    let mut runs = Vec::new();
    for a in [Rational::new(-1, 2), Rational::from_integer(1)] {
        let cfg = config_from_gammas(point.with_alpha_exponent(a), 50, 1, 1)?;
        let s = kappas(&cfg);
        let lr = effective_lr(&cfg, normalized_lr)?;
        println!(
            "alpha=m^{a}: kappas ({:.4}, {:.4}, {:.4e}), time factor {:.4e}, lr {:.4e}",
            s.kappa1, s.kappa2, s.kappa3, s.time_factor, lr
        );
        let schedule = Schedule::constant(lr).with_max_steps(100).with_target(0.0);
        runs.push(train(init_network_seeded(&cfg, 11)?, &data, &schedule)?);
    }
    let worst = runs[0]
        .loss_curve
        .iter()
        .zip(&runs[1].loss_curve)
        .map(|(a, b)| ((a.1 - b.1) / a.1).abs())
        .fold(0.0, f64::max);
    println!("largest relative loss difference over {} steps: {worst:.2e}", runs[0].steps_taken);
    let (fa, _) = forward(&runs[0].final_snapshot, data.x())?;
    let (fb, _) = forward(&runs[1].final_snapshot, data.x())?;
    for i in 0..data.len() {
        println!("x={:+.2}  f={:+.15}  twin={:+.15}", data.x().get(i, 0), fa.get(i, 0), fb.get(i, 0));
    }
    Ok(())
}
