//! Fits the log-log slope of the relative weight change against width at a
//! few points along the gamma3 axis.

use relu_phase::data::{synthetic_1d, SyntheticSpec};
use relu_phase::experiment::width_sweep;
use relu_phase::{PhasePoint, Schedule};

fn main() -> relu_phase::Result<()> {
    let data = synthetic_1d(&SyntheticSpec::default())?;
    let widths = [100, 200, 400, 800];
    let seeds = [0, 1, 2];
    for g3 in [0.5, 1.5, 2.5] {
        let sweep = width_sweep(PhasePoint::new(0.0, g3)?, &widths, &seeds, &data, &Schedule::default(), 1)?;
        let (s1, s2) = (sweep.fit_w1()?, sweep.fit_w2()?);
        println!(
            "gamma3={g3}: S_W1={:+.3} (r2 {:.2}), S_W2={:+.3} (r2 {:.2}), zeta at m={}: {:.3}",
            s1.slope,
            s1.r_squared,
            s2.slope,
            s2.r_squared,
            widths[widths.len() - 1],
            sweep.zeta_mean().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
