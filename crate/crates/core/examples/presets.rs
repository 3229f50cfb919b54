//! Width laws, kappa ratios and phase coordinates of the standard initializations.

use relu_phase::{kappas, preset, Preset};

fn main() -> relu_phase::Result<()> {
    let (m, d) = (1000, 784);
    println!("{:<8}{:>10}{:>10}{:>12}{:>8}{:>8}", "preset", "kappa1", "kappa2", "kappa3", "gamma2", "gamma3");
    for p in Preset::ALL {
        let s = kappas(&preset(p, m, d, 10)?);
        println!(
            "{:<8}{:>10.4}{:>10.4}{:>12.3e}{:>8}{:>8}",
            p.name(),
            s.kappa1,
            s.kappa2,
            s.kappa3,
            s.gamma2.to_string(),
            s.gamma3.to_string()
        );
    }
    Ok(())
}
