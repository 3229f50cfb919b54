//! Oracles and property checks shared by the test suites and the acceptance
//! harness. Every check returns a one-line summary or a failure message.

#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use relu_phase::data::{load_idx, write_idx_images, write_idx_labels};
use relu_phase::experiment::{
    fit_slope, fmt_f64, phase_scan, zero_crossing, PhaseScanSpec, ScanOptions, RUNS_FILE,
};
use relu_phase::metrics::{condensation_index, cosine, cosine_matrix, relative_change};
use relu_phase::model::{backward, forward, gauss_newton_top, load_checkpoint, loss, save_checkpoint, train};
use relu_phase::scaling::{effective_lr, Rational};
use relu_phase::{
    config_from_gammas, init_network_seeded, kappas, preset, Dataset, HyperConfig, Matrix, Network, PhasePoint,
    PowerLaw, Preset, Schedule,
};

pub type Check = std::result::Result<String, String>;

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize, std: f64) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect())
}

// ---------------------------------------------------------------- table 1

/// `(kappa2, kappa3, gamma2, gamma3)` as printed in the published table of
/// common initializations, both hidden widths equal to `m`.
pub fn published_row(p: Preset, d: i64) -> (PowerLaw, PowerLaw, Rational, Rational) {
    let half = q(-1, 2);
    match p {
        Preset::Ntk => (PowerLaw::one(), PowerLaw::monomial(q(-1, 1)), q(0, 1), q(1, 1)),
        Preset::LeCun => (PowerLaw::pure(q(d, 1), half), PowerLaw::pure(q(1, d), q(-1, 1)), q(1, 2), q(1, 1)),
        Preset::He => (PowerLaw::pure(q(d, 1), half), PowerLaw::pure(q(8, d), q(-1, 1)), q(1, 2), q(1, 1)),
        Preset::Xavier => (
            &PowerLaw::shifted(q(1, 1), d, q(1, 2)) * &PowerLaw::shifted(q(1, 1), 1, half),
            PowerLaw::pure(q(8, d), q(-1, 1)),
            q(3, 2),
            q(0, 1),
        ),
    }
}

/// Compares every kappa2/kappa3/gamma cell symbolically for several input
/// dimensions. Returns the mismatching cells.
pub fn table1_mismatches() -> Vec<String> {
    let mut bad = Vec::new();
    for p in Preset::ALL {
        for d in [1usize, 3, 784] {
            let s = kappas(&preset(p, 100, d, 1).expect("preset"));
            let (k2, k3, g2, g3) = published_row(p, d as i64);
            let cells = [
                ("kappa2", s.kappa2_law.to_string(), k2.to_string(), s.kappa2_law == k2),
                ("kappa3", s.kappa3_law.to_string(), k3.to_string(), s.kappa3_law == k3),
                ("gamma2", s.gamma2.to_string(), g2.to_string(), s.gamma2 == g2),
                ("gamma3", s.gamma3.to_string(), g3.to_string(), s.gamma3 == g3),
            ];
            for (name, got, want, ok) in cells {
                if !ok {
                    bad.push(format!("{p} d={d} {name}: computed {got}, table {want}"));
                }
            }
        }
    }
    bad
}

// ---------------------------------------------------------- gradient oracle

fn masks(net: &Network, x: &Matrix) -> Vec<bool> {
    let (_, c) = forward(net, x).expect("forward");
    c.z1.as_slice().iter().chain(c.z2.as_slice()).map(|z| *z > 0.0).collect()
}

/// Central differences (step 1e-6) against the analytic gradient on `count`
/// random networks with `m <= 10`, `d <= 3`, `n <= 5`. Partials whose
/// perturbation flips any ReLU are skipped. Relative error is
/// `|fd - exact| / max(|fd|, |exact|)`; partials where both are below 1e-8
/// count as agreeing when their difference is below 1e-10.
pub fn gradient_oracle(count: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6;
    let (mut checked, mut skipped, mut worst) = (0usize, 0usize, 0.0f64);
    for case in 0..count {
        let m = rng.random_range(1..=10);
        let d = rng.random_range(1..=3);
        let n = rng.random_range(1..=5);
        let o = rng.random_range(1..=2);
        let scale = rng.random_range(0.3..1.5);
        let net = Network::new(
            gaussian(&mut rng, m, d + 1, scale),
            gaussian(&mut rng, m, m + 1, scale),
            gaussian(&mut rng, o, m, scale),
            rng.random_range(0.5..2.0),
            rng.random_range(0.1..1.5),
        )
        .map_err(|e| e.to_string())?;
        let data = Dataset::new(gaussian(&mut rng, n, d, 1.0), gaussian(&mut rng, n, o, 1.0)).map_err(|e| e.to_string())?;
        let exact = backward(&net, &data).map_err(|e| e.to_string())?;
        let base = masks(&net, data.x());
        for layer in 0..3 {
            let g = [&exact.w1, &exact.w2, &exact.a][layer].as_slice();
            for k in 0..g.len() {
                let at = |delta: f64| {
                    let mut p = net.clone();
                    [&mut p.w1, &mut p.w2, &mut p.a][layer].as_mut_slice()[k] += delta;
                    p
                };
                let (plus, minus) = (at(h), at(-h));
                if masks(&plus, data.x()) != base || masks(&minus, data.x()) != base {
                    skipped += 1;
                    continue;
                }
                let fd = (loss(&plus, &data).unwrap() - loss(&minus, &data).unwrap()) / (2.0 * h);
                let diff = (fd - g[k]).abs();
                let size = fd.abs().max(g[k].abs());
                let rel = if size < 1e-8 { if diff < 1e-10 { 0.0 } else { f64::INFINITY } } else { diff / size };
                worst = worst.max(rel);
                checked += 1;
                if rel >= 1e-5 {
                    return Err(format!(
                        "network {case} layer {layer} entry {k}: analytic {} vs finite difference {fd} (rel {rel:.2e})",
                        g[k]
                    ));
                }
            }
        }
    }
    Ok(format!("{checked} partials on {count} networks, worst relative error {worst:.2e}, {skipped} skipped at kinks"))
}

// ---------------------------------------------------- rescaling equivalence

fn law(coef_sq: Rational, exponent: Rational) -> PowerLaw {
    PowerLaw::pure(coef_sq, exponent)
}

/// Two configurations with equal kappas: all betas times `s`, alpha times `s^3`.
pub fn twin_configs(rng: &mut ChaCha8Rng, m: usize) -> (HyperConfig, HyperConfig) {
    let c = |rng: &mut ChaCha8Rng| q(rng.random_range(4..=36), 16);
    let (c0, c1, c2, c3) = (c(rng), c(rng), c(rng), c(rng));
    let e = |rng: &mut ChaCha8Rng| q(rng.random_range(-6..=0), 12);
    let (e0, e1, e2, e3) = (e(rng), e(rng), e(rng), e(rng));
    let s_sq = [q(1, 4), q(4, 9), q(9, 4), q(4, 1)][rng.random_range(0..4)];
    let make = |t: Rational| HyperConfig {
        alpha: law(c0 * t * t * t, e0),
        beta1: law(c1 * t, e1),
        beta2: law(c2 * t, e2),
        beta3: law(c3 * t, e3),
        m,
        d: 1,
        d_out: 1,
        b_sq: None,
    };
    (make(q(1, 1)), make(s_sq))
}

fn rel_diff(a: &Matrix, b: &Matrix) -> f64 {
    let num: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = a.as_slice().iter().map(|x| x * x).sum();
    (num / den).sqrt()
}

/// Plain gradient descent returning the predictions before every step and after the last.
fn prediction_sequence(mut net: Network, data: &Dataset, lr: f64, steps: usize) -> Vec<Matrix> {
    let mut out = Vec::with_capacity(steps + 1);
    for _ in 0..steps {
        out.push(forward(&net, data.x()).unwrap().0);
        let g = backward(&net, data).unwrap();
        net.w1.add_scaled(-lr, &g.w1);
        net.w2.add_scaled(-lr, &g.w2);
        net.a.add_scaled(-lr, &g.a);
    }
    out.push(forward(&net, data.x()).unwrap().0);
    out
}

/// For `triples` random kappa triples, each realized twice with shared draws,
/// the predictions agree at every one of `steps` steps at width `m`.
pub fn rescaling_equivalence(triples: usize, steps: usize, m: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = relu_phase::data::synthetic_1d(&Default::default()).unwrap();
    let mut worst = 0.0f64;
    for t in 0..triples {
        let (a, b) = twin_configs(&mut rng, m);
        let (ka, kb) = (kappas(&a), kappas(&b));
        let close = |x: f64, y: f64| ((x - y) / x).abs() < 1e-12;
        if !(close(ka.kappa1, kb.kappa1) && close(ka.kappa2, kb.kappa2) && close(ka.kappa3, kb.kappa3)) {
            return Err(format!("triple {t}: twin kappas differ"));
        }
        let (na, nb) = (init_network_seeded(&a, t as u64).unwrap(), init_network_seeded(&b, t as u64).unwrap());
        // half the stability limit of the first network, in normalized time
        let lr_a = 0.5 / gauss_newton_top(&na, &data, 50).unwrap();
        let normalized = lr_a * ka.time_factor;
        let lr_b = effective_lr(&b, normalized).unwrap();
        let (fa, fb) = (prediction_sequence(na, &data, lr_a, steps), prediction_sequence(nb, &data, lr_b, steps));
        for (step, (x, y)) in fa.iter().zip(&fb).enumerate() {
            let r = rel_diff(x, y);
            if !x.is_finite() || !(r < 1e-10) {
                return Err(format!("triple {t} step {step}: relative prediction difference {r:.3e}"));
            }
            worst = worst.max(r);
        }
    }
    Ok(format!("{triples} kappa triples x {steps} steps at m={m}, worst relative difference {worst:.2e}"))
}

// -------------------------------------------------------------- properties

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        rng_seed: RngSeed::Fixed(0x5eed),
        ..Config::default()
    })
}

fn run<S: Strategy>(name: &str, cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Check {
    runner(cases)
        .run(&strategy, test)
        .map(|_| format!("{name}: {cases} cases"))
        .map_err(|e| format!("{name}: {e}"))
}

fn matrix(rows: std::ops::RangeInclusive<usize>, cols: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Matrix> {
    (rows, cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-10.0f64..10.0, r * c).prop_map(move |v| Matrix::from_vec(r, c, v))
    })
}

fn permute_rows(w: &Matrix, perm: &[usize]) -> Matrix {
    Matrix::from_rows(&perm.iter().map(|&i| w.row(i).to_vec()).collect::<Vec<_>>())
}

pub fn prop_cosine_bounds() -> Check {
    run("cosine bounds", 256, matrix(2..=12, 1..=6), |w| {
        for i in 0..w.rows() {
            for j in 0..w.rows() {
                if let Ok(c) = cosine(w.row(i), w.row(j)) {
                    prop_assert!((-1.0..=1.0).contains(&c));
                }
            }
        }
        if let Ok(c) = cosine_matrix(&w, 0.5) {
            for i in 0..c.rows() {
                prop_assert_eq!(c.get(i, i), 1.0);
                for j in 0..c.rows() {
                    prop_assert_eq!(c.get(i, j), c.get(j, i));
                    prop_assert!((-1.0..=1.0).contains(&c.get(i, j)));
                }
            }
        }
        Ok(())
    })
}

pub fn prop_zeta_invariances() -> Check {
    let strat = matrix(2..=12, 1..=6).prop_flat_map(|w| {
        let n = w.rows();
        (Just(w), Just((0..n).collect::<Vec<_>>()).prop_shuffle(), prop::collection::vec(any::<bool>(), n), 1.0f64..4.0)
    });
    run("zeta range and invariances", 256, strat, |(w, perm, flips, grow)| {
        let Ok(z) = condensation_index(&w) else { return Ok(()) };
        prop_assert!((0.0..=1.0 + 1e-12).contains(&z));
        // distinct norms keep the selection unambiguous
        let mut norms: Vec<f64> = w.row_iter().map(|r| r.iter().map(|v| v * v).sum::<f64>()).collect();
        norms.sort_by(f64::total_cmp);
        prop_assume!(norms.windows(2).all(|p| p[1] > p[0] * (1.0 + 1e-9)));
        let zp = condensation_index(&permute_rows(&w, &perm)).unwrap();
        prop_assert!((zp - z).abs() < 1e-12, "permutation changed zeta {} -> {}", z, zp);
        let mut flipped = w.clone();
        for (i, f) in flips.iter().enumerate() {
            if *f {
                flipped.row_mut(i).iter_mut().for_each(|v| *v = -*v);
            }
        }
        prop_assert!((condensation_index(&flipped).unwrap() - z).abs() < 1e-12);
        // growing the largest row keeps it selected
        let top = (0..w.rows()).max_by(|&i, &j| w.row(i).iter().map(|v| v * v).sum::<f64>().total_cmp(&w.row(j).iter().map(|v| v * v).sum::<f64>())).unwrap();
        let mut grown = w.clone();
        grown.row_mut(top).iter_mut().for_each(|v| *v *= grow);
        prop_assert!((condensation_index(&grown).unwrap() - z).abs() < 1e-12);
        Ok(())
    })
}

pub fn prop_relative_change() -> Check {
    let strat = prop::collection::vec(-5.0f64..5.0, 2..40).prop_flat_map(|a| {
        let n = a.len();
        (Just(a), prop::collection::vec(-5.0f64..5.0, n), 0.0f64..std::f64::consts::TAU)
    });
    run("relative change identities", 256, strat, |(a, b, theta)| {
        prop_assume!(b.iter().any(|v| *v != 0.0));
        prop_assert_eq!(relative_change(&b, &b).unwrap(), 0.0);
        let zeros = vec![0.0; b.len()];
        prop_assert!((relative_change(&zeros, &b).unwrap() - 1.0).abs() < 1e-15);
        prop_assert!(relative_change(&b, &zeros).is_err());
        // the same rotation of every coordinate pair applied to both snapshots
        let rot = |v: &[f64]| -> Vec<f64> {
            let (s, c) = theta.sin_cos();
            let mut out = v.to_vec();
            for k in (0..v.len() - 1).step_by(2) {
                out[k] = c * v[k] - s * v[k + 1];
                out[k + 1] = s * v[k] + c * v[k + 1];
            }
            out
        };
        let r = relative_change(&a, &b).unwrap();
        let rr = relative_change(&rot(&a), &rot(&b)).unwrap();
        prop_assert!((r - rr).abs() <= 1e-12 * r.max(1.0));
        Ok(())
    })
}

pub fn prop_fit_slope_exact() -> Check {
    let strat = (-3.0f64..3.0, 0.01f64..100.0, prop::collection::btree_set(1usize..100_000, 2..8));
    run("fit_slope exact power laws", 256, strat, |(p, c, widths)| {
        let pts: Vec<(f64, f64)> = widths.iter().map(|&m| (m as f64, c * (m as f64).powf(p))).collect();
        let fit = fit_slope(&pts).unwrap();
        prop_assert!((fit.slope - p).abs() < 1e-9, "slope {} for exponent {}", fit.slope, p);
        prop_assert!((fit.intercept - c.ln()).abs() < 1e-7);
        Ok(())
    })
}

pub fn prop_zero_crossing_affine() -> Check {
    let strat = (prop::collection::btree_set(-1000i32..1000, 2..10), -5.0f64..5.0, 0.1f64..3.0);
    run("zero_crossing on affine series", 256, strat, |(xs, t, slope)| {
        let xs: Vec<f64> = xs.into_iter().map(|x| f64::from(x) / 100.0).collect();
        let (lo, hi) = (xs[0], xs[xs.len() - 1]);
        let root = lo + (hi - lo) * (t.abs() / 5.0);
        prop_assume!(xs.iter().all(|x| (x - root).abs() > 1e-9));
        let series: Vec<(f64, f64)> = xs.iter().map(|&x| (x, slope * (x - root))).collect();
        let z = zero_crossing(&series);
        prop_assert_eq!(z.len(), 1);
        prop_assert!((z[0] - root).abs() < 1e-9 * root.abs().max(1.0), "{} vs {}", z[0], root);
        Ok(())
    })
}

fn small_problem(seed: u64, m: usize) -> (Network, Dataset) {
    let cfg = config_from_gammas(PhasePoint::new(0.25, 1.5).unwrap(), m, 2, 2).unwrap();
    let net = init_network_seeded(&cfg, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdada);
    let data = Dataset::new(gaussian(&mut rng, 5, 2, 1.0), gaussian(&mut rng, 5, 2, 0.5)).unwrap();
    (net, data)
}

pub fn prop_permutation_invariance() -> Check {
    let strat = (any::<u64>(), 2usize..24).prop_flat_map(|(seed, m)| (Just(seed), Just((0..m).collect::<Vec<_>>()).prop_shuffle()));
    run("hidden-neuron permutation invariance", 48, strat, |(seed, perm)| {
        let m = perm.len();
        let (net, data) = small_problem(seed, m);
        // first layer: permute rows of W1 and the matching columns of W2;
        // second layer: permute rows of W2 and columns of A
        let sigma: Vec<usize> = perm.iter().rev().copied().collect();
        let w1 = permute_rows(&net.w1, &perm);
        let mut w2 = Matrix::zeros(m, m + 1);
        for i in 0..m {
            for j in 0..m {
                w2.set(i, j, net.w2.get(sigma[i], perm[j]));
            }
            w2.set(i, m, net.w2.get(sigma[i], m));
        }
        let mut a = Matrix::zeros(net.a.rows(), m);
        for r in 0..a.rows() {
            for i in 0..m {
                a.set(r, i, net.a.get(r, sigma[i]));
            }
        }
        let twin = Network::new(w1, w2, a, net.alpha, net.hidden_bias_input).unwrap();
        let l0 = loss(&net, &data).unwrap();
        prop_assert!(((loss(&twin, &data).unwrap() - l0) / l0).abs() < 1e-12);
        prop_assert!((condensation_index(&twin.w2).unwrap() - condensation_index(&permute_rows(&net.w2, &sigma)).unwrap()).abs() < 1e-12);
        let schedule = Schedule::constant(0.05).with_max_steps(30).with_target(0.0);
        let (ra, rb) = (train(net, &data, &schedule).unwrap(), train(twin, &data, &schedule).unwrap());
        for (x, y) in ra.loss_curve.iter().zip(&rb.loss_curve) {
            prop_assert!(((x.1 - y.1) / x.1).abs() < 1e-12, "step {}: {} vs {}", x.0, x.1, y.1);
        }
        Ok(())
    })
}

pub fn prop_prediction_scaling() -> Check {
    run("output scale invariance", 64, (any::<u64>(), -20i32..20, 0.1f64..10.0), |(seed, k, c)| {
        let (net, data) = small_problem(seed, 6);
        let f0 = forward(&net, data.x()).unwrap().0;
        let mut scaled = net.clone();
        let p = 2f64.powi(k);
        scaled.a.scale(p);
        scaled.alpha *= p;
        prop_assert_eq!(forward(&scaled, data.x()).unwrap().0, f0.clone());
        let mut general = net;
        general.a.scale(c);
        general.alpha *= c;
        prop_assert!(rel_diff(&f0, &forward(&general, data.x()).unwrap().0) < 1e-14);
        Ok(())
    })
}

pub fn prop_gamma_round_trip() -> Check {
    let r = (-40i64..40, 1i64..30).prop_map(|(n, d)| Rational::new(n, d));
    let strat = (r.clone(), r.clone(), r, 1usize..5000);
    run("kappas(config_from_gammas) round trip", 256, strat, |(g2, g3, a, m)| {
        let cfg = config_from_gammas(PhasePoint::exact(g2, g3).with_alpha_exponent(a), m, 1, 1).unwrap();
        let s = kappas(&cfg);
        prop_assert_eq!((s.gamma2, s.gamma3), (g2, g3));
        Ok(())
    })
}

pub fn prop_determinism() -> Check {
    run("training determinism", 16, (any::<u64>(), 2usize..30), |(seed, m)| {
        let (net, data) = small_problem(seed, m);
        let s = Schedule::default().with_max_steps(40);
        let (a, b) = (train(net.clone(), &data, &s).unwrap(), train(net, &data, &s).unwrap());
        prop_assert_eq!(&a.loss_curve, &b.loss_curve);
        prop_assert_eq!(&a.step_sizes, &b.step_sizes);
        prop_assert_eq!(&a.final_snapshot, &b.final_snapshot);
        Ok(())
    })
}

fn tiny_scan() -> PhaseScanSpec {
    PhaseScanSpec {
        gamma2: vec![0.0, 0.5],
        gamma3: vec![1.0, 2.0],
        widths: vec![8, 16],
        seeds: vec![0, 1],
        alpha_exponent: 0.0,
    }
}

/// Full scan against a scan stopped part way (a truncated runs file with a
/// torn last line), on several worker counts.
pub fn prop_scan_resume() -> Check {
    let data = relu_phase::data::synthetic_1d(&Default::default()).unwrap();
    let schedule = Schedule::default().with_max_steps(60);
    let spec = tiny_scan();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let full_dir = dir.path().join("full");
    let opts = |p: &std::path::Path, workers| ScanOptions { workers, state_dir: Some(p.to_path_buf()) };
    let full = phase_scan(&spec, &data, &schedule, &opts(&full_dir, 1)).map_err(|e| e.to_string())?;
    let full_csv = std::fs::read_to_string(full_dir.join(RUNS_FILE)).unwrap();
    let lines: Vec<&str> = full_csv.lines().collect();
    run("phase_scan determinism and resume", 12, (0usize..lines.len(), 1usize..4, 0usize..30), |(keep, workers, torn)| {
        let d = tempfile::tempdir().unwrap();
        let mut partial = lines[..keep.max(1)].join("\n");
        partial.push('\n');
        if keep < lines.len() {
            partial.push_str(&lines[keep][..torn.min(lines[keep].len())]);
        }
        std::fs::write(d.path().join(RUNS_FILE), partial).unwrap();
        let resumed = phase_scan(&spec, &data, &schedule, &opts(d.path(), workers)).unwrap();
        prop_assert_eq!(&resumed.cells, &full.cells);
        prop_assert_eq!(&resumed.runs, &full.runs);
        prop_assert_eq!(std::fs::read_to_string(d.path().join(RUNS_FILE)).unwrap(), full_csv.clone());
        // and a rerun of a completed scan changes nothing
        let again = phase_scan(&spec, &data, &schedule, &opts(d.path(), workers)).unwrap();
        prop_assert_eq!(&again.cells, &full.cells);
        Ok(())
    })
}

pub fn prop_idx_round_trip() -> Check {
    let strat = (1usize..6, 1usize..6, 1usize..20).prop_flat_map(|(r, c, n)| {
        (Just(r), Just(c), prop::collection::vec(any::<u8>(), r * c * n), prop::collection::vec(0u8..10, n), 1usize..30)
    });
    run("IDX round trip", 64, strat, |(r, c, pixels, labels, limit)| {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = (dir.path().join("i"), dir.path().join("l"));
        write_idx_images(&img, r, c, &pixels).unwrap();
        write_idx_labels(&lab, &labels).unwrap();
        let data = load_idx(&img, &lab, limit).unwrap();
        let n = labels.len().min(limit);
        prop_assert_eq!(data.len(), n);
        for i in 0..n {
            for j in 0..r * c {
                prop_assert_eq!(data.x().get(i, j), f64::from(pixels[i * r * c + j]) / 255.0);
            }
            prop_assert_eq!(data.y().row(i).iter().sum::<f64>(), 1.0);
            prop_assert_eq!(data.y().get(i, labels[i] as usize), 1.0);
        }
        Ok(())
    })
}

pub fn prop_checkpoint_round_trip() -> Check {
    run("checkpoint round trip", 32, (any::<u64>(), 1usize..12), |(seed, m)| {
        let (net, _) = small_problem(seed, m);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("n.ckpt");
        save_checkpoint(&p, &net, Some(seed), None).unwrap();
        prop_assert_eq!(load_checkpoint(&p).unwrap().0, net);
        Ok(())
    })
}

pub fn prop_float_format() -> Check {
    run("17-digit float round trip", 512, any::<f64>(), |v| {
        let back: f64 = fmt_f64(v).parse().unwrap();
        prop_assert!(back == v || (v.is_nan() && back.is_nan()));
        Ok(())
    })
}

/// Table 2: each group's three output-scale laws share the phase coordinates.
pub fn group_members(group: usize) -> (PhasePoint, [Rational; 3]) {
    match group {
        1 => (PhasePoint::exact(q(0, 1), q(11, 10)), [q(-1, 2), q(0, 1), q(1, 2)]),
        _ => (PhasePoint::exact(q(7, 10), q(5, 2)), [q(-3, 10), q(0, 1), q(3, 10)]),
    }
}

/// Published `(beta1, beta2, beta3)` exponents of each group member, in the
/// order of [`group_members`].
pub fn published_group_laws(group: usize) -> [[Rational; 3]; 3] {
    match group {
        1 => [
            [q(-8, 15), q(-8, 15), q(-8, 15)],
            [q(-11, 30), q(-11, 30), q(-11, 30)],
            [q(-1, 5), q(-1, 5), q(-1, 5)],
        ],
        _ => [
            [q(-7, 15), q(-7, 6), q(-7, 6)],
            [q(-11, 30), q(-16, 15), q(-16, 15)],
            [q(-4, 15), q(-29, 30), q(-29, 30)],
        ],
    }
}

pub fn prop_group_coordinates() -> Check {
    for g in [1, 2] {
        let (point, alphas) = group_members(g);
        let members = relu_phase::experiment::alpha_law_group(point, &alphas, 1, 1).map_err(|e| e.to_string())?;
        for ((m, laws), a) in members.iter().zip(published_group_laws(g)).zip(alphas) {
            let s = kappas(&m.config);
            if (s.gamma2, s.gamma3) != (point.gamma2, point.gamma3) {
                return Err(format!("group {g} member {} has ({}, {})", m.label, s.gamma2, s.gamma3));
            }
            let c = &m.config;
            let got = [&c.alpha, &c.beta1, &c.beta2, &c.beta3];
            let want = [a, laws[0], laws[1], laws[2]].map(PowerLaw::monomial);
            if got.iter().zip(&want).any(|(g, w)| *g != w) {
                return Err(format!("group {g} member {} has laws {} {} {} {}", m.label, c.alpha, c.beta1, c.beta2, c.beta3));
            }
        }
    }
    Ok("generated group members equal the published laws".into())
}

pub fn all_properties() -> Vec<(&'static str, fn() -> Check)> {
    vec![
        ("cosine", prop_cosine_bounds),
        ("zeta", prop_zeta_invariances),
        ("relative_change", prop_relative_change),
        ("fit_slope", prop_fit_slope_exact),
        ("zero_crossing", prop_zero_crossing_affine),
        ("permutation", prop_permutation_invariance),
        ("prediction_scaling", prop_prediction_scaling),
        ("gamma_round_trip", prop_gamma_round_trip),
        ("group_coordinates", prop_group_coordinates),
        ("determinism", prop_determinism),
        ("scan_resume", prop_scan_resume),
        ("idx", prop_idx_round_trip),
        ("checkpoint", prop_checkpoint_round_trip),
        ("float_format", prop_float_format),
    ]
}
