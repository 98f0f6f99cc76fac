//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use cavity_readout::chain::{exact_spectrum, fast_spectrum, mixture_spectrum};
use cavity_readout::decay::{
    decay_populations, quasi_static_spectrum, time_averaged_populations, time_averaged_spectrum,
    Averaging,
};
use cavity_readout::infer::{find_peaks, infer_weights, Peak, DEFAULT_PROMINENCE};
use cavity_readout::lindblad::{oracle_spectrum, TruncationConfig};
use cavity_readout::spectra::{closed_form_n1, closed_form_n2, meanfield_spectrum};
use cavity_readout::{
    presets, AngularFrequency, DeviceParams, DiagonalState, FrequencyGrid, QubitParams, Spectrum,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn mhz(x: f64) -> AngularFrequency {
    AngularFrequency::from_mhz(x)
}

/// Largest pointwise `|a - b| / |b|`.
fn max_rel(a: &Spectrum, b: &Spectrum) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs() / y.abs())
        .fold(0.0, f64::max)
}

fn within_budget(elapsed: Duration, budget: Duration, what: &str) -> Result<(), String> {
    ensure(elapsed < budget, || {
        format!("{what} took {elapsed:?}, budget {budget:?}")
    })
}

fn peaks(s: &Spectrum) -> Vec<Peak> {
    find_peaks(s, DEFAULT_PROMINENCE).expect("valid spectrum")
}

fn random_probs(rng: &mut ChaCha8Rng, n: usize) -> DiagonalState {
    let w: Vec<f64> = (0..1 << n).map(|_| rng.gen::<f64>()).collect();
    DiagonalState::from_weights(n, &w).unwrap()
}

fn oracle_triangle() -> Check {
    let p = presets::n1_2010();
    let grid = FrequencyGrid::centered(p.cavity_freq(), mhz(20.0), 2001).unwrap();
    let coarse = FrequencyGrid::centered(p.cavity_freq(), mhz(20.0), 11).unwrap();
    let trunc = TruncationConfig {
        n_max: 8,
        drive: Some(p.kappa().value() / 20.0),
        ..TruncationConfig::for_device(&p)
    };
    let mut closed_err = 0.0f64;
    let mut oracle_err = 0.0f64;
    let mut closed_time = Duration::ZERO;
    let mut oracle_time = Duration::ZERO;
    for b in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let st = DiagonalState::new(1, vec![1.0 - b, b]).unwrap();
        let t = Instant::now();
        let chain = exact_spectrum(&p, &st, &grid).unwrap();
        let closed = closed_form_n1(&p, &st, &grid).unwrap();
        let mix = mixture_spectrum(&p, &st, &grid).unwrap();
        closed_time += t.elapsed();
        closed_err = closed_err
            .max(max_rel(&closed, &chain))
            .max(max_rel(&mix, &chain));

        let t = Instant::now();
        let oracle = oracle_spectrum(&p, &st, &coarse, &trunc).unwrap();
        oracle_time += t.elapsed();
        oracle.check().map_err(|e| e.to_string())?;
        let reference = exact_spectrum(&p, &st, &coarse).unwrap();
        oracle_err = oracle_err.max(max_rel(&oracle.spectrum, &reference));
    }
    ensure(closed_err <= 1e-9, || {
        format!("closed paths differ by {closed_err:e}")
    })?;
    ensure(oracle_err <= 1e-3, || {
        format!("oracle differs by {oracle_err:e}")
    })?;
    within_budget(closed_time, Duration::from_secs(1), "closed paths")?;
    within_budget(oracle_time, Duration::from_secs(300), "oracle")?;
    Ok(format!(
        "closed/mixture vs chain {closed_err:.1e} ({closed_time:.2?}), oracle vs chain {oracle_err:.1e} ({oracle_time:.2?})"
    ))
}

fn single_qubit_two_peaks() -> Check {
    let p = presets::n1_2010();
    let grid = FrequencyGrid::centered(p.cavity_freq(), mhz(20.0), 2001).unwrap();
    let wf = p.cavity_freq().value();
    let gamma = p.shifts().unwrap()[0];
    let quoted = 2.0 * PI * 7.3727;
    let mut worst_fit = 0.0f64;
    for b in [0.25, 0.5, 0.75] {
        let st = DiagonalState::new(1, vec![1.0 - b, b]).unwrap();
        let s = exact_spectrum(&p, &st, &grid).unwrap();
        let found = peaks(&s);
        ensure(found.len() == 2, || {
            format!("|b|^2 = {b}: {} peaks", found.len())
        })?;
        for (pk, sign) in found.iter().zip([-1.0, 1.0]) {
            for g in [gamma, quoted] {
                let miss = (pk.location.value() - (wf + sign * g)).abs();
                ensure(miss <= grid.step(), || {
                    format!("|b|^2 = {b}: peak off by {miss:e} rad/us")
                })?;
            }
        }
        let w = infer_weights(&s, &p).unwrap().basis_probs().unwrap();
        worst_fit = worst_fit
            .max((w[0] - (1.0 - b)).abs())
            .max((w[1] - b).abs());
        let mf = meanfield_spectrum(&p, &st, &grid).unwrap();
        let n = peaks(&mf).len();
        ensure(n == 1, || {
            format!("|b|^2 = {b}: mean field shows {n} peaks")
        })?;
    }
    ensure(worst_fit <= 1e-3, || format!("fit error {worst_fit:e}"))?;
    Ok(format!(
        "Gamma_1 = {:.5} MHz, fit error {worst_fit:.1e}",
        gamma / (2.0 * PI)
    ))
}

fn two_qubit_superpositions() -> Check {
    let p = presets::n2_2010();
    let t = Instant::now();
    let grid = FrequencyGrid::covering_all_peaks(&p, 2001).unwrap();
    let wf = p.cavity_freq().value();
    let allowed = [17.0, 9.0, -9.0, -17.0].map(|o| 2.0 * PI * o);
    let cases: [(&[f64], usize); 4] = [
        (&[1.0, 0.0, 0.0, 0.0], 1),
        (&[0.34, 0.66, 0.0, 0.0], 2),
        (&[0.47, 0.0, 0.53, 0.0], 2),
        (&[0.2, 0.2, 0.26, 0.34], 4),
    ];
    let mut worst = 0.0f64;
    for (probs, count) in cases {
        let st = DiagonalState::new(2, probs.to_vec()).unwrap();
        let s = exact_spectrum(&p, &st, &grid).unwrap();
        let found = peaks(&s);
        ensure(found.len() == count, || {
            format!("{probs:?}: {} peaks, want {count}", found.len())
        })?;
        for pk in &found {
            let off = pk.location.value() - wf;
            let near = allowed.iter().any(|a| (off - a).abs() <= grid.step());
            ensure(near, || {
                format!("{probs:?}: peak at offset {:.4} MHz", off / (2.0 * PI))
            })?;
        }
        let w = infer_weights(&s, &p).unwrap().basis_probs().unwrap();
        for (a, b) in w.iter().zip(probs) {
            worst = worst.max((a - b).abs());
        }
    }
    let elapsed = t.elapsed();
    ensure(worst <= 1e-3, || format!("fit error {worst:e}"))?;
    within_budget(elapsed, Duration::from_secs(1), "two-qubit reproduction")?;
    Ok(format!(
        "peak counts 1,2,2,4, fit error {worst:.1e} ({elapsed:.2?})"
    ))
}

fn two_qubit_closed_form() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let shifts = [rng.gen_range(0.5..50.0), rng.gen_range(0.5..50.0)];
        let kappa = rng.gen_range(0.2..5.0);
        let p = DeviceParams::new(
            mhz(6000.0),
            mhz(kappa),
            shifts
                .iter()
                .map(|g| QubitParams::from_shift(mhz(*g)))
                .collect(),
        )
        .unwrap();
        let st = random_probs(&mut rng, 2);
        let grid = FrequencyGrid::covering_all_peaks(&p, 401).unwrap();
        let closed = closed_form_n2(&p, &st, &grid).unwrap();
        let chain = exact_spectrum(&p, &st, &grid).unwrap();
        worst = worst.max(max_rel(&closed, &chain));
    }
    ensure(worst <= 1e-9, || {
        format!("max relative deviation {worst:e}")
    })?;
    Ok(format!("50 instances, max relative deviation {worst:.1e}"))
}

fn beyond_mean_field() -> Check {
    let p = presets::n1_2010();
    let grid = FrequencyGrid::centered(p.cavity_freq(), mhz(20.0), 2001).unwrap();
    let st = DiagonalState::new(1, vec![0.5, 0.5]).unwrap();
    let mf = meanfield_spectrum(&p, &st, &grid).unwrap();
    let ex = exact_spectrum(&p, &st, &grid).unwrap();
    let center = (grid.count() - 1) / 2;
    let mf_at = grid.point(mf.argmax());
    ensure((mf_at - p.cavity_freq().value()).abs() < 1e-9, || {
        format!("mean-field max at {mf_at}")
    })?;
    let ratio = ex.values()[center] / ex.values()[ex.argmax()];
    ensure(ratio < 0.2, || {
        format!("exact value at cavity is {ratio:.3} of peak")
    })?;
    Ok(format!("exact S(omega_f)/max = {ratio:.4}"))
}

fn area_conservation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let devices = [
        presets::n1_2010(),
        presets::n2_2010(),
        DeviceParams::new(
            mhz(6806.0),
            mhz(1.0),
            [13.0, 4.0, 2.5]
                .iter()
                .map(|g| QubitParams::from_shift(mhz(*g)))
                .collect(),
        )
        .unwrap(),
    ];
    let mut worst = 0.0f64;
    for i in 0..20 {
        let p = &devices[i % 3];
        let st = random_probs(&mut rng, p.n_qubits());
        let kappa = p.kappa().value();
        let grid = FrequencyGrid::centered(
            p.cavity_freq(),
            AngularFrequency::from_rad_per_us(64.0 * kappa),
            12801,
        )
        .unwrap();
        let area = exact_spectrum(p, &st, &grid).unwrap().area();
        worst = worst.max((area * kappa / (2.0 * PI) - 1.0).abs());
    }
    ensure(worst <= 0.02, || {
        format!("area off by {:.2}%", 100.0 * worst)
    })?;
    Ok(format!(
        "20 states, worst area deviation {:.3}%",
        100.0 * worst
    ))
}

fn decay_reproduction() -> Check {
    let p = presets::n2_2010();
    let t = Instant::now();
    let grid = FrequencyGrid::covering_all_peaks(&p, 2001).unwrap();
    let excited = DiagonalState::basis(2, 3).unwrap();

    let pops = decay_populations(&excited, &[1.0, 1.0], 1.0).unwrap();
    for (a, b) in pops.probs().iter().zip([0.3996, 0.2325, 0.2325, 0.1353]) {
        ensure((a - b).abs() <= 1e-4, || {
            format!("populations {:?}", pops.probs())
        })?;
    }

    let quasi = quasi_static_spectrum(&p, &excited, 0.5, &grid).unwrap();
    let n = peaks(&quasi).len();
    ensure(n == 4, || format!("quasi-static spectrum has {n} peaks"))?;

    let avg = time_averaged_spectrum(&p, &excited, 0.5, 64, &grid).unwrap();
    let found = peaks(&avg);
    ensure(found.len() == 4, || {
        format!("averaged spectrum has {} peaks", found.len())
    })?;
    let mean =
        time_averaged_populations(&excited, &[1.0, 1.0], 0.5, 64, Averaging::Analytic).unwrap();
    let fit = infer_weights(&avg, &p).unwrap().basis_probs().unwrap();
    for (a, b) in fit.iter().zip(mean.probs()) {
        ensure((a - b).abs() <= 1e-3, || {
            format!("fit {fit:?} vs averaged populations {:?}", mean.probs())
        })?;
    }
    // peaks come out sorted by frequency: |11>, |10>, |01>, |00> (offsets -17, -9, +9, +17)
    let h: Vec<f64> = found.iter().map(|p| p.height).collect();
    let (h11, h10, h01, h00) = (h[0], h[1], h[2], h[3]);
    ensure(h00 < h10.min(h01) && h10.max(h01) < h11, || {
        format!("height order {h:?}")
    })?;
    ensure((fit[1] - fit[2]).abs() <= 1e-3, || {
        format!("fitted |10>, |01> weights {fit:?}")
    })?;

    for (k, want) in [(0usize, 1usize), (1, 2), (2, 2)] {
        let st = DiagonalState::basis(2, k).unwrap();
        let s = time_averaged_spectrum(&p, &st, 0.5, 64, &grid).unwrap();
        let n = peaks(&s).len();
        ensure(n == want, || {
            format!("basis {k} average has {n} peaks, want {want}")
        })?;
    }
    let elapsed = t.elapsed();
    within_budget(elapsed, Duration::from_secs(5), "decay reproduction")?;
    Ok(format!(
        "averaged populations {:.4?}, heights ordered, peak counts 1,2,2,4 ({elapsed:.2?})",
        mean.probs()
    ))
}

fn scaling() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let device = |n: usize, rng: &mut ChaCha8Rng| {
        DeviceParams::new(
            mhz(6000.0),
            mhz(1.0),
            (0..n)
                .map(|_| QubitParams::from_shift(mhz(rng.gen_range(0.5..20.0))))
                .collect(),
        )
        .unwrap()
    };
    let big = device(12, &mut rng);
    let st = random_probs(&mut rng, 12);
    let grid = FrequencyGrid::covering_all_peaks(&big, 1001).unwrap();
    let t = Instant::now();
    fast_spectrum(&big, &st, &grid).unwrap();
    let elapsed = t.elapsed();
    within_budget(elapsed, Duration::from_secs(10), "N = 12 fast spectrum")?;

    let mut worst = 0.0f64;
    for _ in 0..3 {
        let p = device(8, &mut rng);
        let st = random_probs(&mut rng, 8);
        let grid = FrequencyGrid::covering_all_peaks(&p, 101).unwrap();
        let fast = fast_spectrum(&p, &st, &grid).unwrap();
        let dense = exact_spectrum(&p, &st, &grid).unwrap();
        worst = worst.max(max_rel(&fast, &dense));
    }
    ensure(worst <= 1e-10, || {
        format!("fast vs dense at N = 8: {worst:e}")
    })?;
    Ok(format!(
        "N = 12 in {elapsed:.2?}, fast vs dense at N = 8 {worst:.1e}"
    ))
}

fn determinism() -> Check {
    let bin = env!("CARGO_BIN_EXE_cavity-readout");
    let dir = tempfile::TempDir::new().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"preset": "n2-2010", "state": {"n_qubits": 2, "probs": [0.2, 0.2, 0.26, 0.34]},
            "grid": {"points": 401}, "spectrum": {"noise_fraction": 0.01}, "seed": 42,
            "decay": {"times_us": [0, 0.5, 1]}}"#,
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let mut runs: Vec<Vec<Vec<u8>>> = Vec::new();
    for round in 0..2 {
        let out = |name: &str| {
            dir.path()
                .join(format!("{round}-{name}"))
                .to_str()
                .unwrap()
                .to_string()
        };
        let jobs: Vec<(Vec<String>, Vec<String>)> = vec![
            (
                vec![
                    "spectrum".into(),
                    "-m".into(),
                    "exact".into(),
                    "-o".into(),
                    out("exact.csv"),
                ],
                vec![out("exact.csv")],
            ),
            (
                vec![
                    "spectrum".into(),
                    "-m".into(),
                    "fast".into(),
                    "-o".into(),
                    out("fast.csv"),
                ],
                vec![out("fast.csv")],
            ),
            (
                vec!["average".into(), "-o".into(), out("avg.csv")],
                vec![out("avg.csv")],
            ),
            (
                vec![
                    "decay".into(),
                    "--populations".into(),
                    out("pop.csv"),
                    "--spectrum".into(),
                    out("qs.csv"),
                ],
                vec![out("pop.csv"), out("qs.csv")],
            ),
        ];
        let mut files = Vec::new();
        for (args, outputs) in jobs {
            let status = Command::new(bin)
                .args(&args)
                .args(["-c", cfg])
                .status()
                .unwrap();
            ensure(status.success(), || {
                format!("{args:?} exited with {status}")
            })?;
            for o in outputs {
                files.push(std::fs::read(o).unwrap());
            }
        }
        runs.push(files);
    }
    ensure(runs[0] == runs[1], || "outputs differ between runs".into())?;
    Ok(format!(
        "{} CSV outputs byte-identical across two runs",
        runs[0].len()
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        (
            "single-qubit solver triangle with master-equation oracle",
            oracle_triangle,
        ),
        (
            "single-qubit superpositions show two peaks, mean field one",
            single_qubit_two_peaks,
        ),
        (
            "two-qubit superposition peaks and weight recovery",
            two_qubit_superpositions,
        ),
        (
            "two-qubit closed form matches chain solver",
            two_qubit_closed_form,
        ),
        (
            "exact spectrum dips at the cavity where mean field peaks",
            beyond_mean_field,
        ),
        ("spectral area equals 2pi/kappa", area_conservation),
        (
            "T1 decay: populations, quasi-static and averaged spectra",
            decay_reproduction,
        ),
        (
            "Walsh-Hadamard solver at N = 12 and agreement at N = 8",
            scaling,
        ),
        ("repeated CLI runs are byte-identical", determinism),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = t.elapsed();
        match result {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail} [{elapsed:.2?}]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL criterion {}: {name}: {detail} [{elapsed:.2?}]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
