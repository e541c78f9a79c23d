//! Acceptance criteria, one PASS/FAIL line each. Run with
//! `cargo test -p bilstab-cli --test acceptance`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use bilstab::analysis::{
    fit_decay_window, fts_necessary_check, observability_estimate, observation_integral, parsegov_extinction_time,
    parsegov_numeric, sequence_lemma_oracle, verify_a2, weak_report, DecayKind,
};
use bilstab::{Model, ModelSpec, StateVector};
use bilstab_cli::run::{write_csv, MONOTONE_TOL};
use bilstab_cli::scenarios::CATALOG;
use bilstab_cli::{simulate_scenario, ScenarioConfig, ScenarioRun};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Outcome = Result<String, String>;
/// `(id, description, check, runtime limit in seconds)`.
type Criterion = (&'static str, &'static str, fn() -> Outcome, u64);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run(name: &str, seed: u64, sets: &[&str]) -> Result<ScenarioRun, String> {
    let mut cfg = ScenarioConfig::new(name);
    cfg.seed = seed;
    for s in sets {
        cfg.apply_override(s).map_err(|e| e.to_string())?;
    }
    simulate_scenario(&cfg).map_err(|e| format!("{name}: {e}"))
}

fn settling(r: &ScenarioRun) -> f64 {
    r.trajectory.extinction_time.unwrap_or(f64::INFINITY)
}

fn ac1() -> Outcome {
    let r = run("scalar_fts", 42, &[])?;
    let te = settling(&r);
    ensure((te - 2.0).abs() <= 0.02, || {
        format!("extinction at {te}, expected 2.0 ± 1%")
    })?;
    Ok(format!("extinction at {te:.9}"))
}

fn ac2() -> Outcome {
    let m = Model::build(ModelSpec::WaveDamped { modes: 16 }).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let c: Vec<f64> = (0..32).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y = StateVector::new(m.space(), c).map_err(|e| e.to_string())?;
        let n = m.norm(&y).map_err(|e| e.to_string())?;
        let i = observation_integral(&m, &y, 1.0).map_err(|e| e.to_string())?;
        worst = worst.max((i - 0.5 * n * n).abs() / (0.5 * n * n));
    }
    ensure(worst <= 1e-6, || {
        format!("observation integral off by {worst:.3e} relative")
    })?;
    let est = observability_estimate(&m, 1.0, 50, 2).map_err(|e| e.to_string())?;
    ensure((est.delta_initial - 0.5).abs() <= 1e-4, || {
        format!("δ̂ = {}", est.delta_initial)
    })?;
    Ok(format!("max rel. error {worst:.2e}, δ̂ = {:.10}", est.delta_initial))
}

fn scaled_sup(r: &ScenarioRun, p: f64) -> f64 {
    r.trajectory
        .samples
        .iter()
        .filter(|s| s.t >= 10.0)
        .map(|s| s.norm * s.t.powf(p))
        .fold(0.0, f64::max)
}

fn ac3() -> Outcome {
    let mut detail = Vec::new();
    for r in [-1.0, 0.0, 1.0] {
        let p = 1.0 / (2.0 - r);
        let set_r = format!("r={r}");
        let short = run("wave_damped_vr", 3, &[&set_r, "horizon=1000"])?;
        let long = run("wave_damped_vr", 3, &[&set_r, "horizon=2000"])?;
        let (a, b) = (scaled_sup(&short, p), scaled_sup(&long, p));
        let change = (b - a).abs() / a;
        ensure(a.is_finite() && b.is_finite(), || format!("r={r}: unbounded"))?;
        ensure(change < 0.05, || format!("r={r}: sup moves by {change:.3} on doubling"))?;
        let mut s = format!("r={r}: sup={a:.4} Δ={change:.1e}");
        if r == 0.0 {
            let fit =
                fit_decay_window(&short.trajectory, DecayKind::Polynomial, 10.0, 1000.0).map_err(|e| e.to_string())?;
            ensure((0.35..=0.65).contains(&fit.rate), || {
                format!("r=0 exponent {}", fit.rate)
            })?;
            s.push_str(&format!(" p̂={:.4}", fit.rate));
        }
        detail.push(s);
    }
    Ok(detail.join("; "))
}

fn ac4() -> Outcome {
    let mut detail = Vec::new();
    for (c, alpha) in [(1.0, 0.0), (0.5, 1.0), (2.0, -0.5)] {
        let v = sequence_lemma_oracle(c, alpha, 1.0, 10_000).map_err(|e| e.to_string())?;
        let change = (v.sup_scaled - v.sup_scaled_tenth).abs() / v.sup_scaled_tenth;
        ensure(v.sup_scaled.is_finite() && change < 0.01, || {
            format!("(C, α) = ({c}, {alpha}): sup {} change {change}", v.sup_scaled)
        })?;
        detail.push(format!("({c},{alpha}): {:.6}", v.sup_scaled));
    }
    Ok(detail.join(", "))
}

fn ac5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let a = rng.random_range(0.1..10.0);
        let b = rng.random_range(0.1..10.0);
        let nu = rng.random_range(0.05..0.45);
        let v0 = 10f64.powf(rng.random_range(-3.0..3.0));
        let (exact, bound) = parsegov_extinction_time(a, b, nu, v0);
        ensure(exact <= bound, || format!("draw {i}: {exact} > {bound}"))?;
        let numeric = parsegov_numeric(a, b, nu, v0, 1e-2);
        worst = worst.max((numeric - exact).abs() / exact);
    }
    ensure(worst <= 1e-3, || format!("numeric vs closed form {worst:.3e}"))?;
    Ok(format!("max rel. error {worst:.2e}"))
}

fn ac6() -> Outcome {
    let mut worst = [0.0f64; 3];
    for seed in 0..5 {
        for scale in ["x0_scale=0.01", "x0_scale=1", "x0_scale=100"] {
            let x: f64 = scale[9..].parse().unwrap();
            let fts = settling(&run("r4_fts", seed, &[scale])?);
            let b = x.powf(0.5) / 0.5;
            ensure(fts <= b * (1.0 + 1e-9), || format!("FTS {fts} > {b} at {scale}"))?;
            let fx = settling(&run("r4_fxts", seed, &[scale])?);
            ensure(fx <= PI * (1.0 + 1e-9), || format!("FxTS {fx} > π at {scale}"))?;
            let pr = settling(&run("r4_prts", seed, &[scale, "T_target=0.5"])?);
            ensure(pr <= 0.5 * (1.0 + 1e-9), || format!("PrTS {pr} > 0.5 at {scale}"))?;
            worst = [worst[0].max(fts / b), worst[1].max(fx / PI), worst[2].max(pr / 0.5)];
        }
    }
    for law in ["r4_fts", "r4_fxts", "r4_prts"] {
        let r = run(law, 1, &["e4=0.7", "horizon=2"])?;
        let x4 = r.trajectory.final_state.coeffs()[3];
        ensure(x4 == 0.7, || format!("{law}: e₄ component moved to {x4}"))?;
    }
    Ok(format!(
        "worst settling/bound: FTS {:.3}, FxTS {:.3}, PrTS {:.3}; e₄ fixed",
        worst[0], worst[1], worst[2]
    ))
}

fn ac7() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..5 {
        for scale in ["x0_scale=0.1", "x0_scale=1", "x0_scale=10"] {
            let r = run("heat_spectral_fts", seed, &[scale])?;
            let x: f64 = scale[9..].parse().unwrap();
            let b = x.powf(0.5) / 0.5;
            let te = settling(&r);
            ensure(te <= b * (1.0 + 1e-9), || format!("settling {te} > {b}"))?;
            worst = worst.max(te / b);
        }
    }
    let r = run("heat_spectral_kernel", 0, &[])?;
    ensure(r.trajectory.extinction_time.is_none(), || {
        "kernel mode extinguished".into()
    })?;
    let l4 = (4.0 * PI).powi(2);
    let dev = r
        .trajectory
        .samples
        .iter()
        .map(|s| (s.norm - (-l4 * s.t).exp()).abs() / (-l4 * s.t).exp())
        .fold(0.0, f64::max);
    ensure(dev <= 1e-8, || format!("kernel decay deviates by {dev:.3e}"))?;
    let m = Model::build(ModelSpec::HeatSpectralProjection {
        modes: 8,
        weights: vec![2.0, 1.0, 3.0],
    })
    .map_err(|e| e.to_string())?;
    let v = fts_necessary_check(&m).map_err(|e| e.to_string())?;
    ensure(v.impossible, || "obstruction not detected".into())?;
    Ok(format!(
        "worst settling/bound {worst:.3}; kernel deviation {dev:.1e}; verdict impossible"
    ))
}

fn ac8() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let r = run("transport_fts_delayed", seed, &[])?;
        let n0 = r.trajectory.manifest.x0_norm;
        let b = 1.0 + n0.powf(0.5) / 0.5;
        let te = settling(&r);
        ensure(te <= b * (1.0 + 1e-9), || format!("seed {seed}: {te} > {b}"))?;
        worst = worst.max(te / b);
    }
    Ok(format!("worst settling/bound {worst:.6}"))
}

fn ac9() -> Outcome {
    let mut detail = Vec::new();
    for lambda in ["lambda=0.05", "lambda=0.1", "lambda=0.2"] {
        let r = run("transport_l1_exp", 9, &[lambda])?;
        let res = &r.manifest.results;
        let zeta = res.extras["max_zeta"].as_f64().unwrap_or(f64::NAN);
        let rate = res.fits.first().map_or(f64::NAN, |f| f.rate);
        ensure(zeta < 1.0 && rate > 0.0, || format!("{lambda}: max ζ̂ {zeta}, σ̂ {rate}"))?;
        detail.push(format!("{lambda}: ζ̄={zeta:.4} σ̂={rate:.4}"));
    }
    let m = Model::build(ModelSpec::TransportL1 {
        cells: 3000,
        dx: 0.01,
        alpha_cut: 0.5,
    })
    .map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut margin = f64::INFINITY;
    for _ in 0..50 {
        // Support lengths from a few cells up to the observable range [0, x_max − T].
        let reach = rng.random_range(0.05..28.0);
        let c: Vec<f64> = (0..3000)
            .map(|i| {
                if (i as f64 + 0.5) * 0.01 < reach {
                    rng.random_range(0.0..1.0)
                } else {
                    0.0
                }
            })
            .collect();
        let y = StateVector::new(m.space(), c).map_err(|e| e.to_string())?;
        let n = m.norm(&y).map_err(|e| e.to_string())?;
        let i = observation_integral(&m, &y, 2.0).map_err(|e| e.to_string())?;
        margin = margin.min(i - 1.5 * n * n);
    }
    ensure(margin >= -1e-6, || {
        format!("observation integral below (T − α)‖y‖² by {margin}")
    })?;
    detail.push(format!("min ∫ − (T−α)‖y‖² = {margin:.3e}"));
    Ok(detail.join("; "))
}

fn ac10() -> Outcome {
    let r = run("heat_sup_exp", 10, &[])?;
    let inc = r.trajectory.max_norm_increase;
    ensure(inc <= MONOTONE_TOL, || format!("sup norm grows by {inc}"))?;
    let rate = r.manifest.results.fits.first().map_or(f64::NAN, |f| f.rate);
    ensure(rate > 0.0, || format!("σ̂ = {rate}"))?;
    let a: Vec<f64> = (0..51)
        .map(|i| 1.0 + (i as f64 / 50.0) * (1.0 - i as f64 / 50.0))
        .collect();
    let m = Model::build(ModelSpec::HeatNeumannSup { a }).map_err(|e| e.to_string())?;
    let a2 = verify_a2(&m, 5000, 10).map_err(|e| e.to_string())?;
    ensure(a2.pass, || format!("Lipschitz ratio {}", a2.worst_ratio))?;
    Ok(format!(
        "σ̂ = {rate:.4}, max increase {inc:.1e}, Lipschitz ratio {:.4}",
        a2.worst_ratio
    ))
}

fn ac11() -> Outcome {
    let mut worst = (0.0f64, "");
    for info in CATALOG {
        let r = run(info.name, 11, &[])?;
        if r.trajectory.max_norm_increase > worst.0 {
            worst = (r.trajectory.max_norm_increase, info.name);
        }
    }
    ensure(worst.0 <= MONOTONE_TOL, || format!("{} grows by {}", worst.1, worst.0))?;
    Ok(format!("{} scenarios, worst increase {:.1e}", CATALOG.len(), worst.0))
}

fn ac12() -> Outcome {
    let ctrl = run("wave_undamped_weak", 12, &[])?;
    let free = run("wave_undamped_weak", 12, &["controlled=0"])?;
    let rc = weak_report(&ctrl.trajectory).map_err(|e| e.to_string())?;
    let rf = weak_report(&free.trajectory).map_err(|e| e.to_string())?;
    ensure(rc.ratios.len() == 5, || format!("{} observables", rc.ratios.len()))?;
    ensure(rc.ratios.iter().all(|r| *r < 1.0), || {
        format!("controlled ratios {:?}", rc.ratios)
    })?;
    ensure(rf.ratios.iter().all(|r| (r - 1.0).abs() <= 0.1), || {
        format!("free ratios {:?}", rf.ratios)
    })?;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(",");
    Ok(format!("controlled [{}], free [{}]", fmt(&rc.ratios), fmt(&rf.ratios)))
}

fn ac13() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for info in CATALOG {
        let mut bytes = Vec::new();
        for k in 0..2 {
            let r = run(info.name, 13, &[])?;
            let path = dir.path().join(format!("{}_{k}.csv", info.name));
            write_csv(&path, &r.trajectory).map_err(|e| e.to_string())?;
            bytes.push(std::fs::read(&path).map_err(|e| e.to_string())?);
        }
        ensure(bytes[0] == bytes[1], || format!("{} differs between reruns", info.name))?;
    }
    Ok(format!("{} scenarios bit-identical", CATALOG.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 13] = [
        ("AC01", "scalar finite-time extinction at 2.0", ac1, 1),
        ("AC02", "damped-wave observability", ac2, 10),
        ("AC03", "polynomial decay for v_r", ac3, 120),
        ("AC04", "sequence lemma", ac4, 5),
        ("AC05", "Parsegov lemma", ac5, 10),
        ("AC06", "four-dimensional FTS / FxTS / PrTS", ac6, 30),
        ("AC07", "spectral-heat FTS and kernel mode", ac7, 30),
        ("AC08", "transport delayed FTS", ac8, 30),
        ("AC09", "transport L¹ exponential", ac9, 60),
        ("AC10", "sup-norm heat exponential", ac10, 60),
        ("AC11", "per-step norm monotonicity", ac11, 300),
        ("AC12", "weak stabilization of the undamped wave", ac12, 60),
        ("AC13", "determinism", ac13, 600),
    ];
    let mut failed = 0;
    for (id, name, f, limit) in criteria {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let slow = elapsed > Duration::from_secs(limit);
        let (ok, detail) = match outcome {
            Ok(d) if !slow => (true, d),
            Ok(d) => (false, format!("{d}; exceeded {limit} s")),
            Err(e) => (false, e),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{id} {} {name} ({detail}) [{:.2} s]",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("{} of 13 acceptance criteria passed", 13 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
