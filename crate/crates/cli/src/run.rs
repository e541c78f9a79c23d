//! Running scenarios, measuring results, writing CSV and manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use bilstab::analysis::{
    contraction_ratio_report, fit_decay, fit_decay_window, fts_necessary_check, noninvariant_bounds, verify_a2,
    weak_report, DecayKind, RateFit,
};
use bilstab::{simulate, FeedbackLaw, ModelSpec, SimOptions, Trajectory};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::ScenarioConfig;
use crate::error::{io_err, CliError, CliResult};
use crate::scenarios::{self, canonical_key, Params, Post, Setup};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const CSV_FILE: &str = "trajectory.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.csv";
/// Largest tolerated per-step norm increase, relative to `‖x0‖`.
pub const MONOTONE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    /// `None` when the measured quantity does not exist (e.g. no extinction).
    pub value: Option<f64>,
    pub bound: Option<f64>,
    pub pass: bool,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl BoundCheck {
    fn le(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value, bound, value <= bound)
    }

    fn new(name: impl Into<String>, value: f64, bound: f64, pass: bool) -> Self {
        Self {
            name: name.into(),
            value: finite(value),
            bound: finite(bound),
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResults {
    pub settling_time: Option<f64>,
    pub b_extinction_time: Option<f64>,
    pub final_norm: f64,
    pub max_norm_increase: f64,
    pub fits: Vec<RateFit>,
    pub bound_checks: Vec<BoundCheck>,
    /// Scenario-specific measurements (window ratios, weak ratios, …).
    pub extras: BTreeMap<String, Value>,
    pub all_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub scenario: String,
    pub seed: u64,
    pub params: Params,
    pub derived: BTreeMap<String, f64>,
    pub model: ModelSpec,
    pub law: FeedbackLaw,
    pub sim: SimOptions,
    pub beta: f64,
    pub omega0: f64,
    pub x0_norm: f64,
    pub steps: usize,
    pub results: RunResults,
    pub wall_clock_s: f64,
}

/// A finished run held in memory.
pub struct ScenarioRun {
    pub manifest: RunManifest,
    pub trajectory: Trajectory,
}

fn measure(setup: &Setup, traj: &Trajectory) -> CliResult<RunResults> {
    let mut checks = Vec::new();
    let mut fits = Vec::new();
    let mut extras = BTreeMap::new();
    let te = traj.extinction_time;
    if !matches!(setup.post, Post::KernelConstant { .. }) {
        checks.push(BoundCheck::le(
            "per_step_norm_increase",
            traj.max_norm_increase,
            MONOTONE_TOL,
        ));
    }
    match &setup.post {
        Post::Settling { bound, label, exact } => {
            let t = te.unwrap_or(f64::INFINITY);
            checks.push(BoundCheck::le(
                format!("settling_time ≤ {label}"),
                t,
                bound * (1.0 + 1e-9),
            ));
            if *exact {
                checks.push(BoundCheck::le(
                    "|settling_time − bound| / bound",
                    (t - bound).abs() / bound,
                    0.01,
                ));
            }
        }
        Post::KernelConstant { index, value } => {
            let got = traj.final_state.coeffs()[*index];
            checks.push(BoundCheck::le(
                format!("kernel coordinate {} drift", index + 1),
                (got - value).abs(),
                1e-12 * value.abs(),
            ));
        }
        Post::Weak { controlled } => {
            let rep = weak_report(traj)?;
            for (k, r) in rep.ratios.iter().enumerate() {
                if rep.early_max[k] == 0.0 {
                    continue;
                }
                if *controlled {
                    checks.push(BoundCheck::new(format!("weak ratio obs_{}", k + 1), *r, 1.0, *r < 1.0));
                } else {
                    checks.push(BoundCheck::le(
                        format!("|weak ratio obs_{} − 1|", k + 1),
                        (r - 1.0).abs(),
                        0.1,
                    ));
                }
            }
            extras.insert("weak_ratios".into(), json!(rep.ratios));
        }
        Post::Polynomial { r } => {
            let p = 1.0 / (2.0 - r);
            let horizon = traj.manifest.options.horizon;
            let fit = fit_decay_window(traj, DecayKind::Polynomial, 10.0, horizon)?;
            let scaled = traj
                .samples
                .iter()
                .filter(|s| s.t >= 10.0)
                .map(|s| s.norm * s.t.powf(p))
                .fold(0.0, f64::max);
            extras.insert("expected_exponent".into(), json!(p));
            extras.insert("sup_norm_times_t_pow".into(), json!(scaled));
            checks.push(BoundCheck::le(
                "|fitted exponent − 1/(2−r)|",
                (fit.rate - p).abs(),
                0.15,
            ));
            checks.push(BoundCheck::new(
                "sup ‖z‖·t^{1/(2−r)} finite",
                scaled,
                f64::NAN,
                scaled.is_finite(),
            ));
            fits.push(fit);
        }
        Post::Contraction { window } => {
            let rep = contraction_ratio_report(traj, *window)?;
            checks.push(BoundCheck::new(
                "max window ratio ζ̂",
                rep.max_zeta,
                1.0,
                rep.max_zeta < 1.0,
            ));
            extras.insert("zeta".into(), json!(rep.zeta));
            extras.insert("max_zeta".into(), json!(rep.max_zeta));
            extras.insert("implied_rate".into(), json!(rep.implied_rate));
            let fit = fit_decay(traj, DecayKind::Exponential)?;
            checks.push(positive_rate(&fit));
            fits.push(fit);
        }
        Post::SupHeat { a2_samples, seed } => {
            let fit = fit_decay(traj, DecayKind::Exponential)?;
            checks.push(positive_rate(&fit));
            fits.push(fit);
            let a2 = verify_a2(&setup.model, *a2_samples, *seed)?;
            checks.push(BoundCheck::new(
                format!("Lipschitz ratio with 𝒦 = {}", a2.kappa),
                a2.worst_ratio,
                1.0 + 1e-9,
                a2.pass,
            ));
        }
        Post::KernelMode { lambda } => {
            let n0 = traj.manifest.x0_norm;
            let dev = traj
                .samples
                .iter()
                .map(|s| {
                    let exact = n0 * (-lambda * s.t).exp();
                    (s.norm - exact).abs() / exact
                })
                .fold(0.0, f64::max);
            checks.push(BoundCheck::new(
                "no extinction",
                te.unwrap_or(f64::NAN),
                f64::NAN,
                te.is_none(),
            ));
            checks.push(BoundCheck::le(
                "max |‖x(t)‖ − e^{−λ₄t}‖x0‖| / (e^{−λ₄t}‖x0‖)",
                dev,
                1e-8,
            ));
            let verdict = fts_necessary_check(&setup.model)?;
            checks.push(BoundCheck::new(
                "finite-time obstruction detected",
                verdict.residual,
                1e-9,
                verdict.impossible,
            ));
            extras.insert("fts_check".into(), serde_json::to_value(&verdict)?);
        }
        Post::NonInvariant { v0, beta, mu } => {
            let (stated, proof) = noninvariant_bounds(*v0, *beta, *mu);
            let t = te.unwrap_or(f64::INFINITY);
            checks.push(BoundCheck::le("settling_time ≤ V0^μ/(βμ)", t, stated));
            extras.insert("bound_stated".into(), json!(stated));
            extras.insert("bound_proof".into(), json!(proof));
            extras.insert("settling_within_proof_bound".into(), json!(t <= proof));
        }
    }
    let all_pass = checks.iter().all(|c| c.pass);
    Ok(RunResults {
        settling_time: te,
        b_extinction_time: traj.b_extinction_time,
        final_norm: traj.final_norm(),
        max_norm_increase: traj.max_norm_increase,
        fits,
        bound_checks: checks,
        extras,
        all_pass,
    })
}

fn positive_rate(fit: &RateFit) -> BoundCheck {
    BoundCheck::new("fitted exponential rate σ̂ > 0", fit.rate, 0.0, fit.rate > 0.0)
}

/// Runs a scenario in memory without touching the filesystem.
pub fn simulate_scenario(cfg: &ScenarioConfig) -> CliResult<ScenarioRun> {
    let start = Instant::now();
    let info = cfg.info()?;
    let params = scenarios::resolve_params(info, &cfg.params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let setup = scenarios::build(info, &params, cfg.seed, &mut rng)?;
    let opts = cfg.sim_options(setup.opts.clone())?;
    let traj = simulate(&setup.model, &setup.law, &setup.x0, &opts)?;
    let results = measure(&setup, &traj)?;
    let manifest = RunManifest {
        version: VERSION.to_string(),
        scenario: info.name.to_string(),
        seed: cfg.seed,
        params,
        derived: setup.derived.clone(),
        model: setup.model.spec().clone(),
        law: setup.law.clone(),
        sim: opts,
        beta: setup.model.beta(),
        omega0: setup.model.omega0(),
        x0_norm: traj.manifest.x0_norm,
        steps: traj.manifest.steps,
        results,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    Ok(ScenarioRun {
        manifest,
        trajectory: traj,
    })
}

/// Writes `t,norm,control,b_form,obs_1..obs_K` with 17 significant digits.
pub fn write_csv(path: &Path, traj: &Trajectory) -> CliResult<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let k = traj.samples.first().map_or(0, |s| s.obs.len());
    let mut header = String::from("t,norm,control,b_form");
    for i in 1..=k {
        header.push_str(&format!(",obs_{i}"));
    }
    let mut body = header;
    body.push('\n');
    for s in &traj.samples {
        body.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            s.t, s.norm, s.control, s.b_form
        ));
        for o in &s.obs {
            body.push_str(&format!(",{o:.16e}"));
        }
        body.push('\n');
        if body.len() > 1 << 16 {
            w.write_all(body.as_bytes()).map_err(io_err(path))?;
            body.clear();
        }
    }
    w.write_all(body.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn default_out(scenario: &str) -> PathBuf {
    let root = std::env::var_os("BILSTAB_OUT").map_or_else(|| PathBuf::from("runs"), PathBuf::from);
    root.join(scenario)
}

fn write_outputs(dir: &Path, run: &ScenarioRun) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_csv(&dir.join(CSV_FILE), &run.trajectory)?;
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&run.manifest)?;
    fs::write(&path, text).map_err(io_err(&path))
}

/// Runs a scenario and writes `trajectory.csv` and `manifest.json` into the
/// configured output directory.
pub fn run_scenario(cfg: &ScenarioConfig) -> CliResult<RunManifest> {
    let run = simulate_scenario(cfg)?;
    let dir = cfg.out.clone().unwrap_or_else(|| default_out(&run.manifest.scenario));
    write_outputs(&dir, &run)?;
    Ok(run.manifest)
}

pub fn summary_line(m: &RunManifest) -> String {
    let settle = m.results.settling_time.map_or("none".into(), |t| format!("{t:.6}"));
    let rate = m.results.fits.first().map_or("-".into(), |f| format!("{:.4}", f.rate));
    let passed = m.results.bound_checks.iter().filter(|c| c.pass).count();
    format!(
        "{} seed={} settling={} rate={} checks={}/{} {}",
        m.scenario,
        m.seed,
        settle,
        rate,
        passed,
        m.results.bound_checks.len(),
        if m.results.all_pass { "PASS" } else { "FAIL" }
    )
}

pub const SWEEP_PARAMS: &[&str] = &["r", "lambda", "mu", "rho", "T_target", "x0_scale"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub settling_time: Option<f64>,
    pub fitted_rate: Option<f64>,
    pub max_zeta: Option<f64>,
    pub all_pass: bool,
}

/// Runs the scenario once per value (in parallel), each inside its own
/// `<param>_<index>` subdirectory of `out`, then writes `summary.csv`.
pub fn sweep(cfg: &ScenarioConfig, param: &str, values: &[f64], out: &Path) -> CliResult<Vec<SweepRow>> {
    let key = canonical_key(param);
    if !SWEEP_PARAMS.contains(&key) {
        return Err(CliError::Validation {
            field: param.to_string(),
            reason: format!("cannot sweep; expected one of: {}", SWEEP_PARAMS.join(", ")),
        });
    }
    if values.is_empty() {
        return Err(CliError::Validation {
            field: "values".into(),
            reason: "must not be empty".into(),
        });
    }
    // Validate the key against the scenario before spawning anything.
    cfg.clone().set_param(key, values[0])?;
    let rows: Vec<CliResult<SweepRow>> = values
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let mut c = cfg.clone();
            c.set_param(key, *v)?;
            let run = simulate_scenario(&c)?;
            write_outputs(&out.join(format!("{key}_{i:02}")), &run)?;
            let r = &run.manifest.results;
            Ok(SweepRow {
                value: *v,
                settling_time: r.settling_time,
                fitted_rate: r.fits.first().map(|f| f.rate),
                max_zeta: r.extras.get("max_zeta").and_then(Value::as_f64),
                all_pass: r.all_pass,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<CliResult<Vec<_>>>()?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.16e}"));
    let mut text = format!("{key},settling_time,fitted_rate,max_zeta,all_pass\n");
    for r in &rows {
        text.push_str(&format!(
            "{:.16e},{},{},{},{}\n",
            r.value,
            opt(r.settling_time),
            opt(r.fitted_rate),
            opt(r.max_zeta),
            r.all_pass
        ));
    }
    let path = out.join(SUMMARY_FILE);
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(rows)
}
