//! The scenario catalog: one closed-loop experiment per model application.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};

use bilstab::feedback::prescribed_rho;
use bilstab::{FeedbackLaw, Model, ModelSpec, SimOptions, StateVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{CliError, CliResult};

/// A tunable scenario parameter and its default.
#[derive(Debug, Clone, Copy)]
pub struct ParamDef {
    pub key: &'static str,
    pub default: f64,
    pub help: &'static str,
}

const fn p(key: &'static str, default: f64, help: &'static str) -> ParamDef {
    ParamDef { key, default, help }
}

#[derive(Debug, Clone, Copy)]
pub struct ScenarioInfo {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: &'static [ParamDef],
}

pub const CATALOG: &[ScenarioInfo] = &[
    ScenarioInfo {
        name: "scalar_fts",
        summary: "x' = u·x with u = −|x|^{−2μ}: extinction at |x0|^{2μ}/(2μ)",
        params: &[
            p("mu", 0.25, "finite-time exponent"),
            p("x0_scale", 1.0, "initial value"),
        ],
    },
    ScenarioInfo {
        name: "wave_undamped_weak",
        summary: "undamped string, u = −⟨z, Bz⟩: weak decay of modal observables",
        params: &[
            p("modes", 16.0, "number of Dirichlet modes"),
            p("x0_scale", 1.0, "initial energy norm"),
            p("controlled", 1.0, "1 for the quadratic feedback, 0 for the free flow"),
        ],
    },
    ScenarioInfo {
        name: "wave_damped_vr",
        summary: "damped string, u = −⟨z, Bz⟩/‖z‖^r: polynomial decay t^{−1/(2−r)}",
        params: &[
            p("modes", 16.0, "number of Dirichlet modes"),
            p("r", 0.0, "homogeneity exponent (< 2)"),
            p("x0_scale", 1.0, "initial energy norm"),
        ],
    },
    ScenarioInfo {
        name: "transport_l1_exp",
        summary: "L¹ transport controlled beyond α, normalized feedback: exponential decay",
        params: &[
            p("dx", 0.01, "cell width"),
            p("x_max", 30.0, "truncated domain length"),
            p("alpha", 0.5, "start of the controlled region"),
            p("lambda", 0.1, "feedback gain"),
            p("window", 2.0, "contraction-ratio window T"),
            p("x0_scale", 1.0, "initial L¹ norm"),
        ],
    },
    ScenarioInfo {
        name: "heat_sup_exp",
        summary: "Neumann heat in sup norm, u = −λ a(s0): exponential decay",
        params: &[
            p("nodes", 51.0, "grid nodes on [0, 1]"),
            p("lambda", 0.1, "feedback gain"),
            p("x0_scale", 1.0, "initial sup norm"),
            p("a2_samples", 2000.0, "pairs sampled for the Lipschitz check"),
        ],
    },
    ScenarioInfo {
        name: "r4_fts",
        summary: "four-dimensional example, finite-time feedback",
        params: &[
            p("mu", 0.25, "finite-time exponent"),
            p("shift", SQRT_2, "ω₀-shift"),
            p("x0_scale", 1.0, "initial norm"),
            p("e4", 0.0, "initial fourth coordinate (kernel of B)"),
        ],
    },
    ScenarioInfo {
        name: "r4_fxts",
        summary: "four-dimensional example, fixed-time feedback",
        params: &[
            p("mu", 0.25, "finite-time exponent"),
            p("shift", SQRT_2, "ω₀-shift"),
            p("x0_scale", 1.0, "initial norm"),
            p("e4", 0.0, "initial fourth coordinate (kernel of B)"),
        ],
    },
    ScenarioInfo {
        name: "r4_prts",
        summary: "four-dimensional example, prescribed-time feedback",
        params: &[
            p("mu", 0.25, "finite-time exponent"),
            p("shift", SQRT_2, "ω₀-shift"),
            p("T_target", 0.5, "prescribed settling time"),
            p("rho", 0.0, "gain; 0 derives it from T_target"),
            p("x0_scale", 1.0, "initial norm"),
            p("e4", 0.0, "initial fourth coordinate (kernel of B)"),
        ],
    },
    ScenarioInfo {
        name: "heat_spectral_fts",
        summary: "Dirichlet heat with B = Σ a_j⟨·, φ_j⟩φ_j, finite-time feedback",
        params: &[
            p("modes", 16.0, "number of Dirichlet modes"),
            p("mu", 0.25, "finite-time exponent"),
            p("x0_scale", 1.0, "initial norm"),
        ],
    },
    ScenarioInfo {
        name: "heat_spectral_kernel",
        summary: "same model started on the uncontrolled mode φ₄",
        params: &[
            p("modes", 16.0, "number of Dirichlet modes"),
            p("mu", 0.25, "finite-time exponent"),
            p("x0_scale", 1.0, "initial norm"),
        ],
    },
    ScenarioInfo {
        name: "transport_fts_delayed",
        summary: "L² transport controlled beyond a, finite-time feedback switched on at τ",
        params: &[
            p("dx", 0.01, "cell width"),
            p("x_max", 10.0, "truncated domain length"),
            p("a_cut", 1.0, "start of the controlled region"),
            p("tau", 1.0, "switch time"),
            p("mu", 0.25, "finite-time exponent"),
            p("x0_scale", 1.0, "initial L² norm"),
        ],
    },
    ScenarioInfo {
        name: "noninvariant_ft",
        summary: "A = [[−1, 1], [0, −1]], B = diag(1, 2), u = −α − ⟨Bx, x⟩^{−μ}",
        params: &[
            p("mu", 0.25, "finite-time exponent"),
            p("alpha", 0.0, "constant feedback part"),
            p("x0_scale", 1.0, "initial norm (direction (1, 1))"),
        ],
    },
    ScenarioInfo {
        name: "linear_fts",
        summary: "heat with B = LL*, additive finite-time control through L",
        params: &[
            p("modes", 16.0, "number of Dirichlet modes"),
            p("mu", 0.25, "finite-time exponent"),
            p("alpha_coerc", 1.0, "coercivity constant of L*"),
            p("fixed_time", 0.0, "1 adds the fixed-time term"),
            p("x0_scale", 1.0, "initial norm"),
        ],
    },
];

/// Names accepted in place of catalog names.
const ALIASES: &[(&str, &str)] = &[("wave_damped", "wave_damped_vr")];

pub fn lookup(name: &str) -> CliResult<&'static ScenarioInfo> {
    let name = ALIASES.iter().find(|(a, _)| *a == name).map_or(name, |(_, n)| *n);
    CATALOG
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| CliError::UnknownScenario {
            name: name.to_string(),
            available: CATALOG.iter().map(|s| s.name).collect::<Vec<_>>().join(", "),
        })
}

/// Parameter names also accepted in their Greek spelling.
pub fn canonical_key(key: &str) -> &str {
    match key {
        "λ" => "lambda",
        "μ" => "mu",
        "ρ" => "rho",
        "τ" => "tau",
        "α" => "alpha",
        "T" => "T_target",
        other => other,
    }
}

pub type Params = BTreeMap<String, f64>;

/// Defaults for `info` overridden by `overrides`; unknown keys are rejected.
pub fn resolve_params(info: &ScenarioInfo, overrides: &Params) -> CliResult<Params> {
    let mut out: Params = info.params.iter().map(|d| (d.key.to_string(), d.default)).collect();
    for (k, v) in overrides {
        let key = canonical_key(k);
        if !out.contains_key(key) {
            return Err(unknown_key(info, k));
        }
        if !v.is_finite() {
            return Err(CliError::Validation {
                field: key.to_string(),
                reason: "must be finite".into(),
            });
        }
        out.insert(key.to_string(), *v);
    }
    Ok(out)
}

pub fn unknown_key(info: &ScenarioInfo, key: &str) -> CliError {
    CliError::Validation {
        field: key.to_string(),
        reason: format!(
            "unknown parameter for `{}`; expected one of: {}, or a [sim] option ({})",
            info.name,
            info.params.iter().map(|d| d.key).collect::<Vec<_>>().join(", "),
            crate::config::SIM_KEYS.join(", ")
        ),
    }
}

/// What to measure once the trajectory is in hand.
#[derive(Debug, Clone)]
pub enum Post {
    /// Settling time against an upper bound; `exact` adds a 1% match check.
    Settling {
        bound: f64,
        label: &'static str,
        exact: bool,
    },
    /// Fourth coordinate of the four-dimensional example must stay constant.
    KernelConstant {
        index: usize,
        value: f64,
    },
    Weak {
        controlled: bool,
    },
    Polynomial {
        r: f64,
    },
    Contraction {
        window: f64,
    },
    SupHeat {
        a2_samples: usize,
        seed: u64,
    },
    KernelMode {
        lambda: f64,
    },
    NonInvariant {
        v0: f64,
        beta: f64,
        mu: f64,
    },
}

pub struct Setup {
    pub model: Model,
    pub law: FeedbackLaw,
    pub x0: StateVector,
    pub opts: SimOptions,
    pub post: Post,
    /// Derived quantities echoed into the manifest (e.g. ρ from `T_target`).
    pub derived: BTreeMap<String, f64>,
}

fn get(p: &Params, key: &str) -> f64 {
    p[key]
}

fn count(p: &Params, key: &str) -> CliResult<usize> {
    let v = p[key];
    if v < 1.0 || v.fract() != 0.0 {
        return Err(CliError::Validation {
            field: key.to_string(),
            reason: format!("must be a positive integer, got {v}"),
        });
    }
    Ok(v as usize)
}

fn positive(p: &Params, key: &str) -> CliResult<f64> {
    let v = p[key];
    if v <= 0.0 {
        return Err(CliError::Validation {
            field: key.to_string(),
            reason: format!("must be > 0, got {v}"),
        });
    }
    Ok(v)
}

fn cells(p: &Params) -> CliResult<(usize, f64)> {
    let dx = positive(p, "dx")?;
    let x_max = positive(p, "x_max")?;
    let n = (x_max / dx).round();
    if (x_max / dx - n).abs() > 1e-9 * n || n < 1.0 {
        return Err(CliError::Validation {
            field: "x_max".into(),
            reason: format!("must be a whole number of cells of width dx = {dx}"),
        });
    }
    Ok((n as usize, dx))
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn normalised(model: &Model, c: Vec<f64>, scale: f64) -> CliResult<StateVector> {
    let v = StateVector::new(model.space(), c)?;
    let n = model.norm(&v)?;
    Ok(v.scaled(scale / n))
}

fn fts_bound(norm: f64, mu: f64, beta: f64) -> f64 {
    norm.powf(2.0 * mu) / (2.0 * mu * beta.powf(1.0 - mu))
}

fn sim(dt_max: f64, horizon: f64) -> SimOptions {
    SimOptions {
        dt_max,
        horizon,
        ..SimOptions::default()
    }
}

/// Random wave state with modal amplitudes decaying like `1/j`.
fn wave_state(model: &Model, modes: usize, scale: f64, rng: &mut ChaCha8Rng) -> CliResult<StateVector> {
    let c = (0..2 * modes)
        .map(|i| gaussian(rng) / (1 + i / 2) as f64 / (1 + i / 2) as f64)
        .collect();
    normalised(model, c, scale)
}

fn r4_setup(name: &str, p: &Params, rng: &mut ChaCha8Rng) -> CliResult<Setup> {
    let model = Model::build(ModelSpec::FiniteDimR4)?;
    let (mu, shift, scale, e4) = (get(p, "mu"), get(p, "shift"), positive(p, "x0_scale")?, get(p, "e4"));
    let dir: Vec<f64> = (0..3).map(|_| gaussian(rng)).collect();
    let n = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut c: Vec<f64> = dir.iter().map(|x| x * scale / n).collect();
    c.push(e4);
    let x0 = StateVector::new(model.space(), c)?;
    let mut derived = BTreeMap::new();
    let (law, bound, label, opts) = match name {
        "r4_fts" => {
            let b = fts_bound(scale, mu, 1.0);
            (
                FeedbackLaw::FiniteTime { mu, shift },
                b,
                "‖x0‖^{2μ}/(2μ)",
                sim(1e-3, 1.2 * b + 0.1),
            )
        }
        "r4_fxts" => {
            let b = PI / (4.0 * mu);
            (
                FeedbackLaw::FixedTime { mu, shift },
                b,
                "π/(4μ)",
                sim(1e-3, 1.2 * b + 0.1),
            )
        }
        _ => {
            let t_target = positive(p, "T_target")?;
            let rho = if get(p, "rho") > 0.0 {
                get(p, "rho")
            } else {
                prescribed_rho(t_target, mu, 1.0)
            };
            derived.insert("rho".into(), rho);
            // The bound for a general ρ is the fixed-time one scaled by 1/ρ.
            let b = PI / (4.0 * mu * rho);
            (
                FeedbackLaw::PrescribedTime { mu, rho, shift },
                b,
                "π/(4μρ) (= T_target for the derived ρ)",
                sim(1e-4, 1.2 * b + 0.1),
            )
        }
    };
    let post = if e4 != 0.0 {
        Post::KernelConstant { index: 3, value: e4 }
    } else {
        Post::Settling {
            bound,
            label,
            exact: false,
        }
    };
    Ok(Setup {
        model,
        law,
        x0,
        opts,
        post,
        derived,
    })
}

fn heat_projection(modes: usize) -> CliResult<Model> {
    Ok(Model::build(ModelSpec::HeatSpectralProjection {
        modes,
        weights: vec![2.0, 1.0, 3.0],
    })?)
}

/// Builds the model, law, initial state and default options of a scenario.
/// All randomness comes from `rng`.
pub fn build(info: &ScenarioInfo, p: &Params, seed: u64, rng: &mut ChaCha8Rng) -> CliResult<Setup> {
    let none = BTreeMap::new;
    match info.name {
        "scalar_fts" => {
            let model = Model::build(ModelSpec::FiniteDimCustom {
                a: vec![vec![0.0]],
                b: vec![vec![1.0]],
                omega0: 0.0,
            })?;
            let mu = get(p, "mu");
            let x = positive(p, "x0_scale")?;
            let bound = fts_bound(x, mu, 1.0);
            Ok(Setup {
                x0: StateVector::new(model.space(), vec![x])?,
                model,
                law: FeedbackLaw::FiniteTime { mu, shift: 0.0 },
                opts: sim(1e-3, 1.5 * bound),
                post: Post::Settling {
                    bound,
                    label: "‖x0‖^{2μ}/(2μ)",
                    exact: true,
                },
                derived: none(),
            })
        }
        "wave_undamped_weak" => {
            let modes = count(p, "modes")?;
            let model = Model::build(ModelSpec::WaveUndamped { modes })?;
            let controlled = get(p, "controlled") != 0.0;
            Ok(Setup {
                x0: wave_state(&model, modes, positive(p, "x0_scale")?, rng)?,
                model,
                law: if controlled {
                    FeedbackLaw::QuadraticV0
                } else {
                    FeedbackLaw::Zero
                },
                opts: SimOptions {
                    record_stride: 10,
                    weak_functionals: 5,
                    ..sim(0.01, 500.0)
                },
                post: Post::Weak { controlled },
                derived: none(),
            })
        }
        "wave_damped_vr" => {
            let modes = count(p, "modes")?;
            let model = Model::build(ModelSpec::WaveDamped { modes })?;
            let r = get(p, "r");
            Ok(Setup {
                x0: wave_state(&model, modes, positive(p, "x0_scale")?, rng)?,
                model,
                law: FeedbackLaw::HomogeneousVr { r },
                opts: SimOptions {
                    record_stride: 10,
                    ..sim(0.02, 1000.0)
                },
                post: Post::Polynomial { r },
                derived: none(),
            })
        }
        "transport_l1_exp" => {
            let (n, dx) = cells(p)?;
            let model = Model::build(ModelSpec::TransportL1 {
                cells: n,
                dx,
                alpha_cut: get(p, "alpha"),
            })?;
            let c = (0..n)
                .map(|i| {
                    if (i as f64 + 0.5) * dx < 1.0 {
                        rng.random_range(0.0..1.0)
                    } else {
                        0.0
                    }
                })
                .collect();
            Ok(Setup {
                x0: normalised(&model, c, positive(p, "x0_scale")?)?,
                model,
                law: FeedbackLaw::NormalizedBanach {
                    lambda: get(p, "lambda"),
                },
                opts: sim(dx, 20.0),
                post: Post::Contraction {
                    window: positive(p, "window")?,
                },
                derived: none(),
            })
        }
        "heat_sup_exp" => {
            let n = count(p, "nodes")?;
            let a = (0..n)
                .map(|i| {
                    let z = i as f64 / (n - 1).max(1) as f64;
                    1.0 + z * (1.0 - z)
                })
                .collect();
            let model = Model::build(ModelSpec::HeatNeumannSup { a })?;
            let c = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            Ok(Setup {
                x0: normalised(&model, c, positive(p, "x0_scale")?)?,
                model,
                law: FeedbackLaw::NormalizedBanach {
                    lambda: get(p, "lambda"),
                },
                opts: sim(0.01, 10.0),
                post: Post::SupHeat {
                    a2_samples: count(p, "a2_samples")?,
                    seed,
                },
                derived: none(),
            })
        }
        "r4_fts" | "r4_fxts" | "r4_prts" => r4_setup(info.name, p, rng),
        "heat_spectral_fts" => {
            let modes = count(p, "modes")?;
            let model = heat_projection(modes)?;
            let mu = get(p, "mu");
            let scale = positive(p, "x0_scale")?;
            let mut c = vec![0.0; modes];
            for x in c.iter_mut().take(3) {
                *x = gaussian(rng);
            }
            let bound = fts_bound(scale, mu, model.beta());
            Ok(Setup {
                x0: normalised(&model, c, scale)?,
                law: FeedbackLaw::FiniteTime { mu, shift: 0.0 },
                opts: sim(1e-3, 1.2 * bound + 0.1),
                post: Post::Settling {
                    bound,
                    label: "‖x0‖^{2μ}/(2μβ^{1−μ})",
                    exact: false,
                },
                model,
                derived: none(),
            })
        }
        "heat_spectral_kernel" => {
            let modes = count(p, "modes")?;
            if modes < 4 {
                return Err(CliError::Validation {
                    field: "modes".into(),
                    reason: "must be ≥ 4 to contain φ₄".into(),
                });
            }
            let model = heat_projection(modes)?;
            let x0 = StateVector::basis(model.space(), 3).scaled(positive(p, "x0_scale")?);
            Ok(Setup {
                x0,
                model,
                law: FeedbackLaw::FiniteTime {
                    mu: get(p, "mu"),
                    shift: 0.0,
                },
                opts: sim(1e-3, 0.1),
                post: Post::KernelMode {
                    lambda: (4.0 * PI).powi(2),
                },
                derived: none(),
            })
        }
        "transport_fts_delayed" => {
            let (n, dx) = cells(p)?;
            let model = Model::build(ModelSpec::TransportL2Fts {
                cells: n,
                dx,
                a_cut: get(p, "a_cut"),
            })?;
            let (mu, tau) = (get(p, "mu"), get(p, "tau"));
            let scale = positive(p, "x0_scale")?;
            let c = (0..n)
                .map(|i| {
                    if (i as f64 + 0.5) * dx < 2.0 {
                        gaussian(rng)
                    } else {
                        0.0
                    }
                })
                .collect();
            let bound = tau + fts_bound(scale, mu, 1.0);
            Ok(Setup {
                x0: normalised(&model, c, scale)?,
                model,
                law: FeedbackLaw::DelayedSwitch {
                    tau,
                    inner: Box::new(FeedbackLaw::FiniteTime { mu, shift: 0.0 }),
                },
                opts: sim(dx, (1.2 * bound).max(bound + 1.0)),
                post: Post::Settling {
                    bound,
                    label: "τ + ‖x0‖^{2μ}/(2μ)",
                    exact: false,
                },
                derived: none(),
            })
        }
        "noninvariant_ft" => {
            let model = Model::build(ModelSpec::FiniteDimCustom {
                a: vec![vec![-1.0, 1.0], vec![0.0, -1.0]],
                b: vec![vec![1.0, 0.0], vec![0.0, 2.0]],
                omega0: 0.0,
            })?;
            let mu = get(p, "mu");
            let x0 = normalised(&model, vec![1.0, 1.0], positive(p, "x0_scale")?)?;
            let v0 = model.b_form(&x0)?;
            let beta = model.beta();
            let stated = v0.powf(mu) / (beta * mu);
            Ok(Setup {
                x0,
                model,
                law: FeedbackLaw::NonInvariantFt {
                    mu,
                    alpha: get(p, "alpha"),
                },
                opts: sim(1e-3, 1.2 * stated + 0.1),
                post: Post::NonInvariant { v0, beta, mu },
                derived: BTreeMap::from([("V0".to_string(), v0)]),
            })
        }
        "linear_fts" => {
            let modes = count(p, "modes")?;
            let model = heat_projection(modes)?;
            let mu = get(p, "mu");
            let scale = positive(p, "x0_scale")?;
            let fixed_time = get(p, "fixed_time") != 0.0;
            let mut c = vec![0.0; modes];
            for x in c.iter_mut().take(3) {
                *x = gaussian(rng);
            }
            let beta = model.beta();
            let (bound, label) = if fixed_time {
                (PI / (4.0 * mu * beta.powf(1.0 - mu)), "π/(4μβ^{1−μ})")
            } else {
                (fts_bound(scale, mu, beta), "‖x0‖^{2μ}/(2μβ^{1−μ})")
            };
            Ok(Setup {
                x0: normalised(&model, c, scale)?,
                law: FeedbackLaw::LinearFt {
                    mu,
                    omega0: model.omega0(),
                    alpha_coerc: positive(p, "alpha_coerc")?,
                    fixed_time,
                },
                model,
                opts: sim(1e-3, 1.2 * bound + 0.1),
                post: Post::Settling {
                    bound,
                    label,
                    exact: false,
                },
                derived: none(),
            })
        }
        other => Err(CliError::UnknownScenario {
            name: other.to_string(),
            available: CATALOG.iter().map(|s| s.name).collect::<Vec<_>>().join(", "),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn every_scenario_builds_with_defaults() {
        for info in CATALOG {
            let p = resolve_params(info, &Params::new()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let s = build(info, &p, 1, &mut rng).unwrap();
            s.opts.validate().unwrap();
            s.law.validate_for(&s.model).unwrap();
        }
    }

    #[test]
    fn unknown_names_list_the_catalog() {
        let err = lookup("does_not_exist").unwrap_err().to_string();
        assert!(err.contains("scalar_fts") && err.contains("linear_fts"), "{err}");
        assert_eq!(lookup("wave_damped").unwrap().name, "wave_damped_vr");
    }

    #[test]
    fn unknown_keys_name_the_field() {
        let info = lookup("scalar_fts").unwrap();
        let err = resolve_params(info, &Params::from([("muu".into(), 0.2)])).unwrap_err();
        assert!(err.to_string().contains("muu"));
        let ok = resolve_params(info, &Params::from([("μ".into(), 0.2)])).unwrap();
        assert_eq!(ok["mu"], 0.2);
    }

    #[test]
    fn prescribed_gain_is_derived_from_target() {
        let info = lookup("r4_prts").unwrap();
        let p = resolve_params(info, &Params::new()).unwrap();
        let s = build(info, &p, 0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!((s.derived["rho"] - PI / (4.0 * 0.5 * 0.25)).abs() < 1e-12);
    }
}
