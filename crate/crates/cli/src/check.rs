//! The `check` verb: lemma oracles and assumption verifiers, one line each.

use bilstab::analysis::{
    fts_necessary_check, observability_estimate, parsegov_extinction_time, parsegov_numeric, sequence_lemma_oracle,
    verify_a2,
};
use bilstab::{Model, ModelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::CliResult;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub detail: String,
    pub pass: bool,
}

fn line(name: impl Into<String>, detail: impl Into<String>, pass: bool) -> CheckLine {
    CheckLine {
        name: name.into(),
        detail: detail.into(),
        pass,
    }
}

pub fn run_checks(seed: u64) -> CliResult<Vec<CheckLine>> {
    let mut out = Vec::new();

    for (c, alpha) in [(1.0, 0.0), (0.5, 1.0), (2.0, -0.5)] {
        let v = sequence_lemma_oracle(c, alpha, 1.0, 10_000)?;
        let drift = (v.sup_scaled - v.sup_scaled_tenth).abs() / v.sup_scaled_tenth;
        out.push(line(
            format!("sequence lemma C={c} α={alpha}"),
            format!(
                "sup s_k(k+1)^{{1/(α+1)}} = {:.6}, change K=10³→10⁴ {drift:.2e}",
                v.sup_scaled
            ),
            v.pass && v.strictly_decreasing,
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut below, mut worst) = (true, 0.0f64);
    for _ in 0..1000 {
        let a = rng.random_range(0.1..10.0);
        let b = rng.random_range(0.1..10.0);
        let nu = rng.random_range(0.05..0.45);
        let v0 = 10f64.powf(rng.random_range(-3.0..3.0));
        let (exact, bound) = parsegov_extinction_time(a, b, nu, v0);
        below &= exact <= bound;
        let numeric = parsegov_numeric(a, b, nu, v0, 1e-3);
        worst = worst.max((numeric - exact).abs() / exact);
    }
    out.push(line("Parsegov closed form ≤ π/(2ν√(ab))", "1000 random draws", below));
    out.push(line(
        "Parsegov numeric vs closed form",
        format!("max relative error {worst:.2e} (tol 1e-3)"),
        worst <= 1e-3,
    ));

    let a_sup: Vec<f64> = (0..51)
        .map(|i| 1.0 + (i as f64 / 50.0) * (1.0 - i as f64 / 50.0))
        .collect();
    let a2_models = [
        ModelSpec::TransportL1 {
            cells: 500,
            dx: 0.01,
            alpha_cut: 0.5,
        },
        ModelSpec::HeatNeumannSup { a: a_sup },
        ModelSpec::WaveDamped { modes: 16 },
        ModelSpec::HeatSpectralProjection {
            modes: 16,
            weights: vec![2.0, 1.0, 3.0],
        },
        ModelSpec::FiniteDimR4,
    ];
    for spec in a2_models {
        let name = spec.name();
        let m = Model::build(spec)?;
        let r = verify_a2(&m, 2000, seed)?;
        out.push(line(
            format!("(A2) Lipschitz bound on {name}"),
            format!("𝒦 = {}, worst ratio {:.6}", r.kappa, r.worst_ratio),
            r.pass,
        ));
    }

    let heat = Model::build(ModelSpec::HeatSpectralProjection {
        modes: 8,
        weights: vec![2.0, 1.0, 3.0],
    })?;
    let v = fts_necessary_check(&heat)?;
    let w4 = v.witness.as_ref().is_some_and(|w| w.get(3) == Some(&1.0));
    out.push(line(
        "FTS obstruction on heat projection",
        "witness φ₄ expected",
        v.impossible && w4,
    ));
    let r4 = Model::build(ModelSpec::FiniteDimR4)?;
    let v = fts_necessary_check(&r4)?;
    out.push(line(
        "no FTS obstruction on the four-dimensional example",
        format!("kernel residual {:.3}", v.residual),
        !v.impossible,
    ));

    let wave = Model::build(ModelSpec::WaveDamped { modes: 16 })?;
    let est = observability_estimate(&wave, 1.0, 50, seed)?;
    out.push(line(
        "damped-wave observability δ̂(T=1)",
        format!("δ̂ = {:.8} (expected 0.5)", est.delta_initial),
        (est.delta_initial - 0.5).abs() <= 1e-4,
    ));
    Ok(out)
}

pub fn format_table(lines: &[CheckLine]) -> String {
    let width = lines.iter().map(|l| l.name.chars().count()).max().unwrap_or(0);
    let mut s = String::new();
    for l in lines {
        let pad = width - l.name.chars().count();
        s.push_str(&format!(
            "{} {}{}  {}\n",
            if l.pass { "PASS" } else { "FAIL" },
            l.name,
            " ".repeat(pad),
            l.detail
        ));
    }
    s
}
